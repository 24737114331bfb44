import { describe, expect, it } from 'vitest'

import {
  EditRejected,
  allLayouts,
  apply,
  initialState,
  labelSets,
  pinnedLayouts,
  setSlots,
  slotToLayout,
  undo,
  validateAll,
} from '../src/state.js'
import type { EditAction, EditorBox, EditorState } from '../src/state.js'
import { MAX_OBJECTS, MIN_BOX_SIZE, validateLayout } from '../src/validate.js'

const box = (over: Partial<EditorBox> = {}): EditorBox => ({
  class: 2,
  x: 0.5,
  y: 0.5,
  w: 0.25,
  h: 0.25,
  ...over,
})

function seeded(): EditorState {
  let s = initialState(4)
  s = apply(s, { kind: 'add', slot: 0, box: box() })
  s = apply(s, { kind: 'add', slot: 1, box: box({ class: 5, x: 0.25 }) })
  return s
}

describe('edit transitions', () => {
  it('delete then undo restores the previous state', () => {
    const before = seeded()
    const after = apply(before, { kind: 'delete', slot: 0, index: 0 })
    expect(after.slots[0]).toHaveLength(0)
    const restored = undo(after)
    expect(restored.slots).toEqual(before.slots)
  })

  it('undo unwinds a whole edit chain', () => {
    let s = seeded()
    const snapshots = [s.slots]
    for (const action of [
      { kind: 'move', slot: 0, index: 0, x: 0.7, y: 0.3 },
      { kind: 'resize', slot: 0, index: 0, w: 0.5, h: 0.5 },
      { kind: 'reclass', slot: 0, index: 0, class: 9 },
    ] as EditAction[]) {
      s = apply(s, action)
      snapshots.push(s.slots)
    }
    for (let i = snapshots.length - 2; i >= 0; i--) {
      s = undo(s)
      expect(s.slots).toEqual(snapshots[i])
    }
  })

  it('moves beyond the canvas edge are clamped to the boundary', () => {
    let s = seeded()
    s = apply(s, { kind: 'move', slot: 0, index: 0, x: 2.0, y: -1.0 })
    const b = s.slots[0][0]
    expect(b.x).toBeCloseTo(1 - b.w / 2, 12)
    expect(b.y).toBeCloseTo(b.h / 2, 12)
    expect(validateLayout(slotToLayout(s, 0))).toBeNull()
  })

  it('resizing below one bin width is rejected with a hint', () => {
    const s = seeded()
    expect(() => apply(s, { kind: 'resize', slot: 0, index: 0, w: MIN_BOX_SIZE / 2, h: 0.2 })).toThrow(
      EditRejected,
    )
    expect(() => apply(s, { kind: 'resize', slot: 0, index: 0, w: MIN_BOX_SIZE / 2, h: 0.2 })).toThrow(
      /bin/,
    )
  })

  it('rejects adds past the object cap', () => {
    let s = initialState(1)
    for (let i = 0; i < MAX_OBJECTS; i++) s = apply(s, { kind: 'add', slot: 0, box: box({ x: 0.3 }) })
    expect(() => apply(s, { kind: 'add', slot: 0, box: box() })).toThrow(EditRejected)
  })

  it('every edit bumps the revision counter', () => {
    let s = seeded()
    const r0 = s.revision
    s = apply(s, { kind: 'move', slot: 0, index: 0, x: 0.6, y: 0.6 })
    expect(s.revision).toBe(r0 + 1)
    s = undo(s)
    expect(s.revision).toBe(r0 + 2)
  })
})

describe('serialization', () => {
  it('label sets are the sorted classes per slot', () => {
    let s = seeded()
    s = apply(s, { kind: 'add', slot: 0, box: box({ class: 0 }) })
    expect(labelSets(s)[0]).toEqual([0, 2])
    expect(labelSets(s)[1]).toEqual([5])
    expect(labelSets(s)[2]).toEqual([])
  })

  it('pinned boxes serialize separately without the pinned flag', () => {
    let s = seeded()
    s = apply(s, { kind: 'pin', slot: 0, index: 0, pinned: true })
    const pinned = pinnedLayouts(s)
    expect(pinned).toHaveLength(1)
    expect(pinned[0].timestep).toBe(1)
    expect(pinned[0].boxes[0]).not.toHaveProperty('pinned')
  })

  it('sampled layouts merge while keeping pinned boxes', () => {
    let s = seeded()
    s = apply(s, { kind: 'pin', slot: 0, index: 0, pinned: true })
    const pinnedBox = s.slots[0][0]
    const proposals = s.slots.map((_, i) => (i === 0 ? [{ ...pinnedBox }, box({ class: 7, x: 0.8 })] : [box({ class: 1 })]))
    s = setSlots(s, proposals)
    expect(s.slots[0][0]).toEqual(pinnedBox)
    expect(s.slots[0]).toHaveLength(2)
  })
})

describe('fuzzed edit scripts always serialize to valid layouts', () => {
  // deterministic xorshift so failures are reproducible
  function rng(seed: number) {
    let x = seed || 1
    return () => {
      x ^= x << 13
      x ^= x >>> 17
      x ^= x << 5
      x >>>= 0
      return x / 0xffffffff
    }
  }

  function randomAction(r: () => number, s: EditorState): EditAction {
    const slot = Math.floor(r() * s.slots.length)
    const count = s.slots[slot].length
    const kinds: EditAction['kind'][] = count > 0 ? ['add', 'delete', 'move', 'resize', 'reclass', 'pin'] : ['add']
    const kind = kinds[Math.floor(r() * kinds.length)]
    const index = count > 0 ? Math.floor(r() * count) : 0
    switch (kind) {
      case 'add':
        return {
          kind,
          slot,
          box: box({
            class: Math.floor(r() * 14) - 1, // occasionally out of range on purpose
            x: r() * 1.6 - 0.3,
            y: r() * 1.6 - 0.3,
            w: r() * 1.2 + 0.01,
            h: r() * 1.2 + 0.01,
          }),
        }
      case 'delete':
        return { kind, slot, index }
      case 'move':
        return { kind, slot, index, x: r() * 2 - 0.5, y: r() * 2 - 0.5 }
      case 'resize':
        return { kind, slot, index, w: r() * 1.3, h: r() * 1.3 }
      case 'reclass':
        return { kind, slot, index, class: Math.floor(r() * 12) }
      case 'pin':
        return { kind, slot, index, pinned: r() < 0.5 }
    }
  }

  it('1000 random scripts: every reachable state validates', () => {
    for (let script = 0; script < 1000; script++) {
      const r = rng(script + 1)
      let s = initialState(4)
      const steps = 1 + Math.floor(r() * 12)
      for (let i = 0; i < steps; i++) {
        const action = randomAction(r, s)
        try {
          s = r() < 0.07 ? undo(s) : apply(s, action)
        } catch (e) {
          expect(e).toBeInstanceOf(EditRejected) // rejected edits leave state untouched
        }
      }
      expect(validateAll(s)).toBeNull()
      for (const layout of allLayouts(s)) {
        expect(validateLayout(layout)).toBeNull()
      }
    }
  })
})
