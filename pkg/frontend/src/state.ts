// Editor state: N timeline slots of editable boxes, an undo stack, and a
// revision counter that stamps requests so stale responses can be discarded.
// All transitions are pure: apply() returns a fresh state object.

import { MAX_OBJECTS, MIN_BOX_SIZE, NUM_CLASSES, validateLayout } from './validate.js'
import type { Box, LayoutJson } from './types.js'

export interface EditorBox extends Box {
  pinned?: boolean
}

export interface EditorState {
  referenceFrame: string | null // base64 PNG
  referenceLayout: EditorBox[]
  slots: EditorBox[][] // timesteps 1..N
  seed: number
  revision: number
  undoStack: EditorBox[][][]
}

export type EditAction =
  | { kind: 'add'; slot: number; box: EditorBox }
  | { kind: 'delete'; slot: number; index: number }
  | { kind: 'move'; slot: number; index: number; x: number; y: number }
  | { kind: 'resize'; slot: number; index: number; w: number; h: number }
  | { kind: 'reclass'; slot: number; index: number; class: number }
  | { kind: 'pin'; slot: number; index: number; pinned: boolean }

export class EditRejected extends Error {}

export function initialState(numSlots: number, seed = 0): EditorState {
  return {
    referenceFrame: null,
    referenceLayout: [],
    slots: Array.from({ length: numSlots }, () => []),
    seed,
    revision: 0,
    undoStack: [],
  }
}

const clamp01 = (v: number, lo: number, hi: number) => Math.min(Math.max(v, lo), hi)

export function clampBox(box: EditorBox): EditorBox {
  const w = clamp01(box.w, MIN_BOX_SIZE, 1)
  const h = clamp01(box.h, MIN_BOX_SIZE, 1)
  return {
    ...box,
    w,
    h,
    x: clamp01(box.x, w / 2, 1 - w / 2),
    y: clamp01(box.y, h / 2, 1 - h / 2),
  }
}

function cloneSlots(slots: EditorBox[][]): EditorBox[][] {
  return slots.map((slot) => slot.map((b) => ({ ...b })))
}

function checkTarget(state: EditorState, slot: number, index?: number): EditorBox[] {
  if (slot < 0 || slot >= state.slots.length) throw new EditRejected(`slot ${slot} out of range`)
  const boxes = state.slots[slot]
  if (index !== undefined && (index < 0 || index >= boxes.length)) {
    throw new EditRejected(`box ${index} out of range in slot ${slot}`)
  }
  return boxes
}

export function apply(state: EditorState, action: EditAction): EditorState {
  const boxes = checkTarget(state, action.slot, 'index' in action ? action.index : undefined)
  const next = cloneSlots(state.slots)
  const slot = next[action.slot]
  switch (action.kind) {
    case 'add': {
      if (boxes.length >= MAX_OBJECTS) {
        throw new EditRejected(`slot already holds ${MAX_OBJECTS} boxes`)
      }
      if (!Number.isInteger(action.box.class) || action.box.class < 0 || action.box.class >= NUM_CLASSES) {
        throw new EditRejected(`class must be in 0..${NUM_CLASSES - 1}`)
      }
      slot.push(clampBox(action.box))
      break
    }
    case 'delete':
      slot.splice(action.index, 1)
      break
    case 'move':
      slot[action.index] = clampBox({ ...slot[action.index], x: action.x, y: action.y })
      break
    case 'resize': {
      if (action.w < MIN_BOX_SIZE || action.h < MIN_BOX_SIZE) {
        throw new EditRejected(
          `boxes cannot shrink below one coordinate bin (${MIN_BOX_SIZE.toFixed(5)} of the canvas)`,
        )
      }
      slot[action.index] = clampBox({ ...slot[action.index], w: action.w, h: action.h })
      break
    }
    case 'reclass': {
      if (!Number.isInteger(action.class) || action.class < 0 || action.class >= NUM_CLASSES) {
        throw new EditRejected(`class must be in 0..${NUM_CLASSES - 1}`)
      }
      slot[action.index] = { ...slot[action.index], class: action.class }
      break
    }
    case 'pin':
      slot[action.index] = { ...slot[action.index], pinned: action.pinned }
      break
  }
  return {
    ...state,
    slots: next,
    revision: state.revision + 1,
    undoStack: [...state.undoStack, cloneSlots(state.slots)],
  }
}

export function undo(state: EditorState): EditorState {
  if (state.undoStack.length === 0) return state
  const undoStack = state.undoStack.slice(0, -1)
  return {
    ...state,
    slots: cloneSlots(state.undoStack[state.undoStack.length - 1]),
    revision: state.revision + 1,
    undoStack,
  }
}

export function setSlots(state: EditorState, slots: EditorBox[][], keepPinned = true): EditorState {
  const merged = slots.map((slot, i) => {
    const pinned = keepPinned ? state.slots[i].filter((b) => b.pinned) : []
    const incoming = slot.map((b) => ({ ...b }))
    // sampled proposals already include pinned boxes verbatim; avoid doubling
    const rest = incoming.filter(
      (b) => !pinned.some((p) => p.class === b.class && p.x === b.x && p.y === b.y && p.w === b.w && p.h === b.h),
    )
    return [...pinned.map((b) => ({ ...b })), ...rest].slice(0, MAX_OBJECTS)
  })
  return {
    ...state,
    slots: merged,
    revision: state.revision + 1,
    undoStack: [...state.undoStack, cloneSlots(state.slots)],
  }
}

// ------------------------------------------------------------ serialization

export function slotToLayout(state: EditorState, slot: number): LayoutJson {
  return {
    timestep: slot + 1,
    boxes: state.slots[slot].map(({ pinned: _pinned, ...box }) => ({ ...box })),
  }
}

export function referenceToLayout(state: EditorState): LayoutJson {
  return { timestep: 0, boxes: state.referenceLayout.map((b) => ({ ...b })) }
}

export function allLayouts(state: EditorState): LayoutJson[] {
  return [referenceToLayout(state), ...state.slots.map((_, i) => slotToLayout(state, i))]
}

export function labelSets(state: EditorState): number[][] {
  return state.slots.map((slot) => slot.map((b) => b.class).sort((a, b) => a - b))
}

export function pinnedLayouts(state: EditorState): LayoutJson[] {
  const out: LayoutJson[] = []
  state.slots.forEach((slot, i) => {
    const pinned = slot.filter((b) => b.pinned)
    if (pinned.length > 0) {
      out.push({ timestep: i + 1, boxes: pinned.map(({ pinned: _p, ...box }) => ({ ...box })) })
    }
  })
  return out
}

export function validateAll(state: EditorState): string | null {
  for (const layout of allLayouts(state)) {
    const err = validateLayout(layout, `layout[t=${layout.timestep}]`)
    if (err) return err
  }
  return null
}
