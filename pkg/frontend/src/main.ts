// Layout studio: a timeline of per-keyframe layout canvases, server-assisted
// layout sampling, and keyframe/filmstrip views with before/after retention.

import { ApiClient, ApiError, RevisionGate } from './api.js'
import { VIEW, drawSlot, hitTest } from './canvas.js'
import { buildDemoScene } from './demo.js'
import {
  EditRejected,
  EditorState,
  allLayouts,
  apply,
  initialState,
  labelSets,
  pinnedLayouts,
  setSlots,
  undo,
  validateAll,
} from './state.js'
import type { ClassesResponse, VideoResponse } from './types.js'

const api = new ApiClient()
let state: EditorState
let info: ClassesResponse
let selected: { slot: number; index: number } = { slot: 0, index: -1 }
let referenceImage: HTMLImageElement | null = null
let lastVideo: VideoResponse | null = null
let previousVideo: VideoResponse | null = null
const gate = new RevisionGate(() => state.revision)

const $ = (id: string) => document.getElementById(id)!

function setStatus(msg: string, isError = false) {
  const el = $('status')
  el.textContent = msg
  el.className = isError ? 'status error' : 'status'
}

function b64Image(b64: string): HTMLImageElement {
  const img = new Image()
  img.src = `data:image/png;base64,${b64}`
  return img
}

function redraw() {
  const timeline = $('timeline')
  state.slots.forEach((boxes, i) => {
    const canvas = timeline.querySelectorAll('canvas')[i] as HTMLCanvasElement
    drawSlot(canvas.getContext('2d')!, boxes, info, referenceImage, selected.slot === i ? selected.index : -1)
  })
  const seedInput = $('seed') as HTMLInputElement
  if (document.activeElement !== seedInput) seedInput.value = String(state.seed)
}

function renderVideos() {
  renderVideoInto($('result'), lastVideo, 'current')
  renderVideoInto($('previous'), previousVideo, 'previous')
}

function renderVideoInto(root: HTMLElement, video: VideoResponse | null, label: string) {
  root.innerHTML = ''
  if (!video) return
  const title = document.createElement('h3')
  title.textContent = `${label} (request ${video.request_id.slice(0, 8)})`
  root.appendChild(title)
  const keyframeRow = document.createElement('div')
  keyframeRow.className = 'keyframes'
  for (const idx of video.keyframe_indices.slice(1)) {
    const img = b64Image(video.frames[idx])
    img.className = 'keyframe'
    img.title = `keyframe @ frame ${idx}`
    keyframeRow.appendChild(img)
  }
  root.appendChild(keyframeRow)
  const strip = document.createElement('div')
  strip.className = 'filmstrip'
  video.frames.forEach((frame, t) => {
    const cell = document.createElement('div')
    cell.className = video.keyframe_indices.includes(t) ? 'cell tick' : 'cell'
    const img = b64Image(frame)
    img.title = `frame ${t}`
    cell.appendChild(img)
    strip.appendChild(cell)
  })
  root.appendChild(strip)
}

function guardEdit(fn: () => EditorState) {
  try {
    state = fn()
    setStatus('')
  } catch (e) {
    if (e instanceof EditRejected) setStatus(e.message, true)
    else throw e
  }
  redraw()
}

function buildTimeline() {
  const timeline = $('timeline')
  timeline.innerHTML = ''
  state.slots.forEach((_, slotIdx) => {
    const holder = document.createElement('div')
    holder.className = 'slot'
    const title = document.createElement('div')
    title.className = 'slot-title'
    title.textContent = `keyframe ${slotIdx + 1}`
    holder.appendChild(title)
    const canvas = document.createElement('canvas')
    canvas.width = VIEW
    canvas.height = VIEW
    attachInteractions(canvas, slotIdx)
    holder.appendChild(canvas)
    timeline.appendChild(holder)
  })
}

function attachInteractions(canvas: HTMLCanvasElement, slotIdx: number) {
  let drag: { index: number; mode: 'move' | 'resize' } | null = null
  canvas.addEventListener('mousedown', (ev) => {
    const rect = canvas.getBoundingClientRect()
    const px = ev.clientX - rect.left
    const py = ev.clientY - rect.top
    const hit = hitTest(state.slots[slotIdx], px, py)
    selected = { slot: slotIdx, index: hit ? hit.index : -1 }
    drag = hit
    redraw()
  })
  canvas.addEventListener('mousemove', (ev) => {
    if (!drag) return
    const rect = canvas.getBoundingClientRect()
    const px = (ev.clientX - rect.left) / VIEW
    const py = (ev.clientY - rect.top) / VIEW
    const box = state.slots[slotIdx][drag.index]
    if (drag.mode === 'move') {
      guardEdit(() => apply(state, { kind: 'move', slot: slotIdx, index: drag!.index, x: px, y: py }))
    } else {
      const w = Math.max((px - (box.x - box.w / 2)) as number, 0)
      const h = Math.max((py - (box.y - box.h / 2)) as number, 0)
      guardEdit(() => apply(state, { kind: 'resize', slot: slotIdx, index: drag!.index, w, h }))
    }
  })
  window.addEventListener('mouseup', () => {
    drag = null
  })
}

function selectedBoxAction(kind: 'delete' | 'pin' | 'reclass') {
  if (selected.index < 0) {
    setStatus('select a box first', true)
    return
  }
  const { slot, index } = selected
  if (kind === 'delete') {
    guardEdit(() => apply(state, { kind: 'delete', slot, index }))
    selected = { slot, index: -1 }
  } else if (kind === 'pin') {
    const pinned = !state.slots[slot][index].pinned
    guardEdit(() => apply(state, { kind: 'pin', slot, index, pinned }))
  } else {
    const cls = (state.slots[slot][index].class + 1) % info.classes.length
    guardEdit(() => apply(state, { kind: 'reclass', slot, index, class: cls }))
  }
  redraw()
}

async function sampleLayouts() {
  const err = validateAll(state)
  if (err) {
    setStatus(err, true)
    return
  }
  setStatus('sampling layouts…')
  try {
    const fresh = await gate.run(
      () =>
        api.sampleLayouts({
          reference_layout: allLayouts(state)[0],
          label_sets: labelSets(state),
          seed: state.seed,
          pinned: pinnedLayouts(state),
        }),
      (resp) => {
        state = setSlots(
          state,
          resp.layouts.map((l) => l.boxes),
        )
        setStatus(`layouts sampled (request ${resp.request_id.slice(0, 8)})`)
        redraw()
      },
      () => setStatus('discarded a stale layout response'),
    )
    if (!fresh) console.warn('stale layout response discarded')
  } catch (e) {
    setStatus(e instanceof ApiError ? e.message : `network failure: ${e}`, true)
  }
}

async function generateVideo() {
  const err = validateAll(state)
  if (err) {
    setStatus(err, true)
    return
  }
  if (!state.referenceFrame) {
    setStatus('no reference frame loaded', true)
    return
  }
  setStatus('generating video…')
  try {
    const fresh = await gate.run(
      () =>
        api.video({
          reference_frame: state.referenceFrame!,
          layouts: allLayouts(state),
          seed: state.seed,
        }),
      (resp) => {
        previousVideo = lastVideo
        lastVideo = resp
        renderVideos()
        setStatus(`video ready (request ${resp.request_id.slice(0, 8)})`)
      },
      () => setStatus('discarded a stale video response'),
    )
    if (!fresh) console.warn('stale video response discarded')
  } catch (e) {
    setStatus(e instanceof ApiError ? e.message : `network failure: ${e} — state kept, retry when ready`, true)
  }
}

async function boot() {
  info = await api.classes()
  state = initialState(info.num_keyframes)
  const demo = buildDemoScene(info, info.num_keyframes)
  state = { ...state, ...demo, revision: state.revision + 1 }
  referenceImage = b64Image(demo.referenceFrame)
  referenceImage.onload = () => redraw()
  buildTimeline()
  redraw()

  $('sample').addEventListener('click', sampleLayouts)
  $('generate').addEventListener('click', generateVideo)
  $('undo').addEventListener('click', () => {
    state = undo(state)
    redraw()
  })
  $('add').addEventListener('click', () => {
    const slot = selected.slot
    guardEdit(() =>
      apply(state, {
        kind: 'add',
        slot,
        box: { class: 0, x: 0.5, y: 0.5, w: 0.25, h: 0.25 },
      }),
    )
  })
  $('delete').addEventListener('click', () => selectedBoxAction('delete'))
  $('pin').addEventListener('click', () => selectedBoxAction('pin'))
  $('reclass').addEventListener('click', () => selectedBoxAction('reclass'))
  ;($('seed') as HTMLInputElement).addEventListener('change', (ev) => {
    const v = parseInt((ev.target as HTMLInputElement).value, 10)
    if (Number.isFinite(v)) {
      state = { ...state, seed: v, revision: state.revision + 1 }
      setStatus(`seed set to ${v}`)
    }
  })
  setStatus('ready — edit boxes, sample layouts, generate')
}

boot().catch((e) => setStatus(`failed to start: ${e}`, true))
