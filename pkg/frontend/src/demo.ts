// Client-built demo reference scene: paints sprites the same way the
// renderer does (class body, variant accent in the top-left quadrant) so the
// demo frame is a valid in-distribution reference.

import type { ClassesResponse } from './types.js'
import type { EditorBox } from './state.js'
import { rgb } from './canvas.js'

export interface DemoScene {
  referenceFrame: string // base64 PNG
  referenceLayout: EditorBox[]
  slots: EditorBox[][]
}

interface DemoObject {
  class: number
  variant: number
  x: number
  y: number
  w: number
  h: number
}

const DEMO_OBJECTS: DemoObject[] = [
  { class: 0, variant: 1, x: 0.25, y: 0.25, w: 0.25, h: 0.25 },
  { class: 5, variant: 3, x: 0.75, y: 0.625, w: 0.25, h: 0.5 },
  { class: 9, variant: 0, x: 0.25, y: 0.75, w: 0.25, h: 0.25 },
]

export function buildDemoScene(info: ClassesResponse, numSlots: number): DemoScene {
  const size = info.canvas_size
  const canvas = document.createElement('canvas')
  canvas.width = size
  canvas.height = size
  const ctx = canvas.getContext('2d')!
  ctx.fillStyle = rgb(info.backgrounds[0])
  ctx.fillRect(0, 0, size, size)
  for (const obj of DEMO_OBJECTS) {
    const left = Math.round((obj.x - obj.w / 2) * size)
    const top = Math.round((obj.y - obj.h / 2) * size)
    const w = Math.round(obj.w * size)
    const h = Math.round(obj.h * size)
    ctx.fillStyle = rgb(info.classes[obj.class].color)
    ctx.fillRect(left, top, w, h)
    ctx.fillStyle = rgb(info.variants[obj.variant].color)
    ctx.fillRect(left, top, Math.floor(w / 2), Math.floor(h / 2))
  }
  const referenceFrame = canvas.toDataURL('image/png').split(',')[1]
  const referenceLayout = DEMO_OBJECTS.map((o) => ({
    class: o.class, x: o.x, y: o.y, w: o.w, h: o.h,
  }))
  // seed each timeline slot with the same content as the reference
  const slots = Array.from({ length: numSlots }, () => referenceLayout.map((b) => ({ ...b })))
  return { referenceFrame, referenceLayout, slots }
}
