// Canvas drawing and mouse interaction for one timeline slot.

import type { ClassesResponse } from './types.js'
import type { EditorBox } from './state.js'

export const VIEW = 192 // on-screen pixels for the 32px canvas

export function rgb(c: [number, number, number]): string {
  return `rgb(${c[0]}, ${c[1]}, ${c[2]})`
}

export function drawSlot(
  ctx: CanvasRenderingContext2D,
  boxes: EditorBox[],
  info: ClassesResponse,
  background: HTMLImageElement | null,
  selected: number,
): void {
  ctx.clearRect(0, 0, VIEW, VIEW)
  ctx.imageSmoothingEnabled = false
  if (background) {
    ctx.drawImage(background, 0, 0, VIEW, VIEW)
  } else {
    ctx.fillStyle = '#20222c'
    ctx.fillRect(0, 0, VIEW, VIEW)
  }
  boxes.forEach((box, i) => {
    const color = info.classes[box.class]?.color ?? [255, 255, 255]
    const left = (box.x - box.w / 2) * VIEW
    const top = (box.y - box.h / 2) * VIEW
    const w = box.w * VIEW
    const h = box.h * VIEW
    ctx.fillStyle = rgb(color as [number, number, number])
    ctx.globalAlpha = 0.25
    ctx.fillRect(left, top, w, h)
    ctx.globalAlpha = 1.0
    ctx.lineWidth = i === selected ? 3 : 1.5
    ctx.strokeStyle = rgb(color as [number, number, number])
    ctx.strokeRect(left, top, w, h)
    ctx.font = '10px monospace'
    ctx.fillStyle = '#fff'
    const name = info.classes[box.class]?.name ?? `c${box.class}`
    ctx.fillText(box.pinned ? `*${name}` : name, left + 2, top + 10)
    if (i === selected) {
      ctx.fillStyle = '#fff'
      ctx.fillRect(left + w - 5, top + h - 5, 5, 5) // resize handle
    }
  })
}

export interface HitResult {
  index: number
  mode: 'move' | 'resize'
}

export function hitTest(boxes: EditorBox[], px: number, py: number): HitResult | null {
  // topmost box wins; a corner hit on the selected handle means resize
  for (let i = boxes.length - 1; i >= 0; i--) {
    const b = boxes[i]
    const left = (b.x - b.w / 2) * VIEW
    const top = (b.y - b.h / 2) * VIEW
    const right = left + b.w * VIEW
    const bottom = top + b.h * VIEW
    if (px >= right - 7 && px <= right + 3 && py >= bottom - 7 && py <= bottom + 3) {
      return { index: i, mode: 'resize' }
    }
    if (px >= left && px <= right && py >= top && py <= bottom) {
      return { index: i, mode: 'move' }
    }
  }
  return null
}
