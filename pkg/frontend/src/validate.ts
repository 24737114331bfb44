// Client-side mirror of the server's layout validation so bad payloads are
// caught before a request goes out. Messages carry field paths, matching the
// service's 400 bodies.

import type { LayoutJson } from './types.js'

export const NUM_CLASSES = 12
export const MAX_OBJECTS = 8
export const COORD_BINS = 32
export const MIN_BOX_SIZE = 1 / COORD_BINS
const EDGE_EPS = 1e-6

export function validateLayout(obj: LayoutJson, path = 'layout'): string | null {
  if (typeof obj !== 'object' || obj === null) return `${path}: expected an object`
  if (!Number.isInteger(obj.timestep) || obj.timestep < 0) {
    return `${path}.timestep: expected a nonnegative integer`
  }
  if (!Array.isArray(obj.boxes)) return `${path}.boxes: expected a list`
  if (obj.boxes.length > MAX_OBJECTS) {
    return `${path}.boxes: ${obj.boxes.length} boxes exceed the maximum ${MAX_OBJECTS}`
  }
  for (let i = 0; i < obj.boxes.length; i++) {
    const b = obj.boxes[i]
    const bp = `${path}.boxes[${i}]`
    if (typeof b !== 'object' || b === null) return `${bp}: expected an object`
    if (!Number.isInteger(b.class) || b.class < 0 || b.class >= NUM_CLASSES) {
      return `${bp}.class: expected an integer in 0..${NUM_CLASSES - 1}`
    }
    for (const key of ['x', 'y', 'w', 'h'] as const) {
      const v = b[key]
      if (typeof v !== 'number' || !Number.isFinite(v)) return `${bp}.${key}: expected a finite number`
    }
    if (b.w <= 0 || b.w > 1 || b.h <= 0 || b.h > 1) return `${bp}.w/h: sizes must be in (0, 1]`
    if (b.x < 0 || b.x > 1 || b.y < 0 || b.y > 1) return `${bp}.x/y: centers must be in [0, 1]`
    if (b.x - b.w / 2 < -EDGE_EPS || b.x + b.w / 2 > 1 + EDGE_EPS) {
      return `${bp}.x: box extends past the horizontal canvas edge`
    }
    if (b.y - b.h / 2 < -EDGE_EPS || b.y + b.h / 2 > 1 + EDGE_EPS) {
      return `${bp}.y: box extends past the vertical canvas edge`
    }
    if (b.object_id !== undefined && !Number.isInteger(b.object_id)) {
      return `${bp}.object_id: expected an integer when present`
    }
  }
  return null
}
