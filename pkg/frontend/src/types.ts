// Shared wire types matching the service's JSON schemas.

export interface Box {
  class: number
  x: number
  y: number
  w: number
  h: number
  object_id?: number
}

export interface LayoutJson {
  timestep: number
  boxes: Box[]
}

export interface ClassInfo {
  id: number
  name: string
  color: [number, number, number]
}

export interface ClassesResponse {
  classes: ClassInfo[]
  variants: ClassInfo[]
  backgrounds: [number, number, number][]
  palette: [number, number, number][]
  canvas_size: number
  patch_size: number
  num_keyframes: number
  clip_len: number
  max_objects: number
  coord_bins: number
  keyframe_indices: number[]
}

export interface SampleLayoutsResponse {
  request_id: string
  layouts: LayoutJson[]
}

export interface KeyframesResponse {
  request_id: string
  keyframes: string[]
  tokens: Record<string, number[]>
}

export interface VideoResponse {
  request_id: string
  frames: string[]
  keyframe_indices: number[]
}
