// Thin client over the generation service. Every mutating call is stamped
// with the editor revision at send time; responses for a superseded revision
// are discarded so slow generations never clobber newer edits.

import type {
  ClassesResponse,
  KeyframesResponse,
  LayoutJson,
  SampleLayoutsResponse,
  VideoResponse,
} from './types.js'

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message)
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>

export class ApiClient {
  constructor(
    private base = '',
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const resp = await this.fetchImpl(`${this.base}${path}`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    })
    const data = await resp.json()
    if (!resp.ok) {
      throw new ApiError(resp.status, (data && data.error) || `request failed (${resp.status})`)
    }
    return data as T
  }

  async classes(): Promise<ClassesResponse> {
    const resp = await this.fetchImpl(`${this.base}/api/classes`)
    if (!resp.ok) throw new ApiError(resp.status, `classes lookup failed (${resp.status})`)
    return (await resp.json()) as ClassesResponse
  }

  sampleLayouts(body: {
    reference_layout: LayoutJson
    label_sets: number[][]
    seed: number
    pinned?: LayoutJson[]
  }): Promise<SampleLayoutsResponse> {
    return this.post('/api/layouts/sample', body)
  }

  keyframes(body: { reference_frame: string; layouts: LayoutJson[]; seed: number }): Promise<KeyframesResponse> {
    return this.post('/api/keyframes', body)
  }

  video(body: {
    reference_frame: string
    layouts?: LayoutJson[]
    keyframes?: string[]
    seed: number
  }): Promise<VideoResponse> {
    return this.post('/api/video', body)
  }
}

/**
 * Wraps a request so its result is delivered only if the editor revision has
 * not moved since the request was fired. One generation may be in flight at a
 * time; a newer call supersedes older pending ones.
 */
export class RevisionGate {
  private inFlight = 0

  constructor(private currentRevision: () => number) {}

  async run<T>(work: () => Promise<T>, onFresh: (value: T) => void, onStale?: (value: T) => void): Promise<boolean> {
    const revisionAtSend = this.currentRevision()
    const ticket = ++this.inFlight
    const value = await work()
    const fresh = this.currentRevision() === revisionAtSend && ticket === this.inFlight
    if (fresh) onFresh(value)
    else onStale?.(value)
    return fresh
  }
}
