/**
 * Typed client for the reader-study HTTP API.
 *
 * Transient failures (network errors, 5xx) are retried with exponential
 * backoff so a committed choice is never silently dropped; auth and
 * conflict responses map to typed errors the session layer can act on.
 */

export const CHOICES = ['AFIB', 'NSR', 'OTHER', 'NOT-SURE'] as const;
export type Choice = (typeof CHOICES)[number];

/** Blinded item payload: waveform + progress, never a reference label. */
export interface ItemView {
  item_id: string;
  sampling_rate_hz: number;
  samples_uv: number[];
  position: number;
  total: number;
}

export interface DoneView {
  done: true;
  total: number;
}

export type NextResponse = ItemView | DoneView;

export function isDone(resp: NextResponse): resp is DoneView {
  return (resp as DoneView).done === true;
}

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
    this.name = 'ApiError';
  }
}

export class AuthError extends ApiError {
  constructor(message: string) {
    super(message, 401);
    this.name = 'AuthError';
  }
}

export class ConflictError extends ApiError {
  constructor(message: string) {
    super(message, 409);
    this.name = 'ConflictError';
  }
}

/** Malformed server payload; surfaced as an error panel with retry. */
export class PayloadError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'PayloadError';
  }
}

/** Attempts per request: 1 try + 3 retries. */
const MAX_ATTEMPTS = 4;
const BASE_DELAY_MS = 250;

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;
export type SleepFn = (ms: number) => Promise<void>;

const realSleep: SleepFn = (ms) => new Promise((resolve) => setTimeout(resolve, ms));

/** Narrow an arbitrary JSON value into an ItemView or throw PayloadError. */
export function validateItem(payload: unknown): ItemView {
  const p = payload as Record<string, unknown>;
  if (
    typeof p !== 'object' || p === null ||
    typeof p.item_id !== 'string' ||
    typeof p.sampling_rate_hz !== 'number' || !(p.sampling_rate_hz > 0) ||
    !Array.isArray(p.samples_uv) || p.samples_uv.length === 0 ||
    !p.samples_uv.every((v) => typeof v === 'number' && Number.isFinite(v)) ||
    typeof p.position !== 'number' || typeof p.total !== 'number'
  ) {
    throw new PayloadError('malformed item payload from server');
  }
  return {
    item_id: p.item_id,
    sampling_rate_hz: p.sampling_rate_hz,
    samples_uv: p.samples_uv as number[],
    position: p.position,
    total: p.total,
  };
}

export class StudyClient {
  constructor(
    private baseUrl: string,
    private studyId: string,
    private raterToken: string,
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
    private sleep: SleepFn = realSleep,
  ) {}

  /** Blinded payload for the first unanswered item, or the done marker. */
  async next(): Promise<NextResponse> {
    const body = await this.request(`/api/studies/${this.studyId}/next`, { method: 'GET' });
    if ((body as DoneView).done === true) {
      return { done: true, total: (body as DoneView).total };
    }
    return validateItem(body);
  }

  /**
   * Commit one annotation. A ConflictError here means the item is already
   * answered server-side — including the case where a retried POST landed
   * twice — so callers treat it as "recorded, move on".
   */
  async submit(itemId: string, label: Choice): Promise<void> {
    await this.request(`/api/studies/${this.studyId}/annotations`, {
      method: 'POST',
      body: JSON.stringify({ item_id: itemId, label }),
    });
  }

  private async request(path: string, init: RequestInit): Promise<unknown> {
    let lastError: Error = new Error('unreachable');
    for (let attempt = 0; attempt < MAX_ATTEMPTS; attempt++) {
      if (attempt > 0) {
        await this.sleep(BASE_DELAY_MS * 2 ** (attempt - 1));
      }
      let resp: Response;
      try {
        resp = await this.fetchFn(this.baseUrl + path, {
          ...init,
          headers: {
            'Content-Type': 'application/json',
            'X-Rater-Token': this.raterToken,
          },
        });
      } catch (err) {
        lastError = err instanceof Error ? err : new Error(String(err));
        continue; // network failure: retry with backoff
      }
      if (resp.status >= 500) {
        lastError = new ApiError(`server error ${resp.status}`, resp.status);
        continue;
      }
      if (resp.status === 401) throw new AuthError('invalid or missing rater token');
      if (resp.status === 409) throw new ConflictError('item already answered');
      if (!resp.ok) throw new ApiError(`request failed with ${resp.status}`, resp.status);
      try {
        return await resp.json();
      } catch {
        throw new PayloadError('response body is not valid JSON');
      }
    }
    throw lastError;
  }
}
