/** Thin typed client for the session service HTTP API. */

import type { ApiRoundView, ApiSessionView, HealthView } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  readonly status: number;
  readonly stage: string | null;

  constructor(status: number, message: string, stage: string | null = null) {
    super(message);
    this.status = status;
    this.stage = stage;
  }
}

async function raise(resp: Response): Promise<never> {
  let message = `${resp.status} ${resp.statusText}`;
  let stage: string | null = null;
  try {
    const body = await resp.json();
    const detail = body?.detail;
    if (typeof detail === "string") {
      message = detail;
    } else if (detail && typeof detail === "object") {
      message = detail.message ?? message;
      stage = detail.stage ?? null;
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiError(resp.status, message, stage);
}

export interface CreateSessionOptions {
  mode: string;
  k?: number;
  maxRounds?: number;
  targetId?: string;
  visualFraction?: number;
}

export class ApiClient {
  readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn: FetchLike = fetch) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn;
  }

  /** Absolute URL for an image reference returned by the service. */
  imageUrl(path: string): string {
    return path.startsWith("http") ? path : `${this.baseUrl}${path}`;
  }

  async health(): Promise<HealthView> {
    const resp = await this.fetchFn(`${this.baseUrl}/api/health`);
    if (!resp.ok) await raise(resp);
    return resp.json();
  }

  async createSession(opts: CreateSessionOptions): Promise<string> {
    const body: Record<string, unknown> = { mode: opts.mode };
    if (opts.k !== undefined) body.k = opts.k;
    if (opts.maxRounds !== undefined) body.max_rounds = opts.maxRounds;
    if (opts.targetId !== undefined) body.target_id = opts.targetId;
    if (opts.visualFraction !== undefined) body.visual_fraction = opts.visualFraction;
    const resp = await this.fetchFn(`${this.baseUrl}/api/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (resp.status !== 201) await raise(resp);
    const parsed = await resp.json();
    return parsed.session_id;
  }

  async getSession(sessionId: string): Promise<ApiSessionView> {
    const resp = await this.fetchFn(`${this.baseUrl}/api/sessions/${sessionId}`);
    if (!resp.ok) await raise(resp);
    return resp.json();
  }

  async postRound(sessionId: string, query: string): Promise<ApiRoundView> {
    const resp = await this.fetchFn(
      `${this.baseUrl}/api/sessions/${sessionId}/rounds`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ query }),
      },
    );
    if (!resp.ok) await raise(resp);
    return resp.json();
  }

  async complete(sessionId: string, foundId: string | null): Promise<ApiSessionView> {
    const resp = await this.fetchFn(
      `${this.baseUrl}/api/sessions/${sessionId}/complete`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(foundId === null ? {} : { found_id: foundId }),
      },
    );
    if (!resp.ok) await raise(resp);
    return resp.json();
  }
}
