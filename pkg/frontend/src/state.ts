/** Session state machine: one live session, one in-flight request at a time. */

import { ApiClient, ApiError, type CreateSessionOptions } from "./api.js";
import type { SessionViewState } from "./types.js";

export async function startSession(
  client: ApiClient,
  opts: CreateSessionOptions,
): Promise<SessionViewState> {
  const health = await client.health();
  if (health.status !== "ok") {
    throw new ApiError(503, "service is not healthy");
  }
  const sessionId = await client.createSession(opts);
  return {
    sessionId,
    mode: opts.mode,
    k: opts.k ?? 10,
    maxRounds: opts.maxRounds ?? 10,
    rounds: [],
    draftQuery: "",
    phase: "idle",
    outcome: null,
    banner: null,
  };
}

/**
 * Submit the draft query as the next round. Returns a new state; the
 * in-flight state ("submitting") is given to `onPending` so the UI can
 * disable the input while the request runs.
 */
export async function submitQuery(
  client: ApiClient,
  state: SessionViewState,
  text: string,
  onPending?: (pending: SessionViewState) => void,
): Promise<SessionViewState> {
  if (state.phase === "finished") {
    return { ...state, banner: { message: "session is finished", stage: null, retryable: false } };
  }
  if (state.phase === "submitting") {
    // mirrors the service's 409: never issue a second in-flight round
    return { ...state, banner: { message: "a round is already in flight", stage: null, retryable: false } };
  }
  if (!text.trim()) {
    return { ...state, banner: { message: "query must not be empty", stage: null, retryable: false } };
  }
  const pending: SessionViewState = { ...state, phase: "submitting", draftQuery: text, banner: null };
  onPending?.(pending);
  try {
    const round = await client.postRound(state.sessionId, text);
    const finished = round.status !== "running";
    return {
      ...pending,
      rounds: [...state.rounds, round],
      draftQuery: "",
      phase: finished ? "finished" : "viewing",
      outcome: finished ? (round.status as SessionViewState["outcome"]) : null,
      banner: null,
    };
  } catch (err) {
    if (err instanceof ApiError) {
      if (err.status === 410) {
        return { ...pending, phase: "finished", outcome: "exhausted",
                 banner: { message: err.message, stage: null, retryable: false } };
      }
      const retryable = err.status === 502 || err.status === 409;
      return {
        ...pending,
        phase: state.phase === "idle" ? "idle" : "viewing",
        banner: { message: err.message, stage: err.stage, retryable },
      };
    }
    throw err;
  }
}

/** The searcher spotted the target in a grid (or abandons with null). */
export async function markFound(
  client: ApiClient,
  state: SessionViewState,
  imageId: string | null,
): Promise<SessionViewState> {
  if (imageId !== null) {
    const shown = state.rounds.some((r) => r.retrieved.some((t) => t.id === imageId));
    if (!shown) {
      return { ...state, banner: { message: `${imageId} is not in any displayed grid`, stage: null, retryable: false } };
    }
  }
  const view = await client.complete(state.sessionId, imageId);
  return {
    ...state,
    phase: "finished",
    outcome: view.status as SessionViewState["outcome"],
    banner: null,
  };
}

/** Re-render from the server, e.g. after a reload: timeline must match. */
export async function refresh(
  client: ApiClient,
  state: SessionViewState,
): Promise<SessionViewState> {
  const view = await client.getSession(state.sessionId);
  const finished = view.status !== "running";
  return {
    ...state,
    mode: view.mode,
    k: view.k,
    maxRounds: view.max_rounds,
    rounds: view.rounds,
    phase: finished ? "finished" : view.rounds.length === 0 ? "idle" : "viewing",
    outcome: finished ? (view.status as SessionViewState["outcome"]) : null,
  };
}

/** Input is disabled while submitting, after finishing, or out of rounds. */
export function canSubmit(state: SessionViewState): boolean {
  return (
    (state.phase === "idle" || state.phase === "viewing") &&
    state.rounds.length < state.maxRounds
  );
}
