/** Wire types for the session service and view state for the console. */

export interface RetrievedThumb {
  id: string;
  image_url: string;
  similarity: number;
}

export interface ApiRoundView {
  round: number;
  query: string;
  synthetic_image_url: string | null;
  retrieved: RetrievedThumb[];
  status: string;
  error: string | null;
}

export interface ApiSessionView {
  session_id: string;
  mode: string;
  k: number;
  max_rounds: number;
  target_id: string | null;
  status: string;
  rounds: ApiRoundView[];
}

export interface HealthView {
  status: string;
  index_size: number;
  dim: number;
}

export type Phase = "idle" | "submitting" | "viewing" | "finished";

export interface ErrorBanner {
  message: string;
  /** pipeline stage for 502s, so the user sees which backend failed */
  stage: string | null;
  retryable: boolean;
}

export interface SessionViewState {
  sessionId: string;
  mode: string;
  k: number;
  maxRounds: number;
  rounds: ApiRoundView[];
  draftQuery: string;
  phase: Phase;
  /** set once the session terminates, for the summary strip */
  outcome: "succeeded" | "abandoned" | "exhausted" | null;
  banner: ErrorBanner | null;
}
