/** Render-to-HTML-string views: round panels, timeline, app shell. */

import type { ApiClient } from "./api.js";
import { canSubmit } from "./state.js";
import type { ApiRoundView, RetrievedThumb, SessionViewState } from "./types.js";

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderThumb(client: ApiClient, thumb: RetrievedThumb): string {
  const badge = thumb.similarity.toFixed(3);
  return (
    `<figure class="thumb" data-image-id="${esc(thumb.id)}">` +
    `<img src="${esc(client.imageUrl(thumb.image_url))}" alt="${esc(thumb.id)}">` +
    `<figcaption><span class="sim-badge">${badge}</span>` +
    `<button class="mark-found" data-image-id="${esc(thumb.id)}">this is it</button>` +
    `</figcaption></figure>`
  );
}

export function renderGrid(client: ApiClient, thumbs: RetrievedThumb[]): string {
  // thumbnails render in server order; never reorder client-side
  return `<div class="grid">${thumbs.map((t) => renderThumb(client, t)).join("")}</div>`;
}

export function renderRoundPanel(client: ApiClient, round: ApiRoundView): string {
  // the synthetic image sits prominently above the grid: it is the system's
  // visual belief about the query, the grid is secondary feedback
  const feedback = round.synthetic_image_url
    ? `<div class="feedback-image"><img src="${esc(client.imageUrl(round.synthetic_image_url))}" alt="synthetic image, round ${round.round}"></div>`
    : "";
  const error = round.error
    ? `<div class="round-error">stage ${esc(round.error)} failed</div>`
    : "";
  return (
    `<section class="round-panel" data-round="${round.round}">` +
    `<header>round ${round.round}: <q>${esc(round.query)}</q></header>` +
    error +
    feedback +
    renderGrid(client, round.retrieved) +
    `</section>`
  );
}

export function renderTimeline(client: ApiClient, state: SessionViewState): string {
  // left-to-right progression so refinement drift stays visible
  const panels = state.rounds.map((r) => renderRoundPanel(client, r)).join("");
  return `<div class="timeline">${panels}</div>`;
}

export function renderBanner(state: SessionViewState): string {
  if (!state.banner) return "";
  const stage = state.banner.stage ? ` <code>${esc(state.banner.stage)}</code>` : "";
  const retry = state.banner.retryable
    ? `<button class="retry">retry</button>`
    : "";
  return `<div class="banner error">${esc(state.banner.message)}${stage}${retry}</div>`;
}

export function renderSummary(state: SessionViewState): string {
  if (state.phase !== "finished") return "";
  const used = state.rounds.length;
  const text =
    state.outcome === "succeeded"
      ? `found in round ${Math.max(0, used - 1)}`
      : state.outcome === "abandoned"
        ? `abandoned after ${used} rounds`
        : `out of rounds after ${used} rounds`;
  return `<div class="summary-strip">${text}</div>`;
}

export function renderQueryForm(state: SessionViewState): string {
  const disabled = canSubmit(state) ? "" : " disabled";
  return (
    `<form class="query-form">` +
    `<input name="query" value="${esc(state.draftQuery)}" placeholder="describe the image you remember"${disabled}>` +
    `<button type="submit"${disabled}>search</button>` +
    `<button type="button" class="abandon"${state.phase === "finished" ? " disabled" : ""}>abandon</button>` +
    `</form>`
  );
}

export function renderApp(client: ApiClient, state: SessionViewState): string {
  return (
    `<main class="console" data-session="${esc(state.sessionId)}" data-phase="${state.phase}">` +
    `<h1>image search — ${esc(state.mode)} mode</h1>` +
    renderBanner(state) +
    renderQueryForm(state) +
    renderTimeline(client, state) +
    renderSummary(state) +
    `</main>`
  );
}
