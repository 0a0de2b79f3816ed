/** Browser entry point: mounts the console and wires DOM events. */

import { ApiClient } from "./api.js";
import { renderApp } from "./render.js";
import { markFound, startSession, submitQuery } from "./state.js";
import type { SessionViewState } from "./types.js";

export interface MountOptions {
  baseUrl: string;
  mode?: string;
  k?: number;
  maxRounds?: number;
}

export async function mount(root: HTMLElement, opts: MountOptions): Promise<void> {
  const client = new ApiClient(opts.baseUrl);
  let state: SessionViewState = await startSession(client, {
    mode: opts.mode ?? "generative",
    k: opts.k ?? 10,
    maxRounds: opts.maxRounds ?? 10,
  });

  const redraw = () => {
    root.innerHTML = renderApp(client, state);
  };

  root.addEventListener("submit", (event) => {
    event.preventDefault();
    const input = root.querySelector<HTMLInputElement>("input[name=query]");
    if (!input) return;
    void submitQuery(client, state, input.value, (pending) => {
      state = pending;
      redraw();
    }).then((next) => {
      state = next;
      redraw();
      root.querySelector(".round-panel:last-child")?.scrollIntoView();
    });
  });

  root.addEventListener("click", (event) => {
    const el = event.target as HTMLElement;
    if (el.matches("button.mark-found")) {
      void markFound(client, state, el.dataset.imageId ?? null).then((next) => {
        state = next;
        redraw();
      });
    } else if (el.matches("button.abandon")) {
      void markFound(client, state, null).then((next) => {
        state = next;
        redraw();
      });
    }
  });

  redraw();
}
