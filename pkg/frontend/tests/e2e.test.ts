// End-to-end: a scripted session against the real service process with mock
// model backends. Verifies the full loop the console drives in production.

import { spawn, type ChildProcess } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { renderApp, renderRoundPanel } from "../src/render.js";
import { markFound, refresh, startSession, submitQuery } from "../src/state.js";
import type { SessionViewState } from "../src/types.js";

const PORT = 8642;
const BASE = `http://127.0.0.1:${PORT}`;

// Builds a 200-image mock index and serves it; everything is in-process
// deterministic, so the test needs no model checkpoints.
const SERVER_SCRIPT = `
import numpy as np
import uvicorn
from genir import ImageRecord, build_index
from genir.gateway import MockGateway, mock_image_provider
from genir.mockworld import MockWorld, MockWorldConfig
from genir.service import create_app
from genir.session import SessionEngine

rng = np.random.default_rng(0)
index = build_index([ImageRecord(id=f"img{i:04d}", embedding=rng.normal(size=32))
                     for i in range(200)], dim=32)
world = MockWorld(MockWorldConfig(dim=32, noise_sigma_0=2.0, seed=0))
engine = SessionEngine(index, MockGateway(world),
                       image_provider=mock_image_provider(world, index))
uvicorn.run(create_app(engine), host="127.0.0.1", port=${PORT}, log_level="warning")
`;

let server: ChildProcess;

async function waitForHealth(client: ApiClient, timeoutMs = 20000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const health = await client.health();
      if (health.status === "ok") return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error("service did not become healthy");
}

beforeAll(async () => {
  server = spawn("python3", ["-c", SERVER_SCRIPT], { stdio: "inherit" });
  await waitForHealth(new ApiClient(BASE));
}, 30000);

afterAll(() => {
  server?.kill();
});

describe("console against a live mock-backed service", () => {
  it("completes 3 generative rounds and marks the target found", async () => {
    const client = new ApiClient(BASE);
    let state: SessionViewState = await startSession(client, {
      mode: "generative",
      k: 10,
      maxRounds: 10,
    });
    expect(state.phase).toBe("idle");

    const queries = [
      "a beach at sunset with a red umbrella",
      "the umbrella is closer to the water",
      "there is a sailboat on the horizon",
    ];
    for (const [t, query] of queries.entries()) {
      state = await submitQuery(client, state, query);
      expect(state.phase).toBe("viewing");
      const round = state.rounds[t]!;
      expect(round.round).toBe(t);

      // every round renders a synthetic image and a 10-thumbnail grid
      const html = renderRoundPanel(client, round);
      expect(html).toContain("feedback-image");
      expect(round.retrieved).toHaveLength(10);
      expect([...html.matchAll(/<figure class="thumb"/g)]).toHaveLength(10);

      // the image URLs in the panel actually serve bytes
      const img = await fetch(client.imageUrl(round.synthetic_image_url!));
      expect(img.status).toBe(200);
      expect(img.headers.get("content-type")).toBe("image/png");
      const thumb = await fetch(client.imageUrl(round.retrieved[0]!.image_url));
      expect(thumb.status).toBe(200);
    }

    // searcher spots the target in the last grid
    const foundId = state.rounds[2]!.retrieved[0]!.id;
    state = await markFound(client, state, foundId);
    expect(state.phase).toBe("finished");
    expect(state.outcome).toBe("succeeded");

    // the service-side trace agrees: succeeded with 3 rounds
    const trace = await client.getSession(state.sessionId);
    expect(trace.status).toBe("succeeded");
    expect(trace.rounds).toHaveLength(3);

    // reload path: refresh re-renders the full timeline read-only
    const reloaded = await refresh(client, state);
    expect(reloaded.rounds).toHaveLength(3);
    expect(reloaded.phase).toBe("finished");
    const html = renderApp(client, reloaded);
    expect(html).toContain(`data-phase="finished"`);
    expect([...html.matchAll(/class="round-panel"/g)]).toHaveLength(3);
  }, 30000);

  it("gives two tabs independent sessions", async () => {
    const client = new ApiClient(BASE);
    const a = await startSession(client, { mode: "verbal" });
    const b = await startSession(client, { mode: "verbal" });
    expect(a.sessionId).not.toBe(b.sessionId);
  });
});
