/** Scripted end-to-end session against the real Python service.
 *
 * Spawns `ximl serve` on a synthetic dataset, then drives the UI's own
 * api/state modules through one RRR, one RWR (with superpixel annotation)
 * and one W flow, asserting that every POST advances the engine by exactly
 * one iteration and that invalid payloads are blocked before any request
 * is made.
 */

import { spawn, type ChildProcess } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { SessionView } from "../src/state";
import type { Snapshot } from "../src/types";

const PORT = 8765 + (process.pid % 100);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;

async function waitForServer(timeoutMs = 60_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE}/docs`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 500));
  }
  throw new Error("service did not come up in time");
}

beforeAll(async () => {
  server = spawn(
    "ximl",
    ["serve", "--port", String(PORT), "--budget", "8", "--counterexamples", "1",
     "--mode", "RWR_PLUS_W"],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  server.stderr?.on("data", () => {});
  await waitForServer();
}, 90_000);

afterAll(() => {
  server?.kill();
});

describe("scripted annotation session", () => {
  const api = new ApiClient(BASE);
  const view = new SessionView();
  let snapshot: Snapshot;

  async function submitAndCheckAdvance(): Promise<Snapshot> {
    const before = view.snapshot!.iteration;
    const payload = view.buildFeedback();
    const next = await api.submitFeedback(view.snapshot!.session_id, payload);
    expect(next.iteration).toBe(before + 1); // exactly one engine step per POST
    view.applySnapshot(next);
    return next;
  }

  it("creates the session and shows the first query", async () => {
    snapshot = await api.createSession({ seed: 5 });
    view.applySnapshot(snapshot);
    expect(snapshot.iteration).toBe(0);
    expect(snapshot.pending).not.toBeNull();
    expect(snapshot.pending!.segments.length).toBe(64 * 64);
    expect(snapshot.mode).toBe("RWR_PLUS_W");
  }, 120_000);

  it("serves the image and overlay assets for the snapshot", async () => {
    const img = await fetch(api.assetUrl(view.snapshot!.pending!.assets.image));
    expect(img.status).toBe(200);
    expect(img.headers.get("content-type")).toBe("image/png");
    const overlay = await fetch(api.assetUrl(view.snapshot!.pending!.assets.overlay));
    expect(overlay.status).toBe(200);
  }, 30_000);

  it("completes a True(RR) flow", async () => {
    view.setOutcome("RRR");
    expect(view.canSubmit()).toBe(true);
    const next = await submitAndCheckAdvance();
    expect(next.pool_sizes.labeled).toBe(snapshot.pool_sizes.labeled + 1);
    expect(next.pool_sizes.unlabeled).toBe(snapshot.pool_sizes.unlabeled - 1);
  }, 120_000);

  it("blocks True(WR) client-side until the decisive region is marked", () => {
    view.setOutcome("RWR");
    expect(view.canSubmit()).toBe(false);
    expect(view.validationMessage()).toMatch(/decisive region/);
    expect(() => view.buildFeedback()).toThrow(/decisive region/);
  });

  it("completes a True(WR) flow with superpixel annotation", async () => {
    const before = view.snapshot!.pool_sizes;
    // click two superpixels: pick the ids under two distinct pixels
    view.toggleSegment(view.segmentAt(20, 20));
    const second = view.segmentAt(45, 45);
    if (!view.selectedSegments.has(second)) view.toggleSegment(second);
    expect(view.canSubmit()).toBe(true);
    const payload = view.buildFeedback();
    expect(payload.segment_ids!.length).toBeGreaterThan(0);
    const next = await submitAndCheckAdvance();
    // instance + 1 counterexample
    expect(next.pool_sizes.labeled).toBe(before.labeled + 2);
    expect(next.pool_sizes.unlabeled).toBe(before.unlabeled - 1);
  }, 120_000);

  it("completes a False(W) flow with label and explanation correction", async () => {
    const before = view.snapshot!.pool_sizes;
    view.setOutcome("W");
    expect(view.canSubmit()).toBe(false); // label missing
    view.setLabel(1 - view.snapshot!.pending!.predicted_label);
    expect(view.canSubmit()).toBe(false); // mask still missing in RWR_PLUS_W
    view.paintStroke(32, 32, 4);
    expect(view.canSubmit()).toBe(true);
    const payload = view.buildFeedback();
    expect(payload.corrected_label).toBeDefined();
    expect(payload.mask).toBeDefined();
    const next = await submitAndCheckAdvance();
    expect(next.pool_sizes.labeled).toBe(before.labeled + 2);
  }, 120_000);

  it("replays a duplicate token without double-stepping", async () => {
    view.setOutcome("RRR");
    const payload = view.buildFeedback();
    const sessionId = view.snapshot!.session_id;
    const first = await api.submitFeedback(sessionId, payload);
    const replay = await api.submitFeedback(sessionId, payload);
    expect(replay.iteration).toBe(first.iteration);
    const metrics = await api.getMetrics(sessionId);
    expect(metrics[metrics.length - 1].iteration).toBe(first.iteration);
    view.applySnapshot(first);
  }, 120_000);

  it("accumulates one metrics record per iteration", async () => {
    const metrics = await api.getMetrics(view.snapshot!.session_id);
    expect(metrics.map((m) => m.iteration)).toEqual([0, 1, 2, 3, 4]);
    expect(metrics[0].instance_id).toBeNull();
    for (const record of metrics.slice(1)) {
      expect(record.instance_id).toBeTruthy();
    }
  }, 30_000);
});
