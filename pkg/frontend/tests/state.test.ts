import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import { SessionView, newToken } from "../src/state";
import type { Mode, Outcome } from "../src/types";
import { makeSnapshot } from "./helpers";

interface BufferCase {
  mode: Mode;
  outcome: Outcome;
  label_set: boolean;
  annotation_set: boolean;
  can_submit: boolean;
  sends_label: boolean;
  sends_mask: boolean;
}

interface PayloadCase {
  mode: Mode;
  outcome: Outcome;
  has_label: boolean;
  has_mask: boolean;
  accepted: boolean;
}

const fixtures = JSON.parse(
  readFileSync(
    join(dirname(fileURLToPath(import.meta.url)), "fixtures", "feedback-cases.json"),
    "utf-8",
  ),
) as { payloads: PayloadCase[]; buffers: BufferCase[] };

function buildBuffer(testCase: BufferCase): SessionView {
  const view = new SessionView();
  view.applySnapshot(makeSnapshot(testCase.mode));
  if (testCase.annotation_set) {
    // annotate while an annotation-capable outcome is active, then switch;
    // this is the only route to e.g. a W buffer with annotation in RWR_ONLY
    view.setOutcome("RWR");
    view.toggleSegment(1);
  }
  view.setOutcome(testCase.outcome);
  if (testCase.label_set) view.setLabel(0);
  return view;
}

describe("shared feedback fixtures", () => {
  it("buffer states gate submission exactly as specified", () => {
    for (const testCase of fixtures.buffers) {
      const view = buildBuffer(testCase);
      expect(view.canSubmit(), JSON.stringify(testCase)).toBe(testCase.can_submit);
      if (!testCase.can_submit) {
        expect(() => view.buildFeedback()).toThrow();
        continue;
      }
      const payload = view.buildFeedback();
      expect(payload.outcome).toBe(testCase.outcome);
      expect(payload.corrected_label !== undefined, "label presence").toBe(
        testCase.sends_label,
      );
      const hasMask = payload.segment_ids !== undefined || payload.mask !== undefined;
      expect(hasMask, "mask presence").toBe(testCase.sends_mask);
      expect(payload.instance_id).toBe("fx-1");
      expect(payload.token).toBeTruthy();
    }
  });

  it("every submittable buffer maps to a server-accepted payload shape", () => {
    const accepted = new Set(
      fixtures.payloads
        .filter((p) => p.accepted)
        .map((p) => `${p.mode}|${p.outcome}|${p.has_label}|${p.has_mask}`),
    );
    for (const testCase of fixtures.buffers.filter((b) => b.can_submit)) {
      const key = `${testCase.mode}|${testCase.outcome}|${testCase.sends_label}|${testCase.sends_mask}`;
      expect(accepted.has(key), JSON.stringify(testCase)).toBe(true);
    }
  });
});

describe("annotation buffer", () => {
  function annotatableView(mode: Mode = "RWR_PLUS_W"): SessionView {
    const view = new SessionView();
    view.applySnapshot(makeSnapshot(mode));
    view.setOutcome("RWR");
    return view;
  }

  it("clicking a segment twice removes it", () => {
    const view = annotatableView();
    view.toggleSegment(3);
    expect(view.selectedSegments.has(3)).toBe(true);
    view.toggleSegment(3);
    expect(view.selectedSegments.has(3)).toBe(false);
    expect(view.annotationEmpty()).toBe(true);
  });

  it("maps pixels to segment ids", () => {
    const view = annotatableView();
    expect(view.segmentAt(0, 0)).toBe(0);
    expect(view.segmentAt(0, 7)).toBe(1);
    expect(view.segmentAt(7, 0)).toBe(2);
    expect(view.segmentAt(7, 7)).toBe(3);
  });

  it("empty buffer blocks True(WR) submission with a message", () => {
    const view = annotatableView();
    expect(view.canSubmit()).toBe(false);
    expect(view.validationMessage()).toMatch(/decisive region/);
    view.toggleSegment(0);
    expect(view.canSubmit()).toBe(true);
  });

  it("strokes count as annotation and serialize as RLE", () => {
    const view = annotatableView();
    view.paintStroke(6, 6, 2); // well inside quadrant 3: overlap > 0.3
    expect(view.annotationEmpty()).toBe(false);
    const payload = view.buildFeedback();
    expect(payload.mask).toBeDefined();
    expect(payload.mask!.size).toEqual([8, 8]);
    expect(payload.segment_ids).toBeUndefined();
  });

  it("a stroke covering half a superpixel selects the whole superpixel in the preview", () => {
    const view = annotatableView();
    // paint the top half of quadrant 3 (rows 4-5, cols 4-7): 8/16 = 0.5 overlap
    for (let r = 4; r <= 5; r++) {
      for (let c = 4; c <= 7; c++) view.paintStroke(r, c, 0);
    }
    expect(view.strokeTouchedSegments()).toEqual(new Set([3]));
    const pixels = view.annotationPixels()!;
    // the preview snaps to the full superpixel, matching the server rule
    for (let r = 4; r < 8; r++) {
      for (let c = 4; c < 8; c++) expect(pixels[r * 8 + c]).toBe(1);
    }
    expect(pixels.reduce((a, b) => a + b, 0)).toBe(16);
  });

  it("sub-threshold strokes keep submission blocked, mirroring the server", () => {
    const view = annotatableView();
    view.paintStroke(4, 4, 0); // 1/16 of quadrant 3: below the 0.3 threshold
    expect(view.strokeTouchedSegments().size).toBe(0);
    expect(view.annotationEmpty()).toBe(true);
    expect(view.canSubmit()).toBe(false);
  });

  it("annotation is rejected outside annotation-capable outcomes", () => {
    const view = new SessionView();
    view.applySnapshot(makeSnapshot("RWR_ONLY"));
    view.setOutcome("RRR");
    expect(() => view.toggleSegment(0)).toThrow(/annotation requires/);
    view.setOutcome("W");
    expect(() => view.paintStroke(1, 1)).toThrow(/annotation requires/);
  });

  it("preview pixels cover clicked superpixels", () => {
    const view = annotatableView();
    view.toggleSegment(0);
    const pixels = view.annotationPixels()!;
    expect(pixels[0]).toBe(1); // inside quadrant 0
    expect(pixels[7]).toBe(0); // quadrant 1
    expect(pixels.reduce((a, b) => a + b, 0)).toBe(16);
  });
});

describe("submission lifecycle", () => {
  it("keeps one token across retries and resets on the next snapshot", () => {
    const view = new SessionView();
    view.applySnapshot(makeSnapshot("RWR_PLUS_W"));
    view.setOutcome("RRR");
    const first = view.buildFeedback();
    const second = view.buildFeedback();
    expect(first.token).toBe(second.token);
    view.applySnapshot(makeSnapshot("RWR_PLUS_W", { iteration: 1 }));
    view.setOutcome("RRR");
    expect(view.buildFeedback().token).not.toBe(first.token);
  });

  it("locks controls while a submission is in flight", () => {
    const view = new SessionView();
    view.applySnapshot(makeSnapshot("RWR_PLUS_W"));
    view.setOutcome("RRR");
    view.submitting = true;
    expect(view.canSubmit()).toBe(false);
    expect(() => view.setOutcome("RWR")).toThrow(/in flight/);
  });

  it("complete sessions cannot submit", () => {
    const view = new SessionView();
    view.applySnapshot(makeSnapshot("RWR_PLUS_W", { complete: true, pending: null }));
    expect(view.canSubmit()).toBe(false);
    expect(view.validationMessage()).toMatch(/complete/);
  });

  it("choosing RRR clears the annotation buffer", () => {
    const view = new SessionView();
    view.applySnapshot(makeSnapshot("RWR_PLUS_W"));
    view.setOutcome("RWR");
    view.toggleSegment(2);
    view.setOutcome("RRR");
    expect(view.annotationEmpty()).toBe(true);
    const payload = view.buildFeedback();
    expect(payload.segment_ids).toBeUndefined();
    expect(payload.mask).toBeUndefined();
  });

  it("metrics series accumulates one record per iteration", () => {
    const view = new SessionView();
    view.applySnapshot(makeSnapshot("RWR_PLUS_W"));
    const next = makeSnapshot("RWR_PLUS_W", { iteration: 1 });
    next.latest_metrics = { ...next.latest_metrics, iteration: 1, outcome: "RRR" };
    view.applySnapshot(next);
    view.applySnapshot(next); // duplicate apply must not duplicate the record
    expect(view.metrics.map((m) => m.iteration)).toEqual([0, 1]);
  });

  it("label picking is only valid for False(W)", () => {
    const view = new SessionView();
    view.applySnapshot(makeSnapshot("RWR_PLUS_W"));
    view.setOutcome("RWR");
    expect(() => view.setLabel(0)).toThrow(/False\(W\)/);
  });
});

describe("token generation", () => {
  it("produces unique hex tokens", () => {
    const seen = new Set(Array.from({ length: 64 }, () => newToken()));
    expect(seen.size).toBe(64);
    for (const token of seen) expect(token).toMatch(/^[0-9a-f]{24}$/);
  });
});
