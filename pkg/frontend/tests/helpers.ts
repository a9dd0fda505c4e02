import type { MetricsRecord, Mode, PendingQuery, Snapshot } from "../src/types";

/** A 8x8 image split into 4 quadrant superpixels (ids 0..3, scanline order). */
export function quadrantPending(instanceId = "fx-1"): PendingQuery {
  const h = 8;
  const w = 8;
  const segments: number[] = [];
  for (let r = 0; r < h; r++) {
    for (let c = 0; c < w; c++) {
      segments.push((r < h / 2 ? 0 : 2) + (c < w / 2 ? 0 : 1));
    }
  }
  return {
    instance_id: instanceId,
    predicted_label: 1,
    predicted_class: "ring",
    confidence: 0.93,
    explanation: { weights: [0.4, 0.1, -0.2, 0.0], intercept: 0.3, selected: [0, 1, 2], fidelity: 0.01 },
    segments,
    n_segments: 4,
    size: [h, w],
    assets: { image: "/session/s/assets/0/base.png", overlay: "/session/s/assets/0/overlay.png" },
  };
}

export function baselineMetrics(): MetricsRecord {
  return {
    iteration: 0,
    instance_id: null,
    outcome: null,
    counterexamples: 0,
    labeled_size: 16,
    unlabeled_size: 14,
    accuracy: 0.5,
  };
}

export function makeSnapshot(mode: Mode, overrides: Partial<Snapshot> = {}): Snapshot {
  return {
    api_version: 1,
    session_id: "s",
    iteration: 0,
    budget: 5,
    mode,
    complete: false,
    annotation_min_overlap: 0.3,
    class_names: ["cross", "ring"],
    pool_sizes: { labeled: 16, unlabeled: 14 },
    latest_metrics: baselineMetrics(),
    pending: quadrantPending(),
    ...overrides,
  };
}
