/** Wire types for the session gateway (see the repository README). */

export type Mode = "RWR_ONLY" | "RWR_PLUS_W";
export type Outcome = "RRR" | "RWR" | "W";

export interface ExplanationPayload {
  weights: number[];
  intercept: number;
  selected: number[];
  fidelity: number;
}

export interface PendingQuery {
  instance_id: string;
  predicted_label: number;
  predicted_class: string;
  confidence: number;
  explanation: ExplanationPayload;
  /** flat row-major segment id per pixel */
  segments: number[];
  n_segments: number;
  size: [number, number];
  assets: { image: string; overlay: string };
}

export interface MetricsRecord {
  iteration: number;
  instance_id: string | null;
  outcome: string | null;
  counterexamples: number;
  labeled_size: number;
  unlabeled_size: number;
  accuracy?: number | null;
  explanation_score?: number | null;
}

export interface Snapshot {
  api_version: number;
  session_id: string;
  iteration: number;
  budget: number;
  mode: Mode;
  complete: boolean;
  /** stroke-to-superpixel snapping threshold used by the server */
  annotation_min_overlap: number;
  class_names: string[];
  pool_sizes: { labeled: number; unlabeled: number };
  latest_metrics: MetricsRecord;
  pending: PendingQuery | null;
}

export interface RLEMask {
  size: [number, number];
  counts: number[];
}

export interface FeedbackPayload {
  outcome: Outcome;
  corrected_label?: number;
  segment_ids?: number[];
  mask?: RLEMask;
  token: string;
  instance_id: string;
}

export interface SessionRequest {
  budget?: number;
  counterexamples?: number;
  mode?: Mode;
  seed?: number;
}
