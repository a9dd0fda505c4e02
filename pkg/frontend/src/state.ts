/** View state for one annotation session.
 *
 * Holds the current snapshot, the overlay toggle, the annotation buffer
 * (clicked superpixels plus freehand strokes), the chosen outcome and
 * label, and the metrics series. Submission is enabled only when the
 * buffer satisfies the active outcome's requirements, mirroring the
 * server's validation rules so a submitted payload is never rejected for
 * mode inconsistency.
 */

import { rleEncode } from "./rle.js";
import type {
  FeedbackPayload,
  MetricsRecord,
  Mode,
  Outcome,
  Snapshot,
} from "./types.js";

export function newToken(): string {
  const bytes = new Uint8Array(12);
  if (typeof crypto !== "undefined" && crypto.getRandomValues) {
    crypto.getRandomValues(bytes);
  } else {
    for (let i = 0; i < bytes.length; i++) bytes[i] = Math.floor(Math.random() * 256);
  }
  return Array.from(bytes, (b) => b.toString(16).padStart(2, "0")).join("");
}

export class SessionView {
  snapshot: Snapshot | null = null;
  overlayVisible = true;
  selectedSegments = new Set<number>();
  strokeMask: Uint8Array | null = null;
  chosenOutcome: Outcome | null = null;
  chosenLabel: number | null = null;
  metrics: MetricsRecord[] = [];
  /** true while a feedback POST is in flight; controls lock until the next
   * snapshot arrives */
  submitting = false;
  /** kept across retries so a resend of the same correction is idempotent */
  activeToken: string | null = null;

  get mode(): Mode {
    if (!this.snapshot) throw new Error("no snapshot loaded");
    return this.snapshot.mode;
  }

  get complete(): boolean {
    return this.snapshot?.complete ?? false;
  }

  applySnapshot(snapshot: Snapshot): void {
    this.snapshot = snapshot;
    this.clearAnnotation();
    this.chosenOutcome = null;
    this.chosenLabel = null;
    this.submitting = false;
    this.activeToken = null;
    const latest = snapshot.latest_metrics;
    if (!this.metrics.some((m) => m.iteration === latest.iteration)) {
      this.metrics.push(latest);
      this.metrics.sort((a, b) => a.iteration - b.iteration);
    }
  }

  setMetricsHistory(records: MetricsRecord[]): void {
    this.metrics = [...records].sort((a, b) => a.iteration - b.iteration);
  }

  toggleOverlay(): void {
    this.overlayVisible = !this.overlayVisible;
  }

  setOutcome(outcome: Outcome): void {
    if (this.submitting) throw new Error("submission in flight");
    this.chosenOutcome = outcome;
    if (outcome === "RRR") {
      this.clearAnnotation();
      this.chosenLabel = null;
    }
    if (outcome === "RWR") {
      this.chosenLabel = null;
    }
  }

  setLabel(label: number): void {
    if (this.chosenOutcome !== "W") {
      throw new Error("label correction applies to the False(W) outcome only");
    }
    this.chosenLabel = label;
  }

  /** Whole-superpixel click: toggles membership in the annotation buffer. */
  toggleSegment(id: number): void {
    const pending = this.snapshot?.pending;
    if (!pending) throw new Error("no pending query");
    if (id < 0 || id >= pending.n_segments) {
      throw new Error(`segment id ${id} out of range`);
    }
    if (!this.annotationAllowed()) {
      throw new Error("annotation requires True(WR), or False(W) in RWR_PLUS_W mode");
    }
    if (this.selectedSegments.has(id)) {
      this.selectedSegments.delete(id);
    } else {
      this.selectedSegments.add(id);
    }
  }

  segmentAt(row: number, col: number): number {
    const pending = this.snapshot?.pending;
    if (!pending) throw new Error("no pending query");
    const [h, w] = pending.size;
    if (row < 0 || row >= h || col < 0 || col >= w) {
      throw new Error(`pixel (${row}, ${col}) outside the ${h}x${w} image`);
    }
    return pending.segments[row * w + col];
  }

  /** Freehand painting: marks stroke pixels; the server snaps them to the
   * superpixels they overlap. */
  paintStroke(row: number, col: number, radius = 2): void {
    const pending = this.snapshot?.pending;
    if (!pending) throw new Error("no pending query");
    if (!this.annotationAllowed()) {
      throw new Error("annotation requires True(WR), or False(W) in RWR_PLUS_W mode");
    }
    const [h, w] = pending.size;
    if (!this.strokeMask) this.strokeMask = new Uint8Array(h * w);
    for (let r = Math.max(0, row - radius); r <= Math.min(h - 1, row + radius); r++) {
      for (let c = Math.max(0, col - radius); c <= Math.min(w - 1, col + radius); c++) {
        if ((r - row) ** 2 + (c - col) ** 2 <= radius * radius) {
          this.strokeMask[r * w + c] = 1;
        }
      }
    }
  }

  clearAnnotation(): void {
    this.selectedSegments.clear();
    this.strokeMask = null;
  }

  annotationAllowed(): boolean {
    if (!this.snapshot?.pending || this.submitting) return false;
    if (this.chosenOutcome === "RWR") return true;
    return this.chosenOutcome === "W" && this.mode === "RWR_PLUS_W";
  }

  /** Superpixels a freehand stroke selects: overlap fraction at least the
   * server's threshold, mirroring its snapping rule. */
  strokeTouchedSegments(): Set<number> {
    const pending = this.snapshot?.pending;
    const touched = new Set<number>();
    if (!pending || !this.strokeMask) return touched;
    const minOverlap = this.snapshot!.annotation_min_overlap ?? 0.3;
    const sizes = new Array<number>(pending.n_segments).fill(0);
    const hits = new Array<number>(pending.n_segments).fill(0);
    for (let i = 0; i < pending.segments.length; i++) {
      sizes[pending.segments[i]] += 1;
      if (this.strokeMask[i]) hits[pending.segments[i]] += 1;
    }
    for (let id = 0; id < pending.n_segments; id++) {
      if (hits[id] > 0 && hits[id] / sizes[id] >= minOverlap) touched.add(id);
    }
    return touched;
  }

  /** Superpixels the correction will cover: clicked ones plus those the
   * strokes snap to. This is exactly the region the server will use. */
  effectiveSegments(): Set<number> {
    const combined = new Set(this.selectedSegments);
    for (const id of this.strokeTouchedSegments()) combined.add(id);
    return combined;
  }

  annotationEmpty(): boolean {
    return this.effectiveSegments().size === 0;
  }

  /** Pixels of the corrected decisive region, for the live preview. */
  annotationPixels(): Uint8Array | null {
    const pending = this.snapshot?.pending;
    if (!pending) return null;
    const [h, w] = pending.size;
    const out = new Uint8Array(h * w);
    const segments = this.effectiveSegments();
    if (segments.size > 0) {
      for (let i = 0; i < pending.segments.length; i++) {
        if (segments.has(pending.segments[i])) out[i] = 1;
      }
    }
    return out;
  }

  /** Why submission is blocked, or null when it may proceed. */
  validationMessage(): string | null {
    if (!this.snapshot) return "no session";
    if (this.complete) return "session complete";
    if (!this.snapshot.pending) return "no pending query";
    if (this.submitting) return "submission in flight";
    if (this.chosenOutcome === null) return "choose True(RR), True(WR) or False(W)";
    if (this.chosenOutcome === "RWR" && this.annotationEmpty()) {
      return "True(WR) needs a corrected explanation: mark the decisive region";
    }
    if (this.chosenOutcome === "W") {
      if (this.chosenLabel === null) return "False(W) needs the corrected label";
      if (this.mode === "RWR_PLUS_W" && this.annotationEmpty()) {
        return "False(W) also needs the corrected explanation in this mode";
      }
    }
    return null;
  }

  canSubmit(): boolean {
    return this.validationMessage() === null;
  }

  /** The exact payload to POST; throws when validation blocks submission. */
  buildFeedback(): FeedbackPayload {
    const blocked = this.validationMessage();
    if (blocked) throw new Error(blocked);
    const pending = this.snapshot!.pending!;
    if (!this.activeToken) this.activeToken = newToken();
    const payload: FeedbackPayload = {
      outcome: this.chosenOutcome!,
      token: this.activeToken,
      instance_id: pending.instance_id,
    };
    if (this.chosenOutcome === "W") {
      payload.corrected_label = this.chosenLabel!;
    }
    const withMask =
      this.chosenOutcome === "RWR" ||
      (this.chosenOutcome === "W" && this.mode === "RWR_PLUS_W");
    if (withMask) {
      if (this.selectedSegments.size > 0) {
        payload.segment_ids = [...this.selectedSegments].sort((a, b) => a - b);
      }
      if (this.strokeMask && this.strokeMask.some((b) => b !== 0)) {
        const [h, w] = pending.size;
        payload.mask = rleEncode(this.strokeMask, h, w);
      }
    }
    return payload;
  }
}
