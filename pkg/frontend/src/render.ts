/** DOM rendering and input wiring for the annotation screen. */

import type { SessionView } from "./state.js";
import type { Outcome } from "./types.js";

export interface ViewCallbacks {
  onOutcome(outcome: Outcome): void;
  onLabel(label: number): void;
  onSegmentClick(row: number, col: number): void;
  onStroke(row: number, col: number): void;
  onClearAnnotation(): void;
  onToggleOverlay(): void;
  onSubmit(): void;
  onRetryAssets(): void;
}

export interface ViewElements {
  root: HTMLElement;
  header: HTMLElement;
  banner: HTMLElement;
  baseImage: HTMLImageElement;
  overlayImage: HTMLImageElement;
  annotationCanvas: HTMLCanvasElement;
  previewCanvas: HTMLCanvasElement;
  outcomeButtons: Map<Outcome, HTMLButtonElement>;
  labelBox: HTMLElement;
  submitButton: HTMLButtonElement;
  clearButton: HTMLButtonElement;
  overlayToggle: HTMLButtonElement;
  validation: HTMLElement;
  metricsList: HTMLElement;
  errorBox: HTMLElement;
  retryButton: HTMLButtonElement;
}

const OUTCOME_LABELS: Array<[Outcome, string]> = [
  ["RRR", "True(RR)"],
  ["RWR", "True(WR)"],
  ["W", "False(W)"],
];

const DISPLAY_SCALE = 4;

export function buildView(root: HTMLElement, callbacks: ViewCallbacks): ViewElements {
  root.innerHTML = `
    <div class="banner" hidden></div>
    <div class="error-box" hidden>
      <span class="error-text"></span>
      <button class="retry">Retry</button>
    </div>
    <h2 class="query-header">loading&hellip;</h2>
    <div class="stage">
      <div class="image-stack">
        <img class="base" alt="query instance" draggable="false">
        <img class="overlay" alt="explanation overlay" draggable="false">
        <canvas class="annotation"></canvas>
      </div>
      <div class="side">
        <button class="toggle-overlay">Explanation</button>
        <div class="outcomes"></div>
        <div class="label-box" hidden></div>
        <button class="clear" type="button">Clear annotation</button>
        <button class="submit" disabled>Confirm</button>
        <div class="validation"></div>
        <h3>Corrected instance</h3>
        <canvas class="preview"></canvas>
      </div>
    </div>
    <h3>Session metrics</h3>
    <ul class="metrics"></ul>
  `;

  const outcomes = root.querySelector(".outcomes") as HTMLElement;
  const outcomeButtons = new Map<Outcome, HTMLButtonElement>();
  for (const [outcome, label] of OUTCOME_LABELS) {
    const button = document.createElement("button");
    button.textContent = label;
    button.dataset.outcome = outcome;
    button.addEventListener("click", () => callbacks.onOutcome(outcome));
    outcomes.appendChild(button);
    outcomeButtons.set(outcome, button);
  }

  const elements: ViewElements = {
    root,
    header: root.querySelector(".query-header") as HTMLElement,
    banner: root.querySelector(".banner") as HTMLElement,
    baseImage: root.querySelector("img.base") as HTMLImageElement,
    overlayImage: root.querySelector("img.overlay") as HTMLImageElement,
    annotationCanvas: root.querySelector("canvas.annotation") as HTMLCanvasElement,
    previewCanvas: root.querySelector("canvas.preview") as HTMLCanvasElement,
    outcomeButtons,
    labelBox: root.querySelector(".label-box") as HTMLElement,
    submitButton: root.querySelector("button.submit") as HTMLButtonElement,
    clearButton: root.querySelector("button.clear") as HTMLButtonElement,
    overlayToggle: root.querySelector("button.toggle-overlay") as HTMLButtonElement,
    validation: root.querySelector(".validation") as HTMLElement,
    metricsList: root.querySelector("ul.metrics") as HTMLElement,
    errorBox: root.querySelector(".error-box") as HTMLElement,
    retryButton: root.querySelector("button.retry") as HTMLButtonElement,
  };

  elements.submitButton.addEventListener("click", () => callbacks.onSubmit());
  elements.clearButton.addEventListener("click", () => callbacks.onClearAnnotation());
  elements.overlayToggle.addEventListener("click", () => callbacks.onToggleOverlay());
  elements.retryButton.addEventListener("click", () => callbacks.onRetryAssets());

  let painting = false;
  const toPixel = (event: MouseEvent): [number, number] => {
    const rect = elements.annotationCanvas.getBoundingClientRect();
    const scaleX = elements.annotationCanvas.width / rect.width;
    const scaleY = elements.annotationCanvas.height / rect.height;
    const col = Math.floor(((event.clientX - rect.left) * scaleX) / DISPLAY_SCALE);
    const row = Math.floor(((event.clientY - rect.top) * scaleY) / DISPLAY_SCALE);
    return [row, col];
  };
  elements.annotationCanvas.addEventListener("click", (event) => {
    if (painting) return;
    const [row, col] = toPixel(event);
    callbacks.onSegmentClick(row, col);
  });
  elements.annotationCanvas.addEventListener("mousedown", (event) => {
    if (event.shiftKey) {
      painting = true;
      const [row, col] = toPixel(event);
      callbacks.onStroke(row, col);
    }
  });
  elements.annotationCanvas.addEventListener("mousemove", (event) => {
    if (painting) {
      const [row, col] = toPixel(event);
      callbacks.onStroke(row, col);
    }
  });
  window.addEventListener("mouseup", () => {
    painting = false;
  });

  return elements;
}

export function renderLabelPicker(
  elements: ViewElements,
  view: SessionView,
  callbacks: ViewCallbacks,
): void {
  const box = elements.labelBox;
  const show = view.chosenOutcome === "W" && view.snapshot?.pending != null;
  box.hidden = !show;
  box.innerHTML = "";
  if (!show || !view.snapshot) return;
  const title = document.createElement("div");
  title.textContent = "Correct label:";
  box.appendChild(title);
  view.snapshot.class_names.forEach((name, label) => {
    const button = document.createElement("button");
    button.textContent = name;
    button.dataset.label = String(label);
    if (view.chosenLabel === label) button.classList.add("active");
    button.addEventListener("click", () => callbacks.onLabel(label));
    box.appendChild(button);
  });
}

export function renderAnnotation(elements: ViewElements, view: SessionView): void {
  const pending = view.snapshot?.pending;
  const canvas = elements.annotationCanvas;
  const ctx = canvas.getContext("2d");
  if (!pending || !ctx) return;
  const [h, w] = pending.size;
  canvas.width = w * DISPLAY_SCALE;
  canvas.height = h * DISPLAY_SCALE;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const pixels = view.annotationPixels();
  if (!pixels) return;
  ctx.fillStyle = "rgba(255, 120, 0, 0.45)";
  for (let r = 0; r < h; r++) {
    for (let c = 0; c < w; c++) {
      if (pixels[r * w + c]) {
        ctx.fillRect(c * DISPLAY_SCALE, r * DISPLAY_SCALE, DISPLAY_SCALE, DISPLAY_SCALE);
      }
    }
  }
}

export function renderPreview(elements: ViewElements, view: SessionView): void {
  const pending = view.snapshot?.pending;
  const canvas = elements.previewCanvas;
  const ctx = canvas.getContext("2d");
  if (!pending || !ctx) return;
  const [h, w] = pending.size;
  canvas.width = w * DISPLAY_SCALE;
  canvas.height = h * DISPLAY_SCALE;
  ctx.fillStyle = "#000";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  const pixels = view.annotationPixels();
  if (!pixels || view.annotationEmpty() || !elements.baseImage.complete) return;
  // draw the base image, then black out everything outside the marked region
  ctx.drawImage(elements.baseImage, 0, 0, canvas.width, canvas.height);
  ctx.fillStyle = "#000";
  for (let r = 0; r < h; r++) {
    for (let c = 0; c < w; c++) {
      if (!pixels[r * w + c]) {
        ctx.fillRect(c * DISPLAY_SCALE, r * DISPLAY_SCALE, DISPLAY_SCALE, DISPLAY_SCALE);
      }
    }
  }
}

export function renderMetrics(elements: ViewElements, view: SessionView): void {
  elements.metricsList.innerHTML = "";
  for (const record of view.metrics) {
    const item = document.createElement("li");
    const accuracy =
      record.accuracy == null ? "-" : `${(record.accuracy * 100).toFixed(1)}%`;
    const outcome = record.outcome ? ` ${record.outcome}` : " baseline";
    item.textContent =
      `iter ${record.iteration}:${outcome}, accuracy ${accuracy}, ` +
      `|L|=${record.labeled_size}, |U|=${record.unlabeled_size}`;
    elements.metricsList.appendChild(item);
  }
}

export function renderSnapshot(
  elements: ViewElements,
  view: SessionView,
  callbacks: ViewCallbacks,
  assetBase = "",
): void {
  const snapshot = view.snapshot;
  if (!snapshot) return;

  elements.banner.hidden = !snapshot.complete;
  if (snapshot.complete) {
    elements.banner.textContent =
      `Session complete: ${snapshot.iteration}/${snapshot.budget} iterations. ` +
      `Labeled pool: ${snapshot.pool_sizes.labeled}.`;
  }

  const pending = snapshot.pending;
  if (pending) {
    elements.header.textContent =
      `Prediction: ${pending.predicted_class} ` +
      `(${Math.round(pending.confidence * 100)}%) — ` +
      `iteration ${snapshot.iteration + 1} of ${snapshot.budget}`;
    elements.baseImage.src = assetBase + pending.assets.image;
    elements.overlayImage.src = assetBase + pending.assets.overlay;
  } else {
    elements.header.textContent = "No pending query";
    elements.baseImage.removeAttribute("src");
    elements.overlayImage.removeAttribute("src");
  }

  elements.overlayImage.style.display = view.overlayVisible && pending ? "" : "none";
  elements.overlayToggle.classList.toggle("active", view.overlayVisible);

  for (const [outcome, button] of elements.outcomeButtons) {
    button.disabled = !pending || snapshot.complete || view.submitting;
    button.classList.toggle("active", view.chosenOutcome === outcome);
  }
  elements.clearButton.disabled = !view.annotationAllowed();
  elements.submitButton.disabled = !view.canSubmit();
  elements.validation.textContent = view.validationMessage() ?? "";

  renderLabelPicker(elements, view, callbacks);
  renderAnnotation(elements, view);
  renderPreview(elements, view);
  renderMetrics(elements, view);
}

export function showAssetError(elements: ViewElements, message: string): void {
  elements.errorBox.hidden = false;
  (elements.errorBox.querySelector(".error-text") as HTMLElement).textContent = message;
}

export function clearAssetError(elements: ViewElements): void {
  elements.errorBox.hidden = true;
}
