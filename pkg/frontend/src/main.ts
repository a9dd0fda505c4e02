/** Bootstraps the annotation screen against the session gateway. */

import { ApiClient, ApiError } from "./api.js";
import {
  buildView,
  clearAssetError,
  renderSnapshot,
  showAssetError,
  type ViewCallbacks,
  type ViewElements,
} from "./render.js";
import { SessionView } from "./state.js";
import type { Snapshot } from "./types.js";

export class App {
  readonly view = new SessionView();
  private elements!: ViewElements;

  constructor(
    private readonly api: ApiClient,
    private readonly root: HTMLElement,
  ) {}

  async start(): Promise<void> {
    const callbacks = this.callbacks();
    this.elements = buildView(this.root, callbacks);
    this.elements.baseImage.addEventListener("error", () =>
      showAssetError(this.elements, "failed to load the query image"),
    );
    this.elements.baseImage.addEventListener("load", () => {
      clearAssetError(this.elements);
      this.rerender();
    });
    try {
      const snapshot = await this.api.createSession();
      await this.adopt(snapshot);
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        showAssetError(
          this.elements,
          "a session is already live on this server; restart the server to begin anew",
        );
        return;
      }
      throw error;
    }
  }

  private async adopt(snapshot: Snapshot): Promise<void> {
    this.view.applySnapshot(snapshot);
    try {
      this.view.setMetricsHistory(await this.api.getMetrics(snapshot.session_id));
    } catch {
      // metrics are cosmetic; the snapshot's latest record is already shown
    }
    this.rerender();
  }

  private rerender(): void {
    renderSnapshot(this.elements, this.view, this.callbacks());
  }

  private callbacks(): ViewCallbacks {
    return {
      onOutcome: (outcome) => {
        this.view.setOutcome(outcome);
        this.rerender();
      },
      onLabel: (label) => {
        this.view.setLabel(label);
        this.rerender();
      },
      onSegmentClick: (row, col) => {
        if (!this.view.annotationAllowed()) return;
        this.view.toggleSegment(this.view.segmentAt(row, col));
        this.rerender();
      },
      onStroke: (row, col) => {
        if (!this.view.annotationAllowed()) return;
        this.view.paintStroke(row, col);
        this.rerender();
      },
      onClearAnnotation: () => {
        this.view.clearAnnotation();
        this.rerender();
      },
      onToggleOverlay: () => {
        this.view.toggleOverlay();
        this.rerender();
      },
      onRetryAssets: () => {
        clearAssetError(this.elements);
        this.rerender();
      },
      onSubmit: () => {
        void this.submit();
      },
    };
  }

  private async submit(): Promise<void> {
    if (!this.view.canSubmit() || !this.view.snapshot) return;
    const payload = this.view.buildFeedback();
    const sessionId = this.view.snapshot.session_id;
    this.view.submitting = true;
    this.rerender();
    try {
      const snapshot = await this.api.submitFeedback(sessionId, payload);
      await this.adopt(snapshot);
    } catch (error) {
      this.view.submitting = false;
      this.rerender();
      if (error instanceof ApiError) {
        // 400/409: surface the server message; the token is kept so a
        // retry of a network hiccup cannot double-step the session
        showAssetError(this.elements, error.detail);
      } else {
        showAssetError(this.elements, `network failure: ${String(error)} (retry to resend)`);
      }
    }
  }
}

export async function boot(apiBase = ""): Promise<App> {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");
  const app = new App(new ApiClient(apiBase), root);
  await app.start();
  return app;
}

declare global {
  interface Window {
    ximlBoot?: typeof boot;
  }
}

if (typeof window !== "undefined") {
  window.ximlBoot = boot;
  if (document.getElementById("app")) {
    void boot();
  }
}
