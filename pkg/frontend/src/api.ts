/** Thin typed client for the four session endpoints. */

import type { FeedbackPayload, MetricsRecord, SessionRequest, Snapshot } from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let detail = response.statusText;
  try {
    const body = await response.json();
    if (body && body.detail !== undefined) {
      detail = typeof body.detail === "string" ? body.detail : JSON.stringify(body.detail);
    }
  } catch {
    // non-JSON error body: keep the status text
  }
  return new ApiError(response.status, detail);
}

export class ApiClient {
  constructor(private readonly base: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.base + path, init);
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  createSession(request: SessionRequest = {}): Promise<Snapshot> {
    return this.request<Snapshot>("/session", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(request),
    });
  }

  getQuery(sessionId: string): Promise<Snapshot> {
    return this.request<Snapshot>(`/session/${sessionId}/query`);
  }

  submitFeedback(sessionId: string, payload: FeedbackPayload): Promise<Snapshot> {
    return this.request<Snapshot>(`/session/${sessionId}/feedback`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  getMetrics(sessionId: string): Promise<MetricsRecord[]> {
    return this.request<MetricsRecord[]>(`/session/${sessionId}/metrics`);
  }

  assetUrl(path: string): string {
    return this.base + path;
  }
}
