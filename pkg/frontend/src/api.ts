import type {
  AnnotationPayload,
  HistoryResponse,
  IterateResponse,
  PredictionsResponse,
  QueueResponse,
  StateSummary,
  SubmissionResponse,
} from "./types";

/** Server rejected the request (4xx/5xx); carries the HTTP status. */
export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** The service could not be reached at all; safe to retry. */
export class NetworkError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "NetworkError";
  }
}

export class ApiClient {
  constructor(
    private base: string = "",
    private fetchImpl: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.base + path, init);
    } catch (err) {
      throw new NetworkError(`service unreachable: ${String(err)}`);
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  getState(): Promise<StateSummary> {
    return this.request("/api/state");
  }

  getQueue(): Promise<QueueResponse> {
    return this.request("/api/queue");
  }

  getPredictions(frameIndex: number): Promise<PredictionsResponse> {
    return this.request(`/api/frames/${frameIndex}/predictions`);
  }

  /**
   * Submit one frame's annotations. Submission is idempotent server-side,
   * so a network failure is retried once with the identical payload.
   */
  async submitAnnotations(
    frameIndex: number,
    payload: AnnotationPayload,
  ): Promise<SubmissionResponse> {
    const init: RequestInit = {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    };
    const path = `/api/frames/${frameIndex}/annotations`;
    try {
      return await this.request<SubmissionResponse>(path, init);
    } catch (err) {
      if (err instanceof NetworkError) {
        return await this.request<SubmissionResponse>(path, init);
      }
      throw err;
    }
  }

  iterate(): Promise<IterateResponse> {
    return this.request("/api/iterate", { method: "POST" });
  }

  getHistory(): Promise<HistoryResponse> {
    return this.request("/api/history");
  }

  imageUrl(frameIndex: number): string {
    return `${this.base}/api/frames/${frameIndex}/image`;
  }
}
