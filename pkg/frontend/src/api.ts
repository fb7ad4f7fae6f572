/** Thin typed client over the review API; no state, no recomputation. */

import type { DecisionResult, Progress, ReviewItem } from "./types.js";

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ReviewApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(`network failure: ${String(err)}`, 0);
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // keep the status text
      }
      throw new ApiError(detail, response.status);
    }
    return (await response.json()) as T;
  }

  fetchQueue(limit = 1): Promise<ReviewItem[]> {
    return this.request<ReviewItem[]>(`/api/queue?limit=${limit}`);
  }

  fetchProgress(): Promise<Progress> {
    return this.request<Progress>("/api/progress");
  }

  submitDecision(instanceId: string, label: string, reviewer: string): Promise<DecisionResult> {
    return this.request<DecisionResult>("/api/decision", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ instance_id: instanceId, label, reviewer }),
    });
  }

  exportUrl(): string {
    return `${this.baseUrl}/api/export`;
  }
}
