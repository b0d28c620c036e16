// Thin client for the service's JSON API. The fetch function is injectable
// so tests can intercept every request and inspect exactly what was sent.

import type { AskResponse, GraphStats, NodeResponse } from "./types.js";

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status?: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class ApiClient {
  private readonly base: string;

  constructor(
    baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {
    this.base = baseUrl.replace(/\/+$/, "");
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.base}${path}`, init);
    } catch (err) {
      throw new ApiError(`service unreachable: ${String(err)}`);
    }
    return response;
  }

  async ask(question: string): Promise<AskResponse> {
    const response = await this.request("/v1/ask", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ question }),
    });
    if (!response.ok) {
      throw new ApiError(`ask failed (${response.status})`, response.status);
    }
    return (await response.json()) as AskResponse;
  }

  /** Resolves to null for an unknown node id (404). */
  async node(id: string): Promise<NodeResponse | null> {
    const response = await this.request(
      `/v1/graph/node/${encodeURIComponent(id)}`,
    );
    if (response.status === 404) return null;
    if (!response.ok) {
      throw new ApiError(`node lookup failed (${response.status})`, response.status);
    }
    return (await response.json()) as NodeResponse;
  }

  async stats(): Promise<GraphStats> {
    const response = await this.request("/v1/graph/stats");
    if (!response.ok) {
      throw new ApiError(`stats failed (${response.status})`, response.status);
    }
    return (await response.json()) as GraphStats;
  }

  async health(): Promise<boolean> {
    try {
      const response = await this.request("/v1/health");
      return response.ok;
    } catch {
      return false;
    }
  }
}
