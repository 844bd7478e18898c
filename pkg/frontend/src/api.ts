/** Thin typed client over the participant-local HTTP API (plus the
 * aggregator's read-only dashboard endpoint). The UI performs no ranking
 * of its own: every gesture becomes exactly one call here. */

import type {
  ActivityBucket,
  ClientEvent,
  ClientStats,
  DashboardStats,
  Explanation,
  Mode,
  Participation,
  Slate,
} from "./types.js";

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
  ) {
    super(message);
  }
}

async function asJson<T>(resp: Response): Promise<T> {
  const body = await resp.json();
  if (!resp.ok) {
    const detail =
      body && typeof body.error === "string" ? body.error : resp.statusText;
    throw new ApiError(detail, resp.status);
  }
  return body as T;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly doFetch: FetchLike = (input, init) => fetch(input, init),
  ) {}

  getFeed(mode: Mode, k: number, signal?: AbortSignal): Promise<Slate> {
    const params = new URLSearchParams({ mode, k: String(k) });
    return this.request<Slate>("GET", `/v1/feed?${params}`, undefined, signal);
  }

  postEvent(event: ClientEvent): Promise<{ status: string }> {
    return this.request("POST", "/v1/events", event);
  }

  explain(itemId: string): Promise<Explanation> {
    return this.request("GET", `/v1/explain/${encodeURIComponent(itemId)}`);
  }

  getSettings(): Promise<Record<string, string>> {
    return this.request("GET", "/v1/settings");
  }

  putSetting(key: string, value: string): Promise<Record<string, string>> {
    return this.request("PUT", `/v1/settings/${encodeURIComponent(key)}`, {
      value,
    });
  }

  putParticipation(
    mode: Participation["mode"],
    reason?: string,
  ): Promise<Participation> {
    return this.request("PUT", "/v1/participation", { mode, reason });
  }

  getStats(): Promise<ClientStats> {
    return this.request("GET", "/v1/stats");
  }

  getActivity(): Promise<ActivityBucket[]> {
    return this.request("GET", "/v1/activity");
  }

  getWatchlist(): Promise<string[]> {
    return this.request("GET", "/v1/watchlist");
  }

  getDashboardStats(): Promise<DashboardStats> {
    return this.request("GET", "/v1/dashboard/stats");
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    signal?: AbortSignal,
  ): Promise<T> {
    const init: RequestInit = { method, signal };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.doFetch(this.baseUrl + path, init);
    return asJson<T>(resp);
  }
}
