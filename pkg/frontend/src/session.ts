/** Minimal fetch shape so tests can inject a fake transport. */
export interface FetchLike {
  (
    url: string,
    init?: { method?: string; body?: string; headers?: Record<string, string> },
  ): Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;
}

export interface ApiResult {
  ok: boolean;
  status: number;
  body: unknown;
}

/** Thin client for the engine's /session REST endpoints. */
export class SessionApi {
  constructor(
    private base = "",
    private fetchFn: FetchLike = fetch as unknown as FetchLike,
  ) {}

  private async call(path: string, method: string, body?: unknown): Promise<ApiResult> {
    try {
      const res = await this.fetchFn(this.base + path, {
        method,
        body: body === undefined ? undefined : JSON.stringify(body),
        headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      });
      let parsed: unknown = null;
      try {
        parsed = await res.json();
      } catch {
        parsed = null;
      }
      return { ok: res.ok, status: res.status, body: parsed };
    } catch (err) {
      return { ok: false, status: 0, body: { error: String(err) } };
    }
  }

  state(): Promise<ApiResult> {
    return this.call("/session/state", "GET");
  }

  start(config: Record<string, unknown>): Promise<ApiResult> {
    return this.call("/session/start", "POST", config);
  }

  stop(): Promise<ApiResult> {
    return this.call("/session/stop", "POST", {});
  }

  metrics(): Promise<ApiResult> {
    return this.call("/session/metrics", "GET");
  }
}
