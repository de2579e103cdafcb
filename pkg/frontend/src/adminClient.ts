// Thin typed wrapper over the engine's admin HTTP endpoints.

import type { EngineMode, EngineState } from "./protocol.js";

export class AdminError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "AdminError";
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class AdminClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly token: string | null = null,
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private headers(): Record<string, string> {
    const headers: Record<string, string> = { "content-type": "application/json" };
    if (this.token) {
      headers["x-admin-token"] = this.token;
    }
    return headers;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: this.headers(),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    let payload: unknown = null;
    try {
      payload = await response.json();
    } catch {
      // non-JSON error body; fall through with status only
    }
    if (!response.ok) {
      const detail =
        payload && typeof payload === "object" && "error" in payload
          ? String((payload as { error: unknown }).error)
          : `HTTP ${response.status}`;
      throw new AdminError(response.status, detail);
    }
    return payload as T;
  }

  getState(): Promise<EngineState> {
    return this.request<EngineState>("GET", "/state");
  }

  setThreshold(value: number): Promise<{ ok: boolean; threshold_per_10k: number }> {
    return this.request("POST", "/admin/threshold", { value });
  }

  setFilter(changes: Record<string, unknown>): Promise<{ ok: boolean }> {
    return this.request("POST", "/admin/filter", changes);
  }

  setMode(mode: EngineMode): Promise<{ ok: boolean; mode: EngineMode }> {
    return this.request("POST", "/admin/mode", { mode });
  }

  setViewers(count: number): Promise<{ ok: boolean; viewers: number }> {
    return this.request("POST", "/admin/viewers", { count });
  }

  sendNotice(text: string): Promise<{ ok: boolean }> {
    return this.request("POST", "/admin/notice", { text });
  }
}

export class ChatClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly participantToken: string | null = null,
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  async postComment(author: string, body: string): Promise<string> {
    const headers: Record<string, string> = { "content-type": "application/json" };
    if (this.participantToken) {
      headers["x-participant-token"] = this.participantToken;
    }
    const response = await this.fetchFn(this.baseUrl + "/chat", {
      method: "POST",
      headers,
      body: JSON.stringify({ author, body }),
    });
    const payload = (await response.json()) as { id?: string; error?: string };
    if (!response.ok || !payload.id) {
      throw new AdminError(response.status, payload.error ?? `HTTP ${response.status}`);
    }
    return payload.id;
  }
}
