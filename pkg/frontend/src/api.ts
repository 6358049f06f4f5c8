// Thin client for the gateway's JSON API. The fetch function is
// injectable so tests can count or stub network calls.

import type { MessageResponse, SchemaSpec, SessionSnapshot } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, public code: string, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await resp.text();
    let parsed: any = {};
    if (text) {
      try {
        parsed = JSON.parse(text);
      } catch {
        parsed = {};
      }
    }
    if (!resp.ok) {
      const err = parsed?.error ?? {};
      throw new ApiError(resp.status, err.code ?? "HttpError", err.message ?? resp.statusText);
    }
    return parsed as T;
  }

  async createSession(): Promise<string> {
    const out = await this.request<{ session_id: string }>("POST", "/v1/sessions");
    return out.session_id;
  }

  sendMessage(sessionId: string, text: string): Promise<MessageResponse> {
    return this.request<MessageResponse>("POST", `/v1/sessions/${sessionId}/messages`, { text });
  }

  getSession(sessionId: string): Promise<SessionSnapshot> {
    return this.request<SessionSnapshot>("GET", `/v1/sessions/${sessionId}`);
  }

  async getSchemas(): Promise<SchemaSpec[]> {
    const out = await this.request<{ schemas: SchemaSpec[] }>("GET", "/v1/schemas");
    return out.schemas;
  }

  healthz(): Promise<{ status: string }> {
    return this.request<{ status: string }>("GET", "/v1/healthz");
  }
}
