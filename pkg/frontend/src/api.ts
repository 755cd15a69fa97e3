/** One HTTP request per user gesture; no local state changes here. */

import type { SessionSnapshot } from "./types.js";

export interface ApiError {
  error: string;
  detail: string;
}

export class RequestFailed extends Error {
  readonly body: ApiError;
  constructor(body: ApiError) {
    super(`${body.error}: ${body.detail}`);
    this.body = body;
  }
}

async function expectJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let body: ApiError;
    try {
      body = (await response.json()) as ApiError;
    } catch {
      body = { error: `HTTP ${response.status}`, detail: response.statusText };
    }
    throw new RequestFailed(body);
  }
  return (await response.json()) as T;
}

export class SessionApi {
  constructor(
    private readonly baseUrl: string,
    readonly sessionId: string,
    private readonly fetcher: typeof fetch = fetch,
  ) {}

  private url(path: string): string {
    return `${this.baseUrl}/sessions/${encodeURIComponent(this.sessionId)}${path}`;
  }

  async snapshot(): Promise<SessionSnapshot> {
    return expectJson(await this.fetcher(this.url("")));
  }

  async submitPrompt(text: string): Promise<{ turn_id: number }> {
    return expectJson(
      await this.fetcher(this.url("/messages"), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ text }),
      }),
    );
  }

  async updateOption(turnId: number, label: string, value: string | string[]): Promise<void> {
    await expectJson(
      await this.fetcher(this.url(`/turns/${turnId}/options/${encodeURIComponent(label)}`), {
        method: "PATCH",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ value }),
      }),
    );
  }

  async pinOption(turnId: number, label: string): Promise<void> {
    await expectJson(
      await this.fetcher(this.url(`/turns/${turnId}/options/${encodeURIComponent(label)}/pin`), {
        method: "POST",
      }),
    );
  }

  async unpinOption(label: string): Promise<void> {
    await expectJson(
      await this.fetcher(this.url(`/session-options/${encodeURIComponent(label)}/unpin`), {
        method: "POST",
      }),
    );
  }

  async deleteOption(tier: "session" | "inline", label: string): Promise<void> {
    await expectJson(
      await this.fetcher(this.url(`/options/${tier}/${encodeURIComponent(label)}`), {
        method: "DELETE",
      }),
    );
  }

  async requestControls(utterance: string): Promise<void> {
    await expectJson(
      await this.fetcher(this.url("/controls"), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ utterance }),
      }),
    );
  }

  async exportSessionOptions(): Promise<string> {
    const response = await this.fetcher(this.url("/session-options"));
    if (!response.ok) throw new RequestFailed(await response.json());
    return await response.text();
  }

  async importSessionOptions(text: string): Promise<void> {
    await expectJson(
      await this.fetcher(this.url("/session-options"), {
        method: "PUT",
        headers: { "content-type": "application/json" },
        body: text,
      }),
    );
  }
}

export async function createSession(
  baseUrl: string,
  mode: "dynamic" | "static",
  id?: string,
  fetcher: typeof fetch = fetch,
): Promise<SessionApi> {
  const response = await fetcher(`${baseUrl}/sessions`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(id ? { mode, id } : { mode }),
  });
  const body = await expectJson<{ session_id: string }>(response);
  return new SessionApi(baseUrl, body.session_id, fetcher);
}
