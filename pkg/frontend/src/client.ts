/**
 * Thin HTTP client for the session service.  All payloads pass through
 * unchanged; the server remains authoritative for every domain value.
 */

import { CreatedSession, Query, Snapshot, SolveReport } from "./types.js";

export interface CreateRequest {
  config: number[];
  players: Record<string, unknown>[];
  schedule: number[];
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`${status}: ${detail}`);
  }
}

async function expectJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: typeof fetch = fetch,
  ) {}

  async createSession(request: CreateRequest): Promise<CreatedSession> {
    const response = await this.fetchImpl(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ v: 1, ...request }),
    });
    return expectJson<CreatedSession>(response);
  }

  async getState(sessionId: string): Promise<Snapshot> {
    const response = await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}`);
    return expectJson<Snapshot>(response);
  }

  async getQuery(sessionId: string, player: number): Promise<Query | null> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/sessions/${sessionId}/query?player=${player}`,
    );
    const body = await expectJson<{ query: Query | null }>(response);
    return body.query;
  }

  async postAnswer(
    sessionId: string,
    player: number,
    token: string,
    queryId: string,
    selection: number[],
  ): Promise<Snapshot> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/sessions/${sessionId}/answer`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({
          v: 1,
          player,
          token,
          query_id: queryId,
          selection,
        }),
      },
    );
    const body = await expectJson<{ state: Snapshot }>(response);
    return body.state;
  }

  async getResult(
    sessionId: string,
  ): Promise<{ status: string; report: SolveReport | null }> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/sessions/${sessionId}/result`,
    );
    return expectJson(response);
  }
}
