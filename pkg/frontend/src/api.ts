// Typed client for the ABX listening-test HTTP API.
// The payloads deliberately carry no hint of which sample is clean or
// which one X duplicates; the server only reveals truth after close.

export interface SessionInfo {
  session_id: string;
  num_trials: number;
  answered: number;
  closed: boolean;
}

export interface TrialPayload {
  session_id: string;
  trial_id: string;
  index: number;
  total: number;
  answered: boolean;
  a_url: string;
  b_url: string;
  x_url: string;
}

export interface StatsPayload {
  num_answered: number;
  num_correct: number;
  proportion_correct: number;
  p_value: number;
}

export type Choice = "A" | "B";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

export class AbxApi {
  constructor(
    private baseUrl: string = "",
    private fetchFn: typeof fetch = fetch.bind(globalThis),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(0, `network failure: ${String(err)}`);
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  createSession(nTrials: number, listener: string, seed?: number): Promise<{ session_id: string; num_trials: number }> {
    return this.request("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ n_trials: nTrials, listener, ...(seed !== undefined ? { seed } : {}) }),
    });
  }

  sessionInfo(sessionId: string): Promise<SessionInfo> {
    return this.request(`/sessions/${sessionId}`);
  }

  fetchTrial(sessionId: string, index: number): Promise<TrialPayload> {
    return this.request(`/sessions/${sessionId}/trials/${index}`);
  }

  submitResponse(sessionId: string, index: number, choice: Choice): Promise<{ answered: number; total: number }> {
    return this.request(`/sessions/${sessionId}/trials/${index}/response`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ choice }),
    });
  }

  closeSession(sessionId: string): Promise<{ closed: boolean; answered: number }> {
    return this.request(`/sessions/${sessionId}/close`, { method: "POST" });
  }

  stats(sessionId: string): Promise<StatsPayload> {
    return this.request(`/sessions/${sessionId}/stats`);
  }
}
