// Typed client for the dialogue training service's /v1 API.

export interface ActPayload {
  intent: string;
  inform_slots: Record<string, string>;
  request_slots: string[];
}

export interface GoalInfo {
  constraints: Record<string, string>;
  requests: string[];
}

export interface SessionInfo {
  session_id: string;
  run: string;
  goal: GoalInfo;
  max_turns: number;
  opening_prompt: string;
}

export interface TurnResult {
  terminal: boolean;
  agent_act?: ActPayload;
  agent_text?: string;
  turn_count: number;
  max_turns?: number;
  reason?: string;
  status?: string;
  awaiting_feedback?: boolean;
}

export interface FeedbackResult {
  status: string;
  reason: string;
  committed_tuples: number;
  episode_return: number;
  epoch: number;
}

export interface DomainInfo {
  intents: string[];
  slots: string[];
  agent_actions: { id: number; intent: string; slot: string | null }[];
  user_actions: { id: number; intent: string; slot: string | null }[];
  max_turns: number;
}

export interface SessionStatus {
  session_id: string;
  run: string;
  status: string;
  turn_count: number;
  max_turns: number;
  dialogue_over: boolean;
  goal: GoalInfo;
  transcript: { actor: string; act: ActPayload }[];
}

export interface RunStatus {
  name: string;
  variant: string;
  planning_steps: number;
  epoch: number;
  real_buffer: number;
  sim_buffer: number;
  sessions_served: number;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}/v1${path}`, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        detail = body.detail ?? detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  getDomain(): Promise<DomainInfo> {
    return this.request("/domain");
  }

  getRuns(): Promise<{ runs: RunStatus[] }> {
    return this.request("/runs");
  }

  createSession(): Promise<SessionInfo> {
    return this.request("/sessions", { method: "POST", body: "{}" });
  }

  getSession(sessionId: string): Promise<SessionStatus> {
    return this.request(`/sessions/${sessionId}`);
  }

  postTurn(sessionId: string, turnId: string, act: ActPayload): Promise<TurnResult> {
    return this.request(`/sessions/${sessionId}/turns`, {
      method: "POST",
      body: JSON.stringify({ turn_id: turnId, act }),
    });
  }

  postFeedback(sessionId: string, success: boolean): Promise<FeedbackResult> {
    return this.request(`/sessions/${sessionId}/feedback`, {
      method: "POST",
      body: JSON.stringify({ success }),
    });
  }

  abandonSession(sessionId: string): Promise<FeedbackResult> {
    return this.request(`/sessions/${sessionId}/abandon`, { method: "POST" });
  }

  streamUrl(sessionId: string): string {
    return `${this.baseUrl}/v1/sessions/${sessionId}/stream`;
  }
}
