// Typed client for the iviq session API. Every view update in the app
// originates from one of these responses.

export interface TopEntry {
  video_id: string;
  score: number;
  itm_score: number | null;
  media_uri: string;
}

export interface QuestionPayload {
  text: string;
  kind: string;
  segment: string;
}

export interface StartResponse {
  session_id: string;
  round: number;
  top: TopEntry[];
}

export interface NextResponse {
  question: QuestionPayload;
  round: number;
}

export interface AnswerResponse {
  round: number;
  top: TopEntry[];
  rank_delta?: number;
  rank?: number;
}

export interface RoundRecord {
  round_index: number;
  question: QuestionPayload;
  answer: string;
  generator: string;
  answer_provider: string;
  answer_latency_s: number;
}

export interface SessionRecord {
  schema: string;
  config: Record<string, unknown>;
  target: string | null;
  initial_query: string;
  fragments: string[];
  composed: string;
  rounds: RoundRecord[];
  trajectory: number[];
}

export interface SessionState {
  record: SessionRecord;
  pending_question: QuestionPayload | null;
  round: number;
  exhausted: boolean;
  top: TopEntry[];
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let message = `HTTP ${response.status}`;
  try {
    const body = (await response.json()) as { error?: { message?: string } };
    if (body.error?.message) message = body.error.message;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(response.status, message);
}

export class SessionApi {
  constructor(private readonly baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("/api/healthz");
  }

  start(query: string, target?: string, config?: Record<string, unknown>): Promise<StartResponse> {
    return this.request("/api/sessions", {
      method: "POST",
      body: JSON.stringify({ query, target: target ?? null, config: config ?? {} }),
    });
  }

  next(sessionId: string): Promise<NextResponse> {
    return this.request(`/api/sessions/${sessionId}/next`, { method: "POST" });
  }

  answer(sessionId: string, text: string, clientLatencyMs?: number): Promise<AnswerResponse> {
    return this.request(`/api/sessions/${sessionId}/answer`, {
      method: "POST",
      body: JSON.stringify({ answer: text, client_latency_ms: clientLatencyMs ?? null }),
    });
  }

  record(sessionId: string): Promise<SessionRecord> {
    return this.request(`/api/sessions/${sessionId}`);
  }

  state(sessionId: string): Promise<SessionState> {
    return this.request(`/api/sessions/${sessionId}/state`);
  }
}
