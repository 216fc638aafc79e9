import type {
  HumanCondition,
  NextResponse,
  PairKey,
  SessionInfo,
  SubmitAck,
  SupportLabel,
} from "./types.js";

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

/** Thin typed client; every displayed number originates from these calls. */
export class AnnotationApi {
  constructor(
    private readonly baseUrl: string,
    private readonly token?: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private headers(): Record<string, string> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    return headers;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      ...init,
      headers: { ...this.headers(), ...(init?.headers ?? {}) },
    });
    if (!response.ok) {
      let code = "http_error";
      let detail = `HTTP ${response.status}`;
      try {
        const body = (await response.json()) as { error?: { code: string; detail: string } };
        if (body.error) {
          code = body.error.code;
          detail = body.error.detail;
        }
      } catch {
        // non-JSON error body: keep the generic detail
      }
      throw new ApiError(response.status, code, detail);
    }
    return (await response.json()) as T;
  }

  createSession(options: {
    session_id?: string;
    judge_id: string;
    condition: HumanCondition;
    topic_ids: string[];
  }): Promise<SessionInfo> {
    return this.request<SessionInfo>("/sessions", {
      method: "POST",
      body: JSON.stringify(options),
    });
  }

  nextItem(sessionId: string): Promise<NextResponse> {
    return this.request<NextResponse>(`/sessions/${encodeURIComponent(sessionId)}/next`);
  }

  submitJudgment(sessionId: string, pair: PairKey, label: SupportLabel): Promise<SubmitAck> {
    return this.request<SubmitAck>(`/sessions/${encodeURIComponent(sessionId)}/judgments`, {
      method: "POST",
      body: JSON.stringify({ ...pair, label }),
    });
  }

  async health(): Promise<boolean> {
    try {
      const response = await this.fetchImpl(`${this.baseUrl}/health`);
      return response.ok;
    } catch {
      return false;
    }
  }
}
