/** Typed client for the study session HTTP API. */

export interface SessionInfo {
  session_id: string;
  schedule_id: string;
  subject_id: string;
  study_id: string;
  total_trials: number;
}

export interface TrialView {
  trial_token: string;
  left_image_url: string;
  right_image_url: string;
  index: number;
  total: number;
}

export type NextResponse =
  | ({ done: false } & TrialView)
  | { done: true; index: number; total: number };

export interface VoteAck {
  accepted: boolean;
  sequence: number;
  done: boolean;
  index: number;
  total: number;
}

export interface SanityVerdict {
  passed: boolean;
  consistency: number;
  n_sanity: number;
}

export interface SessionStatus {
  completed: boolean;
  answered: number;
  total: number;
  sanity: SanityVerdict | null;
}

export type Side = "left" | "right";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

const sleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

/** Client surface; tests substitute in-memory fakes. */
export interface StudyApiClient {
  createSession(subjectId?: string): Promise<SessionInfo>;
  nextTrial(sessionId: string): Promise<NextResponse>;
  status(sessionId: string): Promise<SessionStatus>;
  submitVote(sessionId: string, trialToken: string, choice: Side,
             elapsedMs: number, retries?: number): Promise<VoteAck>;
}

export class StudyApi implements StudyApiClient {
  constructor(
    private baseUrl = "",
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
    private delay: (ms: number) => Promise<void> = sleep,
  ) {}

  private async requestJson<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) {
      const body = await response.text();
      throw new ApiError(response.status, `${path}: ${response.status} ${body}`);
    }
    return (await response.json()) as T;
  }

  createSession(subjectId?: string): Promise<SessionInfo> {
    return this.requestJson<SessionInfo>("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(subjectId ? { subject_id: subjectId } : {}),
    });
  }

  nextTrial(sessionId: string): Promise<NextResponse> {
    return this.requestJson<NextResponse>(`/sessions/${sessionId}/next`);
  }

  status(sessionId: string): Promise<SessionStatus> {
    return this.requestJson<SessionStatus>(`/sessions/${sessionId}/status`);
  }

  /**
   * Submit one choice. Network failures are retried with the same
   * trial token; the server stores one vote per token, so a retry of a
   * delivered-but-unacknowledged request returns the original ack.
   */
  async submitVote(
    sessionId: string,
    trialToken: string,
    choice: Side,
    elapsedMs: number,
    retries = 3,
  ): Promise<VoteAck> {
    let lastError: unknown;
    for (let attempt = 0; attempt <= retries; attempt++) {
      if (attempt > 0) {
        await this.delay(200 * attempt);
      }
      try {
        return await this.requestJson<VoteAck>(`/sessions/${sessionId}/votes`, {
          method: "POST",
          headers: { "content-type": "application/json" },
          body: JSON.stringify({
            trial_token: trialToken,
            choice,
            elapsed_ms: Math.max(1, Math.round(elapsedMs)),
          }),
        });
      } catch (error) {
        if (error instanceof ApiError) {
          throw error; // the server answered; retrying cannot help
        }
        lastError = error;
      }
    }
    throw lastError;
  }
}
