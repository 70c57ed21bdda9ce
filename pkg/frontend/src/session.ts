/** Session driver: one trial at a time, votes only after both images load.
 *
 * The controller owns the trial lifecycle so the gating rules live in
 * one place: a choice is accepted only in the "ready" phase (both
 * images loaded, no submission in flight), and each trial token is
 * posted at most once.
 */

import { SessionStatus, Side, StudyApiClient, TrialView } from "./api.js";

/** Resolves when both images are fully loaded, rejects on a load error. */
export type ImageLoader = (leftUrl: string, rightUrl: string) => Promise<void>;

export type Phase = "idle" | "loading" | "ready" | "submitting" | "failed" | "done";

export interface SessionEvents {
  onTrialLoading?(trial: TrialView): void;
  onTrialReady?(trial: TrialView): void;
  onProgress?(answered: number, total: number): void;
  onComplete?(status: SessionStatus): void;
  onLoadError?(trial: TrialView, message: string): void;
}

export class SessionController {
  phase: Phase = "idle";
  current: TrialView | null = null;
  private shownAt = 0;

  constructor(
    private api: StudyApiClient,
    readonly sessionId: string,
    private loadImages: ImageLoader,
    private events: SessionEvents = {},
    private now: () => number = () => Date.now(),
  ) {}

  /** Fetch and present the current unanswered trial (works after a
   * page refresh too: the server tracks the cursor). */
  async start(): Promise<void> {
    await this.presentNext();
  }

  private async presentNext(): Promise<void> {
    const next = await this.api.nextTrial(this.sessionId);
    if (next.done) {
      this.phase = "done";
      this.current = null;
      const status = await this.api.status(this.sessionId);
      this.events.onComplete?.(status);
      return;
    }
    this.current = next;
    this.phase = "loading";
    this.events.onTrialLoading?.(next);
    try {
      await this.loadImages(next.left_image_url, next.right_image_url);
    } catch (error) {
      this.phase = "failed";
      this.events.onLoadError?.(next, String(error));
      return;
    }
    this.phase = "ready";
    this.shownAt = this.now();
    this.events.onTrialReady?.(next);
  }

  /** Re-present after an image load failure. */
  async retry(): Promise<void> {
    if (this.phase !== "failed") {
      return;
    }
    await this.presentNext();
  }

  /**
   * Record a forced choice. Returns false (and posts nothing) unless a
   * trial is ready: not while images load, not while a submission is
   * in flight, not after completion.
   */
  async choose(side: Side): Promise<boolean> {
    if (this.phase !== "ready" || this.current === null) {
      return false;
    }
    const trial = this.current;
    const elapsed = Math.max(1, this.now() - this.shownAt);
    this.phase = "submitting";
    const ack = await this.api.submitVote(
      this.sessionId, trial.trial_token, side, elapsed);
    this.events.onProgress?.(ack.index, ack.total);
    await this.presentNext();
    return true;
  }
}

const SESSION_KEY = "percept-loop-session";

/** Create a session, or resume the one this browser tab already owns. */
export async function obtainSession(
  api: StudyApiClient,
  storage: Pick<Storage, "getItem" | "setItem" | "removeItem">,
): Promise<{ sessionId: string; resumed: boolean }> {
  const existing = storage.getItem(SESSION_KEY);
  if (existing) {
    try {
      await api.status(existing);
      return { sessionId: existing, resumed: true };
    } catch {
      storage.removeItem(SESSION_KEY); // stale id (server restarted)
    }
  }
  const info = await api.createSession();
  storage.setItem(SESSION_KEY, info.session_id);
  return { sessionId: info.session_id, resumed: false };
}
