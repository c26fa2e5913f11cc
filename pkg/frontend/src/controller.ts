import { ApiRequestError, ConsoleApi } from "./api.js";
import type { AnswerBody, AnswerResult, ClaimDetail, QueueItem, VerifyStatus } from "./types.js";

export interface ConsoleState {
  queue: QueueItem[];
  detail: ClaimDetail | null;
  verify: VerifyStatus | null;
  error: string | null;
  reverifyNote: string | null;
}

export interface ControllerOptions {
  /** Gate for override/lock, mirroring the exceptional-privilege dialog.
   * Returning false cancels: no request is sent. */
  confirmPrivilege?: (message: string) => boolean | Promise<boolean>;
  onChange?: (state: ConsoleState) => void;
  pollMs?: number;
}

/** UI state machine: optimistic refresh on every mutation, server stays
 * authoritative (stale answers surface the server's 409 and re-sync). */
export class ConsoleController {
  readonly state: ConsoleState = {
    queue: [],
    detail: null,
    verify: null,
    error: null,
    reverifyNote: null,
  };
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly api: ConsoleApi,
    private readonly options: ControllerOptions = {},
  ) {}

  private emit(): void {
    this.options.onChange?.(this.state);
  }

  async refreshQueue(): Promise<QueueItem[]> {
    const response = await this.api.getQueue();
    this.state.queue = response.items; // server order preserved
    this.emit();
    return response.items;
  }

  async refreshStatus(): Promise<VerifyStatus> {
    this.state.verify = await this.api.verifyStatus();
    this.emit();
    return this.state.verify;
  }

  async select(claimId: string): Promise<ClaimDetail> {
    this.state.detail = await this.api.getClaimDetail(claimId);
    this.emit();
    return this.state.detail;
  }

  /** Submit one structured answer. On success the queue and detail refresh
   * and the closure re-verification cost surfaces; 4xx errors render inline
   * and the item stays open; a 409 (stale) also re-syncs the queue. */
  async submitAnswer(itemId: string, answer: AnswerBody): Promise<AnswerResult | null> {
    this.state.error = null;
    try {
      const result = await this.api.answer(itemId, answer);
      this.state.reverifyNote =
        result.calls_actual > 0
          ? `re-verified ${result.reverify.closure.length} claims with ` +
            `${result.calls_actual} calls (full rerun: ${result.calls_full})`
          : "no re-verification needed";
      await this.refreshQueue();
      if (this.state.detail) {
        await this.select(this.state.detail.claim.claim_id).catch(() => {
          this.state.detail = null;
        });
      }
      this.emit();
      return result;
    } catch (err) {
      if (err instanceof ApiRequestError) {
        this.state.error = `${err.error.code}: ${err.error.message}`;
        if (err.status === 409) {
          await this.refreshQueue(); // answered elsewhere: re-sync
        }
        this.emit();
        return null;
      }
      throw err;
    }
  }

  async overrideClaim(claimId: string, value: string): Promise<boolean> {
    const allowed = await this.confirm(
      `Override is an exceptional supervisory privilege. Set ${claimId} to "${value}"?`,
    );
    if (!allowed) {
      return false;
    }
    this.state.error = null;
    try {
      await this.api.override(claimId, value);
      await this.select(claimId);
      return true;
    } catch (err) {
      if (err instanceof ApiRequestError) {
        this.state.error = `${err.error.code}: ${err.error.message}`;
        this.emit();
        return false;
      }
      throw err;
    }
  }

  async lockClaim(claimId: string): Promise<boolean> {
    const allowed = await this.confirm(
      `Lock ${claimId}? Locked claims are skipped by all future verification rounds.`,
    );
    if (!allowed) {
      return false;
    }
    await this.api.lock(claimId);
    await this.select(claimId);
    return true;
  }

  async startVerify(): Promise<void> {
    this.state.error = null;
    try {
      await this.api.startVerify();
    } catch (err) {
      if (err instanceof ApiRequestError) {
        this.state.error = `${err.error.code}: ${err.error.message}`;
        this.emit();
        return;
      }
      throw err;
    }
    await this.waitForVerify();
    await this.refreshQueue();
  }

  async waitForVerify(pollMs = 200, maxWaitMs = 120_000): Promise<VerifyStatus> {
    const deadline = Date.now() + maxWaitMs;
    for (;;) {
      const status = await this.refreshStatus();
      if (!status.running) {
        return status;
      }
      if (Date.now() > deadline) {
        throw new Error("verification did not finish in time");
      }
      await new Promise((resolve) => setTimeout(resolve, pollMs));
    }
  }

  startPolling(): void {
    if (this.timer !== null) {
      return;
    }
    const tick = () => {
      this.refreshQueue().catch(() => undefined);
      this.refreshStatus().catch(() => undefined);
    };
    this.timer = setInterval(tick, this.options.pollMs ?? 1500);
    tick();
  }

  stopPolling(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  private async confirm(message: string): Promise<boolean> {
    const gate = this.options.confirmPrivilege;
    if (!gate) {
      return false; // no dialog wired: privileged actions stay unavailable
    }
    return await gate(message);
  }
}
