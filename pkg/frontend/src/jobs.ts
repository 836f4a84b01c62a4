/**
 * Job polling at a fixed interval until the job settles.
 *
 * Timer functions are injectable; tests drive the poller by calling the
 * captured callbacks instead of waiting wall-clock seconds.
 */

import type { ApiClient, Job } from "./api.js";

export interface PollerOptions {
  intervalMs?: number;
  onUpdate?: (job: Job) => void;
  onDone?: (job: Job) => void;
  onFailed?: (job: Job) => void;
  onError?: (err: unknown) => void;
  setTimeoutFn?: (fn: () => void, ms: number) => unknown;
  clearTimeoutFn?: (handle: unknown) => void;
}

export class JobPoller {
  private api: ApiClient;
  private jobId: string;
  private opts: Required<Pick<PollerOptions, "intervalMs">> & PollerOptions;
  private handle: unknown = null;
  private stopped = false;

  constructor(api: ApiClient, jobId: string, opts: PollerOptions = {}) {
    this.api = api;
    this.jobId = jobId;
    this.opts = { intervalMs: 1000, ...opts };
  }

  start(): void {
    this.stopped = false;
    void this.tick();
  }

  stop(): void {
    this.stopped = true;
    if (this.handle !== null) {
      (this.opts.clearTimeoutFn ?? clearTimeout)(this.handle as never);
      this.handle = null;
    }
  }

  /** One poll; reschedules itself while the job is queued or running. */
  async tick(): Promise<void> {
    if (this.stopped) return;
    let job: Job;
    try {
      job = await this.api.getJob(this.jobId);
    } catch (err) {
      this.opts.onError?.(err);
      return;
    }
    if (this.stopped) return;
    this.opts.onUpdate?.(job);
    if (job.status === "done") {
      this.opts.onDone?.(job);
      return;
    }
    if (job.status === "failed") {
      this.opts.onFailed?.(job);
      return;
    }
    const set = this.opts.setTimeoutFn ?? ((fn: () => void, ms: number) => setTimeout(fn, ms));
    this.handle = set(() => void this.tick(), this.opts.intervalMs);
  }
}
