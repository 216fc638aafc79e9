import type { PairKey, SupportLabel } from "./types.js";

export interface PendingSubmit {
  pair: PairKey;
  label: SupportLabel;
}

export type SubmitSender = (pending: PendingSubmit) => Promise<void>;

/**
 * Ordered replay queue for submits made while the service is unreachable.
 *
 * Each entry is sent exactly once: an entry is removed only after its
 * send resolves, and a failed send stops the flush so order is kept.
 */
export class OfflineQueue {
  private pending: PendingSubmit[] = [];
  private flushing = false;

  constructor(private readonly sender: SubmitSender) {}

  get size(): number {
    return this.pending.length;
  }

  enqueue(entry: PendingSubmit): void {
    this.pending.push(entry);
  }

  /** Send queued entries in order; returns how many were delivered. */
  async flush(): Promise<number> {
    if (this.flushing) return 0;
    this.flushing = true;
    let delivered = 0;
    try {
      while (this.pending.length > 0) {
        const entry = this.pending[0]!;
        try {
          await this.sender(entry);
        } catch {
          break; // still offline; keep the entry for the next flush
        }
        this.pending.shift();
        delivered += 1;
      }
    } finally {
      this.flushing = false;
    }
    return delivered;
  }
}
