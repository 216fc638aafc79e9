import { AnnotationApi, ApiError } from "./api.js";
import { OfflineQueue } from "./queue.js";
import type { AnnotationItem, NextResponse, SupportLabel } from "./types.js";

const LABELS: { value: SupportLabel; name: string; key: string; help: string }[] = [
  {
    value: "FULL_SUPPORT",
    name: "Full Support",
    key: "1",
    help: "All of the information in the answer sentence is supported by the cited passage.",
  },
  {
    value: "PARTIAL_SUPPORT",
    name: "Partial Support",
    key: "2",
    help: "Some of the information is supported by the cited passage, but other parts are not.",
  },
  {
    value: "NO_SUPPORT",
    name: "No Support",
    key: "3",
    help: "The cited passage does not support any part of the answer sentence.",
  },
];

const LABEL_NAMES: Record<SupportLabel, string> = {
  FULL_SUPPORT: "Full Support",
  PARTIAL_SUPPORT: "Partial Support",
  NO_SUPPORT: "No Support",
};

/**
 * One annotation session in one browser tab.
 *
 * The view is a thin client: every number and every disclosed machine
 * label comes from a server payload. In particular the machine-label
 * badge is rendered only when the served item carries the field; the
 * client never infers it, and never pre-selects it as the answer.
 */
export class AnnotationApp {
  private item: AnnotationItem | null = null;
  private selected: SupportLabel | null = null;
  private submitting = false;
  private readonly queue: OfflineQueue;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: AnnotationApi,
    private readonly sessionId: string,
  ) {
    this.queue = new OfflineQueue(async ({ pair, label }) => {
      await this.api.submitJudgment(this.sessionId, pair, label);
    });
    const win = root.ownerDocument.defaultView;
    win?.addEventListener("online", () => {
      void this.reconnect();
    });
    root.ownerDocument.addEventListener("keydown", (event) => {
      this.handleKey(event as KeyboardEvent);
    });
  }

  get pendingOffline(): number {
    return this.queue.size;
  }

  async start(): Promise<void> {
    await this.advance();
  }

  private async advance(): Promise<void> {
    let next: NextResponse;
    try {
      next = await this.api.nextItem(this.sessionId);
    } catch (error) {
      this.renderFetchError(error);
      return;
    }
    if (next.done) {
      this.item = null;
      this.renderDone(next.label_counts, next.total);
      return;
    }
    this.item = next;
    this.selected = null;
    this.renderItem(next);
  }

  private handleKey(event: KeyboardEvent): void {
    if (!this.item || this.submitting) return;
    const match = LABELS.find((label) => label.key === event.key);
    if (match) this.select(match.value);
    if (event.key === "Enter" && this.selected) void this.submitAndAdvance();
  }

  select(label: SupportLabel): void {
    if (!this.item || this.submitting) return;
    this.selected = label;
    for (const button of this.root.querySelectorAll<HTMLButtonElement>(".label-button")) {
      button.classList.toggle("selected", button.dataset.label === label);
      button.setAttribute("aria-pressed", String(button.dataset.label === label));
    }
    const submit = this.submitButton();
    if (submit) submit.disabled = false;
  }

  async submitAndAdvance(): Promise<void> {
    const item = this.item;
    if (!item || !this.selected || this.submitting) return;
    this.submitting = true;
    const submit = this.submitButton();
    if (submit) submit.disabled = true;
    const label = this.selected;
    try {
      await this.api.submitJudgment(this.sessionId, item.pair, label);
    } catch (error) {
      this.submitting = false;
      if (error instanceof ApiError) {
        // Server refused: keep the item on screen and surface the reason.
        this.setStatus(`Submit failed: ${error.message}`, "error");
        if (submit) submit.disabled = false;
        return;
      }
      // Network down: hold the judgment locally; reconnect replays it once.
      this.queue.enqueue({ pair: item.pair, label });
      this.setStatus(
        `Offline: judgment queued (${this.queue.size} pending). It will be sent when the connection returns.`,
        "offline",
      );
      return;
    }
    this.submitting = false;
    await this.advance();
  }

  /** Flush queued submits, then resume from the server's view of the queue. */
  async reconnect(): Promise<void> {
    const delivered = await this.queue.flush();
    if (this.queue.size > 0) {
      this.setStatus(`Still offline (${this.queue.size} queued).`, "offline");
      return;
    }
    if (delivered > 0) this.setStatus("Reconnected: queued judgments delivered.", "info");
    this.submitting = false;
    await this.advance();
  }

  private submitButton(): HTMLButtonElement | null {
    return this.root.querySelector<HTMLButtonElement>(".submit-button");
  }

  private setStatus(message: string, kind: "info" | "error" | "offline"): void {
    const status = this.root.querySelector<HTMLElement>(".status");
    if (status) {
      status.textContent = message;
      status.dataset.kind = kind;
    }
  }

  private renderItem(item: AnnotationItem): void {
    const machineBadge =
      item.machine_label !== undefined
        ? `<aside class="machine-label-badge" role="note">
             Reference label from the automatic judge:
             <strong>${escapeHtml(LABEL_NAMES[item.machine_label])}</strong>
           </aside>`
        : "";
    this.root.innerHTML = `
      <header class="item-header">
        <span class="topic-query">${escapeHtml(item.topic_query)}</span>
        <span class="progress">${item.position + 1} / ${item.total}</span>
      </header>
      <section class="item-body">
        <article class="sentence-panel">
          <h2>Answer sentence</h2>
          <p class="sentence-text">${escapeHtml(item.sentence_text)}</p>
        </article>
        <article class="passage-panel">
          <h2>Cited passage</h2>
          ${item.passage_title ? `<h3 class="passage-title">${escapeHtml(item.passage_title)}</h3>` : ""}
          <p class="passage-text">${escapeHtml(item.passage_text)}</p>
        </article>
      </section>
      ${machineBadge}
      <section class="label-controls">
        ${LABELS.map(
          (label) => `
          <button type="button" class="label-button" data-label="${label.value}"
                  aria-pressed="false" title="${escapeHtml(label.help)}">
            <kbd>${label.key}</kbd> ${label.name}
            <small class="label-help">${escapeHtml(label.help)}</small>
          </button>`,
        ).join("")}
      </section>
      <button type="button" class="submit-button" disabled>Submit and continue</button>
      <p class="status" role="status"></p>
    `;
    for (const button of this.root.querySelectorAll<HTMLButtonElement>(".label-button")) {
      button.addEventListener("click", () => {
        this.select(button.dataset.label as SupportLabel);
      });
    }
    this.submitButton()?.addEventListener("click", () => {
      void this.submitAndAdvance();
    });
  }

  private renderDone(counts: Partial<Record<SupportLabel, number>>, total: number): void {
    const rows = LABELS.map(
      (label) => `
        <tr>
          <td>${label.name}</td>
          <td class="count" data-label="${label.value}">${counts[label.value] ?? 0}</td>
        </tr>`,
    ).join("");
    this.root.innerHTML = `
      <section class="done-summary">
        <h2>Session complete</h2>
        <p>${total} items assessed.</p>
        <table class="label-count-table"><tbody>${rows}</tbody></table>
      </section>
    `;
  }

  private renderFetchError(error: unknown): void {
    const message = error instanceof Error ? error.message : String(error);
    this.root.innerHTML = `
      <section class="fetch-error">
        <p class="status" data-kind="error">Could not load the next item: ${escapeHtml(message)}</p>
        <button type="button" class="retry-button">Retry</button>
      </section>
    `;
    this.root.querySelector<HTMLButtonElement>(".retry-button")?.addEventListener("click", () => {
      void this.reconnect();
    });
  }
}

function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}
