/** Review session state machine: fetch -> display -> submit -> next.
 *
 * The server is the source of truth; the controller never mutates labels
 * locally and re-fetches the head of the queue after every acknowledged
 * decision, so a page refresh resumes exactly where the queue stands.
 */

import { ApiError, ReviewApi } from "./api.js";
import type { Progress, ReviewItem } from "./types.js";

export type Phase = "loading" | "reviewing" | "done" | "error";

export interface SessionState {
  phase: Phase;
  item: ReviewItem | null;
  selectedOption: number | null; // 1-based display index into item.options
  progress: Progress | null;
  /** Set in the error phase and for non-blocking submit failures. */
  message: string | null;
  lastSuperseded: boolean;
}

type Listener = (state: SessionState) => void;

export class ReviewController {
  private state: SessionState = {
    phase: "loading",
    item: null,
    selectedOption: null,
    progress: null,
    message: null,
    lastSuperseded: false,
  };
  private listeners: Listener[] = [];

  constructor(
    private readonly api: ReviewApi,
    readonly reviewer: string,
  ) {}

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
  }

  snapshot(): SessionState {
    return { ...this.state };
  }

  private emit(update: Partial<SessionState>): void {
    this.state = { ...this.state, ...update };
    for (const listener of this.listeners) listener(this.snapshot());
  }

  /** Load the current head of the queue plus progress. */
  async refresh(): Promise<void> {
    this.emit({ phase: "loading", message: null });
    try {
      const [batch, progress] = await Promise.all([
        this.api.fetchQueue(1),
        this.api.fetchProgress(),
      ]);
      if (batch.length === 0) {
        this.emit({ phase: "done", item: null, selectedOption: null, progress });
      } else {
        this.emit({
          phase: "reviewing",
          item: batch[0],
          selectedOption: null,
          progress,
        });
      }
    } catch (err) {
      this.emit({ phase: "error", message: describe(err) });
    }
  }

  /** Select a displayed option by its 1-based number (keyboard shortcut). */
  select(optionNumber: number): void {
    const item = this.state.item;
    if (this.state.phase !== "reviewing" || !item) return;
    if (optionNumber < 1 || optionNumber > item.options.length) return;
    this.emit({ selectedOption: optionNumber });
  }

  selectedLabel(): string | null {
    const { item, selectedOption } = this.state;
    if (!item || selectedOption === null) return null;
    return item.options[selectedOption - 1];
  }

  /** Submit the selected option and advance to the next queued item. */
  async submit(): Promise<void> {
    const item = this.state.item;
    const label = this.selectedLabel();
    if (this.state.phase !== "reviewing" || !item || label === null) return;
    try {
      const result = await this.api.submitDecision(item.instance_id, label, this.reviewer);
      this.emit({ lastSuperseded: result.superseded, message: null });
    } catch (err) {
      // Non-blocking: keep the current item on screen, surface a retry banner.
      this.emit({ message: describe(err) });
      return;
    }
    await this.refresh();
  }

  exportUrl(): string {
    return this.api.exportUrl();
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) {
    return err.status > 0 ? `API error ${err.status}: ${err.message}` : err.message;
  }
  return String(err);
}
