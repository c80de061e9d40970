/**
 * View-model state for the labeling workflow.
 *
 * Pure logic, no DOM: the app layer renders from these structures and
 * the unit tests drive them directly. Numbers pass through untouched,
 * the model's truth lives on the server.
 */

import type { Label, LabelEntry, QueryBatch, QueryCard, RoundSummary, Histogram } from './api.js';

/** Labels staged against the current query batch, pending submission. */
export class ReviewQueue {
  private items: QueryCard[];
  private staged = new Map<number, Label>();
  private cursor = 0;

  constructor(cards: QueryCard[]) {
    this.items = [...cards];
  }

  get cards(): readonly QueryCard[] {
    return this.items;
  }

  get size(): number {
    return this.items.length;
  }

  get position(): number {
    return this.cursor;
  }

  get current(): QueryCard | null {
    return this.items[this.cursor] ?? null;
  }

  /** Cards without a staged label. */
  get remaining(): number {
    return this.items.filter((c) => !this.staged.has(c.index)).length;
  }

  stagedLabel(index: number): Label | undefined {
    return this.staged.get(index);
  }

  /** Staged labels in index order, the exact POST /labels payload. */
  toRequest(): LabelEntry[] {
    return [...this.staged.entries()]
      .sort((a, b) => a[0] - b[0])
      .map(([index, label]) => ({ index, label }));
  }

  next(): void {
    if (this.cursor < this.items.length - 1) {
      this.cursor += 1;
    }
  }

  prev(): void {
    if (this.cursor > 0) {
      this.cursor -= 1;
    }
  }

  /** Focus the card for a series point, if it is in the batch. */
  seek(index: number): void {
    const at = this.items.findIndex((c) => c.index === index);
    if (at >= 0) {
      this.cursor = at;
    }
  }

  setLabel(index: number, label: Label): void {
    if (this.items.some((c) => c.index === index)) {
      this.staged.set(index, label);
    }
  }

  clearLabel(index: number): void {
    this.staged.delete(index);
  }

  /** Stage a label for the focused card, then jump to the next unlabeled one. */
  labelCurrent(label: Label): void {
    const card = this.current;
    if (!card) {
      return;
    }
    this.staged.set(card.index, label);
    this.advanceToUnlabeled();
  }

  private advanceToUnlabeled(): void {
    for (let i = this.cursor + 1; i < this.items.length; i++) {
      if (!this.staged.has(this.items[i].index)) {
        this.cursor = i;
        return;
      }
    }
    for (let i = 0; i < this.cursor; i++) {
      if (!this.staged.has(this.items[i].index)) {
        this.cursor = i;
        return;
      }
    }
  }

  /** Remove cards the server accepted; their staged entries go with them. */
  drop(indices: Iterable<number>): void {
    const gone = new Set(indices);
    const focused = this.current?.index;
    this.items = this.items.filter((c) => !gone.has(c.index));
    for (const index of gone) {
      this.staged.delete(index);
    }
    if (focused !== undefined && !gone.has(focused)) {
      this.seek(focused);
    } else {
      this.cursor = Math.min(this.cursor, Math.max(0, this.items.length - 1));
    }
  }
}

export type QueueAction =
  | { kind: 'label'; label: Label }
  | { kind: 'next' }
  | { kind: 'prev' }
  | { kind: 'skip' }
  | { kind: 'submit' };

/** Keyboard protocol: a = anomalous, n = normal, s = skip, arrows move, Enter submits. */
export function keyAction(key: string): QueueAction | null {
  switch (key) {
    case 'a':
      return { kind: 'label', label: 1 };
    case 'n':
      return { kind: 'label', label: 0 };
    case 's':
      return { kind: 'skip' };
    case 'ArrowRight':
      return { kind: 'next' };
    case 'ArrowLeft':
      return { kind: 'prev' };
    case 'Enter':
      return { kind: 'submit' };
    default:
      return null;
  }
}

export interface RoundView {
  round: number;
  strategy: string;
  oldOffset: number;
  newOffset: number;
  offsetMoved: boolean;
  histogramsMoved: boolean;
  missingClass: boolean;
  f1Before: number | null;
  f1After: number | null;
  precisionBefore: number | null;
  precisionAfter: number | null;
  recallBefore: number | null;
  recallAfter: number | null;
  histogramBefore: Histogram;
  histogramAfter: Histogram;
}

/**
 * Shape an update response for display. Offsets and metrics are carried
 * verbatim from the payload; the only derived facts are the two booleans
 * saying whether the offset marker and the score histogram moved (an
 * offset-only update keeps the histogram, a reweighting update keeps
 * nothing fixed but may leave the offset).
 */
export function roundView(summary: RoundSummary): RoundView {
  const before = summary.histogram_before;
  const after = summary.histogram_after;
  const histogramsMoved =
    before.counts.length !== after.counts.length ||
    before.counts.some((count, i) => count !== after.counts[i]);
  return {
    round: summary.round,
    strategy: summary.strategy,
    oldOffset: summary.old_offset,
    newOffset: summary.new_offset,
    offsetMoved: summary.new_offset !== summary.old_offset,
    histogramsMoved,
    missingClass: summary.missing_class,
    f1Before: summary.f1_before,
    f1After: summary.f1_after,
    precisionBefore: summary.precision_before,
    precisionAfter: summary.precision_after,
    recallBefore: summary.recall_before,
    recallAfter: summary.recall_after,
    histogramBefore: summary.histogram_before,
    histogramAfter: summary.histogram_after,
  };
}

/**
 * Labels already accepted by the server in the current round. The batch
 * budget counts both open queries and labels submitted since the last
 * update, so the difference is what has been banked so far.
 */
export function submittedThisRound(batch: QueryBatch): number {
  return batch.budget - batch.batch.length;
}

/** Format a metric for display; the service sends null when truth is unknown. */
export function fmt(x: number | null | undefined, digits = 4): string {
  if (x === null || x === undefined || Number.isNaN(x)) {
    return 'n/a';
  }
  return x.toFixed(digits);
}

/** Unix seconds to a compact UTC stamp. */
export function fmtTime(unixSeconds: number): string {
  return new Date(unixSeconds * 1000).toISOString().replace('T', ' ').slice(0, 19);
}
