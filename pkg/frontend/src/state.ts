// Pure view state for one review session. The only client-side state beyond
// the server's views is the set of unsent choices for the current batch.

import type { BatchItem, Choice, SessionView } from './api.js';

export interface ReviewState {
  session: SessionView | null;
  batch: BatchItem[];
  choices: Map<number, Choice>;
  cursor: number; // keyboard focus inside the batch
  banner: string | null;
  busy: boolean;
}

export function initialState(): ReviewState {
  return {
    session: null,
    batch: [],
    choices: new Map(),
    cursor: 0,
    banner: null,
    busy: false,
  };
}

export function withSession(state: ReviewState, session: SessionView): ReviewState {
  return { ...state, session };
}

/** Replace the batch, keeping choices for items that are still present. */
export function withBatch(state: ReviewState, items: BatchItem[]): ReviewState {
  const keep = new Map<number, Choice>();
  for (const item of items) {
    const prior = state.choices.get(item.id);
    if (prior) keep.set(item.id, prior);
  }
  const cursor = Math.min(state.cursor, Math.max(items.length - 1, 0));
  return { ...state, batch: items, choices: keep, cursor };
}

export function choose(state: ReviewState, id: number, choice: Choice): ReviewState {
  if (!state.batch.some((item) => item.id === id)) return state;
  const choices = new Map(state.choices);
  choices.set(id, choice);
  return { ...state, choices };
}

export function allChoiced(state: ReviewState): boolean {
  return state.batch.length > 0 && state.batch.every((item) => state.choices.has(item.id));
}

export function answers(state: ReviewState): Record<number, Choice> {
  const out: Record<number, Choice> = {};
  for (const item of state.batch) {
    const choice = state.choices.get(item.id);
    if (choice) out[item.id] = choice;
  }
  return out;
}

export function moveCursor(state: ReviewState, delta: number): ReviewState {
  if (state.batch.length === 0) return state;
  const cursor = Math.min(Math.max(state.cursor + delta, 0), state.batch.length - 1);
  return { ...state, cursor };
}

/** Choose for the cursor item and advance, the y/n fast path. */
export function chooseAtCursor(state: ReviewState, choice: Choice): ReviewState {
  const item = state.batch[state.cursor];
  if (!item) return state;
  return moveCursor(choose(state, item.id, choice), 1);
}

export function progressText(session: SessionView): string {
  const found = session.counters.found_hard;
  if (!session.estimate.defined || session.estimate.estimated_total === null) {
    return `${found} found / estimate pending`;
  }
  return `${found} found / ~${session.estimate.estimated_total.toFixed(1)} estimated`;
}

export function recallPercent(session: SessionView): number | null {
  if (session.estimated_recall === null) return null;
  return Math.max(0, Math.min(100, session.estimated_recall * 100));
}

/** Points for an inline estimate-history sparkline in a w-by-h box. */
export function sparklinePoints(
  history: Array<[number, number]>,
  width: number,
  height: number,
): string {
  if (history.length === 0) return '';
  const xs = history.map(([labeled]) => labeled);
  const ys = history.map(([, total]) => total);
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const yMax = Math.max(...ys, 1);
  const xSpan = Math.max(xMax - xMin, 1);
  return history
    .map(([x, y]) => {
      const px = history.length === 1 ? width / 2 : ((x - xMin) / xSpan) * width;
      const py = height - (y / yMax) * height;
      return `${px.toFixed(1)},${py.toFixed(1)}`;
    })
    .join(' ');
}
