// DOM rendering and event wiring. State transitions happen only on server
// acknowledgment: every action posts, then re-renders from the response.

import { ApiError, ReviewApi } from './api.js';
import type { Choice } from './api.js';
import {
  allChoiced,
  answers,
  choose,
  chooseAtCursor,
  initialState,
  moveCursor,
  progressText,
  recallPercent,
  sparklinePoints,
  withBatch,
  withSession,
  type ReviewState,
} from './state.js';

const SVG_NS = 'http://www.w3.org/2000/svg';

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class ReviewController {
  state: ReviewState = initialState();
  private pendingRetry: (() => void) | null = null;

  constructor(
    readonly root: HTMLElement,
    readonly api: ReviewApi,
  ) {}

  // -- actions --------------------------------------------------------------

  async openSession(sessionId: string): Promise<void> {
    await this.guard(async () => {
      const session = await this.api.getSession(sessionId);
      this.state = withSession(this.state, session);
      await this.refreshBatch();
    });
  }

  async createSession(csv: string, learner: string, targetRecall: number): Promise<void> {
    await this.guard(async () => {
      const upload = await this.api.uploadCorpus(csv);
      const session = await this.api.createSession({
        corpus_id: upload.corpus_id,
        learner: learner || undefined,
        target_recall: targetRecall,
      });
      this.state = withSession(this.state, session);
      window.location.hash = `#/sessions/${session.session_id}`;
      await this.refreshBatch();
    });
  }

  async refreshBatch(): Promise<void> {
    const session = this.state.session;
    if (!session || session.status !== 'active') {
      this.state = withBatch(this.state, []);
      this.render();
      return;
    }
    const batch = await this.api.getBatch(session.session_id, session.config.batch_size);
    this.state = withBatch(this.state, batch.items);
    this.render();
  }

  setChoice(id: number, choice: Choice): void {
    this.state = choose(this.state, id, choice);
    this.render();
  }

  onKey(event: KeyboardEvent): void {
    if (!this.state.session || this.state.session.status !== 'active') return;
    if (event.key === 'y' || event.key === 'Y') this.state = chooseAtCursor(this.state, 'SATD');
    else if (event.key === 'n' || event.key === 'N') this.state = chooseAtCursor(this.state, 'NonSATD');
    else if (event.key === 'ArrowDown' || event.key === 'j') this.state = moveCursor(this.state, 1);
    else if (event.key === 'ArrowUp' || event.key === 'k') this.state = moveCursor(this.state, -1);
    else return;
    event.preventDefault();
    this.render();
  }

  async submit(): Promise<void> {
    if (!this.state.session || !allChoiced(this.state)) return;
    const sessionId = this.state.session.session_id;
    await this.guard(
      async () => {
        const session = await this.api.postLabels(sessionId, answers(this.state));
        this.state = withSession(this.state, session);
        this.state = withBatch(this.state, []);
        await this.refreshBatch();
      },
      async (error) => {
        if (error instanceof ApiError && error.status === 409) {
          // double submit or stale batch: re-sync, unsent choices survive
          const session = await this.api.getSession(sessionId);
          this.state = withSession(this.state, session);
          await this.refreshBatch();
          return 'submission conflicted with the server; batch reloaded';
        }
        return null;
      },
    );
  }

  async stopAndExport(): Promise<void> {
    if (!this.state.session) return;
    const sessionId = this.state.session.session_id;
    await this.guard(async () => {
      const session = await this.api.stopSession(sessionId);
      this.state = withSession(this.state, session);
      this.state = withBatch(this.state, []);
      window.open(this.api.exportUrl(sessionId), '_blank');
      this.render();
    });
  }

  /** Run an action; on failure show a non-blocking banner with a retry hook. */
  private async guard(
    action: () => Promise<void>,
    recover?: (error: unknown) => Promise<string | null>,
  ): Promise<void> {
    this.state = { ...this.state, busy: true, banner: null };
    this.render();
    try {
      await action();
      this.state = { ...this.state, busy: false, banner: null };
      this.pendingRetry = null;
    } catch (error) {
      let banner: string | null = null;
      if (recover) banner = await recover(error);
      if (banner === null) {
        banner = error instanceof Error ? error.message : String(error);
        this.pendingRetry = () => void this.guard(action, recover);
      } else {
        this.pendingRetry = null;
      }
      this.state = { ...this.state, busy: false, banner };
    }
    this.render();
  }

  retry(): void {
    const retry = this.pendingRetry;
    this.pendingRetry = null;
    if (retry) retry();
  }

  // -- rendering ------------------------------------------------------------

  render(): void {
    this.root.replaceChildren();
    if (this.state.banner) this.root.appendChild(this.renderBanner());
    if (!this.state.session) {
      this.root.appendChild(this.renderCreateForm());
      return;
    }
    this.root.appendChild(this.renderSummary());
    this.root.appendChild(this.renderBatch());
  }

  private renderBanner(): HTMLElement {
    const banner = el('div', 'banner', this.state.banner ?? '');
    if (this.pendingRetry) {
      const retry = el('button', 'retry', 'retry');
      retry.addEventListener('click', () => this.retry());
      banner.appendChild(retry);
    }
    return banner;
  }

  private renderCreateForm(): HTMLElement {
    const form = el('section', 'create-form');
    form.appendChild(el('h1', undefined, 'Start a review session'));
    form.appendChild(
      el('p', 'hint', 'Upload an unlabeled comment CSV (projectname,commenttext).'),
    );
    const file = el('input') as HTMLInputElement;
    file.type = 'file';
    file.id = 'corpus-file';
    const learner = el('input') as HTMLInputElement;
    learner.id = 'learner';
    learner.placeholder = 'learner (server default)';
    const recall = el('input') as HTMLInputElement;
    recall.id = 'target-recall';
    recall.value = '0.9';
    const start = el('button', 'primary', 'create session');
    start.id = 'create-session';
    start.addEventListener('click', () => {
      const picked = file.files && file.files[0];
      if (!picked) return;
      void picked.text().then((text) =>
        this.createSession(text, learner.value.trim(), Number(recall.value) || 0.9),
      );
    });
    for (const node of [file, learner, recall, start]) form.appendChild(node);
    return form;
  }

  private renderSummary(): HTMLElement {
    const session = this.state.session!;
    const panel = el('section', 'summary');
    panel.appendChild(el('h1', undefined, `Project ${session.project || session.corpus_id}`));

    const counters = el('div', 'counters');
    const fields: Array<[string, number]> = [
      ['auto-classified', session.counters.easy_found],
      ['labeled', session.counters.labeled],
      ['confirmed', session.counters.found_hard],
      ['remaining', session.counters.remaining],
    ];
    for (const [name, value] of fields) {
      const box = el('div', 'counter');
      box.appendChild(el('div', 'value', String(value)));
      box.appendChild(el('div', 'label', name));
      counters.appendChild(box);
    }
    panel.appendChild(counters);

    const progress = el('div', 'progress');
    progress.id = 'progress-text';
    progress.textContent = progressText(session);
    panel.appendChild(progress);

    const percent = recallPercent(session);
    const bar = el('div', 'recall-bar');
    const fill = el('div', 'recall-fill');
    fill.id = 'recall-fill';
    fill.style.width = `${percent ?? 0}%`;
    bar.appendChild(fill);
    bar.appendChild(
      el('span', 'recall-label',
        percent === null ? 'estimated recall pending' : `estimated recall ${percent.toFixed(0)}%`),
    );
    panel.appendChild(bar);

    if (session.estimate_history.length > 0) {
      const svg = document.createElementNS(SVG_NS, 'svg');
      svg.setAttribute('class', 'sparkline');
      svg.setAttribute('viewBox', '0 0 120 28');
      const line = document.createElementNS(SVG_NS, 'polyline');
      line.setAttribute('points', sparklinePoints(session.estimate_history, 120, 28));
      line.setAttribute('fill', 'none');
      svg.appendChild(line);
      panel.appendChild(svg);
    }

    if (session.suggest_stop && session.status === 'active') {
      const note = el('div', 'stop-suggestion');
      note.id = 'stop-suggestion';
      note.textContent =
        'The estimated recall has reached your target. You may stop now or keep reviewing.';
      panel.appendChild(note);
    }
    if (session.status !== 'active') {
      const done = el('div', 'stopped-banner');
      done.id = 'stopped-banner';
      done.textContent =
        session.status === 'stopped' ? 'Session stopped.' : 'Every comment has been reviewed.';
      const link = el('a', 'export-link', 'download results');
      link.setAttribute('href', this.api.exportUrl(session.session_id));
      done.appendChild(link);
      panel.appendChild(done);
    }

    const actions = el('div', 'actions');
    const stop = el('button', 'danger', 'stop & export');
    stop.id = 'stop-session';
    stop.disabled = session.status !== 'active' || this.state.busy;
    stop.addEventListener('click', () => void this.stopAndExport());
    actions.appendChild(stop);
    panel.appendChild(actions);
    return panel;
  }

  private renderBatch(): HTMLElement {
    const section = el('section', 'batch');
    const items = this.state.batch;
    if (items.length === 0) {
      section.appendChild(el('p', 'empty', 'No comments to review.'));
      return section;
    }
    section.appendChild(el('h2', undefined, `Review these ${items.length} comments`));
    section.appendChild(
      el('p', 'hint', 'y = debt, n = not debt, arrows move; submit unlocks when all are chosen.'),
    );
    const list = el('ul', 'batch-list');
    items.forEach((item, index) => {
      const row = el('li', 'batch-item');
      row.dataset.id = String(item.id);
      if (index === this.state.cursor) row.classList.add('cursor');
      const text = el('div', 'comment-text', item.text);
      const buttons = el('div', 'choices');
      for (const choice of ['SATD', 'NonSATD'] as Choice[]) {
        const button = el('button', 'choice', choice === 'SATD' ? 'debt' : 'not debt');
        button.dataset.choice = choice;
        if (this.state.choices.get(item.id) === choice) button.classList.add('chosen');
        button.addEventListener('click', () => this.setChoice(item.id, choice));
        buttons.appendChild(button);
      }
      row.appendChild(text);
      row.appendChild(buttons);
      list.appendChild(row);
    });
    section.appendChild(list);

    const submit = el('button', 'primary', 'submit labels');
    submit.id = 'submit-labels';
    submit.disabled = !allChoiced(this.state) || this.state.busy;
    submit.addEventListener('click', () => void this.submit());
    section.appendChild(submit);
    return section;
  }
}

export function mount(root: HTMLElement, api: ReviewApi): ReviewController {
  const controller = new ReviewController(root, api);
  document.addEventListener('keydown', (event) => controller.onKey(event));
  controller.render();
  return controller;
}
