// Typed client for the review-service JSON API. The UI never keeps state the
// server does not have, so every method returns the server's own view.

export type Choice = 'SATD' | 'NonSATD';

export interface Counters {
  easy_found: number;
  overridden: number;
  labeled: number;
  found_hard: number;
  remaining: number;
}

export interface EstimateInfo {
  defined: boolean;
  estimated_total: number | null;
  converged: boolean | null;
  iterations: number | null;
}

export interface SessionConfig {
  learner: string;
  target_recall: number;
  seed: number;
  batch_size: number;
}

export interface SessionView {
  session_id: string;
  corpus_id: string;
  project: string;
  status: 'active' | 'stopped' | 'exhausted';
  counters: Counters;
  estimate: EstimateInfo;
  estimated_recall: number | null;
  suggest_stop: boolean;
  config: SessionConfig;
  estimate_history: Array<[number, number]>;
}

export interface BatchItem {
  id: number;
  text: string;
}

export interface BatchView {
  session_id: string;
  items: BatchItem[];
}

export interface CorpusCreated {
  corpus_id: string;
  comments: number;
  projects: string[];
}

export interface CreateSessionRequest {
  corpus_id: string;
  learner?: string;
  target_recall?: number;
  seed?: number;
  batch_size?: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = 'ApiError';
  }
}

async function fail(response: Response): Promise<never> {
  let detail = response.statusText;
  try {
    const body = (await response.json()) as { detail?: string };
    if (body && typeof body.detail === 'string') detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, detail);
}

export class ReviewApi {
  constructor(readonly base: string = '') {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.base + path, init);
    if (!response.ok) await fail(response);
    return (await response.json()) as T;
  }

  uploadCorpus(csv: string | Blob): Promise<CorpusCreated> {
    return this.json<CorpusCreated>('/corpora', {
      method: 'POST',
      headers: { 'content-type': 'text/csv' },
      body: csv,
    });
  }

  createSession(request: CreateSessionRequest): Promise<SessionView> {
    return this.json<SessionView>('/sessions', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(request),
    });
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.json<SessionView>(`/sessions/${sessionId}`);
  }

  getBatch(sessionId: string, n = 10): Promise<BatchView> {
    return this.json<BatchView>(`/sessions/${sessionId}/batch?n=${n}`);
  }

  postLabels(sessionId: string, answers: Record<number, Choice>): Promise<SessionView> {
    return this.json<SessionView>(`/sessions/${sessionId}/labels`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ answers }),
    });
  }

  postOverrides(sessionId: string, ids: number[]): Promise<SessionView> {
    return this.json<SessionView>(`/sessions/${sessionId}/overrides`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ ids }),
    });
  }

  stopSession(sessionId: string): Promise<SessionView> {
    return this.json<SessionView>(`/sessions/${sessionId}/stop`, { method: 'POST' });
  }

  async exportCsv(sessionId: string): Promise<string> {
    const response = await fetch(`${this.base}/sessions/${sessionId}/export`);
    if (!response.ok) await fail(response);
    return response.text();
  }

  exportUrl(sessionId: string): string {
    return `${this.base}/sessions/${sessionId}/export`;
  }
}
