/**
 * Typed client for the labeling service JSON API.
 *
 * Every number the UI displays originates from one of these payloads;
 * the client parses JSON and nothing else, so the browser can never
 * drift from what the model actually holds.
 */

export interface DatasetSpec {
  kind: string;
  [key: string]: unknown;
}

export interface SessionConfig {
  strategy?: string;
  update?: string;
  budget_fraction?: number;
  trees?: number;
  subsample?: number;
  contamination?: number;
  seed?: number;
  k?: number;
  context_seconds?: number;
}

export interface SessionCounts {
  unlabeled: number;
  queried: number;
  labeled: number;
}

export interface SessionInfo {
  id: string;
  dataset: DatasetSpec;
  config: Required<SessionConfig>;
  round: number;
  offset: number;
  n: number;
  backend: string;
  has_ground_truth: boolean;
  counts: SessionCounts;
}

export interface QueryContext {
  start: number;
  timestamps: number[];
  values: number[];
  scores: number[];
}

export interface QueryCard {
  index: number;
  timestamp: number;
  value: number;
  score: number;
  context: QueryContext;
}

export interface QueryBatch {
  round: number;
  strategy: string;
  delta: number;
  budget: number;
  batch: QueryCard[];
}

export type Label = 0 | 1;

export interface LabelEntry {
  index: number;
  label: Label;
}

export interface LabelAck {
  accepted: number;
  labeled_total: number;
  queried_remaining: number;
}

export interface Histogram {
  edges: number[];
  counts: number[];
}

export interface RoundSummary {
  round: number;
  strategy: string;
  old_offset: number;
  new_offset: number;
  missing_class: boolean;
  histogram_before: Histogram;
  histogram_after: Histogram;
  f1_before: number | null;
  f1_after: number | null;
  precision_before: number | null;
  precision_after: number | null;
  recall_before: number | null;
  recall_after: number | null;
}

export interface SeriesSlice {
  from: number;
  to: number;
  n: number;
  round: number;
  delta: number;
  timestamps: number[];
  values: number[];
  scores: number[];
  queried: number[];
  labels: LabelEntry[];
  synthetic: number[];
}

export interface HistoryEntry {
  round: number;
  offset: number;
  f1: number | null;
  precision: number | null;
  recall: number | null;
}

export interface MetricsReport {
  round: number;
  offset: number;
  has_ground_truth: boolean;
  labeled_total: number;
  labeled_anomalous: number;
  labeled_normal: number;
  f1: number | null;
  precision: number | null;
  recall: number | null;
  history: HistoryEntry[];
}

/** Raised for any non-2xx response, carrying the service error code. */
export class ApiError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(code: string, message: string, status: number) {
    super(message);
    this.name = 'ApiError';
    this.code = code;
    this.status = status;
  }
}

async function parseError(res: Response): Promise<ApiError> {
  let code = 'http_error';
  let message = `${res.status} ${res.statusText}`;
  try {
    const body = await res.json();
    if (body && typeof body === 'object' && body.error) {
      code = body.error.code ?? code;
      message = body.error.message ?? message;
    }
  } catch {
    // non-JSON body, keep the status line
  }
  return new ApiError(code, message, res.status);
}

export class Client {
  constructor(private readonly base: string = '') {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { 'Content-Type': 'application/json' };
      init.body = JSON.stringify(body);
    }
    const res = await fetch(this.base + path, init);
    if (!res.ok) {
      throw await parseError(res);
    }
    return (await res.json()) as T;
  }

  createSession(dataset: DatasetSpec, config?: SessionConfig): Promise<SessionInfo> {
    return this.request('POST', '/sessions', { dataset, config: config ?? {} });
  }

  listSessions(): Promise<{ sessions: SessionInfo[] }> {
    return this.request('GET', '/sessions');
  }

  getSession(id: string): Promise<SessionInfo> {
    return this.request('GET', `/sessions/${id}`);
  }

  getQueries(id: string): Promise<QueryBatch> {
    return this.request('GET', `/sessions/${id}/queries`);
  }

  submitLabels(id: string, labels: LabelEntry[]): Promise<LabelAck> {
    return this.request('POST', `/sessions/${id}/labels`, { labels });
  }

  applyRound(id: string): Promise<RoundSummary> {
    return this.request('POST', `/sessions/${id}/rounds`, {});
  }

  getSeries(id: string, from?: number, to?: number): Promise<SeriesSlice> {
    const params = new URLSearchParams();
    if (from !== undefined) params.set('from', String(from));
    if (to !== undefined) params.set('to', String(to));
    const qs = params.toString();
    return this.request('GET', `/sessions/${id}/series${qs ? '?' + qs : ''}`);
  }

  getMetrics(id: string): Promise<MetricsReport> {
    return this.request('GET', `/sessions/${id}/metrics`);
  }

  /** Raw model snapshot body, kept as bytes so callers can compare exactly. */
  async getSnapshotBytes(id: string): Promise<Uint8Array> {
    const res = await fetch(`${this.base}/sessions/${id}/snapshot`);
    if (!res.ok) {
      throw await parseError(res);
    }
    return new Uint8Array(await res.arrayBuffer());
  }
}
