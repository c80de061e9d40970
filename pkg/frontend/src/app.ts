/**
 * DOM wiring for the single-page labeling app.
 *
 * One session per tab. The app holds a small client-side state (open
 * session, current query queue, chart window) and re-reads everything
 * else from the service on demand and on window focus. Rendering is
 * plain DOM and SVG; the geometry comes from chart.ts and the workflow
 * rules from state.ts.
 */

import {
  ApiError,
  Client,
  type DatasetSpec,
  type MetricsReport,
  type QueryBatch,
  type SeriesSlice,
  type SessionConfig,
  type SessionInfo,
} from './api.js';
import {
  ReviewQueue,
  fmt,
  fmtTime,
  keyAction,
  roundView,
  submittedThisRound,
  type RoundView,
} from './state.js';
import {
  PAD,
  histogramBars,
  histogramOffsetX,
  seriesGeometry,
  sparkline,
  type SeriesGeometry,
} from './chart.js';

const SVG_NS = 'http://www.w3.org/2000/svg';
const WINDOW_POINTS = 1500;
const CARD_W = 216;
const CARD_H = 72;

interface AppState {
  session: SessionInfo | null;
  batch: QueryBatch | null;
  queue: ReviewQueue;
  slice: SeriesSlice | null;
  geometry: SeriesGeometry | null;
  windowStart: number;
  wholeSeries: boolean;
  submitting: boolean;
}

const client = new Client('');
const state: AppState = {
  session: null,
  batch: null,
  queue: new ReviewQueue([]),
  slice: null,
  geometry: null,
  windowStart: 0,
  wholeSeries: false,
  submitting: false,
};

function el<T extends HTMLElement = HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function svgRoot(id: string): SVGSVGElement {
  const node = document.getElementById(id);
  if (!(node instanceof SVGSVGElement)) {
    throw new Error(`missing svg #${id}`);
  }
  return node;
}

function svgNode(tag: string, attrs: Record<string, string | number>): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, String(value));
  }
  return node;
}

function clearNode(node: Element): void {
  while (node.firstChild) {
    node.removeChild(node.firstChild);
  }
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) {
    return `${err.code}: ${err.message}`;
  }
  return err instanceof Error ? err.message : String(err);
}

function showError(message: string): void {
  const banner = el('error-banner');
  banner.textContent = message;
  banner.classList.remove('hidden');
}

function clearError(): void {
  el('error-banner').classList.add('hidden');
}

async function guard<T>(work: () => Promise<T>): Promise<T | null> {
  try {
    clearError();
    return await work();
  } catch (err) {
    showError(describeError(err));
    return null;
  }
}

// ---------------------------------------------------------------- sessions

async function refreshSessionList(selected?: string): Promise<void> {
  const listing = await guard(() => client.listSessions());
  if (!listing) {
    return;
  }
  const select = el<HTMLSelectElement>('session-select');
  clearNode(select);
  const blank = document.createElement('option');
  blank.value = '';
  blank.textContent = 'select session...';
  select.appendChild(blank);
  for (const info of listing.sessions) {
    const option = document.createElement('option');
    option.value = info.id;
    option.textContent = `${info.id} (round ${info.round}, n=${info.n})`;
    select.appendChild(option);
  }
  if (selected) {
    select.value = selected;
  }
}

async function openSession(id: string): Promise<void> {
  const session = await guard(() => client.getSession(id));
  if (!session) {
    return;
  }
  state.session = session;
  state.wholeSeries = false;
  state.windowStart = 0;
  window.location.hash = `#/s/${id}`;
  el<HTMLSelectElement>('session-select').value = id;
  el('backend-badge').textContent = `${session.backend} backend`;
  el('create-panel').classList.add('hidden');
  el('workspace').classList.remove('hidden');
  el('empty-hint').classList.add('hidden');
  el('round-result').classList.add('hidden');
  await reloadQueries();
  await reloadSeries();
  await reloadMetrics();
}

/** Re-read queries, series, and metrics; staged labels survive the refresh. */
async function reconcile(): Promise<void> {
  if (!state.session) {
    return;
  }
  await reloadQueries();
  await reloadSeries();
  await reloadMetrics();
}

// ------------------------------------------------------------------ series

function windowBounds(): { from: number; to: number } {
  const n = state.session ? state.session.n : 0;
  if (state.wholeSeries || n <= WINDOW_POINTS) {
    return { from: 0, to: n };
  }
  const from = Math.max(0, Math.min(state.windowStart, n - WINDOW_POINTS));
  return { from, to: from + WINDOW_POINTS };
}

async function reloadSeries(): Promise<void> {
  if (!state.session) {
    return;
  }
  const id = state.session.id;
  const { from, to } = windowBounds();
  if (to <= from) {
    return;
  }
  const slice = await guard(() => client.getSeries(id, from, to));
  if (!slice) {
    return;
  }
  state.slice = slice;
  renderChart();
}

function renderChart(): void {
  const slice = state.slice;
  if (!slice) {
    return;
  }
  const svg = svgRoot('series-chart');
  const width = Number(svg.getAttribute('width'));
  const height = Number(svg.getAttribute('height'));
  const geo = seriesGeometry(slice, width, height);
  state.geometry = geo;
  clearNode(svg);

  const plotTop = PAD.top;
  const plotBottom = height - PAD.bottom;
  for (const band of geo.syntheticBands) {
    svg.appendChild(svgNode('rect', {
      x: band.x, y: plotTop, width: band.width, height: plotBottom - plotTop,
      fill: 'rgba(224, 164, 88, 0.14)',
    }));
  }

  for (const tick of geo.valueTicks) {
    svg.appendChild(svgNode('line', {
      x1: PAD.left, x2: width - PAD.right, y1: tick.at, y2: tick.at,
      stroke: '#2a3342', 'stroke-width': 1,
    }));
    const label = svgNode('text', {
      x: PAD.left - 6, y: tick.at + 4, 'text-anchor': 'end',
      fill: '#8a94a6', 'font-size': 10,
    });
    label.textContent = tick.label;
    svg.appendChild(label);
  }
  for (const tick of geo.scoreTicks) {
    const label = svgNode('text', {
      x: width - PAD.right + 6, y: tick.at + 4, fill: '#e0a458', 'font-size': 10,
    });
    label.textContent = tick.label;
    svg.appendChild(label);
  }
  for (const tick of geo.indexTicks) {
    const label = svgNode('text', {
      x: tick.at, y: height - 8, 'text-anchor': 'middle',
      fill: '#8a94a6', 'font-size': 10,
    });
    label.textContent = tick.label;
    svg.appendChild(label);
  }

  svg.appendChild(svgNode('path', {
    d: geo.scorePath, fill: 'none', stroke: '#e0a458', 'stroke-width': 1, opacity: 0.8,
  }));
  svg.appendChild(svgNode('path', {
    d: geo.valuePath, fill: 'none', stroke: '#6ab0f3', 'stroke-width': 1.2,
  }));
  svg.appendChild(svgNode('line', {
    x1: PAD.left, x2: width - PAD.right, y1: geo.offsetY, y2: geo.offsetY,
    stroke: '#e15b64', 'stroke-width': 1.2, 'stroke-dasharray': '6 3',
  }));

  for (const marker of geo.labeled) {
    svg.appendChild(svgNode('circle', {
      cx: marker.x, cy: marker.y, r: 3,
      fill: marker.label === 1 ? '#e15b64' : '#57b894',
    }));
  }
  for (const marker of geo.queried) {
    const dot = svgNode('circle', {
      cx: marker.x, cy: marker.y, r: 4,
      fill: 'none', stroke: '#f3d250', 'stroke-width': 1.6,
    });
    dot.addEventListener('click', () => {
      state.queue.seek(marker.index);
      renderQueue();
    });
    svg.appendChild(dot);
  }

  el('series-meta').textContent =
    `points ${slice.from}..${slice.to} of ${slice.n}, round ${slice.round}, ` +
    `offset ${fmt(slice.delta)}`;
}

// ------------------------------------------------------------ review queue

async function reloadQueries(): Promise<void> {
  if (!state.session) {
    return;
  }
  const id = state.session.id;
  const batch = await guard(() => client.getQueries(id));
  if (!batch) {
    return;
  }
  const staged = state.queue.toRequest();
  state.batch = batch;
  state.queue = new ReviewQueue(batch.batch);
  for (const entry of staged) {
    state.queue.setLabel(entry.index, entry.label);
  }
  if (batch.batch.length > 0 && !state.wholeSeries) {
    state.windowStart = Math.max(0, batch.batch[0].index - Math.floor(WINDOW_POINTS / 2));
  }
  renderQueue();
}

function renderQueue(): void {
  const batch = state.batch;
  const queue = state.queue;
  const container = el('cards');
  clearNode(container);

  if (!batch) {
    return;
  }
  el('batch-meta').textContent =
    `${batch.strategy} strategy, budget ${batch.budget}, ` +
    `${queue.size} open, ${submittedThisRound(batch)} submitted this round`;

  if (queue.size === 0) {
    const empty = document.createElement('div');
    empty.className = 'empty-state';
    empty.textContent = batch.budget === 0
      ? 'The label budget for this pool is zero; nothing to review.'
      : 'No open queries. Apply the model update to start the next round.';
    container.appendChild(empty);
  }

  queue.cards.forEach((card) => {
    const staged = queue.stagedLabel(card.index);
    const div = document.createElement('div');
    div.className = 'card';
    if (queue.current && queue.current.index === card.index) {
      div.classList.add('focused');
    }
    if (staged !== undefined) {
      div.classList.add(`labeled-${staged}`);
    }

    const head = document.createElement('div');
    head.className = 'card-head';
    const when = document.createElement('span');
    when.textContent = `#${card.index} ${fmtTime(card.timestamp)}`;
    const scoreSpan = document.createElement('span');
    scoreSpan.className = 'card-score';
    scoreSpan.textContent = `score ${fmt(card.score)}`;
    head.append(when, scoreSpan);
    div.appendChild(head);

    const svg = svgNode('svg', { width: CARD_W, height: CARD_H }) as SVGSVGElement;
    const geo = sparkline(card, batch.delta, CARD_W, CARD_H);
    svg.appendChild(svgNode('path', {
      d: geo.scorePath, fill: 'none', stroke: '#e0a458', 'stroke-width': 1, opacity: 0.7,
    }));
    svg.appendChild(svgNode('path', {
      d: geo.valuePath, fill: 'none', stroke: '#6ab0f3', 'stroke-width': 1,
    }));
    svg.appendChild(svgNode('line', {
      x1: 0, x2: CARD_W, y1: geo.offsetY, y2: geo.offsetY,
      stroke: '#e15b64', 'stroke-width': 1, 'stroke-dasharray': '4 3',
    }));
    svg.appendChild(svgNode('circle', {
      cx: geo.pointX, cy: geo.pointY, r: 3, fill: '#f3d250',
    }));
    svg.appendChild(svgNode('circle', {
      cx: geo.pointX, cy: geo.pointScoreY, r: 2, fill: '#e0a458',
    }));
    div.appendChild(svg);

    const actions = document.createElement('div');
    actions.className = 'card-actions';
    const anomalous = document.createElement('button');
    anomalous.type = 'button';
    anomalous.textContent = 'anomalous';
    if (staged === 1) {
      anomalous.classList.add('active-1');
    }
    anomalous.addEventListener('click', () => {
      queue.seek(card.index);
      queue.setLabel(card.index, 1);
      renderQueue();
    });
    const normal = document.createElement('button');
    normal.type = 'button';
    normal.textContent = 'normal';
    if (staged === 0) {
      normal.classList.add('active-0');
    }
    normal.addEventListener('click', () => {
      queue.seek(card.index);
      queue.setLabel(card.index, 0);
      renderQueue();
    });
    actions.append(anomalous, normal);
    div.appendChild(actions);

    div.addEventListener('click', (ev) => {
      if (!(ev.target instanceof HTMLButtonElement)) {
        queue.seek(card.index);
        renderQueue();
      }
    });
    container.appendChild(div);
  });

  const stagedCount = queue.toRequest().length;
  const submit = el<HTMLButtonElement>('submit-labels-btn');
  submit.disabled = stagedCount === 0 || state.submitting;
  submit.textContent = stagedCount > 0 ? `Submit labels (${stagedCount})` : 'Submit labels';
  renderRoundControls();
}

async function submitStagedLabels(): Promise<void> {
  if (!state.session || state.submitting) {
    return;
  }
  const entries = state.queue.toRequest();
  if (entries.length === 0) {
    return;
  }
  state.submitting = true;
  renderQueue();
  try {
    clearError();
    const ack = await client.submitLabels(state.session.id, entries);
    state.queue.drop(entries.map((e) => e.index));
    if (state.batch) {
      // budget counts open queries plus banked labels, so it is unchanged;
      // the open list shrinks by what the server accepted
      const open = new Set(state.queue.cards.map((c) => c.index));
      state.batch = {
        ...state.batch,
        batch: state.batch.batch.filter((c) => open.has(c.index)),
      };
    }
    if (ack.queried_remaining !== state.queue.size) {
      await reloadQueries();
    }
  } catch (err) {
    showError(describeError(err));
    await reloadQueries();
  } finally {
    state.submitting = false;
  }
  renderQueue();
  await reloadSeries();
  await reloadMetrics();
}

// ------------------------------------------------------------------ rounds

function renderRoundControls(): void {
  const batch = state.batch;
  const button = el<HTMLButtonElement>('apply-round-btn');
  const reason = el('round-reason');
  if (!batch) {
    button.disabled = true;
    reason.textContent = '';
    return;
  }
  const banked = submittedThisRound(batch);
  button.disabled = banked === 0;
  if (banked === 0) {
    reason.textContent = 'Submit at least one label before applying the update.';
  } else {
    reason.textContent = `${banked} labels banked for round ${batch.round}.`;
  }
  el('round-meta').textContent = state.session
    ? `update ${state.session.config.update}`
    : '';
}

function renderHistogram(svgId: string, view: RoundView, which: 'before' | 'after'): void {
  const svg = svgRoot(svgId);
  const width = Number(svg.getAttribute('width'));
  const height = Number(svg.getAttribute('height'));
  clearNode(svg);
  const hist = which === 'before' ? view.histogramBefore : view.histogramAfter;
  const delta = which === 'before' ? view.oldOffset : view.newOffset;
  for (const bar of histogramBars(hist, width, height - 14)) {
    svg.appendChild(svgNode('rect', {
      x: bar.x, y: bar.y, width: bar.w, height: bar.h, fill: '#6ab0f3', opacity: 0.85,
    }));
  }
  const x = histogramOffsetX(hist, delta, width);
  svg.appendChild(svgNode('line', {
    x1: x, x2: x, y1: 0, y2: height - 14,
    stroke: '#e15b64', 'stroke-width': 1.4, 'stroke-dasharray': '5 3',
  }));
  const label = svgNode('text', {
    x: Math.min(width - 4, x + 4), y: height - 2, fill: '#e15b64', 'font-size': 10,
    'text-anchor': x > width - 60 ? 'end' : 'start',
  });
  label.textContent = `δ = ${fmt(delta)}`;
  svg.appendChild(label);
}

function renderRoundResult(view: RoundView): void {
  el('round-result').classList.remove('hidden');
  const stats = el('round-stats');
  clearNode(stats);
  const entries: Array<[string, string]> = [
    ['offset', `${fmt(view.oldOffset)} → ${fmt(view.newOffset)}`
      + (view.offsetMoved ? '' : ' (unchanged)')],
    ['scores', view.histogramsMoved ? 'distribution moved' : 'distribution unchanged'],
    ['F1', `${fmt(view.f1Before)} → ${fmt(view.f1After)}`],
    ['precision', `${fmt(view.precisionBefore)} → ${fmt(view.precisionAfter)}`],
    ['recall', `${fmt(view.recallBefore)} → ${fmt(view.recallAfter)}`],
  ];
  if (view.missingClass) {
    entries.push(['note', 'one label class was missing, offset kept']);
  }
  for (const [name, value] of entries) {
    const stat = document.createElement('div');
    stat.className = 'stat';
    const b = document.createElement('b');
    b.textContent = value;
    const span = document.createElement('span');
    span.textContent = name;
    stat.append(b, span);
    stats.appendChild(stat);
  }
  renderHistogram('hist-before', view, 'before');
  renderHistogram('hist-after', view, 'after');
}

async function applyRound(): Promise<void> {
  if (!state.session) {
    return;
  }
  const id = state.session.id;
  const summary = await guard(() => client.applyRound(id));
  if (!summary) {
    return;
  }
  renderRoundResult(roundView(summary));
  await reconcile();
}

// ----------------------------------------------------------------- metrics

function renderMetrics(report: MetricsReport): void {
  const body = el('metrics-body');
  clearNode(body);
  const line = document.createElement('p');
  line.className = 'meta';
  line.textContent =
    `round ${report.round}, ${report.labeled_total} labeled ` +
    `(${report.labeled_anomalous} anomalous, ${report.labeled_normal} normal)` +
    (report.has_ground_truth ? '' : ', no ground truth for this dataset');
  body.appendChild(line);

  const table = document.createElement('table');
  const head = document.createElement('tr');
  for (const name of ['round', 'offset', 'F1', 'precision', 'recall']) {
    const th = document.createElement('th');
    th.textContent = name;
    head.appendChild(th);
  }
  table.appendChild(head);
  for (const entry of report.history) {
    const tr = document.createElement('tr');
    for (const value of [
      String(entry.round), fmt(entry.offset), fmt(entry.f1),
      fmt(entry.precision), fmt(entry.recall),
    ]) {
      const td = document.createElement('td');
      td.textContent = value;
      tr.appendChild(td);
    }
    table.appendChild(tr);
  }
  body.appendChild(table);
}

async function reloadMetrics(): Promise<void> {
  if (!state.session) {
    return;
  }
  const id = state.session.id;
  const report = await guard(() => client.getMetrics(id));
  if (report) {
    renderMetrics(report);
  }
  const session = await guard(() => client.getSession(id));
  if (session) {
    state.session = session;
  }
}

// ----------------------------------------------------------- create session

function datasetFromForm(): DatasetSpec {
  const kind = el<HTMLSelectElement>('ds-kind').value;
  if (kind === 'csv') {
    return { kind, path: el<HTMLInputElement>('ds-path').value.trim() };
  }
  return {
    kind: 'synth',
    n: Number(el<HTMLInputElement>('ds-n').value),
    anomaly_rate: Number(el<HTMLInputElement>('ds-rate').value),
    seed: Number(el<HTMLInputElement>('ds-seed').value),
  };
}

function configFromForm(): SessionConfig {
  return {
    strategy: el<HTMLSelectElement>('cfg-strategy').value,
    update: el<HTMLSelectElement>('cfg-update').value,
    budget_fraction: Number(el<HTMLInputElement>('cfg-budget').value),
    trees: Number(el<HTMLInputElement>('cfg-trees').value),
    contamination: Number(el<HTMLInputElement>('cfg-contamination').value),
    seed: Number(el<HTMLInputElement>('cfg-seed').value),
  };
}

async function createSession(): Promise<void> {
  const info = await guard(() => client.createSession(datasetFromForm(), configFromForm()));
  if (!info) {
    return;
  }
  await refreshSessionList(info.id);
  await openSession(info.id);
}

// -------------------------------------------------------------------- boot

function handleKeydown(ev: KeyboardEvent): void {
  if (!state.session) {
    return;
  }
  const target = ev.target;
  if (target instanceof HTMLElement
      && ['INPUT', 'SELECT', 'TEXTAREA', 'BUTTON'].includes(target.tagName)) {
    return;
  }
  const action = keyAction(ev.key);
  if (!action) {
    return;
  }
  ev.preventDefault();
  switch (action.kind) {
    case 'label':
      state.queue.labelCurrent(action.label);
      renderQueue();
      break;
    case 'next':
    case 'skip':
      state.queue.next();
      renderQueue();
      break;
    case 'prev':
      state.queue.prev();
      renderQueue();
      break;
    case 'submit':
      void submitStagedLabels();
      break;
  }
}

function openFromHash(): void {
  const match = window.location.hash.match(/^#\/s\/([0-9a-f]+)$/);
  if (match) {
    void openSession(match[1]);
  }
}

export function boot(): void {
  el<HTMLSelectElement>('session-select').addEventListener('change', (ev) => {
    const id = (ev.target as HTMLSelectElement).value;
    if (id) {
      void openSession(id);
    }
  });
  el('new-session-btn').addEventListener('click', () => {
    el('create-panel').classList.toggle('hidden');
  });
  el<HTMLSelectElement>('ds-kind').addEventListener('change', (ev) => {
    const csv = (ev.target as HTMLSelectElement).value === 'csv';
    el('ds-synth-fields').classList.toggle('hidden', csv);
    el('ds-csv-fields').classList.toggle('hidden', !csv);
  });
  el<HTMLFormElement>('create-form').addEventListener('submit', (ev) => {
    ev.preventDefault();
    void createSession();
  });
  el('create-cancel').addEventListener('click', () => {
    el('create-panel').classList.add('hidden');
  });
  el('submit-labels-btn').addEventListener('click', () => {
    void submitStagedLabels();
  });
  el('apply-round-btn').addEventListener('click', () => {
    void applyRound();
  });
  el('win-prev').addEventListener('click', () => {
    state.wholeSeries = false;
    state.windowStart = Math.max(0, state.windowStart - Math.floor(WINDOW_POINTS * 0.8));
    void reloadSeries();
  });
  el('win-next').addEventListener('click', () => {
    state.wholeSeries = false;
    state.windowStart += Math.floor(WINDOW_POINTS * 0.8);
    void reloadSeries();
  });
  el('win-all').addEventListener('click', () => {
    state.wholeSeries = !state.wholeSeries;
    void reloadSeries();
  });
  document.addEventListener('keydown', handleKeydown);
  window.addEventListener('focus', () => {
    void reconcile();
  });
  window.addEventListener('hashchange', openFromHash);

  void refreshSessionList();
  openFromHash();
}
