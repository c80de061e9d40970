/**
 * End-to-end agreement between the two labeling paths.
 *
 * Spawns the Python service, creates two sessions with the same dataset,
 * config, and seed, labels one through the UI client and state modules
 * and the other through the CLI oracle, then checks that both paths
 * produce byte-identical model snapshots and that the round summary the
 * UI renders carries the service's offsets verbatim.
 */

import { execFileSync, spawn, type ChildProcess } from 'node:child_process';
import { mkdtempSync, rmSync } from 'node:fs';
import { createServer, type AddressInfo } from 'node:net';
import { tmpdir } from 'node:os';
import { dirname, join, resolve } from 'node:path';
import { fileURLToPath } from 'node:url';

import { afterAll, beforeAll, expect, test } from 'vitest';

import { ApiError, Client, type DatasetSpec, type SessionConfig } from '../src/api.js';
import { ReviewQueue, roundView } from '../src/state.js';

const PYTHON = process.env.KPILOOP_PYTHON ?? 'python3';
const REPO_ROOT = resolve(dirname(fileURLToPath(import.meta.url)), '..', '..');

const DATASET: DatasetSpec = { kind: 'synth', n: 600, seed: 11, anomaly_rate: 0.02 };
const CONFIG: SessionConfig = {
  strategy: 'TA',
  update: 'TW+O',
  budget_fraction: 0.05,
  trees: 25,
  contamination: 0.05,
  seed: 3,
};

let proc: ChildProcess;
let base = '';
let dataDir = '';
let serverLog = '';

function freePort(): Promise<number> {
  return new Promise((resolvePort, reject) => {
    const srv = createServer();
    srv.unref();
    srv.on('error', reject);
    srv.listen(0, '127.0.0.1', () => {
      const port = (srv.address() as AddressInfo).port;
      srv.close(() => resolvePort(port));
    });
  });
}

async function waitReady(url: string): Promise<void> {
  const deadline = Date.now() + 60_000;
  while (Date.now() < deadline) {
    if (proc.exitCode !== null) {
      throw new Error(`service exited early (code ${proc.exitCode}):\n${serverLog}`);
    }
    try {
      const res = await fetch(url);
      if (res.ok) {
        return;
      }
    } catch {
      // not listening yet
    }
    await new Promise((r) => setTimeout(r, 300));
  }
  throw new Error(`service did not come up within 60s:\n${serverLog}`);
}

function runOracle(sessionId: string): string {
  try {
    return execFileSync(
      PYTHON,
      ['-m', 'kpiloop', 'oracle', '--url', base, '--session', sessionId, '--rounds', '1'],
      { cwd: REPO_ROOT, encoding: 'utf8', stdio: ['ignore', 'pipe', 'pipe'] },
    );
  } catch (err) {
    const e = err as { stdout?: string; stderr?: string };
    throw new Error(`oracle run failed:\n${e.stderr ?? ''}${e.stdout ?? ''}`);
  }
}

beforeAll(async () => {
  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  dataDir = mkdtempSync(join(tmpdir(), 'kpiloop-ui-'));
  proc = spawn(
    PYTHON,
    ['-m', 'kpiloop', 'serve', '--port', String(port), '--data-dir', dataDir],
    { cwd: REPO_ROOT, stdio: ['ignore', 'pipe', 'pipe'] },
  );
  proc.stdout?.on('data', (chunk: Buffer) => {
    serverLog += chunk.toString();
  });
  proc.stderr?.on('data', (chunk: Buffer) => {
    serverLog += chunk.toString();
  });
  await waitReady(`${base}/sessions`);
});

afterAll(async () => {
  if (proc && proc.exitCode === null) {
    proc.kill('SIGTERM');
    await new Promise((done) => {
      proc.once('exit', done);
      setTimeout(done, 5_000).unref();
    });
  }
  if (dataDir) {
    rmSync(dataDir, { recursive: true, force: true });
  }
});

test('UI and CLI label paths converge on one model', async () => {
  const client = new Client(base);
  const viaUi = await client.createSession(DATASET, CONFIG);
  const viaCli = await client.createSession(DATASET, CONFIG);
  expect(viaUi.id).not.toBe(viaCli.id);

  const oracleOut = runOracle(viaCli.id);
  expect(oracleOut).toContain('round 1');
  const cliSession = await client.getSession(viaCli.id);
  expect(cliSession.round).toBe(1);

  // what the oracle answered, read back through the API
  const cliSeries = await client.getSeries(viaCli.id);
  const truth = new Map(cliSeries.labels.map((l) => [l.index, l.label]));
  expect(truth.size).toBeGreaterThan(0);

  // same dataset, config, and seed, so the UI session draws the same batch
  const queries = await client.getQueries(viaUi.id);
  const drawn = queries.batch.map((c) => c.index).sort((a, b) => a - b);
  expect(drawn).toEqual([...truth.keys()].sort((a, b) => a - b));

  // label through the review queue exactly as the keyboard flow does
  const queue = new ReviewQueue(queries.batch);
  while (queue.remaining > 0) {
    const card = queue.current;
    if (!card) {
      break;
    }
    const label = truth.get(card.index);
    expect(label).toBeDefined();
    queue.labelCurrent(label as 0 | 1);
  }
  const staged = queue.toRequest();
  expect(staged).toHaveLength(drawn.length);

  // two partial submissions, as a user pausing mid-batch would produce
  const head = staged.slice(0, 3);
  const tail = staged.slice(3);
  const ack1 = await client.submitLabels(viaUi.id, head);
  expect(ack1.accepted).toBe(head.length);
  queue.drop(head.map((e) => e.index));
  expect(queue.size).toBe(drawn.length - head.length);

  const ack2 = await client.submitLabels(viaUi.id, tail);
  expect(ack2.queried_remaining).toBe(0);
  queue.drop(tail.map((e) => e.index));
  expect(queue.size).toBe(0);

  const summary = await client.applyRound(viaUi.id);
  const view = roundView(summary);
  expect(view.round).toBe(1);
  expect(view.oldOffset).toBe(summary.old_offset);
  expect(view.newOffset).toBe(summary.new_offset);
  expect(view.offsetMoved).toBe(summary.new_offset !== summary.old_offset);

  const uiSnap = await client.getSnapshotBytes(viaUi.id);
  const cliSnap = await client.getSnapshotBytes(viaCli.id);
  expect(uiSnap.length).toBeGreaterThan(0);
  expect(Buffer.from(uiSnap).equals(Buffer.from(cliSnap))).toBe(true);
});

test('a rejected label surfaces the service error code', async () => {
  const client = new Client(base);
  const info = await client.createSession(DATASET, CONFIG);
  const queries = await client.getQueries(info.id);
  const inBatch = new Set(queries.batch.map((c) => c.index));
  let outside = 0;
  while (inBatch.has(outside)) {
    outside += 1;
  }
  const err = await client
    .submitLabels(info.id, [{ index: outside, label: 1 }])
    .catch((e: unknown) => e);
  expect(err).toBeInstanceOf(ApiError);
  expect((err as ApiError).code).toBe('not_queried');
  expect((err as ApiError).status).toBe(400);
});
