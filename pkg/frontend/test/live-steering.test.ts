// @vitest-environment node
//
// End-to-end: toggling a ruleset off through the settings API client, then
// re-fetching the page through the real proxy, removes exactly that
// ruleset's findings (checked via X-Manners-Findings and report contents).

import { spawn, ChildProcess } from 'node:child_process';
import { createHash } from 'node:crypto';
import { mkdtempSync, writeFileSync } from 'node:fs';
import http from 'node:http';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { AddressInfo } from 'node:net';

import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { SettingsApi } from '../src/api.js';

const PAGE =
  '<html><head><title>fixture</title></head>' +
  '<body><p>alpha beta gamma</p></body></html>';

function filterRule(id: string, pattern: string): unknown {
  return {
    id, title: id, description: 'd', severity: 'warning',
    firing: { url_pattern: '.' },
    active: { kind: 'regex-filter', params: { pattern, message: `hit ${pattern}` } },
  };
}

const RULESETS: Record<string, unknown> = {
  'set-a': {
    schema_version: 1, id: 'set-a', version: '1.0', title: 'Set A',
    rules: [filterRule('a1', 'alpha')],
  },
  'set-b': {
    schema_version: 1, id: 'set-b', version: '1.0', title: 'Set B',
    rules: [filterRule('b1', 'beta'), filterRule('b2', 'gamma')],
  },
};

function listen(server: http.Server): Promise<number> {
  return new Promise((resolve) => {
    server.listen(0, '127.0.0.1', () =>
      resolve((server.address() as AddressInfo).port));
  });
}

async function waitForProxy(base: string, proc: ChildProcess): Promise<void> {
  for (let attempt = 0; attempt < 100; attempt += 1) {
    if (proc.exitCode !== null) {
      throw new Error(`proxy exited early with code ${proc.exitCode}`);
    }
    try {
      const response = await fetch(`${base}/_manners/api/rulesets`);
      if (response.ok) {
        return;
      }
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
  throw new Error('proxy never became ready');
}

describe('live rule steering through the proxy', () => {
  let origin: http.Server;
  let repo: http.Server;
  let proxy: ChildProcess;
  let proxyBase: string;
  let repoUrl: string;
  let stderr = '';

  beforeAll(async () => {
    origin = http.createServer((req, res) => {
      res.writeHead(200, { 'Content-Type': 'text/html; charset=utf-8' });
      res.end(PAGE);
    });
    const originPort = await listen(origin);

    const files = new Map<string, string>();
    const manifestEntries = Object.entries(RULESETS).map(([rsid, doc]) => {
      const raw = JSON.stringify(doc);
      files.set(`/repo/${rsid}.json`, raw);
      return {
        ruleset_id: rsid, version: '1.0',
        sha256: createHash('sha256').update(raw).digest('hex'),
        href: `${rsid}.json`, title: rsid,
      };
    });
    files.set('/repo/index.json', JSON.stringify({
      schema_version: 1, repo_id: 'live-repo', rulesets: manifestEntries,
    }));
    repo = http.createServer((req, res) => {
      const body = files.get(req.url ?? '');
      if (body === undefined) {
        res.writeHead(404).end();
        return;
      }
      res.writeHead(200, { 'Content-Type': 'application/json' });
      res.end(body);
    });
    const repoPort = await listen(repo);
    repoUrl = `http://127.0.0.1:${repoPort}/repo`;

    const dir = mkdtempSync(join(tmpdir(), 'manners-live-'));
    const configPath = join(dir, 'config.json');
    writeFileSync(configPath, JSON.stringify({
      listen: '127.0.0.1:0',
      mode: 'reverse',
      upstream: `http://127.0.0.1:${originPort}`,
      repos: [repoUrl],
      default_subscription: {
        entries: [
          { repo_url: repoUrl, ruleset_id: 'set-a' },
          { repo_url: repoUrl, ruleset_id: 'set-b' },
        ],
      },
      overlay_enabled: true,
      cache_dir: join(dir, 'cache'),
      subscriptions_path: join(dir, 'subs.json'),
    }));

    proxy = spawn('python3', ['-m', 'manners', 'serve', '--config', configPath]);
    proxyBase = await new Promise<string>((resolve, reject) => {
      proxy.stderr!.on('data', (chunk: Buffer) => {
        stderr += chunk.toString();
        const match = stderr.match(/listening on (127\.0\.0\.1:\d+)/);
        if (match) {
          resolve(`http://${match[1]}`);
        }
      });
      proxy.on('exit', (code) =>
        reject(new Error(`proxy exited (${code}): ${stderr}`)));
    });
    await waitForProxy(proxyBase, proxy);
  }, 30000);

  afterAll(() => {
    proxy?.kill('SIGINT');
    origin?.close();
    repo?.close();
  });

  function fetchPage(): Promise<Response> {
    return fetch(`${proxyBase}/Page`, {
      headers: { Cookie: 'manners_uid=steer-user' },
    });
  }

  function embeddedReport(html: string): { annotations: { ruleset_id: string }[] } {
    const match = html.match(
      /<script type="application\/json" id="manners-report">(.*?)<\/script>/s);
    expect(match).not.toBeNull();
    return JSON.parse(match![1]!);
  }

  it('removes exactly the toggled ruleset’s findings', async () => {
    const before = await fetchPage();
    expect(before.headers.get('x-manners-findings')).toBe('3');
    const reportBefore = embeddedReport(await before.text());
    const bySet = (rs: string) =>
      reportBefore.annotations.filter((a) => a.ruleset_id === rs).length;
    expect(bySet('set-a')).toBe(1);
    expect(bySet('set-b')).toBe(2);

    // the settings page's own API client, pointed at the real proxy
    const api = new SettingsApi(proxyBase, undefined, {
      Cookie: 'manners_uid=steer-user',
    });
    const subscription = await api.getSubscription();
    expect(subscription.entries).toHaveLength(2);
    const entry = subscription.entries.find((e) => e.ruleset_id === 'set-a')!;
    entry.enabled = false;
    await api.putSubscription(subscription);

    const after = await fetchPage();
    expect(after.headers.get('x-manners-findings')).toBe('2');
    const reportAfter = embeddedReport(await after.text());
    expect(reportAfter.annotations.every((a) => a.ruleset_id === 'set-b')).toBe(true);
    expect(reportAfter.annotations).toHaveLength(2);

    // other users keep the default view
    const otherUser = await fetch(`${proxyBase}/Page`, {
      headers: { Cookie: 'manners_uid=someone-else' },
    });
    expect(otherUser.headers.get('x-manners-findings')).toBe('3');
  }, 30000);
});
