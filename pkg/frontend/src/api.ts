/**
 * Client for the proxy's management API (same origin, /_manners/api/).
 *
 * Subscription writes are serialized: at most one PUT is in flight, later
 * edits queue behind it in order.
 */

export interface SubscriptionEntry {
  repo_url: string;
  ruleset_id: string;
  enabled: boolean;
  disabled_rule_ids: string[];
}

export interface Subscription {
  user_id: string;
  entries: SubscriptionEntry[];
}

export interface RuleSummary {
  id: string;
  title: string;
  severity: string;
  tags: string[];
}

export interface RulesetSummary {
  ruleset_id: string;
  version: string;
  title: string;
  rule_count: number;
  rules: RuleSummary[];
}

export interface RepoListing {
  repo_url: string;
  repo_id: string | null;
  rulesets: RulesetSummary[];
}

export interface RulesetsListing {
  repos: RepoListing[];
  diagnostics: { kind: string; message: string }[];
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = 'ApiError';
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class SettingsApi {
  private queue: Promise<unknown> = Promise.resolve();

  constructor(
    private readonly baseUrl = '',
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
    private readonly extraHeaders: Record<string, string> = {},
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = {
      method,
      headers: { Accept: 'application/json', ...this.extraHeaders },
    };
    if (body !== undefined) {
      init.headers = { ...init.headers, 'Content-Type': 'application/json' };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(this.baseUrl + path, init);
    const text = await response.text();
    if (!response.ok) {
      let detail = text;
      try {
        detail = String((JSON.parse(text) as { error?: string }).error ?? text);
      } catch {
        // non-JSON error body; keep raw text
      }
      throw new ApiError(response.status, detail);
    }
    return JSON.parse(text) as T;
  }

  getSubscription(): Promise<Subscription> {
    return this.request('GET', '/_manners/api/subscriptions');
  }

  getRulesets(): Promise<RulesetsListing> {
    return this.request('GET', '/_manners/api/rulesets');
  }

  /** Replace the subscription; queued so only one PUT is ever in flight. */
  putSubscription(subscription: Subscription): Promise<Subscription> {
    const run = () =>
      this.request<Subscription>('PUT', '/_manners/api/subscriptions', {
        entries: subscription.entries,
      });
    const result = this.queue.then(run, run);
    // keep the chain alive whether or not this PUT fails
    this.queue = result.catch(() => undefined);
    return result;
  }
}
