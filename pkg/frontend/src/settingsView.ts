/**
 * Subscription settings page: list loaded repositories and rulesets with
 * enable toggles and per-rule disable checkboxes.
 *
 * Edits apply optimistically and PUT the full subscription; a rejected
 * write reverts the UI and shows the server's error message. Loading
 * failures render an inline, retryable error state.
 */

import {
  ApiError,
  RulesetsListing,
  SettingsApi,
  Subscription,
  SubscriptionEntry,
} from './api.js';

export class SettingsView {
  private listing: RulesetsListing | null = null;
  private subscription: Subscription | null = null;

  constructor(
    private readonly container: HTMLElement,
    private readonly api: SettingsApi,
  ) {}

  async load(): Promise<void> {
    this.renderNotice('Loading…');
    try {
      const [listing, subscription] = await Promise.all([
        this.api.getRulesets(),
        this.api.getSubscription(),
      ]);
      this.listing = listing;
      this.subscription = subscription;
      this.render();
    } catch (error) {
      this.renderLoadFailure(error);
    }
  }

  private doc(): Document {
    return this.container.ownerDocument;
  }

  private renderNotice(text: string): void {
    this.container.textContent = '';
    const notice = this.doc().createElement('p');
    notice.className = 'notice';
    notice.textContent = text;
    this.container.appendChild(notice);
  }

  private renderLoadFailure(error: unknown): void {
    this.container.textContent = '';
    const alert = this.doc().createElement('div');
    alert.className = 'error';
    alert.setAttribute('role', 'alert');
    alert.textContent = `Could not load settings: ${describe(error)} `;
    const retry = this.doc().createElement('button');
    retry.textContent = 'Retry';
    retry.addEventListener('click', () => void this.load());
    alert.appendChild(retry);
    this.container.appendChild(alert);
  }

  private entryFor(repoUrl: string, rulesetId: string): SubscriptionEntry | undefined {
    return this.subscription?.entries.find(
      (e) => e.repo_url === repoUrl && e.ruleset_id === rulesetId);
  }

  isSubscribed(repoUrl: string, rulesetId: string): boolean {
    const entry = this.entryFor(repoUrl, rulesetId);
    return entry !== undefined && entry.enabled;
  }

  isRuleActive(repoUrl: string, rulesetId: string, ruleId: string): boolean {
    const entry = this.entryFor(repoUrl, rulesetId);
    return entry !== undefined && entry.enabled
      && !entry.disabled_rule_ids.includes(ruleId);
  }

  toggleRuleset(repoUrl: string, rulesetId: string, enabled: boolean): Promise<void> {
    return this.mutate((entries) => {
      const entry = entries.find(
        (e) => e.repo_url === repoUrl && e.ruleset_id === rulesetId);
      if (entry) {
        entry.enabled = enabled;
      } else if (enabled) {
        entries.push({
          repo_url: repoUrl,
          ruleset_id: rulesetId,
          enabled: true,
          disabled_rule_ids: [],
        });
      }
    });
  }

  toggleRule(repoUrl: string, rulesetId: string, ruleId: string,
             active: boolean): Promise<void> {
    return this.mutate((entries) => {
      const entry = entries.find(
        (e) => e.repo_url === repoUrl && e.ruleset_id === rulesetId);
      if (!entry) {
        return;
      }
      const disabled = new Set(entry.disabled_rule_ids);
      if (active) {
        disabled.delete(ruleId);
      } else {
        disabled.add(ruleId);
      }
      entry.disabled_rule_ids = [...disabled].sort();
    });
  }

  /** Apply an edit optimistically; revert and surface the error on failure. */
  private async mutate(edit: (entries: SubscriptionEntry[]) => void): Promise<void> {
    if (!this.subscription) {
      return;
    }
    const before = JSON.stringify(this.subscription.entries);
    edit(this.subscription.entries);
    this.render();
    try {
      this.subscription = await this.api.putSubscription(this.subscription);
      this.render();
    } catch (error) {
      this.subscription.entries = JSON.parse(before) as SubscriptionEntry[];
      this.render(describe(error));
    }
  }

  render(errorMessage?: string): void {
    if (!this.listing || !this.subscription) {
      return;
    }
    const doc = this.doc();
    this.container.textContent = '';

    if (errorMessage) {
      const alert = doc.createElement('div');
      alert.className = 'error';
      alert.setAttribute('role', 'alert');
      alert.textContent = `Change rejected: ${errorMessage}`;
      this.container.appendChild(alert);
    }

    if (this.listing.repos.length === 0) {
      const empty = doc.createElement('p');
      empty.className = 'empty-state';
      empty.textContent =
        'No rule repositories are configured on this proxy.';
      this.container.appendChild(empty);
      return;
    }

    for (const repo of this.listing.repos) {
      const section = doc.createElement('section');
      section.className = 'repo';
      const heading = doc.createElement('h2');
      heading.textContent = repo.repo_id ?? repo.repo_url;
      const url = doc.createElement('span');
      url.className = 'repo-url';
      url.textContent = ` ${repo.repo_url}`;
      heading.appendChild(url);
      section.appendChild(heading);

      for (const ruleset of repo.rulesets) {
        section.appendChild(this.renderRuleset(repo.repo_url, ruleset));
      }
      if (repo.rulesets.length === 0) {
        const none = doc.createElement('p');
        none.className = 'empty-state';
        none.textContent = 'No rulesets loaded from this repository.';
        section.appendChild(none);
      }
      this.container.appendChild(section);
    }
  }

  private renderRuleset(
    repoUrl: string,
    ruleset: { ruleset_id: string; version: string; title: string;
               rules: { id: string; title: string; severity: string }[] },
  ): HTMLElement {
    const doc = this.doc();
    const block = doc.createElement('div');
    block.className = 'ruleset';
    block.dataset.rulesetId = ruleset.ruleset_id;

    const subscribed = this.isSubscribed(repoUrl, ruleset.ruleset_id);
    const label = doc.createElement('label');
    const toggle = doc.createElement('input');
    toggle.type = 'checkbox';
    toggle.className = 'ruleset-toggle';
    toggle.checked = subscribed;
    toggle.addEventListener('change', () => {
      void this.toggleRuleset(repoUrl, ruleset.ruleset_id, toggle.checked);
    });
    label.appendChild(toggle);
    label.appendChild(doc.createTextNode(
      ` ${ruleset.title} (${ruleset.ruleset_id} ${ruleset.version})`));
    block.appendChild(label);

    const list = doc.createElement('ul');
    list.className = 'rules';
    for (const rule of ruleset.rules) {
      const item = doc.createElement('li');
      const ruleLabel = doc.createElement('label');
      const checkbox = doc.createElement('input');
      checkbox.type = 'checkbox';
      checkbox.className = 'rule-toggle';
      checkbox.dataset.ruleId = rule.id;
      checkbox.checked = this.isRuleActive(repoUrl, ruleset.ruleset_id, rule.id);
      checkbox.disabled = !subscribed;
      checkbox.addEventListener('change', () => {
        void this.toggleRule(repoUrl, ruleset.ruleset_id, rule.id, checkbox.checked);
      });
      ruleLabel.appendChild(checkbox);
      ruleLabel.appendChild(doc.createTextNode(
        ` ${rule.title} [${rule.severity}]`));
      item.appendChild(ruleLabel);
      list.appendChild(item);
    }
    block.appendChild(list);
    return block;
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) {
    return `${error.message} (HTTP ${error.status})`;
  }
  return error instanceof Error ? error.message : String(error);
}
