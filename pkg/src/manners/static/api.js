/**
 * Client for the proxy's management API (same origin, /_manners/api/).
 *
 * Subscription writes are serialized: at most one PUT is in flight, later
 * edits queue behind it in order.
 */
export class ApiError extends Error {
    constructor(status, message) {
        super(message);
        this.status = status;
        this.name = 'ApiError';
    }
}
export class SettingsApi {
    constructor(baseUrl = '', fetchFn = (input, init) => fetch(input, init), extraHeaders = {}) {
        this.baseUrl = baseUrl;
        this.fetchFn = fetchFn;
        this.extraHeaders = extraHeaders;
        this.queue = Promise.resolve();
    }
    async request(method, path, body) {
        const init = {
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
                detail = String(JSON.parse(text).error ?? text);
            }
            catch {
                // non-JSON error body; keep raw text
            }
            throw new ApiError(response.status, detail);
        }
        return JSON.parse(text);
    }
    getSubscription() {
        return this.request('GET', '/_manners/api/subscriptions');
    }
    getRulesets() {
        return this.request('GET', '/_manners/api/rulesets');
    }
    /** Replace the subscription; queued so only one PUT is ever in flight. */
    putSubscription(subscription) {
        const run = () => this.request('PUT', '/_manners/api/subscriptions', {
            entries: subscription.entries,
        });
        const result = this.queue.then(run, run);
        // keep the chain alive whether or not this PUT fails
        this.queue = result.catch(() => undefined);
        return result;
    }
}
