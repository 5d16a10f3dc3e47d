/**
 * Overlay core: highlight marker elements, show messages on hover/focus,
 * keep a count badge and a findings panel, let the user dismiss findings.
 *
 * Never mutates page text content: highlights are classes on the marker
 * elements the proxy already injected, and all overlay chrome (badge,
 * panel, tooltip) lives inside a shadow root on a host element, invisible
 * to text extraction. Dismissals are session-scoped and not persisted.
 */
import { readEmbeddedReport } from './report.js';
export const MARKER_RULE_ATTR = 'data-manners-rule';
export const MARKER_SEVERITY_ATTR = 'data-manners-severity';
export const MARKER_ID_ATTR = 'data-manners-id';
export const HIGHLIGHT_CLASS = 'manners-hl';
export const DISMISSED_CLASS = 'manners-hl--dismissed';
const CHROME_STYLE = `
  :host { all: initial; }
  * { box-sizing: border-box; font-family: system-ui, sans-serif; }
  .badge {
    position: fixed; right: 16px; bottom: 16px; z-index: 2147483646;
    min-width: 28px; height: 28px; padding: 0 8px; border: none;
    border-radius: 14px; background: #b3261e; color: #fff;
    font-size: 14px; line-height: 28px; text-align: center; cursor: pointer;
    box-shadow: 0 1px 4px rgba(0,0,0,.4);
  }
  .badge[hidden] { display: none; }
  .panel {
    position: fixed; right: 16px; bottom: 52px; z-index: 2147483646;
    width: 340px; max-height: 50vh; overflow-y: auto; background: #fff;
    color: #222; border: 1px solid #ccc; border-radius: 6px;
    box-shadow: 0 4px 16px rgba(0,0,0,.25); padding: 8px; font-size: 13px;
  }
  .panel[hidden] { display: none; }
  .finding { border-left: 3px solid #999; padding: 4px 6px; margin: 4px 0; }
  .finding--error { border-left-color: #b3261e; }
  .finding--warning { border-left-color: #b68400; }
  .finding--info { border-left-color: #316dca; }
  .finding--dismissed { opacity: .45; }
  .finding .rule { color: #666; font-size: 11px; }
  .finding .hint { color: #316dca; font-style: italic; }
  .finding button { float: right; border: none; background: none;
    color: #666; cursor: pointer; font-size: 12px; }
  .tooltip {
    position: fixed; z-index: 2147483647; max-width: 320px;
    background: #222; color: #fff; padding: 6px 8px; border-radius: 4px;
    font-size: 12px; pointer-events: none;
  }
  .tooltip[hidden] { display: none; }
  .tooltip .hint { color: #9cf; font-style: italic; }
`;
export class OverlayController {
    constructor(doc, report) {
        this.markers = new Map();
        this.doc = doc;
        this.state = { report, dismissed: new Set(), panelOpen: false };
        this.host = doc.createElement('div');
        this.host.setAttribute('data-manners-ui', '');
        const shadow = this.host.attachShadow({ mode: 'open' });
        const style = doc.createElement('style');
        style.textContent = CHROME_STYLE;
        shadow.appendChild(style);
        this.badge = doc.createElement('button');
        this.badge.className = 'badge';
        this.badge.setAttribute('aria-label', 'annotation findings');
        this.badge.addEventListener('click', () => this.togglePanel());
        shadow.appendChild(this.badge);
        this.panel = doc.createElement('div');
        this.panel.className = 'panel';
        this.panel.hidden = true;
        shadow.appendChild(this.panel);
        this.tooltip = doc.createElement('div');
        this.tooltip.className = 'tooltip';
        this.tooltip.hidden = true;
        shadow.appendChild(this.tooltip);
        doc.body.appendChild(this.host);
    }
    /** Attach highlight classes and listeners to every marker on the page. */
    decorate() {
        const selector = `[${MARKER_RULE_ATTR}][${MARKER_ID_ATTR}]`;
        let orphaned = 0;
        for (const element of Array.from(this.doc.querySelectorAll(selector))) {
            const marker = element;
            const raw = marker.getAttribute(MARKER_ID_ATTR) ?? '';
            const id = Number(raw);
            const annotation = this.state.report.annotations[id];
            if (!Number.isInteger(id) || id < 0 || annotation === undefined) {
                orphaned += 1; // tampered page: leave the marker unstyled
                continue;
            }
            marker.classList.add(HIGHLIGHT_CLASS, `${HIGHLIGHT_CLASS}--${annotation.severity}`);
            marker.setAttribute('tabindex', '0');
            const list = this.markers.get(id) ?? [];
            list.push(marker);
            this.markers.set(id, list);
            marker.addEventListener('mouseenter', () => this.showTooltip(id, marker));
            marker.addEventListener('focusin', () => this.showTooltip(id, marker));
            marker.addEventListener('mouseleave', () => this.hideTooltip());
            marker.addEventListener('focusout', () => this.hideTooltip());
        }
        if (orphaned > 0) {
            console.warn(`[manners] ${orphaned} marker(s) reference annotations missing ` +
                'from the embedded report; leaving them unstyled');
        }
        this.render();
    }
    get badgeCount() {
        return this.state.report.annotations.length - this.state.dismissed.size;
    }
    dismiss(id) {
        if (id < 0 || id >= this.state.report.annotations.length) {
            return;
        }
        this.state.dismissed.add(id);
        for (const marker of this.markers.get(id) ?? []) {
            marker.classList.add(DISMISSED_CLASS);
            marker.classList.remove(HIGHLIGHT_CLASS);
        }
        this.hideTooltip();
        this.render();
    }
    togglePanel() {
        this.state.panelOpen = !this.state.panelOpen;
        this.render();
    }
    showTooltip(id, marker) {
        if (this.state.dismissed.has(id)) {
            return;
        }
        const annotation = this.state.report.annotations[id];
        if (annotation === undefined) {
            return;
        }
        this.tooltip.textContent = '';
        this.tooltip.appendChild(this.renderMessage(annotation));
        const rect = marker.getBoundingClientRect();
        this.tooltip.style.left = `${Math.max(4, rect.left)}px`;
        this.tooltip.style.top = `${rect.bottom + 4}px`;
        this.tooltip.hidden = false;
    }
    hideTooltip() {
        this.tooltip.hidden = true;
    }
    renderMessage(annotation) {
        const fragment = this.doc.createDocumentFragment();
        const message = this.doc.createElement('div');
        message.textContent = annotation.message;
        fragment.appendChild(message);
        if (annotation.fix_hint) {
            const hint = this.doc.createElement('div');
            hint.className = 'hint';
            hint.textContent = annotation.fix_hint;
            fragment.appendChild(hint);
        }
        return fragment;
    }
    render() {
        const count = this.badgeCount;
        this.badge.textContent = String(count);
        this.badge.hidden = count === 0;
        this.panel.hidden = !this.state.panelOpen;
        if (!this.state.panelOpen) {
            return;
        }
        this.panel.textContent = '';
        this.state.report.annotations.forEach((annotation, id) => {
            const row = this.doc.createElement('div');
            row.className = `finding finding--${annotation.severity}`;
            if (this.state.dismissed.has(id)) {
                row.classList.add('finding--dismissed');
            }
            else {
                const dismissButton = this.doc.createElement('button');
                dismissButton.textContent = 'dismiss';
                dismissButton.addEventListener('click', () => this.dismiss(id));
                row.appendChild(dismissButton);
            }
            const rule = this.doc.createElement('div');
            rule.className = 'rule';
            const where = annotation.anchor ? annotation.anchor.path : 'page-level';
            rule.textContent =
                `${annotation.ruleset_id}:${annotation.rule_id} · ${annotation.severity} · ${where}`;
            row.appendChild(rule);
            row.appendChild(this.renderMessage(annotation));
            this.panel.appendChild(row);
        });
    }
}
/**
 * Boot the overlay against a document that already carries markers and the
 * embedded report. Absent or corrupt report: renders nothing, logs one
 * console diagnostic, never breaks the page.
 */
export function initOverlay(doc) {
    const report = readEmbeddedReport(doc);
    if (report === null) {
        console.warn('[manners] no usable embedded report; overlay disabled');
        return null;
    }
    const controller = new OverlayController(doc, report);
    controller.decorate();
    return controller;
}
