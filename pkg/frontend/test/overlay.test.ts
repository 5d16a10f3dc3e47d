import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest';

import {
  DISMISSED_CLASS,
  HIGHLIGHT_CLASS,
  initOverlay,
  OverlayController,
} from '../src/highlights.js';

/** Rendered page text: text nodes outside script/style; shadow DOM content
 * is invisible to this walk, as it is to ordinary extraction. */
function pageText(doc: Document): string {
  const walk = (node: Node): string => {
    if (node.nodeType === Node.TEXT_NODE) {
      return node.textContent ?? '';
    }
    if (node.nodeType !== Node.ELEMENT_NODE) {
      return '';
    }
    const element = node as Element;
    if (element.tagName === 'SCRIPT' || element.tagName === 'STYLE') {
      return '';
    }
    return Array.from(element.childNodes).map(walk).join('');
  };
  return walk(doc.body);
}

function marker(id: number, severity: string, text: string): string {
  return `<span data-manners-rule="rs:r${id}" data-manners-severity="${severity}"` +
    ` data-manners-id="${id}">${text}</span>`;
}

function reportScript(annotations: unknown[]): string {
  const report = {
    url: 'http://wiki/Page',
    generated_at: 't',
    doc_hash: 'ab'.repeat(32),
    annotations,
    diagnostics: [],
    stats: { rules_evaluated: 1, rules_fired: 1, duration_ms: 1 },
  };
  return `<script type="application/json" id="manners-report">` +
    `${JSON.stringify(report)}</script>`;
}

function annotation(overrides: Record<string, unknown> = {}): Record<string, unknown> {
  return {
    ruleset_id: 'rs', rule_id: 'r0', severity: 'warning', message: 'finding',
    action: 'annotate',
    anchor: { path: '/html[1]/body[1]/p[1]/text()[1]', start: 0, end: 3 },
    ...overrides,
  };
}

function threeMarkerPage(): void {
  document.body.innerHTML =
    `<p>${marker(0, 'error', 'alpha')} then ${marker(1, 'warning', 'beta')}` +
    ` and ${marker(2, 'info', 'gamma')} close</p>` +
    reportScript([
      annotation({ rule_id: 'r0', severity: 'error', fix_hint: 'remove it' }),
      annotation({ rule_id: 'r1', severity: 'warning' }),
      annotation({ rule_id: 'r2', severity: 'info' }),
    ]);
}

function badge(): HTMLElement {
  const host = document.querySelector('[data-manners-ui]') as HTMLElement;
  return host.shadowRoot!.querySelector('.badge') as HTMLElement;
}

function panel(): HTMLElement {
  const host = document.querySelector('[data-manners-ui]') as HTMLElement;
  return host.shadowRoot!.querySelector('.panel') as HTMLElement;
}

describe('overlay rendering', () => {
  beforeEach(() => {
    document.body.innerHTML = '';
  });

  afterEach(() => {
    vi.restoreAllMocks();
  });

  it('highlights three markers and shows badge 3; dismissal drops it to 2; page text unchanged', () => {
    threeMarkerPage();
    const before = pageText(document);

    const controller = initOverlay(document)!;
    expect(controller).not.toBeNull();

    const highlighted = document.querySelectorAll(`.${HIGHLIGHT_CLASS}`);
    expect(highlighted).toHaveLength(3);
    expect(badge().textContent).toBe('3');
    expect(badge().hidden).toBe(false);

    controller.dismiss(1);
    expect(badge().textContent).toBe('2');
    expect(document.querySelectorAll(`.${HIGHLIGHT_CLASS}`)).toHaveLength(2);
    expect(document.querySelectorAll(`.${DISMISSED_CLASS}`)).toHaveLength(1);

    expect(pageText(document)).toBe(before);
  });

  it('severity classes follow the report', () => {
    threeMarkerPage();
    initOverlay(document);
    expect(document.querySelector('[data-manners-id="0"]')!.classList)
      .toContain(`${HIGHLIGHT_CLASS}--error`);
    expect(document.querySelector('[data-manners-id="2"]')!.classList)
      .toContain(`${HIGHLIGHT_CLASS}--info`);
  });

  it('zero annotations: no highlights, badge hidden', () => {
    document.body.innerHTML = '<p>calm page</p>' + reportScript([]);
    initOverlay(document);
    expect(document.querySelectorAll(`.${HIGHLIGHT_CLASS}`)).toHaveLength(0);
    expect(badge().hidden).toBe(true);
  });

  it('absent report: renders nothing, logs one diagnostic', () => {
    const warn = vi.spyOn(console, 'warn').mockImplementation(() => {});
    document.body.innerHTML = '<p>no report here</p>';
    expect(initOverlay(document)).toBeNull();
    expect(document.querySelector('[data-manners-ui]')).toBeNull();
    expect(warn).toHaveBeenCalledTimes(1);
  });

  it('corrupt report: renders nothing, logs one diagnostic', () => {
    const warn = vi.spyOn(console, 'warn').mockImplementation(() => {});
    document.body.innerHTML =
      '<p>x</p><script type="application/json" id="manners-report">{broken' +
      '</script>';
    expect(initOverlay(document)).toBeNull();
    expect(warn).toHaveBeenCalledTimes(1);
  });

  it('marker missing from the report stays unstyled with a diagnostic', () => {
    const warn = vi.spyOn(console, 'warn').mockImplementation(() => {});
    document.body.innerHTML =
      `<p>${marker(0, 'error', 'real')} ${marker(7, 'error', 'tampered')}</p>` +
      reportScript([annotation({ severity: 'error' })]);
    initOverlay(document);
    expect(document.querySelectorAll(`.${HIGHLIGHT_CLASS}`)).toHaveLength(1);
    const orphan = document.querySelector('[data-manners-id="7"]')!;
    expect(orphan.classList.length).toBe(0);
    expect(warn).toHaveBeenCalledTimes(1);
  });

  it('tooltip shows message and fix hint on hover', () => {
    threeMarkerPage();
    initOverlay(document);
    const target = document.querySelector('[data-manners-id="0"]') as HTMLElement;
    target.dispatchEvent(new Event('mouseenter'));
    const host = document.querySelector('[data-manners-ui]') as HTMLElement;
    const tooltip = host.shadowRoot!.querySelector('.tooltip') as HTMLElement;
    expect(tooltip.hidden).toBe(false);
    expect(tooltip.textContent).toContain('finding');
    expect(tooltip.textContent).toContain('remove it');
    target.dispatchEvent(new Event('mouseleave'));
    expect(tooltip.hidden).toBe(true);
  });

  it('panel lists findings and its dismiss button works', () => {
    threeMarkerPage();
    initOverlay(document);
    badge().click();
    expect(panel().hidden).toBe(false);
    expect(panel().querySelectorAll('.finding')).toHaveLength(3);
    const dismissButton = panel().querySelector('button') as HTMLElement;
    dismissButton.click();
    expect(badge().textContent).toBe('2');
    expect(panel().querySelectorAll('.finding--dismissed')).toHaveLength(1);
  });

  it('page-level findings appear in the panel without highlights', () => {
    document.body.innerHTML = '<p>page</p>' + reportScript([
      annotation({ anchor: undefined, message: 'page-level problem' }),
    ]);
    initOverlay(document);
    expect(document.querySelectorAll(`.${HIGHLIGHT_CLASS}`)).toHaveLength(0);
    expect(badge().textContent).toBe('1');
    badge().click();
    expect(panel().textContent).toContain('page-level problem');
    expect(panel().textContent).toContain('page-level');
  });

  it('badge count tracks |annotations| - |dismissed| exactly', () => {
    threeMarkerPage();
    const controller = initOverlay(document) as OverlayController;
    expect(controller.badgeCount).toBe(3);
    controller.dismiss(0);
    controller.dismiss(0); // idempotent
    expect(controller.badgeCount).toBe(2);
    controller.dismiss(2);
    expect(controller.badgeCount).toBe(1);
  });
});
