/**
 * Reading the report the proxy embeds into annotated pages.
 *
 * The report lives in <script type="application/json" id="manners-report">;
 * marker elements reference annotations by index via data-manners-id.
 */

export const REPORT_ELEMENT_ID = 'manners-report';

export type Severity = 'info' | 'warning' | 'error';

export interface Anchor {
  path: string;
  start: number;
  end: number;
}

export interface ReportAnnotation {
  ruleset_id: string;
  rule_id: string;
  severity: Severity;
  message: string;
  anchor?: Anchor;
  action: 'annotate' | 'redact';
  fix_hint?: string;
  mask?: string;
}

export interface Diagnostic {
  kind: string;
  message: string;
  [key: string]: unknown;
}

export interface Report {
  url: string;
  generated_at: string;
  doc_hash: string;
  annotations: ReportAnnotation[];
  diagnostics: Diagnostic[];
  stats: Record<string, number>;
}

const SEVERITIES = new Set(['info', 'warning', 'error']);

/**
 * Parse and shape-check the embedded report. Returns null when the element
 * is absent or its payload is not a usable report; the caller decides how
 * loudly to complain (the overlay logs exactly one console diagnostic).
 */
export function readEmbeddedReport(doc: Document): Report | null {
  const element = doc.getElementById(REPORT_ELEMENT_ID);
  if (!element || !element.textContent) {
    return null;
  }
  let parsed: unknown;
  try {
    parsed = JSON.parse(element.textContent);
  } catch {
    return null;
  }
  if (typeof parsed !== 'object' || parsed === null) {
    return null;
  }
  const report = parsed as Record<string, unknown>;
  if (typeof report.url !== 'string' || !Array.isArray(report.annotations)) {
    return null;
  }
  for (const annotation of report.annotations) {
    if (
      typeof annotation !== 'object' ||
      annotation === null ||
      typeof (annotation as Record<string, unknown>).message !== 'string' ||
      !SEVERITIES.has(String((annotation as Record<string, unknown>).severity))
    ) {
      return null;
    }
  }
  return {
    url: report.url,
    generated_at: String(report.generated_at ?? ''),
    doc_hash: String(report.doc_hash ?? ''),
    annotations: report.annotations as ReportAnnotation[],
    diagnostics: Array.isArray(report.diagnostics)
      ? (report.diagnostics as Diagnostic[])
      : [],
    stats: (report.stats ?? {}) as Record<string, number>,
  };
}
