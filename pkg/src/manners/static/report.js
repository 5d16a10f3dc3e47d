/**
 * Reading the report the proxy embeds into annotated pages.
 *
 * The report lives in <script type="application/json" id="manners-report">;
 * marker elements reference annotations by index via data-manners-id.
 */
export const REPORT_ELEMENT_ID = 'manners-report';
const SEVERITIES = new Set(['info', 'warning', 'error']);
/**
 * Parse and shape-check the embedded report. Returns null when the element
 * is absent or its payload is not a usable report; the caller decides how
 * loudly to complain (the overlay logs exactly one console diagnostic).
 */
export function readEmbeddedReport(doc) {
    const element = doc.getElementById(REPORT_ELEMENT_ID);
    if (!element || !element.textContent) {
        return null;
    }
    let parsed;
    try {
        parsed = JSON.parse(element.textContent);
    }
    catch {
        return null;
    }
    if (typeof parsed !== 'object' || parsed === null) {
        return null;
    }
    const report = parsed;
    if (typeof report.url !== 'string' || !Array.isArray(report.annotations)) {
        return null;
    }
    for (const annotation of report.annotations) {
        if (typeof annotation !== 'object' ||
            annotation === null ||
            typeof annotation.message !== 'string' ||
            !SEVERITIES.has(String(annotation.severity))) {
            return null;
        }
    }
    return {
        url: report.url,
        generated_at: String(report.generated_at ?? ''),
        doc_hash: String(report.doc_hash ?? ''),
        annotations: report.annotations,
        diagnostics: Array.isArray(report.diagnostics)
            ? report.diagnostics
            : [],
        stats: (report.stats ?? {}),
    };
}
