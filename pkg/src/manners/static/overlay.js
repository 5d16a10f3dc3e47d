/**
 * Entry module the proxy injects as /_manners/ui/overlay.js.
 */
import { initOverlay } from './highlights.js';
if (document.readyState === 'loading') {
    document.addEventListener('DOMContentLoaded', () => {
        initOverlay(document);
    });
}
else {
    initOverlay(document);
}
