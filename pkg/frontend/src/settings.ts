/**
 * Entry module for the settings page served at /_manners/ui/.
 */

import { SettingsApi } from './api.js';
import { SettingsView } from './settingsView.js';

function boot(): void {
  const container = document.getElementById('manners-settings');
  if (!container) {
    console.warn('[manners] settings container missing');
    return;
  }
  void new SettingsView(container, new SettingsApi()).load();
}

if (document.readyState === 'loading') {
  document.addEventListener('DOMContentLoaded', boot);
} else {
  boot();
}
