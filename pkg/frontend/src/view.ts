/**
 * Pure HTML rendering of the five console areas:
 * 1 settings, 2 prompt entry with history, 3 scrolling log,
 * 4 execution/visualization, 5 progress bar.
 *
 * renderHtml is a pure function of the state, so replaying a recorded
 * event log reproduces the markup byte for byte.
 */

import { activeJobLabel, activeJobPercent, UiSessionState } from './state';

function escapeHtml(text: string): string {
  return text.replace(/&/g, '&amp;').replace(/</g, '&lt;')
    .replace(/>/g, '&gt;').replace(/"/g, '&quot;');
}

export function renderSettingsArea(state: UiSessionState, projectPath: string): string {
  return [
    '<section class="area settings" id="area-settings">',
    '  <h2>Settings</h2>',
    `  <div class="file-path">File path: <code>${escapeHtml(projectPath)}</code></div>`,
    `  <div class="session">Session: <code>${escapeHtml(state.sessionId ?? 'not connected')}</code></div>`,
    '  <nav><a href="#help">Help</a> · <a href="#contact">Contact Us</a></nav>',
    '  <label>Backend <select id="backend-select">',
    '    <option value="scripted-mock">scripted-mock</option>',
    '    <option value="remote-chat-api">remote-chat-api</option>',
    '  </select></label>',
    `  <div class="connection ${state.connection}">service: ${state.connection}</div>`,
    '</section>',
  ].join('\n');
}

export function renderPromptArea(state: UiSessionState): string {
  const history = state.promptHistory
    .map((p) => `    <li>${escapeHtml(p)}</li>`)
    .join('\n');
  return [
    '<section class="area prompt" id="area-prompt">',
    '  <h2>Prompt</h2>',
    `  <form id="prompt-form"><input id="prompt-input" type="text" `
    + `placeholder="Import osm file of HITSZ" ${state.busy ? 'disabled' : ''}/>`
    + '<button type="submit">Send</button></form>',
    '  <ol class="history">',
    history,
    '  </ol>',
    '</section>',
  ].join('\n');
}

export function renderLogArea(state: UiSessionState): string {
  const lines = state.logLines
    .map((line) => `    <div class="line">${escapeHtml(line)}</div>`)
    .join('\n');
  return [
    '<section class="area log" id="area-log">',
    '  <h2>Log</h2>',
    '  <div class="scroll">',
    lines,
    '  </div>',
    '</section>',
  ].join('\n');
}

export function renderExecutionArea(state: UiSessionState): string {
  const tiles = state.artifacts.map((a) => {
    const selected = a.id === state.selectedArtifactId ? ' selected' : '';
    const compared = a.id === state.compareArtifactId ? ' compared' : '';
    return `    <li class="tile${selected}${compared}" data-artifact="${a.id}">`
      + `${escapeHtml(a.id)} <span class="kind">${escapeHtml(a.kind)}</span></li>`;
  }).join('\n');
  const compare = state.compareArtifactId
    ? `  <canvas id="heatmap-compare" data-artifact="${state.compareArtifactId}"></canvas>`
    : '';
  return [
    '<section class="area execution" id="area-execution">',
    '  <h2>Execution</h2>',
    `  <canvas id="heatmap-main" data-artifact="${state.selectedArtifactId ?? ''}"></canvas>`,
    compare,
    '  <div id="hover-readout"></div>',
    '  <ul class="gallery">',
    tiles,
    '  </ul>',
    '</section>',
  ].filter((part) => part !== '').join('\n');
}

export function renderProgressArea(state: UiSessionState): string {
  const percent = activeJobPercent(state);
  return [
    '<section class="area progress" id="area-progress">',
    '  <h2>Progress</h2>',
    `  <div class="bar"><div class="fill" style="width: ${percent}%"></div></div>`,
    `  <div class="label">${escapeHtml(activeJobLabel(state))} — ${percent}%</div>`,
    '</section>',
  ].join('\n');
}

export function renderHtml(state: UiSessionState, projectPath = '(remote)'): string {
  return [
    '<main class="console">',
    renderSettingsArea(state, projectPath),
    renderPromptArea(state),
    renderLogArea(state),
    renderExecutionArea(state),
    renderProgressArea(state),
    '</main>',
  ].join('\n');
}
