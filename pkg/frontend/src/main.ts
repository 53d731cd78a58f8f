/**
 * Browser bootstrap: binds the pure state/view modules to the DOM and
 * the live service.  Event polling runs on a timer and never blocks
 * input handling; a failed poll shows a retry banner instead of
 * breaking the console.
 */

import { ServiceClient, ServiceError } from './api';
import { cellAt, renderGridRaster } from './heatmap';
import {
  applyEvents, initialState, recordPrompt, selectArtifact, selectComparison,
  UiSessionState,
} from './state';
import type { GridPayload } from './types';
import { renderHtml } from './view';

const POLL_INTERVAL_MS = 750;

class Console {
  private state: UiSessionState = initialState();
  private grids = new Map<string, GridPayload>();
  private client: ServiceClient;

  constructor(private readonly root: HTMLElement, baseUrl: string) {
    this.client = new ServiceClient(baseUrl);
  }

  async start(): Promise<void> {
    try {
      await this.client.health();
      const sessionId = await this.client.createSession({});
      this.state = { ...this.state, sessionId };
    } catch (err) {
      this.state = { ...this.state, connection: 'down' };
    }
    this.render();
    window.setInterval(() => void this.poll(), POLL_INTERVAL_MS);
  }

  private async poll(): Promise<void> {
    if (!this.state.sessionId) return;
    try {
      const doc = await this.client.pollEvents(
        this.state.sessionId, this.state.eventCursor);
      const next = applyEvents(this.state, doc.events);
      if (next !== this.state || this.state.connection === 'down') {
        this.state = { ...next, connection: 'ok' };
        this.render();
      }
    } catch (err) {
      this.state = { ...this.state, connection: 'down' };
      this.render();
    }
  }

  private async submit(prompt: string): Promise<void> {
    const sessionId = this.state.sessionId;
    if (!sessionId || !prompt) return;
    this.state = recordPrompt(this.state, prompt);
    this.render();
    try {
      await this.client.submitPrompt(sessionId, prompt);
    } catch (err) {
      if (err instanceof ServiceError && err.status === 409) {
        this.state = {
          ...this.state,
          logLines: [...this.state.logLines, 'busy: wait for the current turn'],
        };
      } else {
        this.state = { ...this.state, connection: 'down' };
      }
      this.render();
    }
  }

  private render(): void {
    this.root.innerHTML = renderHtml(this.state, this.client.baseUrl);
    const form = this.root.querySelector<HTMLFormElement>('#prompt-form');
    const input = this.root.querySelector<HTMLInputElement>('#prompt-input');
    form?.addEventListener('submit', (ev) => {
      ev.preventDefault();
      const text = input?.value.trim() ?? '';
      if (input) input.value = '';
      void this.submit(text);
    });
    this.root.querySelectorAll<HTMLElement>('.gallery .tile').forEach((tile) => {
      tile.addEventListener('click', (ev) => {
        const id = tile.dataset.artifact ?? null;
        if ((ev as MouseEvent).shiftKey) {
          this.state = selectComparison(this.state, id);
        } else {
          this.state = selectArtifact(this.state, id);
        }
        this.render();
      });
    });
    void this.paintHeatmap('#heatmap-main', this.state.selectedArtifactId);
    void this.paintHeatmap('#heatmap-compare', this.state.compareArtifactId);
  }

  private async gridFor(artifactId: string): Promise<GridPayload | null> {
    const cached = this.grids.get(artifactId);
    if (cached) return cached;
    if (!this.state.sessionId) return null;
    const info = this.state.artifacts.find((a) => a.id === artifactId);
    if (!info || !info.kind.endsWith('_json')) return null;
    const grid = await this.client.fetchGrid(this.state.sessionId, artifactId);
    this.grids.set(artifactId, grid);
    return grid;
  }

  private async paintHeatmap(selector: string, artifactId: string | null):
      Promise<void> {
    const canvas = this.root.querySelector<HTMLCanvasElement>(selector);
    if (!canvas || !artifactId) return;
    let grid: GridPayload | null = null;
    try {
      grid = await this.gridFor(artifactId);
    } catch (err) {
      canvas.title = `artifact unavailable: ${err}`;  // placeholder tile
      return;
    }
    if (!grid) return;
    const raster = renderGridRaster(grid);
    canvas.width = raster.width;
    canvas.height = raster.height;
    canvas.style.imageRendering = 'pixelated';
    const ctx = canvas.getContext('2d');
    if (!ctx) return;
    const image = ctx.createImageData(raster.width, raster.height);
    image.data.set(raster.data);
    ctx.putImageData(image, 0, 0);
    const readout = this.root.querySelector<HTMLElement>('#hover-readout');
    canvas.addEventListener('mousemove', (ev) => {
      const rect = canvas.getBoundingClientRect();
      const col = Math.floor((ev.clientX - rect.left) / rect.width * grid!.width);
      const rowFromTop = Math.floor(
        (ev.clientY - rect.top) / rect.height * grid!.height);
      const row = grid!.height - 1 - rowFromTop;
      const cell = cellAt(grid!, col, row);
      if (readout) {
        readout.textContent = cell.value === null
          ? `(${col}, ${row}) indoor`
          : `(${col}, ${row}) ${cell.value.toFixed(1)} dB`
            + (cell.serving ? ` via ${cell.serving}` : '');
      }
    });
  }
}

const rootElement = document.getElementById('app');
if (rootElement) {
  const base = new URLSearchParams(window.location.search).get('service')
    ?? 'http://127.0.0.1:8040';
  void new Console(rootElement, base).start();
}
