/**
 * Thin client for the planning service HTTP API.
 *
 * `fetch` is injectable so tests can stub the service; no business
 * logic lives here, only request/response plumbing.
 */

import type { ArtifactInfo, EventsResponse, GridPayload } from './types';

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

export class ServiceClient {
  constructor(readonly baseUrl: string,
              private readonly fetchImpl: FetchLike =
                (url, init) => fetch(url, init)) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new ServiceError(`service unreachable: ${err}`, 0);
    }
    if (!response.ok) {
      const body = await response.text();
      throw new ServiceError(`HTTP ${response.status}: ${body}`, response.status);
    }
    return response.json() as Promise<T>;
  }

  health(): Promise<{ status: string; version: string }> {
    return this.request('/api/health');
  }

  async createSession(options: {
    session_id?: string;
    default_area?: string;
    resolution_m?: number;
    planning_overrides?: Record<string, unknown>;
  } = {}): Promise<string> {
    const doc = await this.request<{ session_id: string }>('/api/sessions', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(options),
    });
    return doc.session_id;
  }

  async submitPrompt(sessionId: string, text: string): Promise<string[]> {
    const doc = await this.request<{ job_ids: string[] }>(
      `/api/sessions/${sessionId}/prompts`, {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify({ text }),
      });
    return doc.job_ids;
  }

  pollEvents(sessionId: string, since: number, waitS = 0): Promise<EventsResponse> {
    return this.request(
      `/api/sessions/${sessionId}/events?since=${since}&wait_s=${waitS}`);
  }

  async listArtifacts(sessionId: string): Promise<ArtifactInfo[]> {
    const doc = await this.request<{ artifacts: ArtifactInfo[] }>(
      `/api/sessions/${sessionId}/artifacts`);
    return doc.artifacts;
  }

  fetchGrid(sessionId: string, artifactId: string): Promise<GridPayload> {
    return this.request(`/api/sessions/${sessionId}/artifacts/${artifactId}`);
  }

  artifactUrl(sessionId: string, artifactId: string): string {
    return `${this.baseUrl}/api/sessions/${sessionId}/artifacts/${artifactId}`;
  }
}
