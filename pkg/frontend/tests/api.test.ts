import { describe, expect, it } from 'vitest';

import { ServiceClient, ServiceError } from '../src/api';
import { applyEvents, initialState, recordPrompt } from '../src/state';
import type { SessionEvent } from '../src/types';

/** Minimal stub of the planning service: one session, one scripted turn. */
function stubService() {
  const calls: { url: string; body?: unknown }[] = [];
  const events: SessionEvent[] = [];
  let jobCounter = 0;

  const fetchImpl = async (url: string, init?: RequestInit): Promise<Response> => {
    const body = init?.body ? JSON.parse(init.body as string) : undefined;
    calls.push({ url, body });
    const respond = (status: number, doc: unknown) =>
      new Response(JSON.stringify(doc), {
        status, headers: { 'Content-Type': 'application/json' } });

    if (url.endsWith('/api/health')) {
      return respond(200, { status: 'ok', version: 'test' });
    }
    if (url.endsWith('/api/sessions') && init?.method === 'POST') {
      return respond(201, { session_id: 'stub-1' });
    }
    if (url.includes('/prompts') && init?.method === 'POST') {
      jobCounter += 1;
      const jobId = `j-${jobCounter}`;
      const base = events.length;
      events.push(
        { seq: base + 1, type: 'turn_started', prompt: (body as any).text },
        { seq: base + 2, type: 'job',
          job: { job_id: jobId, session_id: 'stub-1', task: 'turn',
                 state: 'running', percent: 0, log_lines: [], artifact_ids: [] } },
        { seq: base + 3, type: 'artifact',
          artifact: { id: `a-${jobCounter}`, kind: 'radio_map_json',
                      path: 'x.json', created_at: 't' } },
        { seq: base + 4, type: 'job',
          job: { job_id: jobId, session_id: 'stub-1', task: 'turn',
                 state: 'succeeded', percent: 100, log_lines: [],
                 artifact_ids: [`a-${jobCounter}`] } },
        { seq: base + 5, type: 'message', text: `Completed: ${(body as any).text}` },
        { seq: base + 6, type: 'turn_finished' },
      );
      return respond(202, { job_ids: [jobId] });
    }
    if (url.includes('/events')) {
      const since = Number(new URL(url, 'http://x').searchParams.get('since'));
      return respond(200, {
        events: events.filter((e) => e.seq > since),
        cursor: events.length, busy: false });
    }
    if (url.includes('/artifacts/')) {
      return respond(200, {
        kind: 'path_loss_db', origin_lat: 0, origin_lon: 0, resolution_m: 5,
        width: 1, height: 1, nodata: null, values: [90], serving: ['a'] });
    }
    if (url.includes('/sessions/missing/')) {
      return respond(404, { detail: 'unknown session' });
    }
    if (url.includes('/artifacts')) {
      return respond(200, { artifacts: [] });
    }
    return respond(404, { detail: 'not found' });
  };

  return { fetchImpl, calls, events };
}

describe('prompt round-trip through a stubbed service', () => {
  it('submits the prompt and folds the resulting events into state', async () => {
    const stub = stubService();
    const client = new ServiceClient('http://svc', stub.fetchImpl);

    const sessionId = await client.createSession({ default_area: 'suburban' });
    expect(sessionId).toBe('stub-1');

    let state = { ...initialState(), sessionId };
    const promptText = 'Radio Map Generation';
    state = recordPrompt(state, promptText);
    const jobIds = await client.submitPrompt(sessionId, promptText);
    expect(jobIds).toEqual(['j-1']);

    // The POST body carried exactly the prompt text.
    const post = stub.calls.find((c) => c.url.includes('/prompts'));
    expect(post?.body).toEqual({ text: promptText });

    const poll = await client.pollEvents(sessionId, state.eventCursor);
    state = applyEvents(state, poll.events);

    expect(state.promptHistory).toEqual([promptText]);
    expect(state.busy).toBe(false);                  // turn finished
    expect(state.jobs[0].state).toBe('succeeded');
    expect(state.jobs[0].percent).toBe(100);
    expect(state.artifacts.map((a) => a.id)).toEqual(['a-1']);
    expect(state.messages).toEqual([`Completed: ${promptText}`]);
  });

  it('resumes from a cursor without duplicating events', async () => {
    const stub = stubService();
    const client = new ServiceClient('http://svc', stub.fetchImpl);
    const sessionId = await client.createSession();
    let state = { ...initialState(), sessionId };

    await client.submitPrompt(sessionId, 'one');
    const first = await client.pollEvents(sessionId, 0);
    state = applyEvents(state, first.events);
    const cursorAfterFirst = state.eventCursor;

    await client.submitPrompt(sessionId, 'two');
    const second = await client.pollEvents(sessionId, cursorAfterFirst);
    expect(second.events[0].seq).toBe(cursorAfterFirst + 1);
    state = applyEvents(state, second.events);
    expect(state.eventCursor).toBe(cursorAfterFirst + 6);
    expect(state.artifacts.length).toBe(2);
  });

  it('grid artifacts fetch as typed payloads', async () => {
    const stub = stubService();
    const client = new ServiceClient('http://svc', stub.fetchImpl);
    const grid = await client.fetchGrid('stub-1', 'a-1');
    expect(grid.width).toBe(1);
    expect(grid.values).toEqual([90]);
  });

  it('wraps HTTP failures in ServiceError with the status', async () => {
    const stub = stubService();
    const client = new ServiceClient('http://svc', stub.fetchImpl);
    const failure = await client.listArtifacts('missing').catch((err) => err);
    expect(failure).toBeInstanceOf(ServiceError);
    expect((failure as ServiceError).status).toBe(404);
  });
});
