/**
 * Console state: a pure reduction of (service events, user inputs).
 *
 * Replaying the same recorded event log always reproduces the same
 * state, which makes the whole UI snapshot-testable without a DOM.
 */

import type { ArtifactInfo, JobRecord, SessionEvent } from './types';

export interface UiSessionState {
  sessionId: string | null;
  promptHistory: string[];
  eventCursor: number;
  busy: boolean;
  logLines: string[];
  messages: string[];
  jobs: JobRecord[];                 // upserted by job_id, insertion order
  artifacts: ArtifactInfo[];
  selectedArtifactId: string | null;
  compareArtifactId: string | null;  // side-by-side comparison slot
  connection: 'ok' | 'down';
}

export function initialState(): UiSessionState {
  return {
    sessionId: null,
    promptHistory: [],
    eventCursor: 0,
    busy: false,
    logLines: [],
    messages: [],
    jobs: [],
    artifacts: [],
    selectedArtifactId: null,
    compareArtifactId: null,
    connection: 'ok',
  };
}

function upsertJob(jobs: JobRecord[], job: JobRecord): JobRecord[] {
  const next = jobs.slice();
  const at = next.findIndex((j) => j.job_id === job.job_id);
  if (at >= 0) next[at] = job;
  else next.push(job);
  return next;
}

/** Fold one service event into the state. Events arriving at or below the
 * cursor are replays and ignored, keeping the cursor monotone. */
export function applyEvent(state: UiSessionState, event: SessionEvent): UiSessionState {
  if (event.seq <= state.eventCursor) return state;
  const next: UiSessionState = { ...state, eventCursor: event.seq };
  switch (event.type) {
    case 'turn_started':
      next.busy = true;
      if (event.prompt) next.logLines = [...state.logLines, `> ${event.prompt}`];
      break;
    case 'turn_finished':
      next.busy = false;
      break;
    case 'log':
      if (event.line) next.logLines = [...state.logLines, event.line];
      break;
    case 'message':
      if (event.text) {
        next.messages = [...state.messages, event.text];
        next.logLines = [...state.logLines, `agent: ${event.text}`];
      }
      break;
    case 'job':
      if (event.job) next.jobs = upsertJob(state.jobs, event.job);
      break;
    case 'artifact':
      if (event.artifact) {
        next.artifacts = [...state.artifacts, event.artifact];
        if (state.selectedArtifactId === null &&
            event.artifact.kind.endsWith('_json')) {
          next.selectedArtifactId = event.artifact.id;
        }
      }
      break;
    default:
      break;  // task_* events carry no state beyond their job records
  }
  return next;
}

export function applyEvents(state: UiSessionState,
                            events: SessionEvent[]): UiSessionState {
  return events.reduce(applyEvent, state);
}

// -- user inputs (the other half of the pure state function) -----------

export function recordPrompt(state: UiSessionState, prompt: string): UiSessionState {
  return { ...state, promptHistory: [...state.promptHistory, prompt] };
}

export function selectArtifact(state: UiSessionState, id: string | null): UiSessionState {
  return { ...state, selectedArtifactId: id };
}

export function selectComparison(state: UiSessionState, id: string | null): UiSessionState {
  return { ...state, compareArtifactId: id };
}

// -- selectors ----------------------------------------------------------

/** Percent of the most recently updated non-terminal job, else the last
 * job's percent; the progress bar binds to exactly this value. */
export function activeJobPercent(state: UiSessionState): number {
  const running = [...state.jobs].reverse().find((j) => j.state === 'running');
  if (running) return running.percent;
  const last = state.jobs[state.jobs.length - 1];
  return last ? last.percent : 0;
}

export function activeJobLabel(state: UiSessionState): string {
  const running = [...state.jobs].reverse().find((j) => j.state === 'running');
  if (running) return `${running.task} (${running.state})`;
  const last = state.jobs[state.jobs.length - 1];
  return last ? `${last.task} (${last.state})` : 'idle';
}
