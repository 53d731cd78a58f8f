/** Wire types mirrored from the planning service's JSON payloads. */

/** Grid document served for radio and SINR maps (row-major, south row first). */
export interface GridPayload {
  kind: string;                 // "path_loss_db" | "sinr_db"
  origin_lat: number;
  origin_lon: number;
  resolution_m: number;
  width: number;
  height: number;
  nodata: null;
  values: (number | null)[];    // null = indoor / no data
  serving: (string | null)[];
}

export interface ArtifactInfo {
  id: string;
  kind: string;
  path: string;
  created_at: string;
}

export interface JobRecord {
  job_id: string;
  session_id: string;
  task: string;
  state: 'queued' | 'running' | 'succeeded' | 'failed';
  percent: number;
  log_lines: string[];
  artifact_ids: string[];
}

export interface SessionEvent {
  seq: number;
  type: string;                 // log | job | artifact | message | turn_* | task_*
  line?: string;
  text?: string;
  prompt?: string;
  job?: JobRecord;
  artifact?: ArtifactInfo;
  [key: string]: unknown;
}

export interface EventsResponse {
  events: SessionEvent[];
  cursor: number;
  busy: boolean;
}
