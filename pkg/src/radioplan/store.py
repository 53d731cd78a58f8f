"""Project directory layout, artifact registry, and session persistence.

Everything an agent session produces lands under one project root:

    <root>/cache/osm/     downloaded OSM documents keyed by bbox
    <root>/scenes/        environment model JSON documents
    <root>/plans/         network plan JSON documents
    <root>/artifacts/     per-session radio/SINR maps and reports
    <root>/sessions/      transcripts, artifact manifests, state snapshots

Artifact and transcript writes are atomic (write-temp-then-rename) and
appended to per-session JSONL manifests so a restarted service can
re-list everything.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

from .jsonio import dumps_canonical, write_bytes_atomic

log = logging.getLogger(__name__)

ARTIFACT_KINDS = frozenset({
    "osm", "scene", "radio_map_json", "radio_map_png",
    "sinr_map_json", "sinr_map_png", "plan_json", "report_json",
})

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


class WallClock:
    """Real timestamps for live sessions."""

    def now(self) -> str:
        return datetime.now(timezone.utc).isoformat()


class LogicalClock:
    """Deterministic timestamps: one tick per event from a fixed epoch.

    Scripted (mock-backend) sessions use this so repeated runs produce
    byte-identical artifacts and transcripts.
    """

    def __init__(self) -> None:
        self._ticks = 0

    def now(self) -> str:
        self._ticks += 1
        return (_EPOCH + timedelta(seconds=self._ticks)).isoformat()


@dataclass(frozen=True)
class ArtifactRef:
    """Pointer to one produced file, path relative to the project root."""

    id: str
    kind: str
    path: str
    created_at: str

    def to_dict(self) -> dict:
        return {"id": self.id, "kind": self.kind, "path": self.path,
                "created_at": self.created_at}

    @classmethod
    def from_dict(cls, d: dict) -> "ArtifactRef":
        return cls(d["id"], d["kind"], d["path"], d["created_at"])


# Scene and plan documents live in their dedicated directories; other
# artifact kinds go to the per-session artifacts directory.
_KIND_DIRS = {"scene": "scenes", "plan_json": "plans"}


class ProjectStore:
    """Owns the on-disk project layout and the per-session artifact index."""

    def __init__(self, root: str | Path, clock: WallClock | LogicalClock | None = None):
        self.root = Path(root)
        self.clock = clock or WallClock()
        self._lock = threading.Lock()
        self._artifacts: dict[str, list[ArtifactRef]] = {}
        try:
            for sub in ("cache/osm", "scenes", "plans", "sessions", "artifacts"):
                (self.root / sub).mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise RuntimeError(f"project directory {self.root} is not writable: {exc}")

    # -- paths ---------------------------------------------------------

    @property
    def osm_cache_dir(self) -> Path:
        return self.root / "cache" / "osm"

    def session_dir(self, session_id: str) -> Path:
        d = self.root / "sessions" / session_id
        d.mkdir(parents=True, exist_ok=True)
        return d

    def resolve(self, ref: ArtifactRef) -> Path:
        return self.root / ref.path

    # -- artifacts -----------------------------------------------------

    def _manifest_path(self, session_id: str) -> Path:
        return self.session_dir(session_id) / "artifacts.jsonl"

    def _loaded(self, session_id: str) -> list[ArtifactRef]:
        if session_id not in self._artifacts:
            refs: list[ArtifactRef] = []
            manifest = self._manifest_path(session_id)
            if manifest.exists():
                for line in manifest.read_text().splitlines():
                    if line.strip():
                        refs.append(ArtifactRef.from_dict(json.loads(line)))
            self._artifacts[session_id] = refs
        return self._artifacts[session_id]

    def add_artifact(self, session_id: str, kind: str, name: str,
                     data: bytes) -> ArtifactRef:
        if kind not in ARTIFACT_KINDS:
            raise ValueError(f"unknown artifact kind {kind!r}")
        with self._lock:
            refs = self._loaded(session_id)
            artifact_id = f"a-{len(refs) + 1:04d}"
            subdir = _KIND_DIRS.get(kind, f"artifacts/{session_id}")
            rel = f"{subdir}/{session_id}-{artifact_id}-{name}"
            write_bytes_atomic(self.root / rel, data)
            ref = ArtifactRef(artifact_id, kind, rel, self.clock.now())
            with open(self._manifest_path(session_id), "a") as fh:
                fh.write(json.dumps(ref.to_dict(), sort_keys=True) + "\n")
            refs.append(ref)
            return ref

    def list_artifacts(self, session_id: str) -> list[ArtifactRef]:
        with self._lock:
            return list(self._loaded(session_id))

    def find_artifact(self, session_id: str, artifact_id: str) -> ArtifactRef | None:
        with self._lock:
            for ref in self._loaded(session_id):
                if ref.id == artifact_id:
                    return ref
        return None

    # -- transcripts and state -----------------------------------------

    def transcript_path(self, session_id: str) -> Path:
        return self.session_dir(session_id) / "transcript.jsonl"

    def append_transcript(self, session_id: str, record: dict) -> None:
        with self._lock:
            with open(self.transcript_path(session_id), "a") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")

    def read_transcript(self, session_id: str) -> tuple[list[dict], bool]:
        """All parseable transcript records plus a degraded flag for any
        corrupt line encountered."""
        path = self.transcript_path(session_id)
        records: list[dict] = []
        degraded = False
        if path.exists():
            for line in path.read_text().splitlines():
                if not line.strip():
                    continue
                try:
                    records.append(json.loads(line))
                except json.JSONDecodeError:
                    degraded = True
                    log.warning("session %s: skipping corrupt transcript line",
                                session_id)
        return records, degraded

    def save_session_state(self, session_id: str, state: dict) -> None:
        write_bytes_atomic(self.session_dir(session_id) / "state.json",
                           dumps_canonical(state).encode("utf-8"))

    def load_session_state(self, session_id: str) -> dict | None:
        path = self.root / "sessions" / session_id / "state.json"
        if not path.exists():
            return None
        return json.loads(path.read_text())

    def list_sessions(self) -> list[str]:
        sessions_dir = self.root / "sessions"
        if not sessions_dir.exists():
            return []
        return sorted(p.name for p in sessions_dir.iterdir() if p.is_dir())
