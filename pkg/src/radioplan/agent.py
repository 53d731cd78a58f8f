"""Prompt-driven agent: profile, tool registry, memory, and task planning.

A turn takes one user prompt, asks the model backend for tool calls in
the ``TOOL <name> ARGS <json>`` wire format, expands them against the
tool dependency graph, drops work whose results already exist in
long-term memory, and executes what remains in dependency order.
Short-term memory is scratch space wiped at the end of every turn;
long-term memory is the append-only record of executed tasks that makes
the duplicate-suppression work.
"""

from __future__ import annotations

import fnmatch
import json
import logging
import os
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .store import ArtifactRef, ProjectStore

log = logging.getLogger(__name__)


class AgentError(Exception):
    """Base class for agent-layer failures."""


class NoToolCallError(AgentError):
    """The model produced prose without any tool block."""


class UnknownToolError(AgentError):
    """A tool block names a tool missing from the registry."""


class BadArgumentsError(AgentError):
    """A tool block's argument object is malformed or violates the schema."""

    def __init__(self, message: str, span: str):
        super().__init__(message)
        self.span = span


class DependencyCycleError(AgentError):
    """The registry's dependency graph contains a cycle."""


class BackendConfigError(AgentError):
    """The model backend is not configured (for example, a missing key)."""


class BackendRequestError(AgentError):
    """A remote model call failed; retrying later may succeed."""


class FixtureMissError(AgentError):
    """No scripted completion matches the prompt."""


class ToolExecutionError(AgentError):
    """A tool ran and failed."""


class TurnInProgressError(AgentError):
    """The session is already executing a turn."""


# ---------------------------------------------------------------------------
# Profile

@dataclass
class Profile:
    """Mission definition handed to the model before every prompt."""

    character_text: str
    task_objective_text: str
    constraints_text: str
    output_format_spec: str
    file_path_root: str
    tool_usage_constraints: str

    def __post_init__(self) -> None:
        if not self.character_text:
            raise ValueError("profile character_text must be non-empty")

    def render(self) -> str:
        return "\n".join([
            self.character_text,
            "",
            "# Objective",
            self.task_objective_text,
            "",
            "# Constraints",
            self.constraints_text,
            "",
            "# Output format",
            self.output_format_spec,
            "",
            "# Files",
            f"All outputs live under: {self.file_path_root}",
            "",
            "# Tool usage",
            self.tool_usage_constraints,
        ])


OUTPUT_FORMAT_SPEC = (
    "Emit every action as one block of the form:\n"
    '    TOOL <tool_name> ARGS {"param": value, ...}\n'
    "One block per tool invocation, in execution order. The ARGS object "
    "must be valid JSON. Plain prose outside blocks is treated as "
    "commentary and ignored by the executor."
)


def default_profile(file_path_root: str = ".") -> Profile:
    """The built-in radio-map planning assistant profile."""
    return Profile(
        character_text=(
            "You are a powerful radio map generation and wireless network "
            "planning assistant capable of performing simple operations in "
            "the planning toolkit using available tools."),
        task_objective_text=(
            "Turn the user's request into tool invocations that import map "
            "data, build the outdoor environment, generate radio maps, and "
            "optimize base-station deployments."),
        constraints_text=(
            "Work outdoors only; respect the 50 m minimum station spacing; "
            "target at least 80% of outdoor area at or under 100 dB path "
            "loss. Never invent tool names or parameters."),
        output_format_spec=OUTPUT_FORMAT_SPEC,
        file_path_root=file_path_root,
        tool_usage_constraints=(
            "Tools depend on earlier stages: map import precedes environment "
            "creation, which precedes simulation-area setup, radio maps, and "
            "network optimization. Completed stages are never repeated for "
            "unchanged inputs; emit only the tools the request needs."),
    )


# ---------------------------------------------------------------------------
# Tool registry

@dataclass(frozen=True)
class ToolParam:
    name: str
    type: str = "string"          # string | number | integer | boolean
    required: bool = False


@dataclass(frozen=True)
class ToolSpec:
    """Declared surface of one tool: schema, dependencies, state slots."""

    name: str
    description: str
    params: tuple[ToolParam, ...] = ()
    dependencies: tuple[str, ...] = ()
    reads: tuple[str, ...] = ()
    writes: tuple[str, ...] = ()


@dataclass
class ToolCall:
    """One parsed tool block: name, arguments, and the source text span."""

    name: str
    arguments: dict
    span: str


_PY_TYPES = {"string": str, "number": (int, float), "integer": int, "boolean": bool}


class ToolRegistry:
    """Named tools with executors and an acyclic dependency graph."""

    def __init__(self) -> None:
        self._specs: dict[str, ToolSpec] = {}
        self._executors: dict[str, Callable] = {}

    def register(self, spec: ToolSpec, executor: Callable) -> None:
        if spec.name in self._specs:
            raise ValueError(f"duplicate tool name {spec.name!r}")
        self._specs[spec.name] = spec
        self._executors[spec.name] = executor

    def __contains__(self, name: str) -> bool:
        return name in self._specs

    def names(self) -> list[str]:
        return list(self._specs)

    def spec(self, name: str) -> ToolSpec:
        return self._specs[name]

    def executor(self, name: str) -> Callable:
        return self._executors[name]

    def check_acyclic(self) -> None:
        seen: dict[str, int] = {}  # 0 visiting, 1 done

        def visit(name: str, chain: tuple[str, ...]) -> None:
            state = seen.get(name)
            if state == 1:
                return
            if state == 0:
                raise DependencyCycleError(
                    "tool dependency cycle: " + " -> ".join(chain + (name,)))
            seen[name] = 0
            for dep in self._specs[name].dependencies:
                if dep not in self._specs:
                    raise DependencyCycleError(
                        f"tool {name!r} depends on unknown tool {dep!r}")
                visit(dep, chain + (name,))
            seen[name] = 1

        for name in self._specs:
            visit(name, ())

    def dependency_closure(self, name: str) -> list[str]:
        """Transitive dependencies of ``name`` in execution order."""
        ordered: list[str] = []
        seen: set[str] = set()

        def visit(n: str) -> None:
            for dep in self._specs[n].dependencies:
                if dep not in seen:
                    seen.add(dep)
                    visit(dep)
                    ordered.append(dep)

        visit(name)
        return ordered

    def validate_arguments(self, name: str, arguments: dict, span: str) -> None:
        spec = self._specs[name]
        known = {p.name: p for p in spec.params}
        for key, value in arguments.items():
            param = known.get(key)
            if param is None:
                raise BadArgumentsError(
                    f"tool {name!r} has no parameter {key!r}", span)
            expected = _PY_TYPES[param.type]
            if param.type in ("number", "integer") and isinstance(value, bool):
                raise BadArgumentsError(
                    f"parameter {key!r} of {name!r} must be {param.type}", span)
            if not isinstance(value, expected):
                raise BadArgumentsError(
                    f"parameter {key!r} of {name!r} must be {param.type}, "
                    f"got {type(value).__name__}", span)
        for p in spec.params:
            if p.required and p.name not in arguments:
                raise BadArgumentsError(
                    f"tool {name!r} requires parameter {p.name!r}", span)


_TOOL_BLOCK = re.compile(r"TOOL\s+([A-Za-z_][\w.-]*)\s+ARGS\s*")


def parse_tool_call(model_output: str, registry: ToolRegistry) -> list[ToolCall]:
    """Extract every ``TOOL <name> ARGS <json>`` block in document order.

    Raises NoToolCallError when no block is present (the caller should
    answer with a clarification instead of executing anything),
    UnknownToolError for unregistered names, and BadArgumentsError with
    the offending span for malformed or schema-violating argument
    objects.
    """
    calls: list[ToolCall] = []
    decoder = json.JSONDecoder()
    for match in _TOOL_BLOCK.finditer(model_output):
        name = match.group(1)
        tail = model_output[match.end():]
        span_preview = model_output[match.start():match.end() + 80]
        if name not in registry:
            raise UnknownToolError(f"unknown tool {name!r}")
        try:
            arguments, _ = decoder.raw_decode(tail)
        except json.JSONDecodeError as exc:
            raise BadArgumentsError(
                f"tool {name!r}: arguments are not valid JSON ({exc.msg})",
                span_preview) from exc
        if not isinstance(arguments, dict):
            raise BadArgumentsError(
                f"tool {name!r}: arguments must be a JSON object", span_preview)
        registry.validate_arguments(name, arguments, span_preview)
        calls.append(ToolCall(name, arguments, span_preview))
    if not calls:
        raise NoToolCallError("model output contains no tool blocks")
    return calls


# ---------------------------------------------------------------------------
# Memory

@dataclass
class TaskRecord:
    """One executed task in long-term memory."""

    seq: int
    prompt: str
    tool: str
    args: dict
    status: str                    # succeeded | failed
    reads_pre: dict[str, int]
    writes_post: dict[str, int]
    summary: str
    artifact_ids: list[str]
    started_at: str
    finished_at: str

    def args_key(self) -> str:
        return json.dumps(self.args, sort_keys=True)

    def to_dict(self) -> dict:
        return {"seq": self.seq, "prompt": self.prompt, "tool": self.tool,
                "args": self.args, "status": self.status,
                "reads_pre": self.reads_pre, "writes_post": self.writes_post,
                "summary": self.summary, "artifact_ids": self.artifact_ids,
                "started_at": self.started_at, "finished_at": self.finished_at}

    @classmethod
    def from_dict(cls, d: dict) -> "TaskRecord":
        return cls(seq=d["seq"], prompt=d["prompt"], tool=d["tool"],
                   args=d["args"], status=d["status"],
                   reads_pre=d["reads_pre"], writes_post=d["writes_post"],
                   summary=d["summary"], artifact_ids=d["artifact_ids"],
                   started_at=d["started_at"], finished_at=d["finished_at"])


class Memory:
    """Short-term scratch plus the append-only long-term task record."""

    def __init__(self, sink: Callable[[dict], None] | None = None):
        self.short_term: list[str] = []
        self.long_term: list[TaskRecord] = []
        self._sink = sink

    def note(self, text: str) -> None:
        self.short_term.append(text)

    def clear_short_term(self) -> None:
        self.short_term.clear()

    def record(self, record: TaskRecord) -> None:
        self.long_term.append(record)
        if self._sink is not None:
            self._sink(record.to_dict())

    def successful(self, tool: str, args_key: str) -> list[TaskRecord]:
        return [r for r in self.long_term
                if r.tool == tool and r.status == "succeeded"
                and r.args_key() == args_key]

    def summary_lines(self, limit: int = 12) -> list[str]:
        return [f"- {r.tool} {r.args_key()}: {r.status} ({r.summary})"
                for r in self.long_term[-limit:]]


# ---------------------------------------------------------------------------
# Model backends

class ScriptedMockBackend:
    """Maps prompt patterns to canned completions, first match wins.

    Fixture layout (JSON): ``{"completions": [{"prompt_pattern":
    "Import osm file*", "completion": "TOOL import_osm ARGS {...}"},
    ...]}``.  Patterns are shell-style wildcards matched against the
    final USER line of the assembled context.
    """

    kind = "scripted-mock"

    def __init__(self, rules: list[dict]):
        for rule in rules:
            if "prompt_pattern" not in rule or "completion" not in rule:
                raise BackendConfigError(
                    "each fixture rule needs prompt_pattern and completion")
        self.rules = rules

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedMockBackend":
        doc = json.loads(Path(path).read_text())
        return cls(doc["completions"])

    def complete(self, context: str) -> str:
        prompt = ""
        for line in context.splitlines():
            if line.startswith("USER: "):
                prompt = line[len("USER: "):]
        for rule in self.rules:
            if fnmatch.fnmatchcase(prompt, rule["prompt_pattern"]):
                return rule["completion"]
        raise FixtureMissError(f"no scripted completion matches prompt {prompt!r}")


class RemoteChatBackend:
    """OpenAI-compatible chat completion endpoint."""

    kind = "remote-chat-api"

    def __init__(self, endpoint: str, api_key: str, model: str,
                 timeout_s: float = 60.0):
        self.endpoint = endpoint
        self._api_key = api_key          # never logged
        self.model = model
        self.timeout_s = timeout_s

    def complete(self, context: str) -> str:
        import requests

        try:
            resp = requests.post(
                self.endpoint,
                headers={"Authorization": f"Bearer {self._api_key}",
                         "Content-Type": "application/json"},
                json={"model": self.model,
                      "messages": [{"role": "user", "content": context}]},
                timeout=self.timeout_s)
        except requests.RequestException as exc:
            raise BackendRequestError(
                f"model endpoint unreachable: {exc}; retry once the network "
                "or endpoint recovers") from exc
        if resp.status_code != 200:
            raise BackendRequestError(
                f"model endpoint returned HTTP {resp.status_code}; "
                "check credentials and retry")
        doc = resp.json()
        try:
            return doc["choices"][0]["message"]["content"]
        except (KeyError, IndexError) as exc:
            raise BackendRequestError("malformed completion payload") from exc


API_KEY_ENV = "RADIOPLAN_API_KEY"
ENDPOINT_ENV = "RADIOPLAN_ENDPOINT"


def model_backend(kind: str, config: dict | None = None):
    """Construct a model backend: ``scripted-mock`` or ``remote-chat-api``.

    The remote kind reads its endpoint and key from the config mapping
    with environment-variable override; a missing key fails here, before
    any network traffic.
    """
    config = config or {}
    if kind == "scripted-mock":
        if "fixtures" in config:
            return ScriptedMockBackend.from_file(config["fixtures"])
        if "rules" in config:
            return ScriptedMockBackend(config["rules"])
        raise BackendConfigError("scripted-mock backend needs fixtures or rules")
    if kind == "remote-chat-api":
        endpoint = os.environ.get(ENDPOINT_ENV) or config.get("endpoint")
        api_key = os.environ.get(API_KEY_ENV) or config.get("api_key")
        if not endpoint:
            raise BackendConfigError(
                f"remote backend needs an endpoint (config or ${ENDPOINT_ENV})")
        if not api_key:
            raise BackendConfigError(
                f"remote backend needs an API key (config or ${API_KEY_ENV})")
        return RemoteChatBackend(endpoint, api_key,
                                 config.get("model", "gpt-4"),
                                 config.get("timeout_s", 60.0))
    raise ValueError(f"unknown backend kind {kind!r}")


# ---------------------------------------------------------------------------
# Session

@dataclass
class AgentConfig:
    """Session-level defaults the tools consult.

    Persisted with the session state so a restored session canonicalizes
    requests exactly as the original did (same dedup keys).
    """

    default_area: str | None = None
    resolution_m: float | None = None      # None: scenario default
    initial_station_count: int = 3
    deployment_seed: int = 0
    noise_figure_db: float = 7.0
    planning_overrides: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"default_area": self.default_area,
                "resolution_m": self.resolution_m,
                "initial_station_count": self.initial_station_count,
                "deployment_seed": self.deployment_seed,
                "noise_figure_db": self.noise_figure_db,
                "planning_overrides": dict(self.planning_overrides)}

    @classmethod
    def from_dict(cls, d: dict) -> "AgentConfig":
        return cls(**d)


@dataclass
class ToolResult:
    summary: str
    artifacts: list[ArtifactRef] = field(default_factory=list)


@dataclass
class TaskOutcome:
    task_id: str
    tool: str
    args: dict
    status: str                   # succeeded | failed | skipped | aborted
    summary: str
    artifact_ids: list[str] = field(default_factory=list)


@dataclass
class AgentResponse:
    message: str
    tasks: list[TaskOutcome] = field(default_factory=list)
    artifacts: list[ArtifactRef] = field(default_factory=list)
    log_lines: list[str] = field(default_factory=list)


class AgentSession:
    """One conversation: profile, registry, memory, state, and backend."""

    def __init__(self, session_id: str, profile: Profile, registry: ToolRegistry,
                 backend, store: ProjectStore, config: AgentConfig | None = None,
                 transport=None, event_sink: Callable[[dict], None] | None = None):
        registry.check_acyclic()
        self.id = session_id
        self.profile = profile
        self.registry = registry
        self.backend = backend
        self.store = store
        self.config = config or AgentConfig()
        self.transport = transport
        self.event_sink = event_sink
        self.memory = Memory(sink=lambda rec: store.append_transcript(self.id, rec))
        self.state: dict[str, object] = {}
        self.state_revs: dict[str, int] = {}
        self._rev_counter = 0
        self.current_area: str | None = None
        self.pending_tasks: list[PlannedTask] = []
        self.executed_tasks: list[TaskOutcome] = []
        self.tool_runs: Counter = Counter()
        self._task_counter = 0
        self._turn_active = False
        self.degraded = False

    # -- state bookkeeping ------------------------------------------------

    def bump(self, slot: str) -> int:
        self._rev_counter += 1
        self.state_revs[slot] = self._rev_counter
        return self._rev_counter

    def emit(self, event: dict) -> None:
        if self.event_sink is not None:
            self.event_sink(event)

    def next_task_id(self) -> str:
        self._task_counter += 1
        return f"t-{self._task_counter:04d}"

    def snapshot(self) -> dict:
        from .tools import state_snapshot

        return state_snapshot(self)


@dataclass
class PlannedTask:
    tool: str
    args: dict                    # canonicalized
    origin: str                   # proposed | dependency

    def args_key(self) -> str:
        return json.dumps(self.args, sort_keys=True)


def build_context(session: AgentSession, prompt: str) -> str:
    parts = [session.profile.render()]
    if session.memory.long_term:
        parts.append("\n# Completed work\n" + "\n".join(session.memory.summary_lines()))
    parts.append(f"\nUSER: {prompt}")
    return "\n".join(parts)


def _record_index(session: AgentSession) -> dict[tuple[str, str], list]:
    index: dict[tuple[str, str], list] = {}
    for r in session.memory.long_term:
        if r.status == "succeeded":
            index.setdefault((r.tool, r.args_key()), []).append(
                (r.reads_pre, r.writes_post))
    return index


def _slot_ancestry(session: AgentSession) -> dict[tuple[str, int], int | None]:
    """Per-slot revision lineage derived from the task history.

    A tool that reads and writes a slot (network optimization over the
    stations) derives the new revision from the old one; a tool that
    writes without reading (a fresh map import) starts a new line.
    """
    ancestry: dict[tuple[str, int], int | None] = {}
    for r in session.memory.long_term:
        if r.tool not in session.registry:
            continue
        spec = session.registry.spec(r.tool)
        for slot in spec.writes:
            child = r.writes_post.get(slot)
            if child is None:
                continue
            parent = r.reads_pre.get(slot) if slot in spec.reads else None
            if child != parent and (slot, child) not in ancestry:
                ancestry[(slot, child)] = parent
    return ancestry


def _derives_from(ancestry: dict, slot: str, current: int, target: int) -> bool:
    rev: int | None = current
    seen: set[int] = set()
    while rev is not None and rev not in seen:
        if rev == target:
            return True
        seen.add(rev)
        rev = ancestry.get((slot, rev))
    return False


def _is_satisfied(spec: ToolSpec, reads_pre: dict, writes_post: dict,
                  sim_revs: dict[str, int], ancestry: dict) -> bool:
    """A past invocation still stands if its pure inputs are unchanged
    and the current state of everything it wrote derives from its
    outputs (possibly through later read-modify-write tools)."""
    for slot in spec.reads:
        if slot in spec.writes:
            continue
        if sim_revs.get(slot, 0) != reads_pre.get(slot, 0):
            return False
    for slot in spec.writes:
        if not _derives_from(ancestry, slot, sim_revs.get(slot, 0),
                             writes_post.get(slot, 0)):
            return False
    return True


def canonical_args(tool: str, args: dict, session: AgentSession,
                   sim_area: str | None) -> dict:
    """Resolve a call's effective arguments against session defaults."""
    from .tools import canonicalize_tool_args

    return canonicalize_tool_args(tool, args, session, sim_area)


def plan_tasks(prompt: str, session: AgentSession,
               proposals: list[ToolCall] | None = None) -> list[PlannedTask]:
    """Expand proposed tool calls into a dependency-ordered task list.

    Each proposal is prefixed with its transitive dependencies; any task
    whose identical invocation already succeeded against the current
    state (long-term memory) or earlier in this very plan is dropped.
    """
    if proposals is None:
        completion = session.backend.complete(build_context(session, prompt))
        proposals = parse_tool_call(completion, session.registry)

    session.registry.check_acyclic()
    index = _record_index(session)
    ancestry = _slot_ancestry(session)
    sim_revs = dict(session.state_revs)
    sim_area = session.current_area
    sim_counter = [session._rev_counter]
    planned: list[PlannedTask] = []

    def consider(tool: str, args: dict, origin: str) -> None:
        nonlocal sim_area
        spec = session.registry.spec(tool)
        canonical = canonical_args(tool, args, session, sim_area)
        key = json.dumps(canonical, sort_keys=True)
        for reads_pre, writes_post in index.get((tool, key), []):
            if _is_satisfied(spec, reads_pre, writes_post, sim_revs, ancestry):
                return  # already done for this exact state
        reads_pre = {s: sim_revs.get(s, 0) for s in spec.reads}
        writes_post = {}
        for slot in spec.writes:
            sim_counter[0] += 1
            parent = reads_pre.get(slot) if slot in spec.reads else None
            ancestry[(slot, sim_counter[0])] = parent
            sim_revs[slot] = sim_counter[0]
            writes_post[slot] = sim_counter[0]
        index.setdefault((tool, key), []).append((reads_pre, writes_post))
        planned.append(PlannedTask(tool, canonical, origin))
        if tool == "import_osm":
            sim_area = canonical.get("area", sim_area)

    for call in proposals:
        for dep in session.registry.dependency_closure(call.name):
            consider(dep, {}, "dependency")
        consider(call.name, call.arguments, "proposed")
    return planned


def step(session: AgentSession, user_prompt: str) -> AgentResponse:
    """Run one full turn: model call, planning, execution, memory update.

    A model reply without tool blocks produces a clarification response
    and leaves all state untouched.  A failing task aborts its dependents
    but independent tasks still run.  Short-term memory is always empty
    afterwards.
    """
    if session._turn_active:
        raise TurnInProgressError(f"session {session.id} already has a turn running")
    session._turn_active = True
    logs: list[str] = []

    def say(line: str) -> None:
        logs.append(line)
        session.emit({"type": "log", "line": line})
        log.info("[%s] %s", session.id, line)

    try:
        session.emit({"type": "turn_started", "prompt": user_prompt})
        context = build_context(session, user_prompt)
        session.memory.note(f"context for: {user_prompt}")
        try:
            completion = session.backend.complete(context)
        except (BackendConfigError, BackendRequestError, FixtureMissError) as exc:
            say(f"model backend failed: {exc}")
            return AgentResponse(message=f"Model backend failed: {exc}",
                                 log_lines=logs)
        session.memory.note("completion received")

        try:
            proposals = parse_tool_call(completion, session.registry)
        except NoToolCallError:
            say("model reply contained no tool calls; asking for clarification")
            return AgentResponse(
                message=("I could not find an actionable tool call in the "
                         "model reply. Please rephrase the request, for "
                         "example: 'Import osm file of HITSZ' or "
                         "'Radio Map Generation'."),
                log_lines=logs)
        except (UnknownToolError, BadArgumentsError) as exc:
            say(f"rejected model reply: {exc}")
            return AgentResponse(message=f"Model reply was not usable: {exc}",
                                 log_lines=logs)

        try:
            tasks = plan_tasks(user_prompt, session, proposals=proposals)
        except AgentError as exc:
            say(f"planning failed: {exc}")
            return AgentResponse(message=f"Could not plan the request: {exc}",
                                 log_lines=logs)
        if not tasks:
            existing = session.store.list_artifacts(session.id)
            cite = (f" Latest artifact: {existing[-1].id} ({existing[-1].kind})."
                    if existing else "")
            say("nothing to do: all requested results already exist")
            return AgentResponse(
                message="Everything requested is already up to date; no tools "
                        f"were re-executed.{cite}",
                artifacts=existing, log_lines=logs)

        say("planned tasks: " + ", ".join(t.tool for t in tasks))
        outcomes: list[TaskOutcome] = []
        new_artifacts: list[ArtifactRef] = []
        failed_tools: set[str] = set()

        for task in tasks:
            task_id = session.next_task_id()
            blocked = {task.tool, *session.registry.dependency_closure(task.tool)} \
                & failed_tools
            if blocked:
                outcome = TaskOutcome(task_id, task.tool, task.args, "aborted",
                                      f"aborted: dependency {sorted(blocked)[0]} failed")
                outcomes.append(outcome)
                say(f"{task.tool}: aborted (failed dependency)")
                session.emit({"type": "task_aborted", "task_id": task_id,
                              "tool": task.tool})
                continue

            session.pending_tasks.append(task)
            session.emit({"type": "task_started", "task_id": task_id,
                          "tool": task.tool, "percent": 0})
            started = session.store.clock.now()
            reads_pre = {s: session.state_revs.get(s, 0)
                         for s in session.registry.spec(task.tool).reads}

            def progress(percent: float, note: str = "") -> None:
                session.emit({"type": "task_progress", "task_id": task_id,
                              "tool": task.tool,
                              "percent": float(percent), "note": note})

            try:
                session.tool_runs[task.tool] += 1
                result = session.registry.executor(task.tool)(
                    session, task.args, progress)
                status, summary = "succeeded", result.summary
                artifacts = result.artifacts
            except (ToolExecutionError, ValueError, KeyError, RuntimeError) as exc:
                status, summary, artifacts = "failed", f"{exc}", []
                failed_tools.add(task.tool)
                say(f"{task.tool} failed: {exc}")

            session.pending_tasks.remove(task)
            writes_post = {s: session.state_revs.get(s, 0)
                           for s in session.registry.spec(task.tool).writes}
            record = TaskRecord(
                seq=len(session.memory.long_term) + 1, prompt=user_prompt,
                tool=task.tool, args=task.args, status=status,
                reads_pre=reads_pre, writes_post=writes_post, summary=summary,
                artifact_ids=[a.id for a in artifacts], started_at=started,
                finished_at=session.store.clock.now())
            session.memory.record(record)
            outcome = TaskOutcome(task_id, task.tool, task.args, status,
                                  summary, [a.id for a in artifacts])
            outcomes.append(outcome)
            session.executed_tasks.append(outcome)
            new_artifacts.extend(artifacts)
            for a in artifacts:
                session.emit({"type": "artifact", "artifact": a.to_dict()})
            session.emit({"type": "task_finished", "task_id": task_id,
                          "tool": task.tool, "percent": 100, "status": status})
            if status == "succeeded":
                say(f"{task.tool}: {summary}")

        session.store.save_session_state(session.id, session.snapshot())
        done = sum(1 for o in outcomes if o.status == "succeeded")
        message = (f"Completed {done}/{len(outcomes)} tasks for: {user_prompt}")
        return AgentResponse(message=message, tasks=outcomes,
                             artifacts=new_artifacts, log_lines=logs)
    finally:
        session.memory.clear_short_term()
        session.emit({"type": "turn_finished"})
        session._turn_active = False
