#!/usr/bin/env python3
"""The four-prompt agent flow, end to end with the scripted backend.

One prompt per function: import the map, create the environment,
generate the radio map, optimize the network.  Repeating a prompt
afterwards re-executes nothing thanks to long-term memory.
"""

import tempfile
from pathlib import Path

from radioplan.agent import AgentConfig, model_backend, step
from radioplan.store import LogicalClock, ProjectStore
from radioplan.tools import create_session, default_mock_rules

PROMPTS = [
    "Import osm file of HITSZ",
    "Create outdoor environment",
    "Radio Map Generation",
    "Network Optimization",
]


def main() -> None:
    project = Path(tempfile.mkdtemp(prefix="radioplan-demo-"))
    store = ProjectStore(project, clock=LogicalClock())
    backend = model_backend("scripted-mock", {"rules": default_mock_rules()})
    session = create_session(
        "demo", store, backend,
        config=AgentConfig(planning_overrides={"iteration_budget": 200}))

    for prompt in PROMPTS:
        print(f"\n>>> {prompt}")
        response = step(session, prompt)
        for outcome in response.tasks:
            print(f"    [{outcome.status}] {outcome.tool}: {outcome.summary}")
        print(f"    {response.message}")

    print("\n>>> Radio Map Generation   (repeated on purpose)")
    response = step(session, "Radio Map Generation")
    print(f"    {response.message}")

    print(f"\nArtifacts under {project}:")
    for ref in store.list_artifacts("demo"):
        print(f"  {ref.id}  {ref.kind:15s} {ref.path}")
    print(f"\nTool invocation counts: {dict(session.tool_runs)}")


if __name__ == "__main__":
    main()
