"""Command-line entry point and file I/O: configs in, reproducible CSVs out.

Scenario configs are flat ``key = value`` text files (see CONFIG_KEYS).
Every run writes a manifest recording the tool version, config hash, master
seed and a checksum per emitted file; rerunning with the same seed must
reproduce each CSV byte for byte.
"""

import argparse
import csv
import hashlib
import json
import os
import sys
import warnings
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from . import simulate, world
from .comms import CommMode
from .errors import BeliefShareError, ConfigError, PolicySpaceTooLarge, SweepTooLarge
from .simulate import AgentSpec, ScenarioConfig, SweepResult

__version__ = "0.1.0"

JOBS_ENV_VAR = "BELIEFSHARE_JOBS"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_CAP = 3

# Documented config keys; unknown keys warn but do not fail.
CONFIG_KEYS = {
    "graph": "graph fixture path, or 'default' for the shipped 15-node grid",
    "comm_mode": "none | posterior_sharing | likelihood_sharing",
    "object": "true object node index, or 'absent'",
    "horizon": "planning horizon (default 2)",
    "steps": "trial length (default 20)",
    "temperature": "action-selection temperature (default 1.0)",
    "seed": "master seed (default 42)",
    "observe_location": "on | off (default on)",
    "observe_visibility": "on | off (default on)",
    "movement": "free | frozen (default free)",
    "action_policy": "plan | random (default plan)",
    "visible_bonus": "preference in nats for the visible outcome (default 2.0)",
    "sweep_modes": "comma list of sweep modes (default all four)",
    "agent": "one per agent: '<start_node> | <object prior spec>'",
}


def _fmt(x: float) -> str:
    """Floats at 9 significant digits, the CSV dialect of the package."""
    return f"{x:.9g}"


def _parse_prior(spec: str, n_nodes: int, field: str) -> np.ndarray:
    spec = spec.strip()
    if spec == "uniform":
        return np.ones(n_nodes) / n_nodes
    if spec.startswith("bump:"):
        parts = spec[5:].split(":")
        nodes = [int(tok) for tok in parts[0].replace(",", " ").split()]
        ratio = float(parts[1]) if len(parts) > 1 else 2.0
        return simulate.bumped_prior(n_nodes, nodes, ratio)
    if spec.startswith("peak:"):
        parts = spec[5:].split(":")
        node = int(parts[0])
        mass = float(parts[1]) if len(parts) > 1 else 0.95
        return simulate.peaked_prior(n_nodes, node, mass)
    try:
        vec = np.array([float(tok) for tok in spec.replace(",", " ").split()])
    except ValueError as exc:
        raise ConfigError(f"{field}: cannot parse prior spec {spec!r}") from exc
    if vec.size != n_nodes:
        raise ConfigError(f"{field}: prior has {vec.size} entries, world has {n_nodes}")
    if np.any(vec < 0) or abs(vec.sum() - 1.0) > 1e-9:
        raise ConfigError(f"{field}: prior must be a normalized distribution")
    return vec


def _prior_spec_str(prior: np.ndarray) -> str:
    # repr round-trips exactly; the 9-digit dialect is for emitted CSVs only
    return ",".join(repr(float(p)) for p in prior)


def parse_config_text(text: str, base_dir: str = ".") -> tuple:
    """Parse a scenario config; returns (ScenarioConfig, sweep_modes)."""
    values = {}
    agent_lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key = key.strip()
        value = value.strip()
        if key == "agent":
            agent_lines.append((lineno, value))
        elif key in CONFIG_KEYS:
            values[key] = value
        else:
            warnings.warn(f"unknown config key {key!r} ignored", stacklevel=2)

    graph_ref = values.get("graph", "default")
    if graph_ref == "default":
        graph = world.default_graph()
    else:
        path = graph_ref if os.path.isabs(graph_ref) else os.path.join(base_dir, graph_ref)
        graph = world.load_graph_fixture(path)
    n = graph.n_nodes

    if "comm_mode" not in values:
        raise ConfigError("comm_mode: missing required key")
    try:
        comm_mode = CommMode(values["comm_mode"])
    except ValueError as exc:
        raise ConfigError(f"comm_mode: unknown mode {values['comm_mode']!r}") from exc

    if not agent_lines:
        raise ConfigError("agent: need at least one 'agent = start | prior' line")
    agents = []
    for lineno, value in agent_lines:
        head, sep, tail = value.partition("|")
        if not sep:
            raise ConfigError(f"agent (line {lineno}): expected '<start> | <prior spec>'")
        try:
            start = int(head.strip())
        except ValueError as exc:
            raise ConfigError(f"agent (line {lineno}): bad start node {head.strip()!r}") from exc
        agents.append(AgentSpec(start, _parse_prior(tail, n, f"agent (line {lineno})")))

    def _int(key, default):
        try:
            return int(values.get(key, default))
        except ValueError as exc:
            raise ConfigError(f"{key}: expected an integer, got {values[key]!r}") from exc

    def _float(key, default):
        try:
            return float(values.get(key, default))
        except ValueError as exc:
            raise ConfigError(f"{key}: expected a number, got {values[key]!r}") from exc

    def _flag(key, default):
        value = values.get(key)
        if value is None:
            return default
        if value in ("on", "true", "yes", "1"):
            return True
        if value in ("off", "false", "no", "0"):
            return False
        raise ConfigError(f"{key}: expected on/off, got {value!r}")

    obj_value = values.get("object", "absent")
    if obj_value == "absent":
        object_location = None
    else:
        try:
            object_location = int(obj_value)
        except ValueError as exc:
            raise ConfigError("object: expected a node index or 'absent'") from exc

    sweep_modes = tuple(
        tok for tok in values.get("sweep_modes", ",".join(simulate.SWEEP_MODES)).replace(
            ",", " "
        ).split()
    )
    for mode in sweep_modes:
        if mode not in simulate.SWEEP_MODES:
            raise ConfigError(f"sweep_modes: unknown mode {mode!r}")

    config = ScenarioConfig(
        graph=graph,
        agents=agents,
        object_location=object_location,
        comm_mode=comm_mode,
        horizon=_int("horizon", 2),
        steps=_int("steps", 20),
        temperature=_float("temperature", 1.0),
        seed=_int("seed", 42),
        observe_location=_flag("observe_location", True),
        observe_visibility=_flag("observe_visibility", True),
        movement=values.get("movement", simulate.FREE),
        action_policy=values.get("action_policy", simulate.PLANNED),
        visible_bonus=_float("visible_bonus", 2.0),
        graph_ref=graph_ref,
    )
    return config, sweep_modes


def parse_config(path: str) -> ScenarioConfig:
    """Load and validate a scenario config file."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    config, _ = parse_config_text(text, base_dir=os.path.dirname(path) or ".")
    return config


def serialize_config(config: ScenarioConfig, sweep_modes=None) -> str:
    """Emit a config in the same flat format parse_config reads."""
    lines = [
        f"graph = {config.graph_ref}",
        f"comm_mode = {config.comm_mode.value}",
        f"object = {'absent' if config.object_location is None else config.object_location}",
        f"horizon = {config.horizon}",
        f"steps = {config.steps}",
        f"temperature = {repr(config.temperature)}",
        f"seed = {config.seed}",
        f"observe_location = {'on' if config.observe_location else 'off'}",
        f"observe_visibility = {'on' if config.observe_visibility else 'off'}",
        f"movement = {config.movement}",
        f"action_policy = {config.action_policy}",
        f"visible_bonus = {repr(config.visible_bonus)}",
    ]
    if sweep_modes is not None:
        lines.append(f"sweep_modes = {','.join(sweep_modes)}")
    for spec in config.agents:
        lines.append(f"agent = {spec.start_node} | {_prior_spec_str(spec.object_prior)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Output writers


@dataclass
class RunManifest:
    tool_version: str
    config_hash: str
    master_seed: int
    created_at: str
    files: list
    resolved_config: str = ""

    def write(self, out_dir: str):
        path = os.path.join(out_dir, "manifest.json")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.__dict__, fh, indent=2)
            fh.write("\n")


def _checksum(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def _manifest_entry(path: str) -> dict:
    return {
        "name": os.path.basename(path),
        "sha256": _checksum(path),
        "bytes": os.path.getsize(path),
    }


def _open_csv(path: str):
    fh = open(path, "w", encoding="utf-8", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def write_trace_files(trace, out_dir: str) -> list:
    """Belief-trace CSV, per-agent heatmap matrices, and the payload log."""
    paths = []

    trace_path = os.path.join(out_dir, "trace.csv")
    fh, writer = _open_csv(trace_path)
    with fh:
        writer.writerow(["t", "agent_id", "factor", "node", "probability"])
        for t in range(trace.n_steps):
            for agent in range(trace.n_agents):
                for node in range(trace.object_beliefs.shape[2]):
                    writer.writerow(
                        [t, agent, world.OBJECT, node, _fmt(trace.object_beliefs[t, agent, node])]
                    )
    paths.append(trace_path)

    for agent in range(trace.n_agents):
        matrix_path = os.path.join(out_dir, f"heatmap_agent{agent}.tsv")
        with open(matrix_path, "w", encoding="utf-8", newline="\n") as fh:
            for node in range(trace.object_beliefs.shape[2]):
                row = trace.object_beliefs[:, agent, node]
                fh.write("\t".join(_fmt(p) for p in row) + "\n")
        paths.append(matrix_path)

    messages_path = os.path.join(out_dir, "messages.csv")
    fh, writer = _open_csv(messages_path)
    with fh:
        writer.writerow(["t", "sender", "receiver", "mode", "node", "logit"])
        for t, round_messages in enumerate(trace.messages):
            for receiver, msg in round_messages:
                for node, logit in enumerate(msg.payload.logits):
                    writer.writerow(
                        [t, msg.sender, receiver, msg.mode_tag.value, node, _fmt(logit)]
                    )
    paths.append(messages_path)
    return paths


def write_sweep_files(result: SweepResult, out_dir: str) -> list:
    trials_path = os.path.join(out_dir, "trials.csv")
    fh, writer = _open_csv(trials_path)
    with fh:
        writer.writerow(
            ["trial_id", "mode", "agent_starts", "object_location", "seed", "found", "steps_to_find"]
        )
        for row in result.rows:
            writer.writerow(
                [
                    row.trial_id,
                    row.mode,
                    ";".join(str(s) for s in row.agent_starts),
                    row.object_location,
                    row.seed,
                    "true" if row.found else "false",
                    "" if row.steps_to_find is None else row.steps_to_find,
                ]
            )

    aggregate_path = os.path.join(out_dir, "aggregate.csv")
    fh, writer = _open_csv(aggregate_path)
    with fh:
        writer.writerow(["mode", "find_rate", "stderr", "n_trials"])
        for mode, (rate, stderr, count) in result.aggregates.items():
            writer.writerow([mode, _fmt(rate), _fmt(stderr), count])
    return [trials_path, aggregate_path]


def _write_manifest(
    out_dir: str, config_hash: str, master_seed: int, paths: list, resolved_config: str = ""
):
    manifest = RunManifest(
        tool_version=__version__,
        config_hash=config_hash,
        master_seed=master_seed,
        created_at=datetime.now(timezone.utc).isoformat(),
        files=[_manifest_entry(p) for p in paths],
        resolved_config=resolved_config,
    )
    manifest.write(out_dir)


# ---------------------------------------------------------------------------
# Commands


SCENARIO_BUILDERS = {
    "echo-chamber": simulate.echo_chamber_config,
    "self-doubt": simulate.self_doubt_config,
}


def cmd_scenario(name: str, mode: str, out_dir: str, seed: int = 42) -> int:
    """Run a named scenario and export its belief traces."""
    if name not in SCENARIO_BUILDERS:
        print(f"unknown scenario {name!r}; choose from {sorted(SCENARIO_BUILDERS)}", file=sys.stderr)
        return EXIT_USAGE
    try:
        comm_mode = CommMode(mode)
    except ValueError:
        print(f"unknown mode {mode!r}", file=sys.stderr)
        return EXIT_USAGE
    config = SCENARIO_BUILDERS[name](comm_mode, seed=seed)
    result = simulate.run_trial(config)
    try:
        os.makedirs(out_dir, exist_ok=True)
        paths = write_trace_files(result.trace, out_dir)
        _write_manifest(out_dir, result.config_hash, seed, paths, serialize_config(config))
    except OSError as exc:
        print(f"cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def cmd_sweep(config_path: str, repeats: int, out_dir: str, seed: int | None = None, jobs: int | None = None) -> int:
    """Run the find-rate sweep described by a config file."""
    try:
        with open(config_path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        config, sweep_modes = parse_config_text(text, base_dir=os.path.dirname(config_path) or ".")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    master_seed = config.seed if seed is None else seed
    if jobs is None:
        jobs = int(os.environ.get(JOBS_ENV_VAR, "1"))
    try:
        result = simulate.run_sweep(
            modes=sweep_modes,
            repeats=repeats,
            graph=config.graph,
            n_agents=config.n_agents,
            steps=config.steps,
            horizon=config.horizon,
            temperature=config.temperature,
            master_seed=master_seed,
            jobs=max(1, jobs),
        )
    except (SweepTooLarge, PolicySpaceTooLarge) as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_CAP

    try:
        os.makedirs(out_dir, exist_ok=True)
        paths = write_sweep_files(result, out_dir)
        _write_manifest(
            out_dir, config.config_hash(), master_seed, paths,
            serialize_config(config, sweep_modes),
        )
    except OSError as exc:
        print(f"cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_IO

    for mode, (rate, stderr, count) in result.aggregates.items():
        print(f"{mode}: find rate {rate:.3f} +/- {stderr:.3f} over {count} trials")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="beliefshare", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_scenario = sub.add_parser("scenario", help="run a canonical scenario and export traces")
    p_scenario.add_argument("name", choices=sorted(SCENARIO_BUILDERS))
    p_scenario.add_argument("--mode", required=True, help="none | posterior_sharing | likelihood_sharing")
    p_scenario.add_argument("--out", required=True, help="output directory")
    p_scenario.add_argument("--seed", type=int, default=42)

    p_sweep = sub.add_parser("sweep", help="run the find-rate sweep from a config file")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--repeats", type=int, default=5)
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--jobs", type=int, default=None)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "scenario":
            return cmd_scenario(args.name, args.mode, args.out, args.seed)
        if args.command == "sweep":
            return cmd_sweep(args.config, args.repeats, args.out, args.seed, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BeliefShareError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
