"""Reduced find-rate comparison across the communication modes.

Runs a random subsample of (start, start, object) combinations instead of
the full 3,375-combination sweep so it finishes in about a minute; use the
CLI (`beliefshare sweep --config configs/find_rate_sweep.cfg ...`) for the
full table. The qualitative picture is stable: likelihood sharing leads,
no-comm trails it, the random walker loses, and posterior sharing falls
behind because one shared false "visible" draw can lock both agents onto a
phantom node (its belief doubles every round, outrunning refutation).
"""

import numpy as np

from beliefshare import world
from beliefshare.simulate import SWEEP_MODES, _sweep_config, GraphContext, run_trial
from beliefshare.planning import PlannerContext
from beliefshare.simulate import build_agent_models


def main():
    graph = world.default_graph()
    ctx = GraphContext(graph)
    rng = np.random.default_rng(2024)
    combos = [
        ((int(rng.integers(15)), int(rng.integers(15))), int(rng.integers(15)))
        for _ in range(250)
    ]
    probe = _sweep_config(graph, (0, 0), 0, "none", 0, 20, 2, 4.0)
    planner = PlannerContext(build_agent_models(probe, ctx)[0])

    print(f"{len(combos)} sampled configurations, 20 steps, temperature 4.0\n")
    for mode in SWEEP_MODES:
        found = 0
        steps = []
        for k, (starts, obj) in enumerate(combos):
            config = _sweep_config(graph, starts, obj, mode, 9000 + k, 20, 2, 4.0)
            result = run_trial(config, ctx, None if mode == "random" else planner)
            found += result.found
            if result.found:
                steps.append(result.steps_to_find)
        rate = found / len(combos)
        mean_steps = np.mean(steps) if steps else float("nan")
        print(f"{mode:20s} find rate {rate:5.3f}   mean steps when found {mean_steps:4.1f}")


if __name__ == "__main__":
    main()
