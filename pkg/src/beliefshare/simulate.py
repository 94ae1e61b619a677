"""Multi-agent trial loop, the canonical scenarios, and the find-rate sweep.

One trial steps through observe -> communicate -> update -> plan -> act,
halting early once any agent standing on the object's node draws a visible
outcome. Everything is driven by one seeded generator, so a (config, seed)
pair pins the whole trajectory down to the emitted CSV bytes.

The trial loop works on raw probability vectors for speed; it mirrors the
contract operations (model.perceive, comms.broadcast_round, planning
scores) exactly, and the test suite holds the two paths to bit-identical
agreement.
"""

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import product

import numpy as np

from . import planning, world
from .comms import CommMode, SharedMessage
from .errors import ConfigError, SweepTooLarge
from .inference import MAX_SWEEPS, SWEEP_TOL, CategoricalBelief, LogMessage, floored_log
from .model import AgentModel, default_preferences

SWEEP_TRIAL_CAP = 200_000


def _softmax(z: np.ndarray) -> np.ndarray:
    # same operation order as inference.softmax, without the checks
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()

FREE = "free"
FROZEN = "frozen"

PLANNED = "plan"
RANDOM = "random"

# Sweep table labels: the three channel modes plus the no-planning baseline.
SWEEP_MODES = ("likelihood_sharing", "posterior_sharing", "none", "random")


@dataclass
class AgentSpec:
    """Start node and object-location prior of one agent."""

    start_node: int
    object_prior: np.ndarray

    def __post_init__(self):
        self.object_prior = np.asarray(self.object_prior, dtype=float)


@dataclass
class ScenarioConfig:
    """Declarative description of one experiment."""

    graph: world.WorldGraph
    agents: list
    object_location: int | None
    comm_mode: CommMode
    horizon: int = 2
    steps: int = 20
    temperature: float = 1.0
    seed: int = 42
    observe_location: bool = True
    observe_visibility: bool = True
    movement: str = FREE
    action_policy: str = PLANNED
    scripted_actions: list | None = None
    scripted_visibility: list | None = None
    visible_bonus: float = 2.0
    graph_ref: str = "default"
    record_trace: bool = True

    def __post_init__(self):
        n = self.graph.n_nodes
        if not self.agents:
            raise ConfigError("agents: need at least one agent")
        if self.steps < 1:
            raise ConfigError(f"steps: must be >= 1, got {self.steps}")
        if self.horizon < 1:
            raise ConfigError(f"horizon: must be >= 1, got {self.horizon}")
        if self.temperature <= 0:
            raise ConfigError(f"temperature: must be positive, got {self.temperature}")
        self.comm_mode = CommMode(self.comm_mode)
        if self.movement not in (FREE, FROZEN):
            raise ConfigError(f"movement: must be 'free' or 'frozen', got {self.movement!r}")
        if self.action_policy not in (PLANNED, RANDOM):
            raise ConfigError("action_policy: must be 'plan' or 'random'")
        for i, spec in enumerate(self.agents):
            if not 0 <= spec.start_node < n:
                raise ConfigError(f"agents[{i}].start_node: {spec.start_node} out of range")
            if spec.object_prior.shape != (n,):
                raise ConfigError(f"agents[{i}].object_prior: length must be {n}")
            if np.any(spec.object_prior < 0) or abs(spec.object_prior.sum() - 1.0) > 1e-9:
                raise ConfigError(f"agents[{i}].object_prior: not a normalized distribution")
        if self.object_location is not None and not 0 <= self.object_location < n:
            raise ConfigError(f"object_location: {self.object_location} out of range")
        if self.scripted_actions is not None:
            for i, seq in enumerate(self.scripted_actions):
                if len(seq) < self.steps:
                    raise ConfigError(f"scripted_actions[{i}]: shorter than steps")
                if any(not 0 <= a < n for a in seq):
                    raise ConfigError(f"scripted_actions[{i}]: action out of range")
        if self.scripted_visibility is not None:
            if not self.observe_visibility:
                raise ConfigError("scripted_visibility: requires observe_visibility on")
            for i, seq in enumerate(self.scripted_visibility):
                if len(seq) < self.steps:
                    raise ConfigError(f"scripted_visibility[{i}]: shorter than steps")
                if any(v not in (world.VISIBLE, world.NOT_VISIBLE) for v in seq):
                    raise ConfigError(f"scripted_visibility[{i}]: outcomes must be 0 or 1")

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    def config_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.graph.adjacency.tobytes())
        for spec in self.agents:
            h.update(str(spec.start_node).encode())
            h.update(np.asarray(spec.object_prior, dtype=float).tobytes())
        fields = (
            self.object_location,
            self.comm_mode.value,
            self.horizon,
            self.steps,
            self.temperature,
            self.seed,
            self.observe_location,
            self.observe_visibility,
            self.movement,
            self.action_policy,
            self.visible_bonus,
            None if self.scripted_actions is None else [list(s) for s in self.scripted_actions],
            None
            if self.scripted_visibility is None
            else [list(s) for s in self.scripted_visibility],
        )
        h.update(repr(fields).encode())
        return h.hexdigest()[:16]


@dataclass
class BeliefTrace:
    """Per-timestep record of beliefs, actions, observations and payloads.

    ``object_prior_msgs`` and ``object_likelihood_sums`` hold each agent's
    own message decomposition for the step, which is what the sharing
    identity checks compare payloads against. ``messages[t]`` is a list of
    (receiver, SharedMessage) pairs.
    """

    object_beliefs: np.ndarray
    location_beliefs: np.ndarray
    actions: np.ndarray
    observations: np.ndarray
    object_prior_msgs: np.ndarray
    object_likelihood_sums: np.ndarray
    messages: list

    @property
    def n_steps(self) -> int:
        return self.object_beliefs.shape[0]

    @property
    def n_agents(self) -> int:
        return self.object_beliefs.shape[1]


@dataclass
class TrialResult:
    found: bool
    steps_to_find: int | None
    trace: BeliefTrace | None
    config_hash: str
    seed: int


class GraphContext:
    """Canonical tensors and their log/cumulative forms for one graph."""

    def __init__(self, graph: world.WorldGraph):
        self.graph = graph
        n = graph.n_nodes
        self.A1 = world.build_A1(n)
        self.A2 = world.build_A2(n)
        self.B1 = world.build_B1(graph)
        self.B2 = world.build_B2(n)
        self.log_A1 = floored_log(self.A1.table)
        self.log_A2 = floored_log(self.A2.table)
        self.cum_A1 = np.cumsum(self.A1.table, axis=0)
        self.BT = np.ascontiguousarray(self.B1.table.transpose(2, 0, 1))
        self.B2m = np.ascontiguousarray(self.B2.table[:, :, 0])


def build_agent_models(config: ScenarioConfig, ctx: GraphContext | None = None) -> list:
    """AgentModel instances matching a config, sharing one tensor set."""
    if ctx is None:
        ctx = GraphContext(config.graph)
    prefs = default_preferences(config.graph.n_nodes, config.visible_bonus)
    models = []
    for spec in config.agents:
        loc_prior = np.zeros(config.graph.n_nodes)
        loc_prior[spec.start_node] = 1.0
        models.append(
            AgentModel(
                graph=config.graph,
                A_location=ctx.A1,
                A_visibility=ctx.A2,
                B_location=ctx.B1,
                B_object=ctx.B2,
                location_prior=CategoricalBelief(world.LOCATION, loc_prior),
                object_prior=CategoricalBelief(world.OBJECT, spec.object_prior),
                preferences=prefs,
                observe_location=config.observe_location,
                observe_visibility=config.observe_visibility,
            )
        )
    return models


def _make_planner(config: ScenarioConfig, ctx: GraphContext) -> planning.PlannerContext | None:
    if config.action_policy != PLANNED or config.movement == FROZEN:
        return None
    if config.scripted_actions is not None:
        return None
    planning.enumerate_policies(config.graph.n_nodes, config.horizon)  # enforces the cap
    return planning.PlannerContext(build_agent_models(config, ctx)[0])


def run_trial(
    config: ScenarioConfig,
    ctx: GraphContext | None = None,
    planner: planning.PlannerContext | None = None,
) -> TrialResult:
    """Execute one trial; fully deterministic given the config's seed."""
    if ctx is None:
        ctx = GraphContext(config.graph)
    if planner is None:
        planner = _make_planner(config, ctx)
    n = config.graph.n_nodes
    n_agents = config.n_agents
    mode = config.comm_mode
    rng = np.random.default_rng(config.seed)

    loc_beliefs = []
    obj_beliefs = []
    last_actions = [None] * n_agents
    for spec in config.agents:
        loc0 = np.zeros(n)
        loc0[spec.start_node] = 1.0
        loc_beliefs.append(loc0)
        obj_beliefs.append(spec.object_prior.astype(float))
    env = world.WorldState(tuple(s.start_node for s in config.agents), config.object_location)

    trace = None
    if config.record_trace:
        trace = BeliefTrace(
            object_beliefs=np.zeros((config.steps, n_agents, n)),
            location_beliefs=np.zeros((config.steps, n_agents, n)),
            actions=np.full((config.steps, n_agents), -1, dtype=int),
            observations=np.full((config.steps, n_agents, 2), -1, dtype=int),
            object_prior_msgs=np.zeros((config.steps, n_agents, n)),
            object_likelihood_sums=np.zeros((config.steps, n_agents, n)),
            messages=[],
        )

    found = False
    steps_to_find = None
    steps_run = 0
    need_env_draws = config.observe_location or (
        config.observe_visibility and config.scripted_visibility is None
    )

    for t in range(config.steps):
        steps_run = t + 1

        loc_obs = [None] * n_agents
        vis_obs = [None] * n_agents
        if need_env_draws:
            bundle = world.env_observe(env, rng, A1=ctx.A1, A2=ctx.A2, cum_A1=ctx.cum_A1)
            if config.observe_location:
                loc_obs = list(bundle.location)
            if config.observe_visibility and config.scripted_visibility is None:
                vis_obs = list(bundle.visibility)
        if config.scripted_visibility is not None:
            vis_obs = [int(config.scripted_visibility[i][t]) for i in range(n_agents)]

        # own-evidence update (mirrors model.perceive)
        prior_obj_msgs = []
        vis_msgs = []
        own_posteriors = []
        for i in range(n_agents):
            if last_actions[i] is None:
                prior_loc = floored_log(loc_beliefs[i])
                prior_obj = floored_log(obj_beliefs[i])
            else:
                prior_loc = floored_log(ctx.BT[last_actions[i]] @ loc_beliefs[i])
                prior_obj = floored_log(ctx.B2m @ obj_beliefs[i])
            loc_ev = prior_loc if loc_obs[i] is None else prior_loc + ctx.log_A1[loc_obs[i]]
            if vis_obs[i] is None:
                loc_belief = _softmax(loc_ev)
                obj_own = _softmax(prior_obj)
                vis_msg = None
            else:
                lw = ctx.log_A2[vis_obs[i]]
                loc_belief = _softmax(loc_ev)
                obj_own = _softmax(prior_obj)
                vis_msg = None
                for _ in range(MAX_SWEEPS):
                    new_loc = _softmax(loc_ev + lw @ obj_own)
                    vis_msg = new_loc @ lw
                    new_obj = _softmax(prior_obj + vis_msg)
                    delta = max(
                        np.abs(new_loc - loc_belief).max(),
                        np.abs(new_obj - obj_own).max(),
                    )
                    loc_belief, obj_own = new_loc, new_obj
                    if delta < SWEEP_TOL:
                        break
            loc_beliefs[i] = loc_belief
            prior_obj_msgs.append(prior_obj)
            vis_msgs.append(vis_msg)
            own_posteriors.append(obj_own)

        # synchronous broadcast from the own-evidence snapshot
        if mode == CommMode.NONE:
            payloads = None
        elif mode == CommMode.POSTERIOR_SHARING:
            payloads = [floored_log(q) for q in own_posteriors]
            payloads = [p - p.max() for p in payloads]
        else:
            payloads = [
                np.zeros(n) if m is None else m - m.max() for m in vis_msgs
            ]

        for i in range(n_agents):
            if payloads is None:
                obj_beliefs[i] = own_posteriors[i]
            else:
                total = prior_obj_msgs[i].copy()
                if vis_msgs[i] is not None:
                    total += vis_msgs[i]
                for j in range(n_agents):
                    if j != i:
                        total += payloads[j]
                obj_beliefs[i] = _softmax(total)

        if trace is not None:
            for i in range(n_agents):
                trace.object_beliefs[t, i] = obj_beliefs[i]
                trace.location_beliefs[t, i] = loc_beliefs[i]
                trace.observations[t, i, 0] = -1 if loc_obs[i] is None else loc_obs[i]
                trace.observations[t, i, 1] = -1 if vis_obs[i] is None else vis_obs[i]
                trace.object_prior_msgs[t, i] = prior_obj_msgs[i]
                if vis_msgs[i] is not None:
                    trace.object_likelihood_sums[t, i] = vis_msgs[i]
            round_messages = []
            if payloads is not None:
                for i in range(n_agents):
                    for j in range(n_agents):
                        if j != i:
                            round_messages.append(
                                (
                                    i,
                                    SharedMessage(
                                        j,
                                        world.OBJECT,
                                        LogMessage(world.OBJECT, payloads[j].copy()),
                                        mode,
                                    ),
                                )
                            )
            trace.messages.append(round_messages)

        if config.object_location is not None:
            for i in range(n_agents):
                if (
                    env.agent_positions[i] == config.object_location
                    and vis_obs[i] == world.VISIBLE
                ):
                    found = True
                    steps_to_find = t + 1
                    break
        if found or t == config.steps - 1:
            break

        actions = []
        for i in range(n_agents):
            if config.scripted_actions is not None:
                actions.append(int(config.scripted_actions[i][t]))
            elif config.movement == FROZEN:
                actions.append(env.agent_positions[i])
            elif config.action_policy == RANDOM:
                actions.append(int(rng.integers(n)))
            else:
                G = planner.scores(loc_beliefs[i], obj_beliefs[i], config.horizon)
                idx = planning.sample_policy_index(G, config.temperature, rng)
                actions.append(idx // n ** (config.horizon - 1))
            last_actions[i] = actions[i]
        if trace is not None:
            trace.actions[t] = actions
        env = world.env_step(env, actions, config.graph)

    if trace is not None:
        trace.object_beliefs = trace.object_beliefs[:steps_run]
        trace.location_beliefs = trace.location_beliefs[:steps_run]
        trace.actions = trace.actions[:steps_run]
        trace.observations = trace.observations[:steps_run]
        trace.object_prior_msgs = trace.object_prior_msgs[:steps_run]
        trace.object_likelihood_sums = trace.object_likelihood_sums[:steps_run]

    return TrialResult(found, steps_to_find, trace, config.config_hash(), config.seed)


# ---------------------------------------------------------------------------
# Canonical scenarios


def bumped_prior(n_nodes: int, nodes, ratio: float = 2.0) -> np.ndarray:
    """Uniform prior with the given nodes lifted to ``ratio`` times base mass."""
    p = np.ones(n_nodes)
    p[list(nodes)] = ratio
    return p / p.sum()


def peaked_prior(n_nodes: int, node: int, mass: float = 0.95) -> np.ndarray:
    """Prior with ``mass`` on one node and the rest spread uniformly."""
    p = np.full(n_nodes, (1.0 - mass) / (n_nodes - 1))
    p[node] = mass
    return p


def echo_chamber_config(
    mode: CommMode,
    steps: int = 10,
    bump_nodes=(11, 13),
    bump_ratio: float = 2.0,
    start_nodes=(5, 9),
    seed: int = 42,
    graph: world.WorldGraph | None = None,
) -> ScenarioConfig:
    """Two frozen agents, visibility masked, matching priors lifted at two nodes.

    With nothing to observe, any belief motion can only come from the
    communication channel.
    """
    if graph is None:
        graph = world.default_graph()
    prior = bumped_prior(graph.n_nodes, bump_nodes, bump_ratio)
    return ScenarioConfig(
        graph=graph,
        agents=[AgentSpec(s, prior.copy()) for s in start_nodes],
        object_location=None,
        comm_mode=mode,
        steps=steps,
        observe_visibility=False,
        movement=FROZEN,
        seed=seed,
    )


def scenario_echo_chamber(mode: CommMode, **kwargs) -> BeliefTrace:
    return run_trial(echo_chamber_config(mode, **kwargs)).trace


def self_doubt_config(
    mode: CommMode,
    steps: int = 15,
    peak_node: int = 1,
    peak_mass: float = 0.95,
    n_agents: int = 4,
    start_nodes=(0, 4, 10, 14),
    scripted: bool = False,
    seed: int = 42,
    graph: world.WorldGraph | None = None,
) -> ScenarioConfig:
    """Four agents sharing a strong wrong prior about one node; no object there.

    The scripted variant pins every agent to the believed node drawing
    "not visible" forever, isolating the channel's response to clean
    contradicting evidence.
    """
    if graph is None:
        graph = world.default_graph()
    prior = peaked_prior(graph.n_nodes, peak_node, peak_mass)
    if scripted:
        starts = [peak_node] * n_agents
        return ScenarioConfig(
            graph=graph,
            agents=[AgentSpec(s, prior.copy()) for s in starts],
            object_location=None,
            comm_mode=mode,
            steps=steps,
            observe_location=False,
            scripted_actions=[[peak_node] * steps] * n_agents,
            scripted_visibility=[[world.NOT_VISIBLE] * steps] * n_agents,
            seed=seed,
        )
    return ScenarioConfig(
        graph=graph,
        agents=[AgentSpec(s, prior.copy()) for s in start_nodes[:n_agents]],
        object_location=None,
        comm_mode=mode,
        steps=steps,
        seed=seed,
    )


def scenario_self_doubt(mode: CommMode, **kwargs) -> BeliefTrace:
    return run_trial(self_doubt_config(mode, **kwargs)).trace


# ---------------------------------------------------------------------------
# Find-rate sweep


@dataclass
class TrialRow:
    trial_id: int
    mode: str
    agent_starts: tuple
    object_location: int
    seed: int
    found: bool
    steps_to_find: int | None


@dataclass
class SweepResult:
    rows: list
    aggregates: dict  # mode -> (find_rate, stderr, n_trials)
    master_seed: int
    repeats: int


def trial_seed(master_seed: int, trial_index: int) -> int:
    """Deterministic per-trial seed; identical for serial and parallel runs."""
    return int(np.random.SeedSequence([master_seed, trial_index]).generate_state(1)[0])


def _sweep_config(
    graph: world.WorldGraph,
    starts: tuple,
    object_location: int,
    mode: str,
    seed: int,
    steps: int,
    horizon: int,
    temperature: float,
) -> ScenarioConfig:
    n = graph.n_nodes
    uniform = np.ones(n) / n
    comm = CommMode.NONE if mode == RANDOM else CommMode(mode)
    return ScenarioConfig(
        graph=graph,
        agents=[AgentSpec(s, uniform.copy()) for s in starts],
        object_location=object_location,
        comm_mode=comm,
        horizon=horizon,
        steps=steps,
        temperature=temperature,
        seed=seed,
        action_policy=RANDOM if mode == RANDOM else PLANNED,
        record_trace=False,
    )


_WORKER_CTX = {}


def _sweep_worker_init(graph_adj, steps, horizon, temperature):
    graph = world.WorldGraph(graph_adj.shape[0], graph_adj)
    ctx = GraphContext(graph)
    probe = _sweep_config(
        graph, (0,), 0, "none", 0, steps, horizon, temperature
    )
    _WORKER_CTX["graph"] = graph
    _WORKER_CTX["ctx"] = ctx
    _WORKER_CTX["planner"] = planning.PlannerContext(build_agent_models(probe, ctx)[0])
    _WORKER_CTX["steps"] = steps
    _WORKER_CTX["horizon"] = horizon
    _WORKER_CTX["temperature"] = temperature


def _sweep_worker_run(batch):
    out = []
    for trial_id, mode, starts, obj, seed in batch:
        config = _sweep_config(
            _WORKER_CTX["graph"],
            starts,
            obj,
            mode,
            seed,
            _WORKER_CTX["steps"],
            _WORKER_CTX["horizon"],
            _WORKER_CTX["temperature"],
        )
        planner = None if mode == RANDOM else _WORKER_CTX["planner"]
        result = run_trial(config, _WORKER_CTX["ctx"], planner)
        out.append(
            TrialRow(trial_id, mode, starts, obj, seed, result.found, result.steps_to_find)
        )
    return out


def run_sweep(
    modes=SWEEP_MODES,
    repeats: int = 5,
    graph: world.WorldGraph | None = None,
    n_agents: int = 2,
    steps: int = 20,
    horizon: int = 2,
    temperature: float = 1.0,
    master_seed: int = 42,
    jobs: int = 1,
    cap: int = SWEEP_TRIAL_CAP,
) -> SweepResult:
    """Find rates over every (agent starts, object location) combination.

    Each combination runs ``repeats`` seeded trials per mode; the same
    trial seed is paired across modes so mode comparisons share their
    random draws. "random" is the no-planning baseline.
    """
    if repeats < 1:
        raise ConfigError("repeats: must be >= 1")
    if graph is None:
        graph = world.default_graph()
    n = graph.n_nodes
    combos = [
        (starts, obj)
        for starts in product(range(n), repeat=n_agents)
        for obj in range(n)
    ]
    total = len(combos) * repeats * len(modes)
    if total > cap:
        raise SweepTooLarge(f"{total} trials exceed the cap of {cap}")

    # Enumerate deterministically: modes outer, then combo, then repeat.
    tasks = []
    trial_id = 0
    for mode in modes:
        paired_index = 0
        for starts, obj in combos:
            for _ in range(repeats):
                tasks.append((trial_id, mode, starts, obj, trial_seed(master_seed, paired_index)))
                trial_id += 1
                paired_index += 1

    if jobs > 1:
        chunks = [tasks[i::jobs] for i in range(jobs)]
        rows = []
        with ProcessPoolExecutor(
            max_workers=jobs,
            initializer=_sweep_worker_init,
            initargs=(graph.adjacency, steps, horizon, temperature),
        ) as pool:
            for part in pool.map(_sweep_worker_run, chunks):
                rows.extend(part)
        rows.sort(key=lambda r: r.trial_id)
    else:
        _sweep_worker_init(graph.adjacency, steps, horizon, temperature)
        rows = _sweep_worker_run(tasks)

    aggregates = {}
    for mode in modes:
        outcomes = np.array([r.found for r in rows if r.mode == mode], dtype=float)
        rate = float(outcomes.mean())
        stderr = float(np.sqrt(rate * (1.0 - rate) / outcomes.size))
        aggregates[mode] = (rate, stderr, int(outcomes.size))
    return SweepResult(rows, aggregates, master_seed, repeats)
