"""Ground-truth environment: location graph, hidden object, observation draws.

Also home of the canonical tensor builders. Moving is "name a target node":
the move succeeds when the target neighbours the current node, otherwise the
agent stays put, which keeps every dynamics column exactly stochastic.
"""

import warnings
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import ShapeError
from .inference import LikelihoodTensor, TransitionTensor

LOCATION = "location"
OBJECT = "object"

LOCATION_MODALITY = "location"
VISIBILITY_MODALITY = "visibility"

VISIBLE = 0
NOT_VISIBLE = 1

# Observation noise levels of the canonical tensors.
LOCATION_ACCURACY = 0.99
DETECTION_RATE = 0.8
FALSE_POSITIVE_RATE = 0.2


@dataclass
class WorldGraph:
    """Symmetric location graph; every node is implicitly adjacent to itself."""

    n_nodes: int
    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=bool)
        if adj.shape != (self.n_nodes, self.n_nodes):
            raise ShapeError(f"adjacency must be {self.n_nodes}x{self.n_nodes}")
        adj = adj | adj.T
        np.fill_diagonal(adj, True)
        self.adjacency = adj
        if not self._connected():
            warnings.warn("world graph is not connected", stacklevel=2)

    def _connected(self) -> bool:
        seen = {0}
        frontier = [0]
        while frontier:
            node = frontier.pop()
            for nb in np.flatnonzero(self.adjacency[node]):
                if nb not in seen:
                    seen.add(int(nb))
                    frontier.append(int(nb))
        return len(seen) == self.n_nodes

    def neighbours(self, node: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[node])

    @classmethod
    def from_edges(cls, n_nodes: int, edges) -> "WorldGraph":
        adj = np.zeros((n_nodes, n_nodes), dtype=bool)
        for a, b in edges:
            adj[a, b] = adj[b, a] = True
        return cls(n_nodes, adj)

    @classmethod
    def grid(cls, rows: int, cols: int) -> "WorldGraph":
        """rows x cols lattice with 4-neighbourhood, node index = row * cols + col."""
        edges = []
        for r in range(rows):
            for c in range(cols):
                node = r * cols + c
                if c + 1 < cols:
                    edges.append((node, node + 1))
                if r + 1 < rows:
                    edges.append((node, node + cols))
        return cls.from_edges(rows * cols, edges)


def parse_graph_text(text: str) -> WorldGraph:
    """Parse the adjacency-list fixture format: one "node: nb,nb,..." line per node."""
    entries = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, tail = line.partition(":")
        node = int(head.strip())
        nbs = [int(tok) for tok in tail.replace(",", " ").split()]
        entries[node] = nbs
    if not entries:
        raise ShapeError("graph fixture is empty")
    n = max(entries) + 1
    adj = np.zeros((n, n), dtype=bool)
    for node, nbs in entries.items():
        for nb in nbs:
            if not 0 <= nb < n:
                raise ShapeError(f"neighbour {nb} of node {node} out of range")
            adj[node, nb] = adj[nb, node] = True
    return WorldGraph(n, adj)


def format_graph_text(graph: WorldGraph) -> str:
    lines = []
    for node in range(graph.n_nodes):
        nbs = [str(nb) for nb in graph.neighbours(node) if nb != node]
        lines.append(f"{node}: {','.join(nbs)}")
    return "\n".join(lines) + "\n"


def load_graph_fixture(path=None) -> WorldGraph:
    """Load a graph fixture file; with no path, the shipped 15-node grid."""
    if path is None:
        text = resources.files("beliefshare.fixtures").joinpath("default_graph.txt").read_text()
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return parse_graph_text(text)


def default_graph() -> WorldGraph:
    """The shipped 15-node world: a 3x5 grid, no diagonals."""
    return WorldGraph.grid(3, 5)


def build_B1(graph: WorldGraph) -> TransitionTensor:
    """Movement dynamics: action a jumps to node a when adjacent, else stays."""
    n = graph.n_nodes
    table = np.zeros((n, n, n))
    for a in range(n):
        for j in range(n):
            if graph.adjacency[a, j]:
                table[a, j, a] = 1.0
            else:
                table[j, j, a] = 1.0
    return TransitionTensor(LOCATION, table)


def build_B2(n_nodes: int) -> TransitionTensor:
    """Static object dynamics: the identity, indifferent to the (single) action."""
    return TransitionTensor(OBJECT, np.eye(n_nodes)[:, :, None])


def build_A1(n_nodes: int) -> LikelihoodTensor:
    """Near-identity location observation: 0.99 on the diagonal.

    The remaining 0.01 is split uniformly over the other entries so every
    column stays stochastic for any node count.
    """
    if n_nodes == 1:
        table = np.ones((1, 1))
    else:
        off = (1.0 - LOCATION_ACCURACY) / (n_nodes - 1)
        table = np.full((n_nodes, n_nodes), off)
        np.fill_diagonal(table, LOCATION_ACCURACY)
    return LikelihoodTensor(LOCATION_MODALITY, (LOCATION,), table)


def build_A2(n_nodes: int) -> LikelihoodTensor:
    """Visibility observation: P(visible) = 0.8 when co-located with the object, else 0.2."""
    table = np.empty((2, n_nodes, n_nodes))
    table[VISIBLE] = FALSE_POSITIVE_RATE
    table[NOT_VISIBLE] = 1.0 - FALSE_POSITIVE_RATE
    idx = np.arange(n_nodes)
    table[VISIBLE, idx, idx] = DETECTION_RATE
    table[NOT_VISIBLE, idx, idx] = 1.0 - DETECTION_RATE
    return LikelihoodTensor(VISIBILITY_MODALITY, (LOCATION, OBJECT), table)


@dataclass
class WorldState:
    """True environment state: where everyone is, where the object is (None = absent)."""

    agent_positions: tuple
    object_location: int | None
    t: int = 0

    def __post_init__(self):
        self.agent_positions = tuple(int(p) for p in self.agent_positions)


@dataclass
class ObservationBundle:
    """Per-agent outcome draws for one timestep."""

    location: tuple
    visibility: tuple


def env_step(state: WorldState, actions, graph: WorldGraph) -> WorldState:
    """Apply one move per agent; the object never moves."""
    new_positions = []
    for pos, action in zip(state.agent_positions, actions):
        if graph.adjacency[action, pos]:
            new_positions.append(int(action))
        else:
            new_positions.append(pos)
    return WorldState(tuple(new_positions), state.object_location, state.t + 1)


def env_observe(
    state: WorldState,
    rng: np.random.Generator,
    n_nodes: int | None = None,
    A1: LikelihoodTensor | None = None,
    A2: LikelihoodTensor | None = None,
    cum_A1: np.ndarray | None = None,
) -> ObservationBundle:
    """Draw one location and one visibility outcome per agent.

    Ground truth uses the same tensors the agents model with (pass them,
    plus optionally the column-cumulative location table, to avoid
    rebuilding). An absent object behaves like "not at the agent's node"
    everywhere, so visible draws are false positives only.
    """
    if A1 is None:
        if n_nodes is None:
            raise ShapeError("env_observe needs n_nodes when tensors are not supplied")
        A1 = build_A1(n_nodes)
    if A2 is None:
        A2 = build_A2(A1.table.shape[1])
    if cum_A1 is None:
        cum_A1 = np.cumsum(A1.table, axis=0)
    locs = []
    vis = []
    for pos in state.agent_positions:
        draw = int(np.searchsorted(cum_A1[:, pos], rng.random(), side="right"))
        locs.append(min(draw, A1.table.shape[0] - 1))
        obj = state.object_location
        if obj is None:
            # any non-matching column of the visibility table
            p_visible = float(A2.table[VISIBLE, pos, pos - 1]) if A2.table.shape[1] > 1 else 0.0
        else:
            p_visible = float(A2.table[VISIBLE, pos, obj])
        vis.append(VISIBLE if rng.random() < p_visible else NOT_VISIBLE)
    return ObservationBundle(tuple(locs), tuple(vis))
