"""Policy enumeration, expected free energy, and stochastic action choice.

A policy is a fixed-length tuple of move targets. Its score combines the
information expected from predicted observations with how much those
observations are preferred; actions are sampled from a softmax over the
negated scores and re-planned every timestep.
"""

from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.special import xlogy

from . import world
from .errors import EmptyInput, PolicySpaceTooLarge, ShapeError
from .inference import kl_divergence, normalize, softmax

POLICY_CAP = 10_000


@dataclass
class PreferenceModel:
    """Per-modality log-preference vectors over outcomes, in nats."""

    log_preferences: dict

    def __post_init__(self):
        clean = {}
        for modality, vec in self.log_preferences.items():
            vec = np.asarray(vec, dtype=float)
            if not np.all(np.isfinite(vec)):
                raise ShapeError(f"preference vector for {modality!r} has non-finite entries")
            clean[modality] = vec
        self.log_preferences = clean

    def vector(self, modality: str, n_outcomes: int) -> np.ndarray:
        vec = self.log_preferences.get(modality)
        if vec is None:
            return np.zeros(n_outcomes)
        if vec.size != n_outcomes:
            raise ShapeError(f"preference vector for {modality!r} has wrong length")
        return vec


@dataclass
class EFEBreakdown:
    """Score of one policy: G = -info_gain - utility (lower is better)."""

    policy: tuple
    info_gain: float
    utility: float

    @property
    def G(self) -> float:
        return -self.info_gain - self.utility


def enumerate_policies(n_actions: int, horizon: int, cap: int = POLICY_CAP) -> list:
    """All action sequences of the given length, in lexicographic order."""
    if horizon < 1 or n_actions < 1:
        raise EmptyInput("horizon and action count must be at least 1")
    count = n_actions**horizon
    if count > cap:
        raise PolicySpaceTooLarge(f"{count} policies exceed the cap of {cap}")
    return list(product(range(n_actions), repeat=horizon))


def rollout_predict(model, beliefs, policy) -> tuple:
    """Predicted per-step state beliefs and observation distributions under a policy.

    Returns (states, observations): two lists with one entry per step,
    ``states[t]`` mapping factor id to a belief vector and
    ``observations[t]`` mapping modality id to an outcome distribution.
    """
    loc = beliefs.location.probs.copy()
    obj = beliefs.object.probs.copy()
    states = []
    observations = []
    for action in policy:
        loc = model.B_location.table[:, :, action] @ loc
        obj = model.B_object.table[:, :, 0] @ obj
        states.append({world.LOCATION: loc, world.OBJECT: obj})
        obs = {}
        if model.observe_visibility:
            obs[world.VISIBILITY_MODALITY] = np.einsum(
                "vij,i,j->v", model.A_visibility.table, loc, obj
            )
        if model.observe_location:
            obs[world.LOCATION_MODALITY] = model.A_location.table @ loc
        observations.append(obs)
    return states, observations


def expected_free_energy(model, beliefs, policy, prefs: PreferenceModel | None = None) -> EFEBreakdown:
    """Score one policy by explicit enumeration over predicted outcomes.

    Information gain is the expected KL from predicted-state prior to the
    posterior given each possible outcome (joint over both factors for the
    visibility modality); utility is the preference-weighted outcome
    probability. The shared modality never enters the rollout.
    """
    if prefs is None:
        prefs = model.preferences
    states, observations = rollout_predict(model, beliefs, policy)
    info_gain = 0.0
    utility = 0.0
    for state, obs_dists in zip(states, observations):
        loc = state[world.LOCATION]
        obj = state[world.OBJECT]
        if world.VISIBILITY_MODALITY in obs_dists:
            q_o = obs_dists[world.VISIBILITY_MODALITY]
            joint_prior = np.outer(loc, obj)
            for v in range(model.A_visibility.n_outcomes):
                if q_o[v] <= 0:
                    continue
                joint_post = normalize(model.A_visibility.table[v] * joint_prior)
                info_gain += q_o[v] * kl_divergence(joint_post.ravel(), joint_prior.ravel())
            utility += float(
                q_o @ prefs.vector(world.VISIBILITY_MODALITY, model.A_visibility.n_outcomes)
            )
        if world.LOCATION_MODALITY in obs_dists:
            q_o = obs_dists[world.LOCATION_MODALITY]
            for o in range(model.A_location.n_outcomes):
                if q_o[o] <= 0:
                    continue
                post = normalize(model.A_location.table[o] * loc)
                info_gain += q_o[o] * kl_divergence(post, loc)
            utility += float(
                q_o @ prefs.vector(world.LOCATION_MODALITY, model.A_location.n_outcomes)
            )
    return EFEBreakdown(tuple(policy), info_gain, utility)


def efe_table(model, beliefs, policies, prefs: PreferenceModel | None = None) -> tuple:
    """Vectorized scores for a batch of policies.

    Returns (G, info_gain, utility) arrays aligned with ``policies``. Uses
    the identity  E_o KL(post || prior) = sum_o sum_s prior(s) A(o|s) log A(o|s)
    + H(Q(o)),  so each step costs a few small matrix products.
    """
    if prefs is None:
        prefs = model.preferences
    actions = np.asarray(policies, dtype=int)
    if actions.size == 0:
        raise EmptyInput("no policies to evaluate")
    n_pol, horizon = actions.shape

    A2 = model.A_visibility.table
    A1 = model.A_location.table
    # Per-action transition matrices indexed as [action, next, prev].
    BT = np.ascontiguousarray(model.B_location.table.transpose(2, 0, 1))
    c_vis = prefs.vector(world.VISIBILITY_MODALITY, A2.shape[0])
    c_loc = prefs.vector(world.LOCATION_MODALITY, A1.shape[0])
    w_vis = xlogy(A2, A2).sum(axis=0)  # (N, N): sum_v A2 log A2
    w_loc = xlogy(A1, A1).sum(axis=0)  # (N,)

    locs = np.broadcast_to(beliefs.location.probs, (n_pol, A1.shape[1])).copy()
    obj = beliefs.object.probs.copy()

    info_gain = np.zeros(n_pol)
    utility = np.zeros(n_pol)
    for t in range(horizon):
        locs = np.einsum("pij,pj->pi", BT[actions[:, t]], locs)
        obj = model.B_object.table[:, :, 0] @ obj
        if model.observe_visibility:
            m = A2 @ obj  # (2, N): P(v | agent at i)
            q_v = locs @ m.T  # (P, 2)
            info_gain += locs @ (w_vis @ obj) - xlogy(q_v, q_v).sum(axis=1)
            utility += q_v @ c_vis
        if model.observe_location:
            q_l = locs @ A1.T  # (P, N)
            info_gain += locs @ w_loc - xlogy(q_l, q_l).sum(axis=1)
            utility += q_l @ c_loc
    return -info_gain - utility, info_gain, utility


class PlannerContext:
    """Precomputed planning arrays for one graph and preference setting.

    Scores the full lexicographic policy product without per-call tensor
    rebuilds; ``scores()`` agrees with ``efe_table`` on that product.
    """

    def __init__(self, model, prefs: PreferenceModel | None = None):
        if prefs is None:
            prefs = model.preferences
        A2 = model.A_visibility.table
        A1 = model.A_location.table
        self.n_actions = model.B_location.n_actions
        self.A1 = A1
        self.A1T = np.ascontiguousarray(A1.T)
        self.A2 = A2
        self.BT = np.ascontiguousarray(model.B_location.table.transpose(2, 0, 1))
        self.BT_flat = self.BT.reshape(-1, self.BT.shape[2])
        self.B2m = np.ascontiguousarray(model.B_object.table[:, :, 0])
        self.w_vis = xlogy(A2, A2).sum(axis=0)
        self.w_loc = xlogy(A1, A1).sum(axis=0)
        self.c_vis = prefs.vector(world.VISIBILITY_MODALITY, A2.shape[0])
        self.c_loc = prefs.vector(world.LOCATION_MODALITY, A1.shape[0])
        self.has_c_loc = bool(np.any(self.c_loc))
        self.observe_visibility = model.observe_visibility
        self.observe_location = model.observe_location

    def _step_scores(self, locs: np.ndarray, obj: np.ndarray) -> np.ndarray:
        """-(info gain + utility) of one predicted step for a batch of location beliefs."""
        # expected-log terms of both modalities collapse into one vector
        u = np.zeros(locs.shape[1])
        score = np.zeros(locs.shape[0])
        if self.observe_visibility:
            u += self.w_vis @ obj
            q_v = locs @ (self.A2 @ obj).T
            score += xlogy(q_v, q_v).sum(axis=1)
            score -= q_v @ self.c_vis
        if self.observe_location:
            u += self.w_loc
            q_l = locs @ self.A1T
            score += xlogy(q_l, q_l).sum(axis=1)
            if self.has_c_loc:
                score -= q_l @ self.c_loc
        score -= locs @ u
        return score

    def scores(self, loc: np.ndarray, obj: np.ndarray, horizon: int) -> np.ndarray:
        """G over all n_actions**horizon policies in lexicographic order."""
        n = self.n_actions
        locs = (self.BT_flat @ loc).reshape(n, -1)
        obj = self.B2m @ obj
        G = self._step_scores(locs, obj)
        for _ in range(1, horizon):
            # grow the batch: every current trajectory extended by every action
            locs = np.tensordot(locs, self.BT, axes=([1], [2])).reshape(-1, locs.shape[1])
            obj = self.B2m @ obj
            G = np.repeat(G, n) + self._step_scores(locs, obj)
        return G


def sample_policy_index(G: np.ndarray, temperature: float, rng: np.random.Generator) -> int:
    """Sample a policy index from softmax(-temperature * G) by inverse CDF."""
    if G.size == 0:
        raise EmptyInput("no policy scores to sample from")
    if temperature <= 0:
        raise ShapeError("temperature must be positive")
    cum = np.cumsum(softmax(-temperature * G))
    idx = int(np.searchsorted(cum, rng.random(), side="right"))
    return min(idx, G.size - 1)


def select_action(
    efes: list,
    temperature: float,
    rng: np.random.Generator,
    mode: str = "sample",
) -> int:
    """First action of a policy drawn from softmax(-temperature * G).

    ``mode="greedy"`` instead takes the lowest-G policy, ties broken by
    lowest index, which is handy for deterministic tests.
    """
    if not efes:
        raise EmptyInput("no policies to select from")
    G = np.array([e.G for e in efes])
    if mode == "greedy":
        idx = int(np.argmin(G))
    else:
        idx = sample_policy_index(G, temperature, rng)
    return int(efes[idx].policy[0])
