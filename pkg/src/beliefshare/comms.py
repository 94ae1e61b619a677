"""Inter-agent message construction, broadcast, and integration.

Two live channels plus a silent baseline. Posterior sharing transmits the
sender's full current object posterior (prior included); likelihood sharing
transmits only what the sender's own observations said this timestep, so a
round with no new evidence moves nobody. Payloads are log-vectors shifted
to max entry zero, which the softmax downstream cannot tell apart from the
unshifted ones.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import world
from .errors import ShapeError
from .inference import CategoricalBelief, LogMessage, floored_log, vmp_update
from .model import PerceptionUpdate


class CommMode(str, Enum):
    NONE = "none"
    POSTERIOR_SHARING = "posterior_sharing"
    LIKELIHOOD_SHARING = "likelihood_sharing"


@dataclass
class SharedMessage:
    """One agent-to-agent payload over the object factor."""

    sender: int
    factor_id: str
    payload: LogMessage
    mode_tag: CommMode

    def __post_init__(self):
        if self.mode_tag == CommMode.NONE:
            raise ShapeError("a shared message cannot carry the 'none' mode")
        if self.payload.factor_id != self.factor_id:
            raise ShapeError("payload factor differs from message factor")


def _max_normalized(logits: np.ndarray) -> np.ndarray:
    return logits - logits.max()


def compose_posterior_message(sender: int, object_posterior: CategoricalBelief) -> SharedMessage:
    """Share the sender's full object posterior as a log payload.

    Because the posterior is the softmax of (prior message + own likelihood
    messages), this payload equals that sum up to an additive constant, so
    the receiver ends up counting the sender's prior as if it were evidence.
    """
    logits = _max_normalized(floored_log(object_posterior.probs))
    return SharedMessage(
        sender, object_posterior.factor_id, LogMessage(object_posterior.factor_id, logits),
        CommMode.POSTERIOR_SHARING,
    )


def compose_likelihood_message(
    sender: int, object_likelihoods: list, n_nodes: int
) -> SharedMessage:
    """Share only the sender's observation-derived object messages.

    With no active observation this timestep the payload is the zero
    vector, which is exactly no influence on the receiver.
    """
    total = np.zeros(n_nodes)
    for msg in object_likelihoods:
        if msg.factor_id != world.OBJECT:
            raise ShapeError("likelihood sharing transmits object-factor messages only")
        total = total + msg.logits
    return SharedMessage(
        sender, world.OBJECT, LogMessage(world.OBJECT, _max_normalized(total)),
        CommMode.LIKELIHOOD_SHARING,
    )


def broadcast_round(updates: list, mode: CommMode) -> list:
    """All-to-all exchange from one synchronous snapshot of every agent.

    ``updates`` holds each agent's own-evidence PerceptionUpdate; the return
    value gives, per receiving agent, the messages from everyone else. Mode
    "none" yields empty lists.
    """
    n = len(updates)
    if mode == CommMode.NONE:
        return [[] for _ in range(n)]
    outgoing = []
    for sender, upd in enumerate(updates):
        if mode == CommMode.POSTERIOR_SHARING:
            outgoing.append(compose_posterior_message(sender, upd.object))
        else:
            outgoing.append(
                compose_likelihood_message(sender, upd.object_likelihoods, len(upd.object))
            )
    return [
        [outgoing[sender] for sender in range(n) if sender != receiver]
        for receiver in range(n)
    ]


def integrate_shared(
    prior_msg: LogMessage, own_likelihoods: list, shared: list
) -> CategoricalBelief:
    """Final object update: own messages plus every shared payload, one softmax."""
    return vmp_update(prior_msg, list(own_likelihoods) + [m.payload for m in shared])


def integrated_object_belief(update: PerceptionUpdate, shared: list) -> CategoricalBelief:
    """Convenience wrapper applying integrate_shared to a perception bundle."""
    return integrate_shared(update.object_prior_msg, update.object_likelihoods, shared)
