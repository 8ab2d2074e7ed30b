"""State-value critic: TD-error advantages and squared-TD training with a
slowly blended target network for the bootstrap."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .net import AdamState, GradBuffer, Mlp, backward, blend, forward, optimize_step
from .replay import Transition


@dataclass
class CriticPair:
    value_net: Mlp
    target_net: Mlp
    polyak_rate: float = 0.01
    gamma: float = 0.99

    def __post_init__(self):
        if self.value_net.layer_sizes != self.target_net.layer_sizes:
            raise ValueError("value and target nets must share layer sizes")
        if self.value_net.layer_sizes[-1] != 1:
            raise ValueError("critic nets must emit a single value")
        if not 0.0 < self.polyak_rate <= 1.0:
            raise ValueError("polyak_rate must lie in (0, 1]")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")


def advantage(pair: CriticPair, transition: Transition) -> float:
    """A = r + gamma * V_target(s') - V(s), with a zero bootstrap at
    terminal transitions."""
    bootstrap = 0.0
    if not transition.terminal:
        bootstrap = pair.gamma * float(forward(pair.target_net, transition.next_state)[0])
    return transition.reward + bootstrap - float(forward(pair.value_net, transition.state)[0])


def batch_advantages(pair: CriticPair, batch):
    states = np.stack([t.state for t in batch])
    next_states = np.stack([t.next_state for t in batch])
    rewards = np.array([t.reward for t in batch])
    live = np.array([0.0 if t.terminal else 1.0 for t in batch])
    v_next = forward(pair.target_net, next_states)[:, 0]
    v_now = forward(pair.value_net, states)[:, 0]
    return rewards + pair.gamma * v_next * live - v_now


def critic_step(pair: CriticPair, batch, optimizer: AdamState) -> float:
    """One descent step on the mean squared TD error; returns the
    pre-step mean loss 0.5 * mean(td^2)."""
    if not batch:
        raise ValueError("critic_step needs a nonempty batch")
    td = batch_advantages(pair, batch)
    loss = float(np.mean(0.5 * td * td))
    states = np.stack([t.state for t in batch])
    grads = GradBuffer(pair.value_net)
    # d(loss)/dV(s) = -td / n; the bootstrap comes from the frozen target
    cot = (-td / len(batch))[:, None]
    backward(pair.value_net, states, cot, grads)
    optimize_step(pair.value_net, grads, optimizer)
    return loss


def update_target(pair: CriticPair):
    """target <- (1-rate)*target + rate*value_net."""
    blend(pair.target_net, pair.value_net, pair.polyak_rate)
