"""FIFO experience replay with uniform (with-replacement) sampling."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Transition:
    """One environment step. behavior_log_prob is the collection-time
    log-density of the action under the baseline policy, kept only for
    diagnostics; updates recompute densities from the current nets."""

    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    terminal: bool
    behavior_log_prob: float = 0.0

    def __post_init__(self):
        self.state = np.asarray(self.state, dtype=float)
        self.action = np.asarray(self.action, dtype=float)
        self.next_state = np.asarray(self.next_state, dtype=float)
        self.reward = float(self.reward)
        if not math.isfinite(self.reward):
            raise ValueError("reward must be finite")
        self.terminal = bool(self.terminal)
        self.behavior_log_prob = float(self.behavior_log_prob)


class ReplayBuffer:
    def __init__(self, capacity, rng=None):
        capacity = int(capacity)
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.storage = deque(maxlen=capacity)
        self.rng = rng if rng is not None else np.random.default_rng()

    def __len__(self):
        return len(self.storage)

    def push(self, transition: Transition):
        self.storage.append(transition)

    def sample(self, n):
        """n uniform draws with replacement; reproducible under the owned rng."""
        n = int(n)
        if n <= 0:
            raise ValueError("sample size must be positive")
        if not self.storage:
            raise ValueError("cannot sample from an empty buffer")
        idx = self.rng.integers(0, len(self.storage), size=n)
        return [self.storage[i] for i in idx]
