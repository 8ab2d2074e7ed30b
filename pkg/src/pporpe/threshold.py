"""Adaptive threshold estimation from observed relative-ratio deviations.

Tracks a decayed running maximum of |rho_beta - 1| (delta_max), smooths it
into delta, and emits epsilon = kappa * clamp(delta). The epsilon for an
update is always read before that update's deviations are folded in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ThresholdState:
    """Running error-scale estimate and its hyperparameters.

    delta starts at the theoretical maximum 1, delta_max at 0 (no prior
    information). lam smooths both updates, kappa scales the emitted
    threshold, delta_lower/upper clamp the estimate for stability.
    per_sample applies the two-step update once per deviation instead of
    once per observed batch.
    """

    delta: float = 1.0
    delta_max: float = 0.0
    lam: float = 0.999
    kappa: float = 0.5
    delta_lower: float = 0.1
    per_sample: bool = False

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise ValueError("lam must lie in (0, 1)")
        if not 0.0 < self.kappa < 1.0:
            raise ValueError("kappa must lie in (0, 1)")
        if not 0.0 < self.delta_lower < 0.5:
            raise ValueError("delta_lower must lie in (0, 0.5)")
        if self.delta_max < 0.0:
            raise ValueError("delta_max must be nonnegative")

    @property
    def delta_upper(self) -> float:
        return 1.0 - self.delta_lower


def current_epsilon(state: ThresholdState) -> float:
    """kappa * max(min(delta, delta_upper), delta_lower), from the current
    delta, before any observation of this step."""
    return state.kappa * max(min(state.delta, state.delta_upper), state.delta_lower)


def observe(state: ThresholdState, deviations):
    """Fold a batch of |rho_beta - 1| values into the running estimate.

    One decay of delta_max and one delta update per call (using the batch
    maximum), so the result is independent of intra-batch order. An empty
    batch leaves the state untouched.
    """
    devs = np.atleast_1d(np.asarray(deviations, dtype=float))
    if devs.size == 0:
        return
    if np.any(devs < 0.0):
        raise ValueError("deviations must be nonnegative")
    if state.per_sample:
        for d in devs:
            state.delta_max = max(state.lam * state.delta_max, float(d))
            state.delta = state.lam * state.delta + (1.0 - state.lam) * state.delta_max
    else:
        state.delta_max = max(state.lam * state.delta_max, float(devs.max()))
        state.delta = state.lam * state.delta + (1.0 - state.lam) * state.delta_max
