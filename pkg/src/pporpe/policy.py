"""Diagonal Gaussian policy head: sampling, exact log-density, entropy,
and score-function gradients routed through the net's backward pass.

The actor net emits 2*d_a values per state: the first d_a are the mean,
the last d_a the log standard deviation, clamped so density ratios stay
representable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .net import GradBuffer, Mlp, backward, blend, forward

LOG_SCALE_MIN = -5.0
LOG_SCALE_MAX = 2.0
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class GaussianHead:
    mean: np.ndarray
    log_scale: np.ndarray


@dataclass
class PolicyPair:
    """Online actor plus its slowly blended baseline copy."""

    actor: Mlp
    baseline: Mlp
    polyak_rate: float = 0.01

    def __post_init__(self):
        if self.actor.layer_sizes != self.baseline.layer_sizes:
            raise ValueError("actor and baseline must share layer sizes")
        if not 0.0 < self.polyak_rate <= 1.0:
            raise ValueError("polyak_rate must lie in (0, 1]")


def head(net: Mlp, state) -> GaussianHead:
    """Evaluate the net at one state and split the output into a head."""
    out = forward(net, np.asarray(state, dtype=float))
    if out.ndim != 1 or out.size % 2:
        raise ValueError(f"policy net must emit an even-sized vector, got shape {out.shape}")
    d = out.size // 2
    return GaussianHead(mean=out[:d].copy(),
                        log_scale=np.clip(out[d:], LOG_SCALE_MIN, LOG_SCALE_MAX))


def log_prob(h: GaussianHead, action) -> float:
    a = np.asarray(action, dtype=float)
    if a.shape != h.mean.shape:
        raise ValueError("action length must match the head dimension")
    z = (a - h.mean) * np.exp(-h.log_scale)
    return float(-0.5 * np.dot(z, z) - np.sum(h.log_scale) - 0.5 * a.size * _LOG_2PI)


def sample(h: GaussianHead, rng) -> np.ndarray:
    return h.mean + np.exp(h.log_scale) * rng.standard_normal(h.mean.size)


def entropy(h: GaussianHead) -> float:
    return float(np.sum(h.log_scale) + 0.5 * h.mean.size * (1.0 + _LOG_2PI))


def gaussian_params(net: Mlp, states):
    """Batch head evaluation: (means, clamped log scales, in-range mask).

    The mask marks log-scale outputs strictly inside the clamp, where the
    clamp passes gradient through.
    """
    out = forward(net, states)
    if out.shape[1] % 2:
        raise ValueError("policy net must emit an even-sized vector")
    d = out.shape[1] // 2
    raw = out[:, d:]
    inside = (raw > LOG_SCALE_MIN) & (raw < LOG_SCALE_MAX)
    return out[:, :d], np.clip(raw, LOG_SCALE_MIN, LOG_SCALE_MAX), inside


def log_prob_batch(means, log_scales, actions):
    z = (actions - means) * np.exp(-log_scales)
    return (-0.5 * (z * z).sum(axis=1) - log_scales.sum(axis=1)
            - 0.5 * means.shape[1] * _LOG_2PI)


def score_backward(net: Mlp, state, action, coefficient, grads: GradBuffer):
    """Accumulate coefficient * d(log pi(action|state))/dparams into grads.

    coefficient is treated as a constant; callers pass the (negated)
    surrogate weight. Accepts a single state/action pair with a scalar
    coefficient, or batches with one coefficient per row.
    """
    state = np.asarray(state, dtype=float)
    action = np.asarray(action, dtype=float)
    coeff = np.atleast_1d(np.asarray(coefficient, dtype=float))
    if not np.all(np.isfinite(coeff)):
        raise ValueError("non-finite score coefficient rejected")
    states = np.atleast_2d(state)
    actions = np.atleast_2d(action)
    if coeff.size == 1 and states.shape[0] > 1:
        coeff = np.full(states.shape[0], coeff[0])
    if coeff.shape[0] != states.shape[0] or actions.shape[0] != states.shape[0]:
        raise ValueError("states, actions and coefficients must align")

    means, log_scales, inside = gaussian_params(net, states)
    if actions.shape[1] != means.shape[1]:
        raise ValueError("action width must match the head dimension")
    inv_var = np.exp(-2.0 * log_scales)
    diff = actions - means
    d_mean = diff * inv_var
    d_log_scale = np.where(inside, diff * diff * inv_var - 1.0, 0.0)
    cot = np.concatenate([d_mean, d_log_scale], axis=1) * coeff[:, None]
    backward(net, states, cot, grads)


def entropy_backward(net: Mlp, state, coefficient, grads: GradBuffer):
    """Accumulate coefficient * d(entropy)/dparams into grads.

    The Gaussian entropy depends only on the log-scale outputs, each with
    unit derivative where the clamp is inactive.
    """
    state = np.asarray(state, dtype=float)
    coeff = np.atleast_1d(np.asarray(coefficient, dtype=float))
    if not np.all(np.isfinite(coeff)):
        raise ValueError("non-finite entropy coefficient rejected")
    states = np.atleast_2d(state)
    if coeff.size == 1 and states.shape[0] > 1:
        coeff = np.full(states.shape[0], coeff[0])
    _, _, inside = gaussian_params(net, states)
    d = inside.shape[1]
    cot = np.concatenate([np.zeros((states.shape[0], d)),
                          np.where(inside, 1.0, 0.0)], axis=1) * coeff[:, None]
    backward(net, states, cot, grads)


def update_baseline(pair: PolicyPair):
    """baseline <- (1-rate)*baseline + rate*actor."""
    blend(pair.baseline, pair.actor, pair.polyak_rate)
