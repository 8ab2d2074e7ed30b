"""Density-ratio mathematics for the regularized surrogate objectives.

Four methods share one gradient path:

  ppo_clip      rho*A with the ratio clipped once sigma*(rho-1) >= epsilon
  ppo_rb        same, but the clipped branch rolls back with slope -eta
  rpe_fixed     rho*A minus a relative-ratio penalty whose gain is set so
                the per-sample objective peaks exactly at the threshold
  rpe_adaptive  rpe with epsilon supplied per update by the threshold
                estimator instead of a fixed constant

The relative ratio rho_beta = rho / (beta*rho + 1 - beta) lives in
[0, 1/beta) and is symmetric about 1 when beta = 0.5, which is what makes
a symmetric threshold (and its adaptive estimation) meaningful.

All math functions below are numpy ufunc style: they take scalars or
arrays elementwise and never mutate state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

METHODS = ("ppo_clip", "ppo_rb", "rpe_fixed", "rpe_adaptive")
DEFAULT_LOG_RATIO_CLAMP = 20.0

# rpe methods reject beta outside this band at construction time
RPE_BETA_MIN = 0.1
RPE_BETA_MAX = 0.9


def _sign(advantage):
    # sign convention: sign(0) = +1 (harmless, the gain is 0 when A = 0)
    return np.where(np.asarray(advantage, dtype=float) >= 0.0, 1.0, -1.0)


def gain_denominator(epsilon, sigma, beta):
    """beta*sigma*eps^2 + 2*eps*(1 - beta*(1 + sigma*eps)).

    Must be strictly positive for the gain to exist; checked at config
    construction for every epsilon the run can reach.
    """
    epsilon = np.asarray(epsilon, dtype=float)
    return beta * sigma * epsilon ** 2 + 2.0 * epsilon * (1.0 - beta * (1.0 + sigma * epsilon))


@dataclass(frozen=True)
class SurrogateConfig:
    """Method selector plus the parameters of the chosen objective.

    epsilon is the fixed threshold (ignored by rpe_adaptive, which reads
    it from the threshold estimator each update); epsilon_max bounds the
    adaptive threshold and is what the denominator guard checks there.
    gain_scale multiplies the regularization gain; 0 turns the ratio
    penalty off entirely (diagnostic ablation, not exposed on the CLI).
    """

    method: str = "rpe_adaptive"
    beta: float = 0.5
    epsilon: float = 0.1
    eta: float = 0.3
    log_ratio_clamp: float = DEFAULT_LOG_RATIO_CLAMP
    epsilon_max: float = 0.45
    gain_scale: float = 1.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(
                f"unknown method {self.method!r}; valid methods: {', '.join(METHODS)}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.eta < 0.0:
            raise ValueError("eta must be nonnegative")
        if self.log_ratio_clamp <= 0.0:
            raise ValueError("log_ratio_clamp must be positive")
        if not 0.0 < self.epsilon_max < 1.0:
            raise ValueError("epsilon_max must lie in (0, 1)")
        if self.gain_scale < 0.0:
            raise ValueError("gain_scale must be nonnegative")
        if self.method in ("rpe_fixed", "rpe_adaptive"):
            reach = self.epsilon if self.method == "rpe_fixed" else self.epsilon_max
            for sigma in (1.0, -1.0):
                if gain_denominator(reach, sigma, self.beta) <= 0.0:
                    raise ValueError(
                        f"gain denominator not positive at beta={self.beta}, "
                        f"epsilon={reach}, sigma={int(sigma)}; reduce beta or the threshold")
            if not RPE_BETA_MIN <= self.beta <= RPE_BETA_MAX:
                raise ValueError(
                    f"beta must lie in [{RPE_BETA_MIN}, {RPE_BETA_MAX}] for rpe methods")


@dataclass(frozen=True)
class RatioPoint:
    """One sample's ratio coordinates: rho, rho_beta, advantage, sign(A)."""

    rho: float
    rho_beta: float
    advantage: float
    sigma: float


def ratio_point(rho, advantage, beta) -> RatioPoint:
    return RatioPoint(rho=float(rho),
                      rho_beta=float(relative_ratio(rho, beta)),
                      advantage=float(advantage),
                      sigma=float(_sign(advantage)))


def density_ratio(logpi, logb, clamp=DEFAULT_LOG_RATIO_CLAMP):
    """exp of the log-density difference, clamped to +-clamp before exp."""
    diff = np.clip(np.asarray(logpi, dtype=float) - np.asarray(logb, dtype=float),
                   -clamp, clamp)
    return np.exp(diff)


def relative_ratio(rho, beta):
    """rho / (beta*rho + 1 - beta): the ratio against the mixture density."""
    rho = np.asarray(rho, dtype=float)
    if beta == 1.0 and np.any(rho == 0.0):
        raise ValueError("relative ratio undefined at beta=1 with rho=0")
    return rho / (beta * rho + 1.0 - beta)


def threshold_ratios(epsilon, sigma, beta):
    """Threshold coordinates (rho_beta_eps, rho_eps) for one advantage sign.

    rho_beta_eps = 1 + sigma*epsilon; rho_eps is its preimage under the
    relative ratio, asymmetric in rho for beta > 0.
    """
    denom = 1.0 - beta * (1.0 + sigma * epsilon)
    if denom <= 0.0:
        raise ValueError(
            f"threshold undefined: 1 - beta*(1 + sigma*epsilon) = {denom} <= 0")
    rho_beta_eps = 1.0 + sigma * epsilon
    return rho_beta_eps, 1.0 + sigma * epsilon / denom


def gain(advantage, epsilon, beta):
    """Regularization gain making the objective peak at the threshold:

        C = |A| / (beta*sigma*eps^2 + 2*eps*(1 - beta*(1 + sigma*eps)))
    """
    sigma = _sign(advantage)
    denom = gain_denominator(epsilon, sigma, beta)
    if np.any(denom <= 0.0):
        raise ValueError("gain denominator must be positive; check (beta, epsilon)")
    return np.abs(np.asarray(advantage, dtype=float)) / denom


def a_tilde_rpe(rho, advantage, epsilon, beta, gain_scale=1.0):
    """Analytic derivative of the per-sample objective rho*A_rpe w.r.t. rho:

        A - C*(rho_beta - 1)*(beta*(rho_beta - 1) + 2*(1-beta)*rho_beta/rho)

    Equals A at rho = 1 and crosses zero exactly at rho_eps.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0.0):
        raise ValueError("a_tilde_rpe requires rho > 0")
    c = gain(advantage, epsilon, beta) * gain_scale
    rb = relative_ratio(rho, beta)
    dev = rb - 1.0
    return advantage - c * dev * (beta * dev + 2.0 * (1.0 - beta) * rb / rho)


def rho_ppo(rho, advantage, epsilon, eta):
    """Clipped/rolled-back ratio: identity inside the trust region,
    -eta*rho + (1+eta)*(1+sigma*eps) once sigma*(rho-1) >= eps."""
    rho = np.asarray(rho, dtype=float)
    sigma = _sign(advantage)
    outside = sigma * (rho - 1.0) >= epsilon
    edge = 1.0 + sigma * epsilon
    return np.where(outside, -eta * rho + (1.0 + eta) * edge, rho)


def omega_ppo(rho, advantage, epsilon, eta):
    """Implied per-sample penalty of the clipped objective:
    A*(1+eta)*(1 - (1+sigma*eps)/rho) outside the region, else 0.
    Satisfies rho*(A - omega) = rho_ppo*A identically."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0.0):
        raise ValueError("omega_ppo requires rho > 0")
    sigma = _sign(advantage)
    outside = sigma * (rho - 1.0) >= epsilon
    edge = 1.0 + sigma * epsilon
    adv = np.asarray(advantage, dtype=float)
    return np.where(outside, adv * (1.0 + eta) * (1.0 - edge / rho), 0.0)


def _effective_eta(config: SurrogateConfig):
    return config.eta if config.method == "ppo_rb" else 0.0


def negative_loss(rho, advantage, config: SurrogateConfig, epsilon_now):
    """Per-sample negative loss (the maximized objective) at the given rho.

    ppo methods: rho_ppo * A.  rpe methods: rho*A - C*(1-beta+beta*rho)
    * (rho_beta - 1)^2.
    """
    rho = np.asarray(rho, dtype=float)
    adv = np.asarray(advantage, dtype=float)
    if config.method in ("ppo_clip", "ppo_rb"):
        return rho_ppo(rho, adv, epsilon_now, _effective_eta(config)) * adv
    beta = config.beta
    c = gain(adv, epsilon_now, beta) * config.gain_scale
    dev = relative_ratio(rho, beta) - 1.0
    return rho * adv - c * (1.0 - beta + beta * rho) * dev * dev


def batch_coefficients(rho, advantage, config: SurrogateConfig, epsilon_now):
    """Per-sample weight w with gradient contribution -w * grad(log pi).

    w is the exact derivative of the method's negative per-sample loss
    with respect to log pi, i.e. rho times the slope in rho.
    """
    rho = np.asarray(rho, dtype=float)
    adv = np.asarray(advantage, dtype=float)
    if config.method in ("rpe_fixed", "rpe_adaptive"):
        return rho * a_tilde_rpe(rho, adv, epsilon_now, config.beta, config.gain_scale)
    if config.method in ("ppo_clip", "ppo_rb"):
        sigma = _sign(adv)
        outside = sigma * (rho - 1.0) >= epsilon_now
        slope = np.where(outside, -_effective_eta(config), 1.0)
        return rho * adv * slope
    raise ValueError(f"unknown method {config.method!r}")


def surrogate_coefficient(point: RatioPoint, config: SurrogateConfig, epsilon_now):
    """Scalar form of batch_coefficients for one ratio point."""
    return float(batch_coefficients(point.rho, point.advantage, config, epsilon_now))


def pearson_divergence_estimate(log_ratios, clamp=DEFAULT_LOG_RATIO_CLAMP):
    """Sample mean of (rho - 1)^2 / 2 over log ratios collected under b."""
    lr = np.asarray(list(log_ratios), dtype=float)
    if lr.size == 0:
        raise ValueError("cannot estimate the divergence from an empty sample")
    rho = np.exp(np.clip(lr, -clamp, clamp))
    return float(np.mean(0.5 * (rho - 1.0) ** 2))
