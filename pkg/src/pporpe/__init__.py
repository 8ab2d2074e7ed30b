"""Ratio-regularized policy optimization (PPO family) with an adaptive
clipping threshold, on desk-scale control tasks."""

__version__ = "0.1.0"

from .critic import CriticPair, advantage, critic_step, update_target
from .envs import env_names, make_env
from .net import AdamState, GradBuffer, Mlp, backward, blend, forward, optimize_step
from .policy import (GaussianHead, PolicyPair, entropy, head, log_prob,
                     sample, score_backward, update_baseline)
from .replay import ReplayBuffer, Transition
from .surrogate import (METHODS, RatioPoint, SurrogateConfig, a_tilde_rpe,
                        density_ratio, gain, negative_loss, omega_ppo,
                        pearson_divergence_estimate, ratio_point,
                        relative_ratio, rho_ppo, surrogate_coefficient,
                        threshold_ratios)
from .threshold import ThresholdState, current_epsilon, observe
from .trainer import EvalStats, TrainerConfig, TrainRecord, evaluate, run

__all__ = [
    "AdamState", "CriticPair", "EvalStats", "GaussianHead", "GradBuffer",
    "METHODS", "Mlp", "PolicyPair", "RatioPoint", "ReplayBuffer",
    "SurrogateConfig", "ThresholdState", "TrainRecord", "TrainerConfig",
    "Transition", "a_tilde_rpe", "advantage", "backward", "blend",
    "critic_step", "current_epsilon", "density_ratio", "entropy",
    "env_names", "evaluate", "forward", "gain", "head", "log_prob",
    "make_env", "negative_loss", "observe", "omega_ppo", "optimize_step",
    "pearson_divergence_estimate", "ratio_point", "relative_ratio",
    "rho_ppo", "run", "sample", "score_backward", "surrogate_coefficient",
    "threshold_ratios", "update_baseline", "update_target",
]
