"""Training loop: collect with the baseline policy, update critic and
actor from replayed minibatches with the selected surrogate, blend the
target nets, and feed the threshold estimator.

Per update (every steps_per_update env steps, once the buffer holds a
full batch): one critic step, then one actor step using advantages from
the refreshed critic and density ratios recomputed from the current
actor/baseline nets, then the baseline/target blends, then the threshold
observation. The epsilon used by an update is read before that update's
deviations are observed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .critic import CriticPair, batch_advantages, critic_step, update_target
from .envs import make_env
from .net import AdamState, GradBuffer, Mlp, optimize_step
from .policy import (PolicyPair, entropy_backward, gaussian_params, head,
                     log_prob, log_prob_batch, sample, score_backward,
                     update_baseline)
from .replay import ReplayBuffer, Transition
from .surrogate import (SurrogateConfig, batch_coefficients, negative_loss,
                        pearson_divergence_estimate, relative_ratio)
from .threshold import ThresholdState, current_epsilon, observe


@dataclass(frozen=True)
class TrainerConfig:
    env: str = "cartpole"
    surrogate: SurrogateConfig = field(default_factory=SurrogateConfig)
    episodes: int = 300
    steps_per_update: int = 10
    batch_size: int = 100
    capacity: int = 10_000
    learning_rate: float = 3e-4
    gamma: float = 0.99
    baseline_polyak: float = 0.01
    target_polyak: float = 0.05
    entropy_bonus: float = 0.01
    hidden_sizes: tuple = (64, 64)
    lam: float = 0.999
    kappa: float = 0.5
    delta_lower: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.episodes < 0:
            raise ValueError("episodes must be nonnegative")
        for name in ("steps_per_update", "batch_size", "capacity"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.entropy_bonus < 0:
            raise ValueError("entropy_bonus must be nonnegative")
        # rebuilding the surrogate config re-runs its denominator guard at
        # the largest threshold this run can emit
        object.__setattr__(self, "surrogate",
                           replace(self.surrogate,
                                   epsilon_max=self.kappa * (1.0 - self.delta_lower)))


@dataclass(frozen=True)
class TrainRecord:
    episode: int
    episode_return: float
    epsilon_mean: float
    pearson_divergence: float
    actor_loss: float
    critic_loss: float
    wall_ms: int


@dataclass(frozen=True)
class EvalStats:
    median: float
    lower_quartile: float
    upper_quartile: float
    returns: tuple


def _actor_step(pair, critic, batch, scfg, tstate, optimizer, entropy_bonus):
    states = np.stack([t.state for t in batch])
    actions = np.stack([t.action for t in batch])
    n = len(batch)
    adv = batch_advantages(critic, batch)

    mp, sp, _ = gaussian_params(pair.actor, states)
    mb, sb, _ = gaussian_params(pair.baseline, states)
    log_ratio = log_prob_batch(mp, sp, actions) - log_prob_batch(mb, sb, actions)
    rho = np.exp(np.clip(log_ratio, -scfg.log_ratio_clamp, scfg.log_ratio_clamp))

    eps_now = current_epsilon(tstate) if scfg.method == "rpe_adaptive" else scfg.epsilon
    w = batch_coefficients(rho, adv, scfg, eps_now)

    grads = GradBuffer(pair.actor)
    score_backward(pair.actor, states, actions, -w / n, grads)
    if entropy_bonus > 0.0:
        entropy_backward(pair.actor, states, -entropy_bonus / n, grads)
    optimize_step(pair.actor, grads, optimizer)

    deviations = np.abs(relative_ratio(rho, scfg.beta) - 1.0)
    loss = -float(np.mean(negative_loss(rho, adv, scfg, eps_now)))
    divergence = pearson_divergence_estimate(log_ratio, clamp=scfg.log_ratio_clamp)
    return eps_now, loss, divergence, deviations


def run(config: TrainerConfig):
    """Train for config.episodes episodes; returns one TrainRecord each."""
    records, _ = run_training(config)
    return records


def run_training(config: TrainerConfig):
    """Like run(), but also hands back the trained actor net."""
    env = make_env(config.env)
    spec = env.spec
    ss = np.random.SeedSequence(config.seed)
    rng_init, rng_env, rng_action, rng_replay = map(np.random.default_rng, ss.spawn(4))
    scfg = config.surrogate

    actor = Mlp([spec.d_s, *config.hidden_sizes, 2 * spec.d_a], "swish", rng_init)
    pair = PolicyPair(actor, actor.clone(), config.baseline_polyak)
    value_net = Mlp([spec.d_s, *config.hidden_sizes, 1], "swish", rng_init)
    critic = CriticPair(value_net, value_net.clone(), config.target_polyak, config.gamma)
    actor_opt = AdamState(actor, config.learning_rate)
    critic_opt = AdamState(value_net, config.learning_rate)
    buffer = ReplayBuffer(config.capacity, rng_replay)
    tstate = ThresholdState(lam=config.lam, kappa=config.kappa,
                            delta_lower=config.delta_lower)

    records = []
    global_step = 0
    for episode in range(config.episodes):
        t0 = time.perf_counter()
        obs = env.reset(rng_env)
        ep_return = 0.0
        eps_used, losses_a, losses_c, divergences = [], [], [], []
        done = False
        while not done:
            behavior = head(pair.baseline, obs)
            action = sample(behavior, rng_action)
            nxt, reward, done = env.step(action)
            # bootstrap through time-limit truncations; only genuine
            # failures count as absorbing for the value target
            buffer.push(Transition(obs, action, reward, nxt, env.failed,
                                   log_prob(behavior, action)))
            ep_return += reward
            obs = nxt
            global_step += 1
            if global_step % config.steps_per_update == 0 and len(buffer) >= config.batch_size:
                batch = buffer.sample(config.batch_size)
                c_loss = critic_step(critic, batch, critic_opt)
                eps_now, a_loss, divergence, deviations = _actor_step(
                    pair, critic, batch, scfg, tstate, actor_opt, config.entropy_bonus)
                update_baseline(pair)
                update_target(critic)
                observe(tstate, deviations)
                if not (math.isfinite(c_loss) and math.isfinite(a_loss)):
                    raise RuntimeError(
                        f"non-finite loss at episode {episode}, step {global_step}: "
                        f"critic={c_loss}, actor={a_loss}")
                eps_used.append(eps_now)
                losses_a.append(a_loss)
                losses_c.append(c_loss)
                divergences.append(divergence)

        if eps_used:
            eps_mean = float(np.mean(eps_used))
        elif scfg.method == "rpe_adaptive":
            eps_mean = current_epsilon(tstate)
        else:
            eps_mean = scfg.epsilon
        records.append(TrainRecord(
            episode=episode,
            episode_return=ep_return,
            epsilon_mean=eps_mean,
            pearson_divergence=float(np.mean(divergences)) if divergences else 0.0,
            actor_loss=float(np.mean(losses_a)) if losses_a else 0.0,
            critic_loss=float(np.mean(losses_c)) if losses_c else 0.0,
            wall_ms=int(round((time.perf_counter() - t0) * 1000.0)),
        ))
    return records, pair.actor


def evaluate(config: TrainerConfig, actor: Mlp, n_episodes=100) -> EvalStats:
    """Deterministic rollouts with the actor's mean action; summary stats
    over per-episode returns."""
    if n_episodes <= 0:
        raise ValueError("n_episodes must be positive")
    env = make_env(config.env)
    if actor.layer_sizes[0] != env.spec.d_s:
        raise ValueError("actor input width does not match the env state size")
    rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0x45564C)))
    returns = []
    for _ in range(n_episodes):
        obs = env.reset(rng)
        total = 0.0
        done = False
        while not done:
            obs, reward, done = env.step(head(actor, obs).mean)
            total += reward
        returns.append(total)
    q1, med, q3 = np.percentile(returns, [25.0, 50.0, 75.0])
    return EvalStats(median=float(med), lower_quartile=float(q1),
                     upper_quartile=float(q3), returns=tuple(returns))
