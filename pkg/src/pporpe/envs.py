"""Desk-scale continuous-control environments with a uniform protocol:

    obs = env.reset(rng)
    obs, reward, terminal = env.step(action)

All dynamics integrate with semi-implicit Euler at dt = 0.02 s. Actions
are clamped to the declared bounds before they touch the dynamics; the
unclamped action stays whatever the caller sampled. Stepping a finished
episode raises.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DT = 0.02


@dataclass(frozen=True)
class EnvSpec:
    name: str
    d_s: int
    d_a: int
    max_steps: int
    action_low: np.ndarray
    action_high: np.ndarray


class _Base:
    spec: EnvSpec

    def __init__(self):
        self.step_count = 0
        self._done = True
        # True once the system entered an absorbing failure state; episodes
        # that merely hit the step limit leave it False so value bootstraps
        # can tell truncation from termination
        self.failed = False

    def _clip_action(self, action):
        a = np.atleast_1d(np.asarray(action, dtype=float))
        if a.shape != (self.spec.d_a,):
            raise ValueError(f"action shape {a.shape} does not match d_a={self.spec.d_a}")
        return np.clip(a, self.spec.action_low, self.spec.action_high)

    def _begin_step(self, action):
        if self._done:
            raise RuntimeError("episode finished; call reset before stepping")
        self.step_count += 1
        return self._clip_action(action)


class CartpoleBalance(_Base):
    """Pole balancing on a pushed cart. The unit action commands a force
    of up to +-10 N. Reward +1 per step; the episode fails once
    |angle| > 0.21 rad or |position| > 2.4 m."""

    spec = EnvSpec("cartpole-balance", d_s=4, d_a=1, max_steps=200,
                   action_low=np.array([-1.0]), action_high=np.array([1.0]))

    GRAVITY = 9.8
    CART_MASS = 1.0
    POLE_MASS = 0.1
    HALF_LENGTH = 0.5
    FORCE_SCALE = 10.0
    ANGLE_LIMIT = 0.21
    POSITION_LIMIT = 2.4

    def reset(self, rng):
        self.state = rng.uniform(-0.05, 0.05, size=4)  # x, xdot, theta, thetadot
        self.step_count = 0
        self._done = False
        self.failed = False
        return self.state.copy()

    def step(self, action):
        force = self.FORCE_SCALE * self._begin_step(action)[0]
        x, xdot, th, thdot = self.state
        total = self.CART_MASS + self.POLE_MASS
        sin, cos = math.sin(th), math.cos(th)
        temp = (force + self.POLE_MASS * self.HALF_LENGTH * thdot ** 2 * sin) / total
        thacc = (self.GRAVITY * sin - cos * temp) / (
            self.HALF_LENGTH * (4.0 / 3.0 - self.POLE_MASS * cos ** 2 / total))
        xacc = temp - self.POLE_MASS * self.HALF_LENGTH * thacc * cos / total
        xdot += xacc * DT
        x += xdot * DT
        thdot += thacc * DT
        th += thdot * DT
        self.state = np.array([x, xdot, th, thdot])
        self.failed = abs(th) > self.ANGLE_LIMIT or abs(x) > self.POSITION_LIMIT
        self._done = self.failed or self.step_count >= self.spec.max_steps
        return self.state.copy(), 1.0, self._done


class PendulumSwingup(_Base):
    """Torque-limited pendulum swing-up. Angle is measured from upright;
    observation is [cos(theta), sin(theta), thetadot]. Reward is
    cos(theta) - 0.01 * torque^2; episodes only end at the step limit."""

    spec = EnvSpec("pendulum-swingup", d_s=3, d_a=1, max_steps=200,
                   action_low=np.array([-2.0]), action_high=np.array([2.0]))

    GRAVITY = 9.81
    MASS = 1.0
    LENGTH = 1.0
    SPEED_LIMIT = 8.0

    def reset(self, rng):
        # theta uniform in (-pi, pi], thetadot uniform in +-1
        self.theta = math.pi - rng.uniform(0.0, 2.0 * math.pi)
        self.thetadot = rng.uniform(-1.0, 1.0)
        self.step_count = 0
        self._done = False
        self.failed = False
        return self._obs()

    def _obs(self):
        return np.array([math.cos(self.theta), math.sin(self.theta), self.thetadot])

    def step(self, action):
        torque = self._begin_step(action)[0]
        # rod pivoted at one end: I = m l^2 / 3, gravity torque m g (l/2) sin(theta)
        thacc = (1.5 * self.GRAVITY / self.LENGTH * math.sin(self.theta)
                 + 3.0 * torque / (self.MASS * self.LENGTH ** 2))
        self.thetadot += thacc * DT
        self.thetadot = min(max(self.thetadot, -self.SPEED_LIMIT), self.SPEED_LIMIT)
        self.theta += self.thetadot * DT
        self.theta = math.atan2(math.sin(self.theta), math.cos(self.theta))
        if self.theta == -math.pi:
            self.theta = math.pi
        reward = math.cos(self.theta) - 0.01 * torque ** 2
        self._done = self.step_count >= self.spec.max_steps
        return self._obs(), reward, self._done

    def mechanical_energy(self):
        """Kinetic plus gravitational potential about the pivot height."""
        inertia = self.MASS * self.LENGTH ** 2 / 3.0
        height = 0.5 * self.LENGTH * math.cos(self.theta)
        return 0.5 * inertia * self.thetadot ** 2 + self.MASS * self.GRAVITY * height


class DoubleIntegrator(_Base):
    """Point mass on a line, acceleration control. Quadratic state/action
    cost: reward = -(x^2 + 0.1*xdot^2 + 0.01*u^2)."""

    spec = EnvSpec("double-integrator", d_s=2, d_a=1, max_steps=100,
                   action_low=np.array([-1.0]), action_high=np.array([1.0]))

    def reset(self, rng):
        self.state = np.array([rng.uniform(-1.0, 1.0), rng.uniform(-0.5, 0.5)])
        self.step_count = 0
        self._done = False
        self.failed = False
        return self.state.copy()

    def step(self, action):
        u = self._begin_step(action)[0]
        x, xdot = self.state
        xdot += u * DT
        x += xdot * DT
        self.state = np.array([x, xdot])
        reward = -(x ** 2 + 0.1 * xdot ** 2 + 0.01 * u ** 2)
        self._done = self.step_count >= self.spec.max_steps
        return self.state.copy(), reward, self._done


_REGISTRY = {
    "cartpole": CartpoleBalance,
    "cartpole-balance": CartpoleBalance,
    "pendulum": PendulumSwingup,
    "pendulum-swingup": PendulumSwingup,
    "double-integrator": DoubleIntegrator,
    "double_integrator": DoubleIntegrator,
}


def env_names():
    return sorted({cls.spec.name for cls in _REGISTRY.values()})


def make_env(name: str):
    key = name.strip().lower()
    if key not in _REGISTRY:
        raise ValueError(f"unknown env {name!r}; available: {', '.join(env_names())}")
    return _REGISTRY[key]()
