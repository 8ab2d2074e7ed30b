"""Minimal dense networks with hand-written reverse-mode gradients.

Everything is float64 numpy. A net maps a vector (or a batch of row
vectors) through fully connected layers; hidden layers apply tanh or
swish, the last layer stays linear. Gradients accumulate into a separate
GradBuffer so several backward passes can be summed before one optimizer
step.
"""

from __future__ import annotations

import numpy as np

ACTIVATIONS = ("tanh", "swish")


def _sigmoid(z):
    # clip keeps exp in range; sigmoid saturates to exact 0/1 well before 60
    return 1.0 / (1.0 + np.exp(-np.clip(z, -60.0, 60.0)))


def _activate(z, kind):
    if kind == "tanh":
        return np.tanh(z)
    return z * _sigmoid(z)


def _activate_deriv(z, kind):
    if kind == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    s = _sigmoid(z)
    return s * (1.0 + z * (1.0 - s))


class Mlp:
    """Fully connected network; weights[i] has shape (out, in).

    Passing an rng draws weights uniformly in +-sqrt(6/(fan_in+fan_out));
    without one, all parameters start at zero. Biases always start at zero.
    """

    def __init__(self, layer_sizes, activation="swish", rng=None):
        sizes = [int(n) for n in layer_sizes]
        if len(sizes) < 2 or any(n <= 0 for n in sizes):
            raise ValueError(f"layer_sizes needs >=2 positive entries, got {layer_sizes!r}")
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}; expected one of {ACTIVATIONS}")
        self.layer_sizes = sizes
        self.activation = activation
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            if rng is None:
                w = np.zeros((fan_out, fan_in))
            else:
                bound = np.sqrt(6.0 / (fan_in + fan_out))
                w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))

    @property
    def parameter_count(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def params(self):
        """All parameter arrays, weight then bias per layer, by reference."""
        flat = []
        for w, b in zip(self.weights, self.biases):
            flat.append(w)
            flat.append(b)
        return flat

    def clone(self):
        other = Mlp(self.layer_sizes, self.activation)
        for i in range(len(self.weights)):
            other.weights[i] = self.weights[i].copy()
            other.biases[i] = self.biases[i].copy()
        return other


class GradBuffer:
    """Per-parameter accumulators matching an Mlp's layout."""

    def __init__(self, net: Mlp):
        self.arrays = [np.zeros_like(p) for p in net.params()]

    def zero(self):
        for a in self.arrays:
            a.fill(0.0)


class AdamState:
    """Bias-corrected first/second-moment optimizer state for one Mlp."""

    def __init__(self, net: Mlp, learning_rate=3e-4, beta1=0.9, beta2=0.999,
                 stabilizer=1e-8):
        if learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if not (0.0 < beta1 < 1.0 and 0.0 < beta2 < 1.0):
            raise ValueError("moment decay rates must lie in (0, 1)")
        if stabilizer <= 0:
            raise ValueError("stabilizer must be positive")
        self.learning_rate = float(learning_rate)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.stabilizer = float(stabilizer)
        self.step_count = 0
        self.first_moment = [np.zeros_like(p) for p in net.params()]
        self.second_moment = [np.zeros_like(p) for p in net.params()]


def forward(net: Mlp, x):
    """Run the net; returns the last-layer pre-activation output.

    Accepts a single vector (d,) or a batch of rows (n, d).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    a = np.atleast_2d(x)
    if a.ndim != 2 or a.shape[1] != net.layer_sizes[0]:
        raise ValueError(
            f"input width {x.shape} does not match first layer size {net.layer_sizes[0]}")
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        a = a @ w.T + b
        if i != last:
            a = _activate(a, net.activation)
    return a[0] if single else a


def backward(net: Mlp, x, output_cotangent, grads: GradBuffer):
    """Accumulate d(cotangent . output)/dparams into grads.

    Batched rows contribute the sum of their per-sample gradients, which
    equals running backward once per row.
    """
    x = np.asarray(x, dtype=float)
    cot = np.asarray(output_cotangent, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if cot.ndim == 1:
        cot = cot[None, :]
    if x.shape[1] != net.layer_sizes[0]:
        raise ValueError(
            f"input width {x.shape[1]} does not match first layer size {net.layer_sizes[0]}")
    if cot.shape != (x.shape[0], net.layer_sizes[-1]):
        raise ValueError(
            f"cotangent shape {cot.shape} does not match output ({x.shape[0]}, {net.layer_sizes[-1]})")

    last = len(net.weights) - 1
    inputs = [x]           # input to each layer
    pre = []               # pre-activation of each layer
    a = x
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        pre.append(z)
        a = _activate(z, net.activation) if i != last else z
        inputs.append(a)

    dz = cot
    for i in range(last, -1, -1):
        grads.arrays[2 * i] += dz.T @ inputs[i]
        grads.arrays[2 * i + 1] += dz.sum(axis=0)
        if i > 0:
            da = dz @ net.weights[i]
            dz = da * _activate_deriv(pre[i - 1], net.activation)


def optimize_step(net: Mlp, grads: GradBuffer, state: AdamState):
    """One bias-corrected adaptive-moment update of the net's parameters.

    Any non-finite gradient element rejects the whole update before
    mutating anything.
    """
    params = net.params()
    if len(grads.arrays) != len(params) or any(
            g.shape != p.shape for g, p in zip(grads.arrays, params)):
        raise ValueError("gradient buffer layout does not match the net")
    for g in grads.arrays:
        if not np.all(np.isfinite(g)):
            raise ValueError("non-finite gradient element; update rejected")
    state.step_count += 1
    c1 = 1.0 - state.beta1 ** state.step_count
    c2 = 1.0 - state.beta2 ** state.step_count
    for p, g, m, v in zip(params, grads.arrays, state.first_moment, state.second_moment):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.stabilizer)


def blend(target: Mlp, source: Mlp, rate):
    """target <- (1-rate)*target + rate*source, elementwise over parameters."""
    if target.layer_sizes != source.layer_sizes:
        raise ValueError("blend requires identical layer sizes")
    if not 0.0 < rate <= 1.0:
        raise ValueError("blend rate must lie in (0, 1]")
    for pt, ps in zip(target.params(), source.params()):
        pt *= 1.0 - rate
        pt += rate * ps
