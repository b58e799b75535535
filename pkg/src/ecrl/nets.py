"""Small dense networks with hand-written forward/backward passes.

Hidden layers use the rectifier; the output layer is identity (critics,
Q-heads) or scaled tanh (bounded actors).  Gradients are plain
chain-rule code validated against central finite differences, which keeps
every update auditable.
"""
from __future__ import annotations

import numpy as np


class Mlp:
    """Fully connected layers; forward caches what backward needs."""

    def __init__(self, sizes, rng: np.random.Generator, output: str = "identity",
                 output_scale: float = 1.0):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if output not in ("identity", "tanh"):
            raise ValueError(f"unknown output activation {output!r}")
        self.sizes = list(sizes)
        self.output = output
        self.output_scale = float(output_scale)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))
        self._inputs = None
        self._preacts = None

    @property
    def n_layers(self):
        return len(self.weights)

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        a = np.atleast_2d(x)
        self._inputs = [a]
        self._preacts = []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            self._preacts.append(z)
            if i < self.n_layers - 1:
                a = np.maximum(z, 0.0)
            elif self.output == "tanh":
                a = self.output_scale * np.tanh(z)
            else:
                a = z
            self._inputs.append(a)
        return a[0] if squeeze else a

    def backward(self, grad_out):
        """Backprop a (batch, out) upstream gradient.

        Returns (grads, grad_input): grads is a per-layer list of (dW, db)
        summed over the batch, grad_input the gradient w.r.t. the forward
        input (needed to push critic gradients into an actor).
        """
        if self._inputs is None:
            raise RuntimeError("forward must run before backward")
        g = np.atleast_2d(np.asarray(grad_out, dtype=float))
        z = self._preacts[-1]
        if self.output == "tanh":
            g = g * self.output_scale * (1.0 - np.tanh(z) ** 2)
        grads = [None] * self.n_layers
        for i in range(self.n_layers - 1, -1, -1):
            a_prev = self._inputs[i]
            grads[i] = (a_prev.T @ g, g.sum(axis=0))
            g = g @ self.weights[i].T
            if i > 0:
                g = g * (self._preacts[i - 1] > 0.0)
        return grads, g

    # --- parameter plumbing ------------------------------------------------

    def parameters(self):
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b

    def get_flat(self):
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_flat(self, flat):
        offset = 0
        for p in self.parameters():
            p[...] = flat[offset:offset + p.size].reshape(p.shape)
            offset += p.size
        if offset != len(flat):
            raise ValueError("flat vector has the wrong length")

    def clone(self):
        other = Mlp(self.sizes, np.random.default_rng(0), self.output, self.output_scale)
        for dst, src in zip(other.parameters(), self.parameters()):
            dst[...] = src
        return other

    def polyak_from(self, source, tau: float):
        """theta <- tau * source + (1 - tau) * theta; tau=1 is a hard copy."""
        for dst, src in zip(self.parameters(), source.parameters()):
            dst *= 1.0 - tau
            dst += tau * src

    def to_arrays(self, prefix=""):
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"{prefix}w{i}"] = w
            out[f"{prefix}b{i}"] = b
        return out


class MomentumSgd:
    """Classic momentum: v <- mu v + g, theta <- theta - lr v."""

    def __init__(self, net: Mlp, learning_rate: float, momentum: float = 0.9):
        self.net = net
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.velocity = [np.zeros_like(p) for p in net.parameters()]

    def step(self, grads):
        flat = []
        for dw, db in grads:
            flat.append(dw)
            flat.append(db)
        for v, g, p in zip(self.velocity, flat, self.net.parameters()):
            v *= self.momentum
            v += g
            p -= self.learning_rate * v


def max_gradient_error(net: Mlp, rng: np.random.Generator, n_points: int = 100,
                       epsilon: float = 1e-5, margin: float = 1e-3):
    """Largest relative disagreement between backprop and central differences.

    Checks every parameter and every input coordinate against the scalar
    losses v_k . f(x_k) at n_points inputs (resampled so no rectifier
    pre-activation sits within `margin` of its kink, where the derivative
    is undefined and finite differences are meaningless).
    """
    d_in = net.sizes[0]
    points = []
    while len(points) < n_points:
        x = rng.normal(size=d_in)
        net.forward(x)
        hidden = net._preacts[:-1]
        if all(np.min(np.abs(z)) > margin for z in hidden) or not hidden:
            points.append(x)
    xs = np.stack(points)
    vs = rng.normal(size=(n_points, net.sizes[-1]))

    analytic_params = []
    analytic_inputs = []
    for x, v in zip(xs, vs):
        net.forward(x)
        grads, gin = net.backward(v)
        flat = []
        for dw, db in grads:
            flat.append(dw.ravel())
            flat.append(db.ravel())
        analytic_params.append(np.concatenate(flat))
        analytic_inputs.append(gin.ravel())
    analytic_params = np.stack(analytic_params)
    analytic_inputs = np.stack(analytic_inputs)

    def batch_losses():
        return np.sum(net.forward(xs) * vs, axis=1)

    worst = 0.0
    theta = net.get_flat()
    for j in range(len(theta)):
        theta[j] += epsilon
        net.set_flat(theta)
        hi = batch_losses()
        theta[j] -= 2 * epsilon
        net.set_flat(theta)
        lo = batch_losses()
        theta[j] += epsilon
        net.set_flat(theta)
        fd = (hi - lo) / (2 * epsilon)
        a = analytic_params[:, j]
        err = np.abs(a - fd) / np.maximum(1e-3, np.maximum(np.abs(a), np.abs(fd)))
        worst = max(worst, err.max())

    for j in range(d_in):
        shift = np.zeros(d_in)
        shift[j] = epsilon
        hi = np.sum(net.forward(xs + shift) * vs, axis=1)
        lo = np.sum(net.forward(xs - shift) * vs, axis=1)
        fd = (hi - lo) / (2 * epsilon)
        a = analytic_inputs[:, j]
        err = np.abs(a - fd) / np.maximum(1e-3, np.maximum(np.abs(a), np.abs(fd)))
        worst = max(worst, err.max())
    return float(worst)
