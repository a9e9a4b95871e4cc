"""Small numpy MLPs with hand-written backprop, Adam, and tanh-squashed
Gaussian policy helpers."""

from __future__ import annotations

import copy

import numpy as np

LOG_STD_MIN, LOG_STD_MAX = -5.0, 2.0
SQUASH_EPS = 1e-6


class ContractError(RuntimeError):
    pass


_ACTIVATIONS = {
    "tanh": (np.tanh, lambda h: 1.0 - h * h),
    "relu": (lambda z: np.maximum(z, 0.0), lambda h: (h > 0).astype(float)),
}


class Mlp:
    """Fully connected net with a linear output layer.

    Hidden activation is ``tanh`` (default) or ``relu``.
    """

    def __init__(self, sizes, rng: np.random.Generator, out_scale: float = 1.0,
                 activation: str = "tanh"):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.activation = activation
        self._act, self._dact = _ACTIVATIONS[activation]
        self.sizes = list(sizes)
        self.params: list[np.ndarray] = []
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            bound = 1.0 / np.sqrt(fan_in)
            W = rng.uniform(-bound, bound, (fan_in, fan_out))
            b = rng.uniform(-bound, bound, fan_out)
            if i == len(sizes) - 2:
                W *= out_scale
                b *= out_scale
            self.params += [W, b]
        self._cache = None

    @property
    def n_layers(self) -> int:
        return len(self.params) // 2

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.sizes[0]:
            raise ContractError(f"expected input (batch, {self.sizes[0]}), got {x.shape}")
        acts = [x]
        h = x
        for i in range(self.n_layers):
            W, b = self.params[2 * i], self.params[2 * i + 1]
            h = h @ W + b
            if i < self.n_layers - 1:
                h = self._act(h)
            acts.append(h)
        self._cache = acts
        return h

    __call__ = forward

    def backward(self, grad_out: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients of ``sum(grad_out * output)`` for the last forward pass.

        Returns ``(param_grads, input_grad)``.
        """
        if self._cache is None:
            raise ContractError("backward called without a cached forward pass")
        acts = self._cache
        g = np.asarray(grad_out, dtype=float)
        grads: list[np.ndarray] = [None] * len(self.params)
        for i in reversed(range(self.n_layers)):
            if i < self.n_layers - 1:
                g = g * self._dact(acts[i + 1])
            grads[2 * i] = acts[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.params[2 * i].T
        return grads, g

    def copy(self) -> "Mlp":
        return copy.deepcopy(self)

    def soft_update_from(self, other: "Mlp", tau: float) -> None:
        for p, q in zip(self.params, other.params):
            p *= 1.0 - tau
            p += tau * q

    def all_finite(self) -> bool:
        return all(np.isfinite(p).all() for p in self.params)


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads: list[np.ndarray]) -> None:
        """In-place descent step on ``self.params``."""
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            if g.shape != p.shape:
                raise ContractError(f"gradient shape {g.shape} != parameter shape {p.shape}")
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def split_head(out: np.ndarray):
    """Split a policy net output into mean and clamped log-std."""
    d = out.shape[1] // 2
    mean, raw_log_std = out[:, :d], out[:, d:]
    log_std = np.clip(raw_log_std, LOG_STD_MIN, LOG_STD_MAX)
    return mean, log_std, (raw_log_std >= LOG_STD_MIN) & (raw_log_std <= LOG_STD_MAX)


def squash_correction(u: np.ndarray) -> np.ndarray:
    return np.log(1.0 - np.tanh(u) ** 2 + SQUASH_EPS)


def gaussian_log_prob(u, mean, log_std) -> np.ndarray:
    z = (u - mean) / np.exp(log_std)
    return np.sum(-0.5 * z * z - log_std - 0.5 * np.log(2 * np.pi), axis=-1)


def sample_squashed(mean, log_std, rng: np.random.Generator):
    """Draw ``a = tanh(u)``, ``u ~ N(mean, exp(log_std))``.

    Returns ``(action, log_prob, u, noise)``; the log-probability includes the
    tanh change-of-variables term.
    """
    mean = np.atleast_2d(mean)
    log_std = np.clip(np.atleast_2d(log_std), LOG_STD_MIN, LOG_STD_MAX)
    eps = rng.standard_normal(mean.shape)
    u = mean + np.exp(log_std) * eps
    logp = gaussian_log_prob(u, mean, log_std) - np.sum(squash_correction(u), axis=-1)
    return np.tanh(u), logp, u, eps
