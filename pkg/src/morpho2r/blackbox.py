"""Derivative-free optimizers for a bounded scalar design variable.

All three maximize ``f`` over ``[lo, hi]`` and draw randomness from a
numpy ``Generator`` (PCG64), so a seed reproduces the same trace on any
platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import ndtr

from .kinematics import PHI_EPS

Objective = Callable[[float], float]


class NumericalConditioningError(RuntimeError):
    """The GP kernel matrix could not be factorised even with extra jitter."""


@dataclass(frozen=True)
class SearchSpace1D:
    lo: float = PHI_EPS
    hi: float = np.pi / 2 - PHI_EPS

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("search space needs lo < hi")

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass
class OptimizerResult:
    best_x: float
    best_f: float
    eval_count: int
    trace: list[tuple[int, float]] = field(default_factory=list)


@dataclass(frozen=True)
class PSOSettings:
    n_particles: int = 30
    iterations: int = 120
    inertia: float = 0.72
    c1: float = 1.49
    c2: float = 1.49
    v_init: float = 0.05


@dataclass(frozen=True)
class BOSettings:
    n_init: int = 5
    iterations: int = 40
    lengthscale: float = 0.12
    signal_var: float = 1.0
    noise: float = 1e-10
    xi: float = 0.01
    grid_size: int = 2000
    max_jitter: float = 1e-6


@dataclass(frozen=True)
class CMAESSettings:
    popsize: int = 12
    mu: int = 6
    iterations: int = 60
    sigma0_frac: float = 0.20
    c_mu: float = 0.5
    sigma_min: float = 1e-4
    sigma_max_frac: float = 0.5


class _Counted:
    def __init__(self, f: Objective):
        self.f = f
        self.count = 0

    def __call__(self, x: float) -> float:
        self.count += 1
        return float(self.f(float(x)))


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def pso_optimize(f: Objective, space: SearchSpace1D = SearchSpace1D(), rng=0,
                 settings: PSOSettings = PSOSettings()) -> OptimizerResult:
    rng = _as_rng(rng)
    fc = _Counted(f)
    s = settings
    n = s.n_particles
    x = rng.uniform(space.lo, space.hi, n)
    v = rng.uniform(-s.v_init, s.v_init, n)
    fx = np.array([fc(xi) for xi in x])
    pbest, pbest_f = x.copy(), fx.copy()
    g = int(np.argmax(pbest_f))
    gbest, gbest_f = pbest[g], pbest_f[g]
    trace = [(0, gbest_f)]

    for it in range(1, s.iterations + 1):
        r = rng.random((n, 2))  # per particle: r1 then r2
        v = s.inertia * v + s.c1 * r[:, 0] * (pbest - x) + s.c2 * r[:, 1] * (gbest - x)
        x = np.clip(x + v, space.lo, space.hi)
        fx = np.array([fc(xi) for xi in x])
        improved = fx > pbest_f
        pbest[improved], pbest_f[improved] = x[improved], fx[improved]
        g = int(np.argmax(pbest_f))
        if pbest_f[g] > gbest_f:
            gbest, gbest_f = pbest[g], pbest_f[g]
        trace.append((it, gbest_f))

    return OptimizerResult(float(gbest), float(gbest_f), fc.count, trace)


class GaussianProcess1D:
    """Exact GP regression with a squared-exponential kernel and a constant
    mean equal to the sample mean of the observations."""

    def __init__(self, lengthscale: float, signal_var: float = 1.0, noise: float = 1e-10,
                 max_jitter: float = 1e-6):
        self.lengthscale = lengthscale
        self.signal_var = signal_var
        self.noise = noise
        self.max_jitter = max_jitter

    def kernel(self, a, b):
        d = np.subtract.outer(np.asarray(a, float), np.asarray(b, float))
        return self.signal_var * np.exp(-0.5 * (d / self.lengthscale) ** 2)

    def fit(self, X, y) -> "GaussianProcess1D":
        self.X = np.asarray(X, float)
        y = np.asarray(y, float)
        self.mean = float(y.mean())
        K = self.kernel(self.X, self.X)
        jitter = self.noise
        while True:
            try:
                self.L = np.linalg.cholesky(K + jitter * np.eye(len(self.X)))
                break
            except np.linalg.LinAlgError:
                if jitter >= self.max_jitter:
                    raise NumericalConditioningError(
                        f"kernel matrix not positive definite with jitter up to {self.max_jitter:g}"
                    ) from None
                jitter = min(max(jitter * 10.0, 1e-12), self.max_jitter)
        self.jitter = jitter
        self.alpha = np.linalg.solve(self.L.T, np.linalg.solve(self.L, y - self.mean))
        return self

    def predict(self, Xs):
        Ks = self.kernel(self.X, Xs)
        mu = self.mean + Ks.T @ self.alpha
        v = np.linalg.solve(self.L, Ks)
        var = np.maximum(self.signal_var - np.sum(v * v, axis=0), 0.0)
        return mu, var


def expected_improvement(mu, sigma, f_best: float, xi: float) -> np.ndarray:
    mu = np.asarray(mu, float)
    sigma = np.asarray(sigma, float)
    imp = mu - f_best - xi
    ei = np.zeros_like(mu)
    pos = sigma > 0
    z = imp[pos] / sigma[pos]
    ei[pos] = imp[pos] * ndtr(z) + sigma[pos] * np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi)
    return np.maximum(ei, 0.0)


def bo_optimize(f: Objective, space: SearchSpace1D = SearchSpace1D(), rng=0,
                settings: BOSettings = BOSettings()) -> OptimizerResult:
    rng = _as_rng(rng)
    fc = _Counted(f)
    s = settings
    X = list(rng.uniform(space.lo, space.hi, s.n_init))
    y = [fc(x) for x in X]
    trace = [(0, max(y))]
    grid = np.linspace(space.lo, space.hi, s.grid_size)
    gp = GaussianProcess1D(s.lengthscale, s.signal_var, s.noise, s.max_jitter)

    for it in range(1, s.iterations + 1):
        gp.fit(X, y)
        mu, var = gp.predict(grid)
        ei = expected_improvement(mu, np.sqrt(var), max(y), s.xi)
        x_next = float(grid[int(np.argmax(ei))])
        X.append(x_next)
        y.append(fc(x_next))
        trace.append((it, max(y)))

    i = int(np.argmax(y))
    return OptimizerResult(float(X[i]), float(y[i]), fc.count, trace)


def cmaes_optimize(f: Objective, space: SearchSpace1D = SearchSpace1D(), rng=0,
                   settings: CMAESSettings = CMAESSettings()) -> OptimizerResult:
    """Scalar (mu/mu_w, lambda)-ES with a rank-mu variance update."""
    rng = _as_rng(rng)
    fc = _Counted(f)
    s = settings
    w = np.log(s.mu + 0.5) - np.log(np.arange(1, s.mu + 1))
    w /= w.sum()
    mean = 0.5 * (space.lo + space.hi)
    sigma = s.sigma0_frac * space.width
    sigma_max = s.sigma_max_frac * space.width
    best_x, best_f = mean, -np.inf
    trace = []

    for it in range(1, s.iterations + 1):
        x = np.clip(mean + sigma * rng.standard_normal(s.popsize), space.lo, space.hi)
        fx = np.array([fc(xi) for xi in x])
        order = np.argsort(-fx, kind="stable")
        if fx[order[0]] > best_f:
            best_x, best_f = float(x[order[0]]), float(fx[order[0]])
        sel = x[order[: s.mu]]
        old_mean = mean
        mean = float(w @ sel)
        var = (1 - s.c_mu) * sigma**2 + s.c_mu * float(w @ (sel - old_mean) ** 2)
        sigma = float(np.clip(np.sqrt(var), s.sigma_min, sigma_max))
        trace.append((it, best_f))

    return OptimizerResult(best_x, best_f, fc.count, trace)
