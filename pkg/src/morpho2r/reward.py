"""Path-averaged manipulability rewards with feasibility penalties."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from .kinematics import Morphology, elbow_up_ik
from .taskpaths import Band


class RewardVariant(str, Enum):
    RAW = "raw"
    NORM = "norm"
    BAND = "band"
    HYBRID = "hybrid"


@dataclass(frozen=True)
class RewardWeights:
    W_unr: float = 5.0
    W_in: float = 5.0
    W_out: float = 5.0
    W_len: float = 0.5


@dataclass(frozen=True)
class RewardBreakdown:
    coverage: float
    w_bar: float
    w_bar_n: float
    band_penalty: float
    unreach_penalty: float
    length_penalty: float
    r_raw: float
    r_norm: float
    r_band: float
    r_hyb: float

    def total(self, variant: RewardVariant | str) -> float:
        return {
            RewardVariant.RAW: self.r_raw,
            RewardVariant.NORM: self.r_norm,
            RewardVariant.BAND: self.r_band,
            RewardVariant.HYBRID: self.r_hyb,
        }[RewardVariant(variant)]

    def as_dict(self) -> dict:
        return asdict(self)


def band_penalty(r_min: float, r_max: float, band: Band, wts: RewardWeights) -> float:
    inner = max(band.b - r_min, 0.0)
    outer = max(r_max - band.a, 0.0)
    return wts.W_in * inner**2 + wts.W_out * outer**2


def evaluate(m: Morphology, path: np.ndarray, band: Band, wts: RewardWeights = RewardWeights()) -> RewardBreakdown:
    """Score a morphology on a sampled path.

    Means of manipulability are taken over reachable samples only; both are
    zero when nothing is reachable.
    """
    path = np.asarray(path, dtype=float)
    if path.ndim != 2 or len(path) == 0:
        raise ValueError("path must be a non-empty (N, 2) array")
    _, theta2, reach = elbow_up_ik(m.L1, m.L2, path[:, 0], path[:, 1])
    n_reach = int(np.count_nonzero(reach))
    coverage = n_reach / len(path)
    if n_reach:
        s = np.abs(np.sin(theta2[reach]))
        w_bar_n = float(np.mean(s))
        w_bar = float(np.mean(m.L1 * m.L2 * s))
    else:
        w_bar = w_bar_n = 0.0

    ann = m.annulus
    B = band_penalty(ann.r_min, ann.r_max, band, wts)
    d_unr = wts.W_unr * (1.0 - coverage)
    d_len = wts.W_len * (m.L1 + m.L2)
    return RewardBreakdown(
        coverage=coverage,
        w_bar=w_bar,
        w_bar_n=w_bar_n,
        band_penalty=B,
        unreach_penalty=d_unr,
        length_penalty=d_len,
        r_raw=w_bar - d_unr - d_len,
        r_norm=w_bar_n - d_unr - d_len,
        r_band=-B - d_unr - d_len,
        r_hyb=w_bar_n - B - d_unr - d_len,
    )


def hybrid_reward_grid(L1, L2, path: np.ndarray, band: Band, wts: RewardWeights = RewardWeights()) -> np.ndarray:
    """Vectorised ``r_hyb`` over arrays of link lengths (same shape)."""
    L1 = np.asarray(L1, dtype=float)[..., None]
    L2 = np.asarray(L2, dtype=float)[..., None]
    r = np.hypot(path[:, 0], path[:, 1])
    _, theta2, reach = elbow_up_ik(L1, L2, path[:, 0], path[:, 1])
    n_reach = reach.sum(axis=-1)
    s = np.where(reach, np.abs(np.sin(np.nan_to_num(theta2))), 0.0).sum(axis=-1)
    w_bar_n = np.where(n_reach > 0, s / np.maximum(n_reach, 1), 0.0)
    cov = n_reach / r.size
    L1, L2 = L1[..., 0], L2[..., 0]
    r_min, r_max = np.abs(L1 - L2), L1 + L2
    B = wts.W_in * np.maximum(band.b - r_min, 0.0) ** 2 + wts.W_out * np.maximum(r_max - band.a, 0.0) ** 2
    return w_bar_n - B - wts.W_unr * (1.0 - cov) - wts.W_len * (L1 + L2)


def circle_analytic_reward(phi):
    """Normalized manipulability on the circle locus; the circle objective."""
    return np.sin(2.0 * np.asarray(phi))
