"""Closed-form and constructive reference designs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinematics import PHI_EPS, Morphology, phi_to_lengths, w_norm_phi
from .taskpaths import Band, PathKind, TaskPath


class DegenerateBandError(ValueError):
    pass


@dataclass(frozen=True)
class BaselineResult:
    name: str
    morphology: Morphology
    objective: float | None
    phi: float | None = None


def analytic_circle_optimum(R: float) -> BaselineResult:
    if R <= 0:
        raise ValueError("R must be positive")
    L = R / np.sqrt(2.0)
    return BaselineResult("Analytic", Morphology(L, L, np.pi / 2), R * R / 2.0, phi=np.pi / 4)


def phi_sweep(R: float, n_grid: int = 1801) -> BaselineResult:
    if n_grid < 3:
        raise ValueError("n_grid must be >= 3")
    phis = np.linspace(PHI_EPS, np.pi / 2 - PHI_EPS, n_grid)
    if n_grid % 2 == 1:
        # symmetric grid: pin the midpoint to pi/4 exactly
        phis[n_grid // 2] = np.pi / 4
    phi = float(phis[int(np.argmax(w_norm_phi(phis)))])
    L1, L2 = phi_to_lengths(phi, R)
    return BaselineResult("Sweep", Morphology(L1, L2, np.pi / 2), float(w_norm_phi(phi)), phi=phi)


def expected_r2(t: TaskPath) -> float:
    """Mean squared radius along the path (parameter-averaged for ellipses)."""
    if t.kind is PathKind.CIRCLE:
        return t.p1**2
    if t.kind is PathKind.ELLIPSE:
        return 0.5 * (t.p1**2 + t.p2**2)
    w, h = t.p1, t.p2
    return (w**3 + 3 * w * h**2 + 3 * h * w**2 + h**3) / (12.0 * (w + h))


def equal_dex_baseline(t: TaskPath) -> BaselineResult:
    L = float(np.sqrt(expected_r2(t) / 2.0))
    return BaselineResult("EqualDex", Morphology(L, L, np.pi / 2), None)


def band_match_baseline(band: Band) -> BaselineResult:
    if band.a <= band.b:
        raise DegenerateBandError(f"band [{band.b}, {band.a}] has zero width; band-match needs a > b")
    L1 = (band.a + band.b) / 2.0
    L2 = (band.a - band.b) / 2.0
    return BaselineResult("BandMatch", Morphology(L1, L2, np.pi / 2), None)
