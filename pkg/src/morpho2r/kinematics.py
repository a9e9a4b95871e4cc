"""Planar 2R arm kinematics and manipulability.

Angles are radians throughout. The elbow-up branch keeps ``theta2`` in
``[0, pi]`` so that ``|sin(theta2)| == sin(theta2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PHI_EPS = 1e-3
REACH_TOL = 1e-9


class InfeasibleGeometryError(ValueError):
    """The requested circle is not reachable by the given link lengths."""


@dataclass(frozen=True)
class Morphology:
    L1: float
    L2: float
    theta2_cmd: float = np.pi / 2

    def __post_init__(self):
        if not (self.L1 > 0 and self.L2 > 0):
            raise ValueError(f"link lengths must be positive, got {self.L1}, {self.L2}")

    @property
    def annulus(self) -> "Annulus":
        return Annulus(abs(self.L1 - self.L2), self.L1 + self.L2)


@dataclass(frozen=True)
class JointConfig:
    theta1: float
    theta2: float


@dataclass(frozen=True)
class Annulus:
    r_min: float
    r_max: float


def forward_kinematics(m: Morphology, q: JointConfig) -> tuple[float, float]:
    t12 = q.theta1 + q.theta2
    x = m.L1 * np.cos(q.theta1) + m.L2 * np.cos(t12)
    y = m.L1 * np.sin(q.theta1) + m.L2 * np.sin(t12)
    return float(x), float(y)


def jacobian(m: Morphology, q: JointConfig) -> np.ndarray:
    t1, t12 = q.theta1, q.theta1 + q.theta2
    return np.array(
        [
            [-m.L1 * np.sin(t1) - m.L2 * np.sin(t12), -m.L2 * np.sin(t12)],
            [m.L1 * np.cos(t1) + m.L2 * np.cos(t12), m.L2 * np.cos(t12)],
        ]
    )


def manipulability(m: Morphology, theta2):
    """Yoshikawa index ``L1 * L2 * |sin(theta2)|`` (vectorised over theta2)."""
    return m.L1 * m.L2 * np.abs(np.sin(theta2))


def normalized_manipulability(theta2):
    return np.abs(np.sin(theta2))


def elbow_up_ik(L1, L2, x, y):
    """Vectorised elbow-up IK.

    Returns ``(theta1, theta2, reachable)``; angles are NaN where the target
    lies outside the reachable annulus.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(x, y)
    reachable = (r >= abs(L1 - L2) - REACH_TOL) & (r <= L1 + L2 + REACH_TOL)
    c2 = (r * r - L1 * L1 - L2 * L2) / (2.0 * L1 * L2)
    # boundary targets within tolerance snap onto the annulus
    c2 = np.where(reachable, np.clip(c2, -1.0, 1.0), np.nan)
    theta2 = np.arccos(c2)
    theta1 = np.arctan2(y, x) - np.arctan2(L2 * np.sin(theta2), L1 + L2 * np.cos(theta2))
    return theta1, theta2, reachable


def inverse_kinematics_elbow_up(m: Morphology, target) -> JointConfig | None:
    """Elbow-up IK for a single target; ``None`` means unreachable."""
    t1, t2, ok = elbow_up_ik(m.L1, m.L2, target[0], target[1])
    if not bool(ok):
        return None
    return JointConfig(float(t1), float(t2))


def phi_to_lengths(phi: float, R: float) -> tuple[float, float]:
    if R <= 0:
        raise ValueError("R must be positive")
    return R * np.cos(phi), R * np.sin(phi)


def w_norm_phi(phi):
    return np.abs(np.sin(2.0 * np.asarray(phi)))


def manipulability_on_circle(L1: float, L2: float, R: float) -> float:
    """Manipulability along a centred circle of radius ``R``.

    Constant along the circle, since every point needs the same elbow angle.
    """
    if not (abs(L1 - L2) - REACH_TOL <= R <= L1 + L2 + REACH_TOL):
        raise InfeasibleGeometryError(
            f"circle R={R} outside annulus [{abs(L1 - L2)}, {L1 + L2}]"
        )
    c = (R * R - L1 * L1 - L2 * L2) / (2.0 * L1 * L2)
    c = min(1.0, max(-1.0, c))
    return float(L1 * L2 * np.sqrt(1.0 - c * c))
