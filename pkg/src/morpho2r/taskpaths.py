"""Task path descriptors, deterministic path sampling and radial bands."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class PathKind(str, Enum):
    CIRCLE = "circle"
    ELLIPSE = "ellipse"
    RECTANGLE = "rect"


@dataclass(frozen=True)
class TaskPath:
    """A path centred at the arm base.

    ``p1, p2`` are (R, 0) for a circle, semi-axes (a_e, b_e) for an
    ellipse, and full width/height (w, h) for a rectangle.
    """

    kind: PathKind
    p1: float
    p2: float = 0.0
    n_samples: int = 720
    ellipse_sampling: str = "parameter"  # or "arclength"

    def __post_init__(self):
        object.__setattr__(self, "kind", PathKind(self.kind))
        if self.p1 <= 0 or (self.kind is not PathKind.CIRCLE and self.p2 <= 0):
            raise ValueError(f"path sizes must be positive: {self}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.ellipse_sampling not in ("parameter", "arclength"):
            raise ValueError(f"unknown ellipse sampling {self.ellipse_sampling!r}")

    @classmethod
    def circle(cls, R: float = 0.40, n_samples: int = 720) -> "TaskPath":
        return cls(PathKind.CIRCLE, R, 0.0, n_samples)

    @classmethod
    def ellipse(cls, a_e: float = 0.40, b_e: float = 0.25, n_samples: int = 720, **kw) -> "TaskPath":
        return cls(PathKind.ELLIPSE, a_e, b_e, n_samples, **kw)

    @classmethod
    def rectangle(cls, w: float = 0.70, h: float = 0.40, n_samples: int = 720) -> "TaskPath":
        return cls(PathKind.RECTANGLE, w, h, n_samples)

    @property
    def R(self) -> float:
        if self.kind is not PathKind.CIRCLE:
            raise AttributeError("R is only defined for circles")
        return self.p1


@dataclass(frozen=True)
class Band:
    b: float
    a: float

    def __post_init__(self):
        if not (0 < self.b <= self.a):
            raise ValueError(f"band must satisfy 0 < b <= a, got [{self.b}, {self.a}]")


def _rectangle_points(w: float, h: float, n: int) -> np.ndarray:
    # counter-clockwise from the (+w/2, +h/2) corner, uniform in arc length
    hw, hh = w / 2.0, h / 2.0
    corners = np.array([[hw, hh], [-hw, hh], [-hw, -hh], [hw, -hh], [hw, hh]])
    seg_len = np.array([w, h, w, h])
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    s = np.arange(n) * (cum[-1] / n)
    seg = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, 3)
    frac = (s - cum[seg]) / seg_len[seg]
    p0, p1 = corners[seg], corners[seg + 1]
    pts = p0 + (p1 - p0) * frac[:, None]
    # pin the coordinate that is constant along each edge exactly
    horiz = seg % 2 == 0
    pts[horiz, 1] = p0[horiz, 1]
    pts[~horiz, 0] = p0[~horiz, 0]
    return pts


def _ellipse_arclength_t(a: float, b: float, n: int) -> np.ndarray:
    fine = np.linspace(0.0, 2 * np.pi, 20001)
    speed = np.hypot(a * np.sin(fine), b * np.cos(fine))
    s = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(fine))])
    return np.interp(np.arange(n) * (s[-1] / n), s, fine)


def sample_path(t: TaskPath) -> np.ndarray:
    """Return an ``(n_samples, 2)`` array of targets on the path."""
    n = t.n_samples
    if t.kind is PathKind.CIRCLE:
        ang = 2 * np.pi * np.arange(n) / n
        return np.column_stack([t.p1 * np.cos(ang), t.p1 * np.sin(ang)])
    if t.kind is PathKind.ELLIPSE:
        if t.ellipse_sampling == "parameter":
            ang = 2 * np.pi * np.arange(n) / n
        else:
            ang = _ellipse_arclength_t(t.p1, t.p2, n)
        return np.column_stack([t.p1 * np.cos(ang), t.p2 * np.sin(ang)])
    return _rectangle_points(t.p1, t.p2, n)


def band_for(t: TaskPath) -> Band:
    if t.kind is PathKind.CIRCLE:
        return Band(t.p1, t.p1)
    if t.kind is PathKind.ELLIPSE:
        return Band(min(t.p1, t.p2), max(t.p1, t.p2))
    return Band(0.5 * min(t.p1, t.p2), 0.5 * float(np.hypot(t.p1, t.p2)))


def context_vector(t: TaskPath) -> np.ndarray:
    """Length-5 task context: one-hot kind followed by sizes in metres."""
    onehot = {PathKind.CIRCLE: 0, PathKind.ELLIPSE: 1, PathKind.RECTANGLE: 2}[t.kind]
    ctx = np.zeros(5)
    ctx[onehot] = 1.0
    ctx[3:] = t.p1 / 1.0, t.p2 / 1.0
    return ctx
