"""Piecewise-linear functions on [0,1] and the slope-constrained class L(d,u).

Membership in L(d,u) means: d-Lipschitz on every segment and f(x) >= u*x at
every breakpoint (which suffices for all x by piecewise linearity).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

_TOL = 1e-9


@dataclass(frozen=True)
class PLFunction:
    """Piecewise-linear function given by breakpoints 0 = x_0 < ... < x_n = 1."""

    xs: tuple[float, ...]
    ys: tuple[float, ...]

    def __post_init__(self):
        if len(self.xs) != len(self.ys) or len(self.xs) < 2:
            raise ValueError("need matching xs/ys with at least two breakpoints")
        if abs(self.xs[0]) > _TOL or abs(self.xs[-1] - 1.0) > _TOL:
            raise ValueError("breakpoints must span [0, 1]")
        if any(b <= a for a, b in zip(self.xs, self.xs[1:])):
            raise ValueError("breakpoints must be strictly increasing")

    def __call__(self, x):
        return np.interp(x, self.xs, self.ys)

    def slopes(self) -> np.ndarray:
        xs = np.asarray(self.xs)
        ys = np.asarray(self.ys)
        return np.diff(ys) / np.diff(xs)

    def is_nondecreasing(self, tol: float = _TOL) -> bool:
        return bool(np.all(self.slopes() >= -tol))

    def is_lipschitz(self, d: float, tol: float = _TOL) -> bool:
        return bool(np.all(np.abs(self.slopes()) <= d + tol))

    def in_class(self, d: float, u: float, tol: float = _TOL) -> bool:
        """Membership in L(d,u): d-Lipschitz and above the line u*x."""
        if not self.is_lipschitz(d, tol):
            return False
        xs = np.asarray(self.xs)
        ys = np.asarray(self.ys)
        return bool(np.all(ys >= u * xs - tol))

    def class_violation(self, d: float, u: float) -> tuple[str, float] | None:
        """First violated L(d,u) condition and its witness x, or None."""
        slopes = self.slopes()
        bad = np.nonzero(np.abs(slopes) > d + _TOL)[0]
        if len(bad):
            return ("lipschitz", float(self.xs[bad[0]]))
        xs = np.asarray(self.xs)
        ys = np.asarray(self.ys)
        bad = np.nonzero(ys < u * xs - _TOL)[0]
        if len(bad):
            return ("below-line", float(xs[bad[0]]))
        return None

    # -- serialization ------------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(
            {"kind": "plfunction", "breakpoints": list(self.xs), "values": list(self.ys)}
        )

    @classmethod
    def from_json(cls, text: str) -> "PLFunction":
        rec = json.loads(text)
        return cls(tuple(rec["breakpoints"]), tuple(rec["values"]))


def linear(slope: float) -> PLFunction:
    return PLFunction((0.0, 1.0), (0.0, slope))


def from_slopes(slopes, xs=None) -> PLFunction:
    """Build a PLFunction from per-segment slopes on a uniform or given grid."""
    slopes = list(slopes)
    n = len(slopes)
    if xs is None:
        xs = [i / n for i in range(n + 1)]
    ys = [0.0]
    for s, a, b in zip(slopes, xs, xs[1:]):
        ys.append(ys[-1] + s * (b - a))
    return PLFunction(tuple(xs), tuple(ys))
