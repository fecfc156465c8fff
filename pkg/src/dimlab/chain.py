"""Multiscale entropy chain: output entropy vs summed projected block entropies.

For a smooth map F with 1-d range, the entropy of the pushforward at depth M
dominates (up to a per-interval constant) the mu-average over base points x of
the block entropies of the linearized projection of the magnified measure at
each scale interval [A_j, B_j].  This module evaluates both sides numerically
for the pinned-distance map and the planar radial map, and fits the implicit
per-interval constant over instance panels.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .dyadic import CubeRef, DyadicMeasure, magnify
from .geometry import value_bins, value_entropy
from .sigma import IntervalDecomposition

_TOL = 1e-9

_SAMPLE_LIMIT = 4096  # exact leaf integration up to this support size


@dataclass(frozen=True)
class ScaleSchedule:
    """Disjoint increasing scale intervals (A_j, B_j) inside [0, M] with the
    doubling constraint B_j <= 2 A_j."""

    M: int
    intervals: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "intervals", tuple((int(a), int(b)) for a, b in self.intervals)
        )
        prev_b = 0
        for a, b in self.intervals:
            if not (0 <= a < b <= self.M):
                raise ValueError(f"interval ({a}, {b}) outside [0, {self.M}]")
            if b > 2 * a:
                raise ValueError(f"interval ({a}, {b}) violates B <= 2A")
            if a < prev_b:
                raise ValueError("intervals must be disjoint and increasing")
            prev_b = b

    @property
    def J(self) -> int:
        return len(self.intervals)


def schedule_from_decomposition(
    dec: IntervalDecomposition, m: int
) -> tuple[ScaleSchedule, int]:
    """Scale endpoints A_j = round(m a_j), B_j = round(m b_j).

    Allowability (b - a <= a) gives B <= 2A before rounding; returns the
    schedule and the max rounding drift in levels.
    """
    intervals = []
    drift = 0
    for a, b, _sigma in dec.entries:
        A = round(m * a)
        B = round(m * b)
        drift = max(drift, abs(A - m * a), abs(B - m * b))
        if B <= A:
            raise ValueError(f"interval [{a}, {b}] collapsed at depth {m}")
        intervals.append((A, B))
    if drift > 1 + _TOL:
        raise ValueError(f"rounding drift {drift} exceeds one level")
    return ScaleSchedule(m, tuple(intervals)), int(math.ceil(drift - _TOL))


def linearization_direction(map_kind: str, x, y) -> np.ndarray:
    """Unit direction of the derivative of the scalar map at x.

    pinned_distance: (y - x)/|y - x|.  radial_2d: its rotation by pi/2
    (the direction along which the angle map varies), d = 2 only.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = y - x
    norm = float(np.linalg.norm(diff))
    if norm <= 0:
        raise ValueError("base point coincides with the pin")
    u = diff / norm
    if map_kind == "pinned_distance":
        return u
    if map_kind == "radial_2d":
        if len(u) != 2:
            raise ValueError("radial_2d requires ambient dimension 2")
        return np.array([-u[1], u[0]])
    raise ValueError(f"unknown map kind {map_kind!r}")


def _map_values(map_kind: str, pts: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Scalar pushforward values of the map at the given points."""
    diff = pts - y
    if map_kind == "pinned_distance":
        return np.linalg.norm(diff, axis=1)
    if map_kind == "radial_2d":
        # angle map parameterized to [0, 1) so dyadic bins apply
        return np.mod(np.arctan2(diff[:, 1], diff[:, 0]), 2.0 * math.pi) / (2.0 * math.pi)
    raise ValueError(f"unknown map kind {map_kind!r}")


def _integration_leaves(mu: DyadicMeasure):
    """Leaf keys and normalized weights for the outer integral; exact when the
    support is small, mass-weighted quantile subsample (deterministic) above
    the limit."""
    keys = mu._sorted_keys
    w = mu.leaf_mass_vector()
    if len(keys) <= _SAMPLE_LIMIT:
        return keys, w / w.sum()
    cum = np.cumsum(w) / w.sum()
    targets = (np.arange(_SAMPLE_LIMIT) + 0.5) / _SAMPLE_LIMIT
    idx = np.unique(np.minimum(np.searchsorted(cum, targets), len(keys) - 1))
    sub_w = w[idx]
    return [keys[i] for i in idx], sub_w / sub_w.sum()


def _check_separation(mu: DyadicMeasure, y: np.ndarray) -> None:
    dist = np.linalg.norm(mu.leaf_centers() - y, axis=1)
    if float(dist.min()) < 2.0 * 2.0 ** (-mu.m):
        raise ValueError("pin not separated from the support")


def _value_robust_entropy(values, weights, level: int, Theta: float) -> float:
    """Robust entropy of a weighted value cloud: greedy descending fill of
    dyadic bin masses capped at Theta times each bin."""
    idx = value_bins(values, level)
    w = np.asarray(weights, dtype=float)
    tot = float(w.sum())
    if tot <= 0:
        return 0.0
    order = np.argsort(idx, kind="stable")
    idx, w = idx[order], w[order]
    cuts = np.nonzero(np.diff(idx))[0] + 1
    bins = np.add.reduceat(w, np.concatenate(([0], cuts))) / tot
    remaining = 1.0
    h = 0.0
    for p in sorted(bins, reverse=True):
        take = min(Theta * p, remaining)
        if take > 1e-300:
            h -= take * math.log2(take)
        remaining -= take
        if remaining <= 0.0:
            break
    return max(0.0, h)


def _rhs_sum(
    mu: DyadicMeasure,
    map_kind: str,
    y: np.ndarray,
    schedule: ScaleSchedule,
    int_keys,
    int_w,
    robust_theta: float | None,
) -> float:
    """Integral of the per-base-point block entropy sums, grouped by the
    level-A ancestor so each magnification is computed once."""
    rhs = 0.0
    for A, B in schedule.intervals:
        shift = mu.m - A
        groups: dict[tuple[int, ...], list[int]] = {}
        for i, leaf in enumerate(int_keys):
            groups.setdefault(tuple(c >> shift for c in leaf), []).append(i)
        for anc in sorted(groups):
            sub = magnify(mu, CubeRef(A, anc))
            centers = sub.leaf_centers()
            masses = sub.leaf_mass_vector()
            side = 2.0 ** (-A)
            for i in groups[anc]:
                x = (np.array(int_keys[i], dtype=float) + 0.5) * 2.0 ** (-mu.m)
                u = linearization_direction(map_kind, x, y)
                vals = centers @ u
                if robust_theta is None:
                    h = value_entropy(vals, masses, B - A)
                else:
                    h = _value_robust_entropy(vals, masses, B - A, robust_theta)
                rhs += float(int_w[i]) * h
    return rhs


def chain_sides(
    mu: DyadicMeasure, map_kind: str, y, schedule: ScaleSchedule
) -> tuple[float, float, int]:
    """Both sides of the chain inequality, in bits.

    lhs: entropy of the scalar pushforward at level M.  rhs: mu-weighted sum
    over base points of block entropies of the linearized projections of the
    magnified measures.
    """
    if mu.trivial:
        return 0.0, 0.0, schedule.J
    if not mu.normalized:
        raise ValueError("chain_sides requires a normalized measure")
    if schedule.M > mu.m:
        raise ValueError("schedule depth exceeds measure depth")
    y = np.asarray(y, dtype=float)
    _check_separation(mu, y)
    vals = _map_values(map_kind, mu.leaf_centers(), y)
    lhs = value_entropy(vals, mu.leaf_mass_vector(), schedule.M)
    keys, w = _integration_leaves(mu)
    rhs = _rhs_sum(mu, map_kind, y, schedule, keys, w, None)
    return lhs, rhs, schedule.J


def chain_sides_robust(
    mu: DyadicMeasure,
    mu_prime: DyadicMeasure,
    map_kind: str,
    y,
    schedule: ScaleSchedule,
    Theta: float,
    cap_multiplier: float = 4.0,
) -> tuple[float, float, int]:
    """Robust chain sides: mu' <= Theta * mu verified leafwise; the rhs uses
    the capped (robust) block entropy at cap_multiplier * Theta and integrates
    against mu'."""
    if mu.m != mu_prime.m or mu.d != mu_prime.d:
        raise ValueError("mu and mu' must share shape")
    worst = 0.0
    for leaf, wp in mu_prime.leaves.items():
        w = mu.leaves.get(leaf, 0.0)
        ratio = math.inf if w <= 0 else wp / w
        worst = max(worst, ratio)
    if worst > Theta * (1.0 + 1e-9):
        raise ValueError(f"domination violated: worst leaf ratio {worst} > {Theta}")
    if mu.trivial or mu_prime.trivial:
        return 0.0, 0.0, schedule.J
    if not mu.normalized or not mu_prime.normalized:
        raise ValueError("both measures must be normalized")
    y = np.asarray(y, dtype=float)
    _check_separation(mu, y)
    vals = _map_values(map_kind, mu_prime.leaf_centers(), y)
    lhs = value_entropy(vals, mu_prime.leaf_mass_vector(), schedule.M)
    keys, w = _integration_leaves(mu_prime)
    rhs = _rhs_sum(mu, map_kind, y, schedule, keys, w, cap_multiplier * Theta)
    return lhs, rhs, schedule.J


def fit_chain_constant(panel) -> float:
    """Smallest C with lhs >= rhs - C*J across the panel (clamped at 0).

    Panel entries are (lhs, rhs, J) triples.
    """
    if not panel:
        raise ValueError("empty panel")
    C = 0.0
    for lhs, rhs, J in panel:
        if J > 0:
            C = max(C, (rhs - lhs) / J)
    return C


def panel_report(instances) -> str:
    """CSV panel report; entries are dicts with instance_id, kind, m, and the
    (lhs, rhs, J) triple."""
    buf = io.StringIO()
    buf.write("instance_id,kind,m,J,lhs,rhs,slack,slack_per_J\n")
    for rec in instances:
        lhs, rhs, J = rec["lhs"], rec["rhs"], rec["J"]
        slack = lhs - rhs
        per = slack / J if J else 0.0
        buf.write(
            f"{rec['instance_id']},{rec['kind']},{rec['m']},{J},"
            f"{lhs!r},{rhs!r},{slack!r},{per!r}\n"
        )
    return buf.getvalue()
