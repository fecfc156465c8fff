"""Deterministic fractal measure generators aligned to the dyadic grid.

Every generator emits exact leaf masses (no sampling), so Frostman fits and
box counts over aligned scale windows match closed forms.
"""

from __future__ import annotations

import math

import numpy as np

from .dyadic import DyadicMeasure

__all__ = [
    "gen_cantor_product",
    "gen_lattice_falconer",
    "gen_train_track",
    "gen_circle_pair",
    "gen_product_set",
]


def _dyadic_log(r: float) -> int:
    """k with r = 2^{-k}, or raise."""
    k = round(-math.log2(r))
    if k < 1 or abs(r - 2.0 ** (-k)) > 1e-12:
        raise ValueError(f"ratio {r} is not of the form 2^-k")
    return k


def _cantor_1d_leaves(k: int, depth: int) -> dict[tuple[int], float]:
    """Two-branch self-similar set with contraction 2^{-k}: keep the first
    and last subinterval of length r in each parent, uniform mass."""
    gens = max(1, math.ceil(depth / k))
    top = 1 << depth
    # left endpoints as integers at scale 2^{-k*gens}, then truncated to depth
    pts = np.zeros(1, dtype=np.int64)
    step_bits = k * gens
    for g in range(1, gens + 1):
        # offset of the right branch at generation g: (1 - 2^{-k}) * 2^{-k(g-1)}
        off = ((1 << k) - 1) << (step_bits - k * g)
        pts = np.concatenate([pts, pts + off])
    w = 1.0 / len(pts)
    shift = step_bits - depth
    leaves: dict[tuple[int], float] = {}
    for p in np.sort(pts).tolist():
        key = (min(p >> shift, top - 1) if shift >= 0 else p << (-shift),)
        leaves[key] = leaves.get(key, 0.0) + w
    return leaves


def _product_leaves(factors: list[dict[tuple[int], float]]) -> dict[tuple[int, ...], float]:
    out: dict[tuple[int, ...], float] = {(): 1.0}
    for f in factors:
        nxt = {}
        for key, w in out.items():
            for (c,), wf in f.items():
                nxt[key + (c,)] = w * wf
        out = nxt
    return out


def gen_cantor_product(r: float, d: int, depth: int) -> DyadicMeasure:
    """Product of d copies of the two-branch Cantor measure with ratio r.

    r = 2^{-k} aligns the construction with the dyadic grid; each factor has
    exact similarity dimension 1/k (r = 1/2 degenerates to Lebesgue).
    """
    k = _dyadic_log(r)
    if not (1 <= d <= 3):
        raise ValueError("d must be 1..3")
    f = _cantor_1d_leaves(k, depth)
    return DyadicMeasure(d, depth, _product_leaves([f] * d))


def _lattice_1d_leaves(p: int, depth: int) -> dict[tuple[int], float]:
    """Base-q digits (q = 2^p) with every even-position digit forced to zero:
    a lattice-aligned set of dimension 1/2."""
    gens = max(1, math.ceil(depth / p))
    pts = np.zeros(1, dtype=np.int64)
    step_bits = p * gens
    for g in range(1, gens + 1):
        if g % 2 == 1:  # free digit
            offs = np.arange(1 << p, dtype=np.int64) << (step_bits - p * g)
            pts = (pts[:, None] + offs[None, :]).ravel()
    w = 1.0 / len(pts)
    shift = step_bits - depth
    top = 1 << depth
    leaves: dict[tuple[int], float] = {}
    for q in np.sort(pts).tolist():
        key = (min(q >> shift, top - 1) if shift >= 0 else q << (-shift),)
        leaves[key] = leaves.get(key, 0.0) + w
    return leaves


def gen_lattice_falconer(q: int, d: int, depth: int) -> DyadicMeasure:
    """Lattice-block construction: base-q expansions with alternate digit
    blocks zeroed, dimension d/2.  At the construction scales q^{-g} the
    distance set clusters near lattice values; the anomaly is a measured
    output, not an invariant."""
    p = int(q).bit_length() - 1
    if q < 2 or (1 << p) != q:
        raise ValueError(f"q must be a power of 2, got {q}")
    if q == 2:
        # degenerate: single-bit blocks leave no room for a zero block pattern
        # at alternate generations below depth 2; emit the full uniform measure
        full = {(i,): 2.0 ** (-depth) for i in range(1 << depth)}
        return DyadicMeasure(d, depth, _product_leaves([full] * d))
    f = _lattice_1d_leaves(p, depth)
    return DyadicMeasure(d, depth, _product_leaves([f] * d))


def gen_train_track(delta_level: int, depth: int, n_tracks: int | None = None) -> DyadicMeasure:
    """Parallel horizontal tracks: about 2^{delta_level/2} rows spaced
    2^{-delta_level} apart (a band of height ~ 2^{-delta_level/2}), each
    carrying the 1/4-Cantor measure along x.

    Pinned distances from a far pin look one-scale degenerate at the track
    scale 2^{-delta_level} but spread out at finer scales.
    """
    if delta_level % 2 != 0:
        raise ValueError("delta_level must be even")
    if not (0 < delta_level < depth):
        raise ValueError("need 0 < delta_level < depth")
    if n_tracks is None:
        n_tracks = 1 << (delta_level // 2)
    if n_tracks == 0:
        return DyadicMeasure(2, depth, {})
    x_leaves = _cantor_1d_leaves(2, depth)
    leaves: dict[tuple[int, ...], float] = {}
    row_w = 1.0 / n_tracks
    for k in range(n_tracks):
        yc = k << (depth - delta_level)
        for (xc,), w in x_leaves.items():
            leaves[(xc, yc)] = w * row_w
    return DyadicMeasure(2, depth, leaves)


def gen_circle_pair(depth: int, radius: float = 0.25, center=(0.5, 0.5),
                    half_width: float = math.pi / 4.0) -> DyadicMeasure:
    """Arc-length measure on two opposite arcs of a circle.

    A smooth curve of dimension 1 whose two components are separated in x,
    so the standard split-and-project pipeline applies; used as a
    calibration scene where every projection-type exponent is known."""
    n = 4 << min(depth, 16)
    ts = (np.arange(n) + 0.5) / n
    # two arcs centered at angles 0 and pi
    ang = np.where(ts < 0.5, (4 * ts - 1) * half_width,
                   math.pi + (4 * (ts - 0.5) - 1) * half_width)
    cx, cy = center
    xs = cx + radius * np.cos(ang)
    ys = cy + radius * np.sin(ang)
    top = 1 << depth
    w = 1.0 / n
    leaves: dict[tuple[int, ...], float] = {}
    for x, y in zip(xs.tolist(), ys.tolist()):
        key = (min(int(x * top), top - 1), min(int(y * top), top - 1))
        leaves[key] = leaves.get(key, 0.0) + w
    return DyadicMeasure(2, depth, leaves)


def gen_product_set(A_spec: dict, depth: int) -> DyadicMeasure:
    """Square product A x A of a 1-d generator given as {kind, params}."""
    kind = A_spec.get("kind")
    params = A_spec.get("params", {})
    if kind == "cantor":
        f = _cantor_1d_leaves(_dyadic_log(params.get("r", 0.25)), depth)
    elif kind == "lebesgue":
        f = {(i,): 2.0 ** (-depth) for i in range(1 << depth)}
    elif kind == "point":
        x = params.get("x", 0.0)
        top = 1 << depth
        f = {(min(int(x * top), top - 1),): 1.0}
    else:
        raise ValueError(f"unknown 1-d generator kind {kind!r}")
    return DyadicMeasure(2, depth, _product_leaves([f, f]))
