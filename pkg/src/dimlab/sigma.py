"""Combinatorial scale optimization over piecewise-linear branching profiles.

The central object is the two-player value

    best over allowable interval families of  sum_j (b_j - a_j) * D(sigma_j)

for a fixed profile function D and branching function f, minimized
adversarially over f in the slope-constrained class L(d,t).  An interval
[a, b] is tau-allowable when tau <= b - a <= a; sigma_j must make f
sigma_j-superlinear on [a_j, b_j].

The inner maximization is solved exactly on an endpoint grid by weighted
interval scheduling; the outer minimization is a certificate search (the
returned value is an upper bound on the true infimum, witnessed by the
minimizing f).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .plf import PLFunction, from_slopes, linear

_TOL = 1e-9


# -- the threshold constant -------------------------------------------------


def phi(u: float) -> float:
    """Positive root of x^2 + (2-u)x - u = 0, in closed form."""
    if not (0.0 < u <= 1.0):
        raise ValueError(f"u must be in (0, 1], got {u}")
    return u / 2.0 + u * u / (2.0 * (2.0 + math.sqrt(u * u + 4.0)))


def c_d_table(d_range) -> list[tuple[int, float]]:
    """Distance-set box-dimension gain over 1/2 in ambient dimension d >= 4."""
    out = []
    for d in d_range:
        if d < 4:
            raise ValueError("table starts at ambient dimension 4")
        if d % 2 == 1:
            out.append((d, phi(0.5) / (d + 1)))
        else:
            out.append((d, (phi(1.0) - 0.5) / (d + 1)))
    return out


# -- profile functions ------------------------------------------------------


class Profile:
    """Nondecreasing map D: [0, d] -> [0, k] scoring projection gain per slope."""

    d: float
    k: float

    def __call__(self, t):
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def to_json(self) -> str:
        return json.dumps({"kind": type(self).__name__, "params": self.params()})


class HighDimProfile(Profile):
    """D(t) = max(min(1, s + t - (d-1)), t/d)."""

    def __init__(self, d: int, s: float):
        self.d = float(d)
        self.s = float(s)
        self.k = 1.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        val = np.maximum(np.minimum(1.0, self.s + t - (self.d - 1.0)), t / self.d)
        return val if val.ndim else float(val)

    def params(self):
        return {"d": self.d, "s": self.s}


class TrivialHalfProfile(Profile):
    """D(t) = t/2, valid for any positive base exponent."""

    def __init__(self, d: float = 2.0):
        self.d = float(d)
        self.k = self.d / 2.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        val = t / 2.0
        return val if val.ndim else float(val)


class KaufmanProfile(Profile):
    """Identity up to the direction-measure exponent: D(t) = min(t, s)."""

    def __init__(self, s: float, d: float = 2.0):
        self.d = float(d)
        self.s = float(s)
        self.k = self.s

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        val = np.minimum(t, self.s)
        return val if val.ndim else float(val)

    def params(self):
        return {"s": self.s, "d": self.d}


class PlanarProfile(Profile):
    """Three-regime planar profile: identity, then a plateau s + eta(s, t),
    then t/2 beyond the crossover s' solving s + eta(s, s') = s'/2.

    The plateau height eta is not pinned down numerically by the theory; a
    constant default of 0.01 is shipped and clearly non-canonical.  A custom
    eta may be passed as a callable (s, t) -> eta.
    """

    def __init__(self, s: float, eta=0.01):
        if not (0.0 < s < 2.0):
            raise ValueError(f"s must be in (0, 2), got {s}")
        self.d = 2.0
        self.s = float(s)
        self.k = 1.0
        if callable(eta):
            self._eta = eta
            self._eta_const = None
        else:
            self._eta_const = float(eta)
            self._eta = lambda _s, _t, c=float(eta): c
        self.s_prime = self._solve_crossover()

    def eta(self, t: float) -> float:
        if t <= self.s:
            return 0.0
        val = self._eta(self.s, t)
        if val is None or val <= 0.0:
            raise ValueError(f"eta table gap or nonpositive value at (s={self.s}, t={t})")
        return float(val)

    def _solve_crossover(self) -> float:
        # root of g(t) = s + eta(s, t) - t/2 on (s, 2]; g(s+) > 0, g nonincreasing
        g = lambda t: self.s + self.eta(t) - t / 2.0
        hi = 2.0
        if g(hi) >= 0.0:
            return hi
        lo = self.s
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if g(mid) >= 0.0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if t.ndim:
            if self._eta_const is not None:
                plateau = self.s + self._eta_const
            else:
                plateau = self.s + np.vectorize(lambda x: self.eta(max(x, self.s + 1e-12)))(t)
            return np.where(t <= self.s, t, np.where(t <= self.s_prime, plateau, t / 2.0))
        tf = float(t)
        if tf <= self.s:
            return tf
        if tf <= self.s_prime:
            return self.s + self.eta(tf)
        return tf / 2.0

    def params(self):
        return {"s": self.s, "s_prime": self.s_prime}


class CustomProfile(Profile):
    """Piecewise-linear profile given by breakpoints on [0, d]."""

    def __init__(self, xs, ys, d: float):
        self.d = float(d)
        self.xs = tuple(float(x) for x in xs)
        self.ys = tuple(float(y) for y in ys)
        if any(b <= a for a, b in zip(self.xs, self.xs[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if any(b < a - _TOL for a, b in zip(self.ys, self.ys[1:])):
            raise ValueError("profile must be nondecreasing")
        self.k = max(self.ys)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        val = np.interp(t, self.xs, self.ys)
        return val if val.ndim else float(val)

    def params(self):
        return {"breakpoints": list(self.xs), "values": list(self.ys), "d": self.d}


def profile_eval(D: Profile, t: float) -> float:
    if not (0.0 <= t <= D.d + _TOL):
        raise ValueError(f"t={t} outside profile domain [0, {D.d}]")
    return float(D(t))


# -- superlinearity --------------------------------------------------------


def _eval_points(f: PLFunction, a: float, b: float) -> list[float]:
    pts = [x for x in f.xs if a + _TOL < x < b - _TOL]
    pts.append(b)
    return pts


def best_slope(f: PLFunction, a: float, b: float) -> float:
    """Largest sigma such that f is sigma-superlinear on [a, b].

    Checked at breakpoints and at b, which suffices for piecewise-linear f.
    """
    if a >= b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    fa = float(f(a))
    return min((float(f(x)) - fa) / (x - a) for x in _eval_points(f, a, b))


def is_superlinear(f: PLFunction, a: float, b: float, sigma: float, tol: float = _TOL) -> bool:
    """True iff f(x) >= f(a) + sigma (x - a) on [a, b]."""
    return best_slope(f, a, b) >= sigma - tol


# -- interval decompositions -----------------------------------------------


@dataclass
class IntervalDecomposition:
    """An ordered family of (a_j, b_j, sigma_j) with a superlinearity budget.

    `check` verifies the structural invariants; allowability (tau <= b-a <= a)
    can be waived for merged chains, which the merging lemmas do not keep
    allowable.
    """

    entries: list[tuple[float, float, float]]
    tau: float
    value_against: tuple[Profile, float] | None = None

    def check(self, f: PLFunction | None = None, d: float | None = None,
              require_allowable: bool = True) -> None:
        prev_b = -math.inf
        for a, b, sigma in self.entries:
            if a >= b:
                raise ValueError(f"degenerate interval [{a}, {b}]")
            if a < prev_b - _TOL:
                raise ValueError("overlapping intervals")
            prev_b = b
            if require_allowable:
                if not (self.tau - _TOL <= b - a <= a + _TOL):
                    raise ValueError(f"interval [{a}, {b}] is not {self.tau}-allowable")
            if d is not None and not (-_TOL <= sigma <= d + _TOL):
                raise ValueError(f"sigma {sigma} outside [0, {d}]")
            if f is not None and not is_superlinear(f, a, b, sigma):
                raise ValueError(f"f is not {sigma}-superlinear on [{a}, {b}]")
        if self.value_against is not None:
            D, total = self.value_against
            acc = 0.0
            for a, b, sigma in self.entries:
                acc += (b - a) * float(D(max(0.0, sigma)))
            if abs(acc - total) > 1e-8:
                raise ValueError(f"stored value {total} != recomputed {acc}")

    def weighted_slope_sum(self) -> float:
        return math.fsum(sigma * (b - a) for a, b, sigma in self.entries)


def merge(
    f: PLFunction,
    left: tuple[float, float, float],
    right: tuple[float, float, float],
) -> tuple[float, float, float]:
    """Merge adjacent superlinear entries; the combined slope is the
    length-weighted mean, and superlinearity carries over when the left
    slope dominates."""
    a, b1, s1 = left
    b2, c, s2 = right
    if abs(b1 - b2) > _TOL:
        raise ValueError("entries are not adjacent")
    if s1 < s2 - _TOL:
        raise ValueError("merge requires left slope >= right slope")
    if not is_superlinear(f, a, b1, s1) or not is_superlinear(f, b2, c, s2):
        raise ValueError("entries are not superlinear certificates for f")
    sigma = (s1 * (b1 - a) + s2 * (c - b2)) / (c - a)
    assert is_superlinear(f, a, c, sigma, tol=1e-7), "merged superlinearity failed"
    return (a, c, sigma)


def merge_increasing(f: PLFunction, entries) -> IntervalDecomposition:
    """Merge a consecutive chain until the slopes are strictly increasing.

    The weighted sum sum_j sigma_j (b_j - a_j) is preserved exactly by the
    merge formula.
    """
    entries = list(entries)
    for (a, b, _), (a2, _, _) in zip(entries, entries[1:]):
        if abs(b - a2) > _TOL:
            raise ValueError("chain must be consecutive")
    stack: list[tuple[float, float, float]] = []
    for entry in entries:
        cur = entry
        while stack and stack[-1][2] >= cur[2] - _TOL:
            prev = stack.pop()
            sigma = (prev[2] * (prev[1] - prev[0]) + cur[2] * (cur[1] - cur[0])) / (
                cur[1] - prev[0]
            )
            cur = (prev[0], cur[1], sigma)
        stack.append(cur)
    dec = IntervalDecomposition(stack, tau=min(b - a for a, b, _ in stack))
    dec.check(f=f, require_allowable=False)
    return dec


def superlinear_decomposition(
    f: PLFunction, a: float, b: float, eps: float, rho: float
) -> IntervalDecomposition:
    """Cover [a, b] by consecutive intervals of length in [tau, rho] whose
    superlinear slopes nearly exhaust the growth of f.

    tau = eps * rho / 8 is reported in the result.  The chain is the exact
    optimum (on a grid refined to step tau/2) of sum_j (a_{j+1}-a_j) sigma_j,
    which dominates the constructive guarantee
    f(b) - f(a) - eps (b - a) whenever one exists.
    """
    if not f.is_nondecreasing():
        raise ValueError("f must be nondecreasing")
    if a < rho - _TOL or b - a < rho - _TOL:
        raise ValueError("range too small: need a >= rho and b - a >= rho")
    tau = eps * rho / 8.0
    step = tau / 2.0
    n = max(2, int(math.ceil((b - a) / step)))
    grid = sorted(
        set(np.linspace(a, b, n + 1).tolist())
        | {x for x in f.xs if a < x < b}
    )
    G = np.array(grid)
    fG = np.asarray(f(G))
    K = len(G)
    dx = G[None, :] - G[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        S = (fG[None, :] - fG[:, None]) / dx
    S[dx <= 0] = np.inf
    B = np.minimum.accumulate(S, axis=1)  # best slope from G[i] over (G[i], G[j]]

    NEG = -math.inf
    val = np.full(K, NEG)
    back = np.full(K, -1, dtype=int)
    val[0] = 0.0
    for j in range(1, K):
        lens = G[j] - G[:j]
        ok = (lens >= tau - _TOL) & (lens <= rho + _TOL)
        if not ok.any():
            continue
        cand = val[:j] + lens * B[:j, j]
        cand[~ok] = NEG
        i = int(np.argmax(cand))
        if cand[i] > NEG:
            val[j] = cand[i]
            back[j] = i
    if val[K - 1] == NEG:
        raise ValueError("range too small to tile with the required lengths")
    chain = []
    j = K - 1
    while j > 0:
        i = back[j]
        chain.append((float(G[i]), float(G[j]), float(B[i, j])))
        j = i
    chain.reverse()
    dec = IntervalDecomposition(chain, tau=tau)
    dec.check(f=f, require_allowable=False)
    return dec


# -- exact inner maximization ----------------------------------------------


def sigma_for_f(
    D: Profile, f: PLFunction, tau: float, grid_n: int
) -> tuple[float, IntervalDecomposition]:
    """Exact maximum of sum (b_j - a_j) D(sigma_j) over allowable families
    with endpoints on the grid {i/grid_n}.

    sigma_j is always the best superlinear slope (optimal since D is
    nondecreasing).  Solved by weighted interval scheduling; the value is a
    lower bound for the continuum supremum and grows under grid refinement.
    """
    if not (0.0 < tau <= 0.5):
        raise ValueError(f"tau must be in (0, 1/2], got {tau}")
    d = D.d
    xs = np.arange(grid_n + 1) / grid_n
    G = np.union1d(xs, np.clip(np.array(f.xs), 0.0, 1.0))
    fG = np.asarray(f(G))
    dx = G[None, :] - G[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        S = (fG[None, :] - fG[:, None]) / dx
    S[dx <= 0] = np.inf
    B = np.minimum.accumulate(S, axis=1)
    gi = np.searchsorted(G, xs)
    Bg = B[np.ix_(gi, gi)]  # best slope over [x_i, x_j]

    n = grid_n
    NEG = -math.inf
    # interval weights; invalid when no sigma in [0, d] certifies the interval
    lens = xs[None, :] - xs[:, None]
    allowable = (lens >= tau - _TOL) & (lens <= xs[:, None] + _TOL) & (lens > 0)
    sig = np.clip(Bg, 0.0, d)
    W = np.where(allowable & (Bg >= -_TOL), lens * np.asarray(D(sig)), NEG)

    best = np.zeros(n + 1)
    take = np.full(n + 1, -1, dtype=int)  # start index of interval ending at j
    for j in range(1, n + 1):
        b = best[j - 1]
        t = -1
        cand = best[:j] + W[:j, j]
        i = int(np.argmax(cand))
        if cand[i] > b:
            b = cand[i]
            t = i
        best[j] = b
        take[j] = t
    # recover certificate
    entries = []
    j = n
    while j > 0:
        i = take[j]
        if i < 0:
            j -= 1
            continue
        sigma = float(np.clip(Bg[i, j], 0.0, d))
        entries.append((float(xs[i]), float(xs[j]), sigma))
        j = i
    entries.reverse()
    value = float(best[n])
    dec = IntervalDecomposition(entries, tau=tau, value_against=(D, value))
    return value, dec


# -- adversarial outer minimization ----------------------------------------


@dataclass
class SigmaTauResult:
    estimate: float
    certificate: PLFunction
    n_candidates: int
    decomposition: IntervalDecomposition = field(repr=False, default=None)


def _default_grid_n(tau: float, n_segments: int) -> int:
    n = int(math.ceil(8.0 / tau))
    # keep candidate breakpoints on the fine grid
    rem = n % n_segments
    if rem:
        n += n_segments - rem
    return n


def _feasible_random_slopes(rng, t, d, levels, n_segments):
    """Sample a slope vector keeping the partial sums above the line t*x."""
    out = []
    v = 0.0
    for i in range(n_segments):
        x_next = (i + 1) / n_segments
        ok = [s for s in levels if v + s / n_segments >= t * x_next - _TOL]
        if not ok:
            return None
        s = ok[int(rng.integers(len(ok)))]
        out.append(s)
        v += s / n_segments
    return out


def sigma_tau(
    D: Profile,
    t: float,
    tau: float,
    budget: int = 10000,
    n_segments: int = 16,
    slope_levels=None,
    grid_n: int | None = None,
    seed: int = 0,
    nondecreasing: bool = True,
) -> SigmaTauResult:
    """Upper-bound the infimum of sigma_for_f over f in L(d, t).

    Candidates are piecewise-linear functions with breakpoints on a coarse
    grid and slopes from a fixed ladder; the search is exhaustive when the
    ladder is small enough, otherwise seeded random sampling plus structured
    two-slope candidates and local slope descent.  Every reported value is
    certified by the minimizing candidate.
    """
    d = D.d
    if not (0.0 < t < d):
        raise ValueError(f"t must be in (0, {d}), got {t}")
    if slope_levels is None:
        slope_levels = [d * i / 8.0 for i in range(9)]
    if not nondecreasing:
        slope_levels = sorted(set(slope_levels) | {-s for s in slope_levels})
    if grid_n is None:
        grid_n = _default_grid_n(tau, n_segments)

    best_val = math.inf
    best_f = None
    best_dec = None
    n_eval = 0

    def consider(f: PLFunction):
        nonlocal best_val, best_f, best_dec, n_eval
        if not f.in_class(d, t):
            return
        val, dec = sigma_for_f(D, f, tau, grid_n)
        n_eval += 1
        if val < best_val:
            best_val, best_f, best_dec = val, f, dec

    # explicit feasible point: the boundary line of the class
    consider(linear(t))

    total = len(slope_levels) ** n_segments
    if total <= budget:
        for combo in itertools.product(slope_levels, repeat=n_segments):
            consider(from_slopes(combo))
    else:
        # structured two-slope candidates
        fine = [d * i / 16.0 for i in range(17)]
        for k in range(1, n_segments):
            x0 = k / n_segments
            for s1 in fine:
                if n_eval >= budget:
                    break
                for s2 in fine:
                    f = PLFunction(
                        (0.0, x0, 1.0), (0.0, s1 * x0, s1 * x0 + s2 * (1.0 - x0))
                    )
                    consider(f)
        # seeded random feasible slope vectors
        rng = np.random.default_rng(seed)
        tries = 0
        while n_eval < budget and tries < 20 * budget:
            tries += 1
            slopes = _feasible_random_slopes(rng, t, d, slope_levels, n_segments)
            if slopes is not None:
                consider(from_slopes(slopes))
        # local descent on the best found slope vector
        if best_f is not None and len(best_f.xs) == n_segments + 1:
            cur = list(np.diff(best_f.ys) / np.diff(best_f.xs))
            levels = sorted(slope_levels)
            improved = True
            while improved and n_eval < budget + 4 * n_segments:
                improved = False
                base = best_val
                for i in range(n_segments):
                    for delta in (-1, 1):
                        try:
                            k = levels.index(min(levels, key=lambda s: abs(s - cur[i])))
                        except ValueError:
                            continue
                        k2 = k + delta
                        if not (0 <= k2 < len(levels)):
                            continue
                        trial = list(cur)
                        trial[i] = levels[k2]
                        consider(from_slopes(trial))
                if best_val < base - 1e-15:
                    improved = True
                    cur = list(np.diff(best_f.ys) / np.diff(best_f.xs))

    if best_f is None:
        raise ValueError("no feasible candidate found")
    return SigmaTauResult(best_val, best_f, n_eval, best_dec)


def lipschitz_scan(D: Profile, t_range, tau: float, **kwargs) -> list[dict]:
    """Scan sigma_tau over t, enforcing the class-nesting monotonicity.

    Smaller t admits every candidate feasible at larger t, so estimates are
    clamped to be nondecreasing in t; the empirical modulus is reported.
    """
    ts = list(t_range)
    if ts != sorted(ts):
        raise ValueError("t_range must be sorted")
    rows = []
    ceiling = math.inf
    for t in reversed(ts):
        res = sigma_tau(D, t, tau, **kwargs)
        est = min(res.estimate, ceiling)
        ceiling = est
        rows.append({"t": t, "estimate": est, "certificate": res.certificate})
    rows.reverse()
    for prev, cur in zip(rows, rows[1:]):
        dt = cur["t"] - prev["t"]
        cur["modulus"] = (cur["estimate"] - prev["estimate"]) / dt if dt > 0 else 0.0
    return rows


def verify_planar_bound(
    u: float,
    zeta: float,
    eta=0.01,
    tau: float = 0.01,
    budget: int = 1000,
    s_grid=None,
    **kwargs,
) -> dict:
    """Check that the planar profile value exceeds s across s in (0, phi(u)-zeta].

    Parametric in the supplied eta table; the shipped constant default is
    non-canonical.  Reports per-s margins; PASS iff all are strictly positive.
    """
    s_max = phi(u) - zeta
    if s_grid is None:
        s_grid = [s_max * k / 6.0 for k in range(1, 7)]
    rows = []
    for idx, s in enumerate(s_grid):
        if not (0.0 < s <= s_max + _TOL):
            raise ValueError(f"s={s} outside (0, {s_max}]")
        D = PlanarProfile(s, eta=eta)
        res = sigma_tau(D, u, tau, budget=budget, **kwargs)
        rows.append(
            {
                "s": s,
                "tau": tau,
                "estimate": res.estimate,
                "margin": res.estimate - s,
                "certificate_id": f"s{idx}",
                "certificate": res.certificate,
                "base_case": s <= u / 3.0,
            }
        )
    return {"rows": rows, "passed": all(r["margin"] > 0.0 for r in rows)}
