import math

import numpy as np
import pytest

from dimlab.dyadic import (
    CubeRef,
    DyadicMeasure,
    build_from_atoms,
    magnify,
    restrict_normalize,
)
from oracles import min_cells_bruteforce, random_measure, robust_entropy_bruteforce


def test_cuberef_validation():
    CubeRef(3, (0, 7))
    with pytest.raises(ValueError):
        CubeRef(3, (8, 0))
    with pytest.raises(ValueError):
        CubeRef(-1, (0,))


def test_construction_rejects_bad_leaves():
    with pytest.raises(ValueError):
        DyadicMeasure(2, 4, {(0, 0): -1.0})
    with pytest.raises(ValueError):
        DyadicMeasure(2, 4, {(16, 0): 1.0})
    with pytest.raises(ValueError):
        DyadicMeasure(2, 4, {(0,): 1.0})
    assert DyadicMeasure(2, 4, {}).trivial
    assert DyadicMeasure(2, 4, {(0, 0): 0.0}).trivial


def test_level_masses_consistency():
    rng = np.random.default_rng(0)
    for _ in range(20):
        mu = random_measure(rng, d=2, m=6, n_leaves=25)
        for level in range(0, 6):
            coarse = mu.level_masses(level)
            fine = mu.level_masses(level + 1)
            # children sum to parents
            acc = {}
            for c, v in fine.items():
                p = tuple(x >> 1 for x in c)
                acc[p] = acc.get(p, 0.0) + v
            assert set(acc) == set(coarse)
            for k in coarse:
                assert abs(acc[k] - coarse[k]) < 1e-12
        assert abs(sum(mu.level_masses(0).values()) - 1.0) < 1e-9


def test_entropy_bounds_and_uniform():
    n = 16
    mu = DyadicMeasure(1, 4, {(i,): 1.0 / n for i in range(n)})
    assert abs(mu.entropy(4) - 4.0) < 1e-12
    assert abs(mu.entropy(2) - 2.0) < 1e-12
    rng = np.random.default_rng(1)
    for _ in range(50):
        mu = random_measure(rng, d=2, m=5, n_leaves=20)
        for level in (0, 2, 5):
            h = mu.entropy(level)
            assert 0.0 <= h <= level * mu.d + 1e-9
            # counting bound
            assert mu.box_count(level) >= 2.0 ** h - 1e-6


def test_entropy_requires_normalized():
    mu = DyadicMeasure(1, 2, {(0,): 2.0})
    with pytest.raises(ValueError):
        mu.entropy(2)


def test_robust_entropy_against_bruteforce():
    rng = np.random.default_rng(42)
    for trial in range(200):
        n = int(rng.integers(2, 13))
        masses = rng.random(n) + 1e-3
        masses /= masses.sum()
        mu = DyadicMeasure(1, 4, {(i,): m for i, m in enumerate(masses)})
        Theta = float(rng.uniform(1.0, 4.0))
        fast = mu.robust_entropy(4, Theta)
        slow = robust_entropy_bruteforce(masses, Theta)
        assert abs(fast - slow) < 1e-9, (trial, fast, slow)


def test_robust_entropy_limits():
    rng = np.random.default_rng(3)
    mu = random_measure(rng, d=1, m=5, n_leaves=12)
    assert abs(mu.robust_entropy(5, 1.0) - mu.entropy(5)) < 1e-9
    # monotone nonincreasing in Theta
    prev = mu.entropy(5)
    for Theta in (1.5, 2.0, 4.0, 16.0):
        cur = mu.robust_entropy(5, Theta)
        assert cur <= prev + 1e-12
        prev = cur


def test_robustness_check_against_bruteforce():
    rng = np.random.default_rng(7)
    for trial in range(200):
        n = int(rng.integers(2, 21))
        masses = rng.random(n) + 1e-3
        masses /= masses.sum()
        mu = DyadicMeasure(1, 5, {(i,): m for i, m in enumerate(masses)})
        s = float(rng.uniform(0.1, 1.0))
        r = float(rng.uniform(0.05, 0.95))
        ok, witness = mu.robustness_check(5, s, r)
        kmin = min_cells_bruteforce(masses, r)
        threshold = 2.0 ** (5 * s)
        expect = kmin is None or kmin > threshold
        assert ok == expect, (trial, kmin, threshold)
        if not ok:
            assert witness is not None and len(witness) == kmin


def test_frostman_fit_selfsimilar():
    # exact 1/2-dimensional measure: max mass at level j is 2^{-j/2}
    leaves = {}
    for i in range(16):
        bits = [(i >> b) & 1 for b in range(4)]
        # spread generation bits to even positions (quarter Cantor)
        coord = sum(b << (7 - 2 * g) for g, b in enumerate(bits))
        leaves[(coord,)] = 1.0 / 16
    mu = DyadicMeasure(1, 8, leaves)
    fit = mu.frostman_fit((2, 8))
    assert abs(fit.s - 0.5) < 0.05
    assert fit.C < 4.0
    assert fit.residual <= 1e-9


def test_frostman_fit_constant_cap():
    # one heavy atom forces the constant down via the exponent
    mu = DyadicMeasure(1, 10, {(0,): 0.5, **{(i,): 0.5 / 1023 for i in range(1, 1024)}})
    fit = mu.frostman_fit((1, 9), max_log2_C=2.0)
    assert fit.C <= 4.0 + 1e-9
    # the heavy atom pins the exponent near zero once C is capped
    assert fit.s < 0.5


def test_riesz_energy_small_oracle():
    rng = np.random.default_rng(11)
    mu = random_measure(rng, d=2, m=5, n_leaves=30)
    pts = mu.leaf_centers()
    w = mu.leaf_mass_vector()
    s = 0.7
    expect = 0.0
    for i in range(len(w)):
        for j in range(len(w)):
            dist = float(np.linalg.norm(pts[i] - pts[j]))
            if dist == 0.0:
                dist = 2.0 ** (-5)
            expect += w[i] * w[j] / dist ** s
    assert abs(mu.riesz_energy(s) - expect) < 1e-9 * expect


def test_l2_density_norm_lebesgue():
    n = 16
    mu = DyadicMeasure(1, 4, {(i,): 1.0 / n for i in range(n)})
    for level in (0, 2, 4):
        assert abs(mu.l2_density_norm(level) - 1.0) < 1e-12


def test_serialization_roundtrip():
    rng = np.random.default_rng(5)
    for _ in range(20):
        mu = random_measure(rng, d=2, m=7, n_leaves=15)
        back = DyadicMeasure.from_text(mu.to_text())
        assert back.d == mu.d and back.m == mu.m
        assert back.leaves == mu.leaves


def test_serialization_rejects_garbage():
    with pytest.raises(ValueError):
        DyadicMeasure.from_text("")
    with pytest.raises(ValueError):
        DyadicMeasure.from_text("2\n")
    with pytest.raises(ValueError):
        DyadicMeasure.from_text("1 2\n0 0.5\n0 0.5\n")  # duplicate leaf
    with pytest.raises(ValueError):
        DyadicMeasure.from_text("2 2\n0 0.5\n")  # wrong arity


def test_build_from_atoms():
    mu = build_from_atoms([((0.1, 0.1), 1.0), ((0.9, 0.9), 3.0)], 3)
    assert mu.leaves == {(0, 0): 1.0, (7, 7): 3.0}
    with pytest.raises(ValueError):
        build_from_atoms([((1.2, 0.0), 1.0)], 3)
    assert build_from_atoms([((0.5,), 0.0)], 3).trivial


def test_restrict_and_magnify():
    rng = np.random.default_rng(9)
    mu = random_measure(rng, d=2, m=6, n_leaves=40)
    Q = next(iter(mu.support_cubes(2)))
    sub = magnify(mu, Q)
    assert sub.m == 4 and abs(sub.total_mass - 1.0) < 1e-9
    # magnified masses proportional to originals inside Q
    qmass = mu.mass_of(Q)
    for rel, v in sub.leaves.items():
        orig = tuple((q << 4) + c for q, c in zip(Q.coords, rel))
        assert abs(v - mu.leaves[orig] / qmass) < 1e-12
    res = restrict_normalize(mu, [Q])
    assert abs(res.total_mass - 1.0) < 1e-9
    with pytest.raises(ValueError):
        restrict_normalize(mu, [])
