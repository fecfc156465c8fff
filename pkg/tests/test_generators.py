import math

import numpy as np
import pytest

from dimlab.generators import (
    gen_cantor_product,
    gen_circle_pair,
    gen_lattice_falconer,
    gen_product_set,
    gen_train_track,
)


def test_cantor_product_exponents():
    mu = gen_cantor_product(0.25, 2, 12)
    assert abs(mu.total_mass - 1.0) < 1e-9
    fit = mu.frostman_fit((2, 10))
    assert abs(fit.s - 1.0) < 0.05
    mu1 = gen_cantor_product(0.25, 1, 12)
    assert abs(mu1.frostman_fit((2, 10)).s - 0.5) < 0.05
    # exact masses at aligned levels: 2^{-j} per generation-j cube, d=1
    for g in (1, 2, 3):
        cells = mu1.level_masses(2 * g)
        assert len(cells) == 2 ** g
        for v in cells.values():
            assert abs(v - 2.0 ** -g) < 1e-12


def test_cantor_half_is_lebesgue():
    mu = gen_cantor_product(0.5, 1, 6)
    assert len(mu.leaves) == 64
    assert all(abs(v - 1.0 / 64) < 1e-12 for v in mu.leaves.values())


def test_cantor_rejects_non_dyadic_ratio():
    with pytest.raises(ValueError):
        gen_cantor_product(0.3, 2, 8)
    with pytest.raises(ValueError):
        gen_cantor_product(0.25, 4, 8)


def test_lattice_falconer_aligned_exponent():
    mu = gen_lattice_falconer(4, 2, 12)
    assert abs(mu.total_mass - 1.0) < 1e-9
    # aligned block levels are multiples of 2p = 4: slope there is d/2
    m4 = max(mu.level_masses(4).values())
    m8 = max(mu.level_masses(8).values())
    slope = (math.log2(m4) - math.log2(m8)) / 4.0
    assert abs(slope - 1.0) < 0.05
    with pytest.raises(ValueError):
        gen_lattice_falconer(3, 2, 8)
    # q = 2 degenerates to the full uniform measure
    full = gen_lattice_falconer(2, 1, 4)
    assert len(full.leaves) == 16


def test_train_track_geometry():
    delta, depth = 6, 12
    mu = gen_train_track(delta, depth)
    ys = sorted({k[1] for k in mu.leaves})
    assert len(ys) == 2 ** (delta // 2)
    # rows spaced 2^{-delta} apart, starting at 0
    step = 1 << (depth - delta)
    assert ys == [k * step for k in range(len(ys))]
    assert gen_train_track(delta, depth, n_tracks=0).trivial
    with pytest.raises(ValueError):
        gen_train_track(5, 12)
    with pytest.raises(ValueError):
        gen_train_track(12, 12)


def test_circle_pair_two_components():
    mu = gen_circle_pair(8)
    xs = mu.leaf_centers()[:, 0]
    assert xs.max() > 0.7 and xs.min() < 0.3
    # x-gap between the two arcs
    mid = np.sort(xs)
    gaps = np.diff(mid)
    assert gaps.max() > 0.2
    assert abs(mu.total_mass - 1.0) < 1e-9


def test_product_set():
    mu = gen_product_set({"kind": "cantor", "params": {"r": 0.25}}, 10)
    assert abs(mu.frostman_fit((2, 8)).s - 1.0) < 0.05
    leb = gen_product_set({"kind": "lebesgue"}, 4)
    assert len(leb.leaves) == 256
    pt = gen_product_set({"kind": "point", "params": {"x": 0.3}}, 6)
    assert len(pt.leaves) == 1
    with pytest.raises(ValueError):
        gen_product_set({"kind": "nope"}, 6)
