import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from admlat.boxcount import (Box, _offsets, count_points, enumerate_points, growth_experiment, remainder,
                             remainder_at, sup_remainder)
from admlat.errors import ValidationError, VolumeLimitExceeded

from oracles import brute_count, dense_theta_sup, identity_basis, mp_basis


@pytest.fixture(scope="module")
def mp_rows(fields):
    rows = {name: mp_basis(fd) for name, fd in fields.items()}
    rows["Z2"] = identity_basis(2)
    rows["Z3"] = identity_basis(3)
    return rows


def test_box_validation():
    with pytest.raises(ValidationError):
        Box((0, 0), (1, -1))
    with pytest.raises(ValidationError):
        Box((0,), (1, 1))
    assert Box((1, 2), (2, 3)).volume == 6


def test_z2_examples(lattices):
    g = lattices["Z2"]
    assert count_points(g, Box((0, 0), (2, 2))) == 4
    assert remainder(g, Box((0, 0), (2, 2))).remainder == 0
    assert count_points(g, Box((0.5, 0), (0.5, 1))) == 0
    assert remainder(g, Box((0, 0), (1.5, 1.5))).remainder == 1.75
    # closed upper faces pick up the far edge
    assert count_points(g, Box((0, 0), (2, 2)), closed_upper=True) == 9


def test_sqrt2_box(lattices, mp_rows):
    g = lattices["sqrt2"]
    rep = remainder(g, Box((0, 0), (5, 5)))
    assert rep.count == brute_count(mp_rows["sqrt2"], (0, 0), (5, 5))
    assert rep.remainder == pytest.approx(rep.count - 25 / (2 * math.sqrt(2)), abs=1e-12)


@pytest.mark.parametrize("name", ["sqrt2", "sqrt5", "cubic", "Z2", "Z3"])
def test_count_matches_oracle(lattices, mp_rows, name):
    g = lattices[name]
    rng = np.random.default_rng(11)
    s = g.dim
    for i in range(12):
        if i % 3 == 0:
            # integer corners put lattice points exactly on faces
            origin = rng.integers(-3, 3, s).astype(float)
            lengths = rng.integers(1, 4, s).astype(float)
        else:
            origin = rng.uniform(-4, 4, s)
            lengths = rng.uniform(0.2, 4.5, s)
        for closed in (False, True):
            got = count_points(g, Box(tuple(origin), tuple(lengths)), closed_upper=closed)
            assert got == brute_count(mp_rows[name], origin, lengths, closed)


def test_enumerate_points_coords(lattices):
    g = lattices["cubic"]
    coeffs, coords = enumerate_points(g, Box((-2, -2, -2), (4, 4, 4)))
    np.testing.assert_allclose(coeffs.astype(float) @ g.basis, coords)
    assert np.all((coords >= -2) & (coords < 2))


def test_translation_periodicity(lattices):
    g = lattices["sqrt2"]
    rng = np.random.default_rng(4)
    for _ in range(20):
        x = rng.uniform(-3, 3, 2)
        n = rng.uniform(1, 6, 2)
        shift = g.point(rng.integers(-4, 5, 2)).coords
        a = count_points(g, Box(tuple(x), tuple(n)))
        b = count_points(g, Box(tuple(x + shift), tuple(n)))
        assert a == b


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2), st.lists(st.floats(0.1, 4), min_size=2, max_size=2),
       st.lists(st.floats(0, 2), min_size=2, max_size=2))
def test_monotone(lattices, x, n, extra):
    g = lattices["sqrt5"]
    small = Box(tuple(x), tuple(n))
    big = Box(tuple(x), tuple(a + b for a, b in zip(n, extra)))
    assert count_points(g, small) <= count_points(g, big)


def test_volume_guard(lattices):
    with pytest.raises(VolumeLimitExceeded):
        count_points(lattices["sqrt2"], Box((0, 0), (1e6, 1e6)), limit=1e6)


def test_sup_examples(lattices):
    z = lattices["Z2"]
    r = sup_remainder(z, (1, 1), (0, 0))
    assert r.sup_abs_remainder == 1 and r.approach == "from_above" and r.theta_star == (0.0, 0.0)
    r = sup_remainder(z, (1, 1), (0.5, 0.5))
    assert r.sup_abs_remainder == pytest.approx(0.75)


def test_sup_sqrt2_against_dense_grid(lattices):
    g = lattices["sqrt2"]
    nvec, x = (16.0, 16.0), (0.0, 0.0)
    exact = sup_remainder(g, nvec, x)
    dense = dense_theta_sup(_offsets(g, nvec, x), nvec, g.det)
    assert dense <= exact.sup_abs_remainder + 1e-9
    # the grid misses at most a jump of one point plus the volume modulus of one grid step
    assert exact.sup_abs_remainder - dense <= 1 + 2 * 16 * 16 / 512 / g.det
    again = remainder_at(g, nvec, x, exact.theta_star, exact.approach)
    assert again == pytest.approx(exact.signed_remainder, abs=1e-9)


@pytest.mark.parametrize("x", [(0.0, 0.0), (0.3, 0.7)])
def test_sampled_never_beats_exact(lattices, x):
    g = lattices["sqrt2"]
    exact = sup_remainder(g, (20, 12), x)
    sampled = sup_remainder(g, (20, 12), x, mode="sampled", seed=3)
    assert sampled.sup_abs_remainder <= exact.sup_abs_remainder + 1e-9
    again = remainder_at(g, (20, 12), x, sampled.theta_star, sampled.approach)
    assert abs(again) == pytest.approx(sampled.sup_abs_remainder, abs=1e-9)


def test_sampled_s3(lattices):
    g = lattices["cubic"]
    r1 = sup_remainder(g, (6, 6, 6), (0.1, 0.2, 0.3), mode="sampled", seed=1, n_samples=512)
    r2 = sup_remainder(g, (6, 6, 6), (0.1, 0.2, 0.3), mode="sampled", seed=1, n_samples=512)
    assert r1 == r2
    assert r1.sup_abs_remainder > 0
    with pytest.raises(ValidationError):
        sup_remainder(g, (6, 6, 6), (0, 0, 0))


def test_growth_rows(lattices):
    g = lattices["sqrt2"]
    assert growth_experiment(g, (0, 0), []) == []
    rows = growth_experiment(g, (0, 0), [1, 16, 256])
    assert [r.N for r in rows] == [1, 16, 256]
    assert rows[0].sup_abs_R <= 1.0
    assert rows[-1].ln_N == pytest.approx(math.log(256))
    wide = growth_experiment(g, (0, 0), [64], aspect=(4, 1))
    assert wide[0].N == 64
