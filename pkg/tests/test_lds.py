import math

import numpy as np
import pytest

from admlat.boxcount import Box, count_points
from admlat.errors import BadPrefix, NonAdmissible, TooLargeForExact, ValidationError
from admlat.lds import (PointSet, delta, exact_dstar, generate_pointset, load_pointset, prefix_schedule,
                        prefix_sup_experiment, save_pointset, star_discrepancy)

from oracles import brute_dstar


def test_generate_counts_match_boxcount(lattices):
    g = lattices["sqrt2"]
    for n, x in ((16, (0.0, 0.0)), (1, (0.0, 0.0)), (1, (0.3, 0.6)), (50, (0.25, 0.75))):
        ps = generate_pointset(g, x, n)
        window = Box(tuple(-np.asarray(x)), (1.0, n * g.det))
        assert ps.n == count_points(g, window)
        assert np.all((ps.points >= 0) & (ps.points < 1))
    ps = generate_pointset(g, (0.0, 0.0), 16)
    assert ps.n == 16


def test_generate_order(lattices):
    g = lattices["cubic"]
    ps = generate_pointset(g, (0.1, 0.2, 0.3), 40)
    assert np.all((ps.points >= 0) & (ps.points < 1))
    assert np.all(np.diff(ps.points[:, -1]) >= 0)
    assert ps.provenance["height"] == pytest.approx(40 * g.det)


def test_generate_errors(lattices):
    with pytest.raises(NonAdmissible):
        generate_pointset(lattices["Z2"], (0.0, 0.0), 4)
    with pytest.raises(ValidationError):
        generate_pointset(lattices["sqrt2"], (0.0, 0.0), 0)
    with pytest.raises(ValidationError):
        generate_pointset(lattices["sqrt2"], (0.0, 0.0, 0.0), 4)


def test_delta_examples():
    ps = PointSet(np.zeros((1, 2)))
    assert delta((0.5, 0.5), ps, 1) == pytest.approx(0.75)
    pts = np.random.default_rng(0).uniform(0, 1, (30, 3))
    assert delta((1.0, 1.0, 1.0), PointSet(pts), 30) == 0
    with pytest.raises(BadPrefix):
        delta((0.5, 0.5), ps, 2)
    with pytest.raises(ValidationError):
        delta((0.0, 0.5), ps, 1)


def test_delta_against_membership_loop(lattices):
    ps = generate_pointset(lattices["sqrt2"], (0.1, 0.2), 200)
    rng = np.random.default_rng(1)
    for _ in range(1000):
        y = rng.uniform(0.001, 1, 2)
        m = int(rng.integers(1, ps.n + 1))
        count = 0
        for p in ps.points[:m]:
            if p[0] < y[0] and p[1] < y[1]:
                count += 1
        assert delta(y, ps, m) == pytest.approx(count - m * y[0] * y[1], abs=1e-12)


def test_dstar_examples():
    r = exact_dstar(np.zeros((1, 2)))
    assert r.d_star == 1.0
    pts = np.array([[0.0, 0.0], [0.5, 0.5]])
    assert exact_dstar(pts).d_star == pytest.approx(brute_dstar(pts), abs=1e-15)
    r = exact_dstar(np.array([[0.25], [0.75]]))
    assert r.d_star == pytest.approx(0.25)


@pytest.mark.parametrize("s", [2, 3])
def test_exact_matches_brute_on_random_sets(s):
    rng = np.random.default_rng(20 + s)
    for n in (1, 2, 3, 7, 20, 41):
        pts = rng.uniform(0, 1, (n, s))
        if n > 5:
            # repeated coordinates exercise ties on the critical grid
            pts[: n // 3, 0] = pts[n // 3, 0]
        r = exact_dstar(pts)
        assert abs(r.d_star - brute_dstar(pts)) <= 1e-12


@pytest.mark.parametrize("name", ["sqrt2", "sqrt5", "cubic"])
def test_exact_matches_brute_on_generated_sets(lattices, name):
    g = lattices[name]
    x = np.linspace(0.13, 0.71, g.dim)
    for n in (4, 17, 33):
        ps = generate_pointset(g, x, n)
        r = star_discrepancy(ps)
        assert abs(r.d_star - brute_dstar(ps.points)) <= 1e-12


def test_witness_reproduces(lattices):
    ps = generate_pointset(lattices["sqrt2"], (0.37, 0.81), 300)
    r = star_discrepancy(ps)
    assert abs(abs(delta(r.witness_box, ps, ps.n)) - r.n_dstar) <= 1e-9
    pts = np.random.default_rng(3).uniform(0, 1, (60, 3))
    r = exact_dstar(pts)
    assert abs(abs(delta(r.witness_box, PointSet(pts), 60)) - r.n_dstar) <= 1e-9


def test_permutation_invariance(lattices):
    ps = generate_pointset(lattices["sqrt5"], (0.2, 0.4), 120)
    perm = np.random.default_rng(4).permutation(ps.n)
    a = star_discrepancy(ps).d_star
    b = star_discrepancy(PointSet(ps.points[perm])).d_star
    assert a == b


def test_lower_bound_below_exact(lattices):
    ps = generate_pointset(lattices["sqrt2"], (0.5, 0.5), 400)
    exact = star_discrepancy(ps).d_star
    for seed in (0, 1, 2):
        lb = star_discrepancy(ps, mode="lower_bound", n_samples=4096, seed=seed)
        assert lb.d_star <= exact + 1e-15
    a, b = (star_discrepancy(ps, mode="lower_bound", seed=5) for _ in range(2))
    assert a.d_star == b.d_star
    np.testing.assert_array_equal(a.witness_box, b.witness_box)
    with pytest.raises(ValidationError):
        star_discrepancy(ps, mode="guess")


def test_exact_limits():
    with pytest.raises(TooLargeForExact):
        exact_dstar(np.zeros((5000, 3)))
    with pytest.raises(TooLargeForExact):
        exact_dstar(np.zeros((3, 4)))


def test_prefix_experiment(lattices):
    ps = generate_pointset(lattices["sqrt2"], (0.0, 0.0), 64)
    full = prefix_sup_experiment(ps, projected=False)
    assert [r.m for r in full] == list(range(1, 65))
    # one point near the origin of the full square
    p = ps.points[0]
    assert full[0].d_star_m == pytest.approx(1 - p[0] * p[1], abs=1e-12)
    proj = prefix_sup_experiment(ps)
    for rows in (full, proj):
        run = [r.running_sup for r in rows]
        assert run == sorted(run)
        assert run[-1] == max(r.m_times_d_star_m for r in rows)
    assert proj[5].d_star_m == exact_dstar(ps.points[:6, :1]).d_star


def test_prefix_schedule():
    assert prefix_schedule(10) == list(range(1, 11))
    sched = prefix_schedule(5000)
    assert sched[:256] == list(range(1, 257)) and sched[-1] == 5000
    assert all(b > a for a, b in zip(sched, sched[1:]))
    assert all(b <= math.ceil(a * 1.1) + 1 for a, b in zip(sched[255:], sched[256:]))


def test_file_round_trip(tmp_path, lattices):
    ps = generate_pointset(lattices["cubic"], (0.1, 0.2, 0.3), 25)
    p = tmp_path / "pts.txt"
    save_pointset(ps, p)
    # the window holds about n points, not exactly n
    assert p.read_text().splitlines()[0] == f"3 {ps.n}"
    back = load_pointset(p)
    np.testing.assert_array_equal(back.points, ps.points)
    p.write_text("2 1\n0.5 1.0\n")
    with pytest.raises(ValidationError):
        load_pointset(p)
