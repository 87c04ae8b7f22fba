import math

import mpmath
import numpy as np
import pytest

from admlat.boxcount import Box, remainder
from admlat.errors import CutoffTooLarge, ValidationError
from admlat.fourier import (PoissonParams, SmoothingKernel, auto_cutoff, box_ft, kernel_ft, poisson_remainder,
                            smoothed_remainder, truncation_budget)


@pytest.fixture(scope="module")
def kernel():
    return SmoothingKernel()


def _mp_bump():
    f = lambda t: mpmath.exp(-1 / (1 - 4 * t * t))
    return f, mpmath.quad(f, [-0.5, 0, 0.5])


def test_kernel_shape(kernel):
    t = np.linspace(-0.7, 0.7, 1401)
    w = kernel(t)
    assert np.all(w >= 0)
    assert np.all(w[np.abs(t) >= 0.5] == 0)
    np.testing.assert_array_equal(w, kernel(-t))
    with mpmath.workdps(30):
        f, z = _mp_bump()
        assert abs(kernel.normalization - 1 / float(z)) < 1e-12


def test_kernel_ft_against_mpmath(kernel):
    assert kernel_ft(kernel, 0.0) == pytest.approx(1.0, abs=1e-12)
    with mpmath.workdps(30):
        f, z = _mp_bump()
        for u in (0.3, 1.0, 7.5, 10.0, 100.0):
            ref = mpmath.quad(lambda t: f(t) * mpmath.cos(2 * mpmath.pi * u * t), mpmath.linspace(-0.5, 0.5, 41)) / z
            assert abs(kernel_ft(kernel, u) - float(ref)) < 1e-12
    u = np.linspace(-40, 40, 161)
    np.testing.assert_allclose(kernel.ft(u), kernel.ft(-u), rtol=0, atol=1e-15)


def test_kernel_ft_decay(kernel):
    _, _, c = kernel.envelope
    u = np.geomspace(1, 64, 60)
    assert np.all(np.abs(kernel.ft(u)) <= c * (1 + u) ** -4 + 1e-15)
    # beyond the table the decay constant must still hold
    assert abs(kernel_ft(kernel, 100.0)) <= c * 101.0 ** -4


def test_kernel_ft_near_zero(kernel):
    # the transform of an even density is 1 - 2 pi^2 m2 y^2 + O(y^4), m2 the second moment
    with mpmath.workdps(30):
        f, z = _mp_bump()
        m2 = float(mpmath.quad(lambda t: t * t * f(t), [-0.5, 0, 0.5]) / z)
    const = 2 * math.pi ** 2 * m2 * 0.1
    y = np.linspace(-0.1, 0.1, 201)
    assert np.all(np.abs(kernel.ft(y) - 1) <= const * np.abs(y) + 1e-14)


def test_ft_table_matches_quadrature(kernel):
    u = np.linspace(0, 63, 997)
    np.testing.assert_allclose(kernel.ft_fast(u), kernel.ft(u), rtol=0, atol=1e-10)
    assert kernel.ft_fast(70.0) == 0.0


def test_cdf(kernel):
    assert kernel.cdf(-1.0) == 0.0 and kernel.cdf(1.0) == pytest.approx(1.0, abs=1e-14)
    assert kernel.cdf(0.0) == pytest.approx(0.5, abs=1e-12)


def test_box_ft_examples():
    assert box_ft((2.0, 3.0), (0.0, 0.0)) == 6.0
    assert abs(box_ft((2.0, 3.0), (0.5, 0.1))) < 1e-15
    assert box_ft((1.0,), (0.5,)) == pytest.approx(2j / math.pi, abs=1e-15)
    with mpmath.workdps(30):
        ref = mpmath.quad(lambda t: mpmath.expjpi(2 * 0.37 * t), [0, 2.5])
    assert box_ft((2.5,), (0.37,)) == pytest.approx(complex(ref), abs=1e-14)


def test_z2_integer_box(kernel, lattices):
    g = lattices["Z2"]
    tau = 1 / 16
    C = auto_cutoff(kernel, (2, 2), tau)
    r = poisson_remainder(g, (2, 2), (0.0, 0.0), PoissonParams(tau, C), kernel)
    assert r.truncation_budget <= 0.5
    assert abs(r.r_dotdot - 0) <= 4 + r.truncation_budget
    assert r.imag_residue <= 1e-9


@pytest.mark.parametrize("tau", [1 / 64, 1 / 256])
def test_sqrt2_band_and_poisson_identity(kernel, lattices, tau):
    g = lattices["sqrt2"]
    xs = np.random.default_rng(7).uniform(0, 1, (5, 2))
    C = auto_cutoff(kernel, (8, 8), tau)
    r = poisson_remainder(g, (8, 8), xs, PoissonParams(tau, C), kernel)
    assert r.truncation_budget <= 0.5
    assert r.imag_residue <= 1e-9
    for x, rd in zip(xs, r.r_dotdot):
        R = remainder(g, Box(tuple(x), (8, 8))).remainder
        assert abs(R - rd) <= 4 + r.truncation_budget
        # Poisson summation: the dual sum reproduces the smoothed direct sum up to the tail
        assert abs(smoothed_remainder(g, (8, 8), x, tau, kernel) - rd) <= r.truncation_budget
    wider = poisson_remainder(g, (8, 8), xs, PoissonParams(tau, 2 * C), kernel, max_points=1e8)
    assert np.max(np.abs(wider.r_dotdot - r.r_dotdot)) < r.truncation_budget


def test_generic_path_s3(kernel, lattices):
    g = lattices["Z3"]
    tau = 1 / 8
    C = auto_cutoff(kernel, (1.5, 2, 2), tau)
    x = (0.25, 0.1, 0.6)
    r = poisson_remainder(g, (1.5, 2, 2), x, PoissonParams(tau, C), kernel)
    assert r.imag_residue <= 1e-9
    assert abs(smoothed_remainder(g, (1.5, 2, 2), x, tau, kernel) - r.r_dotdot) <= r.truncation_budget
    threaded = poisson_remainder(g, (1.5, 2, 2), x, PoissonParams(tau, C), kernel, threads=2)
    assert threaded.r_dotdot == r.r_dotdot


def test_budget_decreases(kernel):
    b = [truncation_budget(kernel, (8, 8), 1 / 64, c) for c in (10, 50, 200, 1000)]
    assert all(a >= c for a, c in zip(b, b[1:]))


def test_guards(kernel, lattices):
    g = lattices["sqrt2"]
    with pytest.raises(CutoffTooLarge):
        poisson_remainder(g, (8, 8), (0, 0), PoissonParams(1 / 4096, 8000.0), kernel)
    with pytest.raises(ValidationError):
        poisson_remainder(g, (8, 8), (0, 0), PoissonParams(0.0, 10.0), kernel)
