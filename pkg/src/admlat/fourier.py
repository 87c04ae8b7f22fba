"""Smoothed lattice counts through Poisson summation over the dual lattice.

The smoothed remainder is evaluated two ways:

* ``poisson_remainder`` sums Fourier coefficients over dual points in a sup-norm
  ball and reports an explicit estimate of the dropped tail;
* ``smoothed_remainder`` sums the smoothed box indicator over lattice points
  directly.

The two are equal by Poisson summation, which the tests use as a cross-check.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numba
import numpy as np
from scipy.interpolate import CubicSpline

from .boxcount import Box, _level_bounds, enumerate_points, iter_candidates
from .errors import CutoffTooLarge, ValidationError
from .lattice import Lattice

MAX_DUAL_POINTS = 10**7
TABLE_UMAX = 64.0
TABLE_STEP = 1.0 / 256
# linear-interpolation table for the compiled s = 2 kernel
FAST_STEP = 1.0 / 8192


def tanh_sinh(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodes, weights and 1 - 4t^2 for the integral over [-1/2, 1/2]; n is odd-rounded."""
    k = n // 2
    h = 3.2 / k
    x = h * np.arange(-k, k + 1)
    arg = 0.5 * np.pi * np.sinh(x)
    t = 0.5 * np.tanh(arg)
    sech2 = 1.0 / np.cosh(arg) ** 2
    w = 0.5 * h * 0.5 * np.pi * np.cosh(x) * sech2
    return t, w, sech2


@dataclass(frozen=True)
class SmoothingKernel:
    """The bump exp(-1/(1 - 4t^2)) on |t| < 1/2, scaled to unit mass."""

    quadrature_nodes: int = 2048
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @cached_property
    def _quad(self):
        t, w, one_minus = tanh_sinh(self.quadrature_nodes)
        with np.errstate(divide="ignore", over="ignore"):
            vals = np.where(one_minus > 0, np.exp(-1.0 / one_minus), 0.0)
        return t, w * vals

    @cached_property
    def normalization(self) -> float:
        """1 / integral of the unnormalized bump."""
        _, wv = self._quad
        return 1.0 / float(np.sum(wv))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        inside = np.abs(t) < 0.5
        out = np.zeros_like(t)
        tt = t[inside]
        out[inside] = np.exp(-1.0 / (1.0 - 4.0 * tt * tt)) * self.normalization
        return out

    def ft(self, u) -> np.ndarray:
        """Fourier transform by direct quadrature; real because the bump is even."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        t, wv = self._quad
        out = np.empty(u.shape)
        flat = u.ravel()
        res = out.ravel()
        for i in range(0, len(flat), 2048):
            res[i:i + 2048] = np.cos(2 * np.pi * np.outer(flat[i:i + 2048], t)) @ wv
        return out * self.normalization

    def cdf(self, t) -> np.ndarray:
        """Integral of the kernel from -inf to t."""
        return self._cdf_spline(np.clip(np.asarray(t, dtype=float), -0.5, 0.5))

    @cached_property
    def _cdf_spline(self):
        grid = np.linspace(-0.5, 0.5, 4097)
        dens = self(grid)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
        # trapezoid on a smooth compactly supported integrand is spectrally accurate
        cum /= cum[-1]
        return CubicSpline(grid, cum)

    @cached_property
    def ft_table(self) -> CubicSpline:
        grid = np.arange(0.0, TABLE_UMAX + TABLE_STEP / 2, TABLE_STEP)
        return CubicSpline(grid, self.ft(grid))

    @cached_property
    def fine_table(self) -> np.ndarray:
        grid = np.arange(0.0, TABLE_UMAX + FAST_STEP / 2, FAST_STEP)
        return self.ft_table(grid)

    def ft_fast(self, u) -> np.ndarray:
        """Tabulated transform; zero outside the table, whose tail is budgeted."""
        a = np.abs(np.asarray(u, dtype=float))
        out = self.ft_table(np.minimum(a, TABLE_UMAX))
        return np.where(a <= TABLE_UMAX, out, 0.0)

    @cached_property
    def envelope(self) -> tuple[np.ndarray, np.ndarray]:
        """Decreasing envelope sup_{v >= u} |ft(v)| on the table grid, and the decay constant
        c with |ft(u)| <= c (1 + u)^-4 fitted on the table."""
        grid = self.ft_table.x
        vals = np.abs(self.ft_table(grid))
        env = np.maximum.accumulate(vals[::-1])[::-1]
        c = float(np.max(vals * (1 + grid) ** 4))
        return grid, np.maximum(env, 0.0), c


def kernel_ft(k: SmoothingKernel, u) -> float | np.ndarray:
    out = k.ft(u)
    return float(out[0]) if np.ndim(u) == 0 else out


def box_ft(lengths, gamma) -> np.ndarray | complex:
    """Fourier transform of the indicator of [0, N_1) x ... x [0, N_s) at gamma."""
    lengths = np.asarray(lengths, dtype=float)
    g = np.asarray(gamma, dtype=float)
    scalar = g.ndim == 1
    g = np.atleast_2d(g)
    with np.errstate(invalid="ignore", divide="ignore"):
        fac = np.where(g == 0.0, lengths[None, :], np.sin(np.pi * lengths[None, :] * g) / (np.pi * g))
    val = np.prod(fac, axis=1) * np.exp(1j * np.pi * (g @ lengths))
    return complex(val[0]) if scalar else val


class PoissonParams(NamedTuple):
    tau: float
    cutoff_radius: float
    quadrature_nodes: int = 2048


class PoissonResult(NamedTuple):
    r_dotdot: float | np.ndarray
    truncation_budget: float
    imag_residue: float
    n_terms: int
    cutoff_radius: float


def _tail_integral(kernel: SmoothingKernel, lo: float) -> float:
    """Integral over u > lo of E(u)/u, E the decay envelope of |ft|."""
    grid, env, c = kernel.envelope
    total = 0.0
    if lo < grid[-1]:
        u = np.geomspace(max(lo, 1e-12), grid[-1], 4000)
        e = np.interp(u, grid, env)
        total += float(np.sum(0.5 * (e[1:] / u[1:] + e[:-1] / u[:-1]) * np.diff(u)))
    start = max(lo, grid[-1])
    # beyond the table: c (1 + u)^-4 / u <= c u^-5, integrated
    total += c / (4 * start ** 4)
    return total


def truncation_budget(kernel: SmoothingKernel, lengths, tau: float, cutoff: float) -> float:
    """Estimate of the dual-sum tail outside the sup-norm ball of radius ``cutoff``.

    Replaces the lattice sum by its density integral (the 1/det prefactor cancels
    the dual density det) and bounds each factor by min(N_i, 1/(pi|t|)) times the
    decay envelope of the kernel transform.
    """
    full, inner = 1.0, 1.0
    for L in np.asarray(lengths, dtype=float):
        knee = 1.0 / (np.pi * L)
        _, env, _ = kernel.envelope
        head = 2.0 * L * min(knee, cutoff) * float(env[0])
        h_inf = 2.0 * L * knee * float(env[0]) + (2 / np.pi) * _tail_integral(kernel, tau * knee)
        if cutoff <= knee:
            h_c = head
        else:
            h_c = h_inf - (2 / np.pi) * _tail_integral(kernel, tau * cutoff)
        full *= h_inf
        inner *= h_c
    return max(0.0, full - inner)


def auto_cutoff(kernel: SmoothingKernel, lengths, tau: float, target: float = 0.45) -> float:
    """Smallest radius (to 1%) whose tail estimate is at most ``target``."""
    lo, hi = 1.0 / tau * 1e-3, 1.0 / tau
    while truncation_budget(kernel, lengths, tau, hi) > target:
        hi *= 2
        if hi > 1e12 / tau:
            raise CutoffTooLarge("tail estimate does not reach the target")
    while hi / lo > 1.01:
        mid = math.sqrt(lo * hi)
        if truncation_budget(kernel, lengths, tau, mid) > target:
            lo = mid
        else:
            hi = mid
    return hi


def expected_dual_points(g: Lattice, cutoff: float) -> float:
    # the dual lattice has covolume 1/det
    return (2 * cutoff) ** g.dim * g.det


def poisson_remainder(g: Lattice, lengths, x, params: PoissonParams, kernel: SmoothingKernel | None = None,
                      dual: Lattice | None = None, max_points: float = MAX_DUAL_POINTS,
                      threads: int = 1) -> PoissonResult:
    """Truncated dual-lattice sum for the smoothed remainder of the box [0, lengths) + x.

    ``x`` may be one shift or an array of shifts; the dual points and weights are
    shared between shifts.
    """
    from .lattice import dual_lattice

    kernel = kernel or SmoothingKernel(params.quadrature_nodes)
    lengths = np.asarray(lengths, dtype=float)
    shifts = np.atleast_2d(np.asarray(x, dtype=float))
    if params.tau <= 0:
        raise ValidationError("tau must be positive")
    C = float(params.cutoff_radius)
    est = expected_dual_points(g, C)
    if est > max_points:
        raise CutoffTooLarge(f"cutoff {C:.4g} needs ~{est:.3g} dual points (limit {max_points:.3g})")
    dual = dual or dual_lattice(g)
    lo = np.full(g.dim, -C)
    hi = np.full(g.dim, C)
    tau = params.tau

    def chunk_sum(coeffs):
        pts = coeffs.astype(float) @ dual.basis
        keep = np.all(np.abs(pts) <= C, axis=1) & np.any(coeffs != 0, axis=1)
        pts = pts[keep]
        w = box_ft(lengths, pts) * np.prod(kernel.ft_fast(tau * pts), axis=1)
        phase = np.exp(2j * np.pi * (pts @ shifts.T))
        return w @ phase, len(pts)

    if g.dim == 2:
        first, last = _level_bounds(dual.basis, 0, lo, hi, np.zeros((1, 2)))
        total = _dual_sum_2d(dual.basis, C, lengths, tau, shifts, kernel.fine_table, FAST_STEP,
                             int(first[0]), int(last[0]))
        n_terms = int(total[-1].real)
        total = total[:-1]
    else:
        total, n_terms = _dual_sum_chunked(chunk_sum, iter_candidates(dual.basis, lo, hi, chunk=1 << 18),
                                           len(shifts), threads)
    total /= g.det
    budget = truncation_budget(kernel, lengths, tau, C)
    imag = float(np.max(np.abs(total.imag)))
    r = total.real
    return PoissonResult(float(r[0]) if np.ndim(x) == 1 else r, budget, imag, n_terms, C)


def _dual_sum_chunked(chunk_sum, chunks, n_shifts, threads):
    total = np.zeros(n_shifts, dtype=complex)
    n_terms = 0
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            # map yields in submission order, so the reduction order is fixed
            for part, n in pool.map(chunk_sum, chunks):
                total += part
                n_terms += n
    else:
        for c in chunks:
            part, n = chunk_sum(c)
            total += part
            n_terms += n
    return total, n_terms


@numba.njit(cache=True)
def _dual_sum_2d(F, C, L, tau, shifts, table, step, m1_lo, m1_hi):
    """Sum over dual points m1*F[0] + m2*F[1] with sup-norm <= C, excluding 0.

    Returns one complex total per shift, then the term count in the last slot.
    Phases advance along each row by a fixed rotation.
    """
    k = shifts.shape[0]
    out = np.zeros(k + 1, dtype=np.complex128)
    umax = step * (table.shape[0] - 1)
    rot = np.empty(k, dtype=np.complex128)
    ph = np.empty(k, dtype=np.complex128)
    for j in range(k):
        a = 2 * np.pi * (F[1, 0] * (shifts[j, 0] + L[0] / 2) + F[1, 1] * (shifts[j, 1] + L[1] / 2))
        rot[j] = complex(np.cos(a), np.sin(a))
    count = 0
    for m1 in range(m1_lo, m1_hi + 1):
        lo2 = -1e300
        hi2 = 1e300
        for i in range(2):
            base = m1 * F[0, i]
            d = F[1, i]
            if d != 0.0:
                t1 = (-C - base) / d
                t2 = (C - base) / d
                if t1 > t2:
                    t1, t2 = t2, t1
                lo2 = max(lo2, t1)
                hi2 = min(hi2, t2)
            elif abs(base) > C:
                lo2 = 1.0
                hi2 = 0.0
        if lo2 > hi2:
            continue
        m2_lo = int(np.ceil(lo2))
        m2_hi = int(np.floor(hi2))
        for j in range(k):
            a = 2 * np.pi * ((m1 * F[0, 0] + m2_lo * F[1, 0]) * (shifts[j, 0] + L[0] / 2)
                             + (m1 * F[0, 1] + m2_lo * F[1, 1]) * (shifts[j, 1] + L[1] / 2))
            ph[j] = complex(np.cos(a), np.sin(a))
        for m2 in range(m2_lo, m2_hi + 1):
            g0 = m1 * F[0, 0] + m2 * F[1, 0]
            g1 = m1 * F[0, 1] + m2 * F[1, 1]
            ok = (m1 != 0 or m2 != 0) and abs(g0) <= C and abs(g1) <= C
            if ok:
                u0 = abs(tau * g0)
                u1 = abs(tau * g1)
                if u0 <= umax and u1 <= umax:
                    p0 = u0 / step
                    i0 = min(int(p0), table.shape[0] - 2)
                    w0 = table[i0] + (p0 - i0) * (table[i0 + 1] - table[i0])
                    p1 = u1 / step
                    i1 = min(int(p1), table.shape[0] - 2)
                    w1 = table[i1] + (p1 - i1) * (table[i1 + 1] - table[i1])
                    f0 = L[0] if g0 == 0.0 else np.sin(np.pi * L[0] * g0) / (np.pi * g0)
                    f1 = L[1] if g1 == 0.0 else np.sin(np.pi * L[1] * g1) / (np.pi * g1)
                    w = f0 * f1 * w0 * w1
                    for j in range(k):
                        out[j] += w * ph[j]
                count += 1
            for j in range(k):
                ph[j] *= rot[j]
    out[k] = count
    return out


def smoothed_remainder(g: Lattice, lengths, x, tau: float, kernel: SmoothingKernel | None = None) -> float:
    """Direct-space smoothed count minus volume/det for the box [0, lengths) + x.

    The smoothed indicator is the product over coordinates of
    W((y - x_i)/tau) - W((y - x_i - N_i)/tau) with W the kernel CDF.
    """
    kernel = kernel or SmoothingKernel()
    lengths = np.asarray(lengths, dtype=float)
    x = np.asarray(x, dtype=float)
    pad = tau
    box = Box(tuple(x - pad), tuple(lengths + 2 * pad))
    _, pts = enumerate_points(g, box, exact=False)
    y = pts - x[None, :]
    weight = np.prod(kernel.cdf(y / tau) - kernel.cdf((y - lengths[None, :]) / tau), axis=1)
    return float(np.sum(weight) - np.prod(lengths) / g.det)
