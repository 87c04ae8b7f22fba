"""Exact lattice point counts in half-open boxes and the remainder term.

Boxes are ``[x_i, x_i + N_i)``.  Candidate points come from a branch-and-bound
over integer coefficient vectors; membership is decided in floating point with
a certified margin and, inside the margin, in exact arithmetic.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np
from scipy.stats import qmc

from .errors import ValidationError, VolumeLimitExceeded
from .lattice import EPS, Lattice

MAX_EXPECTED_POINTS = 10**9
# prefixes are expanded in chunks to bound memory
_CHUNK = 1 << 16


@dataclass(frozen=True)
class Box:
    origin: tuple
    lengths: tuple

    def __post_init__(self):
        origin = tuple(float(v) for v in self.origin)
        lengths = tuple(float(v) for v in self.lengths)
        if len(origin) != len(lengths):
            raise ValidationError("origin and lengths differ in dimension")
        if any(not (n > 0) or not math.isfinite(n) for n in lengths):
            raise ValidationError(f"box lengths must be positive and finite: {lengths}")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "lengths", lengths)

    @property
    def dim(self) -> int:
        return len(self.lengths)

    @property
    def upper(self) -> tuple:
        return tuple(x + n for x, n in zip(self.origin, self.lengths))

    @property
    def volume(self) -> float:
        return math.prod(self.lengths)

    def scaled(self, theta: Sequence[float]) -> "Box":
        return Box(self.origin, tuple(t * n for t, n in zip(theta, self.lengths)))


class RemainderReport(NamedTuple):
    count: int
    volume: float
    det: float
    remainder: float


class SupSearchResult(NamedTuple):
    theta_star: tuple
    sup_abs_remainder: float
    cells_visited: int
    # "attained" or "from_above": the value is the limit as theta decreases to theta_star
    approach: str = "attained"
    signed_remainder: float = 0.0


# ---------------------------------------------------------------------------
# branch and bound over coefficient space


def _level_bounds(B: np.ndarray, k: int, lo: np.ndarray, hi: np.ndarray, shift: np.ndarray):
    """Bounds of coefficient k over {t : lo - shift <= t @ B[k:] <= hi - shift}.

    ``shift`` holds the contribution of the fixed prefix, one row per prefix.  The
    bound of a linear function over a polytope sits at a vertex; every vertex is the
    solution of m active face constraints on m distinct coordinates.
    """
    s = B.shape[1]
    m = s - k
    sub = B[k:]
    n = shift.shape[0]
    lo_r = lo[None, :] - shift
    hi_r = hi[None, :] - shift
    scale = 1.0 + np.maximum(np.abs(lo_r), np.abs(hi_r)).max(axis=1)
    tol = 1e-9 * scale
    tmin = np.full(n, np.inf)
    tmax = np.full(n, -np.inf)
    for cols in itertools.combinations(range(s), m):
        M = sub[:, cols]
        if abs(np.linalg.det(M)) < 1e-12 * max(1.0, np.abs(M).max()) ** m:
            continue
        Minv = np.linalg.inv(M)
        for faces in itertools.product((0, 1), repeat=m):
            rhs = np.stack([(hi_r if f else lo_r)[:, c] for f, c in zip(faces, cols)], axis=1)
            t = rhs @ Minv
            y = t @ sub
            ok = np.all((y >= lo_r - tol[:, None]) & (y <= hi_r + tol[:, None]), axis=1)
            v = t[:, 0]
            tmin = np.where(ok & (v < tmin), v, tmin)
            tmax = np.where(ok & (v > tmax), v, tmax)
    pad = 1e-9 * (1.0 + np.maximum(np.abs(tmin), np.abs(tmax)))
    first = np.ceil(tmin - pad)
    last = np.floor(tmax + pad)
    first[~np.isfinite(first)] = 1
    last[~np.isfinite(last)] = 0
    return first.astype(np.int64), last.astype(np.int64)


def iter_candidates(B: np.ndarray, lo: np.ndarray, hi: np.ndarray, chunk: int = _CHUNK):
    """Yield blocks of integer coefficient vectors covering every point in the box.

    The blocks form a superset of the box's points; callers filter exactly.
    Top-level coefficients are taken in slices so memory stays bounded.
    """
    s = B.shape[0]
    first, last = _level_bounds(B, 0, lo, hi, np.zeros((1, s)))
    a0, a1 = int(first[0]), int(last[0])
    step = max(1, chunk // max(1, _width_hint(B, lo, hi)))
    for start in range(a0, a1 + 1, step):
        prefixes = np.arange(start, min(a1, start + step - 1) + 1, dtype=np.int64)[:, None]
        for k in range(1, s):
            shift = prefixes.astype(float) @ B[:k]
            f, l = _level_bounds(B, k, lo, hi, shift)
            counts = np.maximum(l - f + 1, 0)
            total = int(counts.sum())
            if total == 0:
                prefixes = np.zeros((0, k + 1), dtype=np.int64)
                break
            rep = np.repeat(np.arange(len(prefixes)), counts)
            offs = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
            prefixes = np.column_stack([prefixes[rep], np.repeat(f, counts) + offs])
        if len(prefixes):
            yield prefixes


def _width_hint(B, lo, hi) -> int:
    # rough number of candidates per top-level coefficient value
    Binv = np.linalg.inv(B)
    span = np.abs(hi - lo) @ np.abs(Binv)
    return int(min(1e9, max(1.0, np.prod(span[1:] + 1))))


def _candidates(B: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    blocks = list(iter_candidates(B, lo, hi))
    if not blocks:
        return np.zeros((0, B.shape[0]), dtype=np.int64)
    return np.concatenate(blocks)


def _check_volume(g: Lattice, box: Box, limit: float):
    expected = box.volume / g.det
    if expected > limit:
        raise VolumeLimitExceeded(f"box holds ~{expected:.3g} points, limit {limit:.3g}")


def enumerate_points(g: Lattice, box: Box, closed_upper: bool = False,
                     limit: float = MAX_EXPECTED_POINTS, exact: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients and float coordinates of every lattice point in the box.

    With ``closed_upper`` the upper faces are included.  ``exact=False`` settles
    points within the rounding margin of a face by their float coordinates, for
    callers whose result does not depend on face membership.
    """
    if box.dim != g.dim:
        raise ValidationError(f"box dimension {box.dim} != lattice dimension {g.dim}")
    _check_volume(g, box, limit)
    lo = np.array(box.origin)
    hi = np.array(box.upper)
    # the face sits at x + N in exact arithmetic; float hi is off by at most one ulp
    hi_exact = [Fraction(o) + Fraction(n) for o, n in zip(box.origin, box.lengths)]
    B = g.basis
    cand = _candidates(B, lo, hi)
    if len(cand) == 0:
        return cand.reshape(0, g.dim), np.zeros((0, g.dim))
    coords = cand.astype(float) @ B
    margin = g.coord_margin(cand) + EPS * np.abs(hi)[None, :]
    surely_in = np.all((coords - lo > margin) & (hi - coords > margin), axis=1)
    surely_out = np.any((coords < lo - margin) | (coords > hi + margin), axis=1)
    if not exact:
        upper_ok = coords <= hi if closed_upper else coords < hi
        keep = np.all((coords >= lo) & upper_ok, axis=1)
        return cand[keep], coords[keep]
    keep = surely_in.copy()
    for i in np.flatnonzero(~surely_in & ~surely_out):
        keep[i] = _exact_inside(g, cand[i], coords[i], margin[i], lo, hi, hi_exact, closed_upper)
    return cand[keep], coords[keep]


def _exact_inside(g, a, coord, margin, lo, hi, hi_exact, closed_upper) -> bool:
    for j in range(g.dim):
        if abs(coord[j] - lo[j]) <= margin[j]:
            if g.exact_sign(a, j, lo[j]) < 0:
                return False
        elif coord[j] < lo[j]:
            return False
        if abs(coord[j] - hi[j]) <= margin[j]:
            sgn = g.exact_sign(a, j, hi_exact[j])
            if sgn > 0 or (sgn == 0 and not closed_upper):
                return False
        elif coord[j] > hi[j]:
            return False
    return True


def count_points(g: Lattice, box: Box, closed_upper: bool = False,
                 limit: float = MAX_EXPECTED_POINTS) -> int:
    return len(enumerate_points(g, box, closed_upper, limit)[0])


def remainder(g: Lattice, box: Box, closed_upper: bool = False) -> RemainderReport:
    count = count_points(g, box, closed_upper)
    vol = box.volume
    # count is exact; the volume term is subtracted once
    return RemainderReport(count, vol, g.det, count - vol / g.det)


# ---------------------------------------------------------------------------
# supremum over dilations theta * N


def remainder_at(g: Lattice, nvec, x, theta, approach: str = "attained", rel: float = 1e-12) -> float:
    """One-sided value of R(B_{theta N} + x) at theta.

    Witness coordinates are floats standing in for face coordinates of lattice
    points, so the box is nudged by a relative ``rel``: inward for ``attained``
    (the half-open count is left-continuous) and outward for ``from_above``.
    """
    lengths = np.array([float(t) * float(n) for t, n in zip(theta, nvec)])
    vol = float(np.prod(lengths))
    if approach == "from_above":
        probe = lengths * (1 + rel) + rel
    elif approach == "attained":
        probe = lengths * (1 - rel)
    else:
        raise ValidationError(f"unknown approach {approach!r}")
    if np.min(probe) <= 0.0:
        return 0.0 - vol / g.det
    return count_points(g, Box(tuple(x), tuple(probe))) - vol / g.det


def _offsets(g: Lattice, nvec, x):
    box = Box(tuple(x), tuple(nvec))
    _, coords = enumerate_points(g, box)
    return coords - np.array(box.origin)


def _sweep_2d(u: np.ndarray, v: np.ndarray, n1: float, n2: float, det: float):
    """Exact sup of |count - a*b/det| over a in [0, n1], b in [0, n2]; count = #{u < a, v < b}."""
    L = np.unique(np.concatenate([[0.0], u]))
    M = np.unique(np.concatenate([[0.0], v]))
    Lr = np.append(L[1:], n1)
    Mr = np.append(M[1:], n2)
    order = np.argsort(u, kind="stable")
    u_sorted = u[order]
    v_idx = np.searchsorted(M, v[order])
    row = np.zeros(len(M), dtype=np.int64)
    best = (0.0, (0.0, 0.0), "attained", 0.0)
    p = 0
    for k in range(len(L)):
        while p < len(u_sorted) and u_sorted[p] <= L[k]:
            row[v_idx[p]:] += 1
            p += 1
        lim = row - L[k] * M / det  # limit from above at the lower corner
        att = Mr * (Lr[k] / det) - row  # attained at the upper corner
        i = int(np.argmax(lim))
        j = int(np.argmax(att))
        if lim[i] > best[0] and not (L[k] == 0.0 and row[i] == 0):
            best = (float(lim[i]), (float(L[k] / n1), float(M[i] / n2)), "from_above", float(lim[i]))
        if att[j] > best[0]:
            best = (float(att[j]), (float(Lr[k] / n1), float(Mr[j] / n2)), "attained", -float(att[j]))
    return best, len(L) * len(M)


def sup_remainder(g: Lattice, nvec, x, mode: str = "exact_sweep", seed: int = 0,
                  n_samples: int = 4096, refine_top: int = 8) -> SupSearchResult:
    nvec = tuple(float(n) for n in nvec)
    x = tuple(float(v) for v in x)
    s = g.dim
    if len(nvec) != s or len(x) != s:
        raise ValidationError("nvec and x must match the lattice dimension")
    offsets = _offsets(g, nvec, x)
    if mode == "exact_sweep":
        if s != 2:
            raise ValidationError("exact_sweep is implemented for s = 2 only; use mode='sampled'")
        (val, theta, approach, signed), cells = _sweep_2d(offsets[:, 0], offsets[:, 1], nvec[0], nvec[1], g.det)
        return SupSearchResult(tuple(theta), val, cells, approach, signed)
    if mode == "sampled":
        return _sampled(offsets, nvec, g.det, seed, n_samples, refine_top)
    raise ValidationError(f"unknown mode {mode!r}")


def _r_many(offsets: np.ndarray, nvec, det, thetas: np.ndarray, closed: bool = False) -> np.ndarray:
    lengths = thetas * np.asarray(nvec)
    out = np.empty(len(thetas))
    for i in range(0, len(thetas), 256):
        lt = lengths[i:i + 256]
        if closed:
            inside = np.all(offsets[None, :, :] <= lt[:, None, :], axis=2)
        else:
            inside = np.all(offsets[None, :, :] < lt[:, None, :], axis=2)
        out[i:i + 256] = inside.sum(axis=1) - np.prod(lt, axis=1) / det
    return out


def _sampled(offsets, nvec, det, seed, n_samples, refine_top) -> SupSearchResult:
    s = len(nvec)
    m = max(1, int(math.ceil(math.log2(max(n_samples, 2)))))
    thetas = qmc.Sobol(d=s, scramble=True, seed=seed).random_base2(m)
    vals = np.abs(_r_many(offsets, nvec, det, thetas))
    visited = len(thetas)
    top = np.argsort(-vals, kind="stable")[:refine_top]
    best_val, best_theta, best_app, best_signed = 0.0, tuple([0.0] * s), "attained", 0.0
    faces = [np.unique(np.concatenate([offsets[:, i] / nvec[i], [1.0]])) for i in range(s)]
    for idx in top:
        theta = thetas[idx].copy()
        cur = float(vals[idx])
        app = "attained"
        for _ in range(6):
            improved = False
            for i in range(s):
                cand = np.repeat(theta[None, :], len(faces[i]), axis=0)
                cand[:, i] = faces[i]
                r_att = _r_many(offsets, nvec, det, cand)
                r_lim = _r_many(offsets, nvec, det, cand, closed=True)
                visited += 2 * len(cand)
                ia, il = int(np.argmax(np.abs(r_att))), int(np.argmax(np.abs(r_lim)))
                if abs(r_att[ia]) > cur + 1e-12:
                    theta, cur, app, improved = cand[ia], float(abs(r_att[ia])), "attained", True
                if abs(r_lim[il]) > cur + 1e-12:
                    theta, cur, app, improved = cand[il], float(abs(r_lim[il])), "from_above", True
            if not improved:
                break
        if cur > best_val:
            closed = app == "from_above"
            signed = float(_r_many(offsets, nvec, det, theta[None, :], closed)[0])
            best_val, best_theta, best_app, best_signed = cur, tuple(float(t) for t in theta), app, signed
    return SupSearchResult(best_theta, best_val, visited, best_app, best_signed)


# ---------------------------------------------------------------------------
# growth experiment


class GrowthRow(NamedTuple):
    N: int
    ln_N: float
    sup_abs_R: float
    theta: tuple
    mode: str


def growth_experiment(g: Lattice, x, n_list, aspect=None, mode: str = "exact_sweep",
                      seed: int = 0, n_samples: int = 4096) -> list[GrowthRow]:
    s = g.dim
    aspect = np.ones(s) if aspect is None else np.asarray(aspect, dtype=float)
    if np.any(aspect <= 0):
        raise ValidationError("aspect entries must be positive")
    aspect = aspect / np.prod(aspect) ** (1.0 / s)
    rows = []
    for N in n_list:
        nvec = aspect * float(N) ** (1.0 / s)
        res = sup_remainder(g, nvec, x, mode=mode, seed=seed, n_samples=n_samples)
        rows.append(GrowthRow(int(N), math.log(N), res.sup_abs_remainder, res.theta_star, mode))
    return rows
