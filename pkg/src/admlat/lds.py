"""Low-discrepancy point sets cut from shifted admissible lattices, and exact star discrepancy."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numba
import numpy as np

from .boxcount import Box, enumerate_points
from .errors import BadPrefix, EmptyWindow, NonAdmissible, TooLargeForExact, ValidationError
from .lattice import Lattice, nm_floor

EXACT_LIMIT = {1: 1 << 24, 2: 1 << 16, 3: 4096}
DENSE_PREFIXES = 256
PREFIX_GROWTH = 1.1


@dataclass(frozen=True, eq=False)
class PointSet:
    points: np.ndarray  # n x s, rows in emission order
    provenance: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


class DiscrepancyReport(NamedTuple):
    d_star: float
    witness_box: np.ndarray
    n_dstar: float


def generate_pointset(g: Lattice, x, n: int, check_radius: int = 2) -> PointSet:
    """Points of (lattice + x) in [0,1)^(s-1) x [0, n det), last coordinate scaled to [0,1)."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    x = np.asarray(x, dtype=float)
    if x.shape != (g.dim,):
        raise ValidationError(f"shift must have {g.dim} coordinates")
    if g.source is not None or g.exact_basis is not None:
        floor = nm_floor(g, check_radius)
        if not floor.admissible:
            raise NonAdmissible(f"zero-norm point {floor.witness.coeffs} found")
    height = n * g.det
    lengths = np.ones(g.dim)
    lengths[-1] = height
    _, coords = enumerate_points(g, Box(tuple(-x), tuple(lengths)))
    if len(coords) == 0:
        raise EmptyWindow("window contains no lattice points")
    z = coords + x
    # exact membership was decided on the lattice side; keep rounding inside [0, 1)
    z = np.clip(z, 0.0, None)
    order = np.lexsort(tuple(z[:, j] for j in range(g.dim - 1)) + (z[:, -1],))
    z = z[order]
    z[:, -1] /= height
    z = np.minimum(z, np.nextafter(1.0, 0.0))
    prov = {"lattice": g.label, "shift": [float(v) for v in x], "height": height}
    return PointSet(z, prov)


def delta(y, ps: PointSet, prefix_len: int) -> float:
    """Count of the first ``prefix_len`` points in [0, y) minus prefix_len * vol."""
    _check_prefix(ps, prefix_len)
    y = np.asarray(y, dtype=float)
    if y.shape != (ps.dim,) or np.any(y <= 0) or np.any(y > 1):
        raise ValidationError("y must have coordinates in (0, 1]")
    inside = np.all(ps.points[:prefix_len] < y, axis=1)
    return int(inside.sum()) - prefix_len * float(np.prod(y))


def _check_prefix(ps: PointSet, m: int):
    if not 1 <= m <= ps.n:
        raise BadPrefix(f"prefix length {m} outside 1..{ps.n}")


# ---------------------------------------------------------------------------
# exact star discrepancy
#
# The supremum over anchored boxes [0, y) is reached on the grid built from the point
# coordinates and 1, either at an open box (vol - count/n) or as a limit from above
# (closed count/n - vol). Points are swept in the first coordinate while a cumulative
# count table over the remaining coordinates is updated in place.


def _grid(col: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    vals = np.unique(np.concatenate([col, [1.0]]))
    return vals, np.searchsorted(vals, col)


@numba.njit(cache=True)
def _dstar2(px, py, X, Y, n):
    # points sorted by px index; cum[b] = #{swept points with y index <= b}
    nb = Y.shape[0]
    cum = np.zeros(nb, dtype=np.int64)
    best = -1.0
    arg = np.zeros(3, dtype=np.int64)
    i = 0
    m = px.shape[0]
    for a in range(X.shape[0]):
        for b in range(nb):
            open_count = cum[b - 1] if b > 0 else 0
            v = X[a] * Y[b] - open_count / n
            if v > best:
                best = v
                arg[0] = a
                arg[1] = b
                arg[2] = 0
        while i < m and px[i] == a:
            for b in range(py[i], nb):
                cum[b] += 1
            i += 1
        for b in range(nb):
            v = cum[b] / n - X[a] * Y[b]
            if v > best:
                best = v
                arg[0] = a
                arg[1] = b
                arg[2] = 1
    return best, arg


@numba.njit(cache=True)
def _dstar3(px, py, pz, X, Y, Z, n):
    nb = Y.shape[0]
    nc = Z.shape[0]
    cum = np.zeros((nb, nc), dtype=np.int64)
    best = -1.0
    arg = np.zeros(4, dtype=np.int64)
    i = 0
    m = px.shape[0]
    for a in range(X.shape[0]):
        for b in range(nb):
            for c in range(nc):
                open_count = cum[b - 1, c - 1] if (b > 0 and c > 0) else 0
                v = X[a] * Y[b] * Z[c] - open_count / n
                if v > best:
                    best = v
                    arg[0] = a
                    arg[1] = b
                    arg[2] = c
                    arg[3] = 0
        while i < m and px[i] == a:
            for b in range(py[i], nb):
                for c in range(pz[i], nc):
                    cum[b, c] += 1
            i += 1
        for b in range(nb):
            for c in range(nc):
                v = cum[b, c] / n - X[a] * Y[b] * Z[c]
                if v > best:
                    best = v
                    arg[0] = a
                    arg[1] = b
                    arg[2] = c
                    arg[3] = 1
    return best, arg


def _witness(corner: np.ndarray, closed: bool) -> np.ndarray:
    # a closed-box limit is represented by the next float above each coordinate below 1
    if not closed:
        return corner
    return np.where(corner < 1.0, np.nextafter(corner, 2.0), corner)


def _dstar1(z: np.ndarray) -> DiscrepancyReport:
    n = len(z)
    vals = np.unique(np.concatenate([z, [1.0]]))
    zs = np.sort(z)
    open_gap = vals - np.searchsorted(zs, vals, side="left") / n
    closed_gap = np.searchsorted(zs, vals, side="right") / n - vals
    i, j = int(np.argmax(open_gap)), int(np.argmax(closed_gap))
    if open_gap[i] >= closed_gap[j]:
        d, w = float(open_gap[i]), _witness(vals[i:i + 1], False)
    else:
        d, w = float(closed_gap[j]), _witness(vals[j:j + 1], True)
    return DiscrepancyReport(d, w, n * d)


def exact_dstar(points: np.ndarray) -> DiscrepancyReport:
    n, s = points.shape
    if s not in EXACT_LIMIT:
        raise TooLargeForExact(f"exact mode supports s in {sorted(EXACT_LIMIT)}, got {s}")
    if n > EXACT_LIMIT[s]:
        raise TooLargeForExact(f"exact mode limited to {EXACT_LIMIT[s]} points for s = {s}")
    if s == 1:
        return _dstar1(points[:, 0])
    grids = [_grid(points[:, j]) for j in range(s)]
    order = np.lexsort(tuple(gi for _, gi in grids[::-1]))
    idx = [gi[order].astype(np.int64) for _, gi in grids]
    vals = [gv for gv, _ in grids]
    if s == 2:
        best, arg = _dstar2(idx[0], idx[1], vals[0], vals[1], float(n))
    else:
        best, arg = _dstar3(idx[0], idx[1], idx[2], vals[0], vals[1], vals[2], float(n))
    corner = np.array([vals[j][arg[j]] for j in range(s)])
    d = float(best)
    return DiscrepancyReport(d, _witness(corner, bool(arg[s])), n * d)


def _sampled_dstar(points: np.ndarray, n_samples: int, seed: int) -> DiscrepancyReport:
    n, s = points.shape
    rng = np.random.default_rng(seed)
    vals = [np.unique(np.concatenate([points[:, j], [1.0]])) for j in range(s)]
    best, arg = -1.0, None
    for _ in range(max(1, n_samples // 1024)):
        ys = np.column_stack([v[rng.integers(0, len(v), 1024)] for v in vals])
        vol = np.prod(ys, axis=1)
        open_c = np.array([np.count_nonzero(np.all(points < y, axis=1)) for y in ys])
        closed_c = np.array([np.count_nonzero(np.all(points <= y, axis=1)) for y in ys])
        cand = np.maximum(vol - open_c / n, closed_c / n - vol)
        k = int(np.argmax(cand))
        if cand[k] > best:
            closed = closed_c[k] / n - vol[k] > vol[k] - open_c[k] / n
            best, arg = float(cand[k]), _witness(ys[k], closed)
    return DiscrepancyReport(best, arg, n * best)


def star_discrepancy(ps: PointSet, prefix_len: int | None = None, mode: str = "exact",
                     n_samples: int = 1 << 14, seed: int = 0) -> DiscrepancyReport:
    m = ps.n if prefix_len is None else prefix_len
    _check_prefix(ps, m)
    pts = ps.points[:m]
    if mode == "exact":
        return exact_dstar(pts)
    if mode == "lower_bound":
        return _sampled_dstar(pts, n_samples, seed)
    raise ValidationError(f"unknown mode {mode!r}")


class PrefixRow(NamedTuple):
    m: int
    d_star_m: float
    m_times_d_star_m: float
    running_sup: float


def prefix_schedule(n: int) -> list[int]:
    ms = list(range(1, min(n, DENSE_PREFIXES) + 1))
    m = float(DENSE_PREFIXES)
    while ms[-1] < n:
        m *= PREFIX_GROWTH
        ms.append(min(n, int(math.ceil(m))))
    return ms


def prefix_sup_experiment(ps: PointSet, mode: str = "exact", schedule=None,
                          projected: bool = True) -> list[PrefixRow]:
    """Star discrepancy of each prefix and the running sup of m * D*_m.

    Prefixes are taken in emission order. With ``projected`` the prefix is measured on
    its first s-1 coordinates, the quantity that carries the logarithmic growth; the
    full s-dimensional prefix lives in the strip below height m/n and its discrepancy
    is dominated by that strip.
    """
    view = PointSet(ps.points[:, :-1], ps.provenance) if projected else ps
    rows, run = [], 0.0
    for m in (prefix_schedule(ps.n) if schedule is None else schedule):
        rep = star_discrepancy(view, m, mode)
        run = max(run, rep.n_dstar)
        rows.append(PrefixRow(m, rep.d_star, rep.n_dstar, run))
    return rows


# ---------------------------------------------------------------------------
# point-set files


def save_pointset(ps: PointSet, path: str | Path) -> None:
    lines = [f"{ps.dim} {ps.n}"]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in ps.points]
    Path(path).write_text("\n".join(lines) + "\n")


def load_pointset(path: str | Path) -> PointSet:
    text = Path(path).read_text().split("\n")
    s, n = (int(v) for v in text[0].split())
    pts = np.array([[float(v) for v in line.split()] for line in text[1:1 + n]]).reshape(n, s)
    if np.any(pts < 0) or np.any(pts >= 1):
        raise ValidationError("point coordinates must lie in [0, 1)")
    return PointSet(pts, {"source": str(path)})
