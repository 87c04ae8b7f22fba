"""Unit-group geometry: log coordinates, the fundamental domain, and unit-power counts.

A point y with nonzero coordinates has log vector l(y) = (ln|y_1|, ..., ln|y_s|),
written uniquely as xi * (1, ..., 1) + sum_i xi_i * l(eps_i). The fundamental domain
F holds the points with y_1 > 0 and every xi_i in [0, 1).
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (IncompleteEnumeration, SingularUnitBasis, ValidationError, ZeroCoordinate,
                     ZeroNorm)
from .lattice import Lattice, LatticePoint, _coeff_ball, _exact_abs_norms
from .numfield import FieldElement, _solve, embed_float, norm, sign

SNAP = 1e-9
REGULATOR_MIN = 1e-6


@dataclass(frozen=True, eq=False)
class UnitSystem:
    units: tuple
    log_matrix: np.ndarray  # (s-1) x s, entry [i, j] = ln|sigma_j(eps_i)|
    regulator: float
    # signed embeddings of each unit, used to move points by unit powers
    embeddings: np.ndarray

    @property
    def degree(self) -> int:
        return self.log_matrix.shape[1]

    @property
    def rank(self) -> int:
        return self.log_matrix.shape[0]


def unit_system(units: Sequence[FieldElement]) -> UnitSystem:
    units = tuple(units)
    if not units:
        raise ValidationError("no units supplied")
    s = units[0].field.degree
    if len(units) != s - 1:
        raise ValidationError(f"expected {s - 1} units, got {len(units)}")
    for i, e in enumerate(units):
        if abs(norm(e)) != 1:
            raise ValidationError(f"unit {i} has norm {norm(e)}, not +-1")
    emb = np.array([embed_float(e) for e in units])
    logs = np.log(np.abs(emb))
    if np.any(np.abs(logs.sum(axis=1)) > 1e-9):
        raise ValidationError("log rows do not sum to zero")
    reg = abs(float(np.linalg.det(logs[:, :-1]))) if s > 1 else 1.0
    if reg <= REGULATOR_MIN:
        raise SingularUnitBasis(f"regulator {reg:.3g} too small; units are dependent")
    return UnitSystem(units, logs, reg, emb)


class LogDecomposition(NamedTuple):
    xi: float
    xis: np.ndarray
    sign_first: int


def log_embed(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if np.any(y == 0):
        raise ZeroCoordinate("log embedding needs all coordinates nonzero")
    return np.log(np.abs(y))


def _system(u: UnitSystem) -> np.ndarray:
    # columns: the all-ones direction, then the unit log vectors
    return np.vstack([np.ones(u.degree), u.log_matrix]).T


def decompose(y, u: UnitSystem) -> LogDecomposition:
    if u.regulator <= REGULATOR_MIN:
        raise SingularUnitBasis("regulator below threshold")
    ly = log_embed(y)
    sol = np.linalg.solve(_system(u), ly)
    return LogDecomposition(float(sol[0]), sol[1:], 1 if float(np.asarray(y)[0]) > 0 else -1)


def reconstruct(d: LogDecomposition, u: UnitSystem) -> np.ndarray:
    return d.xi * np.ones(u.degree) + d.xis @ u.log_matrix


def _snap(xis: np.ndarray, tol: float) -> np.ndarray:
    r = np.rint(xis)
    return np.where(np.abs(xis - r) <= tol, r, xis)


def in_fundamental_domain(y, u: UnitSystem, snap: float = SNAP) -> bool:
    y = np.asarray(y, dtype=float)
    if np.any(y == 0) or y[0] <= 0:
        return False
    xis = _snap(decompose(y, u).xis, snap)
    return bool(np.all((xis >= 0) & (xis < 1)))


class Reduction(NamedTuple):
    k: tuple
    sign_flip: bool
    y_reduced: np.ndarray


def _unit_scale(u: UnitSystem, k: Sequence[int]) -> np.ndarray:
    """Signed embedding of eps^k, as a product of float powers."""
    out = np.ones(u.degree)
    for ki, row in zip(k, u.embeddings):
        out = out * row ** float(ki)
    return out


def reduce_to_F(y, u: UnitSystem, snap: float = SNAP) -> Reduction:
    y = np.asarray(y, dtype=float)
    if np.any(y == 0):
        raise ZeroNorm("point has a zero coordinate")
    xis = _snap(decompose(y, u).xis, snap)
    k = tuple(int(v) for v in np.floor(xis))
    z = y / _unit_scale(u, k)
    flip = bool(z[0] < 0)
    if flip:
        z = -z
    return Reduction(k, flip, z)


def reduce_element(a: FieldElement, u: UnitSystem, snap: float = SNAP) -> tuple[tuple, bool, FieldElement]:
    """Exact counterpart of ``reduce_to_F``: returns +-a * eps^-k as a field element."""
    if a.is_zero():
        raise ZeroNorm("zero element")
    k, _, _ = reduce_to_F(embed_float(a), u, snap)
    b = a
    for ki, e in zip(k, u.units):
        if ki:
            b = b * e ** (-ki)
    flip = sign(b, 0) < 0
    return k, flip, (-b if flip else b)


# ---------------------------------------------------------------------------
# unit powers


def _k_box(u: UnitSystem, t: float) -> int:
    """Radius R with every k satisfying either count condition inside [-R, R]^(s-1).

    Both conditions force the sup norm of k @ L below (s-1) t, since the entries of
    k @ L sum to zero; the first s-1 columns then pin k down through the inverse minor.
    """
    inv = np.linalg.inv(u.log_matrix[:, :-1])
    bound = (u.degree - 1) * t * float(np.max(np.abs(inv).sum(axis=0)))
    return int(math.floor(bound * (1 + 1e-9))) + 1


def count_unit_powers(u: UnitSystem, t: float, mode: str = "max_le") -> int:
    if t <= 0:
        raise ValidationError("t must be positive")
    if mode not in ("max_le", "min_ge"):
        raise ValidationError(f"unknown mode {mode!r}")
    R = _k_box(u, t)
    ks = np.array(list(itertools.product(range(-R, R + 1), repeat=u.rank)), dtype=float)
    v = ks @ u.log_matrix
    if mode == "max_le":
        return int(np.sum(v.max(axis=1) <= t))
    return int(np.sum(v.min(axis=1) >= -t))


# ---------------------------------------------------------------------------
# box normalization


class NormalizedBox(NamedTuple):
    k: tuple
    nvec_prime: np.ndarray
    c3_achieved: float


def _balance(nvec: np.ndarray) -> float:
    root = float(np.exp(np.mean(np.log(nvec))))
    return float(np.max(np.maximum(nvec / root, root / nvec)))


def normalize_box(nvec, u: UnitSystem, search_radius: int) -> NormalizedBox:
    """Unit power eta = eps^k making the side lengths N_i |sigma_i(eta)| most balanced."""
    if search_radius < 1:
        raise ValidationError("search_radius must be >= 1")
    nvec = np.asarray(nvec, dtype=float)
    if np.any(nvec <= 0):
        raise ValidationError("side lengths must be positive")
    best = None
    for k in itertools.product(range(-search_radius, search_radius + 1), repeat=u.rank):
        cand = nvec * np.abs(_unit_scale(u, k))
        key = (_balance(cand), sum(abs(v) for v in k), k)
        if best is None or key < best[0]:
            best = (key, cand)
    (score, _, k), cand = best
    return NormalizedBox(k, cand, score)


def map_box(nvec, x, scale) -> tuple[np.ndarray, np.ndarray]:
    """Image of the box x + [0, N) under y -> scale * y, as (lengths, origin)."""
    nvec, x, scale = (np.asarray(v, dtype=float) for v in (nvec, x, scale))
    a, b = scale * x, scale * (x + nvec)
    return np.abs(b - a), np.minimum(a, b)


# ---------------------------------------------------------------------------
# norm-ordered enumeration of F


class NormedPoint(NamedTuple):
    abs_norm: Fraction
    point: LatticePoint


def required_coeff_radius(g: Lattice, u: UnitSystem, max_abs_norm) -> int:
    """Coefficient radius that contains every point of F with |Nm| <= max_abs_norm."""
    # inside F, ln|y_j| <= (1/s) ln M + sum_i max(0, l_j(eps_i))
    s = g.dim
    ymax = float(max_abs_norm) ** (1.0 / s) * np.exp(np.maximum(u.log_matrix, 0).sum(axis=0))
    inv = np.abs(np.linalg.inv(g.basis))
    return int(math.ceil(float(np.max(ymax @ inv)) * (1 + 1e-9)))


def _coeffs_of(g: Lattice, a: FieldElement) -> tuple:
    src = g.source
    s = g.dim
    m = [[src.elements[i].coords[r] for i in range(s)] for r in range(s)]
    sol = _solve(m, list(a.coords))
    if any(c.denominator != 1 for c in sol):
        raise ValidationError("reduced element left the module; units do not preserve it")
    return tuple(int(c) for c in sol)


def enumerate_F_norm_bounded(g: Lattice, u: UnitSystem, max_abs_norm, coeff_radius: int) -> list[NormedPoint]:
    """Points of F in the lattice with 0 < |Nm| <= max_abs_norm, ascending by |Nm| then coeffs.

    Every nonzero point in the coefficient ball is reduced into F, so orbit members
    outside the ball are still found when some associate lies inside it.
    """
    if g.source is None:
        raise ValidationError("enumeration needs a module lattice")
    M = Fraction(max_abs_norm)
    need = required_coeff_radius(g, u, M)
    if need > coeff_radius:
        warnings.warn(f"coefficient radius {coeff_radius} may miss points; {need} is sufficient",
                      IncompleteEnumeration, stacklevel=2)
    coeffs = _coeff_ball(g.dim, coeff_radius)
    norms = _exact_abs_norms(g, coeffs)
    found: dict[tuple, Fraction] = {}
    for a, n in zip(coeffs, norms):
        if n == 0 or n > M:
            continue
        pt = g.point(a)
        if in_fundamental_domain(pt.coords, u):
            found[pt.coeffs] = n
            continue
        _, _, b = reduce_element(g.element(pt.coeffs), u)
        found.setdefault(_coeffs_of(g, b), n)
    order = sorted(found.items(), key=lambda kv: (kv[1], kv[0]))
    return [NormedPoint(n, g.point(c)) for c, n in order]
