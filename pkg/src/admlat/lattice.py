"""Embedding lattices of full modules, their duals, and admissibility checks."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import PrecisionExhausted, RankDeficient, SingularBasis, ValidationError
from .numfield import FieldData, FieldElement, basis_discriminant, embed, norm, sign

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class ModuleBasis:
    elements: tuple
    label: str = ""
    # positive integer d with d*M inside the ring of integers, if known
    denominator: int | None = None

    @property
    def field(self):
        return self.elements[0].field

    @property
    def degree(self) -> int:
        return len(self.elements)


def module_from_field_data(fd: FieldData) -> ModuleBasis:
    # bundled bases span orders, so d = 1 unless the file says otherwise
    return ModuleBasis(tuple(fd.basis), fd.label, int(fd.metadata.get("denominator", 1)))


def module_norm_lower_bound(m: ModuleBasis) -> Fraction | None:
    """Algebraic floor (1/d)^s on |Nm| of nonzero module points, when d is known."""
    if m.denominator is None:
        return None
    return Fraction(1, m.denominator ** m.degree)


@dataclass(frozen=True, eq=False)
class Lattice:
    """Lattice with basis vectors as rows; ``error_bound`` bounds every entry's error."""

    basis: np.ndarray
    det: float
    error_bound: float
    label: str = ""
    source: ModuleBasis | None = None
    exact_basis: tuple | None = None  # rows of Fractions when the lattice is rational

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.basis)

    def point(self, coeffs) -> "LatticePoint":
        coeffs = tuple(int(c) for c in coeffs)
        return LatticePoint(coeffs, np.asarray(coeffs, dtype=float) @ self.basis)

    def element(self, coeffs) -> FieldElement:
        if self.source is None:
            raise ValidationError("lattice has no module source")
        acc = self.source.field.zero
        for c, b in zip(coeffs, self.source.elements):
            if c:
                acc = acc + b * int(c)
        return acc

    def coord_margin(self, coeffs: np.ndarray) -> np.ndarray:
        """Upper bound on |float coordinate - true coordinate| for each row of ``coeffs``.

        Covers the certified enclosure error of the basis plus float rounding of the
        dot product.
        """
        a = np.abs(np.atleast_2d(coeffs)).astype(float)
        total = a.sum(axis=1, keepdims=True)
        return total * self.error_bound + (self.dim + 2) * EPS * (a @ np.abs(self.basis))

    def exact_sign(self, coeffs: Sequence[int], j: int, q: float | Fraction) -> int:
        """Sign of (coordinate j of the point) - q, decided without floating point."""
        q = Fraction(q)
        if self.exact_basis is not None:
            v = sum((int(c) * row[j] for c, row in zip(coeffs, self.exact_basis)), Fraction(0))
            return (v > q) - (v < q)
        if self.source is None:
            raise PrecisionExhausted("no exact representation to resolve a boundary case")
        return sign(self.element(coeffs) - q, j)


class LatticePoint(NamedTuple):
    coeffs: tuple
    coords: np.ndarray


def build_lattice(m: ModuleBasis, prec: int | None = None) -> Lattice:
    disc = basis_discriminant(m.elements)
    if disc == 0:
        raise RankDeficient(f"module {m.label!r} is not of full rank")
    prec = m.field.spec.precision_bits if prec is None else prec
    rows, halfwidth = [], 0.0
    for b in m.elements:
        ivs = embed(b, prec)
        rows.append([iv.mid for iv in ivs])
        halfwidth = max(halfwidth, max(iv.halfwidth for iv in ivs))
    basis = np.array(rows)
    err = halfwidth + EPS * float(np.max(np.abs(basis)))
    det = _sqrt_fraction(abs(disc))
    # the float determinant must agree with sqrt|disc| up to the propagated error
    s = len(rows)
    numeric = abs(np.linalg.det(basis))
    slack = s * err * math.factorial(s) * float(np.max(np.abs(basis))) ** (s - 1) + 1e-12 * det
    if abs(numeric - det) > slack:
        raise PrecisionExhausted(f"det check failed: {numeric} vs {det}")
    return Lattice(basis=basis, det=det, error_bound=err, label=m.label, source=m)


def lattice_from_matrix(rows, label: str = "") -> Lattice:
    """Rational lattice from explicit basis rows (e.g. the identity for Z^s)."""
    exact = tuple(tuple(Fraction(x) for x in row) for row in rows)
    basis = np.array([[float(x) for x in row] for row in exact])
    d = abs(np.linalg.det(basis))
    if d == 0:
        raise RankDeficient("basis matrix is singular")
    return Lattice(basis=basis, det=float(d), error_bound=0.0, label=label, exact_basis=exact)


def _sqrt_fraction(x: Fraction) -> float:
    # correctly rounded enough: isqrt on a scaled integer
    scale = 1 << 200
    return math.isqrt(x.numerator * scale * scale // x.denominator) / scale


def dual_lattice(g: Lattice) -> Lattice:
    if g.det <= 0 or not np.isfinite(np.linalg.cond(g.basis)) or np.linalg.cond(g.basis) > 1e14:
        raise SingularBasis("basis is numerically singular")
    dual = np.linalg.inv(g.basis).T
    exact = None
    if g.exact_basis is not None:
        exact = _rational_inverse_transpose(g.exact_basis)
    # first-order propagation of the entry error through the inverse
    err = float(np.max(np.abs(dual))) ** 2 * g.dim * g.error_bound + 4 * g.dim * EPS * float(np.max(np.abs(dual)))
    return Lattice(basis=dual, det=1.0 / g.det, error_bound=err, label=f"dual({g.label})", exact_basis=exact)


def _rational_inverse_transpose(rows):
    n = len(rows)
    a = [list(r) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(rows)]
    for c in range(n):
        piv = next(r for r in range(c, n) if a[r][c] != 0)
        a[c], a[piv] = a[piv], a[c]
        pv = a[c][c]
        a[c] = [x / pv for x in a[c]]
        for r in range(n):
            if r != c and a[r][c]:
                f = a[r][c]
                a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    inv = [row[n:] for row in a]
    return tuple(tuple(inv[j][i] for j in range(n)) for i in range(n))


class NormFloor(NamedTuple):
    min_abs_norm: Fraction
    witness: LatticePoint

    @property
    def admissible(self) -> bool:
        return self.min_abs_norm > 0


def _coeff_ball(s: int, radius: int) -> np.ndarray:
    rng = np.arange(-radius, radius + 1)
    grid = np.array(np.meshgrid(*([rng] * s), indexing="ij")).reshape(s, -1).T
    return grid[np.any(grid != 0, axis=1)]


def nm_floor(g: Lattice, coeff_radius: int) -> NormFloor:
    """Exact min of |Nm| over nonzero points with coefficients in the sup-norm ball."""
    if coeff_radius < 1:
        raise ValidationError("coeff_radius must be >= 1")
    coeffs = _coeff_ball(g.dim, coeff_radius)
    if g.exact_basis is not None:
        values = [abs(math.prod(sum((int(c) * row[j] for c, row in zip(a, g.exact_basis)), Fraction(0))
                                for j in range(g.dim))) for a in coeffs]
    elif g.source is None:
        raise ValidationError("nm_floor needs an exact lattice (module source or rational basis)")
    else:
        values = _exact_abs_norms(g, coeffs)
    # ties: smallest coefficient sup-norm, then the lexicographically largest coefficients
    i = min(range(len(values)), key=lambda k: (values[k], int(np.max(np.abs(coeffs[k]))), tuple(-coeffs[k])))
    return NormFloor(values[i], g.point(coeffs[i]))


def _exact_abs_norms(g: Lattice, coeffs: np.ndarray) -> list[Fraction]:
    """|norm| of each coefficient row, exact.

    Norm values lie in (1/D) Z with D = (common denominator)^s, so a float product
    with a certified error below 1/(2D) rounds to the exact value; rows that do not
    meet that bound fall back to the resultant.
    """
    src = g.source
    den = 1
    for b in src.elements:
        for c in b.coords:
            den = math.lcm(den, c.denominator)
    D = den ** g.dim
    coords = coeffs.astype(float) @ g.basis
    margin = g.coord_margin(coeffs)
    absc = np.abs(coords)
    prod = np.prod(absc, axis=1)
    bound = np.zeros(len(coeffs))
    for j in range(g.dim):
        others = np.prod(np.delete(absc + margin, j, axis=1), axis=1)
        bound += margin[:, j] * others
    bound += prod * g.dim * 4 * EPS
    scaled = prod * D
    rounded = np.rint(scaled)
    ok = (bound * D < 0.25) & (np.abs(scaled - rounded) + bound * D < 0.5)
    out = []
    for k, a in enumerate(coeffs):
        if ok[k]:
            out.append(Fraction(int(rounded[k]), D))
        else:
            out.append(abs(norm(g.element(a))))
    return out


def save_lattice(g: Lattice, path: str | Path) -> None:
    payload = {
        "basis_midpoints": g.basis.tolist(),
        "det": g.det,
        "source_label": g.label,
        "error_bound": g.error_bound,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_lattice(path: str | Path) -> Lattice:
    raw = json.loads(Path(path).read_text())
    return Lattice(
        basis=np.array(raw["basis_midpoints"], dtype=float),
        det=float(raw["det"]),
        error_bound=float(raw["error_bound"]),
        label=str(raw.get("source_label", "")),
    )
