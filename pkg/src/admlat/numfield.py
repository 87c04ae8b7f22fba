"""Exact arithmetic in totally real number fields.

Elements are stored as rational coordinates in the power basis
``1, a, ..., a^(s-1)`` of a root ``a`` of a monic integer polynomial.  Real
embeddings are certified: every root of the defining polynomial is isolated
by a Sturm count and refined by bisection with rational endpoints, and
element values are enclosed with a centered-form bound.  Nothing here relies
on floating point for a decision.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    DegreeTooSmall,
    FieldMismatch,
    NotMonic,
    NotTotallyReal,
    PrecisionExhausted,
    ValidationError,
)

MAX_WORKING_BITS = 4096

# ---------------------------------------------------------------------------
# dense polynomials over Q, constant term first


def _strip(p):
    p = list(p)
    while p and p[-1] == 0:
        p.pop()
    return p


def poly_eval(p: Sequence[Fraction], x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(p):
        acc = acc * x + c
    return acc


def poly_deriv(p):
    return [i * p[i] for i in range(1, len(p))]


def poly_rem(a, b):
    a = [Fraction(c) for c in _strip(a)]
    b = _strip(b)
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    lead = Fraction(b[-1])
    while len(a) >= len(b):
        q = a[-1] / lead
        shift = len(a) - len(b)
        for i, c in enumerate(b):
            a[i + shift] -= q * c
        a = _strip(a)
        if not a:
            break
    return a


def sturm_sequence(p):
    seq = [[Fraction(c) for c in _strip(p)], [Fraction(c) for c in poly_deriv(_strip(p))]]
    while True:
        r = poly_rem(seq[-2], seq[-1])
        if not r:
            break
        seq.append([-c for c in r])
    return seq


def _sign_changes(values):
    signs = [v for v in values if v != 0]
    return sum(1 for u, v in zip(signs, signs[1:]) if (u > 0) != (v > 0))


def count_real_roots(p, lo: Fraction, hi: Fraction, seq=None) -> int:
    """Number of distinct real roots of ``p`` in the half-open interval (lo, hi]."""
    seq = seq or sturm_sequence(p)
    return _sign_changes([poly_eval(q, lo) for q in seq]) - _sign_changes(
        [poly_eval(q, hi) for q in seq]
    )


def _is_squarefree(p) -> bool:
    a, b = [Fraction(c) for c in p], [Fraction(c) for c in poly_deriv(p)]
    while b:
        a, b = b, poly_rem(a, b)
    return len(_strip(a)) == 1


def isolate_real_roots(coeffs: Sequence[int]) -> list[tuple[Fraction, Fraction]]:
    """Disjoint rational intervals ``(lo, hi]`` each holding exactly one real root, descending."""
    seq = sturm_sequence(coeffs)
    bound = Fraction(1 + max(abs(c) for c in coeffs[:-1]))  # Cauchy bound, monic input
    out = []
    stack = [(-bound, bound)]
    while stack:
        lo, hi = stack.pop()
        n = count_real_roots(coeffs, lo, hi, seq)
        if n == 0:
            continue
        if n == 1:
            out.append((lo, hi))
            continue
        mid = (lo + hi) / 2
        stack.append((lo, mid))
        stack.append((mid, hi))
    return sorted(out, reverse=True)


def refine_root(coeffs, lo: Fraction, hi: Fraction, bits: int) -> tuple[Fraction, Fraction]:
    """Bisect an isolating interval ``(lo, hi]`` until its width is at most 2**-bits."""
    target = Fraction(1, 1 << bits)
    f_hi = poly_eval(coeffs, hi)
    if f_hi == 0:
        return hi, hi
    while hi - lo > target:
        mid = (lo + hi) / 2
        f_mid = poly_eval(coeffs, mid)
        if f_mid == 0:
            return mid, mid
        if (f_mid > 0) == (f_hi > 0):
            hi, f_hi = mid, f_mid
        else:
            lo = mid
    return lo, hi


@lru_cache(maxsize=4096)
def _refined(coeffs: tuple, lo: Fraction, hi: Fraction, bits: int):
    return refine_root(list(coeffs), lo, hi, bits)


# ---------------------------------------------------------------------------
# certified intervals


@dataclass(frozen=True)
class Interval:
    """Closed interval with exact rational endpoints."""

    lo: Fraction
    hi: Fraction

    @property
    def mid(self) -> float:
        return float((self.lo + self.hi) / 2)

    @property
    def halfwidth(self) -> float:
        # round up so the float never understates the enclosure
        return math.nextafter(float((self.hi - self.lo) / 2), math.inf)

    def contains(self, x) -> bool:
        return self.lo <= Fraction(x) <= self.hi

    def excludes_zero(self) -> bool:
        return self.lo > 0 or self.hi < 0


def _enclose(p: Sequence[Fraction], lo: Fraction, hi: Fraction) -> Interval:
    """Enclose p([lo, hi]) with the mean-value form around the midpoint."""
    if lo == hi:
        v = poly_eval(p, lo)
        return Interval(v, v)
    m = (lo + hi) / 2
    r = (hi - lo) / 2
    v = poly_eval(p, m)
    big = max(abs(lo), abs(hi))
    dbound = sum(abs(i * p[i]) * big ** (i - 1) for i in range(1, len(p)))
    return Interval(v - dbound * r, v + dbound * r)


# ---------------------------------------------------------------------------
# fields and elements


@dataclass(frozen=True)
class FieldSpec:
    coeffs: tuple
    precision_bits: int = 64
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(int(c) for c in self.coeffs))


class Field:
    """A totally real field Q[x]/(f) with isolated real roots, largest first."""

    def __init__(self, spec: FieldSpec, root_boxes: list[tuple[Fraction, Fraction]]):
        self.spec = spec
        self.coeffs = spec.coeffs
        self.degree = len(spec.coeffs) - 1
        self.label = spec.label
        self._roots = tuple(root_boxes)

    def __repr__(self):
        return f"Field({self.label!r}, coeffs={list(self.coeffs)})"

    def __eq__(self, other):
        return isinstance(other, Field) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    # -- construction helpers
    def element(self, coords: Iterable) -> "FieldElement":
        coords = [Fraction(c) for c in coords]
        if len(coords) > self.degree:
            raise ValueError("too many coordinates for this field")
        coords += [Fraction(0)] * (self.degree - len(coords))
        return FieldElement(self, tuple(coords))

    @property
    def zero(self) -> "FieldElement":
        return self.element([0])

    @property
    def one(self) -> "FieldElement":
        return self.element([1])

    @property
    def gen(self) -> "FieldElement":
        return self.element([0, 1])

    def root_interval(self, j: int, bits: int) -> tuple[Fraction, Fraction]:
        lo, hi = self._roots[j]
        return _refined(self.coeffs, lo, hi, bits)

    def discriminant(self) -> Fraction:
        """Polynomial discriminant (-1)^(s(s-1)/2) * Res(f, f')."""
        fprime = self.element(poly_deriv(list(self.coeffs)))
        sign = -1 if (self.degree * (self.degree - 1) // 2) % 2 else 1
        return sign * norm(fprime)

    # reduction of x^k, k < 2s-1, into the power basis
    def _reduce(self, prod: list[Fraction]) -> tuple:
        s = self.degree
        prod = list(prod)
        for k in range(len(prod) - 1, s - 1, -1):
            c = prod[k]
            if c:
                for i in range(s):
                    prod[k - s + i] -= c * self.coeffs[i]
            prod[k] = 0
        prod += [Fraction(0)] * (s - len(prod))
        return tuple(prod[:s])


def parse_field(spec: FieldSpec) -> Field:
    coeffs = spec.coeffs
    if len(coeffs) < 3:
        raise DegreeTooSmall(f"degree {len(coeffs) - 1} < 2")
    if coeffs[-1] != 1:
        raise NotMonic(f"leading coefficient {coeffs[-1]} != 1")
    s = len(coeffs) - 1
    if not _is_squarefree(coeffs):
        raise NotTotallyReal("polynomial has repeated roots")
    boxes = isolate_real_roots(coeffs)
    if len(boxes) != s:
        raise NotTotallyReal(f"{len(boxes)} real roots for degree {s}")
    return Field(spec, boxes)


@dataclass(frozen=True, eq=False)
class FieldElement:
    field: Field
    coords: tuple

    def _check(self, other):
        if not isinstance(other, FieldElement):
            other = self.field.element([other])
        if other.field != self.field:
            raise FieldMismatch(f"{self.field!r} vs {other.field!r}")
        return other

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.field.element([other])
        if not isinstance(other, FieldElement):
            return NotImplemented
        return self.field == other.field and self.coords == other.coords

    def __hash__(self):
        return hash((self.field.coeffs, self.coords))

    def __repr__(self):
        return f"FieldElement({[str(c) for c in self.coords]})"

    def __add__(self, other):
        other = self._check(other)
        return FieldElement(self.field, tuple(a + b for a, b in zip(self.coords, other.coords)))

    __radd__ = __add__

    def __neg__(self):
        return FieldElement(self.field, tuple(-a for a in self.coords))

    def __sub__(self, other):
        return self + (-self._check(other))

    def __rsub__(self, other):
        return self._check(other) - self

    def __mul__(self, other):
        other = self._check(other)
        s = self.field.degree
        prod = [Fraction(0)] * (2 * s - 1)
        for i, a in enumerate(self.coords):
            if a:
                for j, b in enumerate(other.coords):
                    if b:
                        prod[i + j] += a * b
        return FieldElement(self.field, self.field._reduce(prod))

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        result, base = self.field.one, self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __truediv__(self, other):
        return self * self._check(other).inverse()

    def is_zero(self) -> bool:
        return not any(self.coords)

    def is_integral_coords(self) -> bool:
        return all(c.denominator == 1 for c in self.coords)

    def mult_matrix(self) -> list[list[Fraction]]:
        """Matrix of x -> self*x in the power basis; column j holds self*a^j."""
        s = self.field.degree
        cols = []
        col = self
        gen = self.field.gen
        for _ in range(s):
            cols.append(col.coords)
            col = col * gen
        return [[cols[j][i] for j in range(s)] for i in range(s)]

    def inverse(self) -> "FieldElement":
        if self.is_zero():
            raise ZeroDivisionError("inverse of zero field element")
        m = self.mult_matrix()
        rhs = [Fraction(1)] + [Fraction(0)] * (self.field.degree - 1)
        return FieldElement(self.field, tuple(_solve(m, rhs)))


def elem_op(a: FieldElement, b: FieldElement, kind: str) -> FieldElement:
    if a.field != b.field:
        raise FieldMismatch(f"{a.field!r} vs {b.field!r}")
    if kind == "add":
        return a + b
    if kind == "sub":
        return a - b
    if kind == "mul":
        return a * b
    raise ValueError(f"unknown operation {kind!r}")


def _det(m: list[list[Fraction]]) -> Fraction:
    a = [list(map(Fraction, row)) for row in m]
    n = len(a)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            det = -det
        det *= a[c][c]
        for r in range(c + 1, n):
            f = a[r][c] / a[c][c]
            if f:
                for k in range(c, n):
                    a[r][k] -= f * a[c][k]
    return det


def _solve(m, rhs):
    n = len(m)
    a = [list(map(Fraction, row)) + [Fraction(b)] for row, b in zip(m, rhs)]
    for c in range(n):
        piv = next(r for r in range(c, n) if a[r][c] != 0)
        a[c], a[piv] = a[piv], a[c]
        for r in range(n):
            if r != c and a[r][c]:
                f = a[r][c] / a[c][c]
                for k in range(c, n + 1):
                    a[r][k] -= f * a[c][k]
    return [a[i][n] / a[i][i] for i in range(n)]


def norm(a: FieldElement) -> Fraction:
    """Exact field norm as det of the multiplication matrix, i.e. Res(f, a(x))."""
    return _det(a.mult_matrix())


def trace(a: FieldElement) -> Fraction:
    m = a.mult_matrix()
    return sum((m[i][i] for i in range(len(m))), Fraction(0))


def basis_discriminant(basis: Sequence[FieldElement]) -> Fraction:
    """det of the trace form Tr(b_i b_j)."""
    return _det([[trace(bi * bj) for bj in basis] for bi in basis])


# ---------------------------------------------------------------------------
# embeddings


def embed_one(a: FieldElement, j: int, prec: int, max_bits: int = MAX_WORKING_BITS) -> Interval:
    f = a.field
    bits = prec + 8
    target = Fraction(1, 1 << prec)
    while True:
        lo, hi = f.root_interval(j, bits)
        iv = _enclose(a.coords, lo, hi)
        if (iv.hi - iv.lo) / 2 <= target:
            return iv
        bits *= 2
        if bits > max_bits:
            raise PrecisionExhausted(f"cannot reach 2^-{prec} within {max_bits} working bits")


def embed(a: FieldElement, prec: int | None = None, max_bits: int = MAX_WORKING_BITS) -> list[Interval]:
    """Certified enclosures of sigma_1(a), ..., sigma_s(a), ordered by root."""
    prec = a.field.spec.precision_bits if prec is None else prec
    return [embed_one(a, j, prec, max_bits) for j in range(a.field.degree)]


def embed_float(a: FieldElement, prec: int | None = None) -> list[float]:
    return [iv.mid for iv in embed(a, prec)]


def sign(a: FieldElement, j: int, max_bits: int = MAX_WORKING_BITS) -> int:
    """Exact sign of sigma_j(a)."""
    if a.is_zero():
        return 0
    bits = 64
    while bits <= max_bits:
        lo, hi = a.field.root_interval(j, bits)
        iv = _enclose(a.coords, lo, hi)
        if iv.excludes_zero():
            return 1 if iv.lo > 0 else -1
        if lo == hi:  # rational root; enclosure is exact
            return 0 if iv.lo == 0 else (1 if iv.lo > 0 else -1)
        bits *= 2
    raise PrecisionExhausted("sign undecided; nonzero element should always separate")


# ---------------------------------------------------------------------------
# field data files


def _parse_rational(v) -> Fraction:
    if isinstance(v, float):
        raise ValidationError(f"float {v!r} in field file; use an integer or 'p/q' string")
    return Fraction(v)


@dataclass(frozen=True)
class FieldData:
    """Everything a field file carries, validated."""

    field: Field
    basis: tuple
    units: tuple
    label: str
    source: str = ""
    metadata: dict = dc_field(default_factory=dict)

    @property
    def discriminant(self) -> Fraction:
        return basis_discriminant(self.basis)


BUNDLED = {"sqrt2": "sqrt2.fld", "sqrt5": "sqrt5.fld", "cubic": "cubic.fld"}


def resolve_field_path(name_or_path: str | Path) -> Path:
    key = str(name_or_path)
    if key in BUNDLED:
        return Path(str(resources.files("admlat") / "fields" / BUNDLED[key]))
    p = Path(key)
    if not p.exists() and p.name in BUNDLED.values():
        # let paths like "fields/sqrt2.fld" find the bundled copy
        return Path(str(resources.files("admlat") / "fields" / p.name))
    return p


def load_field_file(name_or_path: str | Path) -> FieldData:
    path = resolve_field_path(name_or_path)
    if not path.exists():
        raise ValidationError(f"field file not found: {name_or_path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid field file JSON ({exc})") from exc
    return field_data_from_dict(raw, source=str(path))


def field_data_from_dict(raw: dict, source: str = "") -> FieldData:
    for key in ("label", "coeffs", "basis"):
        if key not in raw:
            raise ValidationError(f"field file missing key {key!r}")
    spec = FieldSpec(
        coeffs=tuple(raw["coeffs"]),
        precision_bits=int(raw.get("precision_bits", 64)),
        label=str(raw["label"]),
    )
    K = parse_field(spec)
    basis = tuple(K.element([_parse_rational(c) for c in b]) for b in raw["basis"])
    if len(basis) != K.degree:
        raise ValidationError(f"basis has {len(basis)} elements, field degree is {K.degree}")
    units = tuple(K.element([_parse_rational(c) for c in u]) for u in raw.get("units", []))

    # discriminant of the basis two ways: trace form vs resultant times index^2
    change = [[c for c in b.coords] for b in basis]
    d_trace = basis_discriminant(basis)
    d_res = K.discriminant() * _det(change) ** 2
    if d_trace != d_res or d_trace == 0:
        raise ValidationError(f"basis discriminant mismatch: trace form {d_trace}, resultant {d_res}")
    if "disc" in raw and Fraction(raw["disc"]) != d_trace:
        raise ValidationError(f"declared disc {raw['disc']} != computed {d_trace}")
    meta = {k: v for k, v in raw.items() if k not in ("label", "coeffs", "basis", "units", "precision_bits")}
    return FieldData(field=K, basis=basis, units=units, label=spec.label, source=source, metadata=meta)
