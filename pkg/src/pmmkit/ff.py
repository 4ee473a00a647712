"""Prime-field arithmetic, polynomial evaluation and (error-correcting) interpolation.

Field elements are carried as plain Python ints in ``[0, p)`` on the hot paths;
:class:`FieldElement` and :class:`Polynomial` are thin typed wrappers for the
scalar API.
"""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from sympy import isprime

from .errors import DuplicateEvaluationPoint, NotPrime, UncorrectableErrors

MERSENNE61 = (1 << 61) - 1

# Exhaustive error location is used while comb(n, E) * k**2 stays below this.
EXHAUSTIVE_WORK_BUDGET = 10**6


@functools.lru_cache(maxsize=None)
def _checked_prime(modulus: int) -> int:
    if not isinstance(modulus, int) or modulus < 2 or modulus >= 1 << 64:
        raise NotPrime(f"modulus must be an integer in [2, 2**64), got {modulus!r}")
    if not isprime(modulus):
        raise NotPrime(f"{modulus} is not prime")
    return modulus


@dataclass(frozen=True)
class PrimeField:
    """GF(p) for a prime p that fits in a 64-bit word."""

    modulus: int = MERSENNE61

    def __post_init__(self):
        _checked_prime(self.modulus)

    def __call__(self, value) -> "FieldElement":
        return FieldElement(self, value)

    def __contains__(self, value) -> bool:
        return isinstance(value, int) and 0 <= value < self.modulus

    def zero(self) -> "FieldElement":
        return FieldElement(self, 0)

    def one(self) -> "FieldElement":
        return FieldElement(self, 1)

    def inv(self, a: int) -> int:
        a %= self.modulus
        if a == 0:
            raise ZeroDivisionError("0 has no inverse")
        return pow(a, -1, self.modulus)

    def random(self, rng) -> "FieldElement":
        return FieldElement(self, int(rng.integers(0, self.modulus)))


class FieldElement:
    __slots__ = ("field", "value")

    def __init__(self, field: PrimeField, value):
        if isinstance(value, FieldElement):
            value = value.value
        self.field = field
        self.value = int(value) % field.modulus

    def _coerce(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.field.modulus != self.field.modulus:
                raise TypeError("operands live in different fields")
            return other.value
        if isinstance(other, int):
            return other % self.field.modulus
        return NotImplemented

    def _wrap(self, value: int) -> "FieldElement":
        return FieldElement(self.field, value)

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self._wrap(self.value + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self._wrap(self.value - o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self._wrap(o - self.value)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self._wrap(self.value * o)

    __rmul__ = __mul__

    def __neg__(self):
        return self._wrap(-self.value)

    def inverse(self) -> "FieldElement":
        return self._wrap(self.field.inv(self.value))

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self._wrap(self.value * self.field.inv(o))

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self._wrap(o * self.field.inv(self.value))

    def __pow__(self, exponent: int):
        if exponent < 0:
            return self.inverse() ** (-exponent)
        return self._wrap(pow(self.value, exponent, self.field.modulus))

    def __eq__(self, other):
        if isinstance(other, FieldElement):
            return self.field.modulus == other.field.modulus and self.value == other.value
        if isinstance(other, int):
            return self.value == other % self.field.modulus
        return NotImplemented

    def __hash__(self):
        return hash((self.field.modulus, self.value))

    def __bool__(self):
        return self.value != 0

    def __int__(self):
        return self.value

    __index__ = __int__

    def __repr__(self):
        return f"FieldElement({self.value} mod {self.field.modulus})"


def _strip(coeffs: Sequence[int]) -> tuple:
    end = len(coeffs)
    while end and coeffs[end - 1] == 0:
        end -= 1
    return tuple(coeffs[:end])


@dataclass(frozen=True)
class Polynomial:
    """Dense univariate polynomial; ``coeffs[r]`` multiplies ``x**r``."""

    field: PrimeField
    coeffs: tuple

    def __init__(self, field: PrimeField, coeffs: Iterable = ()):
        p = field.modulus
        object.__setattr__(self, "field", field)
        object.__setattr__(self, "coeffs", _strip([int(c) % p for c in coeffs]))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x) -> FieldElement:
        return eval_poly(self, x)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (0,) * (n - len(self.coeffs))
        b = other.coeffs + (0,) * (n - len(other.coeffs))
        return Polynomial(self.field, [x + y for x, y in zip(a, b)])

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(self.field, poly_mul(self.coeffs, other.coeffs, self.field.modulus))

    def coefficient(self, r: int) -> FieldElement:
        return self.field(self.coeffs[r] if r < len(self.coeffs) else 0)


def _value(x) -> int:
    return x.value if isinstance(x, FieldElement) else int(x)


def horner(coeffs: Sequence[int], x: int, p: int) -> int:
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % p
    return acc


def eval_poly(poly: Polynomial, x) -> FieldElement:
    p = poly.field.modulus
    return poly.field(horner(poly.coeffs, _value(x) % p, p))


def batch_eval(poly: Polynomial, xs: Iterable) -> list:
    # Naive per-point Horner; quasi-linear multipoint evaluation is not needed at desk scale.
    return [eval_poly(poly, x) for x in xs]


def poly_mul(a: Sequence[int], b: Sequence[int], p: int) -> list:
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                out[i + j] += ai * bj
    return [c % p for c in out]


def poly_divmod(num: Sequence[int], den: Sequence[int], p: int) -> tuple:
    den = list(_strip(den))
    if not den:
        raise ZeroDivisionError("division by the zero polynomial")
    rem = list(num)
    lead_inv = pow(den[-1], -1, p)
    dd = len(den) - 1
    if len(rem) - 1 < dd:
        return [], list(_strip(rem))
    quot = [0] * (len(rem) - dd)
    for i in range(len(rem) - 1, dd - 1, -1):
        c = rem[i] * lead_inv % p
        quot[i - dd] = c
        if c:
            for j in range(dd + 1):
                rem[i - dd + j] = (rem[i - dd + j] - c * den[j]) % p
    return quot, list(_strip(rem[:dd]))


def _check_distinct(xs: Sequence[int], p: int):
    seen = set()
    for x in xs:
        x %= p
        if x in seen:
            raise DuplicateEvaluationPoint(f"evaluation point {x} appears more than once")
        seen.add(x)


def lagrange_basis(xs: Sequence[int], p: int) -> list:
    """Coefficient lists of the Lagrange basis polynomials for nodes ``xs``.

    Row ``i`` holds the coefficients (ascending powers) of the unique
    polynomial of degree < n that is 1 at ``xs[i]`` and 0 at every other node.
    O(n^2) via one master product and n synthetic divisions.
    """
    xs = [int(x) % p for x in xs]
    _check_distinct(xs, p)
    n = len(xs)
    master = [1]
    for x in xs:
        # multiply by (X - x)
        nxt = [0] * (len(master) + 1)
        for j, c in enumerate(master):
            nxt[j + 1] += c
            nxt[j] -= c * x
        master = [c % p for c in nxt]
    basis = []
    for x in xs:
        # synthetic division of master by (X - x)
        q = [0] * n
        carry = 0
        for j in range(n, 0, -1):
            carry = (master[j] + carry * x) % p
            q[j - 1] = carry
        w = horner(q, x, p)
        winv = pow(w, -1, p)
        basis.append([c * winv % p for c in q])
    return basis


def interpolate_values(xs: Sequence[int], ys: Sequence[int], p: int) -> list:
    """Coefficients (length ``len(xs)``) of the interpolant through ``(xs, ys)``."""
    basis = lagrange_basis(xs, p)
    n = len(xs)
    out = [0] * n
    for y, row in zip(ys, basis):
        if y:
            for r in range(n):
                out[r] += y * row[r]
    return [c % p for c in out]


def _split_points(points, field: PrimeField | None):
    if not points:
        raise ValueError("at least one point is required")
    if field is None:
        x0 = points[0][0]
        if not isinstance(x0, FieldElement):
            raise TypeError("pass field= when points are plain integers")
        field = x0.field
    xs = [_value(x) for x, _ in points]
    ys = [_value(y) for _, y in points]
    return field, xs, ys


def interpolate(points: Sequence[tuple], field: PrimeField | None = None) -> Polynomial:
    """Unique polynomial of degree < len(points) through ``points``."""
    field, xs, ys = _split_points(points, field)
    p = field.modulus
    return Polynomial(field, interpolate_values(xs, ys, p))


def solve_linear_system(rows: list, rhs: list, p: int):
    """One solution of ``rows @ x = rhs`` over GF(p), or None if inconsistent.

    Free variables are set to zero.
    """
    n_rows = len(rows)
    n_cols = len(rows[0]) if rows else 0
    aug = [[v % p for v in row] + [b % p] for row, b in zip(rows, rhs)]
    pivots = []
    r = 0
    for c in range(n_cols):
        pivot = next((i for i in range(r, n_rows) if aug[i][c]), None)
        if pivot is None:
            continue
        aug[r], aug[pivot] = aug[pivot], aug[r]
        inv = pow(aug[r][c], -1, p)
        aug[r] = [v * inv % p for v in aug[r]]
        for i in range(n_rows):
            if i != r and aug[i][c]:
                f = aug[i][c]
                aug[i] = [(vi - f * vr) % p for vi, vr in zip(aug[i], aug[r])]
        pivots.append(c)
        r += 1
        if r == n_rows:
            break
    if any(aug[i][n_cols] for i in range(r, n_rows)):
        return None
    x = [0] * n_cols
    for i, c in enumerate(pivots):
        x[c] = aug[i][n_cols]
    return x


def matrix_rank(rows: list, p: int) -> int:
    if not rows:
        return 0
    m = [[v % p for v in row] for row in rows]
    n_rows, n_cols = len(m), len(m[0])
    rank = 0
    for c in range(n_cols):
        pivot = next((i for i in range(rank, n_rows) if m[i][c]), None)
        if pivot is None:
            continue
        m[rank], m[pivot] = m[pivot], m[rank]
        inv = pow(m[rank][c], -1, p)
        for i in range(rank + 1, n_rows):
            if m[i][c]:
                f = m[i][c] * inv % p
                m[i] = [(vi - f * vr) % p for vi, vr in zip(m[i], m[rank])]
        rank += 1
        if rank == n_rows:
            break
    return rank


def null_space(rows: list, p: int) -> list:
    """Basis of ``{x : rows @ x = 0}`` over GF(p)."""
    if not rows:
        return []
    m = [[v % p for v in row] for row in rows]
    n_rows, n_cols = len(m), len(m[0])
    pivots = []
    r = 0
    for c in range(n_cols):
        pivot = next((i for i in range(r, n_rows) if m[i][c]), None)
        if pivot is None:
            continue
        m[r], m[pivot] = m[pivot], m[r]
        inv = pow(m[r][c], -1, p)
        m[r] = [v * inv % p for v in m[r]]
        for i in range(n_rows):
            if i != r and m[i][c]:
                f = m[i][c]
                m[i] = [(vi - f * vr) % p for vi, vr in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == n_rows:
            break
    basis = []
    for free in (c for c in range(n_cols) if c not in pivots):
        x = [0] * n_cols
        x[free] = 1
        for i, c in enumerate(pivots):
            x[c] = -m[i][free] % p
        basis.append(x)
    return basis


def _agreements(coeffs, xs, ys, p) -> int:
    return sum(1 for x, y in zip(xs, ys) if horner(coeffs, x, p) == y)


def _exhaustive_decode(xs, ys, k, E, p):
    n = len(xs)
    # Every error pattern of size <= E sits inside some E-subset of positions.
    for dropped in itertools.combinations(range(n), E):
        drop = set(dropped)
        keep = [i for i in range(n) if i not in drop]
        head = keep[:k]
        coeffs = interpolate_values([xs[i] for i in head], [ys[i] for i in head], p)
        if all(horner(coeffs, xs[i], p) == ys[i] for i in keep[k:]):
            return coeffs
    return None


def _berlekamp_welch(xs, ys, k, E, p):
    # Unknowns: Q (k+E coefficients) and the non-leading coefficients of monic locator (E).
    rows, rhs = [], []
    for x, y in zip(xs, ys):
        powers = [pow(x, j, p) for j in range(k + E)]
        rows.append(powers + [(-y * powers[j]) % p for j in range(E)])
        rhs.append(y * pow(x, E, p) % p)
    sol = solve_linear_system(rows, rhs, p)
    if sol is None:
        return None
    q = sol[: k + E]
    locator = sol[k + E:] + [1]
    quot, rem = poly_divmod(q, locator, p)
    if rem:
        return None
    if len(_strip(quot)) > k:
        return None
    return quot


def interpolate_with_errors(
    points: Sequence[tuple],
    degree_bound: int,
    max_errors: int,
    field: PrimeField | None = None,
    method: str = "auto",
) -> Polynomial:
    """Recover the polynomial of degree < ``degree_bound`` agreeing with all but
    at most ``max_errors`` of ``points``.

    ``method`` is ``"exhaustive"`` (try every set of E positions to discard),
    ``"linear"`` (Berlekamp-Welch error-locator system) or ``"auto"``, which
    picks exhaustive search while it is cheap.
    """
    field, xs, ys = _split_points(points, field)
    p = field.modulus
    n, k, E = len(xs), degree_bound, max_errors
    if k < 1 or E < 0:
        raise ValueError("degree_bound must be >= 1 and max_errors >= 0")
    if n < k + 2 * E:
        raise ValueError(f"need at least {k + 2 * E} points, got {n}")
    _check_distinct(xs, p)
    if method == "auto":
        method = "exhaustive" if math.comb(n, E) * k * k <= EXHAUSTIVE_WORK_BUDGET else "linear"
    if E == 0:
        coeffs = interpolate_values(xs[:k], ys[:k], p)
        if _agreements(coeffs, xs, ys, p) != n:
            raise UncorrectableErrors("points are not consistent with a polynomial of that degree")
        return Polynomial(field, coeffs)
    if method == "exhaustive":
        coeffs = _exhaustive_decode(xs, ys, k, E, p)
    elif method == "linear":
        coeffs = _berlekamp_welch(xs, ys, k, E, p)
    else:
        raise ValueError(f"unknown method {method!r}")
    if coeffs is None or _agreements(coeffs, xs, ys, p) < n - E:
        raise UncorrectableErrors(f"no polynomial of degree < {k} within {E} errors")
    return Polynomial(field, coeffs)
