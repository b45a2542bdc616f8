"""Exact formal expansions of the radial translator slope ODE.

The slope ``phi = V'`` of a rotationally symmetric translator solves

    phi' = (1 + phi**2) * (1 - (n - 1) * phi / r).

Two ansätze are supported:

* tail, r -> infinity:  phi = r/(n-1) + sum_k c_k r**k,  k = 0, -1, -2, ...
* origin, r -> 0:       phi = sum_k a_k r**k,            k = 1, 2, 3, ...

Coefficients are obtained lowest-order-first from a triangular system.  All
arithmetic is exact: :class:`fractions.Fraction` when ``n`` is a number, and
:class:`NPoly` (elements of Q[n, 1/(n-1)]) when ``n`` is kept symbolic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Union

import numpy as np

MAX_ORDER = 21


class SeriesError(ArithmeticError):
    """The triangular system could not be solved in the requested ring."""


class NPoly:
    """Exact element ``p(n) / (n - 1)**e`` with rational polynomial ``p``.

    ``coeffs[k]`` is the coefficient of ``n**k``.  Instances are normalised so
    that ``p(1) != 0`` whenever ``e > 0``.
    """

    __slots__ = ("coeffs", "e")

    def __init__(self, coeffs=(), e: int = 0):
        c = [Fraction(x) for x in coeffs]
        while c and c[-1] == 0:
            c.pop()
        self.coeffs = tuple(c)
        self.e = int(e)
        self._normalise()

    @classmethod
    def var(cls) -> "NPoly":
        return cls((0, 1))

    @classmethod
    def const(cls, value) -> "NPoly":
        return cls((value,))

    def _normalise(self):
        c = list(self.coeffs)
        e = self.e
        while e > 0 and c and sum(c) == 0:
            c = _divide_by_n_minus_1(c)
            e -= 1
        if not c:
            e = 0
        self.coeffs = tuple(c)
        self.e = e

    @staticmethod
    def _coerce(other) -> "NPoly":
        if isinstance(other, NPoly):
            return other
        if isinstance(other, (int, Fraction)):
            return NPoly((other,))
        return NotImplemented

    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def is_polynomial(self) -> bool:
        return self.e == 0

    def degree(self) -> int:
        return len(self.coeffs) - 1

    def _lift(self, e: int):
        # numerator expressed over (n-1)**e, e >= self.e
        c = list(self.coeffs)
        for _ in range(e - self.e):
            c = _mul_poly(c, [Fraction(-1), Fraction(1)])
        return c

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        e = max(self.e, other.e)
        a, b = self._lift(e), other._lift(e)
        m = max(len(a), len(b))
        a += [Fraction(0)] * (m - len(a))
        b += [Fraction(0)] * (m - len(b))
        return NPoly([x + y for x, y in zip(a, b)], e)

    __radd__ = __add__

    def __neg__(self):
        return NPoly([-x for x in self.coeffs], self.e)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return NPoly(_mul_poly(list(self.coeffs), list(other.coeffs)), self.e + other.e)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if other.is_zero():
            raise ZeroDivisionError("division by zero polynomial")
        # only units of Q[n, 1/(n-1)] are invertible: c * (n-1)**j
        c = list(other.coeffs)
        j = 0
        while len(c) > 1:
            if sum(c) != 0:
                raise SeriesError(f"cannot divide by non-unit {other}")
            c = _divide_by_n_minus_1(c)
            j += 1
        scale = c[0]
        num = self._lift(self.e)
        for _ in range(other.e):
            num = _mul_poly(num, [Fraction(-1), Fraction(1)])
        return NPoly([x / scale for x in num], self.e + j)

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return False
        return (self - other).is_zero()

    def __hash__(self):
        return hash((self.coeffs, self.e))

    def __call__(self, n):
        n = Fraction(n)
        val = Fraction(0)
        for c in reversed(self.coeffs):
            val = val * n + c
        if self.e:
            if n == 1:
                raise ZeroDivisionError("pole at n = 1")
            val /= (n - 1) ** self.e
        return val

    def __repr__(self):
        return f"NPoly({format_poly(self)})"


def _mul_poly(a, b):
    if not a or not b:
        return []
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x == 0:
            continue
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def _divide_by_n_minus_1(c):
    # synthetic division by (n - 1); caller guarantees p(1) == 0
    q = [Fraction(0)] * (len(c) - 1)
    carry = Fraction(0)
    for k in range(len(c) - 1, 0, -1):
        carry = c[k] + carry
        q[k - 1] = carry
    return q


def _frac_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator)


def format_poly(p: NPoly) -> str:
    """Render as ``+n^2 -5*n +4``; a pole prints as ``(...)/(n-1)^e``."""
    if p.is_zero():
        return "+0"
    terms = []
    for k in range(len(p.coeffs) - 1, -1, -1):
        c = p.coeffs[k]
        if c == 0:
            continue
        sign = "+" if c > 0 else "-"
        mag = abs(c)
        if k == 0:
            body = _frac_str(mag)
        else:
            mono = "n" if k == 1 else f"n^{k}"
            body = mono if mag == 1 else f"{_frac_str(mag)}*{mono}"
        terms.append(sign + body)
    text = " ".join(terms)
    if p.e:
        text = f"({text})/(n-1)^{p.e}"
    return text


Coeff = Union[Fraction, NPoly]


@dataclass(frozen=True)
class TailSeries:
    """``phi ~ c[1] r + sum_j c[-(2j+1)] r**-(2j+1)`` as r -> infinity."""

    mode: str
    order: int
    coefficients: Dict[int, Coeff]
    n: Fraction | None = None

    def powers(self):
        return sorted(self.coefficients, reverse=True)

    def at(self, n) -> "TailSeries":
        """Specialise a symbolic series to a numeric dimension."""
        if self.mode == "numeric":
            return self
        n = Fraction(n)
        return TailSeries("numeric", self.order, {k: c(n) for k, c in self.coefficients.items()}, n)


@dataclass(frozen=True)
class OriginSeries:
    """Regular expansion ``phi = sum_j a[2j+1] r**(2j+1)`` near r = 0."""

    n: Fraction
    order: int
    coefficients: Dict[int, Fraction] = field(default_factory=dict)
    mode: str = "numeric"

    def powers(self):
        return sorted(self.coefficients)


# --- formal substitution ------------------------------------------------------

def _ring(n):
    if isinstance(n, str):
        if n != "n":
            raise ValueError("symbolic dimension must be given as 'n'")
        nn = NPoly.var()
        return nn, NPoly.const(0), NPoly.const(1), "symbolic"
    nn = Fraction(n)
    if nn < 2:
        raise ValueError("n must be >= 2")
    return nn, Fraction(0), Fraction(1), "numeric"


def _mul(a: dict, b: dict, zero) -> dict:
    out: dict = {}
    for i, x in a.items():
        for j, y in b.items():
            k = i + j
            out[k] = out.get(k, zero) + x * y
    return out


def _residual(phi: dict, nn, zero, one) -> dict:
    """Laurent coefficients of phi' - (1 + phi^2)(1 - (n-1) phi / r)."""
    dphi = {k - 1: k * c for k, c in phi.items() if k != 0}
    sq = _mul(phi, phi, zero)
    sq[0] = sq.get(0, zero) + one
    lin = {k - 1: -(nn - 1) * c for k, c in phi.items()}
    lin[0] = lin.get(0, zero) + one
    rhs = _mul(sq, lin, zero)
    out = dict(dphi)
    for k, c in rhs.items():
        out[k] = out.get(k, zero) - c
    return out


def _is_zero(c) -> bool:
    return c.is_zero() if isinstance(c, NPoly) else c == 0


def _residual_coefficient(phi: dict, power: int, nn, zero, one):
    """Single Laurent coefficient of the residual (cheap version of _residual)."""
    dphi = (power + 1) * phi.get(power + 1, zero)
    sq: dict = {}
    for i, x in phi.items():
        for j, y in phi.items():
            sq[i + j] = sq.get(i + j, zero) + x * y
    sq[0] = sq.get(0, zero) + one
    total = zero
    for k, c in sq.items():
        # lin index m with k + m == power
        m = power - k
        lin_c = -(nn - 1) * phi.get(m + 1, zero)
        if m == 0:
            lin_c = lin_c + one
        if not _is_zero(lin_c):
            total = total + c * lin_c
    return dphi - total


def _solve_triangular(phi: dict, unknowns, target_of, nn, zero, one):
    for k in unknowns:
        p = target_of(k)
        phi[k] = zero
        r0 = _residual_coefficient(phi, p, nn, zero, one)
        phi[k] = one
        r1 = _residual_coefficient(phi, p, nn, zero, one)
        slope = r1 - r0
        if _is_zero(slope):
            raise SeriesError(f"singular step solving for r^{k}")
        value = -r0 / slope
        if isinstance(value, NPoly) and k != 1 and not value.is_polynomial:
            raise SeriesError(f"coefficient of r^{k} is not polynomial in n: {value}")
        phi[k] = value
    return phi


def _check_order(order: int):
    if order < 1 or order % 2 == 0:
        raise ValueError("order must be an odd integer >= 1")
    if order > MAX_ORDER:
        raise ValueError(f"order must be <= {MAX_ORDER}")


def expand_tail(n, order: int) -> TailSeries:
    """Asymptotic expansion of phi at infinity up to ``r**-order``.

    ``n`` is a number (exact rational) or the string ``'n'`` for polynomial
    coefficients.  Even powers are solved for as well and must vanish.
    """
    _check_order(order)
    nn, zero, one, mode = _ring(n)
    phi = {1: one / (nn - 1)}
    # r^k is fixed by the r^(k+1) balance
    unknowns = list(range(0, -order - 1, -1))
    _solve_triangular(phi, unknowns, lambda k: k + 1, nn, zero, one)
    for k in unknowns:
        if k % 2 == 0 and not _is_zero(phi[k]):
            raise SeriesError(f"even coefficient r^{k} does not vanish: {phi[k]}")
    coeffs = {k: c for k, c in phi.items() if k % 2 != 0}
    return TailSeries(mode, order, coeffs, nn if mode == "numeric" else None)


def expand_origin(n, order: int) -> OriginSeries:
    """Regular series of phi at r = 0 (phi(0) = 0) up to ``r**order``."""
    _check_order(order)
    nn, zero, one, mode = _ring(n)
    if mode != "numeric":
        raise ValueError("origin series is only generated for numeric n")
    phi: dict = {}
    unknowns = list(range(1, order + 1))
    _solve_triangular(phi, unknowns, lambda k: k - 1, nn, zero, one)
    for k in unknowns:
        if k % 2 == 0 and phi[k] != 0:
            raise SeriesError(f"even coefficient r^{k} does not vanish: {phi[k]}")
    return OriginSeries(nn, order, {k: c for k, c in phi.items() if k % 2 == 1})


def series_residual(s: TailSeries | OriginSeries) -> Dict[int, Coeff]:
    """Exact Laurent residual of substituting the truncated series into the ODE.

    Only nonzero coefficients are returned.
    """
    if s.mode == "symbolic":
        nn, zero, one = NPoly.var(), NPoly.const(0), NPoly.const(1)
    else:
        nn, zero, one = s.n, Fraction(0), Fraction(1)
    res = _residual(dict(s.coefficients), nn, zero, one)
    return {k: c for k, c in res.items() if not _is_zero(c)}


def leading_power(res: dict) -> int | None:
    return max(res) if res else None


# --- numeric evaluation ---------------------------------------------------------

def eval_series(s: TailSeries | OriginSeries, r):
    """Floating-point value of a numeric series at ``r`` (scalar or array)."""
    if s.mode != "numeric":
        raise TypeError("eval_series needs a numeric-n series; call .at(n) first")
    r = np.asarray(r, dtype=float)
    if isinstance(s, TailSeries):
        x = 1.0 / r
        x2 = x * x
        acc = np.zeros_like(r)
        for k in range(-s.order, 0, 2):
            acc = acc * x2 + float(s.coefficients[k])
        val = float(s.coefficients[1]) * r + acc * x
    else:
        r2 = r * r
        acc = np.zeros_like(r)
        for k in range(s.order, 0, -2):
            acc = acc * r2 + float(s.coefficients[k])
        val = acc * r
    return val if val.ndim else float(val)


def tail_float_coefficients(s: TailSeries) -> np.ndarray:
    """``[c_-1, c_-3, ..., c_-order]`` as floats (kernel input)."""
    return np.array([float(s.coefficients[k]) for k in range(-1, -s.order - 1, -2)])


def residual_float_coefficients(s: TailSeries) -> tuple[int, np.ndarray]:
    """Residual of a numeric tail series as ``(top_power, dense_coeffs)``.

    ``dense_coeffs[j]`` multiplies ``r**(top_power - j)``.
    """
    res = series_residual(s)
    if not res:
        return 0, np.zeros(1)
    top, low = max(res), min(res)
    dense = np.array([float(res.get(top - j, 0)) for j in range(top - low + 1)])
    return top, dense


def dump_lines(s: TailSeries | OriginSeries) -> list[str]:
    """``power<TAB>value`` lines, highest power first for tails."""
    keys = s.powers()
    out = []
    for k in keys:
        c = s.coefficients[k]
        text = format_poly(c) if isinstance(c, NPoly) else _frac_str_full(Fraction(c))
        out.append(f"{k}\t{text}")
    return out


def _frac_str_full(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"
