"""Parity-graded power series and bracket polynomials.

Everything here is exact rational arithmetic.  The building blocks:

* the integer sequences a_n = (6n)!/((3n)!(2n)!) and b_n = ((6n+1)/(6n-1)) a_n;
* the parity ring Q[zeta]/(zeta^2 - 1), elements stored as (even, odd) pairs;
* the shifted series chat(i): chat(3q) = T^q A(zeta T) and
  chat(3q+1) = zeta T^q B(zeta T), with i = 2 mod 3 rejected;
* bracket polynomials: formal polynomials in indeterminates K_{n,a}
  (n >= 0 the T-degree, a in Z/2 the parity), produced by the bracket
  operation {F} = sum of [F]_{T^n zeta^a} K_{n,a} T^n;
* the two-point edge factor, obtained from the A/B numerator by synthetic
  division by (psi_1 + psi_2), with a zero-remainder consistency check.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import factorial

from .errors import InternalConsistencyError, InvalidParameterError

__all__ = [
    "ParityScalar",
    "a_coeff",
    "b_coeff",
    "series_a",
    "series_b",
    "plain_series",
    "chat",
    "bracket",
    "kpoly_mul",
    "bracket_exp",
    "divide_by_psi_sum",
    "edge_factor",
    "check_ab_identity",
]


@lru_cache(maxsize=None)
def a_coeff(n: int) -> int:
    """Coefficient of T^n in the series A: (6n)! / ((3n)! (2n)!)."""
    return factorial(6 * n) // (factorial(3 * n) * factorial(2 * n))


@lru_cache(maxsize=None)
def b_coeff(n: int) -> Fraction:
    """Coefficient of T^n in the series B: a_coeff(n) scaled by (6n+1)/(6n-1)."""
    return Fraction(6 * n + 1, 6 * n - 1) * a_coeff(n)


class ParityScalar:
    """Element ev + od*zeta of Q[zeta]/(zeta^2 - 1)."""

    __slots__ = ("ev", "od")

    def __init__(self, ev=0, od=0):
        self.ev = Fraction(ev)
        self.od = Fraction(od)

    @classmethod
    def graded(cls, coeff, parity: int) -> "ParityScalar":
        """A scalar concentrated in one parity: coeff * zeta^parity."""
        return cls(coeff, 0) if parity % 2 == 0 else cls(0, coeff)

    def component(self, parity: int) -> Fraction:
        """The coefficient of zeta^parity (parity taken mod 2)."""
        return self.ev if parity % 2 == 0 else self.od

    def __add__(self, other: "ParityScalar") -> "ParityScalar":
        return ParityScalar(self.ev + other.ev, self.od + other.od)

    def __sub__(self, other: "ParityScalar") -> "ParityScalar":
        return ParityScalar(self.ev - other.ev, self.od - other.od)

    def __neg__(self) -> "ParityScalar":
        return ParityScalar(-self.ev, -self.od)

    def __mul__(self, other: "ParityScalar") -> "ParityScalar":
        # (a + b z)(c + d z) with z^2 = 1.
        return ParityScalar(
            self.ev * other.ev + self.od * other.od,
            self.ev * other.od + self.od * other.ev,
        )

    def __bool__(self) -> bool:
        return bool(self.ev) or bool(self.od)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ParityScalar)
            and self.ev == other.ev
            and self.od == other.od
        )

    def __hash__(self):
        return hash((self.ev, self.od))

    def __repr__(self) -> str:
        return f"ParityScalar({self.ev!r}, {self.od!r})"


# A parity series is a plain list of ParityScalar, index = T-degree.


def series_a(order: int) -> list[ParityScalar]:
    """A(T) through T^order (zeta-free)."""
    return [ParityScalar(a_coeff(n)) for n in range(order + 1)]


def series_b(order: int) -> list[ParityScalar]:
    """B(T) through T^order (zeta-free)."""
    return [ParityScalar(b_coeff(n)) for n in range(order + 1)]


def plain_series(i: int, order: int) -> list[Fraction]:
    """The unhatted series with index i: T^q A(T) for i = 3q, T^q B(T) for i = 3q+1.

    Used by the independent plain-K path; no parity variables.
    """
    q, rem = divmod(i, 3)
    if i < 0 or rem == 2:
        raise InvalidParameterError(f"series index {i} is 2 mod 3 or negative")
    base = a_coeff if rem == 0 else b_coeff
    out = [Fraction(0)] * (order + 1)
    for m in range(q, order + 1):
        out[m] = Fraction(base(m - q))
    return out


def chat(i: int, order: int) -> list[ParityScalar]:
    """The hatted series with index i, through T^order.

    chat(3q) = T^q A(zeta T); chat(3q+1) = zeta T^q B(zeta T).  The
    substitution T -> zeta T turns the T^k coefficient c into c zeta^k.
    """
    q, rem = divmod(i, 3)
    if i < 0 or rem == 2:
        raise InvalidParameterError(f"series index {i} is 2 mod 3 or negative")
    out = [ParityScalar() for _ in range(order + 1)]
    for m in range(q, order + 1):
        k = m - q
        if rem == 0:
            out[m] = ParityScalar.graded(a_coeff(k), k)
        else:
            out[m] = ParityScalar.graded(b_coeff(k), k + 1)
    return out


# ---------------------------------------------------------------------------
# Bracket polynomials.
#
# A KMono is a sorted tuple of (n, a) pairs, one per K_{n,a} factor; the
# empty tuple is the constant monomial.  A KPoly maps KMono -> Fraction.
# The T-degree of a monomial is the sum of its n's.


KMono = tuple
KPoly = dict


def kmono_tdeg(mono: KMono) -> int:
    return sum(n for n, _ in mono)


def bracket(series: list[ParityScalar]) -> KPoly:
    """{F}: each T^n zeta^a coefficient becomes that multiple of K_{n,a}."""
    out: KPoly = {}
    for n, c in enumerate(series):
        for a in (0, 1):
            coeff = c.component(a)
            if coeff:
                out[((n, a),)] = out.get(((n, a),), Fraction(0)) + coeff
    return {m: c for m, c in out.items() if c}


def kpoly_mul(f: KPoly, g: KPoly, order: int) -> KPoly:
    """Product of bracket polynomials, truncated at T-degree `order`."""
    out: KPoly = {}
    for m1, c1 in f.items():
        d1 = kmono_tdeg(m1)
        if d1 > order:
            continue
        for m2, c2 in g.items():
            if d1 + kmono_tdeg(m2) > order:
                continue
            m = tuple(sorted(m1 + m2))
            c = out.get(m)
            out[m] = c1 * c2 if c is None else c + c1 * c2
    return {m: c for m, c in out.items() if c}


def bracket_exp(f: KPoly, order: int) -> KPoly:
    """exp(f) truncated at T-degree `order`; f must have no T^0 term."""
    for m in f:
        if kmono_tdeg(m) == 0:
            raise InvalidParameterError("bracket_exp needs a zero constant term")
    out: KPoly = {(): Fraction(1)}
    power: KPoly = {(): Fraction(1)}
    k = 0
    while power:
        k += 1
        power = kpoly_mul(power, f, order)
        inv_fact = Fraction(1, factorial(k))
        for m, c in power.items():
            prev = out.get(m)
            term = c * inv_fact
            out[m] = term if prev is None else prev + term
    return {m: c for m, c in out.items() if c}


# ---------------------------------------------------------------------------
# Edge factor.
#
# edge_factor(order)[m] is a dict {(i, p1, p2): coeff} representing the
# homogeneous T^m part: coeff * psi1^i psi2^(m-i) zeta1^p1 zeta2^p2.


def divide_by_psi_sum(coeffs: list) -> list:
    """Divide the homogeneous polynomial sum_i coeffs[i] psi1^i psi2^(k-i)
    by (psi1 + psi2), k = len(coeffs) - 1.

    Returns the quotient coefficient list (length k).  A nonzero remainder
    means the dividend was not divisible, which in this pipeline can only be
    an arithmetic bug: InternalConsistencyError.
    """
    k = len(coeffs) - 1
    quotient = [Fraction(0)] * k
    prev = Fraction(0)
    for i in range(k):
        quotient[i] = coeffs[i] - prev
        prev = quotient[i]
    if coeffs[k] != prev:
        raise InternalConsistencyError("nonzero remainder dividing by psi1 + psi2")
    return quotient


def edge_factor(order: int) -> list[dict]:
    """The two-point edge series through T^order.

    The numerator A(z1 p1 T) z2 B(z2 p2 T) + z1 B(z1 p1 T) A(z2 p2 T) + z1 + z2
    is expanded to order T^(order+1) and divided by (psi_1 + psi_2) T.  The
    T^0 coefficient of the numerator must vanish and every synthetic division
    must have zero remainder; either failure raises InternalConsistencyError.
    """
    if order < 0:
        raise InvalidParameterError("order must be >= 0")
    top = order + 1
    num: list[dict] = [{} for _ in range(top + 1)]

    def _acc(k, key, val):
        d = num[k]
        d[key] = d.get(key, Fraction(0)) + val

    for m in range(top + 1):
        for j in range(top + 1 - m):
            # A(z1 psi1 T) * z2 B(z2 psi2 T): a_m b_j psi1^m psi2^j z1^m z2^(j+1)
            _acc(m + j, (m, m % 2, (j + 1) % 2), Fraction(a_coeff(m)) * b_coeff(j))
            # z1 B(z1 psi1 T) * A(z2 psi2 T): b_m a_j psi1^m psi2^j z1^(m+1) z2^j
            _acc(m + j, (m, (m + 1) % 2, j % 2), b_coeff(m) * Fraction(a_coeff(j)))
    _acc(0, (0, 1, 0), Fraction(1))  # + zeta_1
    _acc(0, (0, 0, 1), Fraction(1))  # + zeta_2

    if any(num[0].values()):
        raise InternalConsistencyError("edge factor numerator has a nonzero T^0 term")

    result: list[dict] = []
    for k in range(1, top + 1):
        quotient: dict = {}
        for p1 in (0, 1):
            for p2 in (0, 1):
                c = [num[k].get((i, p1, p2), Fraction(0)) for i in range(k + 1)]
                for i, qc in enumerate(divide_by_psi_sum(c)):
                    if qc:
                        quotient[(i, p1, p2)] = qc
        result.append(quotient)
    return result


def check_ab_identity(order: int) -> bool:
    """True iff A(T)B(-T) + A(-T)B(T) + 2 vanishes through T^order."""
    for k in range(order + 1):
        total = Fraction(0)
        for m in range(k + 1):
            j = k - m
            sign = (-1) ** j + (-1) ** m
            if sign:
                total += Fraction(a_coeff(m)) * b_coeff(j) * sign
        if k == 0:
            total += 2
        if total:
            return False
    return True
