"""Relation vectors built from the two power series A and B.

The plain path (fz_relation) evaluates the kappa-polynomial relations on the
interior via the unhatted series; the graph path (graph_contribution and
relation) evaluates the full boundary-complete vectors with the hatted
series, the per-vertex parity variables, and the edge factors.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import lcm

from .dualgraph import Graph, enumerate_graphs, smooth_graph
from .errors import InvalidParameterError
from .kappaop import kappa_hat_poly, kappa_op
from .series import (
    ParityScalar,
    bracket,
    bracket_exp,
    chat,
    edge_factor,
    kmono_tdeg,
    kpoly_mul,
    plain_series,
)
from .strata import TautVector, kappa0_normalize, relabel_markings

__all__ = [
    "RelationParams",
    "enumerate_params",
    "fz_relation",
    "graph_contribution",
    "relation",
]


@dataclass(frozen=True)
class RelationParams:
    """Parameters (g, n, r; sigma, a) of one relation vector.

    sigma is a partition with no part congruent to 2 mod 3; a assigns one
    non-negative integer (also never 2 mod 3) to each marking.  Validity:
    3r >= g + 1 + |sigma| + sum(a) with matching parity, (g, n) stable.
    """

    g: int
    n: int
    r: int
    sigma: tuple = ()
    a: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "sigma", tuple(sorted(self.sigma, reverse=True)))
        object.__setattr__(self, "a", tuple(self.a))
        self.validate()

    def validate(self) -> None:
        g, n, r = self.g, self.n, self.r
        if g < 0 or n < 0 or r < 0:
            raise InvalidParameterError("g, n, r must be non-negative")
        if 2 * g - 2 + n <= 0:
            raise InvalidParameterError(f"({g},{n}) is not stable")
        if len(self.a) != n:
            raise InvalidParameterError("need one a_i per marking")
        for part in self.sigma:
            if part < 0 or part % 3 == 2:
                raise InvalidParameterError(f"sigma part {part} is 2 mod 3 or negative")
        for ai in self.a:
            if ai < 0 or ai % 3 == 2:
                raise InvalidParameterError(f"a value {ai} is 2 mod 3 or negative")
        total = g + 1 + sum(self.sigma) + sum(self.a)
        if 3 * r < total:
            raise InvalidParameterError(
                f"3r = {3 * r} < g + 1 + |sigma| + sum(a) = {total}"
            )
        if (3 * r - total) % 2:
            raise InvalidParameterError("parity condition 3r = g+1+|sigma|+sum(a) mod 2 fails")


@lru_cache(maxsize=None)
def _sigma_partitions(total: int) -> tuple:
    """Partitions of `total` into parts >= 1 with no part 2 mod 3, descending."""

    def rec(remaining, maximum):
        if remaining == 0:
            yield ()
            return
        for part in range(min(remaining, maximum), 0, -1):
            if part % 3 == 2:
                continue
            for rest in rec(remaining - part, part):
                yield (part,) + rest

    return tuple(rec(total, total))


def enumerate_params(g: int, n: int, r: int) -> list:
    """All valid RelationParams at (g, n, r), in a fixed order."""
    if 2 * g - 2 + n <= 0:
        raise InvalidParameterError(f"({g},{n}) is not stable")
    if r < 0:
        raise InvalidParameterError("degree must be non-negative")
    budget = 3 * r - g - 1
    out = []
    if budget < 0:
        return out
    values = [x for x in range(budget + 1) if x % 3 != 2]

    def a_tuples(slots, limit):
        if slots == 0:
            yield ()
            return
        for first in values:
            if first > limit:
                break
            for rest in a_tuples(slots - 1, limit - first):
                yield (first,) + rest

    for a in a_tuples(n, budget):
        rem = budget - sum(a)
        for s in range(rem + 1):
            if (rem - s) % 2:
                continue
            for sigma in _sigma_partitions(s):
                out.append(RelationParams(g, n, r, sigma, a))
    return out


# ---------------------------------------------------------------------------
# Plain path.


def _plain_bracket(series: list) -> dict:
    return {((m, 0),): c for m, c in enumerate(series) if c}


def _plain_exp_base(order: int) -> dict:
    """{1 - C_0} as a plain bracket polynomial (no constant term)."""
    a = plain_series(0, order)
    return {((m, 0),): -c for m, c in enumerate(a) if m >= 1 and c}


def fz_relation(g: int, r: int, sigma=()) -> TautVector:
    """The interior relation as a kappa-polynomial on the smooth graph.

    Evaluated along the plain path: unhatted series, plain bracket calculus,
    plain kappa operator, kappa_0 normalized to 2g - 2.
    """
    RelationParams(g, 0, r, tuple(sigma), ())
    kp = bracket_exp(_plain_exp_base(r), r)
    for part in sorted(sigma, reverse=True):
        kp = kpoly_mul(kp, _plain_bracket(plain_series(part, r)), r)
    sm = smooth_graph(g, 0)
    raw: dict = {}
    for kmono, c in kp.items():
        if kmono_tdeg(kmono) != r:
            continue
        indices = tuple(m for m, _ in kmono)
        for kappa, mult in kappa_op(indices).items():
            key = (sm, (kappa,), ())
            raw[key] = raw.get(key, Fraction(0)) + c * mult
    return kappa0_normalize(g, 0, r, raw)


# ---------------------------------------------------------------------------
# Graph path.


@lru_cache(maxsize=None)
def _hatted_kappa_poly(sigma: tuple, order: int) -> dict:
    """exp({1 - chat_0}) * prod_j {chat_{sigma_j}}, truncated at T^order."""
    c0 = chat(0, order)
    one_minus = [ParityScalar(1) - c0[0]] + [-c for c in c0[1:]]
    kp = bracket_exp(bracket(one_minus), order)
    for part in sigma:
        kp = kpoly_mul(kp, bracket(chat(part, order)), order)
    return kp


def _poly_degree(kappas, psi) -> int:
    return sum(sum(k) for k in kappas) + sum(psi)


# The working polynomials below carry integer coefficients: every multiplier
# series is rescaled once by the lcm of its denominators, the accumulated
# denominator is divided back out at extraction time, and all intermediate
# arithmetic stays in (fast, exact) machine integers.  Values are
# (coefficient, degree) pairs so the truncation bound needs no recomputation.


@lru_cache(maxsize=None)
def _int_leg_series(a: int, order: int) -> tuple:
    """chat(a) as ((even, odd) integer pairs per T-order, common denominator)."""
    series = chat(a, order)
    den = 1
    for s in series:
        for bit in (0, 1):
            den = lcm(den, s.component(bit).denominator)
    data = tuple(
        tuple(int(s.component(bit) * den) for bit in (0, 1)) for s in series
    )
    return data, den


@lru_cache(maxsize=None)
def _int_edge_slices(order: int) -> tuple:
    """edge_factor with integer entries and its common denominator."""
    slices = edge_factor(order)
    den = 1
    for sl in slices:
        for v in sl.values():
            den = lcm(den, v.denominator)
    data = tuple({k: int(v * den) for k, v in sl.items()} for sl in slices)
    return data, den


@lru_cache(maxsize=None)
def _int_seed_poly(sigma: tuple, order: int, nv: int) -> tuple:
    """kappa_hat of the sigma polynomial with integer coefficients.

    Returns ({(kappas, par): (coeff, degree)}, common denominator), already
    truncated at `order`.  Callers must not mutate the dict.
    """
    khp = kappa_hat_poly(_hatted_kappa_poly(sigma, order), nv)
    den = 1
    for c in khp.values():
        den = lcm(den, c.denominator)
    out = {}
    for (kappas, par), c in khp.items():
        deg = sum(sum(k) for k in kappas)
        if deg <= order:
            out[(kappas, par)] = (int(c * den), deg)
    return out, den


def _mul_leg(poly: dict, series: tuple, pos: int, v: int, order: int) -> dict:
    out: dict = {}
    for (kappas, psi, par), (c, deg) in poly.items():
        for j in range(min(order - deg, len(series) - 1) + 1):
            for bit in (0, 1):
                coeff = series[j][bit]
                if not coeff:
                    continue
                if j:
                    psi2 = psi[:pos] + (psi[pos] + j,) + psi[pos + 1 :]
                else:
                    psi2 = psi
                if bit:
                    par2 = par[:v] + (1 - par[v],) + par[v + 1 :]
                else:
                    par2 = par
                key = (kappas, psi2, par2)
                prev = out.get(key)
                if prev is None:
                    out[key] = (c * coeff, deg + j)
                else:
                    out[key] = (prev[0] + c * coeff, deg + j)
    return {k: v2 for k, v2 in out.items() if v2[0]}


def _mul_edge(poly: dict, slices: tuple, e: int, va: int, vb: int, order: int) -> dict:
    s0, s1 = 2 * e, 2 * e + 1
    out: dict = {}
    for (kappas, psi, par), (c, deg) in poly.items():
        for m in range(min(order - deg, len(slices) - 1) + 1):
            for (i, p1, p2), coeff in slices[m].items():
                psi2 = list(psi)
                psi2[s0] += i
                psi2[s1] += m - i
                par2 = list(par)
                par2[va] ^= p1
                par2[vb] ^= p2
                key = (kappas, tuple(psi2), tuple(par2))
                prev = out.get(key)
                if prev is None:
                    out[key] = (c * coeff, deg + m)
                else:
                    out[key] = (prev[0] + c * coeff, deg + m)
    return {k: v2 for k, v2 in out.items() if v2[0]}


def graph_contribution(G: Graph, p: RelationParams) -> dict:
    """The raw decoration polynomial of degree r - |E| on G.

    Returns {(kappa per vertex with possible kappa_0 factors, psi): Fraction};
    empty when |E| > r.  The per-vertex parity extraction at zeta_v^{g_v+1}
    and the 1/2^{h_1} prefactor are applied here.
    """
    if (G.g, G.n) != (p.g, p.n):
        raise InvalidParameterError("graph does not live in the params' space")
    order = p.r - G.num_edges
    if order < 0:
        return {}
    nv = G.num_vertices
    ns = G.num_slots
    zero_psi = (0,) * (ns + G.n)

    seed, den = _int_seed_poly(p.sigma, order, nv)
    poly = {(kappas, zero_psi, par): cd for (kappas, par), cd in seed.items()}

    leg_vertex = {}
    for v in range(nv):
        for m in G.legs[v]:
            leg_vertex[m] = v
    for i in range(1, G.n + 1):
        series, d = _int_leg_series(p.a[i - 1], order)
        den *= d
        poly = _mul_leg(poly, series, ns + i - 1, leg_vertex[i], order)
    if G.num_edges:
        slices, d = _int_edge_slices(order)
        for e, (va, vb) in enumerate(G.edges):
            den *= d
            poly = _mul_edge(poly, slices, e, va, vb, order)

    target = tuple((gv + 1) % 2 for gv in G.genera)
    den *= 2**G.h1
    out: dict = {}
    for (kappas, psi, par), (c, deg) in poly.items():
        if par != target or deg != order:
            continue
        out[(kappas, psi)] = Fraction(c, den)
    return out


@lru_cache(maxsize=None)
def _relation_sorted(p: RelationParams) -> TautVector:
    out = TautVector(p.g, p.n, p.r)
    for G in enumerate_graphs(p.g, p.n, p.r):
        contrib = graph_contribution(G, p)
        if not contrib:
            continue
        raw = {(G, kappas, psi): c for (kappas, psi), c in contrib.items()}
        out = out + kappa0_normalize(p.g, p.n, p.r, raw).scale(Fraction(1, G.aut_order))
    return out


def relation(p: RelationParams) -> TautVector:
    """R(g,n,r;sigma,a): sum over graphs of 1/|Aut| times the contribution.

    Cached per sorted a-tuple; other orderings are produced by relabeling
    the markings, which commutes with the construction.
    """
    order = sorted(range(p.n), key=lambda i: (p.a[i], i))
    a_sorted = tuple(p.a[i] for i in order)
    base = _relation_sorted(RelationParams(p.g, p.n, p.r, p.sigma, a_sorted))
    if a_sorted == p.a:
        return base.copy()
    perm = [0] * p.n
    for pos, old_idx in enumerate(order):
        perm[pos] = old_idx + 1
    return relabel_markings(base, tuple(perm))
