"""Kappa insertion operators.

The plain operator turns a monomial K_{e_1}...K_{e_l} into a polynomial in
kappa classes by summing over set partitions of the factors, each block B
contributing (|B|-1)! kappa_{sum of e over B}.  The hatted, multi-vertex
variant attaches a parity a to every factor and distributes blocks over a
vertex set, each block B contributing (|B|-1)! sum_v kappa^{(v)}_{e_B}
zeta_v^{a_B}.

Both are computed by recursion over sub-multisets (Bell-number work instead
of the factorial-size permutation sum); the literal permutation sums are kept
as brute-force cross-check routes.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import permutations, product
from math import comb, factorial

__all__ = [
    "kappa_op",
    "kappa_op_perm_sum",
    "kappa_hat_single",
    "kappa_hat_op",
    "kappa_hat_perm_sum",
    "kappa_hat_poly",
]


def _counter_items(items: tuple) -> list:
    """Sorted (value, count) pairs of a sorted tuple."""
    out = []
    for x in items:
        if out and out[-1][0] == x:
            out[-1][1] += 1
        else:
            out.append([x, 1])
    return [(v, c) for v, c in out]


def _submultiset_splits(items: tuple):
    """Yield (sub, multiplicity, rest) over distinct sub-multisets of `items`.

    `multiplicity` counts positional subsets realizing `sub`: the product of
    binomials C(count, chosen) per distinct value.
    """
    groups = _counter_items(items)
    for choice in product(*(range(c + 1) for _, c in groups)):
        sub, rest = [], []
        mult = 1
        for (val, cnt), k in zip(groups, choice):
            sub.extend([val] * k)
            rest.extend([val] * (cnt - k))
            mult *= comb(cnt, k)
        yield tuple(sub), mult, tuple(rest)


@lru_cache(maxsize=None)
def _kappa_op_items(mono: tuple) -> tuple:
    if not mono:
        return (((), 1),)
    first, rest = mono[0], mono[1:]
    out: dict = {}
    for sub, mult, remaining in _submultiset_splits(rest):
        idx = first + sum(sub)
        weight = mult * factorial(len(sub))
        for kappas, c in _kappa_op_items(remaining):
            key = tuple(sorted(kappas + (idx,)))
            out[key] = out.get(key, 0) + weight * c
    return tuple(sorted(out.items()))


def kappa_op(mono) -> dict:
    """Set-partition evaluation of the plain operator on K_{e_1}...K_{e_l}.

    Returns {sorted kappa-index tuple: integer coefficient}; kappa_0 factors
    (index 0) are kept symbolic here.

    >>> kappa_op((2, 3)) == {(2, 3): 1, (5,): 1}
    True
    """
    return dict(_kappa_op_items(tuple(sorted(mono))))


def kappa_op_perm_sum(mono) -> dict:
    """Literal sum over S_l grouped by cycles (brute-force cross-check)."""
    mono = tuple(mono)
    l = len(mono)
    out: dict = {}
    for perm in permutations(range(l)):
        key = tuple(sorted(sum(mono[i] for i in cyc) for cyc in _cycles(perm)))
        out[key] = out.get(key, 0) + 1
    return out


def _cycles(perm) -> list:
    seen = [False] * len(perm)
    cycles = []
    for start in range(len(perm)):
        if seen[start]:
            continue
        cyc = []
        i = start
        while not seen[i]:
            seen[i] = True
            cyc.append(i)
            i = perm[i]
        cycles.append(tuple(cyc))
    return cycles


# ---------------------------------------------------------------------------
# Hatted, multi-vertex operator.  Input monomials are sorted tuples of
# (e, a) pairs; outputs map (per-vertex kappa tuples, per-vertex parities)
# to integer coefficients.


@lru_cache(maxsize=None)
def kappa_hat_single(mono: tuple) -> tuple:
    """Single-vertex hatted operator as ((kappas, parity), coeff) items.

    kappas is a sorted tuple of kappa indices (0 allowed), parity is the
    total zeta exponent mod 2.
    """
    if not mono:
        return ((((), 0), 1),)
    first, rest = mono[0], mono[1:]
    out: dict = {}
    for sub, mult, remaining in _submultiset_splits(rest):
        idx = first[0] + sum(e for e, _ in sub)
        par = (first[1] + sum(a for _, a in sub)) % 2
        weight = mult * factorial(len(sub))
        for (kappas, parity), c in kappa_hat_single(remaining):
            key = (tuple(sorted(kappas + (idx,))), (parity + par) % 2)
            out[key] = out.get(key, 0) + weight * c
    return tuple(sorted(out.items()))


def _compositions(total: int, parts: int):
    """All tuples of `parts` non-negative integers summing to `total`."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@lru_cache(maxsize=None)
def _distributions(mono: tuple, num_vertices: int) -> tuple:
    """All ways to split the multiset over vertices, with multinomial counts."""
    groups = _counter_items(mono)
    splits = [((),) * num_vertices]
    mults = [1]
    for val, cnt in groups:
        new_splits, new_mults = [], []
        for comp in _compositions(cnt, num_vertices):
            m = factorial(cnt)
            for k in comp:
                m //= factorial(k)
            for split, base in zip(splits, mults):
                new_splits.append(
                    tuple(split[v] + (val,) * comp[v] for v in range(num_vertices))
                )
                new_mults.append(base * m)
        splits, mults = new_splits, new_mults
    return tuple(zip(splits, mults))


def kappa_hat_op(mono, num_vertices: int) -> dict:
    """Multi-vertex hatted operator.

    Returns {(kappas per vertex, parities per vertex): integer coefficient}.
    Equivalent to summing over set partitions of the factors and assigning
    each block to a vertex; computed as a distribution of the factor multiset
    over vertices followed by independent single-vertex evaluations.
    """
    mono = tuple(sorted(mono))
    out: dict = {}
    for split, mult in _distributions(mono, num_vertices):
        acc = [((), (), mult)]
        for v in range(num_vertices):
            vertex_terms = kappa_hat_single(split[v])
            acc = [
                (ks + (kv,), ps + (pv,), c * cv)
                for ks, ps, c in acc
                for (kv, pv), cv in vertex_terms
            ]
        for ks, ps, c in acc:
            key = (ks, ps)
            out[key] = out.get(key, 0) + c
    return out


def kappa_hat_perm_sum(mono, num_vertices: int) -> dict:
    """Literal S_l sum with explicit vertex assignments (brute-force)."""
    mono = tuple(mono)
    l = len(mono)
    out: dict = {}
    for perm in permutations(range(l)):
        blocks = [
            (
                sum(mono[i][0] for i in cyc),
                sum(mono[i][1] for i in cyc) % 2,
            )
            for cyc in _cycles(perm)
        ]
        for assignment in product(range(num_vertices), repeat=len(blocks)):
            kappas = [[] for _ in range(num_vertices)]
            parities = [0] * num_vertices
            for (e, a), v in zip(blocks, assignment):
                kappas[v].append(e)
                parities[v] ^= a
            key = (
                tuple(tuple(sorted(k)) for k in kappas),
                tuple(parities),
            )
            out[key] = out.get(key, 0) + 1
    return out


def kappa_hat_poly(kpoly: dict, num_vertices: int) -> dict:
    """Linear extension of kappa_hat_op to bracket polynomials.

    Input maps K-monomials (sorted (n,a) tuples) to rational coefficients;
    output maps (kappas per vertex, parities) to rationals.  T-degree is
    preserved: the kappa indices of each output term sum to the input
    monomial's T-degree.
    """
    out: dict = {}
    for mono, coeff in kpoly.items():
        for key, c in kappa_hat_op(mono, num_vertices).items():
            prev = out.get(key)
            term = coeff * c
            out[key] = term if prev is None else prev + term
    return {k: v for k, v in out.items() if v}
