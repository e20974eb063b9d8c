"""The strata algebra S_{g,n}.

Basis elements are decorated stable dual graphs: a canonical Graph together
with a kappa multiset per vertex (indices >= 1; kappa_0 is normalized away)
and a psi exponent per half-edge slot and per leg.  The decoration is stored
as its lexicographically minimal representative under Aut(Gamma).

All products and pushforwards use the fully labeled model: structures on a
canonical graph are counted literally (contraction identifications range
over entire Aut-torsors) and a single 1/|Aut| factor converts to the orbit
basis.  The associativity/commutativity/projection-formula suite in the
tests is the correctness gate for this convention.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from itertools import combinations, product
from typing import NamedTuple

from .dualgraph import (
    Graph,
    contract_raw,
    encoding_bytes,
    enumerate_graphs,
    flag_index,
    flag_name,
    graph_from_schema,
    graph_to_schema,
    make_graph,
    normalize_raw,
    smooth_graph,
)
from .errors import InvalidParameterError
from .kappaop import _submultiset_splits

__all__ = [
    "StrataMonomial",
    "TautVector",
    "TensorVector",
    "monomial",
    "monomial_degree",
    "unit",
    "kappa_class",
    "psi_class",
    "graph_class",
    "enumerate_basis",
    "basis_index",
    "multiply",
    "glue_pushforward",
    "glue_pullback",
    "tensor_multiply",
    "forgetful_pullback",
    "forgetful_pushforward",
    "kappa0_normalize",
    "relabel_markings",
    "monomial_to_schema",
    "monomial_from_schema",
]


class StrataMonomial(NamedTuple):
    graph: Graph
    kappa: tuple  # per-vertex sorted tuples of indices >= 1
    psi: tuple  # exponents, length 2|E| + n (slots first, then legs)


def monomial_degree(m: StrataMonomial) -> int:
    return m.graph.num_edges + sum(sum(k) for k in m.kappa) + sum(m.psi)


def _orbit_rep(G: Graph, kappa, psi):
    """Lexicographically minimal (kappa, psi) under Aut(G)."""
    auts = G.automorphisms()
    if len(auts) == 1:
        return kappa, psi
    ns = G.num_slots
    tail = psi[ns:]
    best = (kappa, psi)
    for vperm, slot_perm in auts:
        k2 = [None] * len(kappa)
        for v, kv in enumerate(kappa):
            k2[vperm[v]] = kv
        p2 = [0] * ns
        for s in range(ns):
            p2[slot_perm[s]] = psi[s]
        cand = (tuple(k2), tuple(p2) + tail)
        if cand < best:
            best = cand
    return best


def monomial(G: Graph, kappa, psi) -> StrataMonomial:
    """Orbit-reduced monomial; kappa indices must be >= 1 already."""
    kappa = tuple(tuple(sorted(k)) for k in kappa)
    psi = tuple(psi)
    if len(kappa) != G.num_vertices or len(psi) != G.num_slots + G.n:
        raise InvalidParameterError("decoration shape does not match graph")
    if any(i < 1 for k in kappa for i in k):
        raise InvalidParameterError("kappa indices must be >= 1 (normalize kappa_0)")
    k, p = _orbit_rep(G, kappa, psi)
    return StrataMonomial(G, k, p)


class TautVector:
    """Sparse rational combination of monomials of one (g, n, degree)."""

    __slots__ = ("g", "n", "degree", "terms")

    def __init__(self, g: int, n: int, degree: int, terms=None):
        self.g = g
        self.n = n
        self.degree = degree
        self.terms: dict = {}
        if terms:
            for m, c in terms.items() if isinstance(terms, dict) else terms:
                if not c:
                    continue
                if m.graph.g != g or m.graph.n != n or monomial_degree(m) != degree:
                    raise InvalidParameterError("monomial outside ambient space")
                prev = self.terms.get(m)
                tot = c if prev is None else prev + c
                if tot:
                    self.terms[m] = tot
                elif prev is not None:
                    del self.terms[m]

    def copy(self) -> "TautVector":
        out = TautVector(self.g, self.n, self.degree)
        out.terms = dict(self.terms)
        return out

    def __reduce__(self):
        return (TautVector, (self.g, self.n, self.degree, tuple(self.terms.items())))

    def _check_ambient(self, other):
        if (self.g, self.n) != (other.g, other.n) or self.degree != other.degree:
            raise InvalidParameterError("ambient spaces differ")

    def __add__(self, other: "TautVector") -> "TautVector":
        self._check_ambient(other)
        out = self.copy()
        for m, c in other.terms.items():
            tot = out.terms.get(m, Fraction(0)) + c
            if tot:
                out.terms[m] = tot
            else:
                out.terms.pop(m, None)
        return out

    def __sub__(self, other: "TautVector") -> "TautVector":
        return self + other.scale(-1)

    def scale(self, c) -> "TautVector":
        c = Fraction(c)
        out = TautVector(self.g, self.n, self.degree)
        if c:
            out.terms = {m: co * c for m, co in self.terms.items()}
        return out

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TautVector)
            and (self.g, self.n, self.degree) == (other.g, other.n, other.degree)
            and self.terms == other.terms
        )

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def coeff(self, m: StrataMonomial) -> Fraction:
        return self.terms.get(m, Fraction(0))

    def __repr__(self):
        return (
            f"TautVector(g={self.g}, n={self.n}, degree={self.degree}, "
            f"terms={len(self.terms)})"
        )


def unit(g: int, n: int) -> TautVector:
    G = smooth_graph(g, n)
    m = StrataMonomial(G, ((),), (0,) * n)
    return TautVector(g, n, 0, {m: Fraction(1)})


def kappa_class(g: int, n: int, i: int) -> TautVector:
    if i < 1:
        raise InvalidParameterError("kappa index must be >= 1 here")
    G = smooth_graph(g, n)
    m = StrataMonomial(G, ((i,),), (0,) * n)
    return TautVector(g, n, i, {m: Fraction(1)})


def psi_class(g: int, n: int, marking: int, power: int = 1) -> TautVector:
    G = smooth_graph(g, n)
    if not 1 <= marking <= n:
        raise InvalidParameterError(f"no marking {marking}")
    psi = [0] * n
    psi[marking - 1] = power
    m = StrataMonomial(G, ((),), tuple(psi))
    return TautVector(g, n, power, {m: Fraction(1)})


def graph_class(G: Graph) -> TautVector:
    """The undecorated stratum class of G."""
    m = monomial(G, ((),) * G.num_vertices, (0,) * (G.num_slots + G.n))
    return TautVector(G.g, G.n, G.num_edges, {m: Fraction(1)})


# ---------------------------------------------------------------------------
# Basis.


@lru_cache(maxsize=None)
def _partitions(total: int) -> tuple:
    """Partitions of `total` into parts >= 1, each sorted ascending."""
    if total == 0:
        return ((),)
    out = []

    def rec(remaining, minimum, prefix):
        if remaining == 0:
            out.append(tuple(prefix))
            return
        for part in range(minimum, remaining + 1):
            rec(remaining - part, part, prefix + [part])

    rec(total, 1, [])
    return tuple(out)


def _compositions(total: int, parts: int):
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@lru_cache(maxsize=None)
def enumerate_basis(g: int, n: int, r: int) -> tuple:
    """Degree-r basis monomials, one per orbit, in canonical order."""
    if r < 0:
        raise InvalidParameterError("degree must be >= 0")
    out = set()
    for G in enumerate_graphs(g, n, r):
        d = r - G.num_edges
        nv = G.num_vertices
        npsi = G.num_slots + G.n
        for comp in _compositions(d, nv + npsi):
            psi = comp[nv:]
            for kappa in product(*(_partitions(c) for c in comp[:nv])):
                k, p = _orbit_rep(G, kappa, psi)
                out.add(StrataMonomial(G, k, p))
    return tuple(
        sorted(out, key=lambda m: (encoding_bytes(m.graph), m.kappa, m.psi))
    )


@lru_cache(maxsize=None)
def basis_index(g: int, n: int, r: int) -> dict:
    return {m: i for i, m in enumerate(enumerate_basis(g, n, r))}


# ---------------------------------------------------------------------------
# Multiplication.


@lru_cache(maxsize=None)
def _structures(big: Graph, target: Graph) -> tuple:
    """All labeled contraction structures from `big` onto `target`.

    A structure is (S, cmap, slot_inv): S the sorted tuple of surviving edge
    indices, cmap the vertex map big -> target, slot_inv the target-slot ->
    big-slot correspondence.  Identifications range over all of Aut(target),
    so each abstract contraction match appears |Aut(target)| times.
    """
    et = target.num_edges
    if et > big.num_edges:
        return ()
    out = []
    for S in combinations(range(big.num_edges), et):
        rest = [i for i in range(big.num_edges) if i not in set(S)]
        genera, legs, edges, vmap_c, surviving = contract_raw(big, rest)
        C, vperm_n, slotmap_n = normalize_raw(genera, legs, edges)
        if C is not target:
            continue
        base_vmap = [vperm_n[vmap_c[w]] for w in range(big.num_vertices)]
        base_slot = {}
        for k, orig in enumerate(surviving):
            for side in (0, 1):
                base_slot[slotmap_n[2 * k + side]] = 2 * orig + side
        for vperm_a, slot_a in target.automorphisms():
            cmap = tuple(vperm_a[x] for x in base_vmap)
            inv = [0] * target.num_slots
            for t0, s_big in base_slot.items():
                inv[slot_a[t0]] = s_big
            out.append((S, cmap, tuple(inv)))
    return tuple(out)


def _poly_mul_linear(poly: dict, vertices, kappa_index, nv):
    """Multiply a decoration polynomial by sum over `vertices` of kappa_index."""
    out: dict = {}
    for (kappa, psi), c in poly.items():
        for w in vertices:
            k2 = list(kappa)
            k2[w] = tuple(sorted(k2[w] + (kappa_index,)))
            key = (tuple(k2), psi)
            out[key] = out.get(key, 0) + c
    return out


def _pullback_poly(big: Graph, mono: StrataMonomial, cmap, slot_inv) -> dict:
    """phi^* of mono's decoration as a polynomial on `big`.

    kappa at a target vertex pulls back to the sum over its preimages;
    psi classes move to the corresponding slots/legs.
    """
    src = mono.graph
    ns_big = big.num_slots
    psi_new = [0] * (ns_big + big.n)
    ns_src = src.num_slots
    for pos, e in enumerate(mono.psi):
        if not e:
            continue
        if pos < ns_src:
            psi_new[slot_inv[pos]] += e
        else:
            psi_new[ns_big + (pos - ns_src)] += e
    preimages = [[] for _ in range(src.num_vertices)]
    for w, tv in enumerate(cmap):
        preimages[tv].append(w)
    poly = {(((),) * big.num_vertices, tuple(psi_new)): 1}
    for tv, kv in enumerate(mono.kappa):
        for idx in kv:
            poly = _poly_mul_linear(poly, preimages[tv], idx, big.num_vertices)
    return poly


def _poly_mul(p1: dict, p2: dict) -> dict:
    out: dict = {}
    for (k1, s1), c1 in p1.items():
        for (k2, s2), c2 in p2.items():
            kk = tuple(
                tuple(sorted(a + b)) for a, b in zip(k1, k2)
            )
            ss = tuple(a + b for a, b in zip(s1, s2))
            key = (kk, ss)
            out[key] = out.get(key, 0) + c1 * c2
    return out


def _excess_poly(big: Graph, shared_edges) -> dict:
    """Product over shared edges of (-psi_first_half - psi_second_half)."""
    poly = {(((),) * big.num_vertices, (0,) * (big.num_slots + big.n)): 1}
    for e in shared_edges:
        out: dict = {}
        for (kappa, psi), c in poly.items():
            for s in (2 * e, 2 * e + 1):
                p2 = list(psi)
                p2[s] += 1
                key = (kappa, tuple(p2))
                out[key] = out.get(key, 0) - c
        poly = out
    return poly


@lru_cache(maxsize=None)
def _mul_monomials(ma: StrataMonomial, mb: StrataMonomial) -> tuple:
    """Product of two basis monomials as ((monomial, coeff), ...)."""
    A, B = ma.graph, mb.graph
    g, n = A.g, A.n
    ea, eb = A.num_edges, B.num_edges
    acc: dict = {}
    for big in enumerate_graphs(g, n, ea + eb):
        ne = big.num_edges
        if ne < max(ea, eb):
            continue
        structs_a = _structures(big, A)
        if not structs_a:
            continue
        structs_b = _structures(big, B)
        if not structs_b:
            continue
        weight = Fraction(1, big.aut_order)
        all_edges = frozenset(range(ne))
        local: dict = {}
        for sa, cmap_a, inv_a in structs_a:
            pa = None
            for sb, cmap_b, inv_b in structs_b:
                if frozenset(sa) | frozenset(sb) != all_edges:
                    continue
                if pa is None:
                    pa = _pullback_poly(big, ma, cmap_a, inv_a)
                pb = _pullback_poly(big, mb, cmap_b, inv_b)
                term = _poly_mul(pa, pb)
                shared = sorted(frozenset(sa) & frozenset(sb))
                if shared:
                    term = _poly_mul(term, _excess_poly(big, shared))
                for (kappa, psi), c in term.items():
                    k, p = _orbit_rep(big, kappa, psi)
                    key = StrataMonomial(big, k, p)
                    local[key] = local.get(key, 0) + c
        for key, c in local.items():
            if c:
                tot = acc.get(key, Fraction(0)) + weight * c
                if tot:
                    acc[key] = tot
                else:
                    acc.pop(key, None)
    return tuple(sorted(acc.items(), key=lambda t: (encoding_bytes(t[0].graph), t[0].kappa, t[0].psi)))


def multiply(u: TautVector, v: TautVector) -> TautVector:
    """Excess-intersection product in S_{g,n}."""
    if (u.g, u.n) != (v.g, v.n):
        raise InvalidParameterError("ambient spaces differ")
    out = TautVector(u.g, u.n, u.degree + v.degree)
    terms = out.terms
    for ma, ca in u.terms.items():
        for mb, cb in v.terms.items():
            c = ca * cb
            for m, mc in _mul_monomials(ma, mb):
                tot = terms.get(m, Fraction(0)) + c * mc
                if tot:
                    terms[m] = tot
                else:
                    terms.pop(m, None)
    return out


# ---------------------------------------------------------------------------
# Gluing pushforward and pullback.


def _compose_monomials(G: Graph, monos) -> StrataMonomial:
    """Substitute one vertex-moduli monomial into each vertex of G."""
    nv_total = 0
    offsets = []
    for mono in monos:
        offsets.append(nv_total)
        nv_total += mono.graph.num_vertices

    genera = []
    legs: list = [[] for _ in range(nv_total)]
    for v, mono in enumerate(monos):
        genera.extend(mono.graph.genera)

    # where does local marking j of vertex v sit, and what does it mean?
    # flags[v][j-1] = psi position in G (slot or leg position)
    def local_holder(v, j):
        sub = monos[v].graph
        for w in range(sub.num_vertices):
            if j in sub.legs[w]:
                return offsets[v] + w
        raise InvalidParameterError("factor lacks a marking")

    ns_g = G.num_slots
    # composite edges: G's edges first, then each factor's internal edges
    edges = []
    for e in range(G.num_edges):
        ends = []
        for side in (0, 1):
            s = 2 * e + side
            v = G.slot_vertex(s)
            j = G.vertex_flags(v).index(s) + 1
            ends.append(local_holder(v, j))
        edges.append(tuple(ends))
    edge_offsets = []
    for v, mono in enumerate(monos):
        edge_offsets.append(len(edges))
        for u, w in mono.graph.edges:
            edges.append((offsets[v] + u, offsets[v] + w))

    n = G.n
    kappa: list = [() for _ in range(nv_total)]
    psi = [0] * (2 * len(edges) + n)
    ns_comp = 2 * len(edges)

    for v, mono in enumerate(monos):
        sub = mono.graph
        flags_v = G.vertex_flags(v)
        for w in range(sub.num_vertices):
            kappa[offsets[v] + w] = mono.kappa[w]
        for pos, exp in enumerate(mono.psi):
            if not exp:
                continue
            if pos < sub.num_slots:
                comp_slot = 2 * (edge_offsets[v] + (pos >> 1)) + (pos & 1)
                psi[comp_slot] += exp
            else:
                j = pos - sub.num_slots + 1  # local marking
                flag = flags_v[j - 1]
                if flag < ns_g:  # one of G's slots
                    psi[flag] += exp  # composite slot id equals G's slot id
                else:
                    m = flag - ns_g + 1
                    psi[ns_comp + m - 1] += exp
        for w in range(sub.num_vertices):
            for m in sub.legs[w]:
                flag = flags_v[m - 1]
                if flag >= ns_g:
                    legs[offsets[v] + w].append(flag - ns_g + 1)

    big, vperm, slot_map = normalize_raw(genera, legs, edges)
    kappa_new = [None] * nv_total
    for v in range(nv_total):
        kappa_new[vperm[v]] = tuple(sorted(kappa[v]))
    psi_new = [0] * (ns_comp + n)
    for s in range(ns_comp):
        psi_new[slot_map[s]] = psi[s]
    for m in range(n):
        psi_new[ns_comp + m] = psi[ns_comp + m]
    k, p = _orbit_rep(big, tuple(kappa_new), tuple(psi_new))
    return StrataMonomial(big, k, p)


def _check_factor_shapes(G: Graph, factors):
    if len(factors) != G.num_vertices:
        raise InvalidParameterError("one factor per vertex required")
    for v, f in enumerate(factors):
        nv = len(G.vertex_flags(v))
        if (f.g, f.n) != (G.genera[v], nv):
            raise InvalidParameterError(
                f"factor {v} has ambient ({f.g},{f.n}), vertex needs "
                f"({G.genera[v]},{nv})"
            )


def glue_pushforward(G: Graph, factors) -> TautVector:
    """xi_* : substitute per-vertex classes into G and push to S_{g,n}.

    factors[v] lives on the vertex moduli (g_v, n_v); its markings 1..n_v
    correspond to G.vertex_flags(v) in order (legs ascending, then slots).
    Labeled-model convention: coefficient 1, no automorphism factors.
    """
    _check_factor_shapes(G, factors)
    degree = G.num_edges + sum(f.degree for f in factors)
    out = TautVector(G.g, G.n, degree)
    terms = out.terms
    for combo in product(*(list(f.terms.items()) for f in factors)):
        coeff = Fraction(1)
        for _, c in combo:
            coeff *= c
        m = _compose_monomials(G, [mono for mono, _ in combo])
        tot = terms.get(m, Fraction(0)) + coeff
        if tot:
            terms[m] = tot
        else:
            terms.pop(m, None)
    return out


class TensorVector:
    """Sparse combination of per-vertex monomial tuples for a fixed graph."""

    __slots__ = ("spaces", "terms")

    def __init__(self, spaces, terms=None):
        self.spaces = tuple(spaces)  # ((g_v, n_v), ...)
        self.terms: dict = dict(terms or {})

    def __eq__(self, other):
        return (
            isinstance(other, TensorVector)
            and self.spaces == other.spaces
            and self.terms == other.terms
        )

    def __bool__(self):
        return bool(self.terms)

    def __repr__(self):
        return f"TensorVector(spaces={self.spaces}, terms={len(self.terms)})"


def tensor_from_factors(factors) -> TensorVector:
    spaces = tuple((f.g, f.n) for f in factors)
    terms: dict = {}
    for combo in product(*(list(f.terms.items()) for f in factors)):
        coeff = Fraction(1)
        for _, c in combo:
            coeff *= c
        key = tuple(mono for mono, _ in combo)
        terms[key] = terms.get(key, Fraction(0)) + coeff
    return TensorVector(spaces, {k: v for k, v in terms.items() if v})


def tensor_multiply(t1: TensorVector, t2: TensorVector) -> TensorVector:
    """Componentwise product of tensors over the same vertex spaces."""
    if t1.spaces != t2.spaces:
        raise InvalidParameterError("tensor spaces differ")
    out: dict = {}
    for k1, c1 in t1.terms.items():
        for k2, c2 in t2.terms.items():
            partial = [((), Fraction(1))]
            for ma, mb in zip(k1, k2):
                expanded = []
                for prefix, pc in partial:
                    for m, mc in _mul_monomials(ma, mb):
                        expanded.append((prefix + (m,), pc * mc))
                partial = expanded
            for key, pc in partial:
                tot = out.get(key, Fraction(0)) + c1 * c2 * pc
                if tot:
                    out[key] = tot
                else:
                    out.pop(key, None)
    return TensorVector(t1.spaces, out)


def glue_pushforward_tensor(G: Graph, t: TensorVector) -> TautVector:
    expected = tuple((G.genera[v], len(G.vertex_flags(v))) for v in range(G.num_vertices))
    if t.spaces != expected:
        raise InvalidParameterError("tensor spaces do not match the graph")
    degrees = {
        G.num_edges + sum(monomial_degree(m) for m in key) for key in t.terms
    }
    if not degrees:
        return TautVector(G.g, G.n, G.num_edges)
    if len(degrees) > 1:
        raise InvalidParameterError("tensor is not homogeneous")
    out = TautVector(G.g, G.n, degrees.pop())
    terms = out.terms
    for key, c in t.terms.items():
        m = _compose_monomials(G, list(key))
        tot = terms.get(m, Fraction(0)) + c
        if tot:
            terms[m] = tot
        else:
            terms.pop(m, None)
    return out


def glue_pullback(G: Graph, w: TautVector) -> TensorVector:
    """xi^* : restrict a class to the G-stratum, as a tensor over G's vertices.

    Labeled model mirror of multiply: sum over generic graphs carrying
    contraction structures onto G and onto each monomial's graph, with the
    excess factor on shared edges; the generic graph is then cut along the
    structure onto G.  Gated by the projection formula test.
    """
    if (w.g, w.n) != (G.g, G.n):
        raise InvalidParameterError("ambient spaces differ")
    spaces = tuple((G.genera[v], len(G.vertex_flags(v))) for v in range(G.num_vertices))
    acc: dict = {}
    for mono, cw in w.terms.items():
        D = mono.graph
        for big in enumerate_graphs(G.g, G.n, G.num_edges + D.num_edges):
            structs_g = _structures(big, G)
            if not structs_g:
                continue
            structs_d = _structures(big, D)
            if not structs_d:
                continue
            weight = cw * Fraction(1, big.aut_order)
            all_edges = frozenset(range(big.num_edges))
            for sg, cmap_g, inv_g in structs_g:
                for sd, cmap_d, inv_d in structs_d:
                    if frozenset(sg) | frozenset(sd) != all_edges:
                        continue
                    poly = _pullback_poly(big, mono, cmap_d, inv_d)
                    shared = sorted(frozenset(sg) & frozenset(sd))
                    if shared:
                        poly = _poly_mul(poly, _excess_poly(big, shared))
                    for (kappa, psi), c in poly.items():
                        key = _split_along(big, G, sg, cmap_g, inv_g, kappa, psi)
                        tot = acc.get(key, Fraction(0)) + weight * c
                        if tot:
                            acc[key] = tot
                        else:
                            acc.pop(key, None)
    return TensorVector(spaces, acc)


def _split_along(big: Graph, G: Graph, sg, cmap_g, inv_g, kappa, psi):
    """Cut `big` along the structure onto G; one monomial per G-vertex."""
    ns_big = big.num_slots
    cut = set(sg)
    pieces = []
    for v in range(G.num_vertices):
        members = [w for w in range(big.num_vertices) if cmap_g[w] == v]
        local_index = {w: i for i, w in enumerate(members)}
        genera = [big.genera[w] for w in members]
        legs: list = [[] for _ in members]
        flags_v = G.vertex_flags(v)
        # piece marking j corresponds to G's flag flags_v[j-1]
        slot_to_marking = {}
        for j, flag in enumerate(flags_v, start=1):
            if flag < G.num_slots:
                s_big = inv_g[flag]
                slot_to_marking[s_big] = j
                legs[local_index[big.slot_vertex(s_big)]].append(j)
            else:
                m = flag - G.num_slots + 1
                # the leg with marking m sits on some vertex of this piece
                for w in members:
                    if m in big.legs[w]:
                        legs[local_index[w]].append(j)
                        break
                else:
                    raise InvalidParameterError("marking not in expected piece")
        internal = [
            e
            for e in range(big.num_edges)
            if e not in cut and cmap_g[big.slot_vertex(2 * e)] == v
        ]
        edges = [
            (local_index[big.slot_vertex(2 * e)], local_index[big.slot_vertex(2 * e + 1)])
            for e in internal
        ]
        nloc = len(flags_v)
        sub_kappa = [kappa[w] for w in members]
        sub_psi = [0] * (2 * len(internal) + nloc)
        for k, e in enumerate(internal):
            for side in (0, 1):
                sub_psi[2 * k + side] = psi[2 * e + side]
        for s_big, j in slot_to_marking.items():
            sub_psi[2 * len(internal) + j - 1] = psi[s_big]
        for w in members:
            for m in big.legs[w]:
                j = None
                for jj, flag in enumerate(flags_v, start=1):
                    if flag >= G.num_slots and flag - G.num_slots + 1 == m:
                        j = jj
                        break
                sub_psi[2 * len(internal) + j - 1] = psi[ns_big + m - 1]
        piece, vperm, slot_map = normalize_raw(genera, legs, edges)
        k_new = [None] * len(members)
        for i in range(len(members)):
            k_new[vperm[i]] = tuple(sorted(sub_kappa[i]))
        p_new = [0] * (2 * len(internal) + nloc)
        for s in range(2 * len(internal)):
            p_new[slot_map[s]] = sub_psi[s]
        for j in range(nloc):
            p_new[2 * len(internal) + j] = sub_psi[2 * len(internal) + j]
        k, p = _orbit_rep(piece, tuple(k_new), tuple(p_new))
        pieces.append(StrataMonomial(piece, k, p))
    return tuple(pieces)


# ---------------------------------------------------------------------------
# Forgetful maps.


def _boundary_bubble(g: int, n: int, i: int) -> TautVector:
    """D_{i,n}: genus-0 bubble holding markings i and n, on (g, n)."""
    main_legs = tuple(m for m in range(1, n + 1) if m not in (i, n))
    G = make_graph([g, 0], [main_legs, (i, n)], [(0, 1)])
    return graph_class(G)


@lru_cache(maxsize=None)
def _pullback_smooth_monomial(g: int, n: int, kappa: tuple, psi: tuple) -> tuple:
    """Pull a smooth monomial on (g,n) back along forgetting marking n+1.

    Returns the TautVector terms on (g, n+1) as a tuple of items.  Uses the
    comparisons kappa_i -> kappa_i - psi_{n+1}^i and psi_j -> psi_j - D_{j,n+1},
    multiplied out exactly in S_{g,n+1}.
    """
    out = unit(g, n + 1)
    for i in kappa:
        factor = kappa_class(g, n + 1, i) - psi_class(g, n + 1, n + 1, i)
        out = multiply(out, factor)
    for j, exp in enumerate(psi, start=1):
        if not exp:
            continue
        factor = psi_class(g, n + 1, j) - _boundary_bubble(g, n + 1, j)
        for _ in range(exp):
            out = multiply(out, factor)
    return tuple(out.terms.items())


def relabel_markings(w: TautVector, perm) -> TautVector:
    """Relabel markings by perm (1-based: old marking m becomes perm[m-1])."""
    perm = tuple(perm)
    if sorted(perm) != list(range(1, w.n + 1)):
        raise InvalidParameterError("perm must be a permutation of 1..n")
    out = TautVector(w.g, w.n, w.degree)
    terms = out.terms
    for mono, c in w.terms.items():
        G = mono.graph
        ns = G.num_slots
        legs = [tuple(perm[m - 1] for m in l) for l in G.legs]
        big, vperm, slot_map = normalize_raw(G.genera, legs, G.edges)
        kappa = [None] * G.num_vertices
        for v in range(G.num_vertices):
            kappa[vperm[v]] = mono.kappa[v]
        psi = [0] * (ns + G.n)
        for s in range(ns):
            psi[slot_map[s]] = mono.psi[s]
        for m in range(1, G.n + 1):
            psi[ns + perm[m - 1] - 1] = mono.psi[ns + m - 1]
        k, p = _orbit_rep(big, tuple(kappa), tuple(psi))
        key = StrataMonomial(big, k, p)
        tot = terms.get(key, Fraction(0)) + c
        if tot:
            terms[key] = tot
        else:
            terms.pop(key, None)
    return out


def forgetful_pullback(w: TautVector) -> TautVector:
    """Pull back along the map forgetting a new last marking n+1."""
    g, n = w.g, w.n
    if 2 * g - 2 + (n + 1) <= 0:
        raise InvalidParameterError(f"({g},{n + 1}) is not stable")
    out = TautVector(g, n + 1, w.degree)
    for mono, c in w.terms.items():
        G = mono.graph
        ns_old = G.num_slots
        for v in range(G.num_vertices):
            flags_v = G.vertex_flags(v)
            nloc = len(flags_v)
            local_psi = tuple(mono.psi[f] for f in flags_v)
            pulled = TautVector(
                G.genera[v],
                nloc + 1,
                sum(mono.kappa[v]) + sum(local_psi),
                dict(
                    _pullback_smooth_monomial(
                        G.genera[v], nloc, mono.kappa[v], local_psi
                    )
                ),
            )
            legs2 = [list(l) for l in G.legs]
            legs2[v] = legs2[v] + [n + 1]
            big, vperm, slot_map = normalize_raw(G.genera, legs2, G.edges)
            ns_new = big.num_slots

            def mapped(f):
                if f < ns_old:
                    return slot_map[f]
                return ns_new + (f - ns_old)

            factors = [None] * G.num_vertices
            for u in range(G.num_vertices):
                if u == v:
                    # pulled's markings: old flags in flags_v order, then n+1
                    targets = [mapped(f) for f in flags_v] + [ns_new + n]
                    factors[vperm[u]] = _transport_local(big, vperm[u], pulled, targets)
                else:
                    targets = [mapped(f) for f in G.vertex_flags(u)]
                    factors[vperm[u]] = _transport_local(
                        big, vperm[u], _local_vector(G, mono, u), targets
                    )
            out = out + glue_pushforward(big, factors).scale(c)
    return out


def _local_vector(G: Graph, mono: StrataMonomial, v: int) -> TautVector:
    """The decoration of mono at vertex v as a smooth vertex-moduli vector."""
    flags_v = G.vertex_flags(v)
    local_psi = tuple(mono.psi[f] for f in flags_v)
    sm = smooth_graph(G.genera[v], len(flags_v))
    m = StrataMonomial(sm, (tuple(mono.kappa[v]),), local_psi)
    return TautVector(
        G.genera[v], len(flags_v), sum(mono.kappa[v]) + sum(local_psi), {m: Fraction(1)}
    )


def _transport_local(big, u2, vec: TautVector, flag_targets) -> TautVector:
    """Re-index a vertex-moduli vector to big's flag order at vertex u2.

    flag_targets[m-1] is the flag position in `big` that vec's marking m
    should occupy.
    """
    flags_new = big.vertex_flags(u2)
    pos_new = {f: j for j, f in enumerate(flags_new, start=1)}
    perm = [pos_new[f] for f in flag_targets]
    if sorted(perm) != list(range(1, vec.n + 1)):
        raise InvalidParameterError("flag transport failed")
    return relabel_markings(vec, perm)


def forgetful_pushforward(w: TautVector) -> TautVector:
    """Push forward along forgetting the last marking n+1 (degree drops by 1)."""
    g, n1 = w.g, w.n
    n = n1 - 1
    if n < 0 or 2 * g - 2 + n <= 0:
        raise InvalidParameterError(f"({g},{n}) is not stable")
    out = TautVector(g, n, w.degree - 1)
    if w.degree == 0:
        return out
    for mono, c in w.terms.items():
        out = out + _push_monomial(mono).scale(c)
    return out


def _push_monomial(mono: StrataMonomial) -> TautVector:
    G = mono.graph
    n1 = G.n
    n = n1 - 1
    ns = G.num_slots
    leg_pos = ns + n1 - 1
    v0 = None
    for v in range(G.num_vertices):
        if n1 in G.legs[v]:
            v0 = v
            break
    a = mono.psi[leg_pos]
    stays_stable = 2 * G.genera[v0] - 2 + (G.valence(v0) - 1) > 0

    out = TautVector(G.g, n, monomial_degree(mono) - 1)
    if stays_stable:
        legs2 = [tuple(m for m in l if m != n1) for l in G.legs]
        big, vperm, slot_map = normalize_raw(G.genera, legs2, G.edges)
        base_kappa = [None] * G.num_vertices
        for v in range(G.num_vertices):
            base_kappa[vperm[v]] = mono.kappa[v]
        base_psi = [0] * (ns + n)
        for s in range(ns):
            base_psi[slot_map[s]] = mono.psi[s]
        for m in range(1, n1):
            base_psi[ns + m - 1] = mono.psi[ns + m - 1]
        v0n = vperm[v0]
        kappa0_scalar = 2 * G.genera[v0] - 2 + (G.valence(v0) - 1)

        terms: dict = {}

        def add(kappa, psi, coeff):
            k, p = _orbit_rep(big, tuple(kappa), tuple(psi))
            key = StrataMonomial(big, k, p)
            tot = terms.get(key, Fraction(0)) + coeff
            if tot:
                terms[key] = tot
            else:
                terms.pop(key, None)

        for sub, mult, remaining in _submultiset_splits(tuple(mono.kappa[v0])):
            total = a + sum(sub)
            if total == 0:
                continue  # kappa_{-1} = 0
            idx = total - 1
            kappa = list(base_kappa)
            coeff = Fraction(mult)
            if idx == 0:
                kappa[v0n] = tuple(sorted(remaining))
                coeff *= kappa0_scalar
            else:
                kappa[v0n] = tuple(sorted(remaining + (idx,)))
            add(kappa, base_psi, coeff)
        if a == 0:
            for f in G.vertex_flags(v0):
                if f == leg_pos or mono.psi[f] == 0:
                    continue
                psi = list(base_psi)
                if f < ns:
                    psi[slot_map[f]] -= 1
                else:
                    psi[ns + (f - ns)] -= 1
                add(base_kappa, psi, Fraction(1))
        for key, coeff in terms.items():
            tot = out.terms.get(key, Fraction(0)) + coeff
            if tot:
                out.terms[key] = tot
            else:
                out.terms.pop(key, None)
        return out

    # v0 becomes unstable: genus 0, valence 3.  Any decoration on the bubble
    # (kappa at v0, psi at the forgotten leg or at v0's slots) pushes to 0.
    if a > 0 or mono.kappa[v0]:
        return out
    others = [f for f in G.vertex_flags(v0) if f != leg_pos]
    if any(mono.psi[f] for f in others):
        return out
    f1, f2 = others
    if f1 >= ns and f2 >= ns:
        raise InvalidParameterError("ambient space below stability")
    # build the stabilized graph
    genera = [G.genera[v] for v in range(G.num_vertices) if v != v0]
    index = {}
    for v in range(G.num_vertices):
        if v != v0:
            index[v] = len(index)
    legs2 = [
        [m for m in G.legs[v] if m != n1] for v in range(G.num_vertices) if v != v0
    ]
    psi_src: dict = {}  # new psi position (pre-normalize) -> exponent
    edges = []
    if f1 < ns and f2 < ns:
        e1, e2 = f1 >> 1, f2 >> 1
        far1 = 2 * e1 + (1 - (f1 & 1))
        far2 = 2 * e2 + (1 - (f2 & 1))
        kept = [e for e in range(G.num_edges) if e not in (e1, e2)]
        for e in kept:
            edges.append((index[G.slot_vertex(2 * e)], index[G.slot_vertex(2 * e + 1)]))
        joined = len(edges)
        edges.append((index[G.slot_vertex(far1)], index[G.slot_vertex(far2)]))
        slot_src = {}
        for k, e in enumerate(kept):
            slot_src[2 * k] = 2 * e
            slot_src[2 * k + 1] = 2 * e + 1
        slot_src[2 * joined] = far1
        slot_src[2 * joined + 1] = far2
    else:
        if f1 >= ns:
            f1, f2 = f2, f1  # f1 = slot, f2 = leg
        e1 = f1 >> 1
        far1 = 2 * e1 + (1 - (f1 & 1))
        moved = f2 - ns + 1
        legs2[index[G.slot_vertex(far1)]].append(moved)
        kept = [e for e in range(G.num_edges) if e != e1]
        for e in kept:
            edges.append((index[G.slot_vertex(2 * e)], index[G.slot_vertex(2 * e + 1)]))
        slot_src = {}
        for k, e in enumerate(kept):
            slot_src[2 * k] = 2 * e
            slot_src[2 * k + 1] = 2 * e + 1
        # psi at the far branch becomes psi at the moved marking
        psi_src[2 * len(kept) + moved - 1] = mono.psi[far1]
    big, vperm, slot_map = normalize_raw(genera, legs2, edges)
    nv = len(genera)
    kappa = [None] * nv
    for v in range(G.num_vertices):
        if v != v0:
            kappa[vperm[index[v]]] = mono.kappa[v]
    ns_new = 2 * len(edges)
    psi = [0] * (ns_new + n)
    for new_s, old_s in slot_src.items():
        psi[slot_map[new_s]] += mono.psi[old_s]
    for pos, exp in psi_src.items():
        psi[ns_new + (pos - 2 * len(edges))] += exp
    for m in range(1, n1):
        psi[ns_new + m - 1] += mono.psi[ns + m - 1]
    k, p = _orbit_rep(big, tuple(kappa), tuple(psi))
    out.terms[StrataMonomial(big, k, p)] = Fraction(1)
    return out


# ---------------------------------------------------------------------------
# kappa_0 normalization and serialization.


def kappa0_normalize(g: int, n: int, degree: int, raw_terms) -> TautVector:
    """Replace every kappa_0 factor by the scalar 2 g_v - 2 + valence(v).

    raw_terms maps (Graph, kappa-with-possible-zeros, psi) to coefficients.
    """
    out = TautVector(g, n, degree)
    terms = out.terms
    for (G, kappa, psi), c in (
        raw_terms.items() if isinstance(raw_terms, dict) else raw_terms
    ):
        coeff = Fraction(c)
        clean = []
        for v, kv in enumerate(kappa):
            zeros = sum(1 for i in kv if i == 0)
            if zeros:
                coeff *= (2 * G.genera[v] - 2 + G.valence(v)) ** zeros
            clean.append(tuple(i for i in kv if i != 0))
        if not coeff:
            continue
        k, p = _orbit_rep(G, tuple(clean), tuple(psi))
        key = StrataMonomial(G, k, p)
        tot = terms.get(key, Fraction(0)) + coeff
        if tot:
            terms[key] = tot
        else:
            terms.pop(key, None)
    return out


def monomial_to_schema(m: StrataMonomial) -> dict:
    kappa = []
    for v, kv in enumerate(m.kappa):
        counts: dict = {}
        for i in kv:
            counts[i] = counts.get(i, 0) + 1
        for i in sorted(counts):
            kappa.append([v, i, counts[i]])
    psi = [
        [flag_name(m.graph, pos), exp]
        for pos, exp in enumerate(m.psi)
        if exp
    ]
    return {"graph": graph_to_schema(m.graph), "kappa": kappa, "psi": psi}


def monomial_from_schema(d: dict) -> StrataMonomial:
    G = graph_from_schema(d["graph"])
    kappa = [[] for _ in range(G.num_vertices)]
    for v, i, mult in d["kappa"]:
        kappa[v].extend([i] * mult)
    psi = [0] * (G.num_slots + G.n)
    for name, exp in d["psi"]:
        psi[flag_index(G, name)] = exp
    return monomial(G, kappa, psi)
