"""Stable dual graphs: canonical form, automorphisms, enumeration, contraction.

A dual graph records a nodal curve: vertices carry genera, legs carry the
marking labels 1..n, edges are nodes (loops and parallel edges allowed).
Each edge has two half-edge slots; edge i contributes slots 2i (at the first
endpoint) and 2i+1 (at the second).

Canonical form: vertices are first grouped by the isomorphism-invariant key
(genus, legs, valence); within those groups all orderings are tried and the
lexicographically smallest edge encoding wins.  The graphs in this pipeline
are small (a handful of vertices), so the brute-force stabilizer search is
cheap and, unlike refinement heuristics, obviously correct.
"""

from __future__ import annotations

import json
from functools import lru_cache
from itertools import combinations, combinations_with_replacement, permutations, product

from .errors import InvalidParameterError

__all__ = [
    "Graph",
    "make_graph",
    "normalize_raw",
    "smooth_graph",
    "enumerate_graphs",
    "contract_raw",
    "contractions",
    "graph_to_schema",
    "graph_from_schema",
    "encoding_bytes",
    "flag_name",
    "flag_index",
]


class Graph:
    """A stable dual graph in canonical form.

    Instances are interned: construct through make_graph or normalize_raw,
    never directly.  Fields:
      genera: per-vertex genus tuple;
      legs:   per-vertex sorted tuples of markings (union = {1..n});
      edges:  sorted tuple of (u, v) pairs with u <= v.
    """

    __slots__ = ("genera", "legs", "edges", "n", "g", "h1", "_auts", "_flags")

    def __init__(self, genera, legs, edges):
        self.genera = genera
        self.legs = legs
        self.edges = edges
        self.n = sum(len(l) for l in legs)
        self.h1 = len(edges) - len(genera) + 1
        self.g = sum(genera) + self.h1
        self._auts = None
        self._flags = None

    @property
    def key(self):
        return (self.genera, self.legs, self.edges)

    @property
    def num_vertices(self) -> int:
        return len(self.genera)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_slots(self) -> int:
        return 2 * len(self.edges)

    def slot_vertex(self, s: int) -> int:
        """The vertex holding half-edge slot s."""
        return self.edges[s >> 1][s & 1]

    def valence(self, v: int) -> int:
        count = len(self.legs[v])
        for u, w in self.edges:
            count += (u == v) + (w == v)
        return count

    def vertex_flags(self, v: int) -> tuple:
        """psi-vector positions of v's flags: legs (ascending) then slots.

        The psi vector of a decoration has length 2|E| + n: slot s sits at
        position s, marking m at position 2|E| + m - 1.
        """
        if self._flags is None:
            flags = []
            base = self.num_slots
            for w in range(self.num_vertices):
                here = [base + m - 1 for m in self.legs[w]]
                here += [s for s in range(self.num_slots) if self.slot_vertex(s) == w]
                flags.append(tuple(here))
            self._flags = tuple(flags)
        return self._flags[v]

    def automorphisms(self) -> tuple:
        """All (vertex permutation, slot permutation) pairs preserving the graph."""
        if self._auts is None:
            self._auts = _automorphisms(self)
        return self._auts

    @property
    def aut_order(self) -> int:
        return len(self.automorphisms())

    def __eq__(self, other):
        return self is other or (isinstance(other, Graph) and self.key == other.key)

    def __hash__(self):
        return hash(self.key)

    def __reduce__(self):
        return (make_graph, (self.genera, self.legs, self.edges))

    def __repr__(self):
        return f"Graph(genera={self.genera}, legs={self.legs}, edges={self.edges})"


_INTERN: dict = {}


def _intern(genera, legs, edges) -> Graph:
    key = (genera, legs, edges)
    got = _INTERN.get(key)
    if got is None:
        got = Graph(genera, legs, edges)
        _INTERN[key] = got
    return got


def _validate(genera, legs, edges):
    nv = len(genera)
    if nv == 0 or len(legs) != nv:
        raise InvalidParameterError("graph needs matching genera/legs lists")
    if any(g < 0 for g in genera):
        raise InvalidParameterError("negative genus")
    seen = sorted(m for l in legs for m in l)
    if seen != list(range(1, len(seen) + 1)):
        raise InvalidParameterError("legs must carry the markings 1..n exactly once")
    for u, v in edges:
        if not (0 <= u < nv and 0 <= v < nv):
            raise InvalidParameterError("edge endpoint out of range")
    # connectivity
    adj = [set() for _ in range(nv)]
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    seen_v = {0}
    stack = [0]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen_v:
                seen_v.add(w)
                stack.append(w)
    if len(seen_v) != nv:
        raise InvalidParameterError("graph is not connected")
    # stability
    val = [len(l) for l in legs]
    for u, v in edges:
        val[u] += 1
        val[v] += 1
    for v in range(nv):
        if 2 * genera[v] - 2 + val[v] <= 0:
            raise InvalidParameterError(f"vertex {v} violates stability")


def _vertex_classes(genera, legs, edges):
    """Vertices grouped by the invariant key, classes sorted by key."""
    nv = len(genera)
    val = [len(l) for l in legs]
    for u, v in edges:
        val[u] += 1
        val[v] += 1
    keyed: dict = {}
    for v in range(nv):
        keyed.setdefault((genera[v], tuple(legs[v]), val[v]), []).append(v)
    return [keyed[k] for k in sorted(keyed)]


def _candidate_vperms(classes):
    """Yield old->new vertex permutations respecting the class blocks."""
    starts = []
    pos = 0
    for members in classes:
        starts.append(pos)
        pos += len(members)
    for perms in product(*(permutations(members) for members in classes)):
        vperm = [0] * pos
        for start, ordered in zip(starts, perms):
            for offset, old in enumerate(ordered):
                vperm[old] = start + offset
        yield tuple(vperm)


def _relabel_edges(edges, vperm):
    """Relabeled oriented edges: (a, b, original index, flipped)."""
    out = []
    for i, (u, v) in enumerate(edges):
        a, b = vperm[u], vperm[v]
        if a <= b:
            out.append((a, b, i, False))
        else:
            out.append((b, a, i, True))
    out.sort(key=lambda t: (t[0], t[1], t[2]))
    return out

def normalize_raw(genera, legs, edges):
    """Canonicalize an arbitrary valid graph description.

    edges may be arbitrarily oriented pairs.  Returns (Graph, vperm, slot_map)
    where vperm maps input vertex -> canonical vertex and slot_map maps input
    slot index (2i + side for input edge i) -> canonical slot index.
    """
    genera = tuple(genera)
    legs = tuple(tuple(sorted(l)) for l in legs)
    edges = tuple((u, v) for u, v in edges)
    _validate(genera, legs, edges)

    classes = _vertex_classes(genera, legs, edges)
    best_enc = None
    best = None
    for vperm in _candidate_vperms(classes):
        rel = _relabel_edges(edges, vperm)
        enc = tuple((a, b) for a, b, _, _ in rel)
        if best_enc is None or enc < best_enc:
            best_enc = enc
            best = (vperm, rel)
    vperm, rel = best
    new_genera = tuple(x for _, x in sorted(zip(vperm, genera)))
    new_legs = tuple(x for _, x in sorted(zip(vperm, legs)))
    slot_map = [0] * (2 * len(edges))
    for j, (a, b, i, flipped) in enumerate(rel):
        slot_map[2 * i] = 2 * j + (1 if flipped else 0)
        slot_map[2 * i + 1] = 2 * j + (0 if flipped else 1)
    return _intern(new_genera, new_legs, best_enc), vperm, tuple(slot_map)


def make_graph(genera, legs, edges) -> Graph:
    """Canonical Graph from any valid description (maps discarded)."""
    return normalize_raw(genera, legs, edges)[0]


def smooth_graph(g: int, n: int) -> Graph:
    """The one-vertex, no-edge graph of (g, n)."""
    if 2 * g - 2 + n <= 0:
        raise InvalidParameterError(f"({g},{n}) is not stable")
    return make_graph((g,), (tuple(range(1, n + 1)),), ())


def _automorphisms(G: Graph) -> tuple:
    """All (vperm, slot_perm) self-isomorphisms of a canonical graph."""
    classes = _vertex_classes(G.genera, G.legs, G.edges)
    auts = []
    for vperm in _candidate_vperms(classes):
        rel = _relabel_edges(G.edges, vperm)
        if tuple((a, b) for a, b, _, _ in rel) != G.edges:
            continue
        # group edge indices by endpoint pair
        by_pair: dict = {}
        for i, pair in enumerate(G.edges):
            by_pair.setdefault(pair, []).append(i)
        pairs = sorted(by_pair)
        image_lists = []
        ok = True
        for pair in pairs:
            u, v = pair
            img = (vperm[u], vperm[v])
            img = img if img[0] <= img[1] else (img[1], img[0])
            target = by_pair.get(img)
            if target is None or len(target) != len(by_pair[pair]):
                ok = False
                break
            image_lists.append(target)
        if not ok:
            continue
        loops = [i for i, (u, v) in enumerate(G.edges) if u == v]
        for assignment in product(*(permutations(t) for t in image_lists)):
            edge_map = {}
            for pair, targets in zip(pairs, assignment):
                for i, j in zip(by_pair[pair], targets):
                    edge_map[i] = j
            for flips in product((0, 1), repeat=len(loops)):
                flip = dict(zip(loops, flips))
                slot_perm = [0] * G.num_slots
                valid = True
                for i, (u, v) in enumerate(G.edges):
                    j = edge_map[i]
                    x, y = G.edges[j]
                    if u == v:
                        f = flip[i]
                        slot_perm[2 * i] = 2 * j + f
                        slot_perm[2 * i + 1] = 2 * j + 1 - f
                    elif (vperm[u], vperm[v]) == (x, y):
                        slot_perm[2 * i] = 2 * j
                        slot_perm[2 * i + 1] = 2 * j + 1
                    elif (vperm[u], vperm[v]) == (y, x):
                        slot_perm[2 * i] = 2 * j + 1
                        slot_perm[2 * i + 1] = 2 * j
                    else:
                        valid = False
                        break
                if valid:
                    auts.append((vperm, tuple(slot_perm)))
    return tuple(auts)


# ---------------------------------------------------------------------------
# Enumeration.


def _compositions_sorted(total: int, parts: int, floor: int = 0):
    """Nondecreasing tuples of `parts` integers >= floor summing to total."""
    if parts == 1:
        if total >= floor:
            yield (total,)
        return
    for first in range(floor, total // parts + 1):
        for rest in _compositions_sorted(total - first, parts - 1, first):
            yield (first,) + rest


def _connected(nv: int, edges) -> bool:
    if nv == 1:
        return True
    adj = [set() for _ in range(nv)]
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    seen = {0}
    stack = [0]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == nv


@lru_cache(maxsize=None)
def enumerate_graphs(g: int, n: int, max_edges=None) -> tuple:
    """All stable dual graphs of (g, n) with at most max_edges edges.

    One canonical representative per isomorphism class, sorted by encoding.
    The intrinsic bound |E| <= 3g-3+n always applies; max_edges=None means
    the intrinsic bound alone.
    """
    if g < 0 or n < 0 or 2 * g - 2 + n <= 0:
        raise InvalidParameterError(f"({g},{n}) is not stable")
    cap = 3 * g - 3 + n
    if max_edges is not None:
        cap = min(cap, max_edges)
    found: dict = {}
    for ne in range(cap + 1):
        for nv in range(1, ne + 2):
            total_genus = g - ne + nv - 1
            if total_genus < 0:
                continue
            pairs = [(i, j) for i in range(nv) for j in range(i, nv)]
            for genera in _compositions_sorted(total_genus, nv):
                for leg_assign in product(range(nv), repeat=n):
                    legs = [[] for _ in range(nv)]
                    for m, v in enumerate(leg_assign, start=1):
                        legs[v].append(m)
                    for edges in combinations_with_replacement(pairs, ne):
                        val = [len(l) for l in legs]
                        for u, v in edges:
                            val[u] += 1
                            val[v] += 1
                        if any(
                            2 * genera[v] - 2 + val[v] <= 0 for v in range(nv)
                        ):
                            continue
                        if not _connected(nv, edges):
                            continue
                        G = normalize_raw(genera, legs, edges)[0]
                        found[G.key] = G
    return tuple(sorted(found.values(), key=encoding_bytes))


# ---------------------------------------------------------------------------
# Contraction.


def contract_raw(G: Graph, subset):
    """Contract the edges in `subset` (indices into G.edges).

    Returns (genera, legs, oriented edges, vertex map, surviving indices):
    raw data for normalize_raw, plus the old->new vertex map and the list of
    original indices of surviving edges (in order; surviving edge k keeps its
    orientation, so raw slot 2k+side descends from old slot
    2*surviving[k]+side).
    """
    subset = frozenset(subset)
    nv = G.num_vertices
    parent = list(range(nv))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in subset:
        u, v = G.edges[i]
        parent[find(u)] = find(v)

    comp_index: dict = {}
    vmap = []
    for v in range(nv):
        root = find(v)
        if root not in comp_index:
            comp_index[root] = len(comp_index)
        vmap.append(comp_index[root])
    k = len(comp_index)

    genera = [0] * k
    sizes = [0] * k
    internal = [0] * k
    legs = [[] for _ in range(k)]
    for v in range(nv):
        c = vmap[v]
        genera[c] += G.genera[v]
        sizes[c] += 1
        legs[c].extend(G.legs[v])
    for i in subset:
        internal[vmap[G.edges[i][0]]] += 1
    for c in range(k):
        genera[c] += internal[c] - (sizes[c] - 1)

    surviving = [i for i in range(G.num_edges) if i not in subset]
    edges = [(vmap[G.edges[i][0]], vmap[G.edges[i][1]]) for i in surviving]
    return genera, legs, edges, vmap, surviving


def contractions(G: Graph) -> list:
    """(edge subset, contracted canonical Graph) for every subset of edges."""
    out = []
    for size in range(G.num_edges + 1):
        for subset in combinations(range(G.num_edges), size):
            genera, legs, edges, _, _ = contract_raw(G, subset)
            out.append((subset, normalize_raw(genera, legs, edges)[0]))
    return out


# ---------------------------------------------------------------------------
# Serialization.


def graph_to_schema(G: Graph) -> dict:
    return {
        "g": G.g,
        "n": G.n,
        "genera": list(G.genera),
        "legs": [list(l) for l in G.legs],
        "edges": [list(e) for e in G.edges],
    }


def graph_from_schema(d: dict) -> Graph:
    G = make_graph(d["genera"], d["legs"], [tuple(e) for e in d["edges"]])
    if G.g != d["g"] or G.n != d["n"]:
        raise InvalidParameterError("schema (g,n) disagrees with graph data")
    return G


def encoding_bytes(G: Graph) -> bytes:
    """Canonical byte encoding (unique per isomorphism class)."""
    return json.dumps(graph_to_schema(G), sort_keys=True, separators=(",", ":")).encode()


def flag_name(G: Graph, position: int) -> str:
    """Name of a psi position: 'e<edge>.<side>' for slots, 'm<marking>' for legs."""
    ns = G.num_slots
    if position < ns:
        return f"e{position >> 1}.{position & 1}"
    return f"m{position - ns + 1}"


def flag_index(G: Graph, name: str) -> int:
    if name.startswith("m"):
        m = int(name[1:])
        if not 1 <= m <= G.n:
            raise InvalidParameterError(f"no marking {name}")
        return G.num_slots + m - 1
    if name.startswith("e"):
        e, side = name[1:].split(".")
        s = 2 * int(e) + int(side)
        if not 0 <= s < G.num_slots:
            raise InvalidParameterError(f"no slot {name}")
        return s
    raise InvalidParameterError(f"bad flag name {name!r}")
