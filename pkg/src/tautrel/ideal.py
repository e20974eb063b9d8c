"""Spanning sets of the relation ideal in a fixed degree.

A generator is built by choosing a dual graph, one of its vertices, a
relation on that vertex's moduli (the vertex's legs and edge-halves serve as
its markings), and arbitrary decoration monomials on the remaining vertices,
then pushing the product forward along the gluing map.  The smooth graph
contributes the relations of the ambient space themselves.

Spans are formal: a degree above the dimension of the moduli space is
allowed (the ideal-closure check multiplies degree-r generators up to degree
r+1, which may exceed the dimension on small spaces).
"""

from __future__ import annotations

import multiprocessing
import random
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import NamedTuple

from .dualgraph import Graph, enumerate_graphs, graph_to_schema, smooth_graph
from .errors import InternalConsistencyError, InvalidParameterError
from .exactla import PRIMES, OnlineRank, RelationMatrix
from .relations import RelationParams, enumerate_params, relation
from .strata import (
    TautVector,
    _compositions,
    _partitions,
    basis_index,
    enumerate_basis,
    forgetful_pullback,
    glue_pushforward,
    monomial,
    multiply,
)


class SpanJob(NamedTuple):
    """One generator: a relation on a vertex, decorations elsewhere.

    `decorations` lists, for every vertex other than `vertex` in ascending
    order, a pair (kappa, psi) of local decoration data on that vertex's
    moduli (psi indexed by the vertex's flags in positional order).
    """

    g: int
    n: int
    r: int
    graph: Graph
    vertex: int
    params: RelationParams
    decorations: tuple


def _check_target(g: int, n: int, r: int) -> None:
    if g < 0 or n < 0 or 2 * g - 2 + n <= 0:
        raise InvalidParameterError(f"({g},{n}) is not stable")
    if r < 0:
        raise InvalidParameterError("degree must be >= 0")


@lru_cache(maxsize=None)
def _vertex_monomials(n_flags: int, d: int) -> tuple:
    """All (kappa, psi) decoration monomials of degree d on one vertex."""
    out = []
    for k in range(d + 1):
        for kap in _partitions(k):
            for psi in _compositions(d - k, n_flags):
                out.append((kap, psi))
    return tuple(out)


def _decorations(G: Graph, vertex: int, rest: int):
    """Decoration choices of total degree `rest` on the other vertices."""
    others = [u for u in range(G.num_vertices) if u != vertex]
    if not others:
        if rest == 0:
            yield ()
        return
    for split in _compositions(rest, len(others)):
        pools = [
            _vertex_monomials(G.valence(u), d) for u, d in zip(others, split)
        ]
        yield from product(*pools)


def span_jobs(g: int, n: int, r: int) -> list:
    """Every generator descriptor for the degree-r span, in canonical order."""
    _check_target(g, n, r)
    jobs = []
    for G in enumerate_graphs(g, n, r):
        budget = r - G.num_edges
        for vertex in range(G.num_vertices):
            gv, nv = G.genera[vertex], G.valence(vertex)
            for rv in range(1, budget + 1):
                params = enumerate_params(gv, nv, rv)
                if not params:
                    continue
                for deco in _decorations(G, vertex, budget - rv):
                    for p in params:
                        jobs.append(SpanJob(g, n, r, G, vertex, p, deco))
    return jobs


def evaluate_job(job: SpanJob) -> TautVector:
    """Evaluate one generator: relation on the vertex, glued with decorations."""
    G = job.graph
    others = [u for u in range(G.num_vertices) if u != job.vertex]
    factors = []
    for u in range(G.num_vertices):
        if u == job.vertex:
            factors.append(relation(job.params))
            continue
        kap, psi = job.decorations[others.index(u)]
        G0 = smooth_graph(G.genera[u], G.valence(u))
        m = monomial(G0, (kap,), psi)
        factors.append(
            TautVector(G0.g, G0.n, sum(kap) + sum(psi), {m: Fraction(1)})
        )
    return glue_pushforward(G, factors)


def _vector_key(vec: TautVector, index: dict) -> tuple:
    return tuple(sorted((index[m], c) for m, c in vec.terms.items()))


_WORKERS = 1


def set_workers(count: int) -> None:
    """Set the process count used to evaluate span jobs (1 = serial)."""
    global _WORKERS
    if not isinstance(count, int) or count < 1:
        raise InvalidParameterError("worker count must be a positive integer")
    _WORKERS = count


def _evaluate_jobs(jobs) -> list:
    """Evaluate jobs in order, optionally across a process pool."""
    jobs = list(jobs)
    if _WORKERS > 1 and len(jobs) > 1:
        chunk = max(1, len(jobs) // (_WORKERS * 8))
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=_WORKERS, mp_context=ctx) as pool:
            return list(pool.map(evaluate_job, jobs, chunksize=chunk))
    return [evaluate_job(job) for job in jobs]


@lru_cache(maxsize=None)
def _span_entries(g: int, n: int, r: int) -> tuple:
    """Deduplicated (vector, first job) pairs in canonical job order."""
    index = basis_index(g, n, r)
    jobs = span_jobs(g, n, r)
    seen = set()
    entries = []
    for job, vec in zip(jobs, _evaluate_jobs(jobs)):
        if not vec.terms:
            continue
        key = _vector_key(vec, index)
        if key in seen:
            continue
        seen.add(key)
        entries.append((vec, job))
    return tuple(entries)


def generate_span(g: int, n: int, r: int) -> list:
    """Deduplicated spanning vectors of the degree-r relation space."""
    return [vec.copy() for vec, _ in _span_entries(g, n, r)]


def vector_to_row(vec: TautVector) -> dict:
    """Sparse row of basis coordinates for a homogeneous vector."""
    index = basis_index(vec.g, vec.n, vec.degree)
    row = {}
    for m, c in vec.terms.items():
        col = index.get(m)
        if col is None:
            raise InternalConsistencyError(f"monomial outside basis: {m}")
        row[col] = c
    return row


def span_matrix(g: int, n: int, r: int) -> RelationMatrix:
    """Span vectors as a sparse matrix over the degree-r basis columns."""
    entries = _span_entries(g, n, r)
    rows = [vector_to_row(vec) for vec, _ in entries]
    ncols = len(enumerate_basis(g, n, r))
    return RelationMatrix(rows, ncols, provenance=[job for _, job in entries])


def old_span(g: int, n: int, r: int) -> list:
    """Generators that restrict known information: boundary pushforwards,
    pullbacks from one marking less, and products of lower-degree generators
    with positive-degree monomials."""
    _check_target(g, n, r)
    index = basis_index(g, n, r)
    seen = set()
    out = []

    def keep(vec):
        if not vec.terms:
            return
        key = _vector_key(vec, index)
        if key not in seen:
            seen.add(key)
            out.append(vec)

    for vec, job in _span_entries(g, n, r):
        if job.graph.num_edges > 0:
            keep(vec.copy())
    if n >= 1 and 2 * g - 2 + (n - 1) > 0:
        for w in generate_span(g, n - 1, r):
            keep(forgetful_pullback(w))
    for d in range(1, r):
        lower = generate_span(g, n, r - d)
        if not lower:
            continue
        monos = enumerate_basis(g, n, d)
        for w in lower:
            for m in monos:
                keep(multiply(w, TautVector(g, n, d, {m: Fraction(1)})))
    return out


class ClosureReport(NamedTuple):
    g: int
    n: int
    r: int
    samples: int
    seed: int
    checked: tuple  # (generator index, degree-1 monomial) pairs tested
    failures: tuple  # the subset whose product left the degree-(r+1) span

    @property
    def passed(self) -> bool:
        return not self.failures


def ideal_closure_check(g: int, n: int, r: int, samples: int, seed: int = 0) -> ClosureReport:
    """Probe the ideal property: products of generators with degree-1
    monomials must stay inside the next degree's span.

    Membership is tested by rank: a row already in the span adds no pivot.
    Each test runs at two primes which must agree; the report lists any
    witnesses that fell outside the span (a signal to halt and investigate).
    """
    _check_target(g, n, r)
    span_here = generate_span(g, n, r)
    accs = [OnlineRank(p) for p in PRIMES]
    for vec, _ in _span_entries(g, n, r + 1):
        row = vector_to_row(vec)
        for acc in accs:
            acc.add(row)
    degree_one = enumerate_basis(g, n, 1)
    rng = random.Random(seed)
    checked, failures = [], []
    if span_here and degree_one:
        for _ in range(samples):
            i = rng.randrange(len(span_here))
            m = degree_one[rng.randrange(len(degree_one))]
            prod = multiply(span_here[i], TautVector(g, n, 1, {m: Fraction(1)}))
            row = vector_to_row(prod)
            member = [acc.contains(row) for acc in accs]
            if member[0] != member[1]:
                raise InternalConsistencyError(
                    f"primes disagree on span membership for generator {i} * {m}"
                )
            checked.append((i, m))
            if not member[0]:
                failures.append((i, m))
    return ClosureReport(g, n, r, samples, seed, tuple(checked), tuple(failures))


def interior_presence(g: int, n: int, r: int) -> bool:
    """True iff some generator carries a nonzero smooth-graph coefficient,
    i.e. the span expresses an interior class in boundary terms."""
    triv = smooth_graph(g, n)
    for vec in generate_span(g, n, r):
        if any(m.graph is triv and c for m, c in vec.terms.items()):
            return True
    return False


def span_job_to_schema(job: SpanJob) -> dict:
    """JSON-ready descriptor of one generator."""
    others = [u for u in range(job.graph.num_vertices) if u != job.vertex]
    p = job.params
    return {
        "target": [job.g, job.n, job.r],
        "graph": graph_to_schema(job.graph),
        "vertex": job.vertex,
        "relation": {
            "g": p.g,
            "n": p.n,
            "r": p.r,
            "sigma": list(p.sigma),
            "a": list(p.a),
        },
        "decorations": [
            {"vertex": u, "kappa": list(kap), "psi": list(psi)}
            for u, (kap, psi) in zip(others, job.decorations)
        ],
    }
