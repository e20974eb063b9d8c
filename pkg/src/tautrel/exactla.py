"""Exact sparse linear algebra: rank over prime fields with rational verification.

Rows are sparse mappings ``column -> coefficient`` with Fraction or int
values.  Every reported rank is computed modulo two independent word-size
primes which must agree; a disagreement escalates to further primes.  Rank
modulo a prime never exceeds the rational rank, so agreement of the maximum
across two 62-bit primes certifies the value for all practical purposes,
and small instances are additionally checked against dense rational
elimination in the test suite.
"""

from __future__ import annotations

import heapq
from fractions import Fraction
from math import gcd, lcm
from typing import NamedTuple

from .errors import InternalConsistencyError, InvalidParameterError, TautrelError

# The two largest primes below 2**62, fixed so repeated runs are reproducible.
PRIMES = (4611686018427387847, 4611686018427387817)

# Fallbacks tried in order when the default pair disagrees on a rank.
ESCALATION_PRIMES = (
    4611686018427387787,
    4611686018427387761,
    4611686018427387751,
)


class PrimeDivisibilityError(TautrelError):
    """A stored denominator is divisible by the chosen prime; retry another."""


class RelationMatrix:
    """Sparse exact matrix whose rows remember where they came from.

    `rows` is a list of dicts mapping column index to a nonzero Fraction or
    int; `ncols` fixes the ambient dimension (columns may be absent from
    every row); `provenance` optionally records one descriptor per row.
    """

    __slots__ = ("rows", "ncols", "provenance")

    def __init__(self, rows, ncols: int, provenance=None):
        self.rows = [dict(r) for r in rows]
        self.ncols = int(ncols)
        if provenance is not None and len(provenance) != len(self.rows):
            raise InvalidParameterError("provenance length must match row count")
        self.provenance = tuple(provenance) if provenance is not None else None
        for row in self.rows:
            for c in row:
                if not 0 <= c < self.ncols:
                    raise InvalidParameterError(f"column index {c} out of range")

    @property
    def nrows(self) -> int:
        return len(self.rows)

    def __repr__(self):
        return f"RelationMatrix({self.nrows}x{self.ncols})"


def _iter_rows(M):
    if isinstance(M, RelationMatrix):
        return M.rows
    return list(M)


def _ncols(M, rows) -> int:
    if isinstance(M, RelationMatrix):
        return M.ncols
    return max((max(r) + 1 for r in rows if r), default=0)


def integer_row(row) -> dict:
    """Scale a sparse rational row to a primitive integer row.

    Clears denominators, divides out the content, and normalizes the sign so
    the entry at the lowest column index is positive.  Zero entries are
    dropped; the zero row maps to {}.
    """
    items = {c: Fraction(v) for c, v in row.items() if v}
    if not items:
        return {}
    den = lcm(*(v.denominator for v in items.values()))
    nums = {c: v.numerator * (den // v.denominator) for c, v in items.items()}
    content = gcd(*nums.values())
    if nums[min(nums)] < 0:
        content = -content
    return {c: v // content for c, v in nums.items()}


def _row_mod_p(row, p: int) -> dict:
    out = {}
    for c, v in row.items():
        if isinstance(v, Fraction):
            den = v.denominator % p
            if den == 0:
                raise PrimeDivisibilityError(
                    f"denominator {v.denominator} divisible by prime {p}"
                )
            val = v.numerator * pow(den, -1, p) % p
        else:
            val = v % p
        if val:
            out[c] = val
    return out


def _eliminate(row: dict, pivots: dict, p: int, heap=None):
    """Reduce `row` in place against `pivots` until its lead is pivot-free.

    `pivots` maps a column to a row normalized to coefficient 1 there; only
    leading entries are chased (row echelon, not fully reduced), which is all
    a rank computation needs.  Entries are reduced mod p lazily, when they
    become the lead: the stored values stay exact integers, each update adds
    a product of two reduced values, and the entry count bounds the growth,
    so skipping the per-entry reduction is safe and much faster.  An entry
    that is nonzero as an integer but zero mod p is dropped on selection.

    `heap` is the row's candidate-column min-heap; callers that reduce the
    same row repeatedly pass it in so it survives between calls (stale
    columns are skipped, fill-in columns are pushed).  Returns the settled
    leading column, or None when the row vanished.
    """
    if heap is None:
        heap = list(row)
        heapq.heapify(heap)
    while heap:
        lead = heap[0]
        if lead not in row:
            heapq.heappop(heap)
            continue
        lv = row[lead] % p
        if lv == 0:
            del row[lead]
            heapq.heappop(heap)
            continue
        piv = pivots.get(lead)
        if piv is None:
            row[lead] = lv
            return lead
        del row[lead]
        heapq.heappop(heap)
        get = row.get
        push = heapq.heappush
        for c, v in piv.items():
            if c == lead:
                continue
            old = get(c)
            nv = (old or 0) - lv * v
            if nv:
                row[c] = nv
                if old is None:
                    push(heap, c)
            elif old is not None:
                del row[c]
    return None


def _normalized(row: dict, p: int) -> dict:
    inv = pow(row[min(row)] % p, -1, p)
    out = {}
    for c, v in row.items():
        nv = v * inv % p
        if nv:
            out[c] = nv
    return out


def rank_mod_p(M, p: int) -> int:
    """Rank of the row set modulo `p` by sparse elimination.

    Pivot order is deterministic: lowest leading column first, then fewest
    stored entries at selection time, then lowest row index.  Stale heap keys
    are refreshed lazily, so the choice depends only on the rows and `p`.
    """
    rows = [_row_mod_p(r, p) for r in _iter_rows(M)]
    pivots = {}
    row_heaps = []
    heap = []
    for idx, row in enumerate(rows):
        cols = list(row)
        heapq.heapify(cols)
        row_heaps.append(cols)
        if row:
            heap.append((cols[0], len(row), idx))
    heapq.heapify(heap)
    while heap:
        col, nnz, idx = heapq.heappop(heap)
        row = rows[idx]
        lead = _eliminate(row, pivots, p, row_heaps[idx])
        if lead is None:
            continue
        if (lead, len(row)) != (col, nnz):
            heapq.heappush(heap, (lead, len(row), idx))
            continue
        pivots[col] = _normalized(row, p)
    return len(pivots)


class OnlineRank:
    """Incremental rank tracker over GF(p).

    Feed rows one at a time; `add` reports whether the row enlarged the span.
    Useful both for streaming rank computations and for membership tests
    (a row already in the span never adds a pivot).
    """

    def __init__(self, p: int):
        self.p = p
        self._pivots = {}

    def add(self, row) -> bool:
        r = _row_mod_p(row, self.p)
        _eliminate(r, self._pivots, self.p)
        if not r:
            return False
        self._pivots[min(r)] = _normalized(r, self.p)
        return True

    def contains(self, row) -> bool:
        """True iff `row` lies in the span mod p (does not change the state)."""
        r = _row_mod_p(row, self.p)
        _eliminate(r, self._pivots, self.p)
        return not r

    @property
    def rank(self) -> int:
        return len(self._pivots)


def rank_exact(M, size_cap: int = 500) -> int:
    """Exact rational rank by dense elimination; the slow certification path.

    Refuses matrices beyond `size_cap` in either dimension: the modular path
    is the intended tool at scale.
    """
    rows = _iter_rows(M)
    ncols = _ncols(M, rows)
    if len(rows) > size_cap or ncols > size_cap:
        raise InvalidParameterError(
            f"rank_exact capped at {size_cap}x{size_cap}; got {len(rows)}x{ncols}"
        )
    dense = []
    for r in rows:
        line = [Fraction(0)] * ncols
        for c, v in r.items():
            line[c] = Fraction(v)
        dense.append(line)
    rank = 0
    for col in range(ncols):
        pivot = next((i for i in range(rank, len(dense)) if dense[i][col]), None)
        if pivot is None:
            continue
        dense[rank], dense[pivot] = dense[pivot], dense[rank]
        lead = dense[rank][col]
        for i in range(rank + 1, len(dense)):
            if dense[i][col]:
                factor = dense[i][col] / lead
                dense[i] = [a - factor * b for a, b in zip(dense[i], dense[rank])]
        rank += 1
        if rank == len(dense):
            break
    return rank


class RankCertificate(NamedTuple):
    rank: int
    primes: tuple  # the primes agreeing on the reported rank
    ranks: tuple  # every (prime, rank) pair computed, in order tried
    escalated: bool


def certified_rank(M, primes=PRIMES) -> RankCertificate:
    """Rank certified by agreement of two primes on the maximum value seen.

    Rank mod p is at most the rational rank, so the largest modular rank is
    the best lower bound; two independent primes attaining it make a
    coincidental drop at both vanishingly unlikely.  Disagreement of the
    requested primes escalates through `ESCALATION_PRIMES`.
    """
    rows = [integer_row(r) for r in _iter_rows(M)]
    pool = list(primes) + [q for q in ESCALATION_PRIMES if q not in primes]
    if len(pool) < 2:
        raise InvalidParameterError("need at least two distinct primes")
    tried = []
    for p in pool:
        tried.append((p, rank_mod_p(rows, p)))
        if len(tried) < 2:
            continue
        best = max(r for _, r in tried)
        agree = tuple(q for q, r in tried if r == best)
        if len(agree) >= 2:
            return RankCertificate(best, agree, tuple(tried), len(tried) > 2)
    raise InternalConsistencyError(
        f"no two primes agree on the rank: {tried}"
    )


class QuotientReport(NamedTuple):
    basis: int
    rank: int
    quotient: int


def quotient_dimension(g: int, n: int, r: int, primes=PRIMES) -> QuotientReport:
    """Dimension data of degree-r classes modulo the generated relations.

    Returns (basis size, certified span rank, quotient = basis - rank); the
    quotient is the dimension the relations predict for the degree-r graded
    piece of the tautological ring.
    """
    from .ideal import span_matrix

    M = span_matrix(g, n, r)
    cert = certified_rank(M, primes=primes)
    return QuotientReport(M.ncols, cert.rank, M.ncols - cert.rank)


def _is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin for word-size integers (guards user primes)."""
    if n < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
    for q in small:
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in small:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def format_fraction(v) -> str:
    """Serialize an exact rational as an explicit "p/q" string."""
    f = Fraction(v)
    return f"{f.numerator}/{f.denominator}"


def parse_fraction(s: str) -> Fraction:
    return Fraction(s)


class MatrixMarketData(NamedTuple):
    field: str  # "rational" or "integer"
    nrows: int
    ncols: int
    rows: tuple  # one dict per row, Fraction values (rational) or int (integer)
    modulus: int | None


def write_matrix_market(path, M, ncols=None, *, prime=None, comments=()) -> None:
    """Write rows in MatrixMarket coordinate format.

    Without `prime` the field is the documented "rational" extension with
    entries serialized as "p/q".  With `prime` the entries are reduced mod
    that prime and written in the standard integer field, with the modulus
    recorded on a comment line.  Entry order is row-major, so identical
    matrices produce byte-identical files.
    """
    rows = _iter_rows(M)
    ncols = _ncols(M, rows) if ncols is None else int(ncols)
    if prime is None:
        field = "rational"
        out_rows = [{c: Fraction(v) for c, v in r.items() if v} for r in rows]
        fmt = format_fraction
    else:
        field = "integer"
        out_rows = [_row_mod_p(r, prime) for r in rows]
        fmt = str
    lines = [f"%%MatrixMarket matrix coordinate {field} general"]
    if prime is not None:
        lines.append(f"% modulus {prime}")
    lines.extend(f"% {c}" for c in comments)
    nnz = sum(len(r) for r in out_rows)
    lines.append(f"{len(out_rows)} {ncols} {nnz}")
    for i, r in enumerate(out_rows, start=1):
        for c in sorted(r):
            lines.append(f"{i} {c + 1} {fmt(r[c])}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_matrix_market(path) -> MatrixMarketData:
    """Read a coordinate MatrixMarket file written by `write_matrix_market`."""
    with open(path, encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 5 or header[:3] != ["%%MatrixMarket", "matrix", "coordinate"]:
            raise InvalidParameterError(f"unsupported MatrixMarket header: {header}")
        field, symmetry = header[3], header[4]
        if field not in ("rational", "integer") or symmetry != "general":
            raise InvalidParameterError(f"unsupported format: {field} {symmetry}")
        modulus = None
        line = fh.readline()
        while line.startswith("%"):
            parts = line[1:].split()
            if parts[:1] == ["modulus"]:
                modulus = int(parts[1])
            line = fh.readline()
        nrows, ncols, nnz = map(int, line.split())
        rows = [dict() for _ in range(nrows)]
        count = 0
        for line in fh:
            if not line.strip():
                continue
            i, j, val = line.split()
            entry = Fraction(val) if field == "rational" else int(val)
            rows[int(i) - 1][int(j) - 1] = entry
            count += 1
        if count != nnz:
            raise InvalidParameterError(f"expected {nnz} entries, found {count}")
    return MatrixMarketData(field, nrows, ncols, tuple(rows), modulus)
