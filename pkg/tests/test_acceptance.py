"""End-to-end acceptance checks, one reported line per criterion.

Run with `pytest tests/test_acceptance.py -s` to see the PASS/FAIL lines.
The (3,2,4) rank is gated behind TAUTREL_EXTENDED=1 (about 2.5 minutes).
"""

import os
import time

import pytest

import tautrel.series as series_mod
from tautrel.cli import verify_all
from tautrel.dualgraph import smooth_graph
from tautrel.errors import InternalConsistencyError
from tautrel.exactla import certified_rank, quotient_dimension
from tautrel.ideal import interior_presence, span_matrix
from tautrel.relations import enumerate_params, fz_relation, graph_contribution
from tautrel.series import check_ab_identity, edge_factor
from tautrel.strata import kappa0_normalize


def _report(name: str, ok: bool) -> None:
    print(("PASS" if ok else "FAIL"), name, flush=True)
    assert ok, name


def _clear_series_caches() -> None:
    for obj in vars(series_mod).values():
        if hasattr(obj, "cache_clear"):
            obj.cache_clear()


def _certified_quotient(g: int, n: int, r: int):
    M = span_matrix(g, n, r)
    cert = certified_rank(M)
    agree = len({rk for _, rk in cert.ranks}) == 1 and not cert.escalated
    return M.ncols, cert.rank, M.ncols - cert.rank, agree


class TestSeriesIdentity:
    def test_ab_identity_through_order_50(self):
        _clear_series_caches()
        start = time.perf_counter()
        ok = check_ab_identity(50)
        elapsed = time.perf_counter() - start
        _report(
            f"series identity holds through T^50 ({elapsed:.2f}s)",
            ok and elapsed < 1.0,
        )


class TestEdgeDivisibility:
    def test_edge_factor_through_order_30(self):
        _clear_series_caches()
        start = time.perf_counter()
        try:
            edge_factor(30)
            ok = True
        except InternalConsistencyError:
            ok = False
        elapsed = time.perf_counter() - start
        _report(
            f"edge factor divisible by the psi sum through T^30 ({elapsed:.2f}s)",
            ok and elapsed < 1.0,
        )


class TestInteriorConsistency:
    def test_plain_path_matches_smooth_contribution(self):
        start = time.perf_counter()
        count = 0
        ok = True
        for g in range(2, 9):
            for r in range(1, 6):
                for p in enumerate_params(g, 0, r):
                    sm = smooth_graph(g, 0)
                    raw = {
                        (sm, kappas, psi): c
                        for (kappas, psi), c in graph_contribution(sm, p).items()
                    }
                    ok = ok and kappa0_normalize(g, 0, r, raw) == fz_relation(
                        g, r, p.sigma
                    )
                    count += 1
        elapsed = time.perf_counter() - start
        _report(
            f"interior relations match the plain path for g <= 8, r <= 5 "
            f"({count} cases, {elapsed:.1f}s)",
            ok and count == 310 and elapsed < 60.0,
        )


class TestQuotientRanks:
    def test_genus2_four_markings_degree3(self):
        basis, rank, quotient, agree = _certified_quotient(2, 4, 3)
        _report(
            f"(2,4,3): basis {basis}, rank {rank}, quotient {quotient}, "
            f"two primes agree",
            quotient == 333 and agree,
        )

    def test_genus4_degree4(self):
        basis, rank, quotient, agree = _certified_quotient(4, 0, 4)
        _report(
            f"(4,0,4): basis {basis}, rank {rank}, quotient {quotient}, "
            f"two primes agree",
            quotient == 50 and agree,
        )

    def test_genus4_degree5(self):
        basis, rank, quotient, agree = _certified_quotient(4, 0, 5)
        _report(
            f"(4,0,5): basis {basis}, rank {rank}, quotient {quotient}, "
            f"two primes agree",
            quotient == 50 and agree,
        )

    @pytest.mark.skipif(
        os.environ.get("TAUTREL_EXTENDED") != "1",
        reason="set TAUTREL_EXTENDED=1 to run the (3,2,4) rank",
    )
    def test_genus3_two_markings_degree4(self):
        basis, rank, quotient, agree = _certified_quotient(3, 2, 4)
        _report(
            f"(3,2,4): basis {basis}, rank {rank}, quotient {quotient}, "
            f"two primes agree",
            quotient == 142 and agree,
        )


class TestInteriorPresence:
    def test_genus1_four_markings_degree2(self):
        _report(
            "(1,4,2) span expresses an interior class in boundary terms",
            interior_presence(1, 4, 2),
        )

    def test_genus2_three_markings_degree2(self):
        _report(
            "(2,3,2) span expresses an interior class in boundary terms",
            interior_presence(2, 3, 2),
        )


class TestPointedElliptic:
    def test_baseline_quotient(self):
        rep = quotient_dimension(1, 1, 1)
        _report(
            f"(1,1,1): basis {rep.basis}, rank {rep.rank}, quotient {rep.quotient}",
            tuple(rep) == (3, 2, 1),
        )


class TestPropertySuite:
    def test_random_algebra_laws(self):
        for name, ok, detail in verify_all(["algebra"], samples=50, seed=7):
            _report(f"{name} ({detail})", ok)

    def test_kappa_operator_equivalence(self):
        for name, ok, detail in verify_all(["kappa"]):
            _report(f"{name} ({detail})", ok)

    def test_relation_symmetry(self):
        for name, ok, detail in verify_all(["sn"]):
            _report(f"{name} ({detail})", ok)

    def test_ideal_closure_and_prime_agreement(self):
        for name, ok, detail in verify_all(["ideal"], samples=50, seed=3):
            _report(f"{name} ({detail})", ok)
