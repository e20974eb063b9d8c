"""Tests for relation vectors: parameter validation, the plain interior
path, per-graph contributions, and the assembled TautVectors.

The (1,1,1) vectors and the genus-2 interior polynomials were derived by
hand from the series data; the interior consistency check compares the
parity-variable graph path against the independent plain path.
"""

import random
from fractions import Fraction

import pytest

from tautrel.dualgraph import enumerate_graphs, make_graph, smooth_graph
from tautrel.errors import InvalidParameterError
from tautrel.kappaop import kappa_op_perm_sum
from tautrel.relations import (
    RelationParams,
    _mul_edge,
    enumerate_params,
    fz_relation,
    graph_contribution,
    relation,
)
from tautrel.series import bracket_exp, kpoly_mul, plain_series
from tautrel.strata import (
    TautVector,
    graph_class,
    kappa0_normalize,
    kappa_class,
    monomial,
    monomial_degree,
    psi_class,
    relabel_markings,
)


def loop_graph_11():
    return make_graph([0], [(1,)], [(0, 0)])


class TestRelationParams:
    def test_valid_examples(self):
        RelationParams(1, 1, 1, (), (1,))
        RelationParams(1, 1, 1, (1,), (0,))
        RelationParams(2, 0, 1)
        RelationParams(2, 4, 3, (3, 1), (0, 0, 0, 0))

    def test_sigma_sorted_descending(self):
        p = RelationParams(2, 0, 3, (1, 3))
        assert p.sigma == (3, 1)

    def test_bound_violation(self):
        with pytest.raises(InvalidParameterError):
            RelationParams(3, 0, 1)  # 3 < 4
        with pytest.raises(InvalidParameterError):
            RelationParams(2, 0, 1, (1,))  # 3 < 4

    def test_parity_violation(self):
        with pytest.raises(InvalidParameterError):
            RelationParams(1, 1, 1, (), (0,))  # 3 vs 2
        with pytest.raises(InvalidParameterError):
            RelationParams(2, 0, 2)  # 6 vs 3

    def test_bad_parts(self):
        with pytest.raises(InvalidParameterError):
            RelationParams(2, 0, 3, (2,))
        with pytest.raises(InvalidParameterError):
            RelationParams(1, 1, 3, (), (2,))
        with pytest.raises(InvalidParameterError):
            RelationParams(1, 1, 3, (), (5,))

    def test_unstable_space(self):
        with pytest.raises(InvalidParameterError):
            RelationParams(0, 2, 1, (), (0, 0))

    def test_zero_sigma_part_accepted_explicitly(self):
        p = RelationParams(1, 1, 2, (0,), (0,))
        assert p.sigma == (0,)

    def test_a_length(self):
        with pytest.raises(InvalidParameterError):
            RelationParams(1, 1, 1, (), ())


class TestEnumerateParams:
    def test_one_one_one(self):
        params = enumerate_params(1, 1, 1)
        assert len(params) == 2
        assert set((p.sigma, p.a) for p in params) == {((), (1,)), ((1,), (0,))}

    def test_deterministic(self):
        assert enumerate_params(1, 1, 1) == enumerate_params(1, 1, 1)
        assert enumerate_params(2, 0, 2) == enumerate_params(2, 0, 2)

    def test_only_positive_parts(self):
        for p in enumerate_params(2, 0, 3) + enumerate_params(1, 2, 2):
            assert all(part >= 1 and part % 3 != 2 for part in p.sigma)
            assert all(ai >= 0 and ai % 3 != 2 for ai in p.a)

    def test_parity_and_bound_hold(self):
        for p in enumerate_params(1, 2, 2):
            total = p.g + 1 + sum(p.sigma) + sum(p.a)
            assert 3 * p.r >= total and (3 * p.r - total) % 2 == 0

    def test_sigma_superset_at_larger_degree(self):
        small = {p.sigma for p in enumerate_params(1, 1, 1)}
        large = {p.sigma for p in enumerate_params(1, 1, 3)}
        assert small <= large

    def test_empty_when_budget_negative(self):
        assert enumerate_params(8, 0, 2) == []


def oracle_fz(g, r, sigma):
    """Independent interior path using the literal permutation-sum operator."""
    a = plain_series(0, r)
    kp = bracket_exp({((m, 0),): -c for m, c in enumerate(a) if m and c}, r)
    for part in sorted(sigma, reverse=True):
        factor = {((m, 0),): c for m, c in enumerate(plain_series(part, r)) if c}
        kp = kpoly_mul(kp, factor, r)
    sm = smooth_graph(g, 0)
    raw = {}
    for kmono, c in kp.items():
        if sum(m for m, _ in kmono) != r:
            continue
        for kappa, mult in kappa_op_perm_sum(tuple(m for m, _ in kmono)).items():
            key = (sm, (kappa,), ())
            raw[key] = raw.get(key, Fraction(0)) + c * mult
    return kappa0_normalize(g, 0, r, raw)


class TestFzRelation:
    def test_genus_two_degree_one(self):
        assert fz_relation(2, 1, ()) == kappa_class(2, 0, 1).scale(-60)

    def test_genus_two_degree_two(self):
        out = fz_relation(2, 2, (1,))
        k2 = kappa_class(2, 0, 2)
        k11 = TautVector(
            2, 0, 2, {monomial(smooth_graph(2, 0), [(1, 1)], ()): Fraction(1)}
        )
        assert out == k2.scale(103680) + k11.scale(-12240)

    def test_smallest_sigma_empty_is_nonzero(self):
        assert fz_relation(2, 1, ())

    def test_invalid_params_rejected(self):
        with pytest.raises(InvalidParameterError):
            fz_relation(3, 1, ())
        with pytest.raises(InvalidParameterError):
            fz_relation(2, 2, ())

    def test_permutation_sum_oracle(self):
        for g in range(2, 7):
            for r in range(1, 5):
                budget = 3 * r - g - 1
                if budget < 0:
                    continue
                for p in enumerate_params(g, 0, r):
                    if len(p.sigma) > 3:
                        continue  # literal l! sum kept tractable
                    assert fz_relation(g, r, p.sigma) == oracle_fz(g, r, p.sigma)


class TestGraphContribution:
    def test_smooth_graph_frozen(self):
        p = RelationParams(1, 1, 1, (), (1,))
        out = graph_contribution(smooth_graph(1, 1), p)
        assert out == {
            (((1,),), (0,)): Fraction(60),
            (((),), (1,)): Fraction(84),
        }

    def test_loop_graph_frozen(self):
        p = RelationParams(1, 1, 1, (), (1,))
        out = graph_contribution(loop_graph_11(), p)
        assert out == {(((),), (0, 0, 0)): Fraction(-12)}

    def test_too_many_edges_gives_zero(self):
        G = make_graph([1, 0], [(), ()], [(0, 1), (1, 1)])
        q = RelationParams(2, 0, 1)
        assert graph_contribution(G, q) == {}

    def test_degree_homogeneous(self):
        p = RelationParams(2, 0, 2, (1,), ())
        for G in enumerate_graphs(2, 0, 2):
            for (kappas, psi), c in graph_contribution(G, p).items():
                deg = sum(sum(k) for k in kappas) + sum(psi)
                assert deg == p.r - G.num_edges

    def test_interior_matches_plain_path(self):
        for g in range(2, 5):
            for r in range(1, 4):
                for p in enumerate_params(g, 0, r):
                    sm = smooth_graph(g, 0)
                    raw = {
                        (sm, kappas, psi): c
                        for (kappas, psi), c in graph_contribution(sm, p).items()
                    }
                    got = kappa0_normalize(g, 0, r, raw)
                    assert got == fz_relation(g, r, p.sigma)

    def test_parity_extraction_discards_terms(self):
        # white-box: rebuild the pre-extraction polynomial for a two-vertex
        # graph, where per-vertex parities can mismatch at top degree
        G = make_graph([1, 1], [(), ()], [(0, 1)])
        p = RelationParams(2, 0, 2, (1,))
        order = p.r - G.num_edges
        from tautrel.relations import _int_edge_slices, _int_seed_poly

        seed, _ = _int_seed_poly(p.sigma, order, 2)
        poly = {
            (kappas, (0, 0), par): cd for (kappas, par), cd in seed.items()
        }
        slices, _ = _int_edge_slices(order)
        poly = _mul_edge(poly, slices, 0, 0, 1, order)
        target = (0, 0)
        discarded = [
            (kappas, psi)
            for (kappas, psi, par), (cc, deg) in poly.items()
            if cc and par != target and deg == order
        ]
        assert discarded
        assert graph_contribution(G, p)  # and survivors remain


class TestRelation:
    def test_one_one_sigma_empty(self):
        out = relation(RelationParams(1, 1, 1, (), (1,)))
        expected = (
            kappa_class(1, 1, 1).scale(60)
            + psi_class(1, 1, 1).scale(84)
            + graph_class(loop_graph_11()).scale(-6)
        )
        assert out == expected

    def test_one_one_sigma_one(self):
        out = relation(RelationParams(1, 1, 1, (1,), (0,)))
        expected = (
            kappa_class(1, 1, 1).scale(204)
            + psi_class(1, 1, 1).scale(-60)
            + graph_class(loop_graph_11()).scale(-6)
        )
        assert out == expected

    def test_homogeneous(self):
        out = relation(RelationParams(2, 0, 2, (1,), ()))
        assert out.degree == 2
        assert all(monomial_degree(m) == 2 for m in out.terms)

    def test_smooth_part_matches_fz(self):
        for p in enumerate_params(2, 0, 1) + enumerate_params(2, 0, 2):
            out = relation(p)
            sm = smooth_graph(2, 0)
            smooth_part = TautVector(
                2,
                0,
                p.r,
                {m: c for m, c in out.terms.items() if m.graph is sm},
            )
            assert smooth_part == fz_relation(p.g, p.r, p.sigma)

    def test_sn_invariance_small(self):
        cases = [
            RelationParams(1, 2, 1, (1,), (0, 0)),
            RelationParams(0, 4, 1, (1, 1), (0, 0, 0, 0)),
            RelationParams(1, 2, 2, (), (1, 1)),
        ]
        for p in cases:
            out = relation(p)
            for perm in [(2, 1), (1, 2)] if p.n == 2 else [(2, 1, 3, 4), (4, 3, 2, 1)]:
                assert relabel_markings(out, perm) == out

    def test_unsorted_a_is_relabel_of_sorted(self):
        p31 = RelationParams(1, 2, 2, (), (3, 1))
        p13 = RelationParams(1, 2, 2, (), (1, 3))
        assert relation(p31) == relabel_markings(relation(p13), (2, 1))

    def test_sigma_zero_part_runs(self):
        out = relation(RelationParams(1, 1, 2, (0,), (0,)))
        assert out.degree == 2

    def test_relation_with_boundary_support(self):
        # every graph with at most r edges can contribute; check a boundary
        # monomial actually appears for (1,1,1)
        out = relation(RelationParams(1, 1, 1, (), (1,)))
        loop = loop_graph_11()
        assert any(m.graph is loop for m in out.terms)
