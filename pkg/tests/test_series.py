"""Series, bracket and edge-factor tests.

Frozen expected values come from independent arithmetic routes (math.perm /
factorial identities, hand-expanded low orders), not from the code under test.
"""

from fractions import Fraction
from math import factorial, perm

import pytest

from tautrel.errors import InternalConsistencyError, InvalidParameterError
from tautrel.series import (
    ParityScalar,
    a_coeff,
    b_coeff,
    bracket,
    bracket_exp,
    chat,
    check_ab_identity,
    divide_by_psi_sum,
    edge_factor,
    kpoly_mul,
    plain_series,
    series_a,
    series_b,
)


def one(x=1, parity=0):
    return ParityScalar.graded(Fraction(x), parity)


class TestCoefficients:
    def test_low_orders(self):
        assert a_coeff(0) == 1
        assert a_coeff(1) == 60
        assert b_coeff(0) == -1
        assert b_coeff(1) == 84

    def test_independent_route(self):
        # (6n)!/((3n)!(2n)!) computed as perm(6n, 3n) / (2n)!
        for n in range(12):
            expected = Fraction(perm(6 * n, 3 * n), factorial(2 * n))
            assert a_coeff(n) == expected
            assert b_coeff(n) == Fraction(6 * n + 1, 6 * n - 1) * expected

    def test_series_wrappers(self):
        a = series_a(3)
        b = series_b(3)
        assert [c.ev for c in a] == [1, 60, 27720, 24504480]
        assert all(c.od == 0 for c in a + b)
        assert b[0].ev == -1 and b[1].ev == 84


class TestParityScalar:
    def test_ring_law(self):
        # (a + b z)(c + d z) = (ac + bd) + (ad + bc) z
        x = ParityScalar(2, 3)
        y = ParityScalar(5, 7)
        assert x * y == ParityScalar(2 * 5 + 3 * 7, 2 * 7 + 3 * 5)

    def test_zeta_squares_to_one(self):
        z = ParityScalar(0, 1)
        assert z * z == ParityScalar(1, 0)

    def test_components(self):
        x = ParityScalar(2, 3)
        assert x.component(0) == 2
        assert x.component(1) == 3
        assert x.component(4) == 2 and x.component(7) == 3


class TestChat:
    def test_rejects_2_mod_3(self):
        for i in (2, 5, 8):
            with pytest.raises(InvalidParameterError):
                chat(i, 4)
            with pytest.raises(InvalidParameterError):
                plain_series(i, 4)

    def test_chat0(self):
        c = chat(0, 2)
        assert c[0] == one(1)
        assert c[1] == one(60, 1)  # 60 zeta
        assert c[2] == one(27720, 0)

    def test_chat1(self):
        c = chat(1, 2)
        assert c[0] == one(-1, 1)  # -zeta
        assert c[1] == one(84, 0)
        assert c[2] == one(32760, 1)

    def test_chat3_shift(self):
        c = chat(3, 2)
        assert c[0] == ParityScalar()
        assert c[1] == one(1)  # T * A(zeta T) at T^1, parity even
        assert c[2] == one(60, 1)

    def test_chat4_shift(self):
        c = chat(4, 2)
        assert c[0] == ParityScalar()
        assert c[1] == one(-1, 1)
        assert c[2] == one(84, 0)

    def test_plain_series_is_zeta_one_slice(self):
        for i in (0, 1, 3, 4, 6):
            ps = plain_series(i, 5)
            hs = chat(i, 5)
            for m in range(6):
                assert ps[m] == hs[m].ev + hs[m].od


class TestBracket:
    def test_one_minus_chat0_has_no_constant(self):
        f = chat(0, 3)
        f[0] = f[0] - one(1)
        poly = bracket([-c for c in f])
        assert all(sum(n for n, _ in mono) > 0 for mono in poly)

    def test_bracket_chat0(self):
        poly = bracket(chat(0, 2))
        assert poly[((0, 0),)] == 1
        assert poly[((1, 1),)] == 60
        assert poly[((2, 0),)] == 27720

    def test_bracket_chat1(self):
        poly = bracket(chat(1, 1))
        assert poly[((0, 1),)] == -1
        assert poly[((1, 0),)] == 84

    def test_exp_of_zero(self):
        assert bracket_exp({}, 5) == {(): 1}

    def test_exp_rejects_constant(self):
        with pytest.raises(InvalidParameterError):
            bracket_exp({((0, 1),): Fraction(1)}, 3)

    def test_exp_one_minus_chat0(self):
        f = chat(0, 2)
        f[0] = f[0] - one(1)
        poly = bracket_exp(bracket([-c for c in f]), 2)
        assert poly[()] == 1
        assert poly[((1, 1),)] == -60
        # T^2: -27720 K_{2,0} + (1/2) (60)^2 K_{1,1}^2
        assert poly[((2, 0),)] == -27720
        assert poly[((1, 1), (1, 1))] == 1800

    def test_mul_respects_truncation(self):
        f = {((1, 0),): Fraction(1)}
        g = {((2, 0),): Fraction(1), ((1, 0),): Fraction(1)}
        prod = kpoly_mul(f, g, 2)
        assert prod == {((1, 0), (1, 0)): 1}

    def test_tgrading(self):
        f = bracket(chat(1, 4))
        g = bracket(chat(4, 4))
        prod = kpoly_mul(f, g, 4)
        assert prod
        for mono in prod:
            assert sum(n for n, _ in mono) <= 4


class TestEdgeFactor:
    def test_t0_slice(self):
        # hand expansion: numerator T^1 = (84 - 60 z1 z2)(psi1 + psi2)
        d = edge_factor(0)[0]
        assert d == {(0, 0, 0): 84, (0, 1, 1): -60}

    def test_homogeneity_and_symmetry(self):
        ef = edge_factor(12)
        for m, d in enumerate(ef):
            assert d, f"T^{m} slice unexpectedly empty"
            for (i, p1, p2), c in d.items():
                assert 0 <= i <= m
                swapped = (m - i, p2, p1)
                assert d.get(swapped) == c

    def test_divisibility_through_30(self):
        # constructing through order 30 performs every division check
        ef = edge_factor(30)
        assert len(ef) == 31

    def test_division_helper(self):
        # (psi1 + psi2)^2 / (psi1 + psi2)
        assert divide_by_psi_sum([Fraction(1), Fraction(2), Fraction(1)]) == [1, 1]

    def test_division_fault_injection(self):
        # corrupt one coefficient: remainder check must fire
        with pytest.raises(InternalConsistencyError):
            divide_by_psi_sum([Fraction(1), Fraction(2), Fraction(2)])


class TestIdentity:
    def test_low_order_by_hand(self):
        # T^1 coefficient: a0 b1 ((-1)^1 + 1) + a1 b0 (1 + (-1)^1) = 0
        assert check_ab_identity(1)

    def test_order_ten(self):
        assert check_ab_identity(10)

    def test_order_fifty(self):
        assert check_ab_identity(50)

    def test_detects_violation(self):
        # the identity is what makes b_coeff's (6n+1)/(6n-1) factor special;
        # a perturbed sequence must fail.  Emulate by checking the raw sum.
        total = Fraction(0)
        for m in range(3):
            j = 2 - m
            total += Fraction(a_coeff(m)) * (b_coeff(j) + 1) * ((-1) ** j + (-1) ** m)
        assert total != 0
