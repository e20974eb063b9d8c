"""Tests for exact and modular sparse linear algebra."""

import random
from fractions import Fraction

import pytest

from tautrel.errors import InvalidParameterError
from tautrel.exactla import (
    ESCALATION_PRIMES,
    PRIMES,
    MatrixMarketData,
    OnlineRank,
    PrimeDivisibilityError,
    RankCertificate,
    _is_prime,
    certified_rank,
    format_fraction,
    integer_row,
    parse_fraction,
    rank_exact,
    rank_mod_p,
    read_matrix_market,
    write_matrix_market,
)


def random_rows(rng, nrows, ncols, density=0.4):
    rows = []
    for _ in range(nrows):
        row = {}
        for c in range(ncols):
            if rng.random() < density:
                v = Fraction(rng.randint(-9, 9), rng.randint(1, 9))
                if v:
                    row[c] = v
        rows.append(row)
    return rows


def add_combination_rows(rng, rows, count):
    """Append rows that are rational combinations of two existing rows."""
    out = list(rows)
    for _ in range(count):
        a, b = rng.randrange(len(rows)), rng.randrange(len(rows))
        ca = Fraction(rng.randint(1, 4), rng.randint(1, 3))
        cb = Fraction(rng.randint(-4, 4), 1)
        combo = dict(rows[a])
        combo = {c: ca * v for c, v in combo.items()}
        for c, v in rows[b].items():
            combo[c] = combo.get(c, Fraction(0)) + cb * v
        out.append({c: v for c, v in combo.items() if v})
    return out


def reference_is_prime(n):
    """Independent deterministic Miller-Rabin (valid far beyond 2**64)."""
    if n < 2:
        return False
    for q in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 325, 9375, 28178, 450775, 9780504, 1795265022):
        x = pow(a % n, d, n)
        if x in (0, 1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


class TestHardcodedPrimes:
    def test_defaults_are_prime(self):
        for p in PRIMES:
            assert reference_is_prime(p)

    def test_escalation_pool_is_prime(self):
        for p in ESCALATION_PRIMES:
            assert reference_is_prime(p)

    def test_primes_are_word_size_near_2_62(self):
        for p in PRIMES + ESCALATION_PRIMES:
            assert 2**61 < p < 2**62

    def test_all_distinct(self):
        pool = PRIMES + ESCALATION_PRIMES
        assert len(set(pool)) == len(pool)

    def test_internal_primality_check_agrees(self):
        for n in range(200):
            assert _is_prime(n) == reference_is_prime(n)
        for p in PRIMES + ESCALATION_PRIMES:
            assert _is_prime(p)
        assert not _is_prime(PRIMES[0] + 2)


class TestIntegerRow:
    def test_clears_denominators_and_content(self):
        row = {0: Fraction(2, 3), 2: Fraction(-4, 9)}
        assert integer_row(row) == {0: 3, 2: -2}

    def test_sign_of_lowest_column_is_positive(self):
        row = {1: Fraction(-1, 2), 3: Fraction(1, 4)}
        assert integer_row(row) == {1: 2, 3: -1}

    def test_zero_row(self):
        assert integer_row({}) == {}
        assert integer_row({0: Fraction(0), 5: 0}) == {}

    def test_integer_input(self):
        assert integer_row({2: 6, 5: -9}) == {2: 2, 5: -3}

    def test_primitive_result(self):
        rng = random.Random(7)
        for _ in range(20):
            row = random_rows(rng, 1, 8, density=0.6)[0]
            out = integer_row(row)
            if not out:
                continue
            from math import gcd

            assert gcd(*out.values()) == 1
            assert out[min(out)] > 0


class TestRankModP:
    def test_zero_matrix(self):
        assert rank_mod_p([{}, {}, {}], PRIMES[0]) == 0
        assert rank_mod_p([], PRIMES[0]) == 0

    def test_identity_block(self):
        rows = [{i: 1} for i in range(7)]
        assert rank_mod_p(rows, PRIMES[0]) == 7

    def test_duplicate_rows(self):
        rows = [{0: 1, 1: 2}, {0: 1, 1: 2}, {1: 1}]
        assert rank_mod_p(rows, PRIMES[0]) == 2

    def test_row_order_invariance(self):
        rng = random.Random(11)
        rows = add_combination_rows(rng, random_rows(rng, 8, 12), 4)
        base = rank_mod_p(rows, PRIMES[0])
        for _ in range(5):
            shuffled = rows[:]
            rng.shuffle(shuffled)
            assert rank_mod_p(shuffled, PRIMES[0]) == base

    def test_matches_exact_rank_random(self):
        rng = random.Random(12345)
        for _ in range(10):
            rows = add_combination_rows(rng, random_rows(rng, 12, 20), 8)
            exact = rank_exact(rows)
            for p in PRIMES:
                assert rank_mod_p(rows, p) == exact

    def test_rank_drop_at_bad_small_prime(self):
        rows = [{0: 97}]
        assert rank_mod_p(rows, 97) == 0
        assert rank_mod_p(rows, 101) == 1

    def test_denominator_divisible_by_prime(self):
        with pytest.raises(PrimeDivisibilityError):
            rank_mod_p([{0: Fraction(1, 97)}], 97)


class TestRankExact:
    def test_empty(self):
        assert rank_exact([]) == 0

    def test_known_small_matrix(self):
        rows = [
            {0: 1, 1: 2, 2: 3},
            {0: 2, 1: 4, 2: 6},
            {1: 1, 2: 1},
        ]
        assert rank_exact(rows) == 2

    def test_size_cap(self):
        rows = [{} for _ in range(501)]
        with pytest.raises(InvalidParameterError):
            rank_exact(rows)
        assert rank_exact(rows[:500]) == 0

    def test_agrees_with_three_primes_on_many_matrices(self):
        rng = random.Random(2024)
        primes = PRIMES + ESCALATION_PRIMES[:1]
        for _ in range(50):
            rows = add_combination_rows(rng, random_rows(rng, 6, 9, 0.5), 3)
            exact = rank_exact(rows)
            for p in primes:
                assert rank_mod_p(rows, p) == exact


class TestOnlineRank:
    def test_add_reports_new_pivots(self):
        acc = OnlineRank(PRIMES[0])
        assert acc.add({0: 1, 1: 1})
        assert acc.add({1: 1})
        assert not acc.add({0: 2, 1: 4})  # 2*(first) + 2*(second)
        assert acc.rank == 2

    def test_matches_batch_rank(self):
        rng = random.Random(99)
        for _ in range(10):
            rows = add_combination_rows(rng, random_rows(rng, 10, 14), 6)
            acc = OnlineRank(PRIMES[1])
            grew = sum(1 for r in rows if acc.add(r))
            assert grew == acc.rank == rank_mod_p(rows, PRIMES[1])

    def test_contains_is_membership(self):
        acc = OnlineRank(PRIMES[0])
        acc.add({0: 1, 2: 3})
        acc.add({1: 5})
        assert acc.contains({0: 2, 1: 1, 2: 6})
        assert not acc.contains({3: 1})
        assert acc.rank == 2  # contains() leaves the state alone


class TestCertifiedRank:
    def test_agreeing_default_primes(self):
        rows = [{0: Fraction(1, 2), 1: 2}, {1: 3}, {0: 1, 1: 10}]
        cert = certified_rank(rows)
        assert isinstance(cert, RankCertificate)
        assert cert.rank == 2
        assert cert.primes == PRIMES
        assert not cert.escalated
        assert cert.ranks == ((PRIMES[0], 2), (PRIMES[1], 2))

    def test_empty_matrix(self):
        cert = certified_rank([])
        assert cert.rank == 0 and not cert.escalated

    def test_escalation_on_disagreement(self):
        # Both rows are primitive, but they coincide mod 97, so the requested
        # pair disagrees and a third prime must arbitrate.
        rows = [{0: 1, 1: 1}, {0: 1, 1: 98}]
        cert = certified_rank(rows, primes=(97, 101))
        assert cert.rank == 2
        assert cert.escalated
        assert 97 not in cert.primes and 101 in cert.primes

    def test_single_requested_prime_still_certified(self):
        cert = certified_rank([{0: 1}], primes=(PRIMES[0],))
        assert cert.rank == 1
        assert len(cert.primes) >= 2

    def test_integer_rescaling_prevents_denominator_failures(self):
        # The stored form is integral, so even a prime dividing a denominator
        # cannot error out.
        cert = certified_rank([{0: Fraction(1, 97)}], primes=(97, 101))
        assert cert.rank == 1
        assert not cert.escalated

    def test_matches_exact_rank(self):
        rng = random.Random(5)
        for _ in range(10):
            rows = add_combination_rows(rng, random_rows(rng, 9, 13), 5)
            assert certified_rank(rows).rank == rank_exact(rows)


class TestFractionStrings:
    def test_format(self):
        assert format_fraction(Fraction(3, 4)) == "3/4"
        assert format_fraction(5) == "5/1"
        assert format_fraction(Fraction(-7, 3)) == "-7/3"

    def test_round_trip(self):
        for v in (Fraction(3, 4), Fraction(-60), Fraction(103680, 7)):
            assert parse_fraction(format_fraction(v)) == v


class TestMatrixMarket:
    ROWS = [
        {0: Fraction(3, 4), 2: Fraction(-5)},
        {},
        {1: Fraction(7, 1)},
    ]

    def test_rational_round_trip(self, tmp_path):
        path = tmp_path / "m.mtx"
        write_matrix_market(path, self.ROWS, ncols=4)
        data = read_matrix_market(path)
        assert isinstance(data, MatrixMarketData)
        assert data.field == "rational"
        assert data.modulus is None
        assert (data.nrows, data.ncols) == (3, 4)
        assert list(data.rows) == self.ROWS

    def test_rational_entries_as_p_over_q(self, tmp_path):
        path = tmp_path / "m.mtx"
        write_matrix_market(path, self.ROWS, ncols=4)
        text = path.read_text()
        lines = text.splitlines()
        assert lines[0] == "%%MatrixMarket matrix coordinate rational general"
        assert lines[1] == "3 4 3"
        assert lines[2] == "1 1 3/4"
        assert lines[3] == "1 3 -5/1"
        assert lines[4] == "3 2 7/1"

    def test_integer_companion(self, tmp_path):
        path = tmp_path / "m97.mtx"
        write_matrix_market(path, self.ROWS, ncols=4, prime=97)
        data = read_matrix_market(path)
        assert data.field == "integer"
        assert data.modulus == 97
        assert all(0 < v < 97 for row in data.rows for v in row.values())
        # 3/4 mod 97: 4*73 = 292 = 3 mod 97
        assert data.rows[0][0] == 3 * pow(4, -1, 97) % 97

    def test_byte_identical_rewrites(self, tmp_path):
        p1, p2 = tmp_path / "a.mtx", tmp_path / "b.mtx"
        write_matrix_market(p1, self.ROWS, ncols=4)
        reordered = [dict(reversed(list(r.items()))) for r in self.ROWS]
        write_matrix_market(p2, reordered, ncols=4)
        assert p1.read_bytes() == p2.read_bytes()

    def test_round_trip_preserves_rank(self, tmp_path):
        rng = random.Random(31)
        rows = add_combination_rows(rng, random_rows(rng, 8, 10), 4)
        path = tmp_path / "r.mtx"
        write_matrix_market(path, rows, ncols=10)
        data = read_matrix_market(path)
        assert rank_exact(list(data.rows)) == rank_exact(rows)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.mtx"
        path.write_text("%%MatrixMarket matrix array real general\n1 1\n1.0\n")
        with pytest.raises(InvalidParameterError):
            read_matrix_market(path)

    def test_truncated_file_rejected(self, tmp_path):
        path = tmp_path / "short.mtx"
        write_matrix_market(path, self.ROWS, ncols=4)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(InvalidParameterError):
            read_matrix_market(path)
