# tests/test_arithmetic.py

import math

import numpy as np
import pytest

from resonant_cr import config
from resonant_cr.arithmetic import (
    euler_totient,
    factorize,
    kloosterman,
    mobius_sieve,
    omega_value,
    partial_sum_A,
    partial_sum_M,
    prime_sieve,
    ramanujan_sum,
    s_qc,
    s_qc_brute,
    s_qc_shifted,
    totient_sieve,
    zeta_ratio_limit,
    zeta_ratio_sum,
)
from resonant_cr.errors import BudgetError, DomainError, RangeError
from resonant_cr.zeta import zeta_constants


def _ramanujan_direct(q, m):
    return round(
        sum(
            math.cos(2 * math.pi * a * m / q)
            for a in range(1, q + 1)
            if math.gcd(a, q) == 1
        )
    )


def test_factorize():
    result = factorize(360)
    assert result.factors == [(2, 3), (3, 2), (5, 1)]
    assert factorize(1).factors == []
    assert factorize(97).factors == [(97, 1)]


def test_factorize_rejects_nonpositive():
    with pytest.raises(DomainError):
        factorize(0)


def test_euler_totient_table():
    assert [euler_totient(q) for q in range(1, 13)] == [1, 1, 2, 2, 4, 2, 6, 4, 6, 4, 10, 4]


def test_ramanujan_sum_matches_definition():
    for q in range(1, 31):
        for m in range(-5, 40):
            assert ramanujan_sum(q, m) == _ramanujan_direct(q, m), (q, m)


@pytest.mark.parametrize("q", [1, 2, 9, 12, 30, 97])
def test_ramanujan_sum_at_zero_is_totient(q):
    assert ramanujan_sum(q, 0) == euler_totient(q)


def test_omega_value_pairs_halves():
    assert omega_value([1, 2, 3, 4]).value == 1 * 3 + 2 * 4
    assert omega_value([0, 5, 0, 7, 1, 0]).is_zero


def test_omega_value_odd_length():
    with pytest.raises(DomainError):
        omega_value([1, 2, 3])


def test_s_qc_examples():
    assert s_qc(1, 17, 4).value == 1
    assert s_qc(4, 2, 4).value == -32
    assert s_qc(5, 0, 6).value == 125 * 4


def test_s_qc_rejects_odd_dimension():
    with pytest.raises(DomainError):
        s_qc(5, 1, 3)


def test_s_qc_range_error():
    with pytest.raises(RangeError):
        s_qc(2**40, 1, 6)


def test_s_qc_bound():
    for q in range(1, 40):
        for w in (0, 1, 6, 30):
            value = s_qc(q, w, 4)
            assert abs(value.value) <= value.bound()


def test_brute_force_matches_closed_form():
    """Exact agreement, zero tolerance, on random dual vectors."""
    # Arrange
    rng = np.random.default_rng(1)

    # Act / Assert
    for d in (4, 6):
        for q in range(1, 13):
            for c in rng.integers(-6, 7, size=(5, d)):
                closed = s_qc(q, omega_value(c).value, d).value
                brute = s_qc_brute(q, c, 0, d)
                assert isinstance(brute, int)
                assert brute == closed, (q, c.tolist())


def test_brute_force_at_nonzero_level():
    rng = np.random.default_rng(2)
    for q in (3, 5, 8, 9):
        for c in rng.integers(-4, 5, size=(3, 4)):
            brute = s_qc_brute(q, c, 2, 4)
            closed = s_qc_shifted(q, omega_value(c).value, 2, 4)
            assert isinstance(brute, float)
            assert brute == pytest.approx(closed, abs=1e-9 * q**2)


def test_shifted_at_level_zero_is_exact():
    assert s_qc_shifted(4, 2, 0, 4) == -32.0


def test_kloosterman_symmetry():
    for q in (5, 7, 12):
        assert kloosterman(1, 3, q) == pytest.approx(kloosterman(3, 1, q), abs=1e-12)
    assert kloosterman(4, 9, 1) == 1.0


def test_brute_force_refused_above_ceiling():
    with pytest.raises(BudgetError) as exc_info:
        s_qc_brute(6, [0, 0, 0, 0], 0, 4, q_ceiling=5)

    assert exc_info.value.analysis["ceiling"] == 5
    assert exc_info.value.analysis["q"] == 6
    assert exc_info.value.exit_code == 3


def test_brute_force_ceiling_from_config(monkeypatch):
    monkeypatch.setattr(config, "BRUTE_FORCE_Q_MAX", 3)
    with pytest.raises(BudgetError):
        s_qc_brute(4, [1, 0, 0, 1], 0, 4)


def test_brute_force_wrong_length():
    with pytest.raises(DomainError):
        s_qc_brute(3, [1, 2], 0, 4)


def test_multiplicativity():
    for u in range(2, 15):
        for v in range(u + 1, 200 // u + 1):
            if math.gcd(u, v) != 1:
                continue
            for w in (0, 1, 2, 6, 30):
                assert s_qc(u * v, w, 4).value == s_qc(u, w, 4).value * s_qc(v, w, 4).value


def test_sieves():
    assert np.nonzero(prime_sieve(20))[0].tolist() == [2, 3, 5, 7, 11, 13, 17, 19]
    assert totient_sieve(12)[1:].tolist() == [1, 1, 2, 2, 4, 2, 6, 4, 6, 4, 10, 4]
    assert mobius_sieve(10).tolist() == [0, 1, -1, -1, 0, -1, 1, -1, 0, 0, 1]


def test_partial_sum_M_small():
    assert partial_sum_M(1) == 1.0
    assert partial_sum_M(3) == pytest.approx(1 + 1 / 4 + 2 / 9, rel=1e-15)


@pytest.mark.parametrize("omega", [0, 1, 6, 12])
def test_partial_sum_A_matches_direct(omega):
    direct = sum(q * q * ramanujan_sum(q, omega) for q in range(1, 31))
    assert partial_sum_A(30, omega) == pytest.approx(direct, rel=1e-14)


def test_log_asymptotics_of_M():
    zc = zeta_constants()
    X = 100_000

    defect = partial_sum_M(X) - math.log(X) / zc.zeta2 - zc.log_constant

    assert abs(defect) < 2e-2


def test_A_over_X4():
    zc = zeta_constants()
    X = 10_000

    ratio = partial_sum_A(X, 0) / float(X) ** 4

    assert ratio == pytest.approx(1 / (4 * zc.zeta2), rel=1e-2)


@pytest.mark.parametrize("d", [6, 8])
def test_zeta_ratio_sums(d):
    assert zeta_ratio_sum(d, 100_000) == pytest.approx(zeta_ratio_limit(d), abs=1e-3)


def test_zeta_ratio_limit_at_six():
    zc = zeta_constants()
    assert zeta_ratio_limit(6) == pytest.approx(zc.zeta2 / zc.zeta3, rel=1e-12)


def test_zeta_ratio_needs_d_six():
    with pytest.raises(DomainError):
        zeta_ratio_sum(4, 100)
