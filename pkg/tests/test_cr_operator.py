# tests/test_cr_operator.py

import math

import numpy as np
import pytest

from resonant_cr.cr_operator import (
    QuadConfig,
    I_of_rho,
    T_apply,
    asymptotics_study,
    calibrate_convention,
    correction_C,
    level_integral_profiles,
    monte_carlo_T,
)
from resonant_cr.envelope import Envelope, zero_envelope
from resonant_cr.errors import DomainError
from resonant_cr.lattice import LatticeSpec, normalization_Z, weighted_resonant_sum
from resonant_cr.zeta import zeta

GENERIC = QuadConfig(force_generic=True)


@pytest.mark.parametrize("n", [2, 3])
def test_T_of_unit_gaussian(n):
    """Closed form pi^2 / 2 at K = 0, the same for n = 2 and n = 3."""
    f = Envelope.gaussian(n)
    assert T_apply(f, f, f, np.zeros(n)) == pytest.approx(math.pi**2 / 2, rel=1e-8)


def test_T_scales_with_amplitudes():
    f = Envelope.gaussian(2)
    g = f.times(2.0 - 1.0j)
    base = T_apply(f, f, f, [0.4, 0.1])
    assert T_apply(g, f, f, [0.4, 0.1]) == pytest.approx((2.0 - 1.0j) * base)
    assert T_apply(f, g, f, [0.4, 0.1]) == pytest.approx((2.0 + 1.0j) * base)


def test_gaussian_route_matches_generic_quadrature():
    # Arrange
    f1 = Envelope.gaussian(2, center=[0.2, 0.0])
    f2 = Envelope.gaussian(2, width=1.2)
    f3 = Envelope.gaussian(2, center=[0.0, -0.3], width=0.9)
    K = [0.3, -0.2]

    # Act
    closed = T_apply(f1, f2, f3, K)
    generic = T_apply(f1, f2, f3, K, GENERIC)

    # Assert
    assert abs(closed - generic) <= 1e-5 * abs(closed)


def test_level_integral_off_zero_matches_generic():
    f = Envelope.gaussian(2)
    closed = I_of_rho(f, f, f, [0.5, 0.0], 0.2)
    generic = I_of_rho(f, f, f, [0.5, 0.0], 0.2, GENERIC)
    assert abs(closed - generic) <= 1e-5 * abs(closed)


def test_level_integral_profiles_accepts_callables():
    f = Envelope.gaussian(2)
    value = level_integral_profiles((f, f, f), np.zeros(2), 0.0, 2.0 + math.sqrt(40.0))
    assert value == pytest.approx(math.pi**2 / 2, rel=1e-5)


def test_level_integral_outside_cutoff_is_zero():
    f = Envelope.gaussian(2)
    assert I_of_rho(f, f, f, [0.0, 0.0], 0.6) == 0


def test_T_input_checks():
    f2 = Envelope.gaussian(2)
    with pytest.raises(DomainError):
        T_apply(Envelope.gaussian(1), Envelope.gaussian(1), Envelope.gaussian(1), [0.0])
    with pytest.raises(DomainError):
        T_apply(f2, Envelope.gaussian(3), f2, [0.0, 0.0])
    with pytest.raises(DomainError):
        T_apply(f2, f2, f2, [0.0, 0.0, 0.0])


def test_T_needs_decay_above_2n():
    f = Envelope.gaussian(2, ell=4.0)
    with pytest.raises(DomainError):
        T_apply(f, f, f, [0.0, 0.0])


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("lam", [0.5, 1.5, 2.0])
def test_T_scaling_law(n, lam):
    # Arrange
    f = Envelope.gaussian(n, amp=1.0 + 0.3j, center=[0.2] + [0.0] * (n - 1), width=0.9)
    g = f.scaled(lam)
    K = np.array([0.3] + [-0.1] * (n - 1))

    # Act
    scaled = T_apply(g, g, g, K)
    base = T_apply(f, f, f, lam * K)

    # Assert
    assert scaled == pytest.approx(lam ** (2 - 2 * n) * base, rel=1e-5)


def test_T_rotation_equivariance():
    theta = 0.7
    R = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    f = Envelope.gaussian(2, amp=0.8 - 0.4j, center=[0.3, -0.2], width=0.8)
    g = f.rotated(R)
    K = np.array([0.5, 0.1])

    assert T_apply(g, g, g, R @ K) == pytest.approx(T_apply(f, f, f, K), rel=1e-6)


def test_T_conjugation_and_swap_symmetry():
    f1 = Envelope.gaussian(2, amp=1.0 + 0.5j, center=[0.2, 0.0])
    f2 = Envelope.gaussian(2, amp=0.3 - 1.0j, width=1.2)
    f3 = Envelope.gaussian(2, center=[-0.1, 0.3], width=0.9)
    conj = [Envelope.gaussian(2, amp=np.conj(f.amp), center=f.x0, width=f.width) for f in (f1, f2, f3)]
    K = [0.4, -0.2]

    value = T_apply(f1, f2, f3, K)

    assert T_apply(*conj, K) == pytest.approx(np.conj(value), rel=1e-7)
    assert T_apply(f3, f2, f1, K) == pytest.approx(value, rel=1e-7)


@pytest.mark.parametrize("K", [[0.0, 0.0], [0.5, -0.3]])
def test_level_profile_at_zero_is_T(K):
    f = Envelope.gaussian(2, center=[0.1, 0.0])
    assert I_of_rho(f, f, f, K, 0.0) == pytest.approx(T_apply(f, f, f, K), rel=1e-10)


def test_level_profile_is_lipschitz_at_zero():
    """Difference quotients near rho = 0 stay of the size seen at moderate rho."""
    f = Envelope.gaussian(2)
    near = [0.01, -0.01, 0.005, -0.005]
    far = [0.3, -0.3, 0.2, -0.2, 0.1, -0.1]
    for K in ([0.0, 0.0], [0.5, 0.0], [0.3, 0.4]):
        I0 = I_of_rho(f, f, f, K, 0.0)

        def quotient(rho):
            return abs(I_of_rho(f, f, f, K, rho) - I0) / abs(rho)

        C_far = max(quotient(rho) for rho in far)
        C_near = max(quotient(rho) for rho in near)
        assert np.isfinite(C_far) and C_far > 0
        assert C_near <= 3.0 * C_far


@pytest.mark.slow
def test_n3_defect_decays_at_least_like_one_over_L():
    f = Envelope.gaussian(3)
    K_points = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]

    report = asymptotics_study(3, [8, 12, 16, 24], f, K_points)

    assert report.rate_exponent is not None
    assert report.rate_exponent <= -0.7


@pytest.mark.slow
def test_n2_G_differences_shrink_and_match_correction(kernel_config):
    # Arrange
    f = Envelope.gaussian(2)
    report = asymptotics_study(2, [16, 32, 64, 128], f, [[0.0, 0.0]])
    G = [complex(a, b) for a, b in zip(report.series["G_re"], report.series["G_im"])]
    diffs = [abs(b - a) for a, b in zip(G, G[1:])]

    # Act
    C = correction_C(f, f, f, [0.0, 0.0], config=kernel_config)

    # Assert
    assert all(b <= 0.7 * a for a, b in zip(diffs, diffs[1:]))
    assert abs(G[-1] - C.value) <= C.tail_estimate + diffs[-1]


def test_T_of_zero_envelope():
    f = Envelope.gaussian(2)
    assert T_apply(f, zero_envelope(2), f, [0.0, 0.0]) == 0


def test_monte_carlo_agrees_with_quadrature():
    f = Envelope.gaussian(2)

    estimate, se = monte_carlo_T(f, f, f, [0.0, 0.0], samples=400_000, seed=3)

    assert abs(estimate - math.pi**2 / 2) <= 5 * abs(se) + 1e-3 * math.pi**2 / 2


def test_asymptotics_report_for_n3():
    f = Envelope.gaussian(3)

    report = asymptotics_study(3, [4, 8], f, [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]], kappa=1.0)

    assert report.L_values == [4, 8]
    assert all(e >= 0 for e in report.errors)
    assert report.metadata["kappa"] == 1.0
    assert report.series == {}


def _normalized_sum_n2(f, L):
    total = weighted_resonant_sum(LatticeSpec(n=2, L=L), [0, 0], f, f, f).value
    return total / normalization_Z(2, 1, L)


def test_asymptotics_n2_without_correction_measures_against_T():
    # Arrange
    f = Envelope.gaussian(2)
    T = T_apply(f, f, f, np.zeros(2))
    s = _normalized_sum_n2(f, 4)

    # Act
    report = asymptotics_study(2, [4], f, [[0.0, 0.0]])

    # Assert
    assert report.errors[0] == pytest.approx(abs(s - T), rel=1e-8)
    assert report.errors[0] > 0
    assert report.series["G_re"][0] == pytest.approx((s - T).real * math.log(4) / zeta(2.0), rel=1e-8)
    assert report.metadata["corrected"] is False


def test_asymptotics_n2_correction_shifts_the_target():
    f = Envelope.gaussian(2)
    plain = asymptotics_study(2, [4], f, [[0.0, 0.0]])
    G = complex(plain.series["G_re"][0], plain.series["G_im"][0])

    corrected = asymptotics_study(2, [4], f, [[0.0, 0.0]], C_hat=[G])

    assert corrected.errors[0] <= 1e-10 * plain.errors[0]
    assert corrected.metadata["corrected"] is True


def test_asymptotics_correction_count_must_match_K_points():
    f = Envelope.gaussian(2)
    with pytest.raises(DomainError):
        asymptotics_study(2, [4], f, [[0.0, 0.0], [1.0, 0.0]], C_hat=[0.0])


def test_calibration_record():
    f = Envelope.gaussian(3)
    cal = calibrate_convention(3, 4, f)
    assert cal.T == pytest.approx(math.pi**2 / 2, rel=1e-8)
    assert cal.kappa == pytest.approx(cal.normalized_sum / cal.T)
    assert cal.convention == "delta(z1 . z2)"


def test_correction_needs_n2():
    f = Envelope.gaussian(3)
    with pytest.raises(DomainError):
        correction_C(f, f, f, [0.0, 0.0, 0.0])


def test_correction_of_zero_envelope(kernel_config):
    f = Envelope.gaussian(2)
    result = correction_C(f, zero_envelope(2), f, [0.0, 0.0], config=kernel_config)
    assert result.value == 0
    assert not result.flagged


@pytest.mark.slow
def test_correction_terms_add_up(kernel_config):
    # Arrange
    f = Envelope.gaussian(2)

    # Act
    result = correction_C(
        f, f, f, [0.0, 0.0], c_max=1, r_nodes=4, tol=0.0, config=kernel_config
    )

    # Assert
    total = sum(complex(*result.terms[k]) for k in ("constant", "zero_frequency", "cone"))
    assert result.value == pytest.approx(total)
    assert result.tail_estimate > 0
    assert result.flagged
    assert result.parameters["c_max"] == 1
