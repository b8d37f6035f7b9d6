# tests/test_circle.py

import math

import numpy as np
import pytest
from pydantic import ValidationError

from resonant_cr import config
from resonant_cr.circle import (
    GaussianWeight,
    circle_reconstruction,
    direct_lattice_sum,
    oscillatory_I,
    oscillatory_I_monte_carlo,
    oscillatory_I_tensor,
    pairing_matrix,
)
from resonant_cr.envelope import Envelope
from resonant_cr.errors import BudgetError, DomainError
from resonant_cr.lattice import LatticeSpec

COUPLED_A = [
    [1.0, 0.2, 0.0, 0.0],
    [0.2, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
]


def _brute_lattice_sum(W, L, mu_tilde, R):
    axis = np.arange(-R, R + 1)
    box = np.stack(np.meshgrid(*([axis] * W.d), indexing="ij"), axis=-1).reshape(-1, W.d)
    h = W.d // 2
    hit = box[np.sum(box[:, :h] * box[:, h:], axis=1) == mu_tilde]
    return complex(np.sum(W(hit / L)))


def test_weight_validation():
    with pytest.raises(ValidationError):
        GaussianWeight(d=2, A=[[1.0, 0.5], [0.0, 1.0]], b=[0.0, 0.0])
    with pytest.raises(ValidationError):
        GaussianWeight(d=2, A=[[1.0, 0.0], [0.0, -1.0]], b=[0.0, 0.0])
    with pytest.raises(ValidationError):
        GaussianWeight(d=3, A=np.eye(3).tolist(), b=[0.0] * 3)


def test_weight_from_center():
    W = GaussianWeight.from_center(4, alpha=2.0, center=[0.5, 0.0, -0.5, 1.0], amp=3.0j)
    x0 = np.array([0.5, 0.0, -0.5, 1.0])
    x = x0 + np.array([0.1, 0.2, 0.0, -0.1])

    assert W(x0) == pytest.approx(3.0j)
    assert W(x) == pytest.approx(3.0j * math.exp(-2.0 * math.pi * 0.06))
    assert np.allclose(W.mean, x0)


def test_weight_from_envelopes_matches_product():
    # Arrange
    f1 = Envelope.gaussian(2, amp=1.0 + 1.0j, center=[0.3, 0.0])
    f2 = Envelope.gaussian(2, amp=0.5, width=1.3)
    f3 = Envelope.gaussian(2, center=[0.0, -0.4], width=0.8)
    K = np.array([0.25, 0.5])
    rng = np.random.default_rng(4)
    z = rng.normal(size=(6, 4))

    # Act
    W = GaussianWeight.from_envelopes(f1, f2, f3, K)
    z1, z2 = z[:, :2], z[:, 2:]
    expected = f1(K + z1) * np.conj(f2(K + z1 + z2)) * f3(K + z2)

    # Assert
    assert np.allclose(W(z), expected, rtol=1e-12, atol=0)
    assert W.pair_blocks() is not None


def test_weight_from_envelopes_needs_gaussians():
    f = Envelope.rational(2, ell=12.0)
    with pytest.raises(DomainError):
        GaussianWeight.from_envelopes(f, f, f, [0.0, 0.0])


def test_pair_blocks_detects_coupling():
    W = GaussianWeight(d=4, A=COUPLED_A, b=[0.0] * 4)
    assert W.pair_blocks() is None


def test_pairing_matrix():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    assert x @ pairing_matrix(4) @ x == pytest.approx(1 * 3 + 2 * 4)


def test_oscillatory_integral_matches_tensor_quadrature(kernel_config):
    W = GaussianWeight.from_center(2, alpha=2.0)

    fourier = oscillatory_I(kernel_config, W, 0.1, 0.5, [0, 0])
    tensor = oscillatory_I_tensor(kernel_config, W, 2, 0.1, 0.5, [0, 0], half_width=3.0)

    assert abs(fourier - tensor) <= 1e-4 * abs(tensor)


@pytest.mark.slow
def test_oscillatory_integral_with_frequency(kernel_config):
    W = GaussianWeight.from_center(2, alpha=1.0, center=[0.1, 0.0])

    fourier = oscillatory_I(kernel_config, W, 0.0, 0.75, [1, -1])
    tensor = oscillatory_I_tensor(kernel_config, W, 2, 0.0, 0.75, [1, -1], half_width=4.0)

    assert abs(fourier - tensor) <= 1e-4 * abs(tensor) + 1e-6


def test_monte_carlo_estimate_brackets_integral(kernel_config):
    W = GaussianWeight.from_center(2, alpha=2.0)

    exact = oscillatory_I(kernel_config, W, 0.1, 0.5, [0, 0])
    estimate, se = oscillatory_I_monte_carlo(kernel_config, W, 0.1, 0.5, [0, 0], seed=11)

    assert abs(estimate - exact) <= 5 * abs(se) + 1e-8


def test_oscillatory_integral_domain(kernel_config):
    W = GaussianWeight.from_center(2, alpha=1.0)
    with pytest.raises(DomainError):
        oscillatory_I(kernel_config, W, 0.0, 1.0, [0, 0])
    with pytest.raises(DomainError):
        oscillatory_I_tensor(kernel_config, W, 2, 0.0, 0.0, [0, 0], half_width=3.0)


def test_tensor_quadrature_budget(kernel_config, monkeypatch):
    monkeypatch.setattr(config, "QUADRATURE_NODE_BUDGET", 1000)
    W = GaussianWeight.from_center(2, alpha=1.0)
    with pytest.raises(BudgetError) as exc_info:
        oscillatory_I_tensor(kernel_config, W, 2, 0.0, 0.5, [0, 0], half_width=3.0)
    assert exc_info.value.analysis["d"] == 2


def test_direct_sum_histograms_match_brute_force():
    W = GaussianWeight.from_center(4, alpha=1.0, center=[0.2, 0.0, 0.0, -0.3])
    for mu_tilde in (0, 2, -4):
        assert direct_lattice_sum(W, 3, mu_tilde, radius=6) == pytest.approx(
            _brute_lattice_sum(W, 3, mu_tilde, 6), rel=1e-12
        )


def test_direct_sum_scan_for_coupled_weight():
    W = GaussianWeight(d=4, A=COUPLED_A, b=[0.0] * 4)
    assert direct_lattice_sum(W, 3, 2, radius=4) == pytest.approx(
        _brute_lattice_sum(W, 3, 2, 4), rel=1e-12
    )


def test_direct_sum_outside_histogram_range():
    W = GaussianWeight.from_center(4, alpha=1.0)
    assert direct_lattice_sum(W, 2, 10_000, radius=3) == 0


def test_reconstruction_of_zero_weight(kernel_config):
    W = GaussianWeight.from_center(4, alpha=1.0, amp=0.0)
    result = circle_reconstruction(kernel_config, W, LatticeSpec(n=2, L=6))
    assert result.value == 0
    assert result.converged


def test_reconstruction_dimension_check(kernel_config):
    W = GaussianWeight.from_center(4, alpha=1.0)
    with pytest.raises(DomainError):
        circle_reconstruction(kernel_config, W, LatticeSpec(n=3, L=6))


def test_truncated_reconstruction_is_not_converged(kernel_config):
    W = GaussianWeight.from_center(4, alpha=1.0)
    result = circle_reconstruction(kernel_config, W, LatticeSpec(n=2, L=6), q_max=1)
    assert not result.converged
    assert [row["q"] for row in result.rows] == [1]


RECONSTRUCTION_WEIGHTS = [
    GaussianWeight.from_center(4, alpha=1.0, center=[0.1, 0.0, -0.2, 0.0]),
    GaussianWeight.from_center(4, alpha=1.5, center=[0.0, 0.3, 0.0, 0.0], amp=0.5 + 1.0j),
    GaussianWeight.pair_diagonal([0.8, 1.2, 1.0, 0.9]),
]


@pytest.mark.slow
@pytest.mark.parametrize("L", [4, 6, 8])
@pytest.mark.parametrize("weight", range(len(RECONSTRUCTION_WEIGHTS)))
@pytest.mark.parametrize("mu_tilde", [0, 2])
def test_reconstruction_matches_direct_sum(kernel_config, L, weight, mu_tilde):
    # Arrange
    W = RECONSTRUCTION_WEIGHTS[weight]
    lattice = LatticeSpec(n=2, L=L, mu_tilde=mu_tilde)

    # Act
    result = circle_reconstruction(kernel_config, W, lattice)
    direct = direct_lattice_sum(W, L, mu_tilde)

    # Assert
    assert result.q_max == L - 1
    assert len(result.rows) == sum(range(1, L))
    assert abs(result.value - direct) <= 1e-3 * abs(direct)
