# tests/test_envelope.py

import math

import numpy as np
import pytest
from pydantic import ValidationError

from resonant_cr.envelope import Envelope, japanese, xl_norm, zero_envelope
from resonant_cr.errors import DomainError


def test_japanese_bracket():
    assert float(japanese([3.0, 4.0])) == pytest.approx(math.sqrt(26.0))
    assert japanese(np.zeros((5, 2))).tolist() == [1.0] * 5


def test_xl_norm_of_empty_sample():
    assert xl_norm(np.array([]), np.zeros((0, 2)), 4.0) == 0.0


def test_gaussian_values():
    f = Envelope.gaussian(2, amp=2.0 - 1.0j, width=1.5)
    assert f([0.0, 0.0]) == pytest.approx(2.0 - 1.0j)
    assert f([1.5, 0.0]) == pytest.approx((2.0 - 1.0j) / math.e)


def test_rational_values():
    f = Envelope.rational(3, ell=8.0)
    assert f([1.0, 0.0, 0.0]) == pytest.approx(2.0**-4)


def test_dimension_mismatch():
    with pytest.raises(DomainError):
        Envelope.gaussian(2)(np.zeros(3))


def test_center_length_is_validated():
    with pytest.raises(ValidationError):
        Envelope.gaussian(2, center=[1.0, 2.0, 3.0])


@pytest.mark.parametrize(
    "f",
    [
        Envelope.gaussian(2, ell=12.0),
        Envelope.gaussian(3, center=[0.5, -0.2, 0.1], ell=6.0),
        Envelope.rational(2, ell=5.0, width=0.7),
    ],
)
def test_norm_bound_dominates_samples(f):
    rng = np.random.default_rng(3)
    pts = rng.normal(scale=3.0, size=(2000, f.n))

    weighted = np.abs(f(pts)) * japanese(pts) ** f.ell

    assert np.all(weighted <= f.norm_bound)
    assert f.xln_norm() >= f.norm_bound


def test_tabulated_interpolates_samples():
    g = Envelope.gaussian(2)
    radii = np.linspace(0.0, 6.0, 200)
    f = Envelope.tabulated(2, radii, g.radial(radii), ell=12.0)

    rho = np.linspace(0.0, 5.9, 37)

    assert np.allclose(f.radial(rho), g.radial(rho), atol=1e-6)
    assert f.radial(np.array([6.5]))[0] == 0.0
    assert f.tail_scale() == 6.0


def test_tabulated_has_no_derivative_bound():
    radii = np.linspace(0.0, 4.0, 20)
    f = Envelope.tabulated(2, radii, np.exp(-(radii**2)), ell=12.0)
    with pytest.raises(DomainError):
        f.derivative_bound(1)


def test_separable_axis_factors():
    f = Envelope.gaussian(3, amp=1.5j, center=[0.3, 0.0, -1.0], width=0.8)
    x = np.array([0.7, -0.4, 0.2])

    product = np.prod([f.axis_factor(i, x[i]) for i in range(3)])

    assert product == pytest.approx(f(x))


def test_rational_is_not_separable():
    with pytest.raises(DomainError):
        Envelope.rational(2, ell=6.0).axis_factor(0, 0.0)


def test_scaled_and_rotated():
    f = Envelope.gaussian(2, center=[1.0, 0.5])
    x = np.array([0.3, -0.7])
    R = np.array([[0.0, -1.0], [1.0, 0.0]])

    assert f.scaled(2.0)(x) == pytest.approx(f(2.0 * x))
    assert f.rotated(R)(R @ x) == pytest.approx(f(x))
    assert f.rotated(R).x0.tolist() == pytest.approx([-0.5, 1.0])


def test_times_and_zero():
    f = Envelope.gaussian(2)
    assert f.times(2j).amp == 2j
    assert f.times(0.0).is_zero
    assert zero_envelope(3).is_zero
    assert not f.is_zero


def test_radial_flag():
    assert Envelope.gaussian(2).is_radial
    assert not Envelope.gaussian(2, center=[1.0, 0.0]).is_radial
