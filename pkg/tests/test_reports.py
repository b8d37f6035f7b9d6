# tests/test_reports.py

import math

import pytest
from pydantic import ValidationError

from resonant_cr.reports import ConvergenceReport, fit_rate, rate_function


def test_rate_function_by_dimension():
    assert rate_function(2, 16) == pytest.approx(1 / math.log(16))
    assert rate_function(3, 16) == pytest.approx(math.log(16) / 16)
    assert rate_function(4, 16) == 1 / 16


def test_fit_rate_recovers_power_law():
    L_values = [8, 16, 32, 64]
    errors = [3.0 * L**-1.5 for L in L_values]
    assert fit_rate(L_values, errors) == pytest.approx(-1.5)


def test_fit_rate_skips_zero_defects():
    assert fit_rate([8, 16], [0.0, 0.1]) is None
    assert fit_rate([8, 16, 32], [0.0, 0.1, 0.05]) == pytest.approx(-1.0)


def test_report_fills_rates():
    report = ConvergenceReport(n=3, L_values=[8, 16], errors=[0.4, 0.2])
    assert report.rate_exponent == pytest.approx(-1.0)
    assert report.rate_function == [rate_function(3, 8), rate_function(3, 16)]


@pytest.mark.parametrize(
    "L_values, errors",
    [([16, 8], [0.1, 0.2]), ([8, 8], [0.1, 0.2]), ([8, 16], [0.1]), ([8, 16], [0.1, -0.2])],
)
def test_report_validation(L_values, errors):
    with pytest.raises(ValidationError):
        ConvergenceReport(n=2, L_values=L_values, errors=errors)


def test_rows_and_columns():
    report = ConvergenceReport(
        n=2, L_values=[8, 16], errors=[0.3, 0.1], series={"G": [1.5, 1.2]}
    )

    assert report.columns() == ["L", "defect", "rate_function", "G"]
    assert report.rows()[1] == {
        "L": 16,
        "defect": 0.1,
        "rate_function": rate_function(2, 16),
        "G": 1.2,
    }


def test_combine_sorts_single_L_reports():
    # Arrange
    parts = [
        ConvergenceReport(n=3, L_values=[L], errors=[1.0 / L], series={"h3": [float(L)]}, metadata={"L": L})
        for L in (16, 4, 8)
    ]

    # Act
    report = ConvergenceReport.combine(parts)

    # Assert
    assert report.L_values == [4, 8, 16]
    assert report.errors == [0.25, 0.125, 0.0625]
    assert report.series == {"h3": [4.0, 8.0, 16.0]}
    assert report.rate_exponent == pytest.approx(-1.0)
    assert [part["L"] for part in report.metadata["parts"]] == [4, 8, 16]


def test_combine_nothing():
    with pytest.raises(ValueError):
        ConvergenceReport.combine([])
