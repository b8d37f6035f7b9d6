# resonant_cr/reports.py
import logging
import math
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field, model_validator

logger = logging.getLogger(__name__)


def rate_function(n: int, L: int) -> float:
    """delta(L): 1/log L for n = 2, log L / L for n = 3, 1/L above."""
    if n == 2:
        return 1.0 / math.log(L)
    if n == 3:
        return math.log(L) / L
    return 1.0 / L


def fit_rate(L_values: Sequence[int], errors: Sequence[float]) -> Optional[float]:
    """Least-squares slope of log(error) against log(L); zeros are skipped."""
    pts = [(math.log(L), math.log(e)) for L, e in zip(L_values, errors) if e > 0]
    if len(pts) < 2:
        return None
    x, y = np.array(pts).T
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


class ConvergenceReport(BaseModel):
    """Per-L defects of a normalized lattice quantity against its target."""

    n: int = Field(description="Space dimension of the study.")
    L_values: List[int] = Field(description="Strictly increasing lattice scales.")
    errors: List[float] = Field(description="Per-L nonnegative defects.")
    rate_exponent: Optional[float] = Field(
        None, description="Fitted exponent of errors ~ L^rate."
    )
    rate_function: List[float] = Field(default_factory=list)
    stable: Optional[bool] = Field(
        None, description="For scans: whether per-L values stay within the band."
    )
    series: Dict[str, List[float]] = Field(
        default_factory=dict, description="Extra per-L columns, e.g. G(L)."
    )
    metadata: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check(self):
        if any(a >= b for a, b in zip(self.L_values, self.L_values[1:])):
            raise ValueError("L values must be strictly increasing")
        if len(self.errors) != len(self.L_values):
            raise ValueError("one error per L value is required")
        if any(e < 0 for e in self.errors):
            raise ValueError("errors must be nonnegative")
        if not self.rate_function:
            self.rate_function = [rate_function(self.n, L) for L in self.L_values]
        if self.rate_exponent is None:
            self.rate_exponent = fit_rate(self.L_values, self.errors)
        return self

    def rows(self) -> List[Dict[str, Any]]:
        out = []
        for i, L in enumerate(self.L_values):
            row = {
                "L": L,
                "defect": self.errors[i],
                "rate_function": self.rate_function[i],
            }
            for key, values in self.series.items():
                row[key] = values[i]
            out.append(row)
        return out

    def columns(self) -> List[str]:
        return ["L", "defect", "rate_function", *self.series.keys()]

    @classmethod
    def combine(cls, reports: Sequence["ConvergenceReport"]) -> "ConvergenceReport":
        """Merges single-L reports of one study into a report sorted by L."""
        if not reports:
            raise ValueError("nothing to combine")
        ordered = sorted(reports, key=lambda r: r.L_values[0])
        keys = list(ordered[0].series)
        return cls(
            n=ordered[0].n,
            L_values=[L for r in ordered for L in r.L_values],
            errors=[e for r in ordered for e in r.errors],
            series={k: [v for r in ordered for v in r.series[k]] for k in keys},
            metadata={"parts": [r.metadata for r in ordered]},
        )
