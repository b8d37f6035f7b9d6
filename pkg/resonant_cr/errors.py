# resonant_cr/errors.py
from typing import Any, Dict, Optional

from pydantic import ValidationError


class ResonantCRError(RuntimeError):
    """Base error; `analysis` carries machine-readable detail."""

    exit_code = 1

    def __init__(self, message: str, *, analysis: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.analysis: Dict[str, Any] = dict(analysis or {})


class DomainError(ResonantCRError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    exit_code = 2


class RangeError(ResonantCRError, OverflowError):
    """Exact integer result would leave the supported range."""

    exit_code = 3


class BudgetError(ResonantCRError):
    """Requested work exceeds a configured budget."""

    exit_code = 3

    def __init__(
        self,
        message: str,
        *,
        estimate: float,
        budget: float,
        analysis: Optional[Dict[str, Any]] = None,
    ):
        merged = {"estimate": estimate, "budget": budget}
        merged.update(analysis or {})
        super().__init__(
            f"{message} (estimated cost {estimate:.3g}, budget {budget:.3g})",
            analysis=merged,
        )
        self.estimate = estimate
        self.budget = budget


class AccuracyError(ResonantCRError):
    """Quadrature or time stepping failed to meet its tolerance."""

    exit_code = 4

    def __init__(
        self,
        message: str,
        *,
        achieved: Optional[float] = None,
        analysis: Optional[Dict[str, Any]] = None,
    ):
        merged = {"achieved": achieved}
        merged.update(analysis or {})
        super().__init__(message, analysis=merged)
        self.achieved = achieved


class ConfigError(ResonantCRError, ValueError):
    exit_code = 2


def exit_code_for(exc: BaseException) -> int:
    """Maps an exception to the CLI exit code."""
    if isinstance(exc, ResonantCRError):
        return exc.exit_code
    if isinstance(exc, ValidationError):
        return ConfigError.exit_code
    return 1
