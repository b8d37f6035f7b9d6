# resonant_cr/zeta.py
import logging
import math
from functools import lru_cache
from typing import Dict

import numpy as np
from pydantic import BaseModel, Field
from scipy.special import bernoulli

from resonant_cr.errors import DomainError

logger = logging.getLogger(__name__)

_EM_CUT = 10
_EM_TERMS = 6
_DIRECT_CUT = 10_000

# B_2, B_4, ..., B_12
_B2J = [float(b) for b in bernoulli(2 * _EM_TERMS)[2::2]]


def _rising(s: float, j: int) -> tuple[float, float]:
    """Returns s(s+1)...(s+2j-2) and its logarithmic derivative."""
    prod = 1.0
    logd = 0.0
    for i in range(2 * j - 1):
        prod *= s + i
        logd += 1.0 / (s + i)
    return prod, logd


def zeta(s: float) -> float:
    """Riemann zeta for real s > 1 by Euler-Maclaurin with ten explicit terms."""
    if s <= 1:
        raise DomainError(f"zeta is evaluated only for s > 1, got {s}")
    N = _EM_CUT
    terms = [k ** (-s) for k in range(1, N)]
    terms.append(N ** (1 - s) / (s - 1))
    terms.append(0.5 * N ** (-s))
    for j, b in enumerate(_B2J, start=1):
        prod, _ = _rising(s, j)
        terms.append(b / math.factorial(2 * j) * prod * N ** (-s - 2 * j + 1))
    return math.fsum(terms)


def zeta_prime(s: float) -> float:
    """Derivative of zeta for real s > 1, termwise from the Euler-Maclaurin form."""
    if s <= 1:
        raise DomainError(f"zeta' is evaluated only for s > 1, got {s}")
    N = _EM_CUT
    lnN = math.log(N)
    terms = [-math.log(k) * k ** (-s) for k in range(2, N)]
    terms.append(-lnN * N ** (1 - s) / (s - 1) - N ** (1 - s) / (s - 1) ** 2)
    terms.append(-0.5 * lnN * N ** (-s))
    for j, b in enumerate(_B2J, start=1):
        prod, logd = _rising(s, j)
        power = N ** (-s - 2 * j + 1)
        coef = b / math.factorial(2 * j)
        terms.append(coef * prod * power * (logd - lnN))
    return math.fsum(terms)


def euler_gamma() -> float:
    N = _EM_CUT
    terms = [1.0 / k for k in range(1, N + 1)]
    terms.extend([-math.log(N), -0.5 / N])
    for j, b in enumerate(_B2J, start=1):
        terms.append(b / (2 * j * N ** (2 * j)))
    return math.fsum(terms)


# --- Independent route: long direct sums with a short tail correction ---


def _direct_zeta(s: float) -> float:
    N = _DIRECT_CUT
    k = np.arange(1, N + 1, dtype=float)
    head = math.fsum(k ** (-s))
    tail = N ** (1 - s) / (s - 1) - 0.5 * N ** (-s) + s * N ** (-s - 1) / 12
    return head + tail


def _direct_zeta_prime(s: float) -> float:
    N = _DIRECT_CUT
    lnN = math.log(N)
    k = np.arange(2, N + 1, dtype=float)
    head = -math.fsum(np.log(k) * k ** (-s))
    tail = (
        -(N ** (1 - s)) * (lnN / (s - 1) + 1 / (s - 1) ** 2)
        + 0.5 * lnN * N ** (-s)
        + (1 - s * lnN) * N ** (-s - 1) / 12
    )
    return head + tail


def _direct_gamma() -> float:
    N = _DIRECT_CUT
    k = np.arange(1, N + 1, dtype=float)
    return (
        math.fsum(1.0 / k)
        - math.log(N)
        - 0.5 / N
        + 1.0 / (12 * N**2)
        - 1.0 / (120 * N**4)
    )


class ZetaConstants(BaseModel):
    """Zeta values used by the normalizations and partial-sum asymptotics."""

    zeta2: float = Field(description="zeta(2)")
    zeta3: float = Field(description="zeta(3)")
    zeta4: float = Field(description="zeta(4)")
    zeta_prime2: float = Field(description="zeta'(2)")
    gamma: float = Field(description="Euler's constant")
    log_constant: float = Field(
        description="gamma/zeta(2) - zeta'(2)/zeta(2)^2, the constant term of M(X)"
    )
    independent: Dict[str, float] = Field(
        description="The same constants from long direct sums."
    )

    def max_discrepancy(self) -> float:
        """Largest gap between the two evaluation routes."""
        return max(
            abs(getattr(self, key) - value) for key, value in self.independent.items()
        )


def _log_constant(gamma: float, z2: float, zp2: float) -> float:
    return gamma / z2 - zp2 / z2**2


@lru_cache(maxsize=1)
def zeta_constants() -> ZetaConstants:
    z2, z3, z4 = zeta(2.0), zeta(3.0), zeta(4.0)
    zp2 = zeta_prime(2.0)
    gamma = euler_gamma()
    d2, d3, d4 = _direct_zeta(2.0), _direct_zeta(3.0), _direct_zeta(4.0)
    dp2 = _direct_zeta_prime(2.0)
    dg = _direct_gamma()
    constants = ZetaConstants(
        zeta2=z2,
        zeta3=z3,
        zeta4=z4,
        zeta_prime2=zp2,
        gamma=gamma,
        log_constant=_log_constant(gamma, z2, zp2),
        independent={
            "zeta2": d2,
            "zeta3": d3,
            "zeta4": d4,
            "zeta_prime2": dp2,
            "gamma": dg,
            "log_constant": _log_constant(dg, d2, dp2),
        },
    )
    logger.debug(f"Zeta constants cross-check gap {constants.max_discrepancy():.2e}")
    return constants
