# resonant_cr/arithmetic.py
import logging
import math
from functools import lru_cache
from typing import List, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator

from resonant_cr import config
from resonant_cr.errors import BudgetError, DomainError, RangeError
from resonant_cr.zeta import zeta

logger = logging.getLogger(__name__)

INT64_MAX = 2**63 - 1
EXACT_LIMIT = 2**127
# |S(q,c)| <= BOUND_CONSTANT * q^(d/2+1), observed over the brute-force range.
BOUND_CONSTANT = 1.0


class PrimeFactorization(BaseModel):
    q: int = Field(description="The factored positive integer.")
    factors: List[Tuple[int, int]] = Field(
        description="(prime, exponent) pairs with strictly increasing primes."
    )

    @model_validator(mode="after")
    def _check_product(self):
        primes = [p for p, _ in self.factors]
        if any(a >= b for a, b in zip(primes, primes[1:])):
            raise ValueError("primes must be strictly increasing")
        if any(e < 1 for _, e in self.factors):
            raise ValueError("exponents must be positive")
        if math.prod(p**e for p, e in self.factors) != self.q:
            raise ValueError(f"factors do not multiply to {self.q}")
        return self


class OmegaValue(BaseModel):
    value: int = Field(description="c_e . c_o in exact integer arithmetic.")

    @property
    def is_zero(self) -> bool:
        return self.value == 0


class SqcValue(BaseModel):
    value: int = Field(description="S(q,c) = q^(d/2) c_q(omega(c)).")
    q: int
    d: int

    def bound(self) -> float:
        return BOUND_CONSTANT * float(self.q) ** (self.d // 2 + 1)


def _check_q(q: int):
    if q < 1:
        raise DomainError(f"modulus must be positive, got {q}", analysis={"q": q})
    if q > INT64_MAX:
        raise RangeError(f"modulus {q} exceeds the 64-bit range", analysis={"q": q})


@lru_cache(maxsize=None)
def _trial_factor(q: int) -> Tuple[Tuple[int, int], ...]:
    result = []
    value = q
    p = 2
    while p * p <= value:
        if value % p == 0:
            count = 0
            while value % p == 0:
                value //= p
                count += 1
            result.append((p, count))
        p += 1 if p == 2 else 2
    if value > 1:
        result.append((value, 1))
    return tuple(result)


def factorize(q: int) -> PrimeFactorization:
    _check_q(q)
    return PrimeFactorization(q=q, factors=list(_trial_factor(q)))


def euler_totient(q: int) -> int:
    """Euler's totient.

    Examples:
        >>> euler_totient(1)
        1
        >>> euler_totient(12)
        4
    """
    _check_q(q)
    result = q
    for p, _ in _trial_factor(q):
        result = result // p * (p - 1)
    return result


def ramanujan_sum(q: int, m: int) -> int:
    """c_q(m) from the prime-power values, multiplicative in q.

    At q = 1 the sum is 1.

    Examples:
        >>> ramanujan_sum(4, 2)
        -2
        >>> ramanujan_sum(6, 4)
        -1
    """
    _check_q(q)
    result = 1
    for p, j in _trial_factor(q):
        pj = p**j
        pj1 = p ** (j - 1)
        if m % pj == 0:
            result *= pj1 * (p - 1)
        elif m % pj1 == 0:
            result *= -pj1
        else:
            return 0
    return result


def omega_value(c: Sequence[int]) -> OmegaValue:
    """Pairs c_i with c_(i + d/2) and returns the exact dot product."""
    c = [int(x) for x in c]
    if len(c) % 2:
        raise DomainError(f"dual vector must have even length, got {len(c)}")
    half = len(c) // 2
    return OmegaValue(value=sum(c[i] * c[i + half] for i in range(half)))


def _check_d(d: int):
    if d < 2 or d % 2:
        raise DomainError(f"d must be a positive even integer, got {d}")


def s_qc(q: int, omega_c: int, d: int) -> SqcValue:
    """S(q,c) = q^(d/2) c_q(omega(c)) for the paired quadratic form at level 0."""
    _check_q(q)
    _check_d(d)
    if q ** (d // 2 + 1) >= EXACT_LIMIT:
        raise RangeError(
            f"S({q}, c) with d={d} leaves the exact 128-bit range",
            analysis={"q": q, "d": d},
        )
    return SqcValue(value=q ** (d // 2) * ramanujan_sum(q, omega_c), q=q, d=d)


def kloosterman(m: int, n: int, q: int) -> float:
    """K(m, n; q), the sum over units a of e((a m + a^-1 n)/q); real valued."""
    _check_q(q)
    if q == 1:
        return 1.0
    units = [a for a in range(1, q) if math.gcd(a, q) == 1]
    phases = np.array([(a * m + pow(a, -1, q) * n) % q for a in units])
    return float(math.fsum(np.cos(2 * np.pi * phases / q)))


def s_qc_shifted(q: int, omega_c: int, mu_tilde: int, d: int) -> float:
    """S at resonance level mu_tilde: q^(d/2) K(mu_tilde, omega(c); q)."""
    _check_d(d)
    if mu_tilde == 0:
        return float(s_qc(q, omega_c, d).value)
    return float(q ** (d // 2)) * kloosterman(mu_tilde, omega_c, q)


def brute_force_cost(q: int, d: int) -> int:
    return euler_totient(q) * (d // 2) * q * q


def s_qc_brute(
    q: int,
    c: Sequence[int],
    mu_tilde: int,
    d: int,
    q_ceiling: int | None = None,
) -> Union[int, float]:
    """Direct evaluation of the complete exponential sum.

    Sums e((a (b_e . b_o - mu_tilde) + c . b)/q) over units a and all
    b in (Z/q)^d. The b-sum factors over the d/2 coordinate pairs, so each
    pair contributes an exact q x q phase sum. Returns an int when
    mu_tilde is 0 and a float otherwise.
    """
    _check_q(q)
    _check_d(d)
    if len(c) != d:
        raise DomainError(f"dual vector has length {len(c)}, expected {d}")
    ceiling = config.BRUTE_FORCE_Q_MAX if q_ceiling is None else q_ceiling
    if q > ceiling:
        raise BudgetError(
            f"brute-force S(q,c) refused for q={q} above ceiling {ceiling}",
            estimate=brute_force_cost(q, d),
            budget=brute_force_cost(ceiling, d),
            analysis={"q": q, "ceiling": ceiling},
        )
    if q == 1:
        return 1
    half = d // 2
    units = np.array([a for a in range(q) if math.gcd(a, q) == 1], dtype=np.int64)
    roots = np.exp(2j * np.pi * np.arange(q) / q)
    x = np.arange(q, dtype=np.int64)
    xy = np.outer(x, x) % q
    total = np.ones(len(units), dtype=complex)
    for i in range(half):
        cu = int(c[i]) % q
        cv = int(c[i + half]) % q
        linear = (cu * x[:, None] + cv * x[None, :]) % q
        idx = (units[:, None, None] * xy[None, :, :] + linear[None, :, :]) % q
        total *= roots[idx].sum(axis=(1, 2))
    total *= roots[(-units * mu_tilde) % q]
    value = total.sum()
    logger.debug(f"S_brute(q={q}, mu={mu_tilde}) = {value}")
    if mu_tilde == 0:
        return int(round(value.real))
    return float(value.real)


# --- Sieves ---


def prime_sieve(N: int) -> np.ndarray:
    """Boolean primality table for 0..N."""
    is_prime = np.ones(N + 1, dtype=bool)
    is_prime[: min(2, N + 1)] = False
    for p in range(2, math.isqrt(N) + 1):
        if is_prime[p]:
            is_prime[p * p :: p] = False
    return is_prime


def totient_sieve(N: int) -> np.ndarray:
    """phi(0..N) as int64, phi(0) = 0."""
    phi = np.arange(N + 1, dtype=np.int64)
    for p in np.nonzero(prime_sieve(N))[0]:
        phi[p::p] -= phi[p::p] // p
    return phi


def mobius_sieve(N: int) -> np.ndarray:
    """mu(0..N) as int8, mu(0) = 0."""
    mu = np.ones(N + 1, dtype=np.int8)
    mu[0] = 0
    for p in np.nonzero(prime_sieve(N))[0]:
        mu[p::p] *= -1
        mu[p * p :: p * p] = 0
    return mu


def _divisors(m: int) -> List[int]:
    m = abs(m)
    small = [k for k in range(1, math.isqrt(m) + 1) if m % k == 0]
    return sorted(set(small + [m // k for k in small]))


# --- Partial sums ---


def partial_sum_M(X: int) -> float:
    """M(X) = sum over q <= X of q^-4 S(q,0) at d=4, i.e. sum phi(q)/q^2."""
    if X < 1:
        raise DomainError(f"X must be positive, got {X}")
    q = np.arange(1, X + 1, dtype=float)
    phi = totient_sieve(X)[1:].astype(float)
    return math.fsum(phi / (q * q))


def partial_sum_A(X: int, omega_c: int) -> float:
    """A(X,c) = sum over q <= X of S(q,c) at d=4.

    For omega(c) != 0 it uses c_q(n) = sum over e | gcd(q,n) of mu(q/e) e.
    """
    if X < 1:
        raise DomainError(f"X must be positive, got {X}")
    if omega_c == 0:
        q = np.arange(1, X + 1, dtype=float)
        return math.fsum(q * q * totient_sieve(X)[1:].astype(float))
    mu = mobius_sieve(X)
    terms = []
    for e in _divisors(omega_c):
        if e > X:
            break
        k = np.arange(1, X // e + 1, dtype=float)
        terms.append(math.fsum((e * k) ** 2 * e * mu[1 : X // e + 1]))
    return math.fsum(terms)


def zeta_ratio_sum(d: int, Q_max: int) -> float:
    """sum over q <= Q_max of q^-d S(q,0) = sum phi(q) q^(-d/2)."""
    _check_d(d)
    if d < 6:
        raise DomainError(f"the zeta-ratio sum needs d >= 6, got {d}")
    if Q_max < 1:
        raise DomainError(f"Q_max must be positive, got {Q_max}")
    q = np.arange(1, Q_max + 1, dtype=float)
    phi = totient_sieve(Q_max)[1:].astype(float)
    return math.fsum(phi * q ** (-(d // 2)))


def zeta_ratio_limit(d: int) -> float:
    """zeta((d-2)/2) / zeta(d/2), the Q_max -> infinity limit."""
    _check_d(d)
    if d < 6:
        raise DomainError(f"the zeta-ratio limit needs d >= 6, got {d}")
    return zeta((d - 2) / 2) / zeta(d / 2)
