# resonant_cr/kernel.py
import logging
import math
from typing import Dict, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr
from scipy.integrate import quad

from resonant_cr.errors import AccuracyError, DomainError

logger = logging.getLogger(__name__)

QUAD_EPSABS = 1e-13
QUAD_LIMIT = 200


def _bump_profile(t: np.ndarray, sharpness: float) -> np.ndarray:
    """exp(-a / (1 - u^2)) with u = 4t - 3, zero outside (1/2, 1)."""
    u = 4.0 * np.asarray(t, dtype=float) - 3.0
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        values = np.exp(-sharpness / (1.0 - u**2))
    return np.where(np.abs(u) < 1.0, values, 0.0)


def chi(y) -> np.ndarray:
    """Even cutoff exp(1 - 1/(1 - 4y^2)) on (-1/2, 1/2), with chi(0) = 1."""
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        values = np.exp(1.0 - 1.0 / (1.0 - 4.0 * y**2))
    return np.where(np.abs(y) < 0.5, values, 0.0)


class KernelConfig(BaseModel):
    """Bump, cutoff and quadrature choices for the delta-method kernel."""

    sharpness: float = Field(
        6.0,
        gt=0,
        description="Bump sharpness a; a = 16 gives exp(-1/((t-1/2)(1-t))).",
    )
    L: Optional[int] = Field(
        None, ge=1, description="Lattice scale for C_L; None means C_L = 1."
    )
    points_per_unit: int = Field(
        64, ge=4, description="Gauss-Legendre nodes per unit oscillation."
    )

    _Z: float = PrivateAttr(default=1.0)
    _moment_cache: Dict = PrivateAttr(default_factory=dict)

    def model_post_init(self, __context):
        mass, err = quad(
            lambda t: float(_bump_profile(t, self.sharpness)),
            0.5,
            1.0,
            epsabs=1e-15,
            epsrel=1e-13,
            limit=QUAD_LIMIT,
        )
        self._Z = 1.0 / mass
        check, _ = quad(
            lambda t: float(self.omega0(t)), 0.5, 1.0, epsabs=1e-15, limit=QUAD_LIMIT
        )
        if abs(check - 1.0) > 1e-10:
            raise AccuracyError(
                f"bump normalization off by {check - 1.0:.2e}", achieved=check
            )

    def omega0(self, t) -> np.ndarray:
        """Unit-mass bump supported in (1/2, 1)."""
        return self._Z * _bump_profile(t, self.sharpness)

    def chi(self, y) -> np.ndarray:
        return chi(y)

    @property
    def C_L(self) -> float:
        if self.L is None:
            return 1.0
        return c_L(self, self.L)

    model_config = ConfigDict(arbitrary_types_allowed=True)


def c_L(config: KernelConfig, L: int) -> float:
    """C_L = (1/L) sum_k omega0(k/L), a finite sum."""
    k = np.arange(1, L + 1, dtype=float)
    return math.fsum(config.omega0(k / L)) / L


def _check_r(r: float):
    if not 0.0 < r < 1.0:
        raise DomainError(f"r must lie in (0, 1), got {r}", analysis={"r": r})


def _constant_part(config: KernelConfig, r: float) -> float:
    """A(r) = sum_j omega0(rj)/(rj) over the window j in (1/(2r), 1/r)."""
    j = np.arange(math.floor(0.5 / r) + 1, math.ceil(1.0 / r) + 1, dtype=float)
    return math.fsum(config.omega0(r * j) / (r * j))


def _h_sum(config: KernelConfig, r: float, y) -> np.ndarray:
    """h(r, y) for any r > 0, vectorized over y.

    The y-dependent window is j in (|y|/r, 2|y|/r).
    """
    y = np.abs(np.atleast_1d(np.asarray(y, dtype=float)))
    out = np.full(y.shape, _constant_part(config, r))
    if y.size == 0:
        return out
    j_max = math.ceil(2.0 * float(y.max()) / r) + 1
    if j_max < 1:
        return out
    block = max(1, 2_000_000 // j_max)
    j = np.arange(1, j_max + 1, dtype=float)
    for start in range(0, y.size, block):
        ys = y[start : start + block, None]
        rj = r * j[None, :]
        out[start : start + block] -= (config.omega0(ys / rj) / rj).sum(axis=1)
    return out


def h_eval(config: KernelConfig, r: float, y):
    """The kernel h(r, y) = sum_j [omega0(rj) - omega0(|y|/(rj))] / (rj).

    Both index windows are computed exactly, so the sum is finite. Scalar
    input returns a float, array input an array of the same shape.
    """
    _check_r(r)
    values = _h_sum(config, r, y)
    if np.ndim(y) == 0:
        return float(values[0])
    return values.reshape(np.shape(y))


def h_chi(config: KernelConfig, r: float, y):
    """chi(y) h(r, y) / C_L."""
    _check_r(r)
    values = chi(y) * _h_sum(config, r, y).reshape(np.shape(y)) / config.C_L
    if np.ndim(y) == 0:
        return float(values)
    return values


def h_naive(config: KernelConfig, r: float, y: float, terms: int = 1_000_000) -> float:
    """Reference value summing every j up to `terms` with no window logic."""
    j = np.arange(1, terms + 1, dtype=float)
    rj = r * j
    return math.fsum((config.omega0(rj) - config.omega0(abs(y) / rj)) / rj)


class KernelH:
    """h_chi(r, .) at a fixed r with an evaluation cache over y."""

    def __init__(self, config: KernelConfig, r: float):
        _check_r(r)
        self.config = config
        self.r = r
        self._cache: Dict[float, float] = {}

    def __call__(self, y: float) -> float:
        key = abs(float(y))
        if key not in self._cache:
            self._cache[key] = h_chi(self.config, self.r, key)
        return self._cache[key]

    def is_flat_near_zero(self, samples: int = 8) -> bool:
        """Checks that h does not depend on y for |y| < r/2."""
        ys = np.linspace(0.0, 0.49 * self.r, samples)
        vals = h_eval(self.config, self.r, ys)
        return bool(np.all(vals == vals[0]))


def _bump_moment(config: KernelConfig, n: int, t: float) -> float:
    """M_n(t) = integral over (1/2, t) of s^n omega0(s)."""
    if t <= 0.5:
        return 0.0
    t = min(t, 1.0)
    key = (n, t)
    cache = config._moment_cache
    if key not in cache:
        value, err = quad(
            lambda s: s**n * float(config.omega0(s)),
            0.5,
            t,
            epsabs=QUAD_EPSABS,
            epsrel=1e-13,
            limit=QUAD_LIMIT,
        )
        if err > 1e-9:
            raise AccuracyError(
                f"bump moment quadrature did not converge (n={n}, t={t})",
                achieved=err,
            )
        cache[key] = value
    return cache[key]


def moment(config: KernelConfig, r: float, n: int, a: float = 0.5) -> float:
    """Integral of x^n h(r, x) over (-a, a).

    Each window term integrates in closed form after rescaling, leaving the
    bump moments M_n, so the 1/r-scale structure needs no adaptive mesh.
    Odd n give exactly 0.
    """
    _check_r(r)
    if not r < a < 1.0:
        raise DomainError(f"need r < a < 1, got r={r}, a={a}")
    if n < 0:
        raise DomainError(f"moment order must be nonnegative, got {n}")
    if n % 2:
        return 0.0
    terms = [_constant_part(config, r) * a ** (n + 1) / (n + 1)]
    for j in range(1, math.ceil(2.0 * a / r) + 1):
        rj = r * j
        terms.append(-(rj**n) * _bump_moment(config, n, a / rj))
    return 2.0 * math.fsum(terms)


def _cos_integral(f, lo: float, hi: float, s: float) -> float:
    if hi <= lo:
        return 0.0
    if s == 0.0:
        value, err = quad(f, lo, hi, epsabs=QUAD_EPSABS, limit=QUAD_LIMIT)
    else:
        value, err = quad(
            f,
            lo,
            hi,
            weight="cos",
            wvar=2.0 * math.pi * s,
            epsabs=QUAD_EPSABS,
            limit=QUAD_LIMIT,
        )
    if err > 1e-8:
        raise AccuracyError(
            f"cosine quadrature did not converge on ({lo}, {hi}) at s={s}",
            achieved=err,
        )
    return value


def h_hat(config: KernelConfig, r: float, s: float) -> complex:
    """Fourier transform of h_chi(r, .) at frequency s.

    h_chi is real and even, so the transform is real; it is returned as a
    complex number with zero imaginary part.
    """
    _check_r(r)
    s = abs(float(s))
    parts = [
        _constant_part(config, r)
        * _cos_integral(lambda y: float(chi(y)), 0.0, 0.5, s)
    ]
    for j in range(1, math.ceil(1.0 / r) + 1):
        rj = r * j
        lo, hi = 0.5 * rj, min(rj, 0.5)
        parts.append(
            -_cos_integral(
                lambda y, rj=rj: float(chi(y) * config.omega0(y / rj)) / rj, lo, hi, s
            )
        )
    return complex(2.0 * math.fsum(parts) / config.C_L, 0.0)


def delta_identity_check(
    config: KernelConfig, L: int, n_range: Sequence[int]
) -> float:
    """Max over n of |sum_q sum_a (1/(qL)) phi_hat(n/(qL)) e(an/q) - delta_n|.

    The residue sum over units a is assembled per q, and q runs up to
    max(L, 2|n|/L), beyond which every kernel term vanishes.
    """
    if L < 1:
        raise DomainError(f"L must be positive, got {L}")
    n = np.asarray(list(n_range), dtype=np.int64)
    if n.size == 0:
        return 0.0
    C = c_L(config, L)
    n_abs = np.abs(n).astype(float)
    q_max = max(L, math.ceil(2.0 * float(n_abs.max()) / L) + 1)
    total = np.zeros(n.size)
    for q in range(1, q_max + 1):
        units = np.array([a for a in range(q) if math.gcd(a, q) == 1])
        residues = np.arange(q)
        table = np.rint(
            np.cos(2.0 * np.pi * np.outer(residues, units) / q).sum(axis=1)
        )
        cq = table[n % q]
        j_max = q_max // q + 1
        m = q * np.arange(1, j_max + 1, dtype=float)
        first = config.omega0(m / L)[None, :]
        second = config.omega0(n_abs[:, None] / (m[None, :] * L))
        inner = ((first - second) / (m[None, :] * L)).sum(axis=1)
        total += cq * inner
    total /= C
    delta = (n == 0).astype(float)
    defect = float(np.max(np.abs(total - delta)))
    logger.debug(f"delta identity at L={L}: defect {defect:.3e}")
    return defect
