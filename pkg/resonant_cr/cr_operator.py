# resonant_cr/cr_operator.py
import logging
import math
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from pydantic import BaseModel, Field
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from resonant_cr import config as settings
from resonant_cr.circle import GaussianWeight, oscillatory_I_many, pairing_matrix
from resonant_cr.envelope import Envelope, japanese
from resonant_cr.errors import AccuracyError, BudgetError, DomainError
from resonant_cr.kernel import KernelConfig, _h_sum, chi
from resonant_cr.lattice import LatticeSpec, normalization_Z, weighted_resonant_sum
from resonant_cr.reports import ConvergenceReport
from resonant_cr.zeta import zeta, zeta_constants

logger = logging.getLogger(__name__)

DEFAULT_ETAS = (0.1, 0.05, 0.025)


class QuadConfig(BaseModel):
    """Resolution of the level-set quadrature."""

    epsrel: float = Field(1e-10, gt=0, description="Radial quad relative tolerance.")
    angles: Optional[int] = Field(
        None, ge=8, description="Angular nodes per circle; None picks from the data."
    )
    radial_panels: int = Field(
        48, ge=4, description="Gauss-Legendre radial panels for generic envelopes."
    )
    inner_nodes: int = Field(
        96, ge=8, description="Hyperplane nodes per axis for generic envelopes."
    )
    force_generic: bool = Field(
        False, description="Use the generic route even for gaussian envelopes."
    )


def _check_triple(f1: Envelope, f2: Envelope, f3: Envelope, K) -> np.ndarray:
    n = f1.n
    if f2.n != n or f3.n != n:
        raise DomainError("envelopes must share the space dimension")
    if n not in (2, 3):
        raise DomainError(f"the level-set quadrature covers n = 2, 3; got n={n}")
    K = np.asarray(K, dtype=float).reshape(-1)
    if len(K) != n:
        raise DomainError(f"K has {len(K)} coordinates, expected {n}")
    return K


def _sphere_nodes(n: int, count: int) -> Tuple[np.ndarray, np.ndarray]:
    """Unit directions and weights on S^(n-1) summing to its area."""
    if n == 2:
        theta = 2 * math.pi * np.arange(count) / count
        u = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        return u, np.full(count, 2 * math.pi / count)
    t, w = leggauss(max(8, count // 2))
    phi = 2 * math.pi * np.arange(count) / count
    ct, ph = np.meshgrid(t, phi, indexing="ij")
    st = np.sqrt(1 - ct**2)
    u = np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=-1).reshape(-1, 3)
    weights = (w[:, None] * np.full(count, 2 * math.pi / count)[None, :]).ravel()
    return u, weights


def _reach(envs: Sequence[Envelope], K: np.ndarray) -> Tuple[float, float]:
    """Shift of the envelope centers from K and a radius past which W is negligible."""
    shift = max(float(np.linalg.norm(K - f.x0)) for f in envs)
    reach = 0.0
    for f in envs:
        if f.family == "gaussian":
            reach = max(reach, math.sqrt(40.0) * f.width)
        elif f.family == "rational":
            reach = max(reach, f.width * 1e14 ** (1.0 / f.ell))
        else:
            reach = max(reach, f.tail_scale())
    return shift, shift + reach


def _gaussian_level_integral(
    f1: Envelope, f2: Envelope, f3: Envelope, K: np.ndarray, rho: float, qc: QuadConfig
) -> complex:
    """Integral of delta(z1 . z2 - rho) W(z) dz for gaussian envelopes.

    For fixed z1 = x the z2-integral over {x . z2 = rho} is a gaussian pushed
    forward along u = x/|x|, leaving a polar integral over x.
    """
    n = f1.n
    b1, b2, b3 = f1.beta, f2.beta, f3.beta
    p1, p2, p3 = K - f1.x0, K - f2.x0, K - f3.x0
    m = b2 + b3
    amp = f1.amp * np.conj(f2.amp) * f3.amp
    if amp == 0:
        return 0j
    shift, r_max = _reach((f1, f2, f3), K)
    count = qc.angles or int(
        min(2048, max(64, 32 + 8 * math.ceil(max(b1, b2, b3) * r_max * shift)))
    )
    u, w = _sphere_nodes(n, count)
    const = (math.pi / m) ** ((n - 1) / 2)

    def radial(r: float) -> float:
        if r == 0.0 and (rho != 0.0 or n > 2):
            return 0.0
        lift = m * rho / r if rho != 0.0 else 0.0
        x = r * u
        v = -(b2 * (p2 + x) + b3 * p3)
        c = (
            -b1 * np.sum((p1 + x) ** 2, axis=1)
            - b2 * np.sum((p2 + x) ** 2, axis=1)
            - b3 * p3 @ p3
        )
        uv = np.sum(u * v, axis=1)
        expo = c + np.sum(v * v, axis=1) / m - (lift - uv) ** 2 / m
        return float(const * r ** (n - 2) * np.sum(w * np.exp(expo)))

    value, err = quad(radial, 0.0, r_max, epsabs=0.0, epsrel=qc.epsrel, limit=400)
    if err > 1e-6 * abs(value) + 1e-15:
        raise AccuracyError(
            f"level-set radial quadrature did not converge at rho={rho}",
            achieved=err,
            analysis={"value": value},
        )
    return complex(amp * value)


def _orthonormal_complement(u: np.ndarray) -> np.ndarray:
    """Per direction, an orthonormal basis of u-perp, shape (k, n, n-1)."""
    k, n = u.shape
    if n == 2:
        return np.stack([-u[:, 1], u[:, 0]], axis=1)[:, :, None]
    helper = np.where(np.abs(u[:, :1]) < 0.9, [[1.0, 0, 0]], [[0, 1.0, 0]])
    e1 = helper - np.sum(helper * u, axis=1, keepdims=True) * u
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(u, e1)
    return np.stack([e1, e2], axis=2)


def level_integral_profiles(
    profiles: Sequence[Callable[[np.ndarray], np.ndarray]],
    K: np.ndarray,
    rho: float,
    r_max: float,
    quad_config: Optional[QuadConfig] = None,
) -> complex:
    """Integral of delta(z1 . z2 - rho) p1(K+z1) conj(p2)(K+z1+z2) p3(K+z2) dz.

    Tensor quadrature for arbitrary profiles: polar z1, Gauss-Legendre on
    the hyperplane z1 . z2 = rho, both cut at r_max.
    """
    qc = quad_config or QuadConfig()
    f1, f2, f3 = profiles
    K = np.asarray(K, dtype=float)
    n = len(K)
    count = qc.angles or 64
    u, w_ang = _sphere_nodes(n, count)
    basis = _orthonormal_complement(u)
    t, w = leggauss(8)
    edges = np.linspace(0.0, r_max, qc.radial_panels + 1)
    half = 0.5 * np.diff(edges)[:, None]
    r_nodes = (0.5 * (edges[1:] + edges[:-1])[:, None] + half * t).ravel()
    r_weights = (half * w).ravel()
    y, wy = leggauss(qc.inner_nodes)
    y, wy = r_max * y, r_max * wy
    nodes = len(r_nodes) * len(u) * qc.inner_nodes ** (n - 1)
    if nodes > settings.QUADRATURE_NODE_BUDGET:
        raise BudgetError(
            f"generic level-set quadrature needs {nodes} nodes",
            estimate=nodes,
            budget=settings.QUADRATURE_NODE_BUDGET,
        )
    if n == 2:
        plane = y[:, None]
        plane_w = wy
    else:
        Y1, Y2 = np.meshgrid(y, y, indexing="ij")
        plane = np.stack([Y1.ravel(), Y2.ravel()], axis=1)
        plane_w = np.outer(wy, wy).ravel()
    total = 0j
    for r, wr in zip(r_nodes, r_weights):
        x = r * u
        # z2 = (rho/r) u + basis @ y
        z2 = (rho / r) * u[:, None, :] + np.einsum("kij,pj->kpi", basis, plane)
        xb = np.broadcast_to(x[:, None, :], z2.shape)
        vals = f1(K + xb) * np.conj(f2(K + xb + z2)) * f3(K + z2)
        inner = vals @ plane_w
        total += wr * r ** (n - 2) * np.sum(w_ang * inner)
    return complex(total)


def _level_integral(f1, f2, f3, K, rho: float, qc: QuadConfig) -> complex:
    if all(f.family == "gaussian" for f in (f1, f2, f3)) and not qc.force_generic:
        return _gaussian_level_integral(f1, f2, f3, K, rho, qc)
    _, r_max = _reach((f1, f2, f3), K)
    return level_integral_profiles((f1, f2, f3), K, rho, r_max, qc)


def T_apply(
    f1: Envelope,
    f2: Envelope,
    f3: Envelope,
    K: Sequence[float],
    quad_config: Optional[QuadConfig] = None,
) -> complex:
    """T(f1, f2, f3)(K) = integral of delta(z1 . z2) f1(K+z1) conj(f2)(K+z1+z2) f3(K+z2).

    The hyperplane measure carries the co-area factor 1/|z1|, absorbed by
    the polar measure |z1|^(n-1) d|z1|.
    """
    K = _check_triple(f1, f2, f3, K)
    if any(f.is_zero for f in (f1, f2, f3)):
        return 0j
    if min(f.ell for f in (f1, f2, f3)) <= 2 * f1.n:
        raise DomainError(f"T needs decay ell > 2n = {2 * f1.n}")
    return _level_integral(f1, f2, f3, K, 0.0, quad_config or QuadConfig())


def I_of_rho(
    f1: Envelope,
    f2: Envelope,
    f3: Envelope,
    K: Sequence[float],
    rho: float,
    quad_config: Optional[QuadConfig] = None,
) -> complex:
    """chi(rho) times the integral of delta(z1 . z2 - rho) W(z) dz."""
    K = _check_triple(f1, f2, f3, K)
    weight = float(chi(rho))
    if weight == 0.0 or any(f.is_zero for f in (f1, f2, f3)):
        return 0j
    return weight * _level_integral(f1, f2, f3, K, float(rho), quad_config or QuadConfig())


def monte_carlo_T(
    f1: Envelope,
    f2: Envelope,
    f3: Envelope,
    K: Sequence[float],
    etas: Sequence[float] = DEFAULT_ETAS,
    samples: int = 1_000_000,
    seed: int = 0,
) -> Tuple[complex, complex]:
    """Smoothed-delta estimate of T extrapolated to eta = 0.

    Samples z from the gaussian weight itself; every eta reuses the same
    draws, and the Lagrange weights at eta = 0 combine them per sample so
    the standard error covers the extrapolated value.
    """
    K = _check_triple(f1, f2, f3, K)
    W = GaussianWeight.from_envelopes(f1, f2, f3, K)
    if W.is_zero():
        return 0j, 0j
    etas = np.asarray(etas, dtype=float)
    lagrange = np.array(
        [
            np.prod([e / (e - ek) for e in np.delete(etas, k)])
            for k, ek in enumerate(etas)
        ]
    )
    rng = np.random.default_rng(seed)
    A = W.A_arr
    mean = W.mean
    z = rng.multivariate_normal(mean, np.linalg.inv(2 * math.pi * A), size=samples)
    scale = W.prefactor() * math.exp(math.pi * mean @ A @ mean) / math.sqrt(np.linalg.det(A))
    q = np.einsum("ij,jk,ik->i", z, pairing_matrix(W.d), z)
    smoothed = np.zeros(samples)
    for lam, eta in zip(lagrange, etas):
        smoothed += lam * np.exp(-0.5 * (q / eta) ** 2) / (eta * math.sqrt(2 * math.pi))
    vals = scale * smoothed
    estimate = complex(vals.mean())
    se = complex(vals.real.std(ddof=1), vals.imag.std(ddof=1)) / math.sqrt(samples)
    logger.debug(f"Monte-Carlo T = {estimate} +- {se}")
    return estimate, se


# --- The n = 2 correction ---


class CorrectionResult(BaseModel):
    value_re: float
    value_im: float
    tail_estimate: float = Field(description="Estimated truncation error.")
    flagged: bool = Field(description="Tail estimate above the requested tolerance.")
    terms: Dict[str, Tuple[float, float]] = Field(
        default_factory=dict, description="Each of the three terms as (re, im)."
    )
    parameters: Dict[str, Any] = Field(default_factory=dict)

    @property
    def value(self) -> complex:
        return complex(self.value_re, self.value_im)


def _log_nodes(r_min: float, count: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes for the integral of g(r)/r over [r_min, 1]."""
    t, w = leggauss(count)
    a = math.log(r_min)
    u = 0.5 * a * (1 - t)
    return np.exp(u), 0.5 * (-a) * w


class LevelProfile:
    """Tabulated even part of the unweighted level integral on [0, 1/2]."""

    def __init__(self, f1, f2, f3, K, quad_config: QuadConfig, points: int = 40):
        rho = 0.5 * (np.arange(points + 1) / points) ** 2
        plus = np.array([_level_integral(f1, f2, f3, K, p, quad_config) for p in rho])
        minus = np.array(
            [_level_integral(f1, f2, f3, K, -p, quad_config) for p in rho]
        )
        even = 0.5 * (plus + minus)
        self.at_zero = complex(plus[0])
        self._re = CubicSpline(rho, even.real)
        self._im = CubicSpline(rho, even.imag)

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return self._re(rho) + 1j * self._im(rho)


def I_r0_from_profile(config: KernelConfig, profile: LevelProfile, r: float) -> complex:
    """I(r, 0) = 2 * integral over [0, 1/2] of chi^2 h(r, rho) E(rho)."""
    width = min(r / 16.0, 1.0 / 64.0)
    panels = int(math.ceil(0.5 / width))
    t, w = leggauss(8)
    edges = np.linspace(0.0, 0.5, panels + 1)
    half = 0.5 * np.diff(edges)
    nodes = (0.5 * (edges[1:] + edges[:-1])[:, None] + half[:, None] * t).ravel()
    weights = (half[:, None] * w).ravel()
    g = chi(nodes) ** 2 * _h_sum(config, r, nodes)
    return complex(2.0 * np.sum(weights * g * profile(nodes)))


def _dual_vectors_on_cone(n: int, c_max: int) -> np.ndarray:
    grid = np.arange(-c_max, c_max + 1)
    cs = np.stack(np.meshgrid(*([grid] * (2 * n)), indexing="ij"), -1).reshape(-1, 2 * n)
    keep = (np.sum(cs[:, :n] * cs[:, n:], axis=1) == 0) & np.any(cs != 0, axis=1)
    return cs[keep]


def correction_C(
    f1: Envelope,
    f2: Envelope,
    f3: Envelope,
    K: Sequence[float],
    r_min_zero: float = 1e-3,
    r_min: float = 1e-2,
    c_max: int = 4,
    r_nodes: int = 16,
    tol: Optional[float] = None,
    config: Optional[KernelConfig] = None,
    quad_config: Optional[QuadConfig] = None,
) -> CorrectionResult:
    """The n = 2 correction C(K) as the sum of three terms.

    (gamma/zeta(2) - zeta'(2)/zeta(2)^2) I(0), then
    (1/zeta(2)) * integral over (0, 1) of (I(r,0) - I(0))/r, then
    (1/zeta(2)) * sum over c != 0 with omega(c) = 0 of the integral of I(r,c)/r.
    The r-integrals stop at r_min with a linear extrapolation below it; the
    c-sum stops at |c|_inf <= c_max with the outer shell as tail estimate.
    """
    K = _check_triple(f1, f2, f3, K)
    if f1.n != 2:
        raise DomainError("the logarithmic correction is defined for n = 2")
    config = config or KernelConfig()
    qc = quad_config or QuadConfig()
    zc = zeta_constants()
    parameters = {
        "r_min_zero": r_min_zero,
        "r_min": r_min,
        "c_max": c_max,
        "r_nodes": r_nodes,
        "sharpness": config.sharpness,
    }
    if any(f.is_zero for f in (f1, f2, f3)):
        return CorrectionResult(
            value_re=0.0, value_im=0.0, tail_estimate=0.0, flagged=False,
            parameters=parameters,
        )
    profile = LevelProfile(f1, f2, f3, K, qc)
    I0 = profile.at_zero
    first = zc.log_constant * I0

    rs, ws = _log_nodes(r_min_zero, 2 * r_nodes)
    diffs = np.array([I_r0_from_profile(config, profile, r) - I0 for r in rs])
    low = I_r0_from_profile(config, profile, r_min_zero) - I0
    second = (np.sum(ws * diffs) + low) / zc.zeta2

    W = GaussianWeight.from_envelopes(f1, f2, f3, K)
    cs = _dual_vectors_on_cone(2, c_max)
    shell = np.max(np.abs(cs), axis=1) == c_max
    rs, ws = _log_nodes(r_min, r_nodes)
    per_c = np.zeros(len(cs), dtype=complex)
    for r, w in zip(rs, ws):
        per_c += w * oscillatory_I_many(config, W, 0.0, float(r), cs, C=1.0)
    below = oscillatory_I_many(config, W, 0.0, r_min, cs, C=1.0)
    third = (np.sum(per_c) + np.sum(below)) / zc.zeta2

    tail = (
        abs(low) / zc.zeta2
        + abs(np.sum(below)) / zc.zeta2
        + abs(np.sum(per_c[shell] + below[shell])) / zc.zeta2
    )
    value = first + second + third
    flagged = tol is not None and tail > tol
    if flagged:
        logger.warning(f"correction C tail estimate {tail:.3e} exceeds {tol:.3e}")
    return CorrectionResult(
        value_re=value.real,
        value_im=value.imag,
        tail_estimate=float(tail),
        flagged=flagged,
        terms={
            "constant": (first.real, first.imag),
            "zero_frequency": (second.real, second.imag),
            "cone": (third.real, third.imag),
        },
        parameters=parameters,
    )


# --- Convergence of normalized lattice sums ---


def _as_triple(f) -> Tuple[Envelope, Envelope, Envelope]:
    if isinstance(f, Envelope):
        return f, f, f
    f1, f2, f3 = f
    return f1, f2, f3


def asymptotics_study(
    n: int,
    L_values: Sequence[int],
    envelopes,
    K_points: Sequence[Sequence[float]],
    kappa: float = 1.0,
    C_hat: Optional[Sequence[complex]] = None,
    quad_config: Optional[QuadConfig] = None,
) -> ConvergenceReport:
    """X^ell defects of sum / Z_n(L) against kappa T, per L.

    K points are rounded to each lattice. For n = 2 the report carries
    G(L) = (sum/Z - T) log L / zeta(2) at K_points[0] as a series; with
    C_hat from correction_C the target adds (zeta(2)/log L) C_hat(K),
    otherwise the defect is measured against kappa T alone and decays
    like 1/log L.
    """
    f1, f2, f3 = _as_triple(envelopes)
    ell = min(f.ell for f in (f1, f2, f3))
    qc = quad_config or QuadConfig()
    sums: List[List[complex]] = []
    targets: List[List[complex]] = []
    weights: List[List[float]] = []
    for L in L_values:
        spec = LatticeSpec(n=n, L=L)
        Z = normalization_Z(n, 1, L)
        row_s, row_t, row_w = [], [], []
        for Kc in K_points:
            K_int = [int(round(k * L)) for k in Kc]
            K = np.asarray(K_int, dtype=float) / L
            total = weighted_resonant_sum(spec, K_int, f1, f2, f3).value
            row_s.append(total / Z)
            row_t.append(kappa * T_apply(f1, f2, f3, K, qc))
            row_w.append(float(japanese(K)) ** ell)
        sums.append(row_s)
        targets.append(row_t)
        weights.append(row_w)
        logger.info(f"asymptotics n={n} L={L}: normalized sum at K0 {row_s[0]:.6g}")
    series: Dict[str, List[float]] = {}
    if n == 2:
        G = [
            [(s - t) * math.log(L) / zeta(2.0) for s, t in zip(rs, rt)]
            for L, rs, rt in zip(L_values, sums, targets)
        ]
        series["G_re"] = [g[0].real for g in G]
        series["G_im"] = [g[0].imag for g in G]
        if C_hat is not None:
            if len(C_hat) != len(K_points):
                raise DomainError(
                    f"{len(C_hat)} correction values for {len(K_points)} K points"
                )
            for i, L in enumerate(L_values):
                targets[i] = [
                    t + zeta(2.0) / math.log(L) * c for t, c in zip(targets[i], C_hat)
                ]
    errors = [
        max(w * abs(s - t) for s, t, w in zip(rs, rt, rw))
        for rs, rt, rw in zip(sums, targets, weights)
    ]
    return ConvergenceReport(
        n=n,
        L_values=list(L_values),
        errors=errors,
        series=series,
        metadata={
            "kappa": kappa,
            "ell": ell,
            "K_points": [list(k) for k in K_points],
            "corrected": n == 2 and C_hat is not None,
        },
    )


class Calibration(BaseModel):
    n: int
    L: int
    normalized_sum: float
    T: float
    kappa: float = Field(description="(sum / Z_n(L)) / T, expected near 1.")
    convention: str = "delta(z1 . z2)"


def calibrate_convention(
    n: int = 3, L: int = 16, f: Optional[Envelope] = None
) -> Calibration:
    """Measures the delta normalization against the lattice at K = 0."""
    f = f or Envelope.gaussian(n)
    spec = LatticeSpec(n=n, L=L)
    total = weighted_resonant_sum(spec, [0] * n, f, f, f).value
    normalized = total.real / normalization_Z(n, 1, L)
    T = T_apply(f, f, f, np.zeros(n)).real
    kappa = normalized / T
    logger.info(f"Convention calibration at n={n}, L={L}: kappa={kappa:.6f}")
    return Calibration(n=n, L=L, normalized_sum=normalized, T=T, kappa=kappa)
