# resonant_cr/circle.py
import logging
import math
from functools import lru_cache
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from pydantic import BaseModel, Field, model_validator

from resonant_cr import config as settings
from resonant_cr.arithmetic import kloosterman
from resonant_cr.errors import BudgetError, DomainError
from resonant_cr.kernel import KernelConfig, _h_sum, c_L, chi
from resonant_cr.lattice import LatticeSpec

logger = logging.getLogger(__name__)

S_CUTOFF = 40.0
Y_POINTS_PER_R = 128
GL_NODES_PER_PANEL = 8


class GaussianWeight(BaseModel):
    """W(x) = amp exp(-pi x^T A x + 2 pi b^T x + c0) on R^d."""

    d: int = Field(ge=2, description="Dimension, even.")
    A: List[List[float]] = Field(description="Symmetric positive definite matrix.")
    b: List[float] = Field(description="Linear coefficient.")
    c0: float = Field(0.0, description="Constant in the exponent.")
    amplitude: Tuple[float, float] = Field((1.0, 0.0), description="(real, imag)")

    @model_validator(mode="after")
    def _check(self):
        A = np.asarray(self.A, dtype=float)
        if A.shape != (self.d, self.d) or len(self.b) != self.d:
            raise ValueError(f"A and b must have dimension {self.d}")
        if self.d % 2:
            raise ValueError(f"d must be even, got {self.d}")
        if not np.allclose(A, A.T):
            raise ValueError("A must be symmetric")
        if np.linalg.eigvalsh(A).min() <= 0:
            raise ValueError("A must be positive definite")
        return self

    @classmethod
    def from_center(
        cls, d: int, alpha: float, center=None, amp: complex = 1.0
    ) -> "GaussianWeight":
        """amp exp(-pi alpha |x - x0|^2)."""
        return cls.pair_diagonal([alpha] * d, center=center, amp=amp)

    @classmethod
    def pair_diagonal(cls, alphas, center=None, amp: complex = 1.0) -> "GaussianWeight":
        """amp exp(-pi sum_i alpha_i (x_i - x0_i)^2)."""
        alphas = np.asarray(alphas, dtype=float)
        d = len(alphas)
        x0 = np.zeros(d) if center is None else np.asarray(center, dtype=float)
        amp = complex(amp)
        return cls(
            d=d,
            A=np.diag(alphas).tolist(),
            b=(alphas * x0).tolist(),
            c0=float(-math.pi * np.sum(alphas * x0 * x0)),
            amplitude=(amp.real, amp.imag),
        )

    @classmethod
    def from_envelopes(cls, f1, f2, f3, K) -> "GaussianWeight":
        """f1(K+z1) conj(f2)(K+z1+z2) f3(K+z2) for gaussian envelopes, z in R^2n."""
        for f in (f1, f2, f3):
            if f.family != "gaussian":
                raise DomainError("closed-form weights need gaussian envelopes")
        n = f1.n
        K = np.asarray(K, dtype=float)
        b1, b2, b3 = f1.beta, f2.beta, f3.beta
        p1, p2, p3 = K - f1.x0, K - f2.x0, K - f3.x0
        block = np.array([[b1 + b2, b2], [b2, b2 + b3]]) / math.pi
        A = np.kron(block, np.eye(n))
        # exponent -b1|p1+z1|^2 - b2|p2+z1+z2|^2 - b3|p3+z2|^2
        lin = -np.concatenate([b1 * p1 + b2 * p2, b2 * p2 + b3 * p3]) / math.pi
        c0 = -(b1 * p1 @ p1 + b2 * p2 @ p2 + b3 * p3 @ p3)
        amp = f1.amp * np.conj(f2.amp) * f3.amp
        return cls(
            d=2 * n,
            A=A.tolist(),
            b=lin.tolist(),
            c0=float(c0),
            amplitude=(amp.real, amp.imag),
        )

    @property
    def amp(self) -> complex:
        return complex(*self.amplitude)

    @property
    def A_arr(self) -> np.ndarray:
        return np.asarray(self.A, dtype=float)

    @property
    def b_arr(self) -> np.ndarray:
        return np.asarray(self.b, dtype=float)

    @property
    def mean(self) -> np.ndarray:
        return np.linalg.solve(self.A_arr, self.b_arr)

    @property
    def alpha_min(self) -> float:
        return float(np.linalg.eigvalsh(self.A_arr).min())

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        quad_form = np.einsum("...i,ij,...j->...", x, self.A_arr, x)
        return self.amp * np.exp(
            -math.pi * quad_form + 2 * math.pi * (x @ self.b_arr) + self.c0
        )

    def extent(self, decades: float = 16.0) -> float:
        """Radius about the mean beyond which W drops below 10^-decades."""
        return float(
            np.linalg.norm(self.mean)
            + math.sqrt(decades * math.log(10) / (math.pi * self.alpha_min))
        )

    def pair_blocks(self) -> Optional[List[Tuple[np.ndarray, np.ndarray]]]:
        """2x2 blocks (A_i, b_i) on coordinates (i, i + d/2) if W factors."""
        h = self.d // 2
        A = self.A_arr
        pair_of = np.array([i % h for i in range(self.d)])
        coupled = pair_of[:, None] != pair_of[None, :]
        if np.any(A[coupled] != 0.0):
            return None
        blocks = []
        for i in range(h):
            idx = [i, i + h]
            blocks.append((A[np.ix_(idx, idx)], self.b_arr[idx]))
        return blocks

    def prefactor(self) -> complex:
        return self.amp * math.exp(self.c0)

    def is_zero(self) -> bool:
        return self.amp == 0


def pairing_matrix(d: int) -> np.ndarray:
    """P with x^T P x = x_e . x_o, pairing i with i + d/2."""
    h = d // 2
    P = np.zeros((d, d))
    for i in range(h):
        P[i, i + h] = P[i + h, i] = 0.5
    return P


def _gaussian_quadratic_fourier(
    A: np.ndarray, b: np.ndarray, s: np.ndarray, xi: np.ndarray
) -> np.ndarray:
    """Integral of exp(-pi x^T A x + 2 pi b^T x) e(s Q(x) - xi . x) dx.

    Shape (len(s), len(xi)). The branch of each (1 - 2 i s lambda)^(-1/2)
    is principal, continuous from s = 0.
    """
    d = A.shape[0]
    evals, evecs = np.linalg.eigh(A)
    A_inv_half = evecs @ np.diag(evals**-0.5) @ evecs.T
    lam, V = np.linalg.eigh(A_inv_half @ pairing_matrix(d) @ A_inv_half)
    B = A_inv_half @ V
    beta = (b[None, :] - 1j * np.atleast_2d(xi)) @ B
    denom = 1.0 - 2j * np.outer(s, lam)
    pref = np.prod(np.sqrt(denom), axis=1) ** -1 / math.sqrt(np.prod(evals))
    expo = math.pi * (beta**2) @ (1.0 / denom).T
    return pref[:, None] * np.exp(expo.T)


def _s_grid(r: float, alpha_min: float) -> Tuple[np.ndarray, float]:
    """Uniform s nodes for the trapezoid rule; spacing set by the level decay."""
    ds = min(0.25, 1.0 / (1.0 + 5.0 / alpha_min))
    K = int(math.ceil(S_CUTOFF / (r * ds)))
    return ds * np.arange(-K, K + 1), ds


@lru_cache(maxsize=64)
def _g_hat_cached(
    sharpness: float, r: float, C: float, ds: float, K: int
) -> np.ndarray:
    kernel = KernelConfig(sharpness=sharpness)
    dy = r / Y_POINTS_PER_R
    m = int(math.ceil(0.5 / dy))
    y = dy * np.arange(m + 1)
    y[-1] = min(y[-1], 0.5)
    g = chi(y) ** 2 * _h_sum(kernel, r, y) / C
    weights = np.full(m + 1, 2.0 * dy)
    weights[0] = dy
    wg = weights * g
    # even in s: fill s >= 0 in blocks, then mirror
    half = np.empty(K + 1)
    s_pos = ds * np.arange(K + 1)
    block = max(1, 2_000_000 // (m + 1))
    for start in range(0, K + 1, block):
        s_blk = s_pos[start : start + block]
        half[start : start + block] = np.cos(2 * math.pi * np.outer(s_blk, y)) @ wg
    return np.concatenate([half[:0:-1], half])


def g_hat(config: KernelConfig, r: float, s: np.ndarray, C: float) -> np.ndarray:
    """Fourier transform of chi(y)^2 h(r, y) / C on a uniform symmetric s grid."""
    ds = float(s[1] - s[0]) if len(s) > 1 else 1.0
    K = (len(s) - 1) // 2
    return _g_hat_cached(config.sharpness, float(r), float(C), ds, K)


def oscillatory_I(
    config: KernelConfig,
    W: GaussianWeight,
    mu: float,
    r: float,
    c: Sequence[int],
    C: Optional[float] = None,
) -> complex:
    """Integral of W(x) chi(Q_mu(x)) h_chi(r, Q_mu(x)) e(-c.x/r) dx.

    Gaussian weights go through Fourier inversion in the level variable s:
    I = integral over s of g_hat(s) e(-s mu) W_hat_Q(s, c/r).
    """
    return complex(oscillatory_I_many(config, W, mu, r, [c], C)[0])


def oscillatory_I_many(
    config: KernelConfig,
    W: GaussianWeight,
    mu: float,
    r: float,
    cs: Sequence[Sequence[int]],
    C: Optional[float] = None,
) -> np.ndarray:
    """oscillatory_I for a batch of dual vectors sharing one s grid."""
    if not 0.0 < r < 1.0:
        raise DomainError(f"r must lie in (0, 1), got {r}")
    cs = np.asarray(cs, dtype=float).reshape(-1, W.d)
    if W.is_zero():
        return np.zeros(len(cs), dtype=complex)
    C = config.C_L if C is None else C
    s, ds = _s_grid(r, W.alpha_min)
    weight = ds * g_hat(config, r, s, C) * np.exp(-2j * math.pi * s * mu)
    out = np.empty(len(cs), dtype=complex)
    block = max(1, 4_000_000 // len(s))
    for start in range(0, len(cs), block):
        xi = cs[start : start + block] / r
        W_hat = _gaussian_quadratic_fourier(W.A_arr, W.b_arr, s, xi)
        out[start : start + block] = weight @ W_hat
    return W.prefactor() * out


def oscillatory_I_tensor(
    config: KernelConfig,
    W: Callable[[np.ndarray], np.ndarray],
    d: int,
    mu: float,
    r: float,
    c: Sequence[int],
    half_width: float,
    C: Optional[float] = None,
) -> complex:
    """Tensor Gauss-Legendre evaluation of the same integral for any weight.

    Panels are no wider than r / ((4|c|_inf + 1)(1 + 2 half_width)) per
    axis on the box [-half_width, half_width]^d.
    """
    if not 0.0 < r < 1.0:
        raise DomainError(f"r must lie in (0, 1), got {r}")
    C = config.C_L if C is None else C
    c = np.asarray(c, dtype=float)
    c_inf = float(np.max(np.abs(c))) if c.size else 0.0
    width = r / ((4.0 * c_inf + 1.0) * (1.0 + 2.0 * half_width))
    panels = int(math.ceil(2.0 * half_width / width))
    per_axis = panels * GL_NODES_PER_PANEL
    total = float(per_axis) ** d
    if total > settings.QUADRATURE_NODE_BUDGET:
        raise BudgetError(
            "tensor quadrature for the oscillatory integral",
            estimate=total,
            budget=settings.QUADRATURE_NODE_BUDGET,
            analysis={"per_axis": per_axis, "d": d},
        )
    t, w = leggauss(GL_NODES_PER_PANEL)
    edges = np.linspace(-half_width, half_width, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    P = pairing_matrix(d)
    acc = []
    rest = np.stack(np.meshgrid(*([nodes] * (d - 1)), indexing="ij"), axis=-1)
    rest = rest.reshape(-1, d - 1)
    rest_w = np.prod(
        np.stack(np.meshgrid(*([weights] * (d - 1)), indexing="ij"), axis=-1), axis=-1
    ).ravel()
    for x0, w0 in zip(nodes, weights):
        x = np.concatenate([np.full((len(rest), 1), x0), rest], axis=1)
        y = np.einsum("ij,jk,ik->i", x, P, x) - mu
        g = chi(y) ** 2 * _h_sum(config, r, y) / C
        vals = W(x) * g * np.exp(-2j * math.pi * (x @ c) / r)
        acc.append(w0 * np.sum(rest_w * vals))
    return complex(sum(acc))


def oscillatory_I_monte_carlo(
    config: KernelConfig,
    W: GaussianWeight,
    mu: float,
    r: float,
    c: Sequence[int],
    samples: int = 200_000,
    seed: int = 0,
    C: Optional[float] = None,
) -> Tuple[complex, complex]:
    """Importance-sampled estimate with W as the sampling density.

    Returns the estimate and its standard error (real and imaginary parts).
    """
    C = config.C_L if C is None else C
    rng = np.random.default_rng(seed)
    A = W.A_arr
    cov = np.linalg.inv(2 * math.pi * A)
    x = rng.multivariate_normal(W.mean, cov, size=samples)
    m = W.mean
    scale = (
        W.prefactor()
        * math.exp(math.pi * m @ A @ m)
        / math.sqrt(np.linalg.det(A))
    )
    P = pairing_matrix(W.d)
    y = np.einsum("ij,jk,ik->i", x, P, x) - mu
    g = chi(y) ** 2 * _h_sum(config, r, y) / C
    vals = scale * g * np.exp(-2j * math.pi * (x @ np.asarray(c, dtype=float)) / r)
    mean = complex(vals.mean())
    se = complex(vals.real.std(ddof=1), vals.imag.std(ddof=1)) / math.sqrt(samples)
    return mean, se


# --- Reconstruction ---


class ReconstructionResult(BaseModel):
    value_re: float
    value_im: float
    L: int
    mu_tilde: int
    q_max: int
    c_max: int
    shell_estimate: float = Field(
        description="Relative change from dropping the outer |c|_inf = c_max shell."
    )
    converged: bool
    rows: List[Dict[str, Any]] = Field(
        default_factory=list,
        description="(q, omega class, |S|, |I|, partial sum) diagnostics.",
    )

    @property
    def value(self) -> complex:
        return complex(self.value_re, self.value_im)


DIAGNOSTIC_COLUMNS = ["q", "omega_class", "abs_S", "abs_I", "partial_re", "partial_im"]


def default_c_max(W: GaussianWeight) -> int:
    return max(8, math.ceil(8 * math.sqrt(2.0 / W.alpha_min)))


def _cyclic_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    q = a.shape[1]
    out = np.zeros_like(a)
    for w in range(q):
        out += a[:, w : w + 1] * np.roll(b, w, axis=1)
    return out


def _class_sums_pairwise(
    W: GaussianWeight, s: np.ndarray, r: float, q: int, c_max: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Per s node, sums of W_hat_Q(s, c/r) over c grouped by omega(c) mod q.

    Returns the full box and the box without its outer shell.
    """
    grid = np.arange(-c_max, c_max + 1)
    cu, cv = np.meshgrid(grid, grid, indexing="ij")
    cu, cv = cu.ravel(), cv.ravel()
    inner = (np.abs(cu) < c_max) & (np.abs(cv) < c_max)
    onehot = np.zeros((len(cu), q))
    onehot[np.arange(len(cu)), (cu * cv) % q] = 1.0
    xi = np.stack([cu, cv], axis=1) / r
    full = inner_only = None
    for A2, b2 in W.pair_blocks():
        table = _gaussian_quadratic_fourier(A2, b2, s, xi)
        g_full = table @ onehot
        g_inner = (table * inner[None, :]) @ onehot
        if full is None:
            full, inner_only = g_full, g_inner
        else:
            full = _cyclic_convolve(full, g_full)
            inner_only = _cyclic_convolve(inner_only, g_inner)
    return full, inner_only


def _class_sums_generic(
    W: GaussianWeight, s: np.ndarray, r: float, q: int, c_max: int
) -> Tuple[np.ndarray, np.ndarray]:
    d = W.d
    count = (2 * c_max + 1) ** d
    cost = float(count) * len(s)
    if cost > settings.QUADRATURE_NODE_BUDGET:
        raise BudgetError(
            "non-separable reconstruction over the dual box",
            estimate=cost,
            budget=settings.QUADRATURE_NODE_BUDGET,
        )
    grid = np.arange(-c_max, c_max + 1)
    cs = np.stack(np.meshgrid(*([grid] * d), indexing="ij"), axis=-1).reshape(-1, d)
    h = d // 2
    omega = np.sum(cs[:, :h] * cs[:, h:], axis=1) % q
    inner = np.all(np.abs(cs) < c_max, axis=1)
    full = np.zeros((len(s), q), dtype=complex)
    inner_only = np.zeros((len(s), q), dtype=complex)
    for start in range(0, len(cs), 4096):
        block = cs[start : start + 4096]
        table = _gaussian_quadratic_fourier(W.A_arr, W.b_arr, s, block / r)
        onehot = np.zeros((len(block), q))
        onehot[np.arange(len(block)), omega[start : start + 4096]] = 1.0
        full += table @ onehot
        inner_only += (table * inner[start : start + 4096][None, :]) @ onehot
    return full, inner_only


def circle_reconstruction(
    config: KernelConfig,
    W: GaussianWeight,
    lattice: LatticeSpec,
    q_max: Optional[int] = None,
    c_max: Optional[int] = None,
    shell_tol: float = 1e-3,
) -> ReconstructionResult:
    """L^(d-2) sum_q sum_c S(q,c) q^-d I(r,c) with r = q/L.

    The dual vectors c enter only through omega(c) mod q in S(q,c), so the
    c sum is done per residue class. A single 1/C_L sits inside h_chi.
    """
    L = lattice.L
    d = lattice.d
    if W.d != d:
        raise DomainError(f"weight dimension {W.d} does not match d={d}")
    mu_tilde = lattice.mu_tilde
    mu = mu_tilde / L**2
    q_max = L - 1 if q_max is None else min(q_max, L - 1)
    c_max = default_c_max(W) if c_max is None else c_max
    rows: List[Dict[str, Any]] = []
    if W.is_zero() or q_max < 1:
        return ReconstructionResult(
            value_re=0.0,
            value_im=0.0,
            L=L,
            mu_tilde=mu_tilde,
            q_max=q_max,
            c_max=c_max,
            shell_estimate=0.0,
            converged=True,
        )
    C = c_L(config, L)
    separable = W.pair_blocks() is not None
    total = 0j
    total_inner = 0j
    for q in range(1, q_max + 1):
        r = q / L
        s, ds = _s_grid(r, W.alpha_min)
        gh = g_hat(config, r, s, C)
        weight = ds * gh * np.exp(-2j * math.pi * s * mu)
        if separable:
            full, inner = _class_sums_pairwise(W, s, r, q, c_max)
        else:
            full, inner = _class_sums_generic(W, s, r, q, c_max)
        J = W.prefactor() * (weight @ full)
        J_inner = W.prefactor() * (weight @ inner)
        S = np.array(
            [float(q) ** (d // 2) * kloosterman(mu_tilde, w, q) for w in range(q)]
        )
        scale = float(L) ** (d - 2) / float(q) ** d
        total += scale * np.sum(S * J)
        total_inner += scale * np.sum(S * J_inner)
        for w in range(q):
            rows.append(
                {
                    "q": q,
                    "omega_class": w,
                    "abs_S": abs(S[w]),
                    "abs_I": abs(J[w]),
                    "partial_re": total.real,
                    "partial_im": total.imag,
                }
            )
        logger.debug(f"q={q}: partial reconstruction {total}")
    shell = abs(total - total_inner) / max(abs(total), 1e-300)
    converged = shell <= shell_tol and q_max == L - 1
    if not converged:
        logger.warning(
            f"Reconstruction not converged: shell {shell:.2e}, q_max={q_max}, L={L}"
        )
    return ReconstructionResult(
        value_re=total.real,
        value_im=total.imag,
        L=L,
        mu_tilde=mu_tilde,
        q_max=q_max,
        c_max=c_max,
        shell_estimate=shell,
        converged=converged,
        rows=rows,
    )


# --- Direct lattice sums ---


def direct_lattice_sum(
    W: GaussianWeight, L: int, mu_tilde: int, radius: Optional[int] = None
) -> complex:
    """Sum of W(z/L) over z in Z^d with z_e . z_o = mu_tilde, |z|_inf <= radius.

    Pair-separable weights use per-pair histograms of the products a*b
    convolved across pairs; others fall back to a budgeted box scan.
    """
    R = 8 * L if radius is None else radius
    blocks = W.pair_blocks()
    if blocks is None:
        return _direct_scan(W, L, mu_tilde, min(R, math.ceil(L * W.extent())))
    a = np.arange(-R, R + 1)
    prod = np.multiply.outer(a, a).ravel() + R * R
    hist = None
    for A2, b2 in blocks:
        x = np.stack(np.meshgrid(a / L, a / L, indexing="ij"), axis=-1).reshape(-1, 2)
        w = np.exp(
            -math.pi * np.einsum("ij,jk,ik->i", x, A2, x) + 2 * math.pi * (x @ b2)
        )
        h = np.bincount(prod, weights=w, minlength=2 * R * R + 1)
        hist = h if hist is None else np.convolve(hist, h)
    offset = len(blocks) * R * R
    idx = mu_tilde + offset
    if idx < 0 or idx >= len(hist):
        return 0j
    return complex(W.prefactor() * hist[idx])


def _direct_scan(W: GaussianWeight, L: int, mu_tilde: int, R: int) -> complex:
    d = W.d
    h = d // 2
    cost = float(2 * R + 1) ** d
    if cost > settings.ENUMERATION_BUDGET:
        raise BudgetError(
            "direct lattice scan", estimate=cost, budget=settings.ENUMERATION_BUDGET
        )
    a = np.arange(-R, R + 1)
    halves = np.stack(np.meshgrid(*([a] * h), indexing="ij"), axis=-1).reshape(-1, h)
    total = 0j
    for ze in halves:
        zo = halves[(halves @ ze) == mu_tilde]
        if len(zo) == 0:
            continue
        z = np.concatenate([np.broadcast_to(ze, zo.shape), zo], axis=1)
        total += complex(np.sum(W(z / L)))
    return total
