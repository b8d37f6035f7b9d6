# resonant_cr/envelope.py
import logging
import math
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator
from scipy.interpolate import CubicSpline

from resonant_cr.errors import DomainError

logger = logging.getLogger(__name__)

# sup_x |H_k(x)| exp(-x^2/2) <= HERMITE_CONSTANT 2^(k/2) sqrt(k!)
HERMITE_CONSTANT = 1.0865
_SCAN_POINTS = 4096


def japanese(x: np.ndarray) -> np.ndarray:
    """<x> = sqrt(1 + |x|^2) over the last axis."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(1.0 + np.sum(x * x, axis=-1))


def xl_norm(values: np.ndarray, points: np.ndarray, ell: float) -> float:
    """max <x>^ell |f(x)| over sampled points of shape (..., n)."""
    values = np.asarray(values)
    if values.size == 0:
        return 0.0
    return float(np.max(japanese(points) ** ell * np.abs(values)))


class Envelope(BaseModel):
    """A decaying profile f on R^n with declared decay ell and smoothness N.

    Every family is radial about `center`:
    gaussian   amp exp(-|x - x0|^2 / w^2)
    rational   amp (1 + |x - x0|^2 / w^2)^(-ell/2)
    tabulated  cubic-spline radial samples, zero past the last radius
    """

    family: Literal["gaussian", "rational", "tabulated"]
    n: int = Field(ge=1, description="Space dimension.")
    amplitude: Tuple[float, float] = Field(
        (1.0, 0.0), description="Complex amplitude as (real, imag)."
    )
    center: Optional[List[float]] = Field(None, description="Center x0, default 0.")
    width: float = Field(1.0, gt=0, description="Width w.")
    ell: float = Field(12.0, gt=0, description="Declared decay exponent.")
    N: int = Field(2, ge=0, description="Declared smoothness order.")
    radii: Optional[List[float]] = Field(None, description="Tabulated radii.")
    samples_re: Optional[List[float]] = None
    samples_im: Optional[List[float]] = None

    _spline: Optional[Tuple[CubicSpline, CubicSpline]] = PrivateAttr(default=None)
    _bound: float = PrivateAttr(default=0.0)

    @model_validator(mode="after")
    def _check_shape(self):
        if self.center is None:
            self.center = [0.0] * self.n
        if len(self.center) != self.n:
            raise ValueError(f"center has {len(self.center)} entries, n={self.n}")
        if self.family == "tabulated":
            if not self.radii or self.samples_re is None:
                raise ValueError("tabulated envelopes need radii and samples_re")
            if self.samples_im is None:
                self.samples_im = [0.0] * len(self.radii)
            if not (len(self.radii) == len(self.samples_re) == len(self.samples_im)):
                raise ValueError("radii and samples must have equal length")
            r = np.asarray(self.radii, dtype=float)
            self._spline = (
                CubicSpline(r, np.asarray(self.samples_re), bc_type="clamped"),
                CubicSpline(r, np.asarray(self.samples_im), bc_type="clamped"),
            )
        # scan maxima sit on a grid; the margin covers the gaps
        self._bound = 1.01 * self._radial_sup(
            self.ell, lambda rho: np.abs(self.radial(rho))
        )
        self._spot_check()
        return self

    model_config = ConfigDict(arbitrary_types_allowed=True)

    # --- constructors ---

    @classmethod
    def gaussian(
        cls,
        n: int,
        amp: complex = 1.0,
        center=None,
        width: float = 1.0,
        ell: float = 12.0,
        N: int = 2,
    ) -> "Envelope":
        amp = complex(amp)
        return cls(
            family="gaussian",
            n=n,
            amplitude=(amp.real, amp.imag),
            center=None if center is None else [float(c) for c in center],
            width=width,
            ell=ell,
            N=N,
        )

    @classmethod
    def rational(
        cls, n: int, ell: float, amp: complex = 1.0, center=None, width: float = 1.0
    ) -> "Envelope":
        amp = complex(amp)
        return cls(
            family="rational",
            n=n,
            amplitude=(amp.real, amp.imag),
            center=None if center is None else [float(c) for c in center],
            width=width,
            ell=ell,
        )

    @classmethod
    def tabulated(
        cls, n: int, radii, samples, ell: float, center=None
    ) -> "Envelope":
        samples = np.asarray(samples, dtype=complex)
        return cls(
            family="tabulated",
            n=n,
            center=None if center is None else [float(c) for c in center],
            ell=ell,
            N=2,
            radii=[float(r) for r in radii],
            samples_re=samples.real.tolist(),
            samples_im=samples.imag.tolist(),
        )

    # --- evaluation ---

    @property
    def amp(self) -> complex:
        return complex(*self.amplitude)

    @property
    def x0(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    @property
    def beta(self) -> float:
        """Gaussian exponent 1/w^2."""
        return 1.0 / self.width**2

    @property
    def is_radial(self) -> bool:
        return not np.any(self.x0)

    @property
    def is_separable(self) -> bool:
        return self.family == "gaussian"

    def radial(self, rho) -> np.ndarray:
        """Profile as a function of |x - x0|."""
        rho = np.asarray(rho, dtype=float)
        if self.family == "gaussian":
            return self.amp * np.exp(-(rho**2) / self.width**2)
        if self.family == "rational":
            return self.amp * (1.0 + rho**2 / self.width**2) ** (-self.ell / 2.0)
        spline_re, spline_im = self._spline
        r_last = self.radii[-1]
        inside = rho <= r_last
        clipped = np.where(inside, rho, r_last)
        values = spline_re(clipped) + 1j * spline_im(clipped)
        return np.where(inside, values, 0.0)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise DomainError(f"points have dimension {x.shape[-1]}, expected {self.n}")
        rho = np.sqrt(np.sum((x - self.x0) ** 2, axis=-1))
        return self.radial(rho)

    def axis_factor(self, axis: int, t) -> np.ndarray:
        """One-dimensional factor of a separable envelope; axis 0 carries amp."""
        if not self.is_separable:
            raise DomainError(f"{self.family} envelopes are not coordinate-separable")
        t = np.asarray(t, dtype=float)
        values = np.exp(-((t - self.x0[axis]) ** 2) / self.width**2)
        if axis == 0:
            return self.amp * values
        return values.astype(complex)

    # --- norms and bounds ---

    def _radial_sup(self, weight_ell: float, profile) -> float:
        """sup over rho of (1 + (|x0| + rho)^2)^(ell/2) profile(rho)."""
        shift = float(np.linalg.norm(self.x0))
        reach = self.tail_scale() * 40.0 + shift
        rho = np.concatenate(
            [np.linspace(0.0, reach, _SCAN_POINTS), np.geomspace(reach, reach * 1e3, 512)]
        )
        weight = (1.0 + (shift + rho) ** 2) ** (weight_ell / 2.0)
        return float(np.max(weight * profile(rho)))

    def tail_scale(self) -> float:
        if self.family == "tabulated":
            return float(self.radii[-1])
        return self.width

    @property
    def norm_bound(self) -> float:
        """C with |f(x)| <= C <x>^(-ell) for all x."""
        return self._bound

    def derivative_bound(self, k: int) -> float:
        """Bound on sum over |alpha| = k of sup <x>^ell |d^alpha f|."""
        if k == 0:
            return self.norm_bound
        if self.family == "tabulated":
            raise DomainError("derivative bounds are available for gaussian/rational")
        count = math.comb(self.n + k - 1, k)
        w = self.width
        if self.family == "gaussian":
            # product of per-axis Hermite bounds, using prod(alpha_i!) <= k!
            const = (
                HERMITE_CONSTANT ** min(k, self.n)
                * 2 ** (k / 2)
                * math.sqrt(math.factorial(k))
            )

            def profile(rho):
                return np.exp(-(rho**2) / (2 * w**2))

        else:
            const = math.prod(self.ell + 2 * i for i in range(k))

            def profile(rho):
                return (1.0 + rho**2 / w**2) ** (-(self.ell + k) / 2.0)

        return count * abs(self.amp) * const * w ** (-k) * self._radial_sup(
            self.ell, profile
        )

    def xln_norm(self) -> float:
        """Bound on the X^(ell,N) norm using the declared N."""
        return sum(self.derivative_bound(k) for k in range(self.N + 1))

    def _spot_check(self):
        rng = np.random.default_rng(0)
        scale = self.tail_scale() * 6.0 + float(np.linalg.norm(self.x0))
        pts = rng.uniform(-scale, scale, size=(256, self.n))
        lhs = np.abs(self(pts)) * japanese(pts) ** self.ell
        if np.any(lhs > self._bound * (1.0 + 1e-9) + 1e-300):
            worst = float(lhs.max())
            raise DomainError(
                f"envelope exceeds its declared X^ell bound ({worst:.3g} > "
                f"{self._bound:.3g})",
                analysis={"ell": self.ell, "family": self.family},
            )

    # --- transforms ---

    def scaled(self, lam: float) -> "Envelope":
        """x -> f(lam x)."""
        data = self.model_dump()
        data["center"] = (self.x0 / lam).tolist()
        if self.family == "tabulated":
            data["radii"] = (np.asarray(self.radii) / lam).tolist()
        else:
            data["width"] = self.width / lam
        return Envelope(**data)

    def rotated(self, R: np.ndarray) -> "Envelope":
        """x -> f(R^T x) for an orthogonal R, i.e. the center moves to R x0."""
        data = self.model_dump()
        data["center"] = (np.asarray(R) @ self.x0).tolist()
        return Envelope(**data)

    def times(self, alpha: complex) -> "Envelope":
        data = self.model_dump()
        if self.family == "tabulated":
            s = alpha * (np.asarray(self.samples_re) + 1j * np.asarray(self.samples_im))
            data["samples_re"], data["samples_im"] = s.real.tolist(), s.imag.tolist()
        else:
            a = alpha * self.amp
            data["amplitude"] = (a.real, a.imag)
        return Envelope(**data)

    @property
    def is_zero(self) -> bool:
        if self.family == "tabulated":
            return not (np.any(self.samples_re) or np.any(self.samples_im))
        return self.amp == 0


def zero_envelope(n: int) -> Envelope:
    return Envelope.gaussian(n, amp=0.0)
