# resonant_cr/dynamics.py
import logging
import math
from typing import Any, Callable, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.interpolate import CubicSpline, RegularGridInterpolator

from resonant_cr import config as settings
from resonant_cr.cr_operator import QuadConfig, level_integral_profiles
from resonant_cr.data_manager import TrajectoryWriter
from resonant_cr.envelope import Envelope, xl_norm
from resonant_cr.errors import AccuracyError, BudgetError, ConfigError, DomainError
from resonant_cr.lattice import CouplingTable, FrequencyGrid, normalization_Z
from resonant_cr.reports import ConvergenceReport, rate_function
from resonant_cr.zeta import zeta

logger = logging.getLogger(__name__)

DIAGNOSTIC_COLUMNS = ["time", "mass", "momentum", "energy", "xl_norm"]
PAD_BAND_THRESHOLD = 1e-6


def e(x):
    """e(x) = exp(2 pi i x)."""
    return np.exp(2j * math.pi * x)


# --- Torus states ---


class FourierState(BaseModel):
    """Interaction-picture amplitudes a_K = e(-|K|^2 t) u_K on a truncated grid."""

    grid: FrequencyGrid
    amplitudes: np.ndarray = Field(description="Complex array of shape grid.shape.")
    t: float = 0.0
    eps: float = Field(1.0, ge=0, description="Nonlinearity amplitude.")

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def _check(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != self.grid.shape:
            raise ConfigError(
                f"amplitudes have shape {self.amplitudes.shape}, "
                f"grid expects {self.grid.shape}"
            )
        return self

    @classmethod
    def from_profile(
        cls, grid: FrequencyGrid, f: Callable, eps: float = 1.0, t: float = 0.0
    ) -> "FourierState":
        """Samples u_K(0) = g0(K) on the grid."""
        values = np.asarray(f(grid.frequencies()), dtype=complex)
        return cls(grid=grid, amplitudes=values.reshape(grid.shape), t=t, eps=eps)

    def with_amplitudes(self, amplitudes: np.ndarray, t: float) -> "FourierState":
        return FourierState(grid=self.grid, amplitudes=amplitudes, t=t, eps=self.eps)

    def k_squared(self) -> np.ndarray:
        K = self.grid.frequencies()
        return np.sum(K * K, axis=1).reshape(self.grid.shape)

    def mass(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def momentum(self) -> np.ndarray:
        w = np.abs(self.amplitudes.ravel()) ** 2
        return self.grid.frequencies().T @ w

    def kinetic_energy(self) -> float:
        return float(np.sum(self.k_squared() * np.abs(self.amplitudes) ** 2))

    def xl_norm(self, ell: float) -> float:
        return xl_norm(self.amplitudes.ravel(), self.grid.frequencies(), ell)


def _pad_positions(grid: FrequencyGrid, M: int):
    pos = np.arange(-grid.Lambda, grid.Lambda + 1) % M
    return np.ix_(*([pos] * grid.n))


def _cubic_convolution(
    grid: FrequencyGrid, u_hat: np.ndarray, pad_factor: int
) -> Tuple[np.ndarray, float]:
    """sum over m1 - m2 + m3 = m of u1 conj(u2) u3 for m on the grid.

    Zero-padding to pad_factor * side per axis keeps the cubic product free
    of aliasing. Also returns the energy fraction outside the grid.
    """
    M = pad_factor * grid.side
    idx = _pad_positions(grid, M)
    U = np.zeros((M,) * grid.n, dtype=complex)
    U[idx] = u_hat
    v = np.fft.ifftn(U) * M**grid.n
    full = np.fft.fftn(np.abs(v) ** 2 * v) / M**grid.n
    kept = full[idx]
    total = float(np.sum(np.abs(full) ** 2))
    outside = 0.0 if total == 0.0 else 1.0 - float(np.sum(np.abs(kept) ** 2)) / total
    return kept, max(outside, 0.0)


def nls_rhs(state: FourierState, pad_factor: int = 2) -> np.ndarray:
    """d a_K / dt = i eps^2 L^(-2n) sum_(S=0) a1 conj(a2) a3 e(Omega t).

    Evaluated as the padded transform of |u|^2 u with u_K = e(|K|^2 t) a_K.
    """
    if pad_factor < 2:
        raise ConfigError(f"pad factor {pad_factor} aliases the cubic product")
    if state.eps == 0.0:
        return np.zeros_like(state.amplitudes)
    grid = state.grid
    phase = e(state.k_squared() * state.t)
    conv, outside = _cubic_convolution(grid, phase * state.amplitudes, pad_factor)
    if outside > PAD_BAND_THRESHOLD:
        logger.debug(f"pad band holds {outside:.2e} of the cubic product energy")
    return 1j * state.eps**2 * grid.L ** (-2 * grid.n) * np.conj(phase) * conv


def pad_band_fraction(state: FourierState, pad_factor: int = 2) -> float:
    """Energy fraction of |u|^2 u falling outside the retained grid."""
    phase = e(state.k_squared() * state.t)
    return _cubic_convolution(state.grid, phase * state.amplitudes, pad_factor)[1]


def triple_loop_rhs(
    state: FourierState, part: Literal["full", "resonant", "nonresonant"] = "full"
) -> np.ndarray:
    """Direct evaluation of the interaction sum, optionally split by Omega = 0."""
    grid = state.grid
    G = grid.size
    cost = float(G) ** 3
    if cost > settings.TRIPLE_LOOP_BUDGET:
        raise BudgetError(
            "triple loop", estimate=cost, budget=settings.TRIPLE_LOOP_BUDGET
        )
    modes = grid.modes()
    sq = np.sum(modes * modes, axis=1)
    a = state.amplitudes.ravel()
    ii, jj = np.meshgrid(np.arange(G), np.arange(G), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    out = np.zeros(G, dtype=complex)
    for idx, base in enumerate(modes):
        m2 = modes[ii] + modes[jj] - base
        on = grid.contains(m2)
        i1, i3 = ii[on], jj[on]
        i2 = grid.flat_index(m2[on])
        omega_int = sq[i1] - sq[i2] + sq[i3] - sq[idx]
        if part == "resonant":
            keep = omega_int == 0
        elif part == "nonresonant":
            keep = omega_int != 0
        else:
            keep = np.ones(len(i1), dtype=bool)
        i1, i2, i3, omega_int = i1[keep], i2[keep], i3[keep], omega_int[keep]
        terms = a[i1] * np.conj(a[i2]) * a[i3] * e(omega_int * state.t / grid.L**2)
        out[idx] = np.sum(terms)
    return 1j * state.eps**2 * grid.L ** (-2 * grid.n) * out.reshape(grid.shape)


def resonant_rhs(state: FourierState, table: CouplingTable) -> np.ndarray:
    """d a_K / dt = i eps^2 L^(-2n) sum over resonant triples of a1 conj(a2) a3."""
    if table.grid != state.grid or table.mu_tilde != 0:
        raise ConfigError(
            "coupling table was built for a different grid or level",
            analysis={"table": table.grid.model_dump(), "state": state.grid.model_dump()},
        )
    if state.eps == 0.0:
        return np.zeros_like(state.amplitudes)
    a = state.amplitudes.ravel()
    prod = a[table.k1] * np.conj(a[table.k2]) * a[table.k3]
    G = state.grid.size
    out = np.bincount(table.k, weights=prod.real, minlength=G) + 1j * np.bincount(
        table.k, weights=prod.imag, minlength=G
    )
    L, n = state.grid.L, state.grid.n
    return 1j * state.eps**2 * L ** (-2 * n) * out.reshape(state.grid.shape)


def normal_form_H3(state: FourierState, ell: float = 0.0) -> Tuple[np.ndarray, float]:
    """H_K = -L^(-2n) sum over S=0, Omega != 0 of u1 conj(u2) u3 / (2 pi Omega).

    Returns the field on the grid and its X^ell norm.
    """
    grid = state.grid
    G = grid.size
    cost = float(G) ** 3
    if cost > settings.TRIPLE_LOOP_BUDGET:
        raise BudgetError(
            "normal form triple loop", estimate=cost, budget=settings.TRIPLE_LOOP_BUDGET
        )
    modes = grid.modes()
    sq = np.sum(modes * modes, axis=1)
    u = state.amplitudes.ravel()
    ii, jj = np.meshgrid(np.arange(G), np.arange(G), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    out = np.zeros(G, dtype=complex)
    for idx, base in enumerate(modes):
        m2 = modes[ii] + modes[jj] - base
        on = grid.contains(m2)
        i1, i3 = ii[on], jj[on]
        i2 = grid.flat_index(m2[on])
        omega = (sq[i1] - sq[i2] + sq[i3] - sq[idx]) / grid.L**2
        nz = omega != 0
        out[idx] = np.sum(
            u[i1[nz]] * np.conj(u[i2[nz]]) * u[i3[nz]] / (2 * math.pi * omega[nz])
        )
    field = -(grid.L ** (-2 * grid.n)) * out
    return field.reshape(grid.shape), xl_norm(field, grid.frequencies(), ell)


# --- Continuum states ---


def sphere_area(n: int) -> float:
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


class CRState(BaseModel):
    """Samples of g(tau, xi) for the continuous resonant equation.

    radial: g(|xi|) on `nodes` radii, cubic interpolation.
    tensor: g on the product grid nodes^n, linear interpolation.
    """

    n: int = Field(ge=2)
    representation: Literal["radial", "tensor"] = "radial"
    nodes: List[float] = Field(description="Radii or axis points.")
    values: np.ndarray
    tau: float = 0.0
    ell: float = Field(12.0, description="Declared decay exponent.")
    L: Optional[int] = Field(None, description="Lattice scale for the modified mode.")
    modified: bool = Field(False, description="Add the n = 2 logarithmic correction.")
    c_hat: float = Field(0.0, description="Fitted ratio C / T for the modified mode.")
    decay_floor: float = 1e-8

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def _check(self):
        self.values = np.asarray(self.values, dtype=complex)
        k = len(self.nodes)
        shape = (k,) if self.representation == "radial" else (k,) * self.n
        if self.values.shape != shape:
            raise ConfigError(f"values have shape {self.values.shape}, expected {shape}")
        if self.modified and (self.n != 2 or not self.L or self.L < 2):
            raise ConfigError("the modified mode needs n = 2 and a lattice scale L >= 2")
        return self

    @classmethod
    def from_envelope(
        cls,
        f: Envelope,
        representation: Literal["radial", "tensor"] = "radial",
        samples: int = 512,
        radius: float = 12.0,
        **kwargs,
    ) -> "CRState":
        if representation == "radial":
            if not f.is_radial:
                raise DomainError("the radial representation needs a centered envelope")
            nodes = np.linspace(0.0, radius, samples)
            values = f.radial(nodes)
        else:
            nodes = np.linspace(-radius, radius, samples)
            mesh = np.stack(np.meshgrid(*([nodes] * f.n), indexing="ij"), axis=-1)
            values = f(mesh)
        return cls(
            n=f.n,
            representation=representation,
            nodes=nodes.tolist(),
            values=values,
            ell=f.ell,
            **kwargs,
        )

    def with_values(self, values: np.ndarray, tau: float) -> "CRState":
        return self.model_copy(update={"values": np.asarray(values), "tau": tau})

    @property
    def node_array(self) -> np.ndarray:
        return np.asarray(self.nodes, dtype=float)

    @property
    def decay_flagged(self) -> bool:
        """Boundary samples above decay_floor times the peak."""
        peak = float(np.max(np.abs(self.values))) if self.values.size else 0.0
        if peak == 0.0:
            return False
        if self.representation == "radial":
            edge = abs(self.values[-1])
        else:
            inner = tuple(slice(1, -1) for _ in range(self.n))
            mask = np.ones(self.values.shape, dtype=bool)
            mask[inner] = False
            edge = float(np.max(np.abs(self.values[mask])))
        return edge > self.decay_floor * peak

    def mass(self) -> float:
        x = self.node_array
        if self.representation == "radial":
            dens = sphere_area(self.n) * x ** (self.n - 1) * np.abs(self.values) ** 2
            return float(CubicSpline(x, dens).integrate(x[0], x[-1]))
        h = x[1] - x[0]
        return float(np.sum(np.abs(self.values) ** 2) * h**self.n)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """g at arbitrary points of shape (..., n), zero outside the samples."""
        points = np.asarray(points, dtype=float)
        x = self.node_array
        if self.representation == "radial":
            rho = np.sqrt(np.sum(points**2, axis=-1))
            inside = rho <= x[-1]
            re = CubicSpline(x, self.values.real)(np.minimum(rho, x[-1]))
            im = CubicSpline(x, self.values.imag)(np.minimum(rho, x[-1]))
            return np.where(inside, re + 1j * im, 0.0)
        grids = (x,) * self.n
        re = RegularGridInterpolator(grids, self.values.real, bounds_error=False, fill_value=0.0)
        im = RegularGridInterpolator(grids, self.values.imag, bounds_error=False, fill_value=0.0)
        return re(points) + 1j * im(points)

    def xl_norm(self, ell: float) -> float:
        x = self.node_array
        if self.representation == "radial":
            pts = np.stack([x] + [np.zeros_like(x)] * (self.n - 1), axis=1)
        else:
            pts = np.stack(np.meshgrid(*([x] * self.n), indexing="ij"), axis=-1)
        return xl_norm(self.values, pts, ell)


DEFAULT_CR_QUAD = QuadConfig(angles=32, radial_panels=16, inner_nodes=48)


def _support_radius(state: CRState, floor: float = 1e-14) -> float:
    x = state.node_array
    mag = np.abs(state.values)
    if state.representation == "radial":
        live = np.nonzero(mag > floor * mag.max())[0]
        return float(x[min(live[-1] + 2, len(x) - 1)])
    return float(np.max(np.abs(x)) * math.sqrt(state.n))


def cr_rhs(
    state: CRState,
    quad_config: Optional[QuadConfig] = None,
    rhs_nodes: int = 32,
) -> np.ndarray:
    """d g / d tau = i T(g, g, g) on the sample nodes.

    Radial states evaluate T on rhs_nodes radii (denser near 0) and
    interpolate; resonant rectangles keep T supported in |xi| <= sqrt(2) R.
    """
    if not np.any(state.values):
        return np.zeros_like(state.values)
    qc = quad_config or DEFAULT_CR_QUAD
    R = _support_radius(state)
    if state.representation == "radial":
        x = state.node_array
        keep = x <= R
        profile = Envelope.tabulated(state.n, x[keep], state.values[keep], ell=state.ell)
        top = min(math.sqrt(2.0) * R, x[-1])
        rhos = top * (np.arange(rhs_nodes) / (rhs_nodes - 1)) ** 2
        T = np.empty(rhs_nodes, dtype=complex)
        for i, rho in enumerate(rhos):
            K = np.zeros(state.n)
            K[0] = rho
            T[i] = level_integral_profiles(
                (profile, profile, profile), K, 0.0, rho + R, qc
            )
        inside = x <= top
        out = np.zeros_like(state.values)
        clipped = x[inside]
        out[inside] = CubicSpline(rhos, T.real)(clipped) + 1j * CubicSpline(
            rhos, T.imag
        )(clipped)
    else:

        def profile(points):
            return state.evaluate(points)

        mesh = np.stack(np.meshgrid(*([state.node_array] * state.n), indexing="ij"), -1)
        flat = mesh.reshape(-1, state.n)
        out = np.array(
            [
                level_integral_profiles(
                    (profile, profile, profile),
                    K,
                    0.0,
                    float(np.linalg.norm(K)) + R,
                    qc,
                )
                for K in flat
            ]
        ).reshape(state.values.shape)
    if state.modified:
        out = out * (1.0 + zeta(2.0) * state.c_hat / math.log(state.L))
    return 1j * out


# --- Time stepping ---


class EvolutionConfig(BaseModel):
    scheme: Literal["rk4", "strang"] = Field(
        "rk4", description="Integrating-factor RK4 or Strang splitting."
    )
    dt: float = Field(gt=0, description="Step size; the sign follows the direction.")
    t_final: float = Field(description="Final time, before the start for reversal.")
    pad_factor: int = Field(2, ge=2, description="Zero-padding per axis.")
    check_every: int = Field(1, ge=1, description="Steps between diagnostics.")
    snapshot_every: int = Field(1, ge=1, description="Steps between snapshots.")
    blowup_factor: float = Field(10.0, gt=1)
    cfl_limit: float = Field(0.1, gt=0)
    mass_tolerance: float = Field(1e-6, gt=0)
    ell: float = Field(12.0, description="Weight of the logged X^ell norm.")
    cr_nodes: int = Field(
        32, ge=4, description="Radii where the radial CR rhs is evaluated before interpolation."
    )


class Trajectory(BaseModel):
    system: Literal["nls", "resonant", "cr"]
    times: List[float] = Field(default_factory=list)
    snapshots: List[np.ndarray] = Field(default_factory=list)
    diagnostics: List[Dict[str, float]] = Field(default_factory=list)
    metadata: Dict[str, Any] = Field(default_factory=dict)

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @property
    def final(self) -> np.ndarray:
        return self.snapshots[-1]

    def mass_drift(self) -> float:
        masses = [row["mass"] for row in self.diagnostics]
        if not masses or masses[0] == 0.0:
            return 0.0
        return max(abs(m - masses[0]) for m in masses) / masses[0]


def _rk4_step(f, t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = f(t, y)
    k2 = f(t + h / 2, y + h / 2 * k1)
    k3 = f(t + h / 2, y + h / 2 * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _strang_step(state: FourierState, pad_factor: int, t: float, a: np.ndarray, h: float):
    """Linear half step, exact pointwise cubic flow, linear half step."""
    grid = state.grid
    M = pad_factor * grid.side
    idx = _pad_positions(grid, M)
    phase = e(state.k_squared() * (t + h / 2))
    U = np.zeros((M,) * grid.n, dtype=complex)
    U[idx] = phase * a
    v = np.fft.ifftn(U) * M**grid.n
    scale = state.eps**2 * grid.L ** (-2 * grid.n)
    v = v * np.exp(1j * scale * np.abs(v) ** 2 * h)
    kept = (np.fft.fftn(v) / M**grid.n)[idx]
    return np.conj(phase) * kept


def _fourier_diagnostics(state: FourierState, ell: float) -> Dict[str, float]:
    return {
        "time": state.t,
        "mass": state.mass(),
        "momentum": float(np.linalg.norm(state.momentum())),
        "energy": state.kinetic_energy(),
        "xl_norm": state.xl_norm(ell),
    }


def _cr_diagnostics(state: CRState, ell: float) -> Dict[str, float]:
    return {
        "time": state.tau,
        "mass": state.mass(),
        "momentum": 0.0,
        "energy": 0.0,
        "xl_norm": state.xl_norm(ell),
    }


def evolve(
    system: Literal["nls", "resonant", "cr"],
    config: EvolutionConfig,
    initial,
    table: Optional[CouplingTable] = None,
    quad_config: Optional[QuadConfig] = None,
    writer: Optional[TrajectoryWriter] = None,
) -> Trajectory:
    """Steps one of the three systems from its state time to config.t_final."""
    if system == "cr":
        if not isinstance(initial, CRState):
            raise ConfigError("the CR system evolves a CRState")
        t0 = initial.tau

        def wrap(t, y):
            return initial.with_values(y, t)

        def f(t, y):
            return cr_rhs(wrap(t, y), quad_config, config.cr_nodes)

        diagnostics = _cr_diagnostics
    else:
        if not isinstance(initial, FourierState):
            raise ConfigError(f"the {system} system evolves a FourierState")
        if system == "resonant" and table is None:
            raise ConfigError("the resonant system needs a coupling table")
        t0 = initial.t

        def wrap(t, y):
            return initial.with_amplitudes(y, t)

        if system == "nls":

            def f(t, y):
                return nls_rhs(wrap(t, y), config.pad_factor)

        else:

            def f(t, y):
                return resonant_rhs(wrap(t, y), table)

        diagnostics = _fourier_diagnostics
    if config.scheme == "strang" and system != "nls":
        raise ConfigError("Strang splitting applies to the full NLS only")

    span = config.t_final - t0
    steps = int(math.ceil(abs(span) / config.dt * (1.0 - 1e-12))) if span else 0
    h = span / steps if steps else 0.0
    y = initial.values if system == "cr" else initial.amplitudes
    y = np.array(y, dtype=complex)
    norm0 = float(np.linalg.norm(y))
    if steps and norm0 > 0.0:
        ratio = abs(h) * float(np.linalg.norm(f(t0, y))) / norm0
        if ratio >= config.cfl_limit:
            raise ConfigError(
                f"step too large: dt*|rhs|/|state| = {ratio:.3g} >= {config.cfl_limit}",
                analysis={"ratio": ratio, "dt": config.dt},
            )

    traj = Trajectory(
        system=system,
        metadata={
            "scheme": config.scheme,
            "dt": h,
            "steps": steps,
            "t0": t0,
            "t_final": config.t_final,
        },
    )
    if system == "cr":
        traj.metadata.update(
            {
                "n": initial.n,
                "representation": initial.representation,
                "nodes": list(initial.nodes),
                "ell": initial.ell,
            }
        )
    else:
        traj.metadata.update(
            {"n": initial.grid.n, "L": initial.grid.L, "Lambda": initial.grid.Lambda,
             "eps": initial.eps}
        )

    def record(t, y):
        traj.times.append(t)
        traj.snapshots.append(y.copy())
        if writer is not None:
            writer.write_frame(t, y)

    record(t0, y)
    traj.diagnostics.append(diagnostics(wrap(t0, y), config.ell))
    t = t0
    for step in range(1, steps + 1):
        if config.scheme == "strang":
            y = _strang_step(initial, config.pad_factor, t, y, h)
        else:
            y = _rk4_step(f, t, y, h)
        t = t0 + step * h
        norm = float(np.linalg.norm(y))
        if not np.isfinite(norm) or (norm0 > 0 and norm > config.blowup_factor * norm0):
            raise AccuracyError(
                f"{system} evolution blew up at t={t:.6g}",
                achieved=norm,
                analysis={"t": t, "step": step, "norm0": norm0, "norm": norm},
            )
        if step % config.check_every == 0 or step == steps:
            traj.diagnostics.append(diagnostics(wrap(t, y), config.ell))
        if step % config.snapshot_every == 0 or step == steps:
            record(t, y)
    drift = traj.mass_drift()
    traj.metadata["mass_drift"] = drift
    if system == "cr" and wrap(t, y).decay_flagged:
        traj.metadata["decay_flagged"] = True
        logger.warning("CR state no longer decays below the floor at the boundary")
    if drift > config.mass_tolerance:
        logger.warning(f"{system} mass drift {drift:.3e} exceeds {config.mass_tolerance:.1e}")
    logger.info(f"Evolved {system} over {steps} steps to t={t:.6g}")
    return traj


# --- Comparison with the CR flow ---


def resonant_time(n: int, L: int, eps: float) -> float:
    """T_R = L^(2n) / (eps^2 Z_n(L))."""
    return L ** (2 * n) / (eps**2 * normalization_Z(n, 1, L))


def _cr_at(cr: Trajectory, tau: float) -> Tuple[np.ndarray, bool]:
    times = np.asarray(cr.times)
    hit = np.nonzero(np.abs(times - tau) <= 1e-9 * max(1.0, abs(tau)))[0]
    if len(hit):
        return cr.snapshots[hit[0]], False
    if tau < times.min() or tau > times.max():
        raise ConfigError(f"tau={tau:.6g} lies outside the CR trajectory")
    j = int(np.searchsorted(times, tau))
    w = (tau - times[j - 1]) / (times[j] - times[j - 1])
    return (1 - w) * cr.snapshots[j - 1] + w * cr.snapshots[j], True


def compare_to_cr(
    nls: Trajectory,
    cr: Trajectory,
    ell: float,
    gamma: float = 0.5,
) -> ConvergenceReport:
    """max over matched times of max_K <K>^ell |a_K(t) - g(t / T_R, K)|."""
    n, L, eps = nls.metadata["n"], nls.metadata["L"], nls.metadata["eps"]
    grid = FrequencyGrid(n=n, L=L, Lambda=nls.metadata["Lambda"])
    K = grid.frequencies()
    T_R = resonant_time(n, L, eps)
    template = CRState(
        n=cr.metadata["n"],
        representation=cr.metadata["representation"],
        nodes=cr.metadata["nodes"],
        values=cr.snapshots[0],
    )
    defects, taus = [], []
    interpolated = False
    for t, a in zip(nls.times, nls.snapshots):
        tau = t / T_R
        g_vals, interp = _cr_at(cr, tau)
        interpolated |= interp
        g = template.with_values(g_vals, tau).evaluate(K)
        defects.append(xl_norm(a.ravel() - g, K, ell))
        taus.append(tau)
    if interpolated:
        logger.warning("CR snapshots interpolated to the NLS times")
    envelope = rate_function(n, L) + eps**2 * L**gamma
    return ConvergenceReport(
        n=n,
        L_values=[L],
        errors=[max(defects)],
        series={"envelope": [envelope]},
        metadata={
            "eps": eps,
            "T_R": T_R,
            "taus": taus,
            "defects": defects,
            "interpolated": interpolated,
            "ell": ell,
        },
    )
