# resonant_cr/schemas.py
import logging
import tomllib
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from resonant_cr import config
from resonant_cr.circle import GaussianWeight
from resonant_cr.envelope import Envelope
from resonant_cr.errors import ConfigError

logger = logging.getLogger(__name__)

SUBCOMMANDS = (
    "arith",
    "kernel",
    "reconstruct",
    "resonant",
    "converge",
    "evolve",
    "compare",
    "calibrate",
)


class _Params(BaseModel):
    model_config = ConfigDict(extra="forbid")


class EnvelopeSpec(_Params):
    """Declarative envelope; built for a space dimension on demand."""

    family: Literal["gaussian", "rational"] = "gaussian"
    amplitude: Tuple[float, float] = (1.0, 0.0)
    center: Optional[List[float]] = None
    width: float = Field(1.0, gt=0)
    ell: float = Field(12.0, gt=0)
    N: int = Field(2, ge=0)

    def build(self, n: int) -> Envelope:
        amp = complex(*self.amplitude)
        if self.family == "gaussian":
            return Envelope.gaussian(
                n, amp=amp, center=self.center, width=self.width, ell=self.ell, N=self.N
            )
        return Envelope.rational(
            n, ell=self.ell, amp=amp, center=self.center, width=self.width
        )


class WeightSpec(_Params):
    """Pair-diagonal gaussian weight for the circle reconstruction."""

    alphas: List[float] = Field(description="One decay rate per coordinate.")
    center: Optional[List[float]] = None

    def build(self) -> GaussianWeight:
        return GaussianWeight.pair_diagonal(self.alphas, center=self.center)


def _default_weights() -> List[WeightSpec]:
    return [
        WeightSpec(alphas=[1.0, 1.0, 1.0, 1.0]),
        WeightSpec(alphas=[0.5, 1.0, 2.0, 1.5]),
        WeightSpec(alphas=[1.0, 1.0, 1.0, 1.0], center=[0.3, -0.2, 0.1, 0.25]),
    ]


class RunOptions(_Params):
    seed: int = Field(0, ge=0, lt=2**64, description="Seed of every stochastic step.")
    threads: int = Field(config.THREADS, ge=1)
    serial: bool = Field(False, description="Bit-reproducible one-at-a-time mode.")
    out: str = Field(config.RESULTS_DIR, description="Base results directory.")


class ArithParams(_Params):
    q_max: int = Field(50, ge=1)
    d_values: List[int] = Field(default_factory=lambda: [4, 6])
    random_c: int = Field(200, ge=0, description="Random dual vectors per (q, d).")
    c_range: int = Field(10, ge=1)
    mu_tilde: int = 0
    check_brute: bool = False
    multiplicativity_max: int = Field(200, ge=1)
    X: int = Field(100_000, ge=2, description="Cutoff of M(X).")
    A_X: int = Field(10_000, ge=2, description="Cutoff of A(X).")
    zeta_Q: int = Field(100_000, ge=1, description="Cutoff of the zeta-ratio sums.")


class KernelParams(_Params):
    sharpness: float = Field(6.0, gt=0)
    delta_identity: bool = False
    L: Optional[int] = Field(None, ge=1, description="Single L for the identity.")
    L_values: List[int] = Field(default_factory=lambda: [8, 16, 32, 64])
    n_max: int = Field(1000, ge=0)
    moment_r: List[float] = Field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    moment_orders: List[int] = Field(default_factory=lambda: [0, 2])
    h_hat_r: float = Field(0.03, gt=0, lt=1)
    h_hat_s: List[float] = Field(default_factory=lambda: [0, 1, 2, 5, 10, 20, 40])

    @model_validator(mode="after")
    def _single_L(self):
        if self.L is not None:
            self.L_values = [self.L]
        return self


class ReconstructParams(_Params):
    L_values: List[int] = Field(default_factory=lambda: [4, 6, 8])
    mu_tildes: List[int] = Field(default_factory=lambda: [0, 2])
    weights: List[WeightSpec] = Field(default_factory=_default_weights)
    sharpness: float = Field(6.0, gt=0)
    c_max: Optional[int] = Field(None, ge=0)
    shell_tol: float = Field(1e-3, gt=0)


class ResonantParams(_Params):
    n: int = Field(2, ge=1)
    p: int = Field(1, ge=1, le=2)
    L: int = Field(8, ge=1)
    K: Optional[List[int]] = Field(None, description="Integer K*L; default 0.")
    mu_tilde: int = 0
    R_int: Optional[int] = Field(None, ge=1)
    envelope: EnvelopeSpec = Field(default_factory=EnvelopeSpec)
    export_index: bool = True
    sup_scan_L: List[int] = Field(default_factory=list)
    sup_scan_K: Optional[List[List[float]]] = Field(None, description="Default K = 0.")
    sup_scan_mu: List[int] = Field(default_factory=lambda: [0])


class ConvergeParams(_Params):
    n: int = Field(3, ge=2, le=3)
    L_values: List[int] = Field(default_factory=lambda: [8, 12, 16, 24])
    envelope: EnvelopeSpec = Field(default_factory=EnvelopeSpec)
    K_points: Optional[List[List[float]]] = Field(
        None, description="Default (0,..), (1,0,..), (2,0,..)."
    )
    kappa: Optional[float] = Field(None, description="None reads the calibration.")
    correction: bool = Field(False, description="n = 2: compute C(K) directly.")
    c_max: int = Field(4, ge=1)
    tail_tol: Optional[float] = None


class EvolveParams(_Params):
    system: Literal["nls", "resonant", "cr"] = "nls"
    n: int = Field(2, ge=1)
    L: int = Field(4, ge=1)
    Lambda: int = Field(8, ge=0)
    eps: float = Field(0.5, ge=0)
    envelope: EnvelopeSpec = Field(default_factory=EnvelopeSpec)
    scheme: Literal["rk4", "strang"] = "rk4"
    dt: float = Field(0.01, gt=0)
    t_final: float = 1.0
    snapshot_every: int = Field(10, ge=1)
    representation: Literal["radial", "tensor"] = "radial"
    samples: int = Field(512, ge=8)
    radius: float = Field(12.0, gt=0)
    modified: bool = False
    c_hat: float = 0.0
    cr_nodes: int = Field(32, ge=4, description="Radial CR rhs nodes.")


class CompareParams(_Params):
    mode: Literal["cr", "resonant"] = "cr"
    n: int = Field(2, ge=2, le=3)
    L_values: List[int] = Field(default_factory=lambda: [8, 12, 16])
    regime: float = Field(0.1, gt=0, description="eps^2 L^gamma held fixed.")
    gamma: float = Field(0.5, ge=0)
    eps_values: List[float] = Field(default_factory=lambda: [0.2, 0.1])
    tau_final: float = Field(0.25, gt=0)
    t_final: float = Field(2.0, gt=0, description="Resonant-mode final time.")
    dt: float = Field(0.02, gt=0, description="Largest NLS step.")
    cr_dt: float = Field(0.025, gt=0)
    cutoff: float = Field(4.0, gt=0, description="Grid half-width in K units.")
    Lambda: int = Field(8, ge=1, description="Resonant-mode grid half-width in modes.")
    h3_cutoff: float = Field(0.5, gt=0, description="Normal-form grid half-width in K units.")
    envelope: EnvelopeSpec = Field(default_factory=EnvelopeSpec)
    ell: float = Field(2.0, ge=0)


class CalibrateParams(_Params):
    n: int = Field(3, ge=2, le=3)
    L: int = Field(16, ge=2)
    envelope: EnvelopeSpec = Field(default_factory=EnvelopeSpec)
    monte_carlo: bool = Field(False, description="Cross-check T by Monte-Carlo.")
    samples: int = Field(200_000, ge=1000)


PARAMS_BY_SUBCOMMAND = {
    "arith": ArithParams,
    "kernel": KernelParams,
    "reconstruct": ReconstructParams,
    "resonant": ResonantParams,
    "converge": ConvergeParams,
    "evolve": EvolveParams,
    "compare": CompareParams,
    "calibrate": CalibrateParams,
}


def _field_messages(exc: ValidationError) -> List[str]:
    return [
        f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()
    ]


def resolve_params(
    subcommand: str,
    file_values: Optional[Dict[str, Any]] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> BaseModel:
    """File table for the subcommand, then CLI overrides, validated."""
    if subcommand not in PARAMS_BY_SUBCOMMAND:
        raise ConfigError(f"unknown subcommand '{subcommand}'")
    merged = dict(file_values or {})
    model = PARAMS_BY_SUBCOMMAND[subcommand]
    merged.update(
        {
            k: v
            for k, v in (overrides or {}).items()
            if v is not None and k in model.model_fields
        }
    )
    try:
        return model.model_validate(merged)
    except ValidationError as e:
        messages = _field_messages(e)
        raise ConfigError(
            f"invalid [{subcommand}] configuration: " + "; ".join(messages),
            analysis={"fields": messages},
        ) from e


def load_config_file(path: Optional[str]) -> Dict[str, Any]:
    """Reads a TOML experiment file; a [run] table holds the run options."""
    if not path:
        return {}
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"config file {path} is not valid TOML: {e}") from e
    unknown = set(data) - set(SUBCOMMANDS) - {"run"}
    if unknown:
        raise ConfigError(f"unknown config tables: {sorted(unknown)}")
    logger.info(f"Loaded experiment config from {path}")
    return data


def default_K_points(n: int) -> List[List[float]]:
    return [[float(k)] + [0.0] * (n - 1) for k in range(3)]
