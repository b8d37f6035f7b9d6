# resonant_cr/commands.py
import logging
import math
import os
from typing import Any, Awaitable, Callable, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from resonant_cr import __version__
from resonant_cr import config as settings
from resonant_cr.arithmetic import (
    omega_value,
    partial_sum_A,
    partial_sum_M,
    s_qc,
    s_qc_brute,
    s_qc_shifted,
    totient_sieve,
    zeta_ratio_limit,
    zeta_ratio_sum,
)
from resonant_cr.circle import DIAGNOSTIC_COLUMNS as CIRCLE_COLUMNS
from resonant_cr.circle import circle_reconstruction, direct_lattice_sum
from resonant_cr.cr_operator import (
    asymptotics_study,
    calibrate_convention,
    correction_C,
    monte_carlo_T,
)
from resonant_cr.data_manager import (
    TrajectoryWriter,
    load_from_json,
    save_csv,
    save_dat,
    save_to_json,
)
from resonant_cr.dynamics import (
    DIAGNOSTIC_COLUMNS,
    PAD_BAND_THRESHOLD,
    CRState,
    EvolutionConfig,
    FourierState,
    compare_to_cr,
    evolve,
    normal_form_H3,
    pad_band_fraction,
    resonant_time,
)
from resonant_cr.envelope import xl_norm
from resonant_cr.errors import ConfigError, exit_code_for
from resonant_cr.experiment_manager import ExperimentManager
from resonant_cr.kernel import KernelConfig, delta_identity_check, h_hat, moment
from resonant_cr.lattice import (
    FrequencyGrid,
    LatticeSpec,
    enumerate_resonant,
    general_p_enumerate,
    general_p_weighted_sum,
    normalization_Z,
    resonant_coupling_table,
    sup_bound_scan,
    weighted_resonant_sum,
)
from resonant_cr.reports import ConvergenceReport, fit_rate
from resonant_cr.schemas import (
    ArithParams,
    CalibrateParams,
    CompareParams,
    ConvergeParams,
    EvolveParams,
    KernelParams,
    ReconstructParams,
    ResonantParams,
    RunOptions,
    default_K_points,
)
from resonant_cr.zeta import zeta_constants

logger = logging.getLogger(__name__)

MULTIPLICATIVITY_OMEGAS = (0, 1, 2, 3, 6, 12, 30)


class RunContext:
    """Run directory, seed and the artifact writers of one run.

    Every artifact carries the same header: the resolved parameters, the run
    options that affect results, and the library version.
    """

    def __init__(
        self,
        subcommand: str,
        params: BaseModel,
        options: RunOptions,
        manager: ExperimentManager,
    ):
        self.subcommand = subcommand
        self.base_dir = options.out
        self.seed = options.seed
        self.manager = manager
        self.out_dir = settings.new_run_dir(options.out, subcommand)
        self.header = {
            "version": __version__,
            "subcommand": subcommand,
            "seed": options.seed,
            "serial": options.serial,
            "params": params.model_dump(mode="json"),
        }
        self.artifacts: List[str] = []

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def track(self, path: str) -> str:
        self.artifacts.append(path)
        return path

    def csv(self, name: str, rows: Sequence[Sequence[Any]], columns: Sequence[str]) -> int:
        return save_csv(rows, columns, self.track(self.path(name)), header=self.header)

    def dat(self, name: str, columns: Sequence[Sequence[float]]):
        save_dat(columns, self.track(self.path(name)), header=self.header)

    def json(self, name: str, data: Dict[str, Any]):
        save_to_json({"config": self.header, **data}, self.track(self.path(name)))


def _complex_pair(z: complex) -> Dict[str, float]:
    return {"re": float(z.real), "im": float(z.imag)}


# --- arith ---


def _sqc_rows(case, mu_tilde: int, check_brute: bool) -> List[List[Any]]:
    d, q, cs = case
    rows = []
    for c in cs:
        w = omega_value(c).value
        if mu_tilde == 0:
            value = s_qc(q, w, d).value
        else:
            value = s_qc_shifted(q, w, mu_tilde, d)
        brute, match = None, None
        if check_brute:
            brute = s_qc_brute(q, c, mu_tilde, d)
            if mu_tilde == 0:
                match = brute == value
            else:
                match = math.isclose(
                    brute, value, rel_tol=1e-9, abs_tol=1e-9 * q ** (d // 2)
                )
        rows.append([d, q, w, value, brute, match])
    return rows


def _multiplicativity_rows(d: int, limit: int) -> List[List[Any]]:
    rows = []
    for u in range(2, limit + 1):
        for v in range(u + 1, limit // u + 1):
            if math.gcd(u, v) != 1:
                continue
            for w in MULTIPLICATIVITY_OMEGAS:
                whole = s_qc(u * v, w, d).value
                split = s_qc(u, w, d).value * s_qc(v, w, d).value
                rows.append([d, u, v, w, whole, split, whole == split])
    return rows


async def run_arith(params: ArithParams, ctx: RunContext) -> Dict[str, Any]:
    rng = np.random.default_rng(ctx.seed)
    cases = []
    for d in params.d_values:
        for q in range(1, params.q_max + 1):
            cs = rng.integers(
                -params.c_range, params.c_range + 1, size=(params.random_c, d)
            )
            cases.append((d, q, cs))

    def _table(case):
        return _sqc_rows(case, params.mu_tilde, params.check_brute)

    tables = await ctx.manager.map_points(_table, cases)
    rows = [row for table in tables for row in table]
    ctx.csv("sqc.csv", rows, ["d", "q", "omega", "S", "S_brute", "match"])
    checked = [row for row in rows if row[5] is not None]
    mismatches = [row for row in checked if not row[5]]
    if mismatches:
        logger.warning(f"{len(mismatches)} closed-form values differ from brute force")

    def _mult(d):
        return _multiplicativity_rows(d, params.multiplicativity_max)

    mult_tables = await ctx.manager.map_points(_mult, params.d_values)
    mult = [row for table in mult_tables for row in table]
    ctx.csv(
        "multiplicativity.csv", mult, ["d", "u", "v", "omega", "S_uv", "S_u_S_v", "equal"]
    )
    mult_failures = sum(1 for row in mult if not row[6])

    zc = zeta_constants()
    X = params.X
    M = partial_sum_M(X)
    log_defect = abs(M - math.log(X) / zc.zeta2 - zc.log_constant)
    A_ratio = partial_sum_A(params.A_X, 0) / float(params.A_X) ** 4
    A_target = 1.0 / (4.0 * zc.zeta2)
    ratios = {}
    for d in (6, 8):
        value = zeta_ratio_sum(d, params.zeta_Q)
        limit = zeta_ratio_limit(d)
        ratios[str(d)] = {"sum": value, "limit": limit, "defect": abs(value - limit)}

    q = np.arange(1, X + 1, dtype=float)
    running = np.cumsum(totient_sieve(X)[1:] / (q * q))
    marks = np.unique(np.round(np.logspace(1, math.log10(X), 60)).astype(int))
    marks = marks[(marks >= 1) & (marks <= X)]
    ctx.dat(
        "partial_sum_M.dat",
        [
            marks,
            running[marks - 1] - np.log(marks) / zc.zeta2,
            np.full(len(marks), zc.log_constant),
        ],
    )

    partial_sums = {
        "M_X": M,
        "log_defect": log_defect,
        "log_constant": zc.log_constant,
        "A_ratio": A_ratio,
        "A_relative_defect": abs(A_ratio - A_target) / A_target,
        "zeta_ratios": ratios,
        "constants_discrepancy": zc.max_discrepancy(),
    }
    summary = {
        "sqc_rows": len(rows),
        "brute_checked": len(checked),
        "brute_mismatches": len(mismatches),
        "multiplicativity_checked": len(mult),
        "multiplicativity_failures": mult_failures,
        "partial_sums": partial_sums,
    }
    ctx.json("arith.json", summary)
    return summary


# --- kernel ---


async def run_kernel(params: KernelParams, ctx: RunContext) -> Dict[str, Any]:
    kernel = KernelConfig(sharpness=params.sharpness)
    summary: Dict[str, Any] = {}
    if params.delta_identity:
        n_range = range(-params.n_max, params.n_max + 1)

        def _identity(L):
            return delta_identity_check(kernel, L, n_range)

        defects = await ctx.manager.map_points(_identity, params.L_values)
        ctx.csv("delta_identity.csv", list(zip(params.L_values, defects)), ["L", "defect"])
        ctx.dat("delta_identity.dat", [params.L_values, defects])
        summary["delta_identity"] = dict(zip(map(str, params.L_values), defects))
        summary["max_defect"] = max(defects) if defects else 0.0
        logger.info(f"delta identity max defect {summary['max_defect']:.3e}")

    points = [(r, order) for r in params.moment_r for order in params.moment_orders]

    def _moment(point):
        r, order = point
        return moment(kernel, r, order)

    moments = await ctx.manager.map_points(_moment, points)
    ctx.csv(
        "moments.csv",
        [[r, order, value] for (r, order), value in zip(points, moments)],
        ["r", "order", "moment"],
    )
    zeroth = [(r, v) for (r, order), v in zip(points, moments) if order == 0]
    summary["moment_defects"] = {str(r): abs(v - 1.0) for r, v in zeroth}

    def _transform(s):
        return abs(h_hat(kernel, params.h_hat_r, s))

    decay = await ctx.manager.map_points(_transform, params.h_hat_s)
    ctx.csv("h_hat.csv", list(zip(params.h_hat_s, decay)), ["s", "abs_h_hat"])
    ctx.dat("h_hat.dat", [params.h_hat_s, decay])
    summary["h_hat"] = dict(zip(map(str, params.h_hat_s), decay))
    ctx.json("kernel.json", summary)
    return summary


# --- reconstruct ---


RECONSTRUCT_COLUMNS = [
    "L",
    "mu_tilde",
    "weight",
    "reconstruction_re",
    "reconstruction_im",
    "direct_re",
    "direct_im",
    "relative_error",
    "shell_estimate",
    "converged",
]


async def run_reconstruct(params: ReconstructParams, ctx: RunContext) -> Dict[str, Any]:
    kernel = KernelConfig(sharpness=params.sharpness)
    weights = [spec.build() for spec in params.weights]
    points = [
        (L, mt, i)
        for L in params.L_values
        for mt in params.mu_tildes
        for i in range(len(weights))
    ]

    def _compare(point):
        L, mt, i = point
        W = weights[i]
        lattice = LatticeSpec(n=W.d // 2, L=L, mu_tilde=mt)
        result = circle_reconstruction(
            kernel, W, lattice, c_max=params.c_max, shell_tol=params.shell_tol
        )
        direct = direct_lattice_sum(W, L, mt)
        rel = abs(result.value - direct) / max(abs(direct), 1e-300)
        return result, direct, rel

    outcomes = await ctx.manager.map_points(_compare, points)
    rows, diagnostics = [], []
    for (L, mt, i), (result, direct, rel) in zip(points, outcomes):
        rows.append(
            [
                L,
                mt,
                i,
                result.value_re,
                result.value_im,
                direct.real,
                direct.imag,
                rel,
                result.shell_estimate,
                result.converged,
            ]
        )
        for diag in result.rows:
            diagnostics.append([L, mt, i] + [diag[c] for c in CIRCLE_COLUMNS])
    ctx.csv("reconstruct.csv", rows, RECONSTRUCT_COLUMNS)
    ctx.csv("reconstruct_terms.csv", diagnostics, ["L", "mu_tilde", "weight"] + CIRCLE_COLUMNS)
    ctx.dat("reconstruct.dat", [[r[0] for r in rows], [r[7] for r in rows]])
    errors = [r[7] for r in rows]
    summary = {
        "cases": len(rows),
        "max_relative_error": max(errors) if errors else 0.0,
        "unconverged": sum(1 for r in rows if not r[9]),
    }
    ctx.json("reconstruct.json", {"summary": summary, "rows": rows})
    return summary


# --- resonant ---


async def run_resonant(params: ResonantParams, ctx: RunContext) -> Dict[str, Any]:
    n, p, L = params.n, params.p, params.L
    K = params.K if params.K is not None else [0] * n
    spec = LatticeSpec(n=n, p=p, L=L, mu_tilde=params.mu_tilde, R_int=params.R_int)
    f = params.envelope.build(n)
    if p == 1:
        index = enumerate_resonant(spec, K)
        total = weighted_resonant_sum(spec, K, f, f, f)
    else:
        index = general_p_enumerate(spec, K)
        total = general_p_weighted_sum(spec, K, [f])
    verified = index.verify()
    if not verified:
        logger.warning("enumerated tuples fail the exact level check")
    if params.export_index:
        index.save(ctx.track(ctx.path("resonant.ridx")))
        index.export_csv(ctx.track(ctx.path("resonant_tuples.csv")))
    Z = normalization_Z(n, p, L)
    normalized = total.value / Z
    ctx.csv(
        "resonant.csv",
        [
            [
                n,
                p,
                L,
                params.mu_tilde,
                index.R_int,
                index.count,
                verified,
                total.value_re,
                total.value_im,
                total.tail_estimate,
                Z,
                normalized.real,
                normalized.imag,
            ]
        ],
        [
            "n",
            "p",
            "L",
            "mu_tilde",
            "R_int",
            "count",
            "verified",
            "sum_re",
            "sum_im",
            "tail_estimate",
            "Z",
            "normalized_re",
            "normalized_im",
        ],
    )
    summary: Dict[str, Any] = {
        "count": index.count,
        "R_int": index.R_int,
        "verified": verified,
        "weighted_sum": _complex_pair(total.value),
        "route": total.route,
        "tail_estimate": total.tail_estimate,
        "Z": Z,
        "normalized": _complex_pair(normalized),
    }
    if params.sup_scan_L:
        if p != 1:
            raise ConfigError("the sup-bound scan covers the cubic case p = 1")
        K_points = params.sup_scan_K or [[0.0] * n]
        scan = sup_bound_scan(n, params.sup_scan_L, f, K_points, params.sup_scan_mu)
        _write_report(ctx, "sup_scan", scan)
        summary["sup_scan"] = {"values": scan.errors, "stable": scan.stable}
    ctx.json("resonant.json", summary)
    return summary


# --- converge ---


def read_kappa(base_dir: str, n: int) -> float:
    """Calibrated constant for dimension n from the results base, 1 if absent."""
    data = load_from_json(os.path.join(base_dir, settings.CALIBRATION_FILE))
    entry = data.get(str(n))
    if not entry:
        logger.warning(f"No calibration for n={n}; using kappa = 1")
        return 1.0
    return float(entry["kappa"])


def _write_report(ctx: RunContext, stem: str, report: ConvergenceReport):
    columns = report.columns()
    ctx.csv(f"{stem}.csv", [[row[c] for c in columns] for row in report.rows()], columns)
    ctx.dat(f"{stem}.dat", [report.L_values, report.errors, report.rate_function])


def _successive_shrink(values: Sequence[complex]) -> List[float]:
    diffs = [abs(b - a) for a, b in zip(values, values[1:])]
    return [b / a for a, b in zip(diffs, diffs[1:]) if a > 0]


async def run_converge(params: ConvergeParams, ctx: RunContext) -> Dict[str, Any]:
    n = params.n
    f = params.envelope.build(n)
    K_points = params.K_points or default_K_points(n)
    kappa = params.kappa if params.kappa is not None else read_kappa(ctx.base_dir, n)
    if not params.L_values:
        logger.warning("Empty L sweep: nothing to evaluate")
        ctx.csv("converge.csv", [], ["L", "defect", "rate_function"])
        return {"L_values": [], "errors": [], "kappa": kappa}
    summary: Dict[str, Any] = {"kappa": kappa}
    if n == 2:
        C_hat = None
        if params.correction:

            def _correction(K):
                return correction_C(f, f, f, K, c_max=params.c_max, tol=params.tail_tol)

            corrections = await ctx.manager.map_points(_correction, K_points)
            C_hat = [c.value for c in corrections]
            summary["correction"] = [
                {**_complex_pair(c.value), "tail_estimate": c.tail_estimate, "flagged": c.flagged}
                for c in corrections
            ]
        report = asymptotics_study(n, params.L_values, f, K_points, kappa, C_hat=C_hat)
        G = [complex(a, b) for a, b in zip(report.series["G_re"], report.series["G_im"])]
        summary["G_shrink"] = _successive_shrink(G)
        if C_hat is not None:
            gap = abs(G[-1] - C_hat[0])
            spread = abs(G[-1] - G[-2]) if len(G) > 1 else 0.0
            summary["G_limit_gap"] = gap
            summary["G_limit_agrees"] = gap <= corrections[0].tail_estimate + spread
    else:

        def _single(L):
            return asymptotics_study(n, [L], f, K_points, kappa)

        report = ConvergenceReport.combine(
            await ctx.manager.map_points(_single, params.L_values)
        )
    _write_report(ctx, "converge", report)
    summary.update(
        {
            "L_values": report.L_values,
            "errors": report.errors,
            "rate_exponent": report.rate_exponent,
            "corrected": report.metadata.get("corrected", False),
        }
    )
    ctx.json("converge.json", {"summary": summary, "report": report.model_dump()})
    return summary


# --- evolve ---


def _diagnostic_rows(traj) -> List[List[float]]:
    return [[row[c] for c in DIAGNOSTIC_COLUMNS] for row in traj.diagnostics]


async def run_evolve(params: EvolveParams, ctx: RunContext) -> Dict[str, Any]:
    f = params.envelope.build(params.n)
    evo = EvolutionConfig(
        scheme=params.scheme,
        dt=params.dt,
        t_final=params.t_final,
        snapshot_every=params.snapshot_every,
        ell=f.ell,
        cr_nodes=params.cr_nodes,
    )
    summary: Dict[str, Any] = {"system": params.system}
    if params.system == "cr":
        state = CRState.from_envelope(
            f,
            params.representation,
            samples=params.samples,
            radius=params.radius,
            L=params.L if params.modified else None,
            modified=params.modified,
            c_hat=params.c_hat,
        )
        traj = evolve("cr", evo, state)
        if params.representation == "radial":
            ctx.dat(
                "cr_profile.dat",
                [state.node_array, np.abs(traj.snapshots[0]), np.abs(traj.final)],
            )
        summary["decay_flagged"] = bool(traj.metadata.get("decay_flagged", False))
    else:
        grid = FrequencyGrid(n=params.n, L=params.L, Lambda=params.Lambda)
        state = FourierState.from_profile(grid, f, eps=params.eps)
        table = resonant_coupling_table(grid) if params.system == "resonant" else None
        with TrajectoryWriter(
            ctx.track(ctx.path("trajectory.traj")),
            n=params.n,
            L=params.L,
            Lambda=params.Lambda,
            eps=params.eps,
            dt=params.dt,
            scheme=params.scheme,
        ) as writer:
            traj = evolve(params.system, evo, state, table=table, writer=writer)
        if params.system == "nls":
            band = pad_band_fraction(state.with_amplitudes(traj.final, traj.times[-1]))
            summary["pad_band_fraction"] = band
            if band > PAD_BAND_THRESHOLD:
                logger.warning(f"grid edge carries {band:.2e} of the cubic product")
    rows = _diagnostic_rows(traj)
    ctx.csv("diagnostics.csv", rows, DIAGNOSTIC_COLUMNS)
    ctx.dat("diagnostics.dat", list(zip(*rows)) if rows else [[] for _ in DIAGNOSTIC_COLUMNS])
    summary.update(
        {
            "steps": traj.metadata["steps"],
            "t_final": traj.times[-1],
            "mass_drift": traj.mass_drift(),
            "snapshots": len(traj.snapshots),
        }
    )
    ctx.json("evolve.json", {"summary": summary, "metadata": traj.metadata})
    return summary


# --- compare ---


async def _compare_cr(params: CompareParams, ctx: RunContext) -> Dict[str, Any]:
    n = params.n
    f = params.envelope.build(n)
    cr_state = CRState.from_envelope(f, "radial")
    cr = evolve(
        "cr",
        EvolutionConfig(
            dt=params.cr_dt, t_final=params.tau_final, ell=params.ell, mass_tolerance=1e-3
        ),
        cr_state,
    )

    def _one(L):
        eps = math.sqrt(params.regime / L**params.gamma)
        T_R = resonant_time(n, L, eps)
        grid = FrequencyGrid(n=n, L=L, Lambda=math.ceil(params.cutoff * L))
        state = FourierState.from_profile(grid, f, eps=eps)
        interval = cr.metadata["dt"] * T_R
        per = max(1, math.ceil(interval / params.dt))
        nls = evolve(
            "nls",
            EvolutionConfig(
                dt=interval / per,
                t_final=params.tau_final * T_R,
                snapshot_every=per,
                ell=params.ell,
            ),
            state,
        )
        report = compare_to_cr(nls, cr, params.ell, params.gamma)
        small = FrequencyGrid(n=n, L=L, Lambda=math.ceil(params.h3_cutoff * L))
        small_state = FourierState.from_profile(small, f, eps=eps)
        _, h3 = normal_form_H3(small_state, params.ell)
        report.series["h3_ratio"] = [h3 / max(small_state.xl_norm(params.ell) ** 3, 1e-300)]
        return report

    report = ConvergenceReport.combine(await ctx.manager.map_points(_one, params.L_values))
    _write_report(ctx, "compare", report)
    errors = report.errors
    h3 = report.series["h3_ratio"]
    summary = {
        "mode": "cr",
        "L_values": report.L_values,
        "errors": errors,
        "monotone": all(b < a for a, b in zip(errors, errors[1:])),
        "h3_ratio": h3,
        "h3_exponent": fit_rate(report.L_values, h3),
    }
    ctx.json("compare.json", {"summary": summary, "report": report.model_dump()})
    return summary


async def _compare_resonant(params: CompareParams, ctx: RunContext) -> Dict[str, Any]:
    L = params.L_values[0]
    grid = FrequencyGrid(n=params.n, L=L, Lambda=params.Lambda)
    table = resonant_coupling_table(grid)
    f = params.envelope.build(params.n)
    K = grid.frequencies()

    def _defect(eps):
        state = FourierState.from_profile(grid, f, eps=eps)
        evo = EvolutionConfig(dt=params.dt, t_final=params.t_final, ell=params.ell)
        nls = evolve("nls", evo, state)
        res = evolve("resonant", evo, state, table=table)
        return max(
            xl_norm((a - b).ravel(), K, params.ell)
            for a, b in zip(nls.snapshots, res.snapshots)
        )

    defects = await ctx.manager.map_points(_defect, params.eps_values)
    ratios = [b / a for a, b in zip(defects, defects[1:]) if a > 0]
    ctx.csv("compare_resonant.csv", list(zip(params.eps_values, defects)), ["eps", "defect"])
    ctx.dat("compare_resonant.dat", [params.eps_values, defects])
    summary = {
        "mode": "resonant",
        "L": L,
        "eps_values": params.eps_values,
        "defects": defects,
        "ratios": ratios,
    }
    ctx.json("compare.json", summary)
    return summary


async def run_compare(params: CompareParams, ctx: RunContext) -> Dict[str, Any]:
    if not params.L_values:
        logger.warning("Empty L sweep: nothing to evaluate")
        ctx.csv("compare.csv", [], ["L", "defect"])
        return {"mode": params.mode, "errors": []}
    if params.mode == "resonant":
        return await _compare_resonant(params, ctx)
    return await _compare_cr(params, ctx)


# --- calibrate ---


async def run_calibrate(params: CalibrateParams, ctx: RunContext) -> Dict[str, Any]:
    f = params.envelope.build(params.n)
    calibration = calibrate_convention(params.n, params.L, f)
    summary: Dict[str, Any] = calibration.model_dump()
    if params.monte_carlo:
        estimate, se = monte_carlo_T(
            f, f, f, np.zeros(params.n), samples=params.samples, seed=ctx.seed
        )
        summary["monte_carlo"] = {
            "estimate": _complex_pair(estimate),
            "standard_error": abs(se),
            "deviation": abs(estimate - calibration.T),
        }
    ctx.json(settings.CALIBRATION_FILE, summary)
    settings.ensure_results_dir_exists(ctx.base_dir)
    shared = os.path.join(ctx.base_dir, settings.CALIBRATION_FILE)
    stored = load_from_json(shared) if os.path.exists(shared) else {}
    stored[str(params.n)] = calibration.model_dump()
    save_to_json(stored, shared)
    ctx.csv(
        "calibration.csv",
        [[params.n, params.L, calibration.normalized_sum, calibration.T, calibration.kappa]],
        ["n", "L", "normalized_sum", "T", "kappa"],
    )
    logger.info(f"Stored kappa={calibration.kappa:.6f} for n={params.n} in {shared}")
    return summary


# --- Dispatch ---


COMMANDS: Dict[str, Callable[[Any, RunContext], Awaitable[Dict[str, Any]]]] = {
    "arith": run_arith,
    "kernel": run_kernel,
    "reconstruct": run_reconstruct,
    "resonant": run_resonant,
    "converge": run_converge,
    "evolve": run_evolve,
    "compare": run_compare,
    "calibrate": run_calibrate,
}


def load_manifest(manager: ExperimentManager, base_dir: str):
    data = load_from_json(os.path.join(base_dir, settings.RUN_MANIFEST_FILE))
    if data:
        manager.load_runs_from_data(data)


def save_manifest(manager: ExperimentManager, base_dir: str):
    settings.ensure_results_dir_exists(base_dir)
    save_to_json(
        manager.get_runs_for_saving(),
        os.path.join(base_dir, settings.RUN_MANIFEST_FILE),
    )


async def execute(
    subcommand: str,
    params: BaseModel,
    options: RunOptions,
    manager: Optional[ExperimentManager] = None,
) -> Dict[str, Any]:
    """
    Runs one subcommand and records it in the run manifest.

    Returns:
        Dict[str, Any]: `{"status": "success", ...}` with the run id, output
                        directory, artifact paths and the command summary, or
                        `{"status": "error", "message": ..., "exit_code": ...}`.
    """
    manager = manager or ExperimentManager(options.threads, options.serial)
    run = None
    try:
        if subcommand not in COMMANDS:
            raise ConfigError(f"unknown subcommand '{subcommand}'")
        ctx = RunContext(subcommand, params, options, manager)
        run = manager.create_run(subcommand, params.model_dump(mode="json"), ctx.out_dir)
        run.update_status("running")
        summary = await COMMANDS[subcommand](params, ctx)
        result = {
            "status": "success",
            "run_id": run.run_id,
            "out_dir": ctx.out_dir,
            "artifacts": ctx.artifacts,
            "summary": summary,
        }
        run.update_status("completed", result)
        logger.info(f"Run {run.run_id} ({subcommand}) completed in {ctx.out_dir}")
        return result
    except Exception as e:
        code = exit_code_for(e)
        logger.error(f"Run '{subcommand}' failed: {e}")
        result = {
            "status": "error",
            "message": str(e),
            "exit_code": code,
            "analysis": getattr(e, "analysis", {}),
        }
        if run is not None:
            run.update_status("error", result)
        return result
    finally:
        try:
            save_manifest(manager, options.out)
        except (OSError, TypeError, ValueError) as e:
            logger.error(f"Could not save the run manifest: {e}")
