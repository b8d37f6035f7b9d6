# tests/test_commands.py

import os
from unittest.mock import AsyncMock

import numpy as np
import pytest

from resonant_cr import commands, config
from resonant_cr.commands import execute, read_kappa
from resonant_cr.data_manager import load_csv, load_from_json, read_resonant_index, read_trajectory
from resonant_cr.errors import AccuracyError
from resonant_cr.lattice import exhaustive_pairs
from resonant_cr.schemas import (
    ArithParams,
    CalibrateParams,
    CompareParams,
    ConvergeParams,
    EvolveParams,
    KernelParams,
    ResonantParams,
)


def _names(result):
    return sorted(os.path.basename(p) for p in result["artifacts"])


@pytest.mark.asyncio
async def test_arith_run(run_options, experiment_manager):
    # Arrange
    params = ArithParams(
        q_max=12,
        d_values=[4],
        random_c=5,
        check_brute=True,
        multiplicativity_max=30,
        X=1000,
        A_X=100,
        zeta_Q=1000,
    )

    # Act
    result = await execute("arith", params, run_options, experiment_manager)

    # Assert
    assert result["status"] == "success"
    summary = result["summary"]
    assert summary["sqc_rows"] == 60
    assert summary["brute_checked"] == 60
    assert summary["brute_mismatches"] == 0
    assert summary["multiplicativity_failures"] == 0
    assert _names(result) == ["arith.json", "multiplicativity.csv", "partial_sum_M.dat", "sqc.csv"]
    table = load_csv(os.path.join(result["out_dir"], "sqc.csv"))
    assert table["config"]["seed"] == 7
    assert table["config"]["params"]["q_max"] == 12
    assert table["columns"] == ["d", "q", "omega", "S", "S_brute", "match"]


@pytest.mark.asyncio
async def test_arith_rows_are_reproducible(run_options, threaded_manager, experiment_manager):
    params = ArithParams(q_max=6, d_values=[4, 6], random_c=3, multiplicativity_max=10, X=100, A_X=10, zeta_Q=100)

    first = await execute("arith", params, run_options, experiment_manager)
    second = await execute("arith", params, run_options, threaded_manager)

    rows = [load_csv(os.path.join(r["out_dir"], "sqc.csv"))["rows"] for r in (first, second)]
    assert rows[0] == rows[1]
    assert first["out_dir"] != second["out_dir"]


@pytest.mark.asyncio
async def test_kernel_run(run_options, experiment_manager):
    params = KernelParams(
        delta_identity=True, L=8, n_max=100, moment_r=[0.1], moment_orders=[0, 1], h_hat_s=[0.0, 2.0]
    )

    result = await execute("kernel", params, run_options, experiment_manager)

    summary = result["summary"]
    assert summary["max_defect"] < 1e-10
    assert list(summary["delta_identity"]) == ["8"]
    assert list(summary["moment_defects"]) == ["0.1"]
    assert "delta_identity.csv" in _names(result)


@pytest.mark.asyncio
async def test_resonant_run_exports_index(run_options, experiment_manager):
    params = ResonantParams(n=2, L=4, R_int=3)

    result = await execute("resonant", params, run_options, experiment_manager)

    summary = result["summary"]
    assert summary["verified"] is True
    assert summary["count"] == len(exhaustive_pairs(2, 0, 3))
    assert summary["route"] == "histogram"
    index = read_resonant_index(os.path.join(result["out_dir"], "resonant.ridx"))
    assert index["tuples"].shape == (summary["count"], 4)


@pytest.mark.asyncio
async def test_quintic_resonant_run(run_options, experiment_manager):
    params = ResonantParams(n=1, p=2, L=2, R_int=2, envelope={"ell": 12.0})

    result = await execute("resonant", params, run_options, experiment_manager)

    assert result["status"] == "success"
    assert result["summary"]["verified"] is True
    assert result["summary"]["route"] == "enumeration"


@pytest.mark.asyncio
async def test_sup_scan_rejects_quintic(run_options, experiment_manager):
    params = ResonantParams(n=1, p=2, L=2, R_int=2, sup_scan_L=[4])

    result = await execute("resonant", params, run_options, experiment_manager)

    assert result["status"] == "error"
    assert result["exit_code"] == 2
    runs = experiment_manager.get_run_list(status="error")
    assert len(runs) == 1


@pytest.mark.asyncio
async def test_budget_error_maps_to_exit_code(run_options, experiment_manager, monkeypatch):
    monkeypatch.setattr(config, "ENUMERATION_BUDGET", 10)

    result = await execute("resonant", ResonantParams(n=2, L=4, R_int=3), run_options, experiment_manager)

    assert result["status"] == "error"
    assert result["exit_code"] == 3
    assert result["analysis"]["budget"] == 10


@pytest.mark.asyncio
async def test_unknown_subcommand(run_options, experiment_manager):
    result = await execute("nope", ArithParams(), run_options, experiment_manager)
    assert result["status"] == "error"
    assert result["exit_code"] == 2


@pytest.mark.asyncio
async def test_manifest_records_runs(run_options, results_dir, experiment_manager):
    result = await execute("converge", ConvergeParams(L_values=[]), run_options, experiment_manager)

    manifest = load_from_json(os.path.join(results_dir, config.RUN_MANIFEST_FILE))

    assert manifest[result["run_id"]]["status"] == "completed"
    assert manifest[result["run_id"]]["subcommand"] == "converge"


@pytest.mark.asyncio
async def test_converge_empty_sweep(run_options, experiment_manager):
    result = await execute("converge", ConvergeParams(L_values=[]), run_options, experiment_manager)

    assert result["status"] == "success"
    assert result["summary"]["L_values"] == []
    assert _names(result) == ["converge.csv"]


@pytest.mark.asyncio
async def test_converge_n3(run_options, threaded_manager):
    params = ConvergeParams(n=3, L_values=[4, 8], K_points=[[0.0, 0.0, 0.0]], kappa=1.0)

    result = await execute("converge", params, run_options, threaded_manager)

    summary = result["summary"]
    assert summary["L_values"] == [4, 8]
    assert len(summary["errors"]) == 2
    assert summary["kappa"] == 1.0


@pytest.mark.asyncio
async def test_calibration_feeds_converge(run_options, results_dir, experiment_manager):
    # Arrange
    calibrated = await execute("calibrate", CalibrateParams(n=3, L=4), run_options, experiment_manager)

    # Act
    kappa = read_kappa(results_dir, 3)
    result = await execute(
        "converge", ConvergeParams(n=3, L_values=[4], K_points=[[0.0, 0.0, 0.0]]), run_options, experiment_manager
    )

    # Assert
    assert calibrated["status"] == "success"
    assert kappa == pytest.approx(calibrated["summary"]["kappa"])
    assert result["summary"]["kappa"] == pytest.approx(kappa)
    assert read_kappa(results_dir, 2) == 1.0
    assert os.path.exists(os.path.join(calibrated["out_dir"], config.CALIBRATION_FILE))


@pytest.mark.asyncio
async def test_evolve_nls_run(run_options, experiment_manager):
    params = EvolveParams(n=2, L=4, Lambda=2, eps=0.5, dt=0.01, t_final=0.05, snapshot_every=1)

    result = await execute("evolve", params, run_options, experiment_manager)

    summary = result["summary"]
    assert summary["steps"] == 5
    assert summary["snapshots"] == 6
    assert summary["mass_drift"] < 1e-6
    assert "pad_band_fraction" in summary
    traj = read_trajectory(os.path.join(result["out_dir"], "trajectory.traj"))
    assert traj["amplitudes"].shape == (6, 5, 5)
    assert traj["scheme"] == "rk4"


@pytest.mark.asyncio
async def test_compare_resonant_mode(run_options, experiment_manager):
    params = CompareParams(
        mode="resonant", L_values=[4], Lambda=2, eps_values=[0.4, 0.2], t_final=0.1, dt=0.01
    )

    result = await execute("compare", params, run_options, experiment_manager)

    summary = result["summary"]
    assert summary["L"] == 4
    assert len(summary["defects"]) == 2
    assert all(np.isfinite(summary["defects"]))
    assert "compare_resonant.csv" in _names(result)


@pytest.mark.asyncio
async def test_compare_empty_sweep(run_options, experiment_manager):
    result = await execute("compare", CompareParams(L_values=[]), run_options, experiment_manager)
    assert result["status"] == "success"
    assert result["summary"]["errors"] == []


@pytest.mark.asyncio
@pytest.mark.parametrize(
    "error, code",
    [
        (AccuracyError("quadrature stalled", achieved=3e-3), 4),
        (RuntimeError("unexpected"), 1),
    ],
)
async def test_failures_map_to_exit_codes(run_options, experiment_manager, mocker, error, code):
    # Arrange
    failing = AsyncMock(side_effect=error)
    mocker.patch.dict(commands.COMMANDS, {"kernel": failing})

    # Act
    result = await execute("kernel", KernelParams(), run_options, experiment_manager)

    # Assert
    failing.assert_awaited_once()
    assert result["status"] == "error"
    assert result["exit_code"] == code
    assert experiment_manager.get_run_list(status="error")[0].result["exit_code"] == code


@pytest.mark.asyncio
async def test_manifest_failure_does_not_fail_the_run(run_options, experiment_manager, mocker):
    mocker.patch.object(commands, "save_manifest", side_effect=OSError("read-only"))

    result = await execute("converge", ConvergeParams(L_values=[]), run_options, experiment_manager)

    assert result["status"] == "success"
    commands.save_manifest.assert_called_once()
