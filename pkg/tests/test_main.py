# tests/test_main.py

import json
import os

import pytest

from resonant_cr import __version__
from resonant_cr.main import _overrides, build_parser, main, main_async


def _printed(capsys):
    return json.loads(capsys.readouterr().out)


def _write_config(tmp_path, text):
    path = tmp_path / "experiment.toml"
    path.write_text(text)
    return str(path)


@pytest.mark.asyncio
async def test_config_file_run(tmp_path, results_dir, capsys):
    # Arrange
    path = _write_config(
        tmp_path,
        "[run]\nseed = 11\nserial = true\n\n"
        "[kernel]\nmoment_r = [0.1]\nmoment_orders = [0]\nh_hat_s = [0.0]\n",
    )

    # Act
    code = await main_async(["run", "kernel", "--config", path, "--out", results_dir])

    # Assert
    assert code == 0
    result = _printed(capsys)
    assert result["status"] == "success"
    assert list(result["summary"]["moment_defects"]) == ["0.1"]
    assert os.path.exists(os.path.join(results_dir, "runs.json"))


@pytest.mark.asyncio
async def test_flags_override_config_file(tmp_path, results_dir, capsys):
    path = _write_config(tmp_path, "[evolve]\ndt = 0.5\nLambda = 2\n")

    code = await main_async(
        [
            "run",
            "evolve",
            "--config",
            path,
            "--out",
            results_dir,
            "--dt",
            "0.01",
            "--t-final",
            "0.02",
            "--L",
            "4",
            "--eps",
            "0.3",
        ]
    )

    assert code == 0
    summary = _printed(capsys)["summary"]
    assert summary["steps"] == 2
    assert summary["system"] == "nls"


@pytest.mark.asyncio
async def test_empty_sweep_from_flag(results_dir, capsys):
    code = await main_async(["run", "converge", "--L-values", "--out", results_dir])

    assert code == 0
    assert _printed(capsys)["summary"]["L_values"] == []


@pytest.mark.asyncio
@pytest.mark.parametrize(
    "text",
    [
        "[kernel]\nsharpnes = 6.0\n",
        "[kernels]\nsharpness = 6.0\n",
        "[run]\nthreads = 0\n",
        "[kernel\n",
    ],
)
async def test_bad_config_exits_with_2(tmp_path, results_dir, capsys, text):
    path = _write_config(tmp_path, text)

    code = await main_async(["run", "kernel", "--config", path, "--out", results_dir])

    assert code == 2
    assert _printed(capsys)["status"] == "error"


@pytest.mark.asyncio
async def test_missing_config_file(tmp_path, results_dir, capsys):
    missing = str(tmp_path / "absent.toml")

    code = await main_async(["run", "arith", "--config", missing, "--out", results_dir])

    assert code == 2
    assert "not found" in _printed(capsys)["message"]


@pytest.mark.asyncio
async def test_zero_threads_rejected(results_dir, capsys):
    code = await main_async(["run", "arith", "--threads", "0", "--out", results_dir])
    assert code == 2


@pytest.mark.asyncio
async def test_command_failure_exit_code(results_dir, capsys):
    code = await main_async(
        ["run", "evolve", "--dt", "1.0", "--t-final", "1.0", "--eps", "3.0", "--Lambda", "2", "--out", results_dir]
    )

    result = _printed(capsys)
    assert code == 2
    assert result["status"] == "error"
    assert "ratio" in result["analysis"]


@pytest.mark.asyncio
async def test_manifest_accumulates_across_invocations(results_dir, capsys):
    await main_async(["run", "converge", "--L-values", "--out", results_dir])
    await main_async(["run", "converge", "--L-values", "--out", results_dir])
    capsys.readouterr()

    with open(os.path.join(results_dir, "runs.json")) as f:
        manifest = json.load(f)

    assert len(manifest) == 2


def test_main_exits_with_code(results_dir):
    with pytest.raises(SystemExit) as exc_info:
        main(["run", "converge", "--L-values", "--out", results_dir])
    assert exc_info.value.code == 0


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc_info:
        build_parser().parse_args(["--version"])
    assert exc_info.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_unknown_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit) as exc_info:
        build_parser().parse_args(["run", "nope"])
    assert exc_info.value.code == 2


def test_single_L_maps_to_sweep():
    args = build_parser().parse_args(["run", "converge", "--L", "8"])
    assert _overrides(args) == {"L_values": [8]}


@pytest.mark.asyncio
async def test_runs_lists_the_manifest(results_dir, capsys):
    # Arrange
    await main_async(["run", "converge", "--L-values", "--out", results_dir])
    await main_async(
        ["run", "evolve", "--dt", "1.0", "--t-final", "1.0", "--eps", "3.0", "--Lambda", "2", "--out", results_dir]
    )
    capsys.readouterr()

    # Act
    code = await main_async(["runs", "--out", results_dir])
    listed = json.loads(capsys.readouterr().out)
    errors = await main_async(["runs", "--out", results_dir, "--status", "error"])
    failed = json.loads(capsys.readouterr().out)

    # Assert
    assert code == errors == 0
    assert sorted(row["subcommand"] for row in listed) == ["converge", "evolve"]
    assert [row["subcommand"] for row in failed] == ["evolve"]
    assert failed[0]["status"] == "error"


@pytest.mark.asyncio
async def test_runs_on_empty_results_dir(results_dir, capsys):
    code = await main_async(["runs", "--out", results_dir, "--number", "5"])
    assert code == 0
    assert json.loads(capsys.readouterr().out) == []
