# resonant_cr/main.py
import argparse
import asyncio
import json
import sys
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from resonant_cr import __version__
from resonant_cr import config
from resonant_cr.commands import execute, load_manifest
from resonant_cr.errors import ConfigError, exit_code_for
from resonant_cr.experiment_manager import ExperimentManager
from resonant_cr.schemas import (
    PARAMS_BY_SUBCOMMAND,
    SUBCOMMANDS,
    RunOptions,
    load_config_file,
    resolve_params,
)

RUN_OPTION_FLAGS = ("threads", "seed", "out", "serial")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resonant-cr",
        description="Resonant lattice sums, the delta-method circle method and "
        "the continuous resonant equation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="Run one experiment subcommand.")
    run.add_argument("subcommand", choices=SUBCOMMANDS)
    run.add_argument("--config", help="TOML file with one table per subcommand.")
    run.add_argument("--threads", type=int, help="Worker threads for sweep points.")
    run.add_argument("--seed", type=int, help="Seed of every stochastic step.")
    run.add_argument("--out", help="Base results directory.")
    run.add_argument(
        "--serial", action="store_true", default=None, help="Bit-reproducible mode."
    )

    run.add_argument("--check-brute", dest="check_brute", action="store_true", default=None)
    run.add_argument("--q-max", dest="q_max", type=int)
    run.add_argument("--mu-tilde", dest="mu_tilde", type=int)
    run.add_argument(
        "--delta-identity", dest="delta_identity", action="store_true", default=None
    )
    run.add_argument("--L", dest="L", type=int, help="Single lattice scale.")
    run.add_argument(
        "--L-values",
        dest="L_values",
        type=int,
        nargs="*",
        help="Lattice scales of a sweep; no values gives an empty sweep.",
    )
    run.add_argument("--n", dest="n", type=int, help="Space dimension.")
    run.add_argument("--p", dest="p", type=int, help="Nonlinearity half-degree.")
    run.add_argument("--system", choices=["nls", "resonant", "cr"])
    run.add_argument("--scheme", choices=["rk4", "strang"])
    run.add_argument("--representation", choices=["radial", "tensor"])
    run.add_argument("--mode", choices=["cr", "resonant"])
    run.add_argument("--dt", type=float)
    run.add_argument("--t-final", dest="t_final", type=float)
    run.add_argument("--eps", type=float)
    run.add_argument("--Lambda", dest="Lambda", type=int)
    run.add_argument("--kappa", type=float)
    run.add_argument("--correction", action="store_true", default=None)
    run.add_argument("--monte-carlo", dest="monte_carlo", action="store_true", default=None)
    run.add_argument("--samples", type=int)

    runs = sub.add_parser("runs", help="List recorded runs from the manifest.")
    runs.add_argument("--out", help="Base results directory.")
    runs.add_argument(
        "--status",
        choices=["all", "completed", "running", "error", "pending"],
        default="all",
    )
    runs.add_argument("--sort", choices=["Descending", "Ascending"], default="Descending")
    runs.add_argument("--number", type=int, default=10, help="Most runs to show.")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    skip = {"command", "subcommand", "config", *RUN_OPTION_FLAGS}
    values = {k: v for k, v in vars(args).items() if k not in skip and v is not None}
    model = PARAMS_BY_SUBCOMMAND[args.subcommand]
    if "L" in values and "L" not in model.model_fields:
        values.setdefault("L_values", [values.pop("L")])
    return values


def resolve_run_options(args: argparse.Namespace, file_values: Dict[str, Any]) -> RunOptions:
    merged = dict(file_values.get("run", {}))
    merged.update({k: getattr(args, k) for k in RUN_OPTION_FLAGS if getattr(args, k) is not None})
    try:
        return RunOptions.model_validate(merged)
    except ValidationError as e:
        raise ConfigError(f"invalid [run] options: {e}") from e


def list_runs(args: argparse.Namespace) -> int:
    manager = ExperimentManager(serial=True)
    load_manifest(manager, args.out or config.RESULTS_DIR)
    runs = manager.get_run_list(status=args.status, sort=args.sort, number=args.number)
    rows = [
        {
            "run_id": run.run_id,
            "subcommand": run.subcommand,
            "status": run.status,
            "out_dir": run.out_dir,
            "updated_at": run.updated_at.isoformat(),
        }
        for run in runs
    ]
    print(json.dumps(rows, indent=2))
    return 0


async def main_async(argv: Optional[List[str]] = None) -> int:
    """Parses the command line, runs the subcommand and prints its summary."""
    args = build_parser().parse_args(argv)
    if args.command == "runs":
        return list_runs(args)
    try:
        file_values = load_config_file(args.config)
        options = resolve_run_options(args, file_values)
        params = resolve_params(
            args.subcommand, file_values.get(args.subcommand, {}), _overrides(args)
        )
    except ConfigError as e:
        config.logger.error(str(e))
        print(json.dumps({"status": "error", "message": str(e), "exit_code": e.exit_code}))
        return exit_code_for(e)

    manager = ExperimentManager(threads=options.threads, serial=options.serial)
    load_manifest(manager, options.out)
    config.logger.info(
        f"Running '{args.subcommand}' with seed={options.seed}, "
        f"threads={options.threads}, serial={options.serial}"
    )
    result = await execute(args.subcommand, params, options, manager)
    print(json.dumps(result, indent=2, default=str))
    if result["status"] == "success":
        return 0
    return result["exit_code"]


def main(argv: Optional[List[str]] = None):
    """Main entry point."""
    try:
        code = asyncio.run(main_async(argv))
    except KeyboardInterrupt:
        config.logger.info("Interrupted.")
        code = 1
    sys.exit(code)


if __name__ == "__main__":
    main()
