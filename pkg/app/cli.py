"""
moelo command line: synthetic data, scenario runs, granularity sweeps, evaluation, self-checks
and the online localization service.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any

from app.config.run_config import RunConfig, load_run_config
from app.config.settings import Config
from app.core.errors import ConfigError, MoeloError
from app.core.logger import logger
from app.core.utils import write_json

TRACK_CHOICES = ["dil", "cil", "cdil", "all"]


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run config; flags override its values")
    common.add_argument("--seed", type=int, help="master seed; every random stream is derived from it")
    common.add_argument("--track", choices=TRACK_CHOICES, help="scenario track(s) to run")
    common.add_argument("--building", choices=["building1", "building2"], help="synthetic building template")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--n-rp", dest="n_rp", type=int, help="RPs per region")
    common.add_argument("--jobs", type=int, help="concurrent (track, seed) jobs")
    common.add_argument("--dataset", type=Path, help="fingerprint CSV to use instead of generating one")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(prog="moelo", description="Continual-learning mixture-of-experts for Wi-Fi fingerprint localization")
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")

    commands.add_parser("gen-data", parents=[common], help="generate a synthetic fingerprint dataset CSV")
    run = commands.add_parser("run", parents=[common], help="run scenario tracks and write metrics.csv and summary.json")
    run.add_argument("--resume", action="store_true", help="continue from experiment.json in the job directory")
    commands.add_parser("sweep", parents=[common], help="region granularity sweep over scenario.sweep_n_rp")
    evaluate = commands.add_parser("eval", parents=[common], help="evaluate a model checkpoint on a dataset")
    evaluate.add_argument("--checkpoint", type=Path, required=True, help="model.json written by `run`")
    evaluate.add_argument("--unit", choices=["device", "region"], default="region", help="learning unit to report")
    commands.add_parser("check", parents=[common], help="gradient check and ETF property suite")
    serve = commands.add_parser("serve", help="serve the online localization API")
    serve.add_argument("--checkpoint", type=Path, help="model.json to load (default: CHECKPOINT_PATH)")
    serve.add_argument("--host", default=Config.SERVE_HOST)
    serve.add_argument("--port", type=int, default=Config.SERVE_PORT)
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    overrides: dict[str, Any] = {"seed": args.seed, "output_dir": args.out, "dataset": args.dataset}
    scenario: dict[str, Any] = {}
    if args.seed is not None:
        scenario["seeds"] = [args.seed]
    if args.track is not None:
        scenario["tracks"] = ["dil", "cil", "cdil"] if args.track == "all" else [args.track]
    if args.n_rp is not None:
        scenario["n_rp"] = args.n_rp
    if args.jobs is not None:
        scenario["jobs"] = args.jobs
    if scenario:
        overrides["scenario"] = scenario
    if args.building is not None:
        overrides["world"] = {"building": args.building}
    return overrides


def _emit(payload: Any) -> None:
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def cmd_gen_data(config: RunConfig, args: argparse.Namespace) -> int:
    from app.module.fingerprints.dataset_io import save_dataset_csv
    from app.module.fingerprints.world import generate_dataset

    building, dataset = generate_dataset(config.world, config.devices, config.scenario.n_rp, config.seed)
    path = save_dataset_csv(dataset, config.output_dir / "dataset.csv")
    _emit({"dataset": str(path), "building": building.name, "fingerprints": len(dataset), "aps": dataset.n_aps, "regions": len(dataset.regions())})
    return 0


def cmd_run(config: RunConfig, args: argparse.Namespace) -> int:
    from app.module.scenarios.jobs import run_jobs

    summaries = run_jobs(config, config.output_dir, resume=args.resume)
    _emit(
        [
            {
                "track": s["track"],
                "seed": s["seed"],
                "average_forgetting_m": s["average_forgetting_m"],
                "final_mean_le_m": s["final_mean_le_m"],
            }
            for s in summaries
        ]
    )
    return 0


def cmd_sweep(config: RunConfig, args: argparse.Namespace) -> int:
    from app.module.scenarios.jobs import job_data
    from app.module.scenarios.reports import write_sweep_csv
    from app.module.scenarios.schemas import Track
    from app.module.scenarios.sweep import granularity_sweep

    track = Track(args.track) if args.track not in (None, "all") else Track.CDIL
    building, dataset = job_data(config, config.seed)
    rows = granularity_sweep(
        building,
        dataset,
        config.devices,
        config.scenario.sweep_n_rp,
        config.model,
        config.train,
        config.seed,
        track=track,
        test_fraction=config.scenario.test_fraction,
    )
    write_sweep_csv(rows, config.output_dir / "sweep.csv")
    _emit([row.model_dump() for row in rows])
    return 0


def cmd_eval(config: RunConfig, args: argparse.Namespace) -> int:
    from app.module.moe_model.checkpoint import load_model_checkpoint
    from app.module.scenarios.jobs import job_data
    from app.module.scenarios.reports import write_metrics_csv
    from app.module.scenarios.runner import evaluate_units
    from app.module.scenarios.schemas import MetricLog

    model = load_model_checkpoint(args.checkpoint)
    _, dataset = job_data(config, config.seed)
    pairs = [pair for pair in dataset.pairs() if pair[1] in model.registry]
    log = MetricLog(records=evaluate_units(model, dataset, pairs, args.unit, step=0, label="eval", mode=None))
    write_metrics_csv(log, config.output_dir / "eval.csv")
    _emit({"units": {r.unit_id: r.le_mean_m for r in log.records}, "mean_le_m": log.step_mean(0)})
    return 0


def cmd_check(config: RunConfig, args: argparse.Namespace) -> int:
    from app.module.moe_model.diagnostics import run_property_suite

    report = run_property_suite(seed=config.seed)
    write_json(config.output_dir / "check.json", report.model_dump(mode="json"))
    _emit(
        {
            "passed": report.passed,
            "frames_ok": report.frames_ok,
            "gradients_ok": report.gradients_ok,
            "max_grad_relative_error": max(case.report.max_relative_error for case in report.gradients),
            "fused_max_deviation": report.fused_max_deviation,
        }
    )
    return 0 if report.passed else 1


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from app.main import create_app
    from app.module.moe_model.checkpoint import load_model_checkpoint

    checkpoint = args.checkpoint or (Path(Config.CHECKPOINT_PATH) if Config.CHECKPOINT_PATH else None)
    if checkpoint is None:
        raise ConfigError("serve needs --checkpoint or CHECKPOINT_PATH")
    uvicorn.run(create_app(load_model_checkpoint(checkpoint)), host=args.host, port=args.port)
    return 0


COMMANDS = {
    "gen-data": cmd_gen_data,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "eval": cmd_eval,
    "check": cmd_check,
}


def parse_and_dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2

    try:
        if args.command == "serve":
            return cmd_serve(args)
        config = load_run_config(args.config, _overrides(args))
        return COMMANDS[args.command](config, args)
    except MoeloError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except Exception as e:
        logger.exception(f"Unexpected failure in `{args.command}`: {e}")
        return 1


def main() -> None:
    sys.exit(parse_and_dispatch())


if __name__ == "__main__":
    main()
