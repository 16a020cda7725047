from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Optional

from lib.harness import experiments
from lib.harness.config import apply_overrides, load_config
from lib.harness.io import OutputTracker
from lib.harness.verify import VerifySizes, run_checks, write_summary
from lib.utils import DiffusionError

logger = logging.getLogger(__name__)

COMMANDS = ["sample", "encode", "reconstruct", "interpolate", "verify", "bench", "sweep", "train"]

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_ERROR = 2


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run config")
    common.add_argument("--seed", type=int)
    common.add_argument("--steps", type=int, help="trajectory length S")
    policy = common.add_mutually_exclusive_group()
    policy.add_argument("--eta", type=float)
    policy.add_argument("--sigma-hat", action="store_true", default=None)
    common.add_argument("--mode", choices=["linear", "quadratic"])
    common.add_argument("--out", type=Path)
    common.add_argument("--chains", type=int)
    common.add_argument("--plot", choices=["on", "off"])
    common.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(prog="python -m lib.harness", description="sigma-family diffusion desk kit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        command = sub.add_parser(name, parents=[common])
        if name == "sample":
            command.add_argument("--intermediates", action="store_true", default=None)
        if name == "interpolate":
            command.add_argument("--line", action="store_true", help="one slerp line instead of the grid")
        if name == "verify":
            command.add_argument("--quick", action="store_true", help="reduced problem sizes")
            command.add_argument("--skip", nargs="*", default=[], help="check names to skip")
    return parser


def overrides_from_args(args: argparse.Namespace) -> dict[str, Any]:
    overrides = {
        "seed": args.seed,
        "sampler.steps": args.steps,
        "sampler.mode": args.mode,
        "out": str(args.out) if args.out is not None else None,
        "chains": args.chains,
        "plot": None if args.plot is None else args.plot == "on",
        "intermediates": getattr(args, "intermediates", None),
    }
    if args.eta is not None:
        overrides["sampler.eta"] = args.eta
        overrides["sampler.sigma_hat"] = False
    if args.sigma_hat:
        overrides["sampler.sigma_hat"] = True
    return overrides


def configure_logging(level: str) -> None:
    logging.basicConfig(level=getattr(logging, level), format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def run_command(args: argparse.Namespace) -> int:
    config = apply_overrides(load_config(args.config), overrides_from_args(args))
    run = experiments.Run(config)

    with OutputTracker(config.out) as outputs:
        if args.command == "verify":
            sizes = VerifySizes.quick() if args.quick else VerifySizes()
            sizes.skip = tuple(args.skip)
            results = run_checks(run.schedule, run.spec, sizes, config.seed)
            write_summary(outputs.path("verify.json"), results)
            failed = [r.name for r in results if not r.passed]
            if failed:
                logger.error("failed checks: %s", ", ".join(failed))
                return EXIT_CHECK_FAILED
        elif args.command == "sample":
            experiments.sample(run, outputs)
        elif args.command == "encode":
            experiments.encode_command(run, outputs)
        elif args.command == "reconstruct":
            experiments.reconstruct(run, outputs)
        elif args.command == "interpolate":
            experiments.interpolate(run, outputs, line=args.line)
        elif args.command == "bench":
            experiments.bench(run, outputs)
        elif args.command == "sweep":
            experiments.sweep(run, outputs)
        elif args.command == "train":
            experiments.train(run, outputs)
    return EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return run_command(args)
    except DiffusionError as e:
        logger.error("%s", e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
