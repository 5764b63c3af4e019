import argparse
import logging
import os
import sys
from dataclasses import replace

from utils.config_utils import MODES, parse_config
from utils.data_utils import ensure_output_dir
from utils.errors import ConfigParseError, SolverFailureError
from utils.report import Report

logger = logging.getLogger("fracpme")

EXIT_OK = 0
EXIT_RUN_FAILURE = 1
EXIT_VERIFY_FAILURE = 2
EXIT_CONFIG_ERROR = 3


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fracpme",
        description="Fractional porous medium solver, verification suite and barrier probe",
    )
    subparsers = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        sub = subparsers.add_parser(mode)
        sub.add_argument("--config", help="Run configuration (key = value with [section] headers)")
        sub.add_argument("--output", help="Artifact directory; overrides output_dir")
        sub.add_argument("--seed", type=int, help="Seed for randomised trials; overrides seed")
        sub.add_argument("--quiet", action="store_true", help="Only log warnings and errors")
    return parser


def worker_count():
    """Thread cap for sweeps, from FRACPME_THREADS"""
    raw = os.environ.get("FRACPME_THREADS", "").strip()
    if not raw:
        return 1
    try:
        workers = int(raw)
    except ValueError:
        raise ConfigParseError(f"FRACPME_THREADS must be a positive integer, got '{raw}'")
    if workers < 1:
        raise ConfigParseError(f"FRACPME_THREADS must be a positive integer, got '{raw}'")
    return workers


def load_config(args):
    text, base_dir = "", ""
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as handle:
                text = handle.read()
        except OSError as e:
            raise ConfigParseError(f"cannot read config {args.config}: {str(e)}")
        base_dir = os.path.dirname(os.path.abspath(args.config))
    config = parse_config(text, args.mode, base_dir)
    if args.output:
        config = replace(config, output_dir=args.output)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
        config.echo["seed"] = args.seed
    return config


def dispatch(config, output_dir, workers):
    """Run the handler of ``config.mode``; each handler returns a Report"""
    if config.mode == "evolve":
        import modules.evolve as evolve
        return evolve.run_evolve(config, output_dir, workers)
    elif config.mode == "aux-solve":
        import modules.aux_solve as aux_solve
        return aux_solve.run_aux_solve(config, output_dir, workers)
    elif config.mode == "probe-barrier":
        import modules.probe_barrier as probe_barrier
        return probe_barrier.run_probe_barrier(config, output_dir, workers)
    elif config.mode == "verify":
        import modules.verify as verify
        return verify.run_verify(config, output_dir, workers)
    elif config.mode == "converge":
        import modules.converge as converge
        return converge.run_converge(config, output_dir, workers)
    raise ConfigParseError(f"unknown mode '{config.mode}'")


def exit_code(report):
    if report.error is not None:
        return EXIT_RUN_FAILURE
    if report.mode == "verify" and not report.passed:
        return EXIT_VERIFY_FAILURE
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        workers = worker_count()
        config = load_config(args)
    except ConfigParseError as e:
        logger.error(f"Config error: {str(e)}")
        return EXIT_CONFIG_ERROR

    output_dir = config.output_dir
    try:
        ensure_output_dir(output_dir)
        report = dispatch(config, output_dir, workers)
    except SolverFailureError as e:
        logger.error(f"Solver failure: {str(e)}")
        report = Report(mode=config.mode, provenance={"config": config.echo}, error=str(e))
    except OSError as e:
        logger.error(f"I/O failure: {str(e)}")
        return EXIT_RUN_FAILURE
    except ValueError as e:
        # values that only fail once sampled, e.g. a profile file with negative entries
        logger.error(f"Config error: {str(e)}")
        return EXIT_CONFIG_ERROR

    try:
        report.write(os.path.join(output_dir, "report.json"))
    except OSError as e:
        logger.error(str(e))
        return EXIT_RUN_FAILURE

    code = exit_code(report)
    if code == EXIT_OK:
        logger.info(f"{config.mode} finished: {len(report.checks)} checks passed")
    else:
        logger.error(f"{config.mode} finished with exit status {code}")
    return code


if __name__ == "__main__":
    sys.exit(main())
