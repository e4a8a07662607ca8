"""
main.py
PURPOSE: Command-line entry point for the PPBS CZ simulator.

    python -m ppbs_cz_system.main tomo-process --config config/ideal_process.json --out results
    python -m ppbs_cz_system.main optimize --eta 0.28,0.28,0.29 --seed 1
    python -m ppbs_cz_system.main verify results/process_tomography.json

Exit codes: 0 success, 2 config error, 3 domain error, 4 null post-selection, 5 I/O.
"""

import argparse
import os
import sys

# Add the project root directory to the path for imports (script mode only)
if __package__ in (None, ""):
    sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from ppbs_cz_system import __version__
from ppbs_cz_system.control.experiment_runner import ExperimentRunner
from ppbs_cz_system.core.errors import (
    EXIT_CONFIG,
    EXIT_DOMAIN,
    EXIT_SUCCESS,
    ConfigError,
    error_kind,
    exit_code_for,
)
from ppbs_cz_system.data.result_logger import ResultLogger, verify
from ppbs_cz_system.settings.experiment_config import ExperimentConfig
from ppbs_cz_system.utils.helpers import parse_float_list

# Subcommand -> pipeline (None keeps the pipeline named in the config)
SUBCOMMANDS = {
    "simulate": None,
    "tomo-state": "state_tomography",
    "tomo-process": "process_tomography",
    "bell": "bell_analysis",
    "optimize": "correction_optimization",
    "sweep": "sweep",
}

RUN_LOG_NAME = "run_log.txt"


class Logger:
    """Tee everything written to stdout into a run log file."""

    def __init__(self, filename):
        self.terminal = sys.stdout
        self.log = open(filename, "w", encoding="utf-8")

    def write(self, message):
        if self.terminal is not None:
            self.terminal.write(message)
        self.log.write(message)
        self.log.flush()

    def flush(self):
        if self.terminal is not None:
            self.terminal.flush()
        self.log.flush()

    def close(self):
        self.log.close()


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ppbs_cz_system",
        description="Simulate and analyse the partially-polarising beamsplitter CZ gate.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, pipeline in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"run the {pipeline or 'configured'} pipeline")
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seed", type=int, help="seed for all random streams")
        p.add_argument("--out", help="output directory (default from config)")
        p.add_argument("--format", choices=("text", "table"), help="result format")
        p.add_argument("--counts", type=float, help="expected counts per setting (0 = noiseless)")
        p.add_argument("--eta", help="three reflectivities, e.g. 0.28,0.28,0.29")
        p.add_argument("--overlap", type=float, help="two-photon overlap V in [0, 1]")
        p.add_argument("--resamples", type=int, help="bootstrap resamples (0 = none)")
        p.add_argument("--stamp", action="store_true", help="record a wall-clock timestamp in the bundle")
        p.add_argument("--no-log", action="store_true", help=f"do not write {RUN_LOG_NAME}")

    v = sub.add_parser("verify", help="recompute the metrics stored in a result bundle")
    v.add_argument("bundle", help="path to a .json bundle written by a previous run")
    v.add_argument("--tolerance", type=float, default=1e-9)
    return parser


def load_config(args):
    """Config file (or defaults) with flag overrides applied."""
    config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    try:
        eta = parse_float_list(args.eta, expected=3) if args.eta else None
    except ValueError as e:
        raise ConfigError(f"--eta: {e}")
    config.apply_overrides(
        pipeline=SUBCOMMANDS[args.command],
        seed=args.seed,
        out_dir=args.out,
        format=args.format,
        counts=args.counts,
        eta=eta,
        overlap=args.overlap,
        n_resamples=args.resamples,
    )
    return config.validate()


def run_command(args):
    config = load_config(args)
    logger = None
    if not args.no_log:
        os.makedirs(config.out_dir, exist_ok=True)
        logger = Logger(os.path.join(config.out_dir, RUN_LOG_NAME))
        sys.stdout = logger
    try:
        bundle = ExperimentRunner(config, stamp=args.stamp).run()
        ResultLogger(config.out_dir).emit(bundle, config.format)
    finally:
        if logger is not None:
            sys.stdout = logger.terminal
            logger.close()
    return EXIT_SUCCESS


def verify_command(args):
    report = verify(args.bundle, tolerance=args.tolerance)
    for key, (stored, recomputed) in sorted(report.checked.items()):
        flag = "" if abs(stored - recomputed) <= report.tolerance else "  [MISMATCH]"
        print(f"[RUN] verify {key}: stored={stored!r} recomputed={recomputed!r}{flag}")
    if not report.checked:
        print("[RUN] verify: bundle holds no recomputable metrics")
    if not report.ok:
        print(f"[RUN] ERROR (domain): {len(report.mismatches)} metric(s) differ by more than {report.tolerance}")
        return EXIT_DOMAIN
    print(f"[RUN] verify: {len(report.checked)} metric(s) match")
    return EXIT_SUCCESS


def main(argv=None):
    """Parse arguments, run, and map failures to exit codes."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_SUCCESS if e.code in (0, None) else EXIT_CONFIG
    try:
        if args.command == "verify":
            return verify_command(args)
        return run_command(args)
    except (ValueError, OSError) as e:
        print(f"[RUN] ERROR ({error_kind(e)}): {e}")
        return exit_code_for(e)


if __name__ == "__main__":
    sys.exit(main())
