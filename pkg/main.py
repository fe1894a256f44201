import argparse
import sys
from typing import List, Optional

from core.ScenarioRunner import ScenarioRunner
from services.config.scenario import load_scenario
from services.solver.integrator import IntegrationError
from utils.config import APP_VERSION, EXIT_CONFIG
from utils.logging_config import setup_logging

COMMANDS = ("bound", "verify", "sweep", "oracle-check", "simulate")

OUTPUT_HELP = """\
output files (data files are deterministic; run metadata goes to <command>.meta.json):
  certificate.json     delta, beta, M, d, prefactor, certified, S, grid, family, exhaustive, ...
  alpha_star.csv       t, alpha_star
  pair_report.csv      t, gap1, gap_weighted, bound, holds
  verify_summary.json  holds, fitted_rate, min_margin, doubling_gap, ...
  sweep.csv            delta, beta, M, prefactor, certified, best
  oracle_report.json   method, max_discrepancy, worst_i, worst_j, worst_t, passed
  trajectory.csv       t, p0, p1, ..., pN
  matrix_A_t0.csv, matrix_Bstar_t0.csv   row, col, value (with --dump-matrix)

exit codes: 0 success/holds, 1 usage/config, 2 violation/discrepancy, 3 uncertified
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; usage errors here map to 1."""

    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--scenario", required=True, help="path to the JSON scenario file")
    common.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    common.add_argument("--dump-matrix", action="store_true", help="also write A(0) and B*(0) as CSV")
    common.add_argument("--log-dir", default="logs", help="directory for run logs")
    common.add_argument("--verbose", action="store_true", help="debug output on the console")

    parser = _Parser(
        prog="main.py",
        description="Convergence-rate certificates for batch-arrival / batch-service Markov chains.",
        epilog=OUTPUT_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=APP_VERSION)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("bound", parents=[common], help="compute the convergence certificate")
    verify = sub.add_parser("verify", parents=[common], help="check the certificate against integrated trajectories")
    verify.add_argument("--strict-truncation", action="store_true", help="fail when truncation doubling is flagged")
    verify.add_argument("--override-beta", type=float, default=None, help="replace beta (testing only)")
    sub.add_parser("sweep", parents=[common], help="certificates over family.deltas")
    oracle = sub.add_parser("oracle-check", parents=[common], help="compare independent routes to B*")
    oracle.add_argument("--inject-bug", action="store_true", help="perturb the reference stencil (testing only)")
    sub.add_parser("simulate", parents=[common], help="export one trajectory")
    return parser


def run(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    runner = ScenarioRunner(scenario, args.command, args.out, args.dump_matrix)
    if args.command == "bound":
        return runner.bound()
    if args.command == "verify":
        return runner.verify(args.strict_truncation, args.override_beta)
    if args.command == "sweep":
        return runner.sweep()
    if args.command == "oracle-check":
        return runner.oracle_check(args.inject_bug)
    return runner.simulate()


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    logger = setup_logging(args.log_dir, args.verbose)
    try:
        return run(args)
    except (ValueError, IntegrationError) as e:
        # ConfigError, RateError and PatternLimitError are ValueErrors
        logger.error(f"{args.command} failed: {e}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
