#!/usr/bin/env python3
"""
hybridqos - QoS analysis of hybrid RF/VLC links from scenario files

Usage:
    hybridqos run <scenario> [--out DIR] [--seed N] [--quick]
    hybridqos validate <scenario> [--out DIR] [--seed N] [--quick] [--traces DIR]
    hybridqos selftest [--quick] [--checks NAMES] [--list-checks]
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .errors import HybridQosError
from .scenario import load_scenario
from .selftest import SelfTest, failed, run_selftest
from .sweeps import RowStatus, RunOptions, ValidationRow, run_scenario, run_validation

EXIT_OK = 0
EXIT_FAIL = 2


def _load(args: argparse.Namespace):
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    return scenario


def _print_artifacts(artifacts: List[Path]) -> None:
    print("\n📁 Files saved:")
    for path in artifacts:
        print(f"   {path}")


def print_validation(rows: List[ValidationRow]) -> None:
    """Validation rows grouped by status, failures first"""
    if not rows:
        print("\n⚠️  No validation rows were produced")
        return
    by_status = {status: [r for r in rows if r.status is status] for status in RowStatus}
    print(f"\n🔍 {len(rows)} validation rows:")
    print(f"  ✅ {len(by_status[RowStatus.PASS])} passed")
    print(f"  ❌ {len(by_status[RowStatus.FAIL])} failed")
    print(f"  ⚠️  {len(by_status[RowStatus.SKIP])} skipped")
    print()
    for status in (RowStatus.FAIL, RowStatus.SKIP, RowStatus.PASS):
        for row in by_status[status]:
            print(f"  {row}")


def cmd_run(args: argparse.Namespace) -> int:
    scenario = _load(args)
    print(f"🔍 Running scenario '{scenario.name}' (seed {scenario.seed})...")
    artifacts = run_scenario(scenario, Path(args.out), RunOptions(quick=args.quick))
    print(f"✅ {len(artifacts)} artifacts written")
    _print_artifacts(artifacts)
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    scenario = _load(args)
    print(f"🔍 Validating bounds for scenario '{scenario.name}' (seed {scenario.seed})...")
    traces = Path(args.traces) if args.traces else None
    rows, artifacts = run_validation(scenario, Path(args.out), RunOptions(quick=args.quick), traces)
    print_validation(rows)
    _print_artifacts(artifacts)
    failures = [r for r in rows if r.status is RowStatus.FAIL]
    if failures:
        print(f"\n❌ {len(failures)} rows exceed their analytical bound")
        return EXIT_FAIL
    print("\n✅ Every simulated quantity is within its bound")
    return EXIT_OK


def cmd_selftest(args: argparse.Namespace) -> int:
    if args.list_checks:
        SelfTest().list_checks()
        return EXIT_OK
    names = None
    if args.checks:
        names = [name.strip() for name in args.checks.split(',')]
    results = run_selftest(args.quick, names)
    if failed(results):
        print("\n❌ Self-test failed")
        return EXIT_FAIL
    print("\n✅ All checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='hybridqos',
        description='Statistical QoS analysis and simulation of hybrid RF/VLC links',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Sweep the average power and write one CSV per strategy
  %(prog)s run scenarios/rho_vs_pavg.json --out results/

  # Same sweep on smaller grids, with a different seed
  %(prog)s run scenarios/rho_vs_pavg.json --quick --seed 7

  # Compare the backlog and delay bounds with simulated queues
  %(prog)s validate scenarios/delay_vs_lambda.json --out results/delay --traces results/delay/traces

  # Fast self-test, or only a couple of suites
  %(prog)s selftest --quick
  %(prog)s selftest --checks solve_ab_residuals,selection_consistency

Environment:
  HYBRIDQOS_THREADS  worker pool size (default: min(4, CPU count))
        """
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--verbose', '-v', action='store_true', help='Enable debug logging')
    common.add_argument('--quick', action='store_true',
                        help='Smaller grids, shorter simulations and fewer self-test draws')

    scenario_args = argparse.ArgumentParser(add_help=False)
    scenario_args.add_argument('scenario', help='Scenario file (JSON or YAML)')
    scenario_args.add_argument('--out', default='results',
                               help='Output directory (default: results)')
    scenario_args.add_argument('--seed', type=int, help='Override the scenario seed')

    commands = parser.add_subparsers(dest='command', required=True)
    run = commands.add_parser('run', parents=[common, scenario_args],
                              help='Compute the sweep and write one CSV per strategy')
    run.set_defaults(handler=cmd_run)

    validate = commands.add_parser('validate', parents=[common, scenario_args],
                                   help='Check analytical bounds against simulation')
    validate.add_argument('--traces', help='Write per-seed queue traces and summaries here')
    validate.set_defaults(handler=cmd_validate)

    selftest = commands.add_parser('selftest', parents=[common],
                                   help='Run the residual, identity and consistency suites')
    selftest.add_argument('--checks', help='Comma-separated list of checks to run (default: all)')
    selftest.add_argument('--list-checks', action='store_true', help='List available checks')
    selftest.set_defaults(handler=cmd_selftest)
    return parser


def main(argv: Optional[List[str]] = None) -> None:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s')
    try:
        code = args.handler(args)
    except HybridQosError as e:
        print(f"❌ {e}", file=sys.stderr)
        sys.exit(e.exit_code)
    sys.exit(code)


if __name__ == '__main__':
    main()
