#!/usr/bin/env python
"""Command-line interface for the money-burning mechanism simulator.

Usage:
    # Monte Carlo estimates for two mechanisms on a uniform market
    python -m scripts.cli simulate --n 10 --m 10 --dist uniform:0,1 \
        --mechanism random-favorites --mechanism prior-free-favorites --trials 200000

    # Best-response audit of one bidder
    python -m scripts.cli bic-audit --mechanism prior-free-favorites \
        --market instances/uniform_favorites_n4.json --true 0.9,1.0 --report 0.9,0

    # Optimal BIC mechanism of a finite instance
    python -m scripts.cli opt-lp --instance instances/discard_c4.json

    # Ironed virtual values as CSV
    python -m scripts.cli iron --dist pareto:2,1 --grid 4096

    # Named experiment; exit code 1 when a gating check fails
    python -m scripts.cli experiment items-ge-bidders

Output is JSON on stdout (CSV with --csv); logs go to stderr. The default
seed comes from the config file or the MBSIM_SEED environment variable.
Exit codes: 0 ok, 1 check failed or numerical failure, 2 usage error.
"""

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

# Add repo root to path for direct script execution
repo_root = Path(__file__).parent.parent
if str(repo_root) not in sys.path:
    sys.path.insert(0, str(repo_root))

import pandas as pd  # noqa: E402

from mbsim.audit import (  # noqa: E402
    AuditConfig,
    best_response_gain,
    iid_market,
    load_market_file,
    misreport_grid,
)
from mbsim.config import MbsimConfig, get_default_config, load_config_from_file  # noqa: E402
from mbsim.dist import parse_distribution  # noqa: E402
from mbsim.errors import MbsimError, UsageError, exit_code_for  # noqa: E402
from mbsim.experiments import list_experiments, run_experiment  # noqa: E402
from mbsim.ironing import iron_distribution  # noqa: E402
from mbsim.mechanisms import MechanismId, parse_mechanism  # noqa: E402
from mbsim.optlp import discard_instance, load_instance, optimal_utility  # noqa: E402
from mbsim.runner import MonteCarloRunner  # noqa: E402
from mbsim.schemas import MarketConfig  # noqa: E402

logger = logging.getLogger("mbsim.cli")


def _vector(text: str) -> Tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="YAML or JSON config file")
    common.add_argument("--log-level", type=str, default=None,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="Logging level (default from config)")
    common.add_argument("--threads", type=int, default=None, help="Worker threads")
    common.add_argument("--seed", type=int, default=None, help="Run seed (default from config)")
    common.add_argument("--csv", action="store_true", help="Emit CSV instead of JSON")

    parser = argparse.ArgumentParser(
        prog="mbsim",
        description="Simulate and audit mechanisms for unit-demand bidders who burn payments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common], help="Monte Carlo utility estimates")
    sim.add_argument("--n", type=int, required=True, help="Number of bidders")
    sim.add_argument("--m", type=int, required=True, help="Number of items")
    sim.add_argument("--dist", type=str, default="uniform:0,1", help="Value distribution")
    sim.add_argument("--mechanism", action="append", dest="mechanisms",
                     choices=[m.value for m in MechanismId], help="Mechanism (repeatable)")
    sim.add_argument("--trials", type=int, default=10_000, help="Number of trials")
    sim.add_argument("--validate", action="store_true", help="Check every outcome")

    audit = sub.add_parser("bic-audit", parents=[common], help="Best-response gain audit")
    audit.add_argument("--mechanism", required=True, choices=[m.value for m in MechanismId])
    audit.add_argument("--market", type=str, help="JSON market file (per-bidder, per-item distributions)")
    audit.add_argument("--n", type=int, help="Bidders in an i.i.d. market")
    audit.add_argument("--m", type=int, help="Items in an i.i.d. market")
    audit.add_argument("--dist", type=str, default="uniform:0,1", help="Distribution of an i.i.d. market")
    audit.add_argument("--bidder", type=int, default=0, help="Audited bidder")
    audit.add_argument("--true", type=_vector, required=True, dest="true_type",
                       help="True type, comma-separated")
    audit.add_argument("--report", type=_vector, action="append", dest="reports", default=[],
                       help="Extra candidate report (repeatable)")
    audit.add_argument("--grid", type=int, default=0, dest="grid_points",
                       help="Also try this many favorite-switch and rescaled reports")
    audit.add_argument("--trials", type=int, default=100_000, help="Number of trials")
    audit.add_argument("--max-z", type=float, default=None,
                       help="Exit 1 when the best gain's z-score exceeds this")
    audit.add_argument("--validate", action="store_true", help="Check every outcome")

    lp = sub.add_parser("opt-lp", parents=[common], help="Optimal BIC mechanism of a finite instance")
    lp.add_argument("--instance", type=str, help="Finite instance JSON")
    lp.add_argument("--discard-c", type=float, default=None,
                    help="Use the built-in two-bidder discard instance with this c")
    lp.add_argument("--full-allocation", action="store_true", help="Require every item to be allocated")

    iron = sub.add_parser("iron", parents=[common], help="Ironed virtual values (CSV)")
    iron.add_argument("--dist", type=str, required=True, help="Continuous value distribution")
    iron.add_argument("--grid", type=int, default=None, help="Grid size (default from config)")
    iron.add_argument("--summary", action="store_true", help="Emit a JSON summary instead of CSV rows")

    exp = sub.add_parser("experiment", parents=[common], help="Run a named experiment")
    exp.add_argument("name", choices=list_experiments(), help="Experiment to run")
    exp.add_argument("--trials", type=int, default=None, help="Override the default trial count")

    return parser


def _load_config(args: argparse.Namespace) -> MbsimConfig:
    if args.config:
        return load_config_from_file(args.config)
    return get_default_config()


def _configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def json_ready(value: Any) -> Any:
    """Replace NaN and infinities, which JSON cannot carry, with None."""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {k: json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_ready(v) for v in value]
    return value


def _write_json(payload: Dict[str, Any]) -> None:
    sys.stdout.write(json.dumps(json_ready(payload), indent=2, allow_nan=False) + "\n")


def _emit(payload: Dict[str, Any], rows: Optional[List[Dict[str, Any]]], as_csv: bool) -> None:
    if as_csv:
        pd.DataFrame(rows or []).to_csv(sys.stdout, index=False, lineterminator="\n")
    else:
        _write_json(payload)


def cmd_simulate(args: argparse.Namespace, config: MbsimConfig) -> int:
    spec = parse_distribution(args.dist)
    market = MarketConfig(n=args.n, m=args.m, spec=spec, seed=args.seed, trials=args.trials)
    mechanisms = [parse_mechanism(text, spec) for text in (args.mechanisms or ["random-favorites"])]
    runner = MonteCarloRunner(threads=args.threads,
                              validate=args.validate or config.validate_outcomes)
    report = runner.run_trials(market, mechanisms)
    _emit(report.to_dict(), report.to_rows(), args.csv)
    return 0


def cmd_bic_audit(args: argparse.Namespace, config: MbsimConfig) -> int:
    spec = parse_distribution(args.dist)
    if args.market:
        market = load_market_file(args.market)
    elif args.n is not None and args.m is not None:
        market = iid_market(args.n, args.m, spec)
    else:
        raise UsageError("bic-audit needs --market FILE or both --n and --m")
    reports = list(args.reports)
    if args.grid_points:
        reports += misreport_grid(args.true_type, args.grid_points)
    audit = AuditConfig(
        mechanism=parse_mechanism(args.mechanism, spec),
        market=market,
        bidder=args.bidder,
        true_type=args.true_type,
        reports=reports,
        trials=args.trials,
        seed=args.seed,
        validate=args.validate or config.validate_outcomes,
    )
    report = best_response_gain(audit)
    _emit(report.to_dict(), report.to_rows(), args.csv)
    if args.max_z is not None and report.best is not None and report.best.gain.z > args.max_z:
        logger.warning("best gain z=%.2f exceeds --max-z %.2f", report.best.gain.z, args.max_z)
        return 1
    return 0


def cmd_opt_lp(args: argparse.Namespace, config: MbsimConfig) -> int:
    if args.instance:
        instance = load_instance(args.instance)
    elif args.discard_c is not None:
        instance = discard_instance(args.discard_c)
    else:
        raise UsageError("opt-lp needs --instance FILE or --discard-c")
    result = optimal_utility(instance, full_allocation=args.full_allocation)
    payload = {**result.to_dict(), "instance": instance.model_dump()}
    _emit(payload, [e.to_dict() for e in result.discard], args.csv)
    return 0 if result.solution.status == "optimal" else 1


def cmd_iron(args: argparse.Namespace, config: MbsimConfig) -> int:
    result = iron_distribution(parse_distribution(args.dist), args.grid or config.grid_size)
    if args.summary:
        payload = {"schema": config.schema_version, "dist": args.dist, **result.to_dict()}
        _write_json(payload)
    else:
        pd.DataFrame(result.to_rows(), columns=["q_mid", "theta", "ironed_theta"]).to_csv(
            sys.stdout, index=False, lineterminator="\n"
        )
    return 0


def cmd_experiment(args: argparse.Namespace, config: MbsimConfig) -> int:
    result = run_experiment(
        args.name,
        seed=args.seed,
        trials=args.trials,
        threads=args.threads,
        sigmas=config.sigma_slack,
        grid_size=config.grid_size,
    )
    rows = result.rows or [c.to_dict() for c in result.checks]
    _emit(result.to_dict(), rows, args.csv)
    return 0 if result.passed else 1


COMMANDS = {
    "simulate": cmd_simulate,
    "bic-audit": cmd_bic_audit,
    "opt-lp": cmd_opt_lp,
    "iron": cmd_iron,
    "experiment": cmd_experiment,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        config = _load_config(args)
        _configure_logging(args.log_level or config.log_level)
        if args.seed is None:
            args.seed = config.default_seed
        if args.threads is None:
            args.threads = config.threads
        return COMMANDS[args.command](args, config)
    except (MbsimError, ValueError, FileNotFoundError) as exc:
        code = exit_code_for(exc)
        print(f"error: {exc}", file=sys.stderr)
        logger.debug("command %s failed", args.command, exc_info=True)
        return code


if __name__ == "__main__":
    sys.exit(main())
