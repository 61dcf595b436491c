"""Command-line interface.

Subcommands:

- ``run``: one experiment from a TOML/JSON config
- ``sweep``: a lambda grid of independent experiments
- ``bound``: evaluate the applicable regret bounds for a recorded dataset
- ``synth``: generate a seeded synthetic dataset
- ``audit``: run the closed-form equivalence audits

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 audit failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .datasets import FeatureRecipe, SEASONAL_PERIODS
from .errors import (
    AuditFailure,
    ConfigError,
    DimensionMismatch,
    EmptyFile,
    InvalidPeriod,
    MissingColumn,
    NonNumericCell,
)
from .evaluation import write_summary_json
from .experiments import (
    ALGORITHMS,
    evaluate_bounds,
    load_config,
    run_audits,
    run_experiment,
    run_sweep,
    run_synth,
)

USAGE_EXIT = 1
DATA_EXIT = 2
AUDIT_EXIT = 3

_DATA_ERRORS = (MissingColumn, NonNumericCell, EmptyFile, FileNotFoundError, DimensionMismatch)
_CONFIG_ERRORS = (ConfigError, InvalidPeriod)


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; this CLI reserves 2 for data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _add_config_flags(p: _Parser) -> None:
    p.add_argument("--config", required=True, help="TOML or JSON experiment file")
    p.add_argument("--algo", choices=ALGORITHMS, help="override the configured algorithm")
    p.add_argument("--lambda", dest="lam", type=float, help="override the regularization strength")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--out", help="override the output directory")


def _overrides(args) -> dict:
    return {
        "algorithm": args.algo,
        "lam": args.lam,
        "seed": args.seed,
        "out_dir": args.out,
    }


def _seasonal_recipe(args) -> FeatureRecipe | None:
    if not args.time_index and args.seasonal == "none":
        return None
    period = None
    if args.seasonal != "none":
        period = SEASONAL_PERIODS.get(args.seasonal)
        if period is None:
            period = int(args.seasonal)
    return FeatureRecipe(time_index=args.time_index, seasonal_period=period)


def build_parser() -> _Parser:
    parser = _Parser(prog="multivaw", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    _add_config_flags(p_run)

    p_sweep = sub.add_parser("sweep", help="run a lambda grid of experiments")
    _add_config_flags(p_sweep)

    p_bound = sub.add_parser("bound", help="evaluate regret bounds for a recorded dataset")
    _add_config_flags(p_bound)

    p_synth = sub.add_parser("synth", help="generate a seeded synthetic dataset")
    p_synth.add_argument("--hierarchy", required=True, help="hierarchy spec JSON file")
    p_synth.add_argument("--steps", type=int, required=True, help="number of time steps")
    p_synth.add_argument("--num-features", type=int, required=True, help="feature dimension m")
    p_synth.add_argument("--sigma", type=float, default=0.0, help="response noise level")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument(
        "--time-index", action="store_true", help="include the 1-based time-index column"
    )
    p_synth.add_argument(
        "--seasonal",
        default="none",
        help="seasonal one-hot: none, day-of-week, month-of-year, or an integer period",
    )

    p_audit = sub.add_parser("audit", help="run the closed-form equivalence audits")
    p_audit.add_argument("--seed", type=int, default=0)
    p_audit.add_argument("--tol", type=float, help="override every audit tolerance")
    p_audit.add_argument("--out", help="directory for the audit summary JSON")
    return parser


def _cmd_run(args) -> int:
    config = load_config(args.config, _overrides(args))
    report = run_experiment(config)
    print(f"run: algorithm={config.algorithm} lam={config.lam} regret={report.regret:.6g}")
    print(f"run: outputs in {config.out_dir}")
    return 0


def _cmd_sweep(args) -> int:
    config = load_config(args.config, _overrides(args))
    results = run_sweep(config)
    best_lam, best = min(results, key=lambda pair: pair[1].regret)
    print(f"sweep: {len(results)} runs; best lam={best_lam:g} regret={best.regret:.6g}")
    print(f"sweep: outputs in {config.out_dir}")
    return 0


def _cmd_bound(args) -> int:
    config = load_config(args.config, _overrides(args))
    bounds = evaluate_bounds(config)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_summary_json(
        {"algorithm": config.algorithm, "lam": config.lam, "bounds": bounds},
        out / "bounds.json",
    )
    for name, value in sorted(bounds.items()):
        print(f"bound: {name} = {value:.6g}")
    print(f"bound: summary in {out / 'bounds.json'}")
    return 0


def _cmd_synth(args) -> int:
    bundle = run_synth(
        args.hierarchy,
        args.out,
        steps=args.steps,
        num_features=args.num_features,
        sigma=args.sigma,
        seed=args.seed,
        recipe=_seasonal_recipe(args),
    )
    print(
        f"synth: wrote {bundle.T} steps x {bundle.n} series "
        f"(m={bundle.m}) to {args.out}"
    )
    return 0


def _cmd_audit(args) -> int:
    results = run_audits(seed=args.seed, tol=args.tol)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_summary_json(results, out / "audit.json")
    failed = [name for name, row in results.items() if not row["passed"]]
    for name, row in sorted(results.items()):
        verdict = "ok" if row["passed"] else "FAIL"
        print(f"audit: {name}: deviation={row['deviation']:.3e} tol={row['tolerance']:.0e} {verdict}")
    if failed:
        raise AuditFailure(f"audits failed: {', '.join(failed)}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "bound": _cmd_bound,
    "synth": _cmd_synth,
    "audit": _cmd_audit,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except _CONFIG_ERRORS as exc:
        print(f"multivaw: config error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except _DATA_ERRORS as exc:
        print(f"multivaw: data error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except AuditFailure as exc:
        print(f"multivaw: {exc}", file=sys.stderr)
        return AUDIT_EXIT


if __name__ == "__main__":
    sys.exit(main())
