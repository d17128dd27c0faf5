# app.py - Command-line entry point: construct, verify, simulate and sweep.
# Loads .env first so SEARCHEQ_* defaults apply. Exit codes: 0 ok, 1 verification failed, 2 error.
#
#   python app.py construct --config market.cfg --out out/
#   python app.py verify    --config market.cfg --profile out/profile.json
#   python app.py simulate  --config market.cfg --profile out/profile.json --reps 100000 --seed 42
#   python app.py sweep     --config market.cfg --counts "1,1,1,1,1,1;4,1,1" --mus 0.2,0.5

import argparse
import logging
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

from components.reports import (equilibrium_summary, write_report, write_simulation, write_sweep,
                                write_text)
from engine.equilibrium import GroupSpec, construct_equilibrium
from engine.payoff import equilibrium_profit
from engine.simulator import MODES, simulate
from engine.sweep import sweep
from engine.verifier import Tolerances, verify
from market.errors import ConfigError, SearchModelError
from market.profiles import check_store_counts, load_profile, save_profile
from market.schema import ConfigFile, load_config

logger = logging.getLogger("searcheq")


def _default_out() -> str:
    return os.getenv("SEARCHEQ_OUTPUT_DIR", "out")


def _default_workers() -> int:
    try:
        return max(1, int(os.getenv("SEARCHEQ_WORKERS", "1")))
    except ValueError:
        return 1


def _construct(cfg: ConfigFile):
    groups = None if cfg.groups.empty else GroupSpec.from_assignment(cfg.groups)
    return construct_equilibrium(cfg.market, groups, cfg.family)


def _profile_for(args, cfg: ConfigFile):
    """--profile file checked against the config, or the equilibrium built from the config."""
    if not args.profile:
        return _construct(cfg).profile
    check_store_counts(args.profile, cfg.market.store_counts)
    return load_profile(args.profile)


def cmd_construct(args) -> int:
    cfg = load_config(args.config)
    eq = _construct(cfg)
    out = args.out or _default_out()
    save_profile(eq.profile, os.path.join(out, "profile.json"), cfg.market.store_counts)
    summary = equilibrium_summary(eq, cfg.market)
    write_text(summary, os.path.join(out, "summary.txt"))
    sys.stdout.write(summary)
    return 0


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    profile = _profile_for(args, cfg)
    tol = Tolerances.from_overrides(cfg.overrides, deviation=args.tol_deviation, profit=args.tol_profit,
                                    grid=args.grid, workers=args.workers or _default_workers())
    report = verify(profile, cfg.market, tol)
    path = write_report(report, os.path.join(args.out or _default_out(), "report.json"))
    status = "PASSED" if report.passed else f"FAILED ({', '.join(report.failed)})"
    sys.stdout.write(f"verification {status}; report written to {path}\n")
    return 0 if report.passed else 1


def cmd_simulate(args) -> int:
    if args.reps < 1:
        raise ConfigError(f"--reps must be at least 1, got {args.reps}")
    cfg = load_config(args.config)
    profile = _profile_for(args, cfg)
    workers = args.workers or _default_workers()
    result = simulate(profile, cfg.market, args.reps, args.seed, workers=workers, mode=args.mode)
    analytic = [equilibrium_profit(i, profile, cfg.market) for i in range(cfg.market.n_sellers)]
    paths = write_simulation(result, cfg.market, args.out or _default_out(), analytic)
    sys.stdout.write("".join(f"wrote {p}\n" for p in paths.values()))
    return 0


def _parse_counts(raw: Optional[str]) -> Optional[List[List[int]]]:
    if not raw:
        return None
    try:
        return [[int(x) for x in part.split(",") if x.strip()] for part in raw.split(";") if part.strip()]
    except ValueError:
        raise ConfigError(f"--counts must look like '1,1,1;2,1', got {raw!r}")


def _parse_floats(raw: Optional[str]) -> Optional[List[float]]:
    if not raw:
        return None
    try:
        return [float(x) for x in raw.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--mus must be a comma-separated list of numbers, got {raw!r}")


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    table = sweep(cfg.market, _parse_counts(args.counts), _parse_floats(args.mus),
                  family=args.family or cfg.family, replications=args.reps, seed=args.seed,
                  workers=args.workers or _default_workers())
    path = write_sweep(table, args.out or _default_out())
    sys.stdout.write(f"wrote {path} ({len(table)} rows)\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="searcheq", description="Consumer-search equilibria with chain stores")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="key=value market config file")
        p.add_argument("--out", default=None, help="output directory (default $SEARCHEQ_OUTPUT_DIR or out)")
        p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("construct", help="build the equilibrium and write profile.json + summary.txt")
    common(p)
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("verify", help="check a profile against the equilibrium conditions")
    common(p)
    p.add_argument("--profile", default=None, help="profile file (default: construct from config)")
    p.add_argument("--tol-deviation", type=float, default=None)
    p.add_argument("--tol-profit", type=float, default=None)
    p.add_argument("--grid", type=int, default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="Monte Carlo run, writes CSV tables")
    common(p)
    p.add_argument("--profile", default=None)
    p.add_argument("--reps", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=MODES, default="flow")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="equilibrium prices over a grid of store counts / mu")
    common(p)
    p.add_argument("--counts", default=None, help="store-count vectors separated by ';'")
    p.add_argument("--mus", default=None, help="comma-separated shopper fractions")
    p.add_argument("--family", default=None)
    p.add_argument("--reps", type=int, default=0, help="replications per row for the simulated column")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    logging.basicConfig(level=os.getenv("SEARCHEQ_LOG_LEVEL", "INFO").upper(), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SearchModelError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
