"""Command-line surface.

Subcommands:
  sweep-order-size  order-size sweep over single buy-then-sell plans
  sweep-periods     buy/sell period-count grid over batched plans
  single-run        one simulation with a per-fill trace
  theory-check      run one simulation and cross-check the closed-form values

Exit codes: 0 success, 1 config error, 2 oracle mismatch, 3 internal
invariant violation.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from typing import Optional

from .. import theory
from ..errors import BookExhausted, ConfigError, FundcascadeError
from ..population import NoTpSl, build_population
from ..strategy import run_single_strategy
from .config import (DEFAULT_BATCH_CONFIG, DEFAULT_SINGLE_CONFIG, SweepConfig,
                     parse_config_file, parse_config_text)
from .seeds import derive_child_seed
from .sweep import run_sweep

ORACLE_RTOL = 1e-9


class OracleMismatch(FundcascadeError):
    pass


def _load_config(args, default_text: str) -> SweepConfig:
    if args.config is not None:
        config = parse_config_file(args.config)
    else:
        config = parse_config_text(default_text, source="<builtin default>")
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["master_seed"] = args.seed
    if getattr(args, "reps", None) is not None:
        updates["repetitions"] = args.reps
    if getattr(args, "out", None) is not None:
        updates["output_path"] = args.out
    if updates:
        config = replace(config, **updates)
    return config


def _cmd_sweep(args, kind: str) -> int:
    default = DEFAULT_SINGLE_CONFIG if kind == "single" else DEFAULT_BATCH_CONFIG
    config = _load_config(args, default)
    if config.plan_kind != kind:
        raise ConfigError(
            f"this subcommand sweeps {kind} plans but the config declares "
            f"kind = {config.plan_kind}"
        )
    records = run_sweep(config, workers=args.workers)
    ok = sum(1 for r in records if r.status == "ok")
    print(f"{len(records)} runs ({ok} ok) -> {args.out or config.output_path}")
    return 0


def _single_run_setup(args, regime_override=None):
    config = _load_config(args, DEFAULT_SINGLE_CONFIG)
    if regime_override is not None:
        config = replace(config, regime=regime_override)
    ratio = config.ratios[0]
    n_mf = args.n_mf if args.n_mf else (
        config.order_sizes[0] if config.order_sizes else 500)
    child = derive_child_seed(config.master_seed, 0)
    population = build_population(
        config.population_config(ratio, derive_child_seed(child, 1)))
    return config, ratio, n_mf, child, population


def _cmd_single_run(args) -> int:
    config, ratio, n_mf, child, population = _single_run_setup(args)
    outcome = run_single_strategy(population, n_mf, derive_child_seed(child, 2),
                                  p0=config.initial_price)
    for result in outcome.period_results:
        for f in result.fills:
            print(f"fill period={result.period_index} seq={f.seq} "
                  f"buyer={f.buy_owner} seller={f.sell_owner} "
                  f"price={f.price:.6f} size={f.size}")
    closings = " ".join(f"{r.closing_price:.6f}" for r in outcome.period_results)
    print(f"ratio={ratio:g} n_mf={n_mf} regime={config.regime.label()} "
          f"m_buy={outcome.m_buy:.6f} m_sell={outcome.m_sell:.6f} "
          f"r_mf={outcome.r_mf:.8f} closings=[{closings}]")
    return 0


def _rel_err(a: float, b: float) -> float:
    scale = max(abs(a), abs(b), 1e-300)
    return abs(a - b) / scale


def _cmd_theory_check(args) -> int:
    config, ratio, n_mf, child, population = _single_run_setup(
        args, regime_override=NoTpSl())
    outcome = run_single_strategy(population, n_mf, derive_child_seed(child, 2),
                                  p0=config.initial_price)
    buy, sell = (r.activation_realization for r in outcome.period_results)

    cost = theory.cost_of_buy(buy, n_mf)
    p1 = (1.0 + theory.closing_rate(buy, n_mf)) * buy.anchor_price
    proceeds = theory.proceeds_of_sell(sell, n_mf, p1)
    r_theory = theory.single_return(buy, sell, n_mf)
    mr = theory.MultiPeriodRealization.from_realizations([buy], [n_mf],
                                                         [sell], [n_mf])
    r_approx = theory.multi_return(mr, approximate=True)

    rows = [
        ("m_buy", outcome.m_buy, cost),
        ("m_sell", outcome.m_sell, proceeds),
        ("r_mf", outcome.r_mf, r_theory),
    ]
    worst = 0.0
    for name, sim, theo in rows:
        err = _rel_err(sim, theo)
        worst = max(worst, err)
        print(f"{name:7s} sim={sim:.12g} theory={theo:.12g} rel_err={err:.3e}")
    print(f"r_mf approximate (first-order): {r_approx:.12g} "
          f"(exact - approx = {r_theory - r_approx:.3e})")
    if worst >= ORACLE_RTOL:
        raise OracleMismatch(
            f"simulation and closed-form values diverge: rel err {worst:.3e}")
    print(f"oracle agreement within {ORACLE_RTOL:g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fundcascade",
        description="Agent-based market simulator: a dominant fund moving "
                    "price through trend-follower cascades.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_out=True):
        p.add_argument("--config", help="experiment config file")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--reps", type=int, help="override repetitions")
        if with_out:
            p.add_argument("--out", help="override the output CSV path")
        p.add_argument("--verbose", action="store_true")

    p = sub.add_parser("sweep-order-size", help="single-plan order-size sweep")
    common(p)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("sweep-periods", help="batch-plan period-count grid")
    common(p)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("single-run", help="one simulation with fill trace")
    common(p, with_out=False)
    p.add_argument("--n-mf", type=int, help="order size (default: first in config)")

    p = sub.add_parser("theory-check",
                       help="compare one simulation against the closed forms")
    common(p, with_out=False)
    p.add_argument("--n-mf", type=int, help="order size (default: first in config)")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "sweep-order-size":
            return _cmd_sweep(args, "single")
        if args.command == "sweep-periods":
            return _cmd_sweep(args, "batch")
        if args.command == "single-run":
            return _cmd_single_run(args)
        if args.command == "theory-check":
            return _cmd_theory_check(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except OracleMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, BookExhausted) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except AssertionError as exc:
        print(f"internal invariant violation: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
