"""Sweep orchestration and CSV persistence.

Every (coordinate, repetition) pair is one independent run with its own
derived child seed and freshly built population. Rows are written in the
canonical task order regardless of how many workers executed them, so a
sweep's CSV is byte-identical across invocations and worker counts. Floats
serialize with 17 significant digits (round-trip exact).
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

from ..errors import BookExhausted
from ..population import build_population
from ..strategy import run_batch_strategy, run_single_strategy
from .config import SweepConfig
from .seeds import derive_child_seed

CSV_COLUMNS = (
    "status", "plan", "ratio", "regime", "p_active", "n_mf", "total_shares",
    "d_buy", "d_sell", "repetition", "child_seed", "m_buy", "m_sell", "profit",
    "r_mf", "cascade_total", "closing_prices",
)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


@dataclass(frozen=True)
class Coordinate:
    ratio: float
    n_mf: Optional[int]
    d_buy: Optional[int]
    d_sell: Optional[int]
    repetition: int


@dataclass(frozen=True)
class RunRecord:
    status: str
    coordinate: Coordinate
    child_seed: int
    m_buy: Optional[float]
    m_sell: Optional[float]
    r_mf: Optional[float]
    cascade_total: Optional[int]
    closing_prices: tuple[float, ...]

    def to_row(self, config: SweepConfig) -> list[str]:
        c = self.coordinate
        ok = self.status == "ok"
        return [
            self.status,
            config.plan_kind,
            _fmt(c.ratio),
            config.regime.label(),
            config.effective_p_active(),
            "" if c.n_mf is None else str(c.n_mf),
            "" if config.total_shares is None else str(config.total_shares),
            "" if c.d_buy is None else str(c.d_buy),
            "" if c.d_sell is None else str(c.d_sell),
            str(c.repetition),
            str(self.child_seed),
            _fmt(self.m_buy) if ok else "",
            _fmt(self.m_sell) if ok else "",
            _fmt(self.m_sell - self.m_buy) if ok else "",
            _fmt(self.r_mf) if ok else "",
            str(self.cascade_total) if ok else "",
            ";".join(_fmt(p) for p in self.closing_prices) if ok else "",
        ]


def enumerate_coordinates(config: SweepConfig) -> list[Coordinate]:
    coords = []
    if config.plan_kind == "single":
        for ratio in config.ratios:
            for n_mf in config.order_sizes:
                for rep in range(config.repetitions):
                    coords.append(Coordinate(ratio, n_mf, None, None, rep))
    else:
        for ratio in config.ratios:
            for d_buy in config.d_buy_values:
                for d_sell in config.d_sell_values:
                    for rep in range(config.repetitions):
                        coords.append(Coordinate(ratio, None, d_buy, d_sell, rep))
    return coords


def _execute_task(task: tuple[SweepConfig, int, Coordinate]) -> RunRecord:
    config, run_index, coord = task
    child_seed = derive_child_seed(config.master_seed, run_index)
    pop_seed = derive_child_seed(child_seed, 1)
    engine_seed = derive_child_seed(child_seed, 2)
    population = build_population(config.population_config(coord.ratio, pop_seed))
    try:
        if config.plan_kind == "single":
            outcome = run_single_strategy(population, coord.n_mf, engine_seed,
                                          p0=config.initial_price)
        else:
            outcome = run_batch_strategy(population, config.total_shares,
                                         coord.d_buy, coord.d_sell, engine_seed,
                                         p0=config.initial_price)
    except BookExhausted:
        return RunRecord("book_exhausted", coord, child_seed, None, None, None,
                         None, ())
    cascades = sum(sum(r.cascade_counts) for r in outcome.period_results)
    closings = tuple(r.closing_price for r in outcome.period_results)
    return RunRecord("ok", coord, child_seed, outcome.m_buy, outcome.m_sell,
                     outcome.r_mf, cascades, closings)


def run_records(config: SweepConfig, workers: int = 1) -> list[RunRecord]:
    """Execute every run of the sweep, in canonical order."""
    tasks = [(config, i, coord)
             for i, coord in enumerate(enumerate_coordinates(config))]
    if workers <= 1:
        return [_execute_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_execute_task, tasks, chunksize=8))


def write_csv(records: list[RunRecord], config: SweepConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for record in records:
            fh.write(",".join(record.to_row(config)) + "\n")


def run_sweep(config: SweepConfig, workers: int = 1,
              output_path: Optional[str] = None) -> list[RunRecord]:
    """Run the sweep and persist its CSV; returns the records."""
    records = run_records(config, workers=workers)
    write_csv(records, config, output_path or config.output_path)
    return records
