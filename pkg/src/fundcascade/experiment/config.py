"""Experiment configuration: a sectioned key-value file.

The format is INI-style with three sections. Unknown sections or keys are
errors so a config file is a complete, diffable record of a sweep.

    [population]
    # tiers: one "mean sigma contrarians trend_base [p_active]" row per line;
    # omit the key to use the built-in default table.
    ratio = 0.1, 0.2, 0.4, 0.8, 1.6
    p_active = 0.5          ; optional override applied to every tier
    regime = none           ; or equal:0.02:0.08, profit_greater:..., loss_greater:...,
                            ;    per_class:contrarian=equal:0.02:0.04;trend=none

    [plan]
    kind = single           ; or batch
    order_sizes = 50, 100   ; single plans
    total_shares = 2000     ; batch plans
    buy_periods = 1, 2, 3, 4, 5
    sell_periods = 1, 2, 3, 4, 5

    [run]
    repetitions = 50
    master_seed = 1
    output = runs.csv
    initial_price = 100.0   ; optional
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, replace
from typing import Optional

from ..errors import ConfigError, InvalidConfig
from ..population import (Equal, LossGreater, NoTpSl, PerClass, PopulationConfig,
                          ProfitGreater, TierSpec, TpSlRegime, table_default_tiers)

_SECTIONS = {
    "population": {"tiers", "ratio", "p_active", "regime"},
    "plan": {"kind", "order_sizes", "total_shares", "buy_periods", "sell_periods"},
    "run": {"repetitions", "master_seed", "output", "initial_price"},
}

DEFAULT_SINGLE_CONFIG = """\
[population]
ratio = 0.1, 0.2, 0.4, 0.8, 1.6
regime = none

[plan]
kind = single
order_sizes = 50, 100, 200, 400, 800, 1600

[run]
repetitions = 50
master_seed = 1
output = order_size_sweep.csv
"""

DEFAULT_BATCH_CONFIG = """\
[population]
ratio = 0.4
regime = none

[plan]
kind = batch
total_shares = 2000
buy_periods = 1, 2, 3, 4, 5
sell_periods = 1, 2, 3, 4, 5

[run]
repetitions = 50
master_seed = 1
output = period_grid_sweep.csv
"""


@dataclass(frozen=True)
class SweepConfig:
    tiers: tuple[TierSpec, ...]
    ratios: tuple[float, ...]
    p_active: Optional[float]
    regime: TpSlRegime
    plan_kind: str
    order_sizes: tuple[int, ...]
    total_shares: Optional[int]
    d_buy_values: tuple[int, ...]
    d_sell_values: tuple[int, ...]
    repetitions: int
    master_seed: int
    output_path: str
    initial_price: float = 100.0

    def __post_init__(self):
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if not self.ratios:
            raise ConfigError("ratio list must be nonempty")
        if self.plan_kind == "single":
            if not self.order_sizes:
                raise ConfigError("single plans need a nonempty order_sizes list")
        elif self.plan_kind == "batch":
            if self.total_shares is None:
                raise ConfigError("batch plans need total_shares")
            if not self.d_buy_values or not self.d_sell_values:
                raise ConfigError("batch plans need buy_periods and sell_periods")
        else:
            raise ConfigError(f"unknown plan kind {self.plan_kind!r}")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be an unsigned 64-bit integer")
        if not self.initial_price > 0:
            raise ConfigError("initial_price must be positive")

    def effective_p_active(self) -> str:
        if self.p_active is not None:
            return f"{self.p_active:g}"
        values = {t.p_active for t in self.tiers}
        return f"{values.pop():g}" if len(values) == 1 else "mixed"

    def population_config(self, ratio: float, seed: int) -> PopulationConfig:
        tiers = self.tiers
        if self.p_active is not None:
            tiers = tuple(replace(t, p_active=self.p_active) for t in tiers)
        return PopulationConfig(tiers=tiers, ratio=ratio,
                                tp_sl_regime=self.regime, seed=seed)


def parse_regime(text: str) -> TpSlRegime:
    """Parse the regime grammar (see module docstring); inverse of label()."""
    text = text.strip()
    if text == "none":
        return NoTpSl()
    if text.startswith("per_class:"):
        body = text[len("per_class:"):]
        parts = dict()
        for piece in body.split(";"):
            piece = piece.strip()
            if "=" not in piece:
                raise ConfigError(f"bad per_class regime piece {piece!r}")
            name, sub = piece.split("=", 1)
            parts[name.strip()] = parse_regime(sub)
        if set(parts) != {"contrarian", "trend"}:
            raise ConfigError("per_class regime needs contrarian= and trend= parts")
        return PerClass(contrarian=parts["contrarian"], trend=parts["trend"])
    fields = text.split(":")
    if len(fields) == 3:
        kind, lo_s, hi_s = fields
        try:
            lo, hi = float(lo_s), float(hi_s)
        except ValueError as exc:
            raise ConfigError(f"bad regime bounds in {text!r}") from exc
        ctor = {"equal": Equal, "profit_greater": ProfitGreater,
                "loss_greater": LossGreater}.get(kind)
        if ctor is not None:
            try:
                return ctor(lo, hi)
            except InvalidConfig as exc:
                raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown regime {text!r}")


def _split_list(text: str) -> list[str]:
    return [tok for tok in text.replace(",", " ").split() if tok]


def _parse_tiers(text: str) -> tuple[TierSpec, ...]:
    tiers = []
    for line in text.strip().splitlines():
        fields = _split_list(line)
        if len(fields) not in (4, 5):
            raise ConfigError(f"tier row needs 4 or 5 fields, got {line!r}")
        try:
            mean, sigma = float(fields[0]), float(fields[1])
            contrarians, trend_base = int(fields[2]), int(fields[3])
            p_active = float(fields[4]) if len(fields) == 5 else 0.5
            tiers.append(TierSpec(mean, sigma, contrarians, trend_base, p_active))
        except (ValueError, InvalidConfig) as exc:
            raise ConfigError(f"bad tier row {line!r}: {exc}") from exc
    if not tiers:
        raise ConfigError("tiers key present but empty")
    return tuple(tiers)


def parse_config_text(text: str, source: str = "<string>") -> SweepConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"),
                                       interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"could not parse {source}: {exc}") from exc

    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}] in {source}")
        for key in parser[section]:
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}] of {source}")
    for required in ("plan", "run"):
        if required not in parser:
            raise ConfigError(f"missing [{required}] section in {source}")

    pop = parser["population"] if "population" in parser else {}
    plan = parser["plan"]
    run = parser["run"]
    try:
        tiers = _parse_tiers(pop["tiers"]) if "tiers" in pop else table_default_tiers()
        ratios = tuple(float(x) for x in _split_list(pop.get("ratio", "0.4")))
        p_active = float(pop["p_active"]) if "p_active" in pop else None
        regime = parse_regime(pop.get("regime", "none"))

        kind = plan.get("kind", "single").strip()
        order_sizes = tuple(int(x) for x in _split_list(plan.get("order_sizes", "")))
        total_shares = int(plan["total_shares"]) if "total_shares" in plan else None
        d_buy = tuple(int(x) for x in _split_list(plan.get("buy_periods", "")))
        d_sell = tuple(int(x) for x in _split_list(plan.get("sell_periods", "")))

        repetitions = int(run.get("repetitions", "50"))
        master_seed = int(run.get("master_seed", "1"))
        output = run.get("output", "sweep.csv")
        initial_price = float(run.get("initial_price", "100.0"))
    except ValueError as exc:
        raise ConfigError(f"bad value in {source}: {exc}") from exc

    return SweepConfig(
        tiers=tiers, ratios=ratios, p_active=p_active, regime=regime,
        plan_kind=kind, order_sizes=order_sizes, total_shares=total_shares,
        d_buy_values=d_buy, d_sell_values=d_sell, repetitions=repetitions,
        master_seed=master_seed, output_path=output, initial_price=initial_price,
    )


def parse_config_file(path: str) -> SweepConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), source=path)
