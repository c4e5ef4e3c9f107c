"""Closed-form accounting over realized activations.

Given the ladders and trigger lists that were actually activated in a run,
these evaluators reproduce the simulator's prices and cash flows purely
arithmetically: the cost of walking an ask ladder, the trend-trigger cascade
recursion with its wave counts, the sale proceeds after the price has moved,
and the multi-period generalizations with their first-order approximation.
They share no code with the matching engine, which is what makes them usable
as an independent oracle.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InsufficientDepth


def _as_array(values) -> np.ndarray:
    return np.asarray(values, dtype=np.float64)


@dataclass(frozen=True)
class ActivationRealization:
    """One period's activated quote ladders and trend trigger lists.

    ``asks`` are the positive contrarian rates in ascending order (the ask
    ladder is (1+r)*anchor walking away from the anchor); ``bids`` are the
    negative rates in ascending magnitude. Trend lists are ordered the same
    way on each side.
    """

    asks: np.ndarray
    bids: np.ndarray
    trend_up: np.ndarray
    trend_down: np.ndarray
    anchor_price: float

    def __post_init__(self):
        object.__setattr__(self, "asks", _as_array(self.asks))
        object.__setattr__(self, "bids", _as_array(self.bids))
        object.__setattr__(self, "trend_up", _as_array(self.trend_up))
        object.__setattr__(self, "trend_down", _as_array(self.trend_down))
        if not self.anchor_price > 0:
            raise ValueError("anchor price must be positive")
        for name in ("asks", "bids", "trend_up", "trend_down"):
            arr = getattr(self, name)
            if len(arr) and not np.isfinite(arr).all():
                raise ValueError(f"{name} must be finite")
        # Asks admit 0 (a flat ladder level); bids are strictly negative,
        # so a -0.0 entry is rejected.
        if len(self.asks) and not (self.asks >= 0).all():
            raise ValueError("asks must be nonnegative")
        if len(self.asks) > 1 and not (np.diff(self.asks) >= 0).all():
            raise ValueError("asks must be sorted ascending")
        if len(self.trend_up) and not (self.trend_up > 0).all():
            raise ValueError("trend_up must be strictly positive")
        if len(self.trend_up) > 1 and not (np.diff(self.trend_up) >= 0).all():
            raise ValueError("trend_up must be sorted ascending")
        for name, arr in (("bids", self.bids), ("trend_down", self.trend_down)):
            if len(arr) and not (arr < 0).all():
                raise ValueError(f"{name} must be strictly negative")
            if len(arr) > 1 and not (np.diff(arr) <= 0).all():
                raise ValueError(f"{name} must be sorted by ascending magnitude")

    def mirrored(self) -> "ActivationRealization":
        """Swap sides by negation, mapping the sell cascade onto the buy one."""
        return ActivationRealization(
            asks=-self.bids, bids=-self.asks, trend_up=-self.trend_down,
            trend_down=-self.trend_up, anchor_price=self.anchor_price,
        )


def _require_depth(n: int, available: int, what: str) -> None:
    if n > available:
        raise InsufficientDepth(f"{what}: need {n} levels, have {available}")


def cost_of_buy(realization: ActivationRealization, n_mf: int) -> float:
    """Cash spent buying n_mf units up the ask ladder."""
    _require_depth(n_mf, len(realization.asks), "buy cost")
    return float(np.sum((1.0 + realization.asks[:n_mf]) * realization.anchor_price))


def cascade_counts(realization: ActivationRealization,
                   n_mf: int) -> tuple[list[int], int]:
    """Trend-trigger wave counts after an n_mf buy, and their total.

    Wave i counts the not-yet-triggered trend thresholds at or below the
    current rise; each triggered buy consumes the next ask level, raising the
    rise for the following wave. Terminates on the first empty wave.
    """
    asks = realization.asks
    trend = realization.trend_up
    if n_mf < 1:
        raise ValueError("n_mf must be >= 1")
    _require_depth(n_mf, len(asks), "cascade")
    rise = asks[n_mf - 1]
    waves: list[int] = []
    triggered = 0
    consumed = n_mf
    while True:
        hi = int(np.searchsorted(trend, rise, side="right"))
        if hi == triggered:
            return waves, triggered
        waves.append(hi - triggered)
        consumed += hi - triggered
        triggered = hi
        _require_depth(consumed, len(asks), "cascade")
        rise = asks[consumed - 1]


def closing_rate(realization: ActivationRealization, n_mf: int) -> float:
    """Relative closing move of a buy period: the (n_mf + total triggered)-th
    ask rate (negative mirror for sell periods via ``mirrored``)."""
    _, total = cascade_counts(realization, n_mf)
    return float(realization.asks[n_mf + total - 1])


def proceeds_of_sell(realization: ActivationRealization, n_mf: int,
                     p1: float) -> float:
    """Cash received selling n_mf units down the bid ladder anchored at p1."""
    _require_depth(n_mf, len(realization.bids), "sell proceeds")
    return float(np.sum((1.0 + realization.bids[:n_mf]) * p1))


def single_return(buy: ActivationRealization, sell: ActivationRealization,
                  n_mf: int) -> float:
    """Rate of return of a buy-then-sell plan executed in two periods."""
    p1 = (1.0 + closing_rate(buy, n_mf)) * buy.anchor_price
    return proceeds_of_sell(sell, n_mf, p1) / cost_of_buy(buy, n_mf) - 1.0


@dataclass(frozen=True)
class MultiPeriodRealization:
    """Per-period activations for a batched buy-then-sell plan.

    ``f_buy[k]`` / ``f_sell[k]`` are the relative closing moves of buy/sell
    period k+1 (the implicit move of period 0 is zero). They are stored
    explicitly so synthetic instances can be evaluated directly; use
    ``from_realizations`` to derive them through the cascade recursion.
    """

    buy_periods: tuple[ActivationRealization, ...]
    sell_periods: tuple[ActivationRealization, ...]
    sizes_buy: tuple[int, ...]
    sizes_sell: tuple[int, ...]
    f_buy: tuple[float, ...]
    f_sell: tuple[float, ...]
    p0: float

    def __post_init__(self):
        if len(self.buy_periods) != len(self.sizes_buy) or \
                len(self.buy_periods) != len(self.f_buy):
            raise ValueError("buy-side lists must share one length")
        if len(self.sell_periods) != len(self.sizes_sell) or \
                len(self.sell_periods) != len(self.f_sell):
            raise ValueError("sell-side lists must share one length")
        if not self.p0 > 0:
            raise ValueError("p0 must be positive")

    @classmethod
    def from_realizations(cls, buy_periods: Sequence[ActivationRealization],
                          sizes_buy: Sequence[int],
                          sell_periods: Sequence[ActivationRealization],
                          sizes_sell: Sequence[int]) -> "MultiPeriodRealization":
        f_buy = tuple(closing_rate(r, n) for r, n in zip(buy_periods, sizes_buy))
        f_sell = tuple(-closing_rate(r.mirrored(), n)
                       for r, n in zip(sell_periods, sizes_sell))
        return cls(tuple(buy_periods), tuple(sell_periods), tuple(sizes_buy),
                   tuple(sizes_sell), f_buy, f_sell,
                   p0=buy_periods[0].anchor_price)


def multi_cost(mr: MultiPeriodRealization) -> float:
    """Total cost over the buy periods; anchors compound through f_buy."""
    total = 0.0
    anchor = mr.p0
    for j, (realization, n) in enumerate(zip(mr.buy_periods, mr.sizes_buy)):
        _require_depth(n, len(realization.asks), f"buy period {j + 1}")
        total += float(np.sum((1.0 + realization.asks[:n]) * anchor))
        anchor *= 1.0 + mr.f_buy[j]
    return total


def sell_anchor(mr: MultiPeriodRealization) -> float:
    """Price at the end of the last buy period (the sell phase's anchor)."""
    anchor = mr.p0
    for f in mr.f_buy:
        anchor *= 1.0 + f
    return anchor


def multi_proceeds(mr: MultiPeriodRealization) -> float:
    """Total proceeds over the sell periods; anchors compound through f_sell."""
    total = 0.0
    anchor = sell_anchor(mr)
    for j, (realization, n) in enumerate(zip(mr.sell_periods, mr.sizes_sell)):
        _require_depth(n, len(realization.bids), f"sell period {j + 1}")
        total += float(np.sum((1.0 + realization.bids[:n]) * anchor))
        anchor *= 1.0 + mr.f_sell[j]
    return total


def multi_return(mr: MultiPeriodRealization, approximate: bool = False) -> float:
    """Rate of return of the batched plan.

    The exact path is multi_proceeds / multi_cost - 1. The approximate path
    keeps only first-order ladder-rate terms: the lead factor is the summed
    buy-side closing moves, and each side contributes its per-period mean
    ladder rate plus the accumulated prior closing moves, averaged over its
    periods. With unequal per-period sizes the average weights each period by
    its share of the total (the equal-size case reduces to a plain 1/D mean);
    a uniform 1/D average would leave a first-order error behind.
    """
    if not approximate:
        return multi_proceeds(mr) / multi_cost(mr) - 1.0

    lead = 1.0 + sum(mr.f_buy)
    den_terms = 0.0
    carried = 0.0
    for j, (realization, n) in enumerate(zip(mr.buy_periods, mr.sizes_buy)):
        _require_depth(n, len(realization.asks), f"buy period {j + 1}")
        den_terms += n * (float(np.mean(realization.asks[:n])) + carried)
        carried += mr.f_buy[j]
    num_terms = 0.0
    carried = 0.0
    for j, (realization, n) in enumerate(zip(mr.sell_periods, mr.sizes_sell)):
        _require_depth(n, len(realization.bids), f"sell period {j + 1}")
        num_terms += n * (float(np.mean(realization.bids[:n])) + carried)
        carried += mr.f_sell[j]
    num = 1.0 + num_terms / sum(mr.sizes_sell)
    den = 1.0 + den_terms / sum(mr.sizes_buy)
    return lead * num / den - 1.0
