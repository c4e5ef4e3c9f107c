"""Dominant-fund plans and their return accounting.

Two plan shapes: a single buy-then-sell (one market order per period, two
periods total) and a batched plan spreading the same total over several buy
periods followed by several sell periods. Every period runs through the same
engine path; the plan only schedules order sizes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .engine import MarketState, PeriodResult
from .errors import InvalidConfig
from .orderbook import Side
from .population import Population


@dataclass(frozen=True)
class SinglePlan:
    order_size: int

    def __post_init__(self):
        if self.order_size < 1:
            raise InvalidConfig("order size must be >= 1")


@dataclass(frozen=True)
class BatchPlan:
    total_shares: int
    d_buy: int
    d_sell: int

    def __post_init__(self):
        if not (1 <= self.d_buy <= 5 and 1 <= self.d_sell <= 5):
            raise InvalidConfig("buy/sell period counts must lie in [1, 5]")
        if self.total_shares < max(self.d_buy, self.d_sell):
            raise InvalidConfig("total shares must cover one unit per period")


MainFundPlan = Union[SinglePlan, BatchPlan]


@dataclass(frozen=True)
class StrategyOutcome:
    m_buy: float
    m_sell: float
    r_mf: float
    period_results: list[PeriodResult]

    @property
    def profit(self) -> float:
        return self.m_sell - self.m_buy


def split_sizes(total: int, periods: int) -> list[int]:
    """Equal per-period sizes, the last period absorbing the remainder."""
    base = total // periods
    return [base] * (periods - 1) + [total - base * (periods - 1)]


def _run_schedule(population: Population, buys: list[int], sells: list[int],
                  seed: int, p0: float) -> StrategyOutcome:
    state = MarketState(population, p0=p0, seed=seed)
    results: list[PeriodResult] = []
    m_buy = 0.0
    m_sell = 0.0
    for size in buys:
        state.begin_period()
        result = state.run_period(state.market_order(Side.BUY, size))
        results.append(result)
        m_buy += -result.main_fund_cash_flow
    for size in sells:
        state.begin_period()
        result = state.run_period(state.market_order(Side.SELL, size))
        results.append(result)
        m_sell += result.main_fund_cash_flow
    assert state.main_fund_shares == 0, "plan must leave the fund flat"
    return StrategyOutcome(m_buy=m_buy, m_sell=m_sell,
                           r_mf=m_sell / m_buy - 1.0, period_results=results)


def run_single_strategy(population: Population, n_mf: int, seed: int,
                        p0: float = 100.0) -> StrategyOutcome:
    """Buy n_mf in period one, sell n_mf in period two."""
    plan = SinglePlan(n_mf)
    return _run_schedule(population, [plan.order_size], [plan.order_size],
                         seed, p0)


def run_batch_strategy(population: Population, total_shares: int, d_buy: int,
                       d_sell: int, seed: int, p0: float = 100.0) -> StrategyOutcome:
    """Spread total_shares over d_buy buy periods then d_sell sell periods."""
    plan = BatchPlan(total_shares, d_buy, d_sell)
    return _run_schedule(population, split_sizes(total_shares, plan.d_buy),
                         split_sizes(total_shares, plan.d_sell), seed, p0)


def run_plan(population: Population, plan: MainFundPlan, seed: int,
             p0: float = 100.0) -> StrategyOutcome:
    if isinstance(plan, SinglePlan):
        return run_single_strategy(population, plan.order_size, seed, p0)
    return run_batch_strategy(population, plan.total_shares, plan.d_buy,
                              plan.d_sell, seed, p0)
