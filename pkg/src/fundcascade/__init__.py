"""Agent-based market simulator: a dominant fund moves price through large
market orders, trend followers cascade behind it, and the fund profits by
reverse operation against re-anchored contrarian quotes. Ships with a
closed-form oracle for the same accounting and a sweep runner."""

from . import theory
from .engine import InvestorStatus, MarketState, PeriodResult
from .errors import (BookExhausted, ConfigError, CrossedBook, FundcascadeError,
                     InsufficientDepth, InvalidConfig, NonTermination)
from .orderbook import MAIN_FUND, Book, Fill, Limit, Market, Order, Side, Stop
from .population import (CONTRARIAN, TREND, Equal, Investor, LossGreater, NoTpSl,
                         PerClass, Population, PopulationConfig, ProfitGreater,
                         TierSpec, TpSlRegime, build_population, default_config,
                         sample_tp_sl, table_default_tiers)
from .strategy import (BatchPlan, MainFundPlan, SinglePlan, StrategyOutcome,
                       run_batch_strategy, run_plan, run_single_strategy,
                       split_sizes)

__version__ = "0.1.0"

__all__ = [
    "theory", "InvestorStatus", "MarketState", "PeriodResult",
    "FundcascadeError", "InvalidConfig", "ConfigError", "CrossedBook",
    "BookExhausted", "NonTermination", "InsufficientDepth",
    "MAIN_FUND", "Book", "Fill", "Limit", "Market", "Order", "Side", "Stop",
    "CONTRARIAN", "TREND", "Equal", "Investor", "LossGreater", "NoTpSl",
    "PerClass", "Population", "PopulationConfig", "ProfitGreater", "TierSpec",
    "TpSlRegime", "build_population", "default_config", "sample_tp_sl",
    "table_default_tiers", "BatchPlan", "MainFundPlan", "SinglePlan",
    "StrategyOutcome", "run_batch_strategy", "run_plan", "run_single_strategy",
    "split_sizes", "__version__",
]
