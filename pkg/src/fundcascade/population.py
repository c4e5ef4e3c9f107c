"""Small-investor population construction.

A population is a tiered mix of contrarian and trend investors. Each tier
draws r_market from Normal(mean, sigma) (a sigma of 0 yields the constant),
trend head-counts scale with a global trend/contrarian ratio, and exit
parameters (take-profit / stop-loss) are assigned per regime at build time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import InvalidConfig

CONTRARIAN = 0
TREND = 1


@dataclass(frozen=True)
class TierSpec:
    """One row of the population table."""

    mean_r_market: float
    sigma_r_market: float
    contrarian_count: int
    trend_count_base: int
    p_active: float = 0.5

    def __post_init__(self) -> None:
        if not math.isfinite(self.mean_r_market):
            raise InvalidConfig(f"tier mean must be finite, got {self.mean_r_market}")
        if self.sigma_r_market < 0:
            raise InvalidConfig(f"tier sigma must be >= 0, got {self.sigma_r_market}")
        if self.contrarian_count < 0 or self.trend_count_base < 0:
            raise InvalidConfig("tier counts must be >= 0")
        if not 0.0 <= self.p_active <= 1.0:
            raise InvalidConfig(f"p_active must lie in [0, 1], got {self.p_active}")
        if self.sigma_r_market == 0 and self.mean_r_market == 0:
            raise InvalidConfig("a sigma=0 tier at mean 0 would pin r_market to 0")


class TpSlRegime:
    """Base class for take-profit / stop-loss assignment rules."""

    def sample_arrays(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Draw (r_profit, r_loss) for n investors; NaN marks absent."""
        raise NotImplementedError

    def label(self) -> str:
        raise NotImplementedError


def _check_bounds(lo: float, hi: float) -> None:
    if not (0.0 < lo < hi):
        raise InvalidConfig(f"regime bounds must satisfy 0 < lo < hi, got ({lo}, {hi})")


@dataclass(frozen=True)
class NoTpSl(TpSlRegime):
    """Investors never exit on their own: no take-profit, no stop-loss."""

    def sample_arrays(self, rng, n):
        nan = np.full(n, np.nan)
        return nan, nan.copy()

    def label(self) -> str:
        return "none"


@dataclass(frozen=True)
class Equal(TpSlRegime):
    """r_profit = |r_loss|, both drawn as one U(lo, hi) value."""

    lo: float
    hi: float

    def __post_init__(self):
        _check_bounds(self.lo, self.hi)

    def sample_arrays(self, rng, n):
        d = rng.uniform(self.lo, self.hi, n)
        return d, -d

    def label(self) -> str:
        return f"equal:{self.lo:g}:{self.hi:g}"


@dataclass(frozen=True)
class ProfitGreater(TpSlRegime):
    """|r_loss| ~ U(lo, hi), then r_profit ~ U(|r_loss|, hi)."""

    lo: float
    hi: float

    def __post_init__(self):
        _check_bounds(self.lo, self.hi)

    def sample_arrays(self, rng, n):
        loss = rng.uniform(self.lo, self.hi, n)
        profit = rng.uniform(loss, self.hi)
        return profit, -loss

    def label(self) -> str:
        return f"profit_greater:{self.lo:g}:{self.hi:g}"


@dataclass(frozen=True)
class LossGreater(TpSlRegime):
    """r_profit ~ U(lo, hi), then |r_loss| ~ U(r_profit, hi)."""

    lo: float
    hi: float

    def __post_init__(self):
        _check_bounds(self.lo, self.hi)

    def sample_arrays(self, rng, n):
        profit = rng.uniform(self.lo, self.hi, n)
        loss = rng.uniform(profit, self.hi)
        return profit, -loss

    def label(self) -> str:
        return f"loss_greater:{self.lo:g}:{self.hi:g}"


@dataclass(frozen=True)
class PerClass(TpSlRegime):
    """Separate sub-regimes for contrarians and trend investors."""

    contrarian: TpSlRegime
    trend: TpSlRegime

    def __post_init__(self):
        for sub in (self.contrarian, self.trend):
            if isinstance(sub, PerClass):
                raise InvalidConfig("per-class regimes cannot nest")

    def sample_arrays(self, rng, n):  # pragma: no cover - dispatched per class
        raise InvalidConfig("PerClass is resolved per investor class at build time")

    def label(self) -> str:
        return f"per_class:contrarian={self.contrarian.label()};trend={self.trend.label()}"


def sample_tp_sl(
    regime: TpSlRegime, rng: np.random.Generator
) -> tuple[Optional[float], Optional[float]]:
    """Draw one (r_profit, r_loss) pair; (None, None) when the regime has none."""
    if isinstance(regime, PerClass):
        raise InvalidConfig("PerClass must be resolved to a class sub-regime first")
    profit, loss = regime.sample_arrays(rng, 1)
    if np.isnan(profit[0]):
        return None, None
    return float(profit[0]), float(loss[0])


@dataclass(frozen=True)
class PopulationConfig:
    tiers: tuple[TierSpec, ...]
    ratio: float
    tp_sl_regime: TpSlRegime
    seed: int

    def __post_init__(self):
        if len(self.tiers) == 0:
            raise InvalidConfig("population needs at least one tier")
        if self.ratio < 0:
            raise InvalidConfig(f"ratio must be >= 0, got {self.ratio}")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig("seed must be an unsigned 64-bit integer")
        for t in self.tiers:
            # The +-0.1 anchor tiers hold contrarians only.
            if abs(t.mean_r_market) == 0.1 and t.trend_count_base != 0:
                raise InvalidConfig("+-0.1 tiers are contrarian-only")


@dataclass(frozen=True)
class Investor:
    """A single small agent; id doubles as its index in the population."""

    id: int
    strategy_type: int
    r_market: float
    r_profit: Optional[float]
    r_loss: Optional[float]
    p_active: float


class Population(Sequence[Investor]):
    """Struct-of-arrays container behaving as a sequence of Investor.

    Side/class index arrays are presorted by (r_market magnitude, id) so the
    engine can derive each period's quote ladders and trigger lists with a
    boolean mask instead of a per-period sort.
    """

    def __init__(self, strategy_type, r_market, r_profit, r_loss, p_active):
        self.strategy_type = strategy_type
        self.r_market = r_market
        self.r_profit = r_profit
        self.r_loss = r_loss
        self.p_active = p_active
        self._n = len(r_market)

        contrarian = strategy_type == CONTRARIAN
        trend = strategy_type == TREND
        self.ask_contrarians = self._sorted_ids(contrarian & (r_market > 0), key=r_market)
        self.bid_contrarians = self._sorted_ids(contrarian & (r_market < 0), key=-r_market)
        self.trend_up = self._sorted_ids(trend & (r_market > 0), key=r_market)
        self.trend_down = self._sorted_ids(trend & (r_market < 0), key=-r_market)

    @staticmethod
    def _sorted_ids(mask: np.ndarray, key: np.ndarray) -> np.ndarray:
        ids = np.nonzero(mask)[0]
        return ids[np.argsort(key[ids], kind="stable")]

    def __len__(self) -> int:
        return self._n

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(self._n))]
        if i < 0:
            i += self._n
        if not 0 <= i < self._n:
            raise IndexError(i)
        rp = self.r_profit[i]
        rl = self.r_loss[i]
        return Investor(
            id=i,
            strategy_type=int(self.strategy_type[i]),
            r_market=float(self.r_market[i]),
            r_profit=None if np.isnan(rp) else float(rp),
            r_loss=None if np.isnan(rl) else float(rl),
            p_active=float(self.p_active[i]),
        )

    def __iter__(self) -> Iterator[Investor]:
        for i in range(self._n):
            yield self[i]

    def count(self, strategy_type: int) -> int:
        return int(np.count_nonzero(self.strategy_type == strategy_type))


def _draw_r_market(rng: np.random.Generator, tier: TierSpec, n: int) -> np.ndarray:
    if tier.sigma_r_market == 0:
        return np.full(n, tier.mean_r_market)
    r = rng.normal(tier.mean_r_market, tier.sigma_r_market, n)
    while True:
        zero = r == 0.0
        if not zero.any():
            return r
        r[zero] = rng.normal(tier.mean_r_market, tier.sigma_r_market, int(zero.sum()))


def build_population(config: PopulationConfig) -> Population:
    """Materialize the investor list for one run.

    Draw order is fixed: per tier (table order), contrarian r_market then
    trend r_market; afterwards exit parameters for all contrarians, then all
    trend investors. Identical configs therefore yield identical populations.
    """
    rng = np.random.default_rng(config.seed)

    types, rs, actives = [], [], []
    for tier in config.tiers:
        n_c = tier.contrarian_count
        n_t = round(tier.trend_count_base * config.ratio)
        if n_c:
            types.append(np.full(n_c, CONTRARIAN, dtype=np.int8))
            rs.append(_draw_r_market(rng, tier, n_c))
            actives.append(np.full(n_c, tier.p_active))
        if n_t:
            types.append(np.full(n_t, TREND, dtype=np.int8))
            rs.append(_draw_r_market(rng, tier, n_t))
            actives.append(np.full(n_t, tier.p_active))

    if not types:
        strategy_type = np.zeros(0, dtype=np.int8)
        r_market = np.zeros(0)
        p_active = np.zeros(0)
    else:
        strategy_type = np.concatenate(types)
        r_market = np.concatenate(rs)
        p_active = np.concatenate(actives)

    n = len(r_market)
    r_profit = np.full(n, np.nan)
    r_loss = np.full(n, np.nan)
    regime = config.tp_sl_regime
    c_regime = regime.contrarian if isinstance(regime, PerClass) else regime
    t_regime = regime.trend if isinstance(regime, PerClass) else regime
    for cls, cls_regime in ((CONTRARIAN, c_regime), (TREND, t_regime)):
        idx = np.nonzero(strategy_type == cls)[0]
        if len(idx):
            profit, loss = cls_regime.sample_arrays(rng, len(idx))
            r_profit[idx] = profit
            r_loss[idx] = loss

    return Population(strategy_type, r_market, r_profit, r_loss, p_active)


def table_default_tiers() -> tuple[TierSpec, ...]:
    """The default tier table used throughout the sweeps."""
    return (
        TierSpec(0.10, 0.00, 20000, 0),
        TierSpec(0.08, 0.04, 2000, 2000),
        TierSpec(0.04, 0.02, 2000, 2000),
        TierSpec(0.02, 0.01, 2000, 2000),
        TierSpec(-0.02, 0.01, 2000, 2000),
        TierSpec(-0.04, 0.02, 2000, 2000),
        TierSpec(-0.08, 0.04, 2000, 2000),
        TierSpec(-0.10, 0.00, 20000, 0),
    )


def default_config(
    ratio: float,
    regime: TpSlRegime,
    seed: int,
    p_active: Optional[float] = None,
) -> PopulationConfig:
    """PopulationConfig over the default tiers, optionally overriding p_active."""
    tiers = table_default_tiers()
    if p_active is not None:
        tiers = tuple(
            TierSpec(t.mean_r_market, t.sigma_r_market, t.contrarian_count,
                     t.trend_count_base, p_active)
            for t in tiers
        )
    return PopulationConfig(tiers=tiers, ratio=ratio, tp_sl_regime=regime, seed=seed)
