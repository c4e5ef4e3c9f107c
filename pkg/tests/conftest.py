"""Shared builders for deterministic test populations."""
import numpy as np
import pytest

from fundcascade import (CONTRARIAN, TREND, NoTpSl, Population, PopulationConfig,
                         TierSpec, build_population)


def degenerate_tiers(ask_rates=(), bid_rates=(), trend_up=(), trend_down=(),
                     p_active=1.0):
    """One sigma=0, single-investor tier per rate: exact ladders on demand."""
    tiers = []
    for r in ask_rates:
        tiers.append(TierSpec(r, 0.0, 1, 0, p_active))
    for r in bid_rates:
        tiers.append(TierSpec(r, 0.0, 1, 0, p_active))
    for r in trend_up:
        tiers.append(TierSpec(r, 0.0, 0, 1, p_active))
    for r in trend_down:
        tiers.append(TierSpec(r, 0.0, 0, 1, p_active))
    return tuple(tiers)


def exact_population(ask_rates=(), bid_rates=(), trend_up=(), trend_down=(),
                     regime=None, seed=0, p_active=1.0):
    """Population whose ladders are exactly the given rates (always active)."""
    config = PopulationConfig(
        tiers=degenerate_tiers(ask_rates, bid_rates, trend_up, trend_down,
                               p_active=p_active),
        ratio=1.0,
        tp_sl_regime=regime if regime is not None else NoTpSl(),
        seed=seed,
    )
    return build_population(config)


def raw_population(types, rates, r_profit=None, r_loss=None, p_active=1.0):
    """Population built directly from arrays, for exact exit-parameter control."""
    n = len(rates)
    types = np.asarray(types, dtype=np.int8)
    rates = np.asarray(rates, dtype=float)
    rp = np.full(n, np.nan) if r_profit is None else np.asarray(r_profit, float)
    rl = np.full(n, np.nan) if r_loss is None else np.asarray(r_loss, float)
    return Population(types, rates, rp, rl, np.full(n, float(p_active)))


@pytest.fixture
def table_population():
    from fundcascade import default_config
    return build_population(default_config(ratio=0.4, regime=NoTpSl(), seed=2024))
