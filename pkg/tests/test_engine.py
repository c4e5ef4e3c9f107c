import numpy as np
import pytest

from fundcascade import (CONTRARIAN, MAIN_FUND, TREND, BookExhausted, Equal,
                         MarketState, NonTermination, NoTpSl, Side, build_population,
                         default_config, theory)
from conftest import exact_population, raw_population


def buy(state, size):
    return state.run_period(state.market_order(Side.BUY, size))


def sell(state, size):
    return state.run_period(state.market_order(Side.SELL, size))


# -- period open --------------------------------------------------------------


def test_contrarian_quote_anchors_to_initial_price():
    pop = exact_population(ask_rates=[0.04])
    state = MarketState(pop, p0=100.0)
    state.begin_period()
    assert state.book.resting(Side.SELL) == [(104.0, 0, 0)]
    assert state.anchor_price == 100.0


def test_zero_activation_leaves_book_empty():
    pop = exact_population(ask_rates=[0.01, 0.02], bid_rates=[-0.01],
                           p_active=0.0)
    state = MarketState(pop, p0=100.0)
    state.begin_period()
    assert state.book.depth(Side.SELL) == 0
    assert state.book.depth(Side.BUY) == 0
    with pytest.raises(BookExhausted):
        buy(state, 1)


def test_full_activation_rests_one_quote_per_contrarian():
    pop = build_population(default_config(0.4, NoTpSl(), seed=5, p_active=1.0))
    state = MarketState(pop, p0=100.0, seed=3)
    state.begin_period()
    # sampled sign decides the side, so the split is not exactly 26000/26000
    asks, bids = state.book.depth(Side.SELL), state.book.depth(Side.BUY)
    assert asks + bids == 52000
    assert asks == len(pop.ask_contrarians)
    assert bids == len(pop.bid_contrarians)


def test_realization_records_the_ladders():
    pop = exact_population(ask_rates=[0.01, 0.03], bid_rates=[-0.02],
                           trend_up=[0.05], trend_down=[-0.04])
    state = MarketState(pop, p0=100.0)
    state.begin_period()
    result = state.run_period(None)
    r = result.activation_realization
    assert list(r.asks) == [0.01, 0.03]
    assert list(r.bids) == [-0.02]
    assert list(r.trend_up) == [0.05]
    assert list(r.trend_down) == [-0.04]
    assert r.anchor_price == 100.0


def test_no_impulse_no_transaction():
    pop = exact_population(ask_rates=[0.01], bid_rates=[-0.01],
                           trend_up=[0.02])
    state = MarketState(pop, p0=100.0)
    state.begin_period()
    result = state.run_period(None)
    assert result.fill_count == 0
    assert result.closing_price == 100.0
    assert result.cascade_counts == []


# -- cascade ------------------------------------------------------------------


def test_cascade_waves_frozen_example():
    pop = exact_population(ask_rates=[0.005, 0.01, 0.015, 0.02, 0.025],
                           trend_up=[0.01, 0.015, 0.03])
    state = MarketState(pop, p0=100.0)
    state.begin_period()
    result = buy(state, 2)
    assert result.cascade_counts == [1, 1]
    assert result.closing_price == pytest.approx(102.0, abs=0)
    waves, total = theory.cascade_counts(result.activation_realization, 2)
    assert result.cascade_counts == waves and total == 2


def test_trend_triggers_fire_in_ascending_threshold_order():
    pop = exact_population(ask_rates=[0.01, 0.02, 0.03, 0.04, 0.05],
                           trend_up=[0.012, 0.011])
    state = MarketState(pop, p0=100.0)
    state.begin_period()
    result = buy(state, 2)
    trend_ids = [i for i in range(len(pop)) if pop.strategy_type[i] == TREND]
    by_threshold = sorted(trend_ids, key=lambda i: pop.r_market[i])
    aggressors = [f.buy_owner for f in result.fills if f.buy_owner != MAIN_FUND]
    assert aggressors == by_threshold


def test_sell_side_mirror_cascade():
    pop = exact_population(bid_rates=[-0.01, -0.02, -0.03],
                           trend_down=[-0.015])
    state = MarketState(pop, p0=100.0)
    state.begin_period()
    result = sell(state, 2)
    assert result.cascade_counts == [1]
    assert result.closing_price == pytest.approx(97.0, abs=0)
    mirrored = result.activation_realization.mirrored()
    assert result.closing_price == (1.0 - theory.closing_rate(mirrored, 2)) * 100.0


def test_buy_period_prices_nondecreasing():
    pop = build_population(default_config(0.8, NoTpSl(), seed=21))
    state = MarketState(pop, p0=100.0, seed=4)
    state.begin_period()
    result = buy(state, 800)
    prices = np.concatenate([b.prices for b in result.fill_batches])
    assert (np.diff(prices) >= 0).all()


def test_closing_price_matches_recursion_exactly():
    for seed in (0, 1, 2):
        pop = build_population(default_config(1.6, NoTpSl(), seed=seed))
        state = MarketState(pop, p0=100.0, seed=seed)
        state.begin_period()
        result = buy(state, 700)
        r = result.activation_realization
        expected = (1.0 + theory.closing_rate(r, 700)) * r.anchor_price
        assert result.closing_price == expected


def test_non_termination_cap():
    pop = exact_population(ask_rates=[0.005, 0.01, 0.015, 0.02, 0.025],
                           trend_up=[0.01, 0.015])
    state = MarketState(pop, p0=100.0, wave_cap=1)
    state.begin_period()
    with pytest.raises(NonTermination):
        buy(state, 2)


# -- take-profit / stop-loss ----------------------------------------------------


def test_place_tp_sl_short_examples():
    pop = raw_population([CONTRARIAN], [0.02], r_profit=[0.03], r_loss=[-0.05])
    state = MarketState(pop, p0=100.0)
    state.place_tp_sl(0, entry_price=102.0, position=-1)
    (trigger, _, owner), = state.book.pending_stops(Side.BUY)
    assert trigger == pytest.approx(107.1)
    assert owner == 0
    (price, _, owner), = state.book.resting(Side.BUY)
    assert price == pytest.approx(102.0 * 0.97)
    assert owner == 0


def test_place_tp_sl_long_examples():
    pop = raw_population([CONTRARIAN], [0.02], r_profit=[0.03], r_loss=[-0.05])
    state = MarketState(pop, p0=100.0)
    state.place_tp_sl(0, entry_price=100.0, position=1)
    (price, _, owner), = state.book.resting(Side.SELL)
    assert price == pytest.approx(103.0) and owner == 0
    (trigger, _, owner), = state.book.pending_stops(Side.SELL)
    assert trigger == pytest.approx(95.0) and owner == 0


def test_place_tp_sl_noop_without_parameters():
    pop = exact_population(ask_rates=[0.02])
    state = MarketState(pop, p0=100.0)
    state.place_tp_sl(0, entry_price=100.0, position=1)
    assert state.book.resting(Side.SELL) == []
    assert state.book.pending_stops(Side.SELL) == []


def test_stop_squeeze_cascade():
    # six contrarians with exits, four deep levels without
    rates = [0.01, 0.02, 0.03, 0.05, 0.08, 0.09, 0.20, 0.25, 0.30, 0.35]
    rp = [0.05] * 6 + [np.nan] * 4
    rl = [-0.02] * 6 + [np.nan] * 4
    pop = raw_population([CONTRARIAN] * 10, rates, rp, rl)
    state = MarketState(pop, p0=100.0)
    state.begin_period()
    result = buy(state, 4)

    prices = [f.price for f in result.fills]
    assert prices == pytest.approx(
        [101.0, 102.0, 103.0, 105.0, 108.0, 109.0, 120.0, 125.0, 130.0, 135.0])
    assert result.closing_price == pytest.approx(135.0)
    assert result.cascade_counts == []  # stop-driven, no trend investors

    # stop groups execute in trigger order: id0 before id1, etc.
    squeezed = [f.buy_owner for f in result.fills[4:]]
    assert squeezed == [0, 1, 2, 3, 4, 5]

    # everyone with exit parameters was squeezed flat and locked
    for i in range(6):
        st = state.status(i)
        assert st.position == 0 and st.locked_this_period
        assert st.tp_order_id is None and st.sl_order_id is None
    # the deep levels absorbed the squeeze and now hold shorts
    for i in range(6, 10):
        st = state.status(i)
        assert st.position == -1 and not st.locked_this_period
    # every cancelled take-profit bid is gone, no stops pending
    assert state.book.resting(Side.BUY) == []
    assert state.book.pending_stops(Side.BUY) == []
    assert state.main_fund_shares == 4
    assert state.main_fund_cash == -sum(prices[:4])
    assert int(state.positions().sum()) + state.main_fund_shares == 0


def test_take_profit_asks_chain_into_the_cascade():
    # each triggered trend buyer lifts the previous one's take-profit ask
    types = [CONTRARIAN] * 4 + [TREND] * 3
    rates = [0.01, 0.02, 0.03, 0.04, 0.015, 0.03, 0.034]
    rp = [np.nan] * 4 + [0.004] * 3
    rl = [np.nan] * 4 + [-0.001] * 3
    pop = raw_population(types, rates, rp, rl)
    state = MarketState(pop, p0=100.0)
    state.begin_period()
    result = buy(state, 2)

    assert result.cascade_counts == [1, 1, 1]
    tp1 = 103.0 * 1.004
    tp2 = tp1 * 1.004
    prices = [f.price for f in result.fills]
    assert prices == pytest.approx([101.0, 102.0, 103.0, tp1, tp2])
    assert result.closing_price == pytest.approx(tp2)

    cash = state.cash_balances()
    for tid, entry, exit_price in ((4, 103.0, tp1), (5, tp1, tp2)):
        st = state.status(tid)
        assert st.position == 0 and st.locked_this_period
        assert cash[tid] == pytest.approx(exit_price - entry)
    last = state.status(6)
    assert last.position == 1
    assert last.entry_price == pytest.approx(tp2)
    # filled take-profits cancelled their sibling stops
    pending = state.book.pending_stops(Side.SELL)
    assert [owner for _, _, owner in pending] == [6]


def test_take_profit_fill_in_next_period():
    # short takes profit when the fund sells into its resting bid
    rates = [0.02, 0.05, -0.08]
    rp = [0.05, np.nan, np.nan]
    rl = [-0.50, np.nan, np.nan]
    pop = raw_population([CONTRARIAN] * 3, rates, rp, rl)
    state = MarketState(pop, p0=100.0)
    state.begin_period()
    buy(state, 1)  # id0 shorts at 102; TP bid 96.9, stop buy 153
    assert state.status(0).position == -1

    state.begin_period()
    result = sell(state, 1)
    # best bid is the take-profit at 96.9 (fresh bid rests at 0.92 * 102)
    assert result.fills[0].price == pytest.approx(96.9)
    assert result.fills[0].buy_owner == 0
    st = state.status(0)
    assert st.position == 0 and st.locked_this_period
    assert state.book.pending_stops(Side.BUY) == []  # sibling stop cancelled
    assert state.cash_balances()[0] == pytest.approx(102.0 - 96.9)


# -- cross-period behavior ------------------------------------------------------


def test_holders_do_not_requote():
    pop = exact_population(ask_rates=[0.01, 0.02, 0.03], bid_rates=[-0.01])
    state = MarketState(pop, p0=100.0)
    state.begin_period()
    buy(state, 2)  # ids of the two cheapest asks now hold shorts
    state.begin_period()
    asks = state.book.resting(Side.SELL)
    assert len(asks) == 1  # only the still-flat contrarian re-quotes
    # and it re-anchors to the new price
    assert asks[0][0] == pytest.approx(1.03 * 102.0)


def test_anchor_is_previous_close():
    pop = exact_population(ask_rates=[0.01, 0.02], bid_rates=[-0.01, -0.02])
    state = MarketState(pop, p0=100.0)
    state.begin_period()
    r1 = buy(state, 2)
    state.begin_period()
    assert state.anchor_price == r1.closing_price


def test_locks_reset_each_period():
    rates = [0.01, 0.02, 0.30]
    rp = [0.05, np.nan, np.nan]
    rl = [-0.02, np.nan, np.nan]
    pop = raw_population([CONTRARIAN] * 3, rates, rp, rl)
    state = MarketState(pop, p0=100.0)
    state.begin_period()
    buy(state, 2)  # id0 shorts at 101, stop at 103.02 <= 102? no; nothing fires
    assert state.status(0).position == -1
    state.begin_period()
    assert not any(state.status(i).locked_this_period for i in range(3))


# -- bookkeeping oracles ----------------------------------------------------------


def replay_fills(pop_size, period_results):
    """Recompute positions/cash from the fill stream alone."""
    pos = np.zeros(pop_size + 1, dtype=np.int64)  # last slot = dominant fund
    cash = np.zeros(pop_size + 1)
    for result in period_results:
        period_pos = {}
        exited = set()
        for f in result.fills:
            for agent, sign in ((f.buy_owner, +1), (f.sell_owner, -1)):
                assert agent not in exited, "flattened investor traded again"
                pos[agent] += sign * f.size
                cash[agent] -= sign * f.price * f.size
                if agent != MAIN_FUND:
                    old = period_pos.get(agent, None)
                    period_pos[agent] = pos[agent]
                    if old is not None and pos[agent] == 0:
                        exited.add(agent)
            assert f.price * f.size - f.price * f.size == 0.0
    return pos, cash


def test_conservation_and_lock_replay():
    pop = build_population(default_config(0.4, Equal(0.02, 0.08), seed=31))
    state = MarketState(pop, p0=100.0, seed=11)
    results = []
    for side, size in ((Side.BUY, 700), (Side.BUY, 700), (Side.SELL, 1400)):
        state.begin_period()
        results.append(state.run_period(state.market_order(side, size)))
    pos, cash = replay_fills(len(pop), results)
    assert pos[:-1].sum() + pos[-1] == 0
    assert np.array_equal(pos[:-1], state.positions().astype(np.int64))
    assert pos[-1] == state.main_fund_shares
    # per-agent cash replays exactly; dominant fund to accumulation tolerance
    assert np.array_equal(cash[:-1], state.cash_balances())
    assert cash[-1] == pytest.approx(state.main_fund_cash, rel=1e-12)


def test_entry_at_most_once_per_period():
    pop = build_population(default_config(0.8, Equal(0.02, 0.08), seed=13))
    state = MarketState(pop, p0=100.0, seed=5)
    state.begin_period()
    result = buy(state, 1500)
    entries = {}
    pos = {}
    for f in result.fills:
        for agent, sign in ((f.buy_owner, +1), (f.sell_owner, -1)):
            if agent == MAIN_FUND:
                continue
            before = pos.get(agent, 0)
            pos[agent] = before + sign
            if before == 0:
                entries[agent] = entries.get(agent, 0) + 1
    assert entries and max(entries.values()) == 1


def test_determinism_same_seed_same_fills():
    def run():
        pop = build_population(default_config(0.4, Equal(0.02, 0.08), seed=42))
        state = MarketState(pop, p0=100.0, seed=9)
        state.begin_period()
        r1 = buy(state, 900)
        state.begin_period()
        r2 = sell(state, 900)
        return r1, r2

    first = run()
    second = run()
    for a, b in zip(first, second):
        assert a.closing_price == b.closing_price
        assert a.cascade_counts == b.cascade_counts
        assert a.fills == b.fills


def test_oracle_equality_quick():
    for seed in (3, 4):
        pop = build_population(default_config(0.4, NoTpSl(), seed=seed))
        state = MarketState(pop, p0=100.0, seed=seed)
        state.begin_period()
        r1 = buy(state, 500)
        state.begin_period()
        r2 = sell(state, 500)
        m_buy = -r1.main_fund_cash_flow
        m_sell = r2.main_fund_cash_flow
        buy_r, sell_r = r1.activation_realization, r2.activation_realization
        assert m_buy == pytest.approx(theory.cost_of_buy(buy_r, 500), rel=1e-12)
        r_mf = m_sell / m_buy - 1.0
        assert r_mf == pytest.approx(theory.single_return(buy_r, sell_r, 500),
                                     rel=1e-9)


def test_status_view_roundtrip():
    pop = exact_population(ask_rates=[0.02])
    state = MarketState(pop, p0=100.0)
    st = state.status(0)
    assert st.position == 0 and st.entry_price is None
    assert st.tp_order_id is None and st.sl_order_id is None
    assert not st.locked_this_period
