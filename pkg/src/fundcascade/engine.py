"""Trading-period state machine.

A period opens by re-anchoring quotes to the last traded price: every flat,
activated contrarian rests one size-1 limit at (1 + r_market) * anchor, and
every flat, activated trend investor arms a trigger on the relative move from
the anchor. The dominant fund's market order then starts a cascade: fills
move the price, satisfied stops fire as market orders, trend triggers whose
thresholds are reached submit market orders wave by wave, and newly opened
positions rest take-profit limits and stop-loss stops. The period ends at the
fixpoint where nothing more can fire.

Positions and their exit orders survive across periods; holders place no new
entry orders. All trigger comparisons against quote rates use the rate itself
(the quote's ladder tag) so the realized cascade is arithmetically identical
to the closed-form recursion evaluated on the same activation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NonTermination
from .orderbook import MAIN_FUND, Book, Fill, FillBatch, Market, Order, Side
from .population import Population
from .theory import ActivationRealization


@dataclass(frozen=True)
class InvestorStatus:
    """Read-only view of one investor's trading state."""

    position: int
    entry_price: Optional[float]
    tp_order_id: Optional[int]
    sl_order_id: Optional[int]
    locked_this_period: bool


@dataclass
class PeriodResult:
    """Everything one trading period produced."""

    period_index: int
    closing_price: float
    cascade_counts: list[int]
    main_fund_cash_flow: float
    main_fund_shares_delta: int
    activation_realization: ActivationRealization
    fill_batches: list[FillBatch] = field(default_factory=list)

    @property
    def fills(self) -> list[Fill]:
        out: list[Fill] = []
        for batch in self.fill_batches:
            out.extend(batch.fills())
        return out

    @property
    def fill_count(self) -> int:
        return sum(len(b) for b in self.fill_batches)

    def main_fund_fill_prices(self) -> np.ndarray:
        parts = [b.prices[b.aggressors == MAIN_FUND] for b in self.fill_batches]
        return np.concatenate(parts) if parts else np.empty(0)


class MarketState:
    """One confined simulation: population, book, statuses, and RNG."""

    def __init__(self, population: Population, p0: float = 100.0, seed: int = 0,
                 wave_cap: int = 10_000):
        if not p0 > 0:
            raise ValueError("initial price must be positive")
        self.population = population
        self.period_index = 0
        self.anchor_price = p0
        self.book = Book(last_price=p0)
        self.rng = np.random.default_rng(seed)
        self.wave_cap = wave_cap

        n = len(population)
        self._position = np.zeros(n, dtype=np.int8)
        self._entry_price = np.full(n, np.nan)
        self._tp_id = np.full(n, -1, dtype=np.int64)
        self._sl_id = np.full(n, -1, dtype=np.int64)
        self._locked = np.zeros(n, dtype=bool)
        self._cash = np.zeros(n)
        self.main_fund_shares = 0
        self.main_fund_cash = 0.0

        self._seq = 0
        self._period_open = False
        self._rel_move = 0.0
        self._period_batches: list[FillBatch] = []
        # Armed trend triggers for the current period (sorted, cursor-based).
        self._up_r = np.empty(0)
        self._up_ids = np.empty(0, dtype=np.int64)
        self._up_ptr = 0
        self._down_r = np.empty(0)
        self._down_ids = np.empty(0, dtype=np.int64)
        self._down_ptr = 0
        self._realization: Optional[ActivationRealization] = None

    @property
    def last_price(self) -> float:
        return self.book.last_price

    def positions(self) -> np.ndarray:
        return self._position.copy()

    def cash_balances(self) -> np.ndarray:
        return self._cash.copy()

    def status(self, investor_id: int) -> InvestorStatus:
        tp = int(self._tp_id[investor_id])
        sl = int(self._sl_id[investor_id])
        entry = self._entry_price[investor_id]
        return InvestorStatus(
            position=int(self._position[investor_id]),
            entry_price=None if np.isnan(entry) else float(entry),
            tp_order_id=None if tp < 0 else tp,
            sl_order_id=None if sl < 0 else sl,
            locked_this_period=bool(self._locked[investor_id]),
        )

    def market_order(self, side: Side, size: int) -> Order:
        """Build the dominant fund's market order for run_period."""
        seq = self._next_seq()
        return Order(order_id=seq, owner_id=MAIN_FUND, side=side,
                     kind=Market(), size=size, seq=seq)

    def _next_seq(self) -> int:
        s = self._seq
        self._seq += 1
        return s

    # -- period lifecycle ---------------------------------------------------

    def begin_period(self) -> None:
        """Open the next trading period against the current price."""
        if self._period_open:
            raise RuntimeError("previous period still open")
        pop = self.population
        self.period_index += 1
        self.anchor_price = self.book.last_price
        self._rel_move = 0.0
        self._locked[:] = False
        self.book.clear_quotes()

        activated = self.rng.random(len(pop)) < pop.p_active
        eligible = activated & (self._position == 0)

        ask_ids = pop.ask_contrarians[eligible[pop.ask_contrarians]]
        ask_r = pop.r_market[ask_ids]
        ask_prices = (1.0 + ask_r) * self.anchor_price
        seq0 = self._seq
        self._seq += len(ask_ids)
        self.book.seed_quotes(Side.SELL, ask_prices, ask_ids, seq0, tags=ask_r)

        bid_ids = pop.bid_contrarians[eligible[pop.bid_contrarians]]
        bid_r = pop.r_market[bid_ids]
        bid_prices = (1.0 + bid_r) * self.anchor_price
        seq0 = self._seq
        self._seq += len(bid_ids)
        self.book.seed_quotes(Side.BUY, bid_prices, bid_ids, seq0, tags=bid_r)

        self._up_ids = pop.trend_up[eligible[pop.trend_up]]
        self._up_r = pop.r_market[self._up_ids]
        self._up_ptr = 0
        self._down_ids = pop.trend_down[eligible[pop.trend_down]]
        self._down_r = pop.r_market[self._down_ids]
        self._down_ptr = 0

        self._realization = ActivationRealization(
            asks=ask_r, bids=bid_r, trend_up=self._up_r,
            trend_down=self._down_r, anchor_price=self.anchor_price,
        )
        self._period_open = True

    def run_period(self, main_fund_order: Optional[Order] = None) -> PeriodResult:
        """Run the period to its fixpoint and return what happened."""
        if not self._period_open:
            raise RuntimeError("begin_period must run first")
        self._period_batches = []
        waves: list[int] = []
        cash0 = self.main_fund_cash
        shares0 = self.main_fund_shares

        if main_fund_order is not None:
            if not isinstance(main_fund_order.kind, Market):
                raise ValueError("the dominant fund trades at market")
            if main_fund_order.owner_id != MAIN_FUND:
                raise ValueError("run_period only injects main-fund orders")
            batch = self._execute(main_fund_order.side, main_fund_order.size,
                                  MAIN_FUND)
            self._settle_main_fund(batch)
            self._process_resting(batch)

        iterations = 0
        while True:
            iterations += 1
            if iterations > self.wave_cap:
                raise NonTermination(f"cascade exceeded {self.wave_cap} waves")
            fired = self._fire_stops()
            wave = self._trend_wave()
            if wave:
                waves.append(wave)
            if not fired and not wave:
                break

        self._period_open = False
        self._assert_fixpoint()
        result = PeriodResult(
            period_index=self.period_index,
            closing_price=self.book.last_price,
            cascade_counts=waves,
            main_fund_cash_flow=self.main_fund_cash - cash0,
            main_fund_shares_delta=self.main_fund_shares - shares0,
            activation_realization=self._realization,
            fill_batches=self._period_batches,
        )
        return result

    # -- cascade machinery ----------------------------------------------------

    def _execute(self, side: Side, size: int, aggressors) -> FillBatch:
        batch = self.book.consume(side, size, aggressors)
        tag = batch.tags[-1]
        if np.isnan(tag):
            self._rel_move = (batch.prices[-1] - self.anchor_price) / self.anchor_price
        else:
            self._rel_move = float(tag)
        self._period_batches.append(batch)
        return batch

    def _fire_stops(self) -> bool:
        fired_any = False
        while True:
            stops = self.book.poll_stop_entries(self.book.last_price)
            if not stops:
                return fired_any
            fired_any = True
            # One poll returns at most one direction (stops rest on the
            # unreachable side of the price at placement); execute the group
            # as one market order attributed stop-by-stop in firing order.
            for side in (Side.BUY, Side.SELL):
                group = [entry for entry in stops if entry[0] is side]
                if not group:
                    continue
                owners = np.array([entry[3] for entry in group], dtype=np.int64)
                oids = np.array([entry[2] for entry in group], dtype=np.int64)
                assert (self._sl_id[owners] == oids).all(), \
                    "stop fired for an investor whose exit already happened"
                batch = self._execute(side, len(group), owners)
                self._process_resting(batch)
                self._exit_bulk(owners, batch.prices,
                                buying=side is Side.BUY, via_stop=True)

    def _trend_wave(self) -> int:
        rel = self._rel_move
        if rel > 0 and self._up_ptr < len(self._up_r):
            hi = int(np.searchsorted(self._up_r, rel, side="right"))
            members = self._up_ids[self._up_ptr:hi]
            if len(members) == 0:
                return 0
            self._up_ptr = hi
            side = Side.BUY
        elif rel < 0 and self._down_ptr < len(self._down_r):
            # trend_down is sorted by |r|; triggers satisfied when r >= rel.
            hi = int(np.searchsorted(-self._down_r, -rel, side="right"))
            members = self._down_ids[self._down_ptr:hi]
            if len(members) == 0:
                return 0
            self._down_ptr = hi
            side = Side.SELL
        else:
            return 0

        batch = self._execute(side, len(members), members)
        self._process_resting(batch)
        self._enter(members, batch.prices,
                    position=+1 if side is Side.BUY else -1, paying=side is Side.BUY)
        return len(members)

    # -- fill settlement ------------------------------------------------------

    def _settle_main_fund(self, batch: FillBatch) -> None:
        total = float(np.sum(batch.prices))
        if batch.side is Side.BUY:
            self.main_fund_cash -= total
            self.main_fund_shares += len(batch)
        else:
            self.main_fund_cash += total
            self.main_fund_shares -= len(batch)

    def _process_resting(self, batch: FillBatch) -> None:
        """Settle the passive side of a batch: ladder fills are entries by
        flat contrarians, overlay fills are take-profit exits."""
        ladder = batch.from_ladder
        if ladder.any():
            if ladder.all():
                entered, entry_prices = batch.owners, batch.prices
            else:
                entered, entry_prices = batch.owners[ladder], batch.prices[ladder]
            # Resting asks sold (short entry); resting bids bought (long).
            position = -1 if batch.side is Side.BUY else +1
            self._enter(entered, entry_prices, position,
                        paying=batch.side is Side.SELL)
        if not ladder.all():
            exited = batch.owners[~ladder]
            assert (self._tp_id[exited] == batch.order_ids[~ladder]).all(), \
                "overlay fill must be the owner's take-profit order"
            self._exit_bulk(exited, batch.prices[~ladder],
                            buying=batch.side is Side.SELL, via_stop=False)

    def _enter(self, owners: np.ndarray, prices: np.ndarray, position: int,
               paying: bool) -> None:
        if len(owners) == 0:
            return
        assert not self._position[owners].any(), "entry requires a flat investor"
        self._position[owners] = position
        self._entry_price[owners] = prices
        if paying:
            self._cash[owners] -= prices
        else:
            self._cash[owners] += prices
        rp = self.population.r_profit[owners]
        with_exits = ~np.isnan(rp)
        if with_exits.any():
            self._place_tp_sl_bulk(owners[with_exits], prices[with_exits], position)

    def _exit_bulk(self, owners: np.ndarray, prices: np.ndarray, buying: bool,
                   via_stop: bool) -> None:
        """Flatten position holders: settle cash, cancel the sibling exit
        order (one-cancels-other), and lock them for the period."""
        positions = self._position[owners]
        assert positions.all(), "exit fill for a flat investor"
        # A holder's take-profit and stop-loss rest on the same side:
        # sells for longs, buys for shorts.
        siblings = self._tp_id[owners] if via_stop else self._sl_id[owners]
        live = siblings >= 0
        if live.any():
            self.book.cancel_many(siblings[live], positions[live] > 0,
                                  is_stop=not via_stop)
        self._position[owners] = 0
        if buying:
            self._cash[owners] -= prices
        else:
            self._cash[owners] += prices
        self._entry_price[owners] = np.nan
        self._tp_id[owners] = -1
        self._sl_id[owners] = -1
        self._locked[owners] = True

    def place_tp_sl(self, investor_id: int, entry_price: float, position: int) -> None:
        """Rest the exit pair for one newly opened position.

        Long: take-profit ask at entry*(1+r_profit), stop-loss sell triggered
        at entry*(1+r_loss); short mirrors both (r_loss is negative). No-op
        for investors without exit parameters.
        """
        if position not in (-1, 1):
            raise ValueError("position must be +1 or -1")
        if np.isnan(self.population.r_profit[investor_id]):
            return
        self._place_tp_sl_bulk(np.array([investor_id]), np.array([entry_price]),
                               position)

    def _place_tp_sl_bulk(self, owners: np.ndarray, entries: np.ndarray,
                          position: int) -> None:
        rp = self.population.r_profit[owners]
        rl = self.population.r_loss[owners]
        if position > 0:
            tp_prices = entries * (1.0 + rp)
            sl_triggers = entries * (1.0 + rl)
            side = Side.SELL
        else:
            tp_prices = entries * (1.0 - rp)
            sl_triggers = entries * (1.0 - rl)
            side = Side.BUY
        n = len(owners)
        tp_seqs = np.arange(self._seq, self._seq + n, dtype=np.int64)
        sl_seqs = tp_seqs + n
        self._seq += 2 * n
        # Stop-losses first; one whose trigger is already satisfied is picked
        # up by the next poll, mirroring an immediate stop-out.
        self.book.push_stops(side, sl_triggers, owners, sl_seqs)
        self._sl_id[owners] = sl_seqs

        # A take-profit can arrive marketable: within one batch a short
        # entering high rests an exit bid above an earlier long's exit ask
        # (or mirrored). Marketable exits trade immediately at the resting
        # price; executions only worsen the opposite best, so orders passive
        # against the pre-placement best stay passive.
        best = self.book.best_bid() if side is Side.SELL else self.book.best_ask()
        if best is None:
            crossing = np.zeros(n, dtype=bool)
        elif side is Side.SELL:
            crossing = tp_prices <= best
        else:
            crossing = tp_prices >= best
        if not crossing.any():
            self.book.push_limits(side, tp_prices, owners, tp_seqs)
            self._tp_id[owners] = tp_seqs
            return
        for i in range(n):
            owner = int(owners[i])
            if crossing[i]:
                best = (self.book.best_bid() if side is Side.SELL
                        else self.book.best_ask())
                still = best is not None and (
                    tp_prices[i] <= best if side is Side.SELL
                    else tp_prices[i] >= best)
                if still:
                    batch = self._execute(side, 1, owner)
                    self._process_resting(batch)
                    self._exit_bulk(np.array([owner]), batch.prices,
                                    buying=side is Side.BUY, via_stop=False)
                    continue
            self.book.push_limits(side, tp_prices[i:i + 1], owners[i:i + 1],
                                  tp_seqs[i:i + 1])
            self._tp_id[owner] = tp_seqs[i]

    # -- invariants -----------------------------------------------------------

    def _assert_fixpoint(self) -> None:
        rel = self._rel_move
        if rel > 0 and self._up_ptr < len(self._up_r):
            assert self._up_r[self._up_ptr] > rel, "unsatisfied-trigger fixpoint"
        if rel < 0 and self._down_ptr < len(self._down_r):
            assert self._down_r[self._down_ptr] < rel, "unsatisfied-trigger fixpoint"
        buy_trig = self.book.next_stop_trigger(Side.BUY)
        assert buy_trig is None or buy_trig > self.book.last_price, \
            "satisfied stop buy at period end"
        sell_trig = self.book.next_stop_trigger(Side.SELL)
        assert sell_trig is None or sell_trig < self.book.last_price, \
            "satisfied stop sell at period end"
        total = int(self._position.sum(dtype=np.int64)) + self.main_fund_shares
        assert total == 0, "share conservation violated"
