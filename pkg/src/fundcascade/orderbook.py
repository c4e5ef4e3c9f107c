"""Price-time priority matching for a single instrument.

Resting liquidity has two sources that merge under one (price, seq) priority
rule, where seq is the global submission counter:

* a per-side *ladder* of bulk quotes seeded once per trading period, stored
  as priority-sorted arrays and consumed through a cursor; and
* an *overlay* heap of individually placed limit orders (take-profit exits),
  which supports cancellation via tombstones.

Stop orders rest in trigger-ordered queues until polled, at which point the
caller executes them as market orders. Small-investor quotes are size 1, so
every fill is size 1; a larger market order simply produces several fills.

Heap entries are lean tuples (key, seq, order_id, owner, price-or-trigger);
Order objects only materialize at the public API boundary.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional, Union

import numpy as np

from .errors import BookExhausted, CrossedBook

#: Owner id of the dominant fund (small investors use their population index).
MAIN_FUND = -1


class Side(IntEnum):
    BUY = 0
    SELL = 1

    @property
    def opposite(self) -> "Side":
        return Side.SELL if self is Side.BUY else Side.BUY


@dataclass(frozen=True)
class Limit:
    price: float


@dataclass(frozen=True)
class Market:
    pass


@dataclass(frozen=True)
class Stop:
    trigger_price: float


@dataclass(frozen=True)
class Order:
    order_id: int
    owner_id: int
    side: Side
    kind: Union[Limit, Market, Stop]
    size: int
    seq: int


@dataclass(frozen=True)
class Fill:
    buy_owner: int
    sell_owner: int
    price: float
    size: int
    seq: int


class FillBatch:
    """One market execution: resting-side arrays plus aggressor attribution.

    ``tags`` carries the caller payload attached to ladder quotes (NaN for
    overlay fills); ``from_ladder`` distinguishes the two sources.
    """

    __slots__ = ("side", "aggressors", "owners", "prices", "order_ids",
                 "tags", "from_ladder", "seq0")

    def __init__(self, side, aggressors, owners, prices, order_ids, tags,
                 from_ladder, seq0):
        self.side = side
        self.aggressors = aggressors
        self.owners = owners
        self.prices = prices
        self.order_ids = order_ids
        self.tags = tags
        self.from_ladder = from_ladder
        self.seq0 = seq0

    def __len__(self) -> int:
        return len(self.prices)

    def fills(self) -> list[Fill]:
        out = []
        for i in range(len(self.prices)):
            agg = int(self.aggressors[i])
            rest = int(self.owners[i])
            buyer, seller = (agg, rest) if self.side is Side.BUY else (rest, agg)
            out.append(Fill(buyer, seller, float(self.prices[i]), 1, self.seq0 + i))
        return out


class _Ladder:
    """Priority-sorted bulk quotes for one side; keys ascend (asks: price,
    bids: -price) and entry i carries seq = seq0 + i."""

    __slots__ = ("keys", "prices", "owners", "tags", "seq0", "ptr")

    def __init__(self):
        self.keys = np.empty(0)
        self.prices = np.empty(0)
        self.owners = np.empty(0, dtype=np.int64)
        self.tags = np.empty(0)
        self.seq0 = 0
        self.ptr = 0

    def load(self, keys, prices, owners, tags, seq0):
        if len(keys) > 1 and not (np.diff(keys) >= 0).all():
            raise ValueError("ladder quotes must arrive in priority order")
        self.keys = keys
        self.prices = prices
        self.owners = owners
        self.tags = tags
        self.seq0 = seq0
        self.ptr = 0

    def clear(self):
        self.ptr = len(self.keys)

    @property
    def remaining(self) -> int:
        return len(self.keys) - self.ptr


class Book:
    """Continuous double-auction book with stop queues."""

    def __init__(self, last_price: float):
        if not last_price > 0:
            raise ValueError("last_price must be positive")
        self.last_price = last_price
        self._ladders = {Side.BUY: _Ladder(), Side.SELL: _Ladder()}  # bids, asks
        self._overlay = {Side.BUY: [], Side.SELL: []}
        self._overlay_live = {Side.BUY: 0, Side.SELL: 0}
        self._stops = {Side.BUY: [], Side.SELL: []}
        self._stops_live = {Side.BUY: 0, Side.SELL: 0}
        self._tombstones: set[int] = set()
        self._fill_seq = 0

    # -- placement ------------------------------------------------------------

    @staticmethod
    def _key(side: Side, value: float) -> float:
        # Priority keys ascend on both sides: asks by price, bids by -price.
        return value if side is Side.SELL else -value

    def _check_cross(self, side: Side, best_in_batch: float) -> None:
        if side is Side.SELL:
            bid = self.best_bid()
            if bid is not None and bid >= best_in_batch:
                raise CrossedBook(f"ask {best_in_batch} would cross best bid {bid}")
        else:
            ask = self.best_ask()
            if ask is not None and ask <= best_in_batch:
                raise CrossedBook(f"bid {best_in_batch} would cross best ask {ask}")

    def place_limit(self, order: Order) -> None:
        if not isinstance(order.kind, Limit):
            raise ValueError("place_limit requires a Limit order")
        if not order.kind.price > 0 or order.size < 1:
            raise ValueError("limit orders need positive price and size >= 1")
        price = order.kind.price
        self._check_cross(order.side, price)
        heapq.heappush(self._overlay[order.side],
                       (self._key(order.side, price), order.seq,
                        order.order_id, order.owner_id, price))
        self._overlay_live[order.side] += 1

    def push_limits(self, side: Side, prices: np.ndarray, owners: np.ndarray,
                    seqs: np.ndarray) -> None:
        """Bulk limit placement; one crossing check for the whole batch."""
        if len(prices) == 0:
            return
        best = prices.min() if side is Side.SELL else prices.max()
        self._check_cross(side, float(best))
        heap = self._overlay[side]
        sign = 1.0 if side is Side.SELL else -1.0
        for p, o, s in zip(prices.tolist(), owners.tolist(), seqs.tolist()):
            heapq.heappush(heap, (sign * p, s, s, o, p))
        self._overlay_live[side] += len(prices)

    def seed_quotes(self, side: Side, prices: np.ndarray, owners: np.ndarray,
                    seq0: int, tags: Optional[np.ndarray] = None) -> None:
        """Replace this side's ladder with priority-sorted bulk quotes."""
        if tags is None:
            tags = np.full(len(prices), np.nan)
        keys = prices if side is Side.SELL else -prices
        self._ladders[side].load(keys, prices, owners, tags, seq0)

    def clear_quotes(self) -> None:
        """Drop both ladders (period boundary); overlay and stops survive."""
        self._ladders[Side.BUY].clear()
        self._ladders[Side.SELL].clear()

    def place_stop(self, order: Order) -> None:
        # Firing order is ascending trigger for stop buys and descending for
        # stop sells, i.e. the opposite key convention from resting limits.
        if not isinstance(order.kind, Stop):
            raise ValueError("place_stop requires a Stop order")
        trigger = order.kind.trigger_price
        if not trigger > 0:
            raise ValueError("stop trigger must be positive")
        heapq.heappush(self._stops[order.side],
                       (self._key(order.side.opposite, trigger), order.seq,
                        order.order_id, order.owner_id, trigger))
        self._stops_live[order.side] += 1

    def push_stops(self, side: Side, triggers: np.ndarray, owners: np.ndarray,
                   seqs: np.ndarray) -> None:
        heap = self._stops[side]
        sign = 1.0 if side is Side.BUY else -1.0
        for t, o, s in zip(triggers.tolist(), owners.tolist(), seqs.tolist()):
            heapq.heappush(heap, (sign * t, s, s, o, t))
        self._stops_live[side] += len(triggers)

    def cancel(self, order_id: int, side: Side, is_stop: bool) -> None:
        """Tombstone a resting overlay limit or stop order."""
        self._tombstones.add(order_id)
        if is_stop:
            self._stops_live[side] -= 1
        else:
            self._overlay_live[side] -= 1

    def cancel_many(self, order_ids: np.ndarray, sell_side: np.ndarray,
                    is_stop: bool) -> None:
        """Bulk tombstoning; sell_side marks which entries rest as sells."""
        live = self._stops_live if is_stop else self._overlay_live
        self._tombstones.update(order_ids.tolist())
        n_sell = int(np.count_nonzero(sell_side))
        live[Side.SELL] -= n_sell
        live[Side.BUY] -= len(order_ids) - n_sell

    # -- inspection -------------------------------------------------------------

    def _overlay_head(self, side: Side):
        heap = self._overlay[side]
        while heap and heap[0][2] in self._tombstones:
            self._tombstones.discard(heapq.heappop(heap)[2])
        return heap[0] if heap else None

    def depth(self, side: Side) -> int:
        """Live resting size on the given side (ladder plus overlay)."""
        return self._ladders[side].remaining + self._overlay_live[side]

    def best_ask(self) -> Optional[float]:
        return self._best(Side.SELL)

    def best_bid(self) -> Optional[float]:
        return self._best(Side.BUY)

    def _best(self, side: Side) -> Optional[float]:
        ladder = self._ladders[side]
        head = self._overlay_head(side)
        candidates = []
        if ladder.remaining:
            candidates.append(ladder.keys[ladder.ptr])
        if head is not None:
            candidates.append(head[0])
        if not candidates:
            return None
        key = min(candidates)
        return float(key if side is Side.SELL else -key)

    def resting(self, side: Side) -> list[tuple[float, int, int]]:
        """Live (price, seq, owner) entries in priority order; for tests."""
        ladder = self._ladders[side]
        rows = [
            (float(ladder.keys[i]), ladder.seq0 + i,
             (float(ladder.prices[i]), ladder.seq0 + i, int(ladder.owners[i])))
            for i in range(ladder.ptr, len(ladder.keys))
        ]
        rows += [
            (key, seq, (price, seq, owner))
            for key, seq, oid, owner, price in self._overlay[side]
            if oid not in self._tombstones
        ]
        return [row for _, _, row in sorted(rows, key=lambda r: (r[0], r[1]))]

    def pending_stops(self, side: Side) -> list[tuple[float, int, int]]:
        """Live (trigger, seq, owner) stop entries in firing order; for tests."""
        rows = [
            (key, seq, (trigger, seq, owner))
            for key, seq, oid, owner, trigger in self._stops[side]
            if oid not in self._tombstones
        ]
        return [row for _, _, row in sorted(rows, key=lambda r: (r[0], r[1]))]

    # -- matching ---------------------------------------------------------------

    def consume(self, side: Side, size: int,
                aggressors: Union[int, np.ndarray] = MAIN_FUND) -> FillBatch:
        """Execute a market order of ``size`` against the opposite side.

        Fills honor (price, seq) across ladder and overlay; last_price moves
        to the final fill price. Raises BookExhausted (before any mutation)
        when fewer than ``size`` units rest.
        """
        if size < 1:
            raise ValueError("market order size must be >= 1")
        rest_side = side.opposite
        if self.depth(rest_side) < size:
            raise BookExhausted(
                f"market {side.name} for {size} exceeds resting depth "
                f"{self.depth(rest_side)}"
            )
        ladder = self._ladders[rest_side]
        prices = np.empty(size)
        owners = np.empty(size, dtype=np.int64)
        order_ids = np.empty(size, dtype=np.int64)
        tags = np.empty(size)
        from_ladder = np.empty(size, dtype=bool)
        pos = 0
        while pos < size:
            head = self._overlay_head(rest_side)
            run = 0
            if ladder.remaining:
                if head is None:
                    run = min(size - pos, ladder.remaining)
                else:
                    key_o, seq_o = head[0], head[1]
                    lo, hi = ladder.ptr, len(ladder.keys)
                    before = lo + int(np.searchsorted(ladder.keys[lo:hi], key_o,
                                                      side="left"))
                    # Equal-key ladder entries carry consecutive seqs seq0+i,
                    # so those preceding the overlay order form a prefix.
                    eq_end = lo + int(np.searchsorted(ladder.keys[lo:hi], key_o,
                                                      side="right"))
                    if before < eq_end:
                        before += min(eq_end - before,
                                      max(0, seq_o - (ladder.seq0 + before)))
                    run = min(size - pos, before - lo)
            if run:
                lo = ladder.ptr
                prices[pos:pos + run] = ladder.prices[lo:lo + run]
                owners[pos:pos + run] = ladder.owners[lo:lo + run]
                order_ids[pos:pos + run] = np.arange(ladder.seq0 + lo,
                                                     ladder.seq0 + lo + run)
                tags[pos:pos + run] = ladder.tags[lo:lo + run]
                from_ladder[pos:pos + run] = True
                ladder.ptr += run
                pos += run
            else:
                # Pop every consecutive overlay order that beats the ladder
                # head, re-checking tombstones as we go.
                heap = self._overlay[rest_side]
                if ladder.remaining:
                    limit_key = ladder.keys[ladder.ptr]
                    limit_seq = ladder.seq0 + ladder.ptr
                else:
                    limit_key = limit_seq = None
                while pos < size and heap:
                    key, seq, oid, owner, price = heap[0]
                    if oid in self._tombstones:
                        heapq.heappop(heap)
                        self._tombstones.discard(oid)
                        continue
                    if limit_key is not None and (key, seq) > (limit_key, limit_seq):
                        break
                    heapq.heappop(heap)
                    self._overlay_live[rest_side] -= 1
                    prices[pos] = price
                    owners[pos] = owner
                    order_ids[pos] = oid
                    tags[pos] = np.nan
                    from_ladder[pos] = False
                    pos += 1

        if isinstance(aggressors, (int, np.integer)):
            aggressors = np.full(size, aggressors, dtype=np.int64)
        seq0 = self._fill_seq
        self._fill_seq += size
        self.last_price = float(prices[-1])
        return FillBatch(side, aggressors, owners, prices, order_ids, tags,
                         from_ladder, seq0)

    def execute_market(self, side: Side, size: int,
                       owner: int = MAIN_FUND) -> list[Fill]:
        """Spec-level market execution returning Fill records."""
        return self.consume(side, size, owner).fills()

    def poll_stop_entries(self, last_price: float) -> list[tuple]:
        """Remove and return satisfied stops as (side, seq, oid, owner, trigger).

        Stop buys fire at trigger <= last_price, stop sells at trigger >=
        last_price (both inclusive), each group in trigger-then-seq order.
        """
        fired: list[tuple] = []
        for side in (Side.BUY, Side.SELL):
            heap = self._stops[side]
            limit = self._key(side.opposite, last_price)
            while heap:
                key, seq, oid, owner, trigger = heap[0]
                if oid in self._tombstones:
                    heapq.heappop(heap)
                    self._tombstones.discard(oid)
                    continue
                if key > limit:
                    break
                heapq.heappop(heap)
                self._stops_live[side] -= 1
                fired.append((side, seq, oid, owner, trigger))
        return fired

    def poll_stops(self, last_price: float) -> list[Order]:
        """Spec-level stop polling returning Order records."""
        return [Order(oid, owner, side, Stop(trigger), 1, seq)
                for side, seq, oid, owner, trigger
                in self.poll_stop_entries(last_price)]

    def next_stop_trigger(self, side: Side) -> Optional[float]:
        heap = self._stops[side]
        while heap and heap[0][2] in self._tombstones:
            self._tombstones.discard(heapq.heappop(heap)[2])
        if not heap:
            return None
        return float(heap[0][4])
