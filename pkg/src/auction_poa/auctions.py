"""Auction formats: outcome rule, payments, utilities, revenue and welfare.

Every format implements one vectorized primitive, ``settle``, mapping a batch
of bid profiles to allocation indicators and payments of the same shape:

* single-good formats take bids of shape ``(P, n)``;
* multi-item formats take bids of shape ``(P, n, m)``.

The scalar helpers (``outcome``, ``utility``, ...) wrap a batch of one.
Ties go to the lowest player index.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .valuations import items_of

__all__ = [
    "AuctionFormat",
    "FirstPrice",
    "SecondPrice",
    "AllPay",
    "PublicGood",
    "SimultaneousItems",
    "Outcome",
    "outcome",
    "utility",
    "revenue",
    "social_welfare",
    "social_welfare_net",
    "winning_bid_sum",
    "utilities_batch",
    "player_utility_batch",
    "revenue_batch",
    "winning_bid_sum_batch",
    "welfare_batch",
    "allocation_value_batch",
    "deviation_utilities",
    "value_tables",
]


class AuctionFormat:
    """Base class. ``m`` is the number of items bid on separately (1 if none)."""

    multi_item = False

    @property
    def m(self) -> int:
        return 1

    def validate(self, bids: np.ndarray) -> np.ndarray:
        b = np.asarray(bids, dtype=float)
        want = 3 if self.multi_item else 2
        if b.ndim != want:
            raise ValueError(f"{type(self).__name__} expects bids of rank {want}, got shape {b.shape}")
        if self.multi_item and b.shape[2] != self.m:
            raise ValueError(f"expected {self.m} items, got {b.shape[2]}")
        if not np.all(np.isfinite(b)) or np.any(b < 0):
            raise ValueError("bids must be finite and nonnegative")
        return b

    def settle(self, bids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def winning_bids(self, bids: np.ndarray) -> np.ndarray:
        alloc, _ = self.settle(bids)
        axes = tuple(range(1, bids.ndim))
        return np.where(alloc, bids, 0.0).sum(axis=axes)


def _highest(bids: np.ndarray, axis: int, allocate_zero_bids: bool) -> np.ndarray:
    """One-hot winner indicator along ``axis``; lowest index wins ties."""
    win = np.argmax(bids, axis=axis)
    alloc = np.zeros(bids.shape, dtype=bool)
    np.put_along_axis(alloc, np.expand_dims(win, axis), True, axis=axis)
    if not allocate_zero_bids:
        alloc &= np.expand_dims(bids.max(axis=axis) > 0, axis)
    return alloc


def _second_highest(bids: np.ndarray, axis: int) -> np.ndarray:
    if bids.shape[axis] < 2:
        return np.zeros(np.delete(bids.shape, axis))
    return np.take(np.sort(bids, axis=axis), -2, axis=axis)


@dataclass(frozen=True)
class FirstPrice(AuctionFormat):
    """Highest bidder wins and pays her bid.

    With ``allocate_zero_bids`` (default) an all-zero profile still hands
    the item to player 0 at price 0; otherwise it stays unsold.
    """

    allocate_zero_bids: bool = True

    def settle(self, bids):
        alloc = _highest(bids, 1, self.allocate_zero_bids)
        return alloc, np.where(alloc, bids, 0.0)


@dataclass(frozen=True)
class SecondPrice(AuctionFormat):
    """Highest bidder wins and pays the second-highest bid."""

    allocate_zero_bids: bool = True

    def settle(self, bids):
        alloc = _highest(bids, 1, self.allocate_zero_bids)
        price = _second_highest(bids, 1)
        return alloc, np.where(alloc, price[:, None], 0.0)


@dataclass(frozen=True)
class AllPay(AuctionFormat):
    """Highest bidder wins; every player pays her bid."""

    allocate_zero_bids: bool = True

    def settle(self, bids):
        return _highest(bids, 1, self.allocate_zero_bids), bids.copy()


@dataclass(frozen=True)
class PublicGood(AuctionFormat):
    """Project is funded iff the bids cover ``cost``; then everyone pays her bid."""

    cost: float = 1.0

    def __post_init__(self):
        if not self.cost >= 0:
            raise ValueError("cost must be nonnegative")

    def settle(self, bids):
        funded = bids.sum(axis=1) >= self.cost
        alloc = np.broadcast_to(funded[:, None], bids.shape).copy()
        return alloc, np.where(alloc, bids, 0.0)

    def winning_bids(self, bids):
        funded = bids.sum(axis=1) >= self.cost
        return np.where(funded, bids.sum(axis=1), 0.0)


@dataclass(frozen=True)
class SimultaneousItems(AuctionFormat):
    """``m`` single-item auctions run at once, one bid per player per item.

    ``per_item`` is ``"first"`` or ``"second"``. ``max_bids`` optionally caps
    the number of items a player may bid a positive amount on.
    """

    items: int
    per_item: str = "first"
    allocate_zero_bids: bool = True
    max_bids: Optional[int] = None

    multi_item = True

    def __post_init__(self):
        if self.items < 1:
            raise ValueError("m must be >= 1")
        if self.per_item not in ("first", "second"):
            raise ValueError(f"per_item must be 'first' or 'second', got {self.per_item!r}")

    @property
    def m(self) -> int:
        return self.items

    def validate(self, bids):
        b = super().validate(bids)
        if self.max_bids is not None and np.any((b > 0).sum(axis=2) > self.max_bids):
            raise ValueError(f"a player bid on more than {self.max_bids} items")
        return b

    def settle(self, bids):
        alloc = _highest(bids, 1, self.allocate_zero_bids)
        if self.per_item == "first":
            return alloc, np.where(alloc, bids, 0.0)
        price = _second_highest(bids, 1)
        return alloc, np.where(alloc, price[:, None, :], 0.0)


@dataclass(frozen=True)
class Outcome:
    """``allocation`` is a winner index (or None), a funded flag, or one
    bundle per player, depending on the format."""

    allocation: object
    payments: tuple[float, ...]


def value_tables(values: Sequence, m: int) -> np.ndarray:
    """Stack per-player valuation tables into shape ``(n, 2**m)``."""
    return np.stack([np.asarray(v.table) for v in values])


def _as_batch(fmt: AuctionFormat, b) -> np.ndarray:
    return fmt.validate(np.asarray(b, dtype=float)[None, ...])


def _masks(alloc: np.ndarray) -> np.ndarray:
    """Pack per-item win indicators (..., m) into integer bitmasks (...)."""
    m = alloc.shape[-1]
    return (alloc.astype(np.int64) << np.arange(m)).sum(axis=-1)


def allocation_value_batch(fmt: AuctionFormat, bids: np.ndarray, values) -> np.ndarray:
    """Value each player derives from her allocation, shape ``(P, n)``."""
    alloc, _ = fmt.settle(bids)
    if fmt.multi_item:
        tables = value_tables(values, fmt.m)
        masks = _masks(alloc)
        return tables[np.arange(tables.shape[0])[None, :], masks]
    return alloc * np.asarray(values, dtype=float)[None, :]


def utilities_batch(fmt: AuctionFormat, bids: np.ndarray, values) -> np.ndarray:
    alloc, pay = fmt.settle(bids)
    if fmt.multi_item:
        tables = value_tables(values, fmt.m)
        got = tables[np.arange(tables.shape[0])[None, :], _masks(alloc)]
        return got - pay.sum(axis=2)
    return alloc * np.asarray(values, dtype=float)[None, :] - pay


def player_utility_batch(fmt: AuctionFormat, bids: np.ndarray, i: int, v_i) -> np.ndarray:
    """Utility of player ``i`` alone across a batch, shape ``(P,)``."""
    alloc, pay = fmt.settle(bids)
    if fmt.multi_item:
        got = np.asarray(v_i.table)[_masks(alloc[:, i, :])]
        return got - pay[:, i, :].sum(axis=1)
    return alloc[:, i] * float(v_i) - pay[:, i]


def revenue_batch(fmt: AuctionFormat, bids: np.ndarray) -> np.ndarray:
    _, pay = fmt.settle(bids)
    return pay.reshape(pay.shape[0], -1).sum(axis=1)


def winning_bid_sum_batch(fmt: AuctionFormat, bids: np.ndarray) -> np.ndarray:
    return fmt.winning_bids(bids)


def welfare_batch(fmt: AuctionFormat, bids: np.ndarray, values) -> np.ndarray:
    """Sum of utilities plus revenue."""
    return utilities_batch(fmt, bids, values).sum(axis=1) + revenue_batch(fmt, bids)


def deviation_utilities(fmt: AuctionFormat, i: int, candidates, others, v_i,
                        chunk: int = 2_000_000) -> np.ndarray:
    """Utility of ``i`` playing each candidate against each opponent profile.

    ``candidates`` has shape ``(K,)`` or ``(K, m)``; ``others`` is a batch of
    full profiles ``(N, n[, m])`` whose column ``i`` is ignored. Returns an
    array of shape ``(K, N)``.
    """
    cand = np.asarray(candidates, dtype=float)
    oth = np.asarray(others, dtype=float)
    K, N = cand.shape[0], oth.shape[0]
    out = np.empty((K, N))
    rows = max(1, chunk // max(N, 1))
    for start in range(0, K, rows):
        c = cand[start:start + rows]
        prof = np.repeat(oth[None, ...], c.shape[0], axis=0)
        prof[:, :, i, ...] = c[:, None, ...]
        flat = prof.reshape((-1,) + oth.shape[1:])
        out[start:start + c.shape[0]] = player_utility_batch(fmt, flat, i, v_i).reshape(c.shape[0], N)
    return out


def outcome(fmt: AuctionFormat, b) -> Outcome:
    bids = _as_batch(fmt, b)
    alloc, pay = fmt.settle(bids)
    alloc, pay = alloc[0], pay[0]
    if isinstance(fmt, PublicGood):
        allocation = bool(alloc[0]) if alloc.size else False
    elif fmt.multi_item:
        allocation = tuple(items_of(int(mask), fmt.m) for mask in _masks(alloc))
    else:
        winners = np.flatnonzero(alloc)
        allocation = int(winners[0]) if winners.size else None
    payments = pay.sum(axis=1) if fmt.multi_item else pay
    return Outcome(allocation, tuple(float(x) for x in payments))


def utility(fmt: AuctionFormat, b, i: int, v_i) -> float:
    return float(player_utility_batch(fmt, _as_batch(fmt, b), i, v_i)[0])


def revenue(fmt: AuctionFormat, b) -> float:
    return float(revenue_batch(fmt, _as_batch(fmt, b))[0])


def winning_bid_sum(fmt: AuctionFormat, b) -> float:
    return float(winning_bid_sum_batch(fmt, _as_batch(fmt, b))[0])


def social_welfare(fmt: AuctionFormat, b, values) -> float:
    """Sum of utilities plus revenue. For a public good this never debits the cost."""
    return float(welfare_batch(fmt, _as_batch(fmt, b), values)[0])


def social_welfare_net(fmt: PublicGood, b, values) -> float:
    """Public-good welfare with the project cost subtracted when funded."""
    funded = outcome(fmt, b).allocation
    return social_welfare(fmt, b, values) - fmt.cost * float(funded)
