"""Optimal social welfare for the instances the auctions are compared against."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .valuations import UnitDemand

__all__ = [
    "OptResult",
    "ResourceLimitError",
    "opt_single_item",
    "opt_matching",
    "opt_brute_force",
    "opt_welfare",
    "BRUTE_FORCE_LIMIT",
]

BRUTE_FORCE_LIMIT = 10**7


class ResourceLimitError(RuntimeError):
    """An enumeration would exceed its configured size bound."""


@dataclass(frozen=True)
class OptResult:
    """``allocation`` is a winner index for one item, else a bundle per player."""

    welfare: float
    allocation: object


def opt_single_item(values: Sequence[float]) -> OptResult:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("empty valuation profile")
    if np.any(v < 0):
        raise ValueError("values must be nonnegative")
    k = int(np.argmax(v))
    return OptResult(float(v[k]), k)


def opt_matching(values, m: int | None = None) -> OptResult:
    """Maximum-weight matching of unit-demand players to items.

    ``values`` is an ``(n, m)`` array or a sequence of ``UnitDemand``.
    """
    if len(values) and isinstance(values[0], UnitDemand):
        w = np.array([v.item_values for v in values], dtype=float)
    else:
        w = np.atleast_2d(np.asarray(values, dtype=float))
    if m is not None and w.shape[1] != m:
        raise ValueError(f"expected {m} items, got {w.shape[1]}")
    if w.shape[0] < 1 or w.shape[1] < 1:
        raise ValueError("need n, m >= 1")
    rows, cols = linear_sum_assignment(w, maximize=True)
    bundles = [frozenset() for _ in range(w.shape[0])]
    for r, c in zip(rows, cols):
        if w[r, c] > 0:
            bundles[r] = frozenset({int(c)})
    total = float(sum(w[r, c] for r, c in zip(rows, cols)))
    return OptResult(total, tuple(bundles))


def _assignment_block(start: int, stop: int, n: int, m: int) -> np.ndarray:
    """Rows ``start..stop`` of the mixed-radix enumeration of {0..n}^m.

    Item 0 is the most significant digit; digit ``n`` means unassigned.
    """
    idx = np.arange(start, stop, dtype=np.int64)
    out = np.empty((idx.size, m), dtype=np.int64)
    for j in range(m - 1, -1, -1):
        out[:, j] = idx % (n + 1)
        idx //= n + 1
    return out


def opt_brute_force(profile: Sequence, m: int | None = None,
                    limit: int = BRUTE_FORCE_LIMIT, block: int = 1 << 18) -> OptResult:
    """Exhaustive search over every assignment of items to players or nobody.

    Ties go to the first assignment in lexicographic order (item 0 first,
    players by index, unassigned last).
    """
    n = len(profile)
    if n == 0:
        raise ValueError("empty valuation profile")
    m = profile[0].m if m is None else m
    if any(v.m != m for v in profile):
        raise ValueError("all valuations must cover the same items")
    total = (n + 1) ** m
    if total > limit:
        raise ResourceLimitError(f"(n+1)^m = {total} exceeds {limit}")
    tables = np.stack([np.asarray(v.table) for v in profile])
    weights = 1 << np.arange(m, dtype=np.int64)
    best, best_row = -np.inf, None
    for start in range(0, total, block):
        A = _assignment_block(start, min(total, start + block), n, m)
        masks = ((A[:, None, :] == np.arange(n)[None, :, None]) * weights).sum(axis=2)
        welfare = tables[np.arange(n)[None, :], masks].sum(axis=1)
        k = int(np.argmax(welfare))
        if welfare[k] > best:
            best, best_row = float(welfare[k]), A[k]
    bundles = tuple(frozenset(int(j) for j in np.flatnonzero(best_row == i)) for i in range(n))
    return OptResult(best, bundles)


def opt_welfare(fmt, values) -> float:
    """OPT for a format's natural feasible set: one item, a public good, or m items."""
    from .auctions import PublicGood

    if isinstance(fmt, PublicGood):
        # every player enjoys a funded project; the cost is never debited
        return float(np.sum(values))
    if not fmt.multi_item:
        return opt_single_item(values).welfare
    if all(isinstance(v, UnitDemand) for v in values):
        return opt_matching(values).welfare
    return opt_brute_force(values, fmt.m).welfare
