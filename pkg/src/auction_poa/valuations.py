"""Set-function valuations over a small number of items.

Bundles are plain iterables of item indices; internally they are packed into
bitmasks (bit ``j`` set iff item ``j`` is in the bundle) so that a valuation
over ``m`` items can be tabulated as an array of length ``2**m``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "Additive",
    "UnitDemand",
    "XOS",
    "SingleMinded",
    "TableOracle",
    "Valuation",
    "SubmodularityError",
    "item_set",
    "mask_of",
    "items_of",
    "value",
    "is_submodular",
    "submodular_to_xos",
    "maximizing_clause",
    "as_xos",
    "random_coverage",
]

MAX_TABLE_ITEMS = 12


class SubmodularityError(ValueError):
    """Raised when a table is not submodular; ``witness`` is ``(S, T, j)``."""

    def __init__(self, message: str, witness: tuple[frozenset, frozenset, int]):
        super().__init__(message)
        self.witness = witness


def item_set(items: Iterable[int], m: int) -> frozenset[int]:
    s = frozenset(int(j) for j in items)
    for j in s:
        if not 0 <= j < m:
            raise ValueError(f"item index {j} out of range for m={m}")
    return s


def mask_of(items: Iterable[int], m: int) -> int:
    mask = 0
    for j in item_set(items, m):
        mask |= 1 << j
    return mask


def items_of(mask: int, m: int) -> frozenset[int]:
    return frozenset(j for j in range(m) if mask >> j & 1)


def _all_masks_matrix(m: int) -> np.ndarray:
    """Boolean matrix of shape (2**m, m); row ``mask`` holds its membership."""
    masks = np.arange(1 << m)
    return (masks[:, None] >> np.arange(m)[None, :]) & 1 == 1


def _nonneg(values: Sequence[float], what: str) -> tuple[float, ...]:
    out = tuple(float(x) for x in values)
    for x in out:
        if not np.isfinite(x) or x < 0:
            raise ValueError(f"{what} must be finite and nonnegative, got {x}")
    return out


class _SetFunction:
    """Shared machinery: subclasses define ``m`` and ``_table()``."""

    m: int

    def value(self, bundle: Iterable[int]) -> float:
        return float(self.table[mask_of(bundle, self.m)])

    @cached_property
    def table(self) -> np.ndarray:
        t = np.asarray(self._table(), dtype=float)
        t.flags.writeable = False
        return t

    def _table(self) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def to_table(self) -> "TableOracle":
        return TableOracle(tuple(self.table.tolist()))

    def singleton_values(self) -> np.ndarray:
        """Stand-alone value of each single item, ``v({j})``."""
        return self.table[1 << np.arange(self.m)]


@dataclass(frozen=True)
class Additive(_SetFunction):
    weights: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", _nonneg(self.weights, "weights"))
        if not self.weights:
            raise ValueError("need at least one item")

    @property
    def m(self) -> int:
        return len(self.weights)

    def _table(self):
        return _all_masks_matrix(self.m) @ np.asarray(self.weights)


@dataclass(frozen=True)
class UnitDemand(_SetFunction):
    item_values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "item_values", _nonneg(self.item_values, "item values"))
        if not self.item_values:
            raise ValueError("need at least one item")

    @property
    def m(self) -> int:
        return len(self.item_values)

    def _table(self):
        member = _all_masks_matrix(self.m)
        return np.where(member, np.asarray(self.item_values), 0.0).max(axis=1, initial=0.0)


@dataclass(frozen=True)
class XOS(_SetFunction):
    """Pointwise maximum of additive clauses."""

    clauses: tuple[Additive, ...]

    def __post_init__(self):
        clauses = tuple(c if isinstance(c, Additive) else Additive(c) for c in self.clauses)
        if not clauses:
            raise ValueError("XOS needs at least one clause")
        if len({c.m for c in clauses}) != 1:
            raise ValueError("all clauses must cover the same number of items")
        object.__setattr__(self, "clauses", clauses)

    @property
    def m(self) -> int:
        return self.clauses[0].m

    @cached_property
    def clause_tables(self) -> np.ndarray:
        """Array (r, 2**m) of clause sums for every bundle."""
        return np.stack([c.table for c in self.clauses])

    def _table(self):
        return self.clause_tables.max(axis=0)


@dataclass(frozen=True)
class SingleMinded(_SetFunction):
    m: int
    bundle: frozenset[int]
    worth: float

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        object.__setattr__(self, "bundle", item_set(self.bundle, self.m))
        object.__setattr__(self, "worth", _nonneg([self.worth], "worth")[0])

    def _table(self):
        need = mask_of(self.bundle, self.m)
        masks = np.arange(1 << self.m)
        return np.where(masks & need == need, self.worth, 0.0)


@dataclass(frozen=True)
class TableOracle(_SetFunction):
    """Explicit value per bundle, indexed by bitmask. Normalized and monotone."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = _nonneg(self.values, "table values")
        size = len(vals)
        m = size.bit_length() - 1
        if size < 2 or size != 1 << m:
            raise ValueError(f"table length must be 2**m with m >= 1, got {size}")
        if m > MAX_TABLE_ITEMS:
            raise ValueError(f"tables limited to m <= {MAX_TABLE_ITEMS}")
        if vals[0] != 0.0:
            raise ValueError("table must satisfy v(empty) = 0")
        object.__setattr__(self, "values", vals)
        t = np.asarray(vals)
        for j in range(m):
            masks = np.arange(size)
            without = masks[(masks >> j & 1) == 0]
            bad = t[without] > t[without | 1 << j]
            if bad.any():
                s = int(without[np.argmax(bad)])
                raise ValueError(
                    f"table is not monotone: v({sorted(items_of(s, m))}) > "
                    f"v({sorted(items_of(s | 1 << j, m))})"
                )

    @property
    def m(self) -> int:
        return len(self.values).bit_length() - 1

    def _table(self):
        return np.asarray(self.values)


Valuation = Union[Additive, UnitDemand, XOS, SingleMinded, TableOracle]


def value(v: Valuation, bundle: Iterable[int]) -> float:
    return v.value(bundle)


def is_submodular(f: _SetFunction, tol: float = 1e-12):
    """Exhaustive decreasing-marginals check.

    Uses the local form: for every bundle ``S`` and distinct items ``j, k``
    outside it, the marginal of ``j`` must not grow when ``k`` is added. This
    is equivalent to the condition over all pairs ``S`` subset of ``T``.

    Returns ``(True, None)`` or ``(False, (S, T, j))`` where ``S`` is a subset
    of ``T``, ``j`` is outside ``T`` and the marginal of ``j`` on ``T`` exceeds
    its marginal on ``S``.
    """
    m = f.m
    if m > MAX_TABLE_ITEMS:
        raise ValueError(f"submodularity check limited to m <= {MAX_TABLE_ITEMS}")
    t = f.table
    masks = np.arange(1 << m)
    for j in range(m):
        for k in range(m):
            if k == j:
                continue
            S = masks[(masks >> j & 1 == 0) & (masks >> k & 1 == 0)]
            T = S | 1 << k
            gain_S = t[S | 1 << j] - t[S]
            gain_T = t[T | 1 << j] - t[T]
            bad = gain_T > gain_S + tol
            if bad.any():
                idx = int(np.argmax(bad))
                return False, (items_of(int(S[idx]), m), items_of(int(T[idx]), m), j)
    return True, None


def submodular_to_xos(f: _SetFunction, max_items: int = 6) -> XOS:
    """One additive clause per ordering of the items, weighted by marginals."""
    m = f.m
    if m > max_items:
        raise ValueError(f"m={m} exceeds limit {max_items} (m! clauses)")
    ok, witness = is_submodular(f)
    if not ok:
        S, T, j = witness
        raise SubmodularityError(
            f"not submodular: marginal of item {j} on {sorted(T)} exceeds "
            f"its marginal on {sorted(S)}",
            witness,
        )
    t = f.table
    clauses = []
    for order in itertools.permutations(range(m)):
        w = [0.0] * m
        prefix = 0
        for j in order:
            w[j] = float(t[prefix | 1 << j] - t[prefix])
            prefix |= 1 << j
        # rounding can leave -0.0 or tiny negatives when marginals are zero
        clauses.append(Additive([max(x, 0.0) for x in w]))
    return XOS(tuple(clauses))


def as_xos(v: Valuation) -> XOS:
    """Rewrite a complement-free valuation as an explicit XOS."""
    if isinstance(v, XOS):
        return v
    if isinstance(v, Additive):
        return XOS((v,))
    if isinstance(v, UnitDemand):
        m = v.m
        return XOS(tuple(
            Additive([v.item_values[j] if k == j else 0.0 for k in range(m)])
            for j in range(m)
        ))
    if isinstance(v, TableOracle):
        return submodular_to_xos(v)
    raise TypeError(f"{type(v).__name__} is not complement-free")


def maximizing_clause(v: XOS, bundle: Iterable[int]) -> int:
    """Index of the clause with the largest sum on ``bundle`` (lowest on ties)."""
    mask = mask_of(bundle, v.m)
    return int(np.argmax(v.clause_tables[:, mask]))


def random_coverage(m: int, rng: np.random.Generator, universe: int = 4, density: float = 0.5) -> TableOracle:
    """Weighted coverage function: item ``j`` covers a random subset of a
    weighted ground set; the value of a bundle is the weight it covers.
    Always monotone and submodular."""
    w = rng.uniform(size=universe)
    cover = rng.uniform(size=(m, universe)) < density
    covered = (_all_masks_matrix(m).astype(np.int64) @ cover.astype(np.int64)) > 0
    return TableOracle(tuple(float(x) for x in covered @ w))
