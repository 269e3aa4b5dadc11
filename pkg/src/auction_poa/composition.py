"""Simultaneous composition of single-good auctions and composed deviations."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .auctions import AuctionFormat, PublicGood
from .smoothness import DeviationRule, SmoothnessParams, SmoothnessReport, verify_smoothness
from .valuations import XOS, Additive, as_xos, maximizing_clause
from .welfare import opt_brute_force

__all__ = [
    "ComposedFormat",
    "ProxyProfile",
    "compose",
    "proxy_profile",
    "composed_deviation",
    "verify_composed_smoothness",
]


@dataclass(frozen=True)
class ComposedFormat(AuctionFormat):
    """Each player submits one action per constituent; constituent ``j``
    settles column ``j`` on its own."""

    constituents: tuple

    multi_item = True

    def __post_init__(self):
        object.__setattr__(self, "constituents", tuple(self.constituents))
        if not self.constituents:
            raise ValueError("need at least one constituent")
        for c in self.constituents:
            if not isinstance(c, AuctionFormat) or c.multi_item or isinstance(c, PublicGood):
                raise TypeError(f"constituent {c!r} is not a single-good auction")

    @property
    def m(self) -> int:
        return len(self.constituents)

    def settle(self, bids):
        alloc = np.zeros(bids.shape, dtype=bool)
        pay = np.zeros(bids.shape)
        for j, c in enumerate(self.constituents):
            alloc[:, :, j], pay[:, :, j] = c.settle(bids[:, :, j])
        return alloc, pay

    def winning_bids(self, bids):
        return sum(c.winning_bids(bids[:, :, j]) for j, c in enumerate(self.constituents))


def compose(formats: Sequence[AuctionFormat]) -> ComposedFormat:
    return ComposedFormat(tuple(formats))


@dataclass(frozen=True)
class ProxyProfile:
    per_player: tuple

    def item_values(self) -> np.ndarray:
        """Proxy weights, shape ``(n, m)``."""
        return np.array([c.weights for c in self.per_player], dtype=float)


def _require_xos(v) -> XOS:
    if isinstance(v, (int, float, np.floating)):
        raise TypeError("proxy valuations need set-function valuations, got a scalar")
    return as_xos(v)


def proxy_profile(values: Sequence, opt_alloc: Sequence) -> ProxyProfile:
    """Per player, the clause attaining her value for her optimal bundle."""
    if len(values) != len(opt_alloc):
        raise ValueError("allocation and profile sizes differ")
    out = []
    for v, bundle in zip(values, opt_alloc):
        x = _require_xos(v)
        if not bundle:
            out.append(Additive((0.0,) * x.m))
        else:
            out.append(x.clauses[maximizing_clause(x, bundle)])
    return ProxyProfile(tuple(out))


@lru_cache(maxsize=4096)
def _proxy_for(values: tuple) -> ProxyProfile:
    return proxy_profile(values, opt_brute_force(values).allocation)


def composed_deviation(rules, m: Optional[int] = None) -> DeviationRule:
    """Full-profile rule that runs one constituent rule per item.

    ``rules`` is a sequence of per-constituent rules, or a single rule used on
    every item (``m`` items, or as many as the valuations cover). Constituent
    rule ``j`` sees only the column of proxy item-values for item ``j``.
    """
    if isinstance(rules, DeviationRule):
        single = rules
        get = lambda j: single  # noqa: E731
        names = (single.name,)
        deterministic = single.deterministic
    else:
        rules = tuple(rules)
        if m is not None and len(rules) != m:
            raise ValueError(f"expected {m} rules, got {len(rules)}")
        get = rules.__getitem__
        names = tuple(r.name for r in rules)
        deterministic = all(r.deterministic for r in rules)

    def draw(i, values, rng, size):
        proxy = _proxy_for(tuple(values)).item_values()
        cols = [get(j).draw(i, tuple(proxy[:, j]), rng, size) for j in range(proxy.shape[1])]
        return np.stack(cols, axis=1)

    return DeviationRule("composed(" + ",".join(names) + ")", False, draw, deterministic, names)


def verify_composed_smoothness(composed: ComposedFormat, rule, params: SmoothnessParams,
                               valuation_cases: Sequence, action_cases, samples: int = 10_000,
                               seed: int = 0, **kw) -> SmoothnessReport:
    """``rule`` is a composed rule or the constituent rule(s) to compose."""
    if not isinstance(rule, DeviationRule) or not rule.name.startswith("composed("):
        rule = composed_deviation(rule, composed.m)
    return verify_smoothness(composed, rule, params, valuation_cases, action_cases, samples, seed,
                             opt=lambda values: opt_brute_force(values, composed.m).welfare, **kw)
