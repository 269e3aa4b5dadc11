"""JSON documents for valuations, priors and formats; CSV for bids and reports.

Every JSON object carries a ``"type"`` tag naming its class; the remaining
keys are that class's fields (see ``docs/schema.md``).
"""
from __future__ import annotations

import csv
import io as _io
import json
from typing import Any, Iterable, Sequence

import numpy as np

from .auctions import AllPay, FirstPrice, PublicGood, SecondPrice, SimultaneousItems
from .priors import CorrelatedJoint, Discrete, IndependentProduct, Uniform
from .valuations import XOS, Additive, SingleMinded, TableOracle, UnitDemand

__all__ = [
    "to_dict",
    "from_dict",
    "dumps",
    "loads",
    "write_csv",
    "bids_to_csv",
    "bids_from_csv",
]


def _type_value(x):
    if isinstance(x, (int, float, np.floating, np.integer)):
        return float(x)
    return to_dict(x)


def to_dict(obj) -> dict:
    if isinstance(obj, Additive):
        return {"type": "additive", "weights": list(obj.weights)}
    if isinstance(obj, UnitDemand):
        return {"type": "unit_demand", "item_values": list(obj.item_values)}
    if isinstance(obj, XOS):
        return {"type": "xos", "clauses": [list(c.weights) for c in obj.clauses]}
    if isinstance(obj, SingleMinded):
        return {"type": "single_minded", "m": obj.m, "bundle": sorted(obj.bundle), "worth": obj.worth}
    if isinstance(obj, TableOracle):
        return {"type": "table", "values": list(obj.values)}
    if isinstance(obj, Uniform):
        return {"type": "uniform", "lo": obj.lo, "hi": obj.hi}
    if isinstance(obj, Discrete):
        return {"type": "discrete", "support": [_type_value(x) for x in obj.support],
                "weights": list(obj.weights)}
    if isinstance(obj, IndependentProduct):
        return {"type": "independent", "per_player": [to_dict(d) for d in obj.per_player]}
    if isinstance(obj, CorrelatedJoint):
        return {"type": "correlated", "support": [[_type_value(x) for x in p] for p in obj.support],
                "probabilities": list(obj.probabilities)}
    if isinstance(obj, (FirstPrice, SecondPrice, AllPay)):
        tag = {FirstPrice: "first_price", SecondPrice: "second_price", AllPay: "all_pay"}[type(obj)]
        return {"type": tag, "allocate_zero_bids": obj.allocate_zero_bids}
    if isinstance(obj, PublicGood):
        return {"type": "public_good", "cost": obj.cost}
    if isinstance(obj, SimultaneousItems):
        return {"type": "simultaneous", "m": obj.m, "per_item": obj.per_item,
                "allocate_zero_bids": obj.allocate_zero_bids, "max_bids": obj.max_bids}
    from .composition import ComposedFormat

    if isinstance(obj, ComposedFormat):
        return {"type": "composed", "constituents": [to_dict(c) for c in obj.constituents]}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _from_type_value(x):
    return float(x) if isinstance(x, (int, float)) else from_dict(x)


def _require(d: dict, *keys: str) -> list:
    missing = [k for k in keys if k not in d]
    if missing:
        raise ValueError(f"{d.get('type', '?')!r} object is missing field(s) {missing}")
    return [d[k] for k in keys]


def from_dict(d: dict) -> Any:
    if not isinstance(d, dict) or "type" not in d:
        raise ValueError(f"expected an object with a 'type' tag, got {d!r}")
    t = d["type"]
    if t == "additive":
        return Additive(tuple(*_require(d, "weights")))
    if t == "unit_demand":
        return UnitDemand(tuple(*_require(d, "item_values")))
    if t == "xos":
        return XOS(tuple(Additive(tuple(c)) for c in _require(d, "clauses")[0]))
    if t == "single_minded":
        m, bundle, worth = _require(d, "m", "bundle", "worth")
        return SingleMinded(int(m), frozenset(bundle), float(worth))
    if t == "table":
        return TableOracle(tuple(*_require(d, "values")))
    if t == "uniform":
        lo, hi = _require(d, "lo", "hi")
        return Uniform(float(lo), float(hi))
    if t == "discrete":
        support, weights = _require(d, "support", "weights")
        return Discrete(tuple(_from_type_value(x) for x in support), tuple(weights))
    if t == "independent":
        return IndependentProduct(tuple(from_dict(x) for x in _require(d, "per_player")[0]))
    if t == "correlated":
        support, probs = _require(d, "support", "probabilities")
        return CorrelatedJoint(tuple(tuple(_from_type_value(x) for x in p) for p in support), tuple(probs))
    if t in ("first_price", "second_price", "all_pay"):
        cls = {"first_price": FirstPrice, "second_price": SecondPrice, "all_pay": AllPay}[t]
        return cls(bool(d.get("allocate_zero_bids", True)))
    if t == "public_good":
        return PublicGood(float(d.get("cost", 1.0)))
    if t == "simultaneous":
        (m,) = _require(d, "m")
        return SimultaneousItems(int(m), d.get("per_item", "first"), bool(d.get("allocate_zero_bids", True)),
                                 d.get("max_bids"))
    if t == "composed":
        from .composition import compose

        return compose([from_dict(c) for c in _require(d, "constituents")[0]])
    raise ValueError(f"unknown type tag {t!r}")


def dumps(obj, **kw) -> str:
    return json.dumps(to_dict(obj), **kw)


def loads(text: str):
    return from_dict(json.loads(text))


def write_csv(path_or_buf, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    def _write(f):
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)

    if hasattr(path_or_buf, "write"):
        _write(path_or_buf)
    else:
        with open(path_or_buf, "w", newline="") as f:
            _write(f)


def bids_to_csv(bids, path_or_buf=None) -> str | None:
    """Rows ``(player, item, bid)``; single-good profiles use item 0."""
    b = np.asarray(bids, dtype=float)
    if b.ndim == 1:
        b = b[:, None]
    rows = [[i, j, repr(float(b[i, j]))] for i in range(b.shape[0]) for j in range(b.shape[1])]
    if path_or_buf is None:
        buf = _io.StringIO()
        write_csv(buf, ["player", "item", "bid"], rows)
        return buf.getvalue()
    write_csv(path_or_buf, ["player", "item", "bid"], rows)
    return None


def bids_from_csv(source, multi_item: bool | None = None) -> np.ndarray:
    """Inverse of ``bids_to_csv``. ``source`` is a path, file object or CSV text."""
    if hasattr(source, "read"):
        text = source.read()
    elif "\n" in str(source):
        text = str(source)
    else:
        with open(source, newline="") as f:
            text = f.read()
    rows = list(csv.DictReader(_io.StringIO(text)))
    if not rows:
        raise ValueError("no bid rows")
    n = max(int(r["player"]) for r in rows) + 1
    m = max(int(r["item"]) for r in rows) + 1
    b = np.full((n, m), np.nan)
    for r in rows:
        b[int(r["player"]), int(r["item"])] = float(r["bid"])
    if np.isnan(b).any():
        raise ValueError("bid table has missing (player, item) cells")
    if multi_item is None:
        multi_item = m > 1
    return b if multi_item else b[:, 0]
