"""(lambda, mu)-smoothness certificates checked numerically on finite case sets.

A certificate is empirical: ``verify_smoothness`` evaluates

    sum_i E[u_i(a*_i, a_-i; v_i)]  >=  lambda * OPT(v) - mu * R(a)

on every supplied (valuation profile, action profile) pair, where ``R`` is
revenue (strong mode) or the sum of winning bids (weak mode).
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .auctions import AuctionFormat, deviation_utilities, revenue_batch, winning_bid_sum_batch
from .priors import CorrelatedJoint, IndependentProduct, conditional_nodes, is_discrete, sample_profiles
from .valuations import UnitDemand
from .welfare import opt_brute_force, opt_matching, opt_welfare

__all__ = [
    "SmoothnessParams",
    "DeviationRule",
    "SmoothnessReport",
    "builtin_deviation",
    "BUILTIN_DEVIATIONS",
    "verify_smoothness",
    "bayesian_sampled_deviation",
    "poa_bound",
    "check_no_overbidding",
    "ONE_MINUS_INV_E",
    "stratified_uniform",
]

ONE_MINUS_INV_E = 1.0 - math.exp(-1.0)
EXACT_FLOOR = -1e-9


@dataclass(frozen=True)
class SmoothnessParams:
    lam: float
    mu: float
    mode: str = "strong"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.mu < 1:
            raise ValueError("mu must be >= 1")
        if self.mode not in ("strong", "weak"):
            raise ValueError("mode must be 'strong' or 'weak'")


def poa_bound(params: SmoothnessParams) -> float:
    """Welfare fraction implied by a certificate: lambda/mu, or lambda/(1+mu) in weak mode."""
    if params.mode == "weak":
        return params.lam / (1.0 + params.mu)
    if params.lam > params.mu:
        raise ValueError("strong-mode bound needs lambda <= mu")
    return params.lam / params.mu


@dataclass(frozen=True)
class DeviationRule:
    """``draw(i, values, rng, size)`` returns ``size`` actions for player ``i``.

    Private rules only read ``values[i]``. Deterministic rules are evaluated
    with a single draw.
    """

    name: str
    private: bool
    draw: Callable = field(compare=False, repr=False)
    deterministic: bool = False
    params: tuple = ()


def _half_value(i, values, rng, size):
    return np.full(size, 0.5 * float(values[i]))


def stratified_uniform(rng: np.random.Generator, size: int) -> np.ndarray:
    """One Uniform[0,1) draw inside each of ``size`` equal strata, shuffled.

    Unbiased like iid draws; the iid variance formula overstates its error,
    so stderr reported from it is conservative.
    """
    return (rng.permutation(size) + rng.uniform(size=size)) / size


def _optimized_bids(v: float, rng, size) -> np.ndarray:
    # inverse CDF of density 1/(v - b) on [0, (1 - 1/e) v]
    return v * (1.0 - np.exp(-stratified_uniform(rng, size)))


def _optimized(i, values, rng, size):
    return _optimized_bids(float(values[i]), rng, size)


def _all_pay_top(i, values, rng, size):
    top = int(np.argmax(np.asarray(values, dtype=float)))
    if i != top:
        return np.zeros(size)
    return float(values[i]) * stratified_uniform(rng, size)


def _truthful_top(i, values, rng, size):
    top = int(np.argmax(np.asarray(values, dtype=float)))
    return np.full(size, float(values[i]) if i == top else 0.0)


def _opt_item(values, i):
    """Item of player ``i`` in the optimal allocation and its stand-alone value."""
    if all(isinstance(v, UnitDemand) for v in values):
        bundles = opt_matching(values).allocation
    else:
        bundles = opt_brute_force(values).allocation
    if not bundles[i]:
        return None, 0.0
    j = min(bundles[i], key=lambda k: (-values[i].singleton_values()[k], k))
    return j, float(values[i].singleton_values()[j])


def _sim_opt_item(i, values, rng, size):
    m = values[i].m
    out = np.zeros((size, m))
    j, w = _opt_item(values, i)
    if j is not None:
        out[:, j] = 0.5 * w
    return out


def _sim_optimized_item(i, values, rng, size):
    m = values[i].m
    out = np.zeros((size, m))
    j, w = _opt_item(values, i)
    if j is not None:
        out[:, j] = _optimized_bids(w, rng, size)
    return out


BUILTIN_DEVIATIONS = {
    "halfValueFpa": lambda: DeviationRule("halfValueFpa", True, _half_value, deterministic=True),
    "optimizedFpa": lambda: DeviationRule("optimizedFpa", True, _optimized),
    "allPayTop": lambda: DeviationRule("allPayTop", False, _all_pay_top),
    "simFpaOptItem": lambda: DeviationRule("simFpaOptItem", False, _sim_opt_item, deterministic=True),
    "simFpaOptimizedItem": lambda: DeviationRule("simFpaOptimizedItem", False, _sim_optimized_item),
    # second-price weak-mode certificate (1, 1): top-value player bids her value
    "truthfulTop": lambda: DeviationRule("truthfulTop", False, _truthful_top, deterministic=True),
}


def builtin_deviation(name: str) -> DeviationRule:
    try:
        return BUILTIN_DEVIATIONS[name]()
    except KeyError:
        raise ValueError(f"unknown deviation rule {name!r}; known: {sorted(BUILTIN_DEVIATIONS)}") from None


def bayesian_sampled_deviation(rule: DeviationRule, prior) -> DeviationRule:
    """Private rule: draw the others' types from the prior, then apply ``rule``.

    Only valid for independent priors.
    """
    if isinstance(prior, CorrelatedJoint) or not isinstance(prior, IndependentProduct):
        raise ValueError("sampled deviations need an independent prior")

    def draw(i, values, rng, size):
        v_i = values[i]
        if is_discrete(prior):
            nodes = conditional_nodes(prior, i, v_i)
            counts = rng.multinomial(size, [w for _, w in nodes])
            parts = [rule.draw(i, prof, rng, c) for (prof, _), c in zip(nodes, counts) if c]
            out = np.concatenate(parts, axis=0)
            return out[rng.permutation(size)]
        draws = sample_profiles(prior, size, rng)
        rows = draws.tolist() if isinstance(draws, np.ndarray) else draws
        parts = []
        for row in rows:
            prof = tuple(row[:i]) + (v_i,) + tuple(row[i + 1:])
            parts.append(rule.draw(i, prof, rng, 1))
        return np.concatenate(parts, axis=0)

    def components(i, v_i):
        """Exact mixture ``[(weight, profile)]`` for discrete priors."""
        return [(w, prof) for prof, w in conditional_nodes(prior, i, v_i)]

    out = DeviationRule(f"sampled({rule.name})", True, draw, params=(rule.name,))
    object.__setattr__(out, "components", components)
    return out


def check_no_overbidding(fmt: AuctionFormat, values, actions: np.ndarray) -> None:
    """Raise if any bid exceeds the bidder's stand-alone value for that item."""
    a = np.asarray(actions, dtype=float)
    for i, v in enumerate(values):
        cap = v.singleton_values() if fmt.multi_item else float(v)
        over = a[:, i] > np.asarray(cap) + 1e-12
        if np.any(over):
            k = int(np.flatnonzero(over.reshape(a.shape[0], -1).any(axis=1))[0])
            raise ValueError(f"weak mode: action case {k} overbids for player {i}")


def _digest(x) -> str:
    if isinstance(x, np.ndarray):
        x = np.round(x, 12).tolist()
    return hashlib.sha1(repr(x).encode()).hexdigest()[:12]


@dataclass
class SmoothnessReport:
    min_margin: float
    witness: tuple
    stderr: float
    passed: bool
    cases: int
    rows: list = field(repr=False, default_factory=list)
    rule: str = ""
    seed: int = 0

    def to_csv(self, path_or_buf) -> None:
        from .io import write_csv

        write_csv(path_or_buf, ["case_id", "valuation_hash", "action_hash", "lhs", "opt", "rev", "margin", "stderr"],
                  self.rows)


def verify_smoothness(fmt: AuctionFormat, rule: DeviationRule, params: SmoothnessParams,
                      valuation_cases: Sequence, action_cases, samples: int = 10_000,
                      seed: int = 0, opt: Optional[Callable] = None,
                      exact_floor: float = EXACT_FLOOR, sigmas: float = 3.0,
                      keep_rows: bool = True) -> SmoothnessReport:
    """Check the smoothness inequality on every (valuation, action) case.

    ``action_cases`` is an array of action profiles ``(A, n[, m])`` shared by
    all valuation cases, or a callable ``values -> array``. Deterministic
    rules are checked against ``exact_floor``; sampled ones against
    ``-sigmas * stderr`` of the case. Deviation draws for player ``i`` under
    valuation case ``c`` come from seed ``(seed, c, i)`` and are reused
    across that case's action profiles.
    """
    opt = opt or (lambda values: opt_welfare(fmt, values))
    weak = params.mode == "weak"
    best = (math.inf, None, 0.0)
    passed = True
    rows, case_id, total = [], 0, 0
    for c, values in enumerate(valuation_cases):
        A = np.asarray(action_cases(values) if callable(action_cases) else action_cases, dtype=float)
        A = fmt.validate(A)
        if weak:
            check_no_overbidding(fmt, values, A)
        opt_v = float(opt(values))
        lhs = np.zeros(A.shape[0])
        var = np.zeros(A.shape[0])
        for i in range(len(values)):
            rng = np.random.default_rng(np.random.SeedSequence([seed, c, i]))
            size = 1 if rule.deterministic else samples
            D = rule.draw(i, values, rng, size)
            U = deviation_utilities(fmt, i, D, A, values[i])
            lhs += U.mean(axis=0)
            if size > 1:
                var += U.var(axis=0, ddof=1) / size
        R = winning_bid_sum_batch(fmt, A) if weak else revenue_batch(fmt, A)
        margin = lhs - params.lam * opt_v + params.mu * R
        se = np.sqrt(var)
        floor = np.minimum(-sigmas * se, exact_floor) if not rule.deterministic else np.full_like(se, exact_floor)
        if np.any(margin < floor):
            passed = False
        k = int(np.argmin(margin))
        if margin[k] < best[0]:
            best = (float(margin[k]), (values, A[k]), float(se[k]))
        if keep_rows:
            vh = _digest(values)
            for a, l, r, mg, s in zip(A, lhs, R, margin, se):
                rows.append([case_id, vh, _digest(a), float(l), opt_v, float(r), float(mg), float(s)])
                case_id += 1
        total += A.shape[0]
    return SmoothnessReport(best[0], best[1], best[2], passed, total, rows, rule.name, seed)
