"""Repeated auctions played by no-regret learners with full-information feedback."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .auctions import AuctionFormat, deviation_utilities, utilities_batch, welfare_batch
from .priors import sample_profiles
from .smoothness import SmoothnessParams, poa_bound
from .welfare import ResourceLimitError, opt_welfare

__all__ = [
    "ACTION_CAP",
    "LearnerConfig",
    "PlaySequence",
    "MultiplicativeWeights",
    "RegretMatching",
    "item_grid",
    "run_repeated",
    "external_regret",
    "average_welfare",
    "WelfareBoundReport",
    "welfare_vs_bound",
]

ACTION_CAP = 10_000
TENSOR_LIMIT = 4_000_000


@dataclass(frozen=True)
class LearnerConfig:
    """``algorithm`` is ``"mw"`` or ``"regret_matching"``; ``eta`` defaults to sqrt(ln K / T)."""

    algorithm: str = "mw"
    eta: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ("mw", "regret_matching"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.eta is not None and not self.eta > 0:
            raise ValueError("eta must be positive")


class MultiplicativeWeights:
    """Exponential weights over ``K`` actions on utilities scaled by ``scale``."""

    def __init__(self, K: int, eta: float, scale: float = 1.0):
        self.eta = eta
        self.scale = scale if scale > 0 else 1.0
        self.log_w = np.zeros(K)

    def distribution(self) -> np.ndarray:
        z = np.exp(self.log_w - self.log_w.max())
        return z / z.sum()

    def update(self, utilities: np.ndarray, played: int) -> None:
        self.log_w += self.eta * utilities / self.scale


class RegretMatching:
    """Play proportionally to positive cumulative regret; uniform when none."""

    def __init__(self, K: int):
        self.regret = np.zeros(K)

    def distribution(self) -> np.ndarray:
        pos = np.maximum(self.regret, 0.0)
        s = pos.sum()
        return pos / s if s > 0 else np.full(pos.size, 1.0 / pos.size)

    def update(self, utilities: np.ndarray, played: int) -> None:
        self.regret += utilities - utilities[played]


@dataclass
class PlaySequence:
    """Indices into each player's grid per round, realized utilities, and setup."""

    fmt: AuctionFormat
    values: tuple
    grids: tuple
    actions: np.ndarray
    utilities: np.ndarray
    round_values: Optional[list] = field(default=None, repr=False)
    distributions: Optional[list] = field(default=None, repr=False)

    @property
    def T(self) -> int:
        return self.actions.shape[0]

    def profiles(self) -> np.ndarray:
        """Bid profiles of every round, shape ``(T, n[, m])``."""
        return np.stack([self.grids[i][self.actions[:, i]] for i in range(len(self.grids))], axis=1)

    def values_at(self, t: int) -> tuple:
        return self.values if self.round_values is None else self.round_values[t]

    def to_csv(self, path_or_buf) -> None:
        from .io import write_csv

        rows = ([t, i, int(self.actions[t, i]), float(self.utilities[t, i])]
                for t in range(self.T) for i in range(self.actions.shape[1]))
        write_csv(path_or_buf, ["round", "player", "action_index", "utility"], rows)


def item_grid(step: float, caps) -> np.ndarray:
    """Every bid vector with entry ``j`` on ``{0, step, ...}`` up to ``caps[j]``.

    A scalar cap gives a 1-d grid for single-good formats.
    """
    def axis(c):
        return np.round(np.arange(0.0, float(c) + step * 1e-9, step), 12)

    if np.ndim(caps) == 0:
        return axis(caps)
    axes = [axis(c) for c in caps]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def _u_max(values) -> float:
    vals = [float(np.max(v.table)) if hasattr(v, "table") else float(v) for v in values]
    return max(vals) if vals else 1.0


def _payoff_tensor(fmt, values, grids) -> np.ndarray:
    sizes = [len(g) for g in grids]
    idx = np.indices(sizes).reshape(len(sizes), -1)
    prof = np.stack([grids[i][idx[i]] for i in range(len(grids))], axis=1)
    return utilities_batch(fmt, prof, values).reshape(*sizes, len(grids))


def run_repeated(fmt: AuctionFormat, values: Sequence, grids: Sequence, configs: Sequence[LearnerConfig],
                 T: int, prior=None, record_distributions: bool = False) -> PlaySequence:
    """Play ``T`` rounds. Every learner sees her full counterfactual utility vector.

    With ``prior`` set, valuations are redrawn every round (exploratory);
    ``values`` then only fixes the utility scale.
    """
    n = len(grids)
    if len(configs) != n or (prior is None and len(values) != n):
        raise ValueError("need one grid, config and valuation per player")
    if T < 1:
        raise ValueError("T must be >= 1")
    grids = tuple(fmt.validate(np.asarray(g, dtype=float)[:, None, ...])[:, 0] for g in grids)
    for i, g in enumerate(grids):
        if len(g) > ACTION_CAP:
            raise ResourceLimitError(f"player {i} grid has {len(g)} actions (cap {ACTION_CAP})")
    scale = _u_max(values)
    learners, rngs = [], []
    for g, c in zip(grids, configs):
        K = len(g)
        if c.algorithm == "mw":
            eta = c.eta if c.eta is not None else math.sqrt(math.log(max(K, 2)) / T)
            learners.append(MultiplicativeWeights(K, eta, scale))
        else:
            learners.append(RegretMatching(K))
        rngs.append(np.random.default_rng(c.seed))

    round_values = None
    if prior is not None:
        draws = sample_profiles(prior, T, np.random.default_rng([c.seed for c in configs]))
        round_values = [tuple(r) for r in (draws.tolist() if isinstance(draws, np.ndarray) else draws)]
    tensor = None
    if round_values is None and math.prod(len(g) for g in grids) * n <= TENSOR_LIMIT:
        tensor = _payoff_tensor(fmt, values, grids)

    actions = np.zeros((T, n), dtype=np.int64)
    utilities = np.zeros((T, n))
    dists = [] if record_distributions else None
    for t in range(T):
        ps = [lr.distribution() for lr in learners]
        if dists is not None:
            dists.append(ps)
        a = np.array([rng.choice(len(p), p=p) for rng, p in zip(rngs, ps)])
        actions[t] = a
        v_t = values if round_values is None else round_values[t]
        if tensor is None:
            prof = np.stack([grids[i][a[i]] for i in range(n)])[None]
        for i, lr in enumerate(learners):
            if tensor is not None:
                idx = tuple(slice(None) if k == i else a[k] for k in range(n)) + (i,)
                cf = tensor[idx]
            else:
                cf = deviation_utilities(fmt, i, grids[i], prof, v_t[i])[:, 0]
            utilities[t, i] = cf[a[i]]
            lr.update(cf, a[i])
    return PlaySequence(fmt, tuple(values), grids, actions, utilities, round_values, dists)


def external_regret(seq: PlaySequence, i: int, grid=None) -> float:
    """Best fixed grid action's average gain over the realized play, recomputed exactly."""
    grid = seq.grids[i] if grid is None else np.asarray(grid, dtype=float)
    prof = seq.profiles()
    realized = seq.utilities[:, i].mean()
    if seq.round_values is None:
        cf = deviation_utilities(seq.fmt, i, grid, prof, seq.values[i])
        return float(cf.mean(axis=1).max() - realized)
    total = np.zeros(len(grid))
    for t in range(seq.T):
        total += deviation_utilities(seq.fmt, i, grid, prof[t:t + 1], seq.round_values[t][i])[:, 0]
    return float(total.max() / seq.T - realized)


def average_welfare(seq: PlaySequence, values=None) -> float:
    prof = seq.profiles()
    if seq.round_values is not None and values is None:
        return float(np.mean([welfare_batch(seq.fmt, prof[t:t + 1], seq.round_values[t])[0]
                              for t in range(seq.T)]))
    return float(welfare_batch(seq.fmt, prof, seq.values if values is None else values).mean())


@dataclass(frozen=True)
class WelfareBoundReport:
    avg_welfare: float
    opt: float
    bound: float
    regrets: tuple
    corrected_bound: float
    passed: bool


def welfare_vs_bound(seq: PlaySequence, params: SmoothnessParams, values=None,
                     opt: Optional[float] = None) -> WelfareBoundReport:
    """Check avg welfare >= (implied ratio) * OPT minus the players' positive regrets."""
    values = seq.values if values is None else values
    opt = float(opt_welfare(seq.fmt, values)) if opt is None else float(opt)
    regrets = tuple(external_regret(seq, i) for i in range(len(seq.grids)))
    bound = poa_bound(params) * opt
    corrected = bound - sum(max(r, 0.0) for r in regrets)
    avg = average_welfare(seq, values)
    return WelfareBoundReport(avg, opt, bound, regrets, corrected, avg >= corrected - 1e-12)
