"""Strategies, closed-form equilibria and grid-based equilibrium verification."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .auctions import AuctionFormat, deviation_utilities, player_utility_batch, utilities_batch
from .priors import (
    CorrelatedJoint,
    Prior,
    as_rng,
    conditional_nodes,
    is_discrete,
    sample_profiles,
    type_values,
)
from .welfare import ResourceLimitError

__all__ = [
    "Strategy",
    "ClosedForm",
    "MixedClosedForm",
    "GridStrategy",
    "TypeTable",
    "BidGrid",
    "symmetric_uniform_fpa_bne",
    "vickrey_asymmetric_bne",
    "bad_example_mixed_strategy",
    "truthful",
    "BestResponse",
    "best_response",
    "EqCheckRow",
    "EqCheckReport",
    "epsilon_bne_check",
    "pure_ne_enumerate",
    "PureBne",
    "enumerate_pure_bne",
    "candidate_actions",
    "CANDIDATE_LIMIT",
]

CANDIDATE_LIMIT = 10**7


class Strategy:
    """Maps a type to a distribution over actions."""

    pure: bool = True

    def sample(self, v, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class ClosedForm(Strategy):
    """Deterministic bid function ``fn(v)``; ``fn`` must accept arrays."""

    name: str
    fn: Callable = field(compare=False)
    params: tuple = ()

    def bid(self, v):
        b = self.fn(v)
        return float(b) if np.ndim(b) == 0 else np.asarray(b, dtype=float)

    def __call__(self, v):
        return self.bid(v)

    def sample(self, v, rng, size):
        b = np.asarray(self.bid(v), dtype=float)
        return np.broadcast_to(b, (size,) + b.shape).copy()


@dataclass(frozen=True)
class MixedClosedForm(Strategy):
    """Bid on one uniformly chosen item out of ``items``; bid drawn by inverse CDF."""

    name: str
    cdf: Callable = field(compare=False)
    quantile: Callable = field(compare=False)
    support_top: float
    items: int = 1

    pure = False

    def sample(self, v, rng, size):
        x = self.quantile(rng.uniform(size=size))
        if self.items == 1:
            return x
        out = np.zeros((size, self.items))
        out[np.arange(size), rng.integers(self.items, size=size)] = x
        return out


@dataclass(frozen=True)
class GridStrategy(Strategy):
    """Value grid -> distribution over a bid grid (row per value, nearest value wins)."""

    values: tuple[float, ...]
    bids: tuple[float, ...]
    probs: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (len(self.values), len(self.bids)):
            raise ValueError("probs must have shape (len(values), len(bids))")
        if np.any(p < 0) or not np.allclose(p.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("each row of probs must be a distribution")
        if any(b < 0 for b in self.bids):
            raise ValueError("bids must be nonnegative")

    @property
    def pure(self) -> bool:  # type: ignore[override]
        return bool(np.all(np.asarray(self.probs).max(axis=1) == 1.0))

    def _row(self, v) -> int:
        return int(np.argmin(np.abs(np.asarray(self.values) - float(v))))

    def sample(self, v, rng, size):
        row = np.asarray(self.probs[self._row(v)])
        if row.max() == 1.0:
            return np.full(size, self.bids[int(np.argmax(row))])
        return np.asarray(self.bids)[rng.choice(len(self.bids), size=size, p=row)]


@dataclass(frozen=True)
class TypeTable(Strategy):
    """Pure strategy given as an explicit ``type -> action`` table."""

    types: tuple
    actions: tuple

    def _action(self, v):
        for t, a in zip(self.types, self.actions):
            if t == v or (isinstance(t, float) and isinstance(v, (int, float)) and float(v) == t):
                return np.asarray(a, dtype=float)
        raise KeyError(f"strategy undefined at type {v!r}")

    def sample(self, v, rng, size):
        a = self._action(v)
        return np.broadcast_to(a, (size,) + a.shape).copy()


@dataclass(frozen=True)
class BidGrid:
    step: float
    cap: float

    def __post_init__(self):
        if not (self.step > 0 and self.cap > 0):
            raise ValueError("step and cap must be positive")

    @property
    def points(self) -> np.ndarray:
        k = int(math.floor(self.cap / self.step + 1e-9))
        return np.round(self.step * np.arange(k + 1), 12)


def symmetric_uniform_fpa_bne(n: int) -> ClosedForm:
    if n < 2:
        raise ValueError("need n >= 2")
    slope = (n - 1) / n
    return ClosedForm(f"symmetric_fpa_n{n}", lambda v: slope * np.asarray(v, dtype=float), (n,))


def _vickrey_weak(v):
    v = np.asarray(v, dtype=float)
    inner = 1.0 - 0.75 * v**2
    inner = np.where((inner < 0) & (inner > -1e-12), 0.0, inner)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 4.0 / (3.0 * v) * (1.0 - np.sqrt(inner))
    return np.where(v == 0, 0.0, out)


def _vickrey_strong(v):
    v = np.asarray(v, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 4.0 / (3.0 * v) * (np.sqrt(1.0 + 0.75 * v**2) - 1.0)
    return np.where(v == 0, 0.0, out)


def vickrey_asymmetric_bne() -> tuple[ClosedForm, ClosedForm]:
    """Equilibrium bids for values drawn from U[0,1] (player 0) and U[0,2] (player 1)."""
    return (ClosedForm("vickrey_weak", _vickrey_weak), ClosedForm("vickrey_strong", _vickrey_strong))


def bad_example_mixed_strategy(items: int = 2) -> MixedClosedForm:
    """Pick an item uniformly, bid x with CDF x/(1-x) on [0, 1/2]."""
    return MixedClosedForm(
        "cdf_x_over_1_minus_x",
        cdf=lambda x: np.clip(np.asarray(x) / (1.0 - np.minimum(np.asarray(x), 0.5)), 0.0, 1.0),
        quantile=lambda u: np.asarray(u) / (1.0 + np.asarray(u)),
        support_top=0.5,
        items=items,
    )


def truthful() -> ClosedForm:
    return ClosedForm("truthful", lambda v: np.asarray(v, dtype=float))


def candidate_actions(fmt: AuctionFormat, grid: np.ndarray, limit: int = CANDIDATE_LIMIT) -> np.ndarray:
    """All grid actions for one player: scalars, or per-item bid vectors."""
    grid = np.asarray(grid, dtype=float)
    if not fmt.multi_item:
        return grid
    total = grid.size ** fmt.m
    if total > limit:
        raise ResourceLimitError(f"{total} candidate bid vectors exceed {limit}")
    cands = np.array(list(itertools.product(grid, repeat=fmt.m)))
    cap = getattr(fmt, "max_bids", None)
    if cap is not None:
        cands = cands[(cands > 0).sum(axis=1) <= cap]
    return cands


def _grid_points(grid) -> np.ndarray:
    return grid.points if isinstance(grid, BidGrid) else np.asarray(grid, dtype=float)


def _opponent_batch(fmt, i, v_i, strategies, prior, rng, points, samples, mode):
    """Opponent action profiles with weights, plus a flag for sampled (MC) rows."""
    n = len(strategies)
    if mode == "mc" and not is_discrete(prior):
        if isinstance(prior, CorrelatedJoint):
            raise ValueError("correlated priors are discrete; use mode='quadrature'")
        draws = sample_profiles(prior, samples, rng)
        nodes = [(tuple(row), 1.0 / samples) for row in (draws.tolist() if isinstance(draws, np.ndarray) else draws)]
        nodes = [(p[:i] + (v_i,) + p[i + 1:], w) for p, w in nodes]
        reps = 1
    else:
        nodes = conditional_nodes(prior, i, v_i, points)
        mixed = any(not strategies[j].pure for j in range(n) if j != i)
        reps = max(1, samples // len(nodes)) if mixed else 1
    sampled = mode == "mc" or reps > 1
    shape = (fmt.m,) if fmt.multi_item else ()
    rows = np.zeros((len(nodes) * reps, n) + shape)
    weights = np.empty(len(nodes) * reps)
    for k, (prof, w) in enumerate(nodes):
        sl = slice(k * reps, (k + 1) * reps)
        for j in range(n):
            if j != i:
                rows[sl, j] = strategies[j].sample(prof[j], rng, reps)
        weights[sl] = w / reps
    return rows, weights, sampled


def _weighted_mean_se(U: np.ndarray, w: np.ndarray, sampled: bool):
    mean = U @ w
    if not sampled:
        return mean, np.zeros_like(mean)
    dev = U - mean[..., None]
    return mean, np.sqrt((dev**2) @ (w**2))


@dataclass(frozen=True)
class BestResponse:
    action: np.ndarray
    utility: float
    stderr: float
    candidates: np.ndarray
    utilities: np.ndarray


def best_response(fmt: AuctionFormat, i: int, v_i, strategies: Sequence[Strategy], prior: Prior,
                  grid, samples: int = 100_000, seed=0, points: int = 101,
                  mode: str = "quadrature") -> BestResponse:
    """Grid maximizer of player ``i``'s expected utility against the others.

    Discrete priors are integrated exactly; uniform marginals use a
    ``points``-node midpoint rule (``mode="quadrature"``) or ``samples``
    Monte-Carlo draws (``mode="mc"``). Mixed opponent strategies are always
    sampled. Ties between candidates go to the lowest one.
    """
    rng = as_rng(seed)
    cands = candidate_actions(fmt, _grid_points(grid))
    rows, w, sampled = _opponent_batch(fmt, i, v_i, strategies, prior, rng, points, samples, mode)
    U = deviation_utilities(fmt, i, cands, rows, v_i)
    mean, se = _weighted_mean_se(U, w, sampled)
    k = int(np.argmax(mean))
    return BestResponse(np.asarray(cands[k]), float(mean[k]), float(se[k]), cands, mean)


def _own_utility(fmt, i, v_i, strategy, rows, w, sampled, rng):
    if strategy.pure:
        own = strategy.sample(v_i, rng, 1)
        U = deviation_utilities(fmt, i, own, rows, v_i)[0]
        mean, se = _weighted_mean_se(U[None, :], w, sampled)
        return float(mean[0]), float(se[0])
    own = strategy.sample(v_i, rng, rows.shape[0])
    prof = rows.copy()
    prof[:, i] = own
    U = player_utility_batch(fmt, prof, i, v_i)
    mean, se = _weighted_mean_se(U[None, :], w, True)
    return float(mean[0]), float(se[0])


@dataclass(frozen=True)
class EqCheckRow:
    player: int
    value: object
    best_deviation: object
    regret: float
    stderr: float


@dataclass
class EqCheckReport:
    rows: list[EqCheckRow]

    @property
    def epsilon(self) -> float:
        return max(r.regret for r in self.rows)

    @property
    def worst(self) -> EqCheckRow:
        return max(self.rows, key=lambda r: r.regret)

    def to_csv(self, path_or_buf) -> None:
        from .io import write_csv

        write_csv(path_or_buf, ["player", "value", "best_deviation", "regret", "stderr"], [
            [r.player, _fmt_value(r.value), _fmt_value(r.best_deviation), r.regret, r.stderr]
            for r in self.rows
        ])


def _fmt_value(x) -> str:
    if isinstance(x, (int, float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.ndarray):
        return " ".join(repr(float(y)) for y in np.ravel(x))
    return repr(x)


def epsilon_bne_check(fmt: AuctionFormat, strategies: Sequence[Strategy], prior: Prior, grid,
                      samples: int = 100_000, seed: int = 0, points: int = 101,
                      mode: str = "quadrature", values_per_player: Optional[Sequence] = None) -> EqCheckReport:
    """Largest grid deviation gain over players and (discretized) types.

    ``grid`` is one ``BidGrid``/array shared by all players or a list with one
    per player. Types checked are the discrete support, or ``points`` evenly
    spaced values for uniform marginals. Each (player, type) cell uses its own
    seed derived from ``(seed, player, type index)``.
    """
    n = len(strategies)
    grids = list(grid) if _per_player(grid, n) else [grid] * n
    rows_out = []
    for i in range(n):
        types = values_per_player[i] if values_per_player is not None else type_values(prior, i, points)
        cands = candidate_actions(fmt, _grid_points(grids[i]))
        for t_idx, v_i in enumerate(types):
            rng = np.random.default_rng(np.random.SeedSequence([seed, i, t_idx]))
            rows, w, sampled = _opponent_batch(fmt, i, v_i, strategies, prior, rng, points, samples, mode)
            U = deviation_utilities(fmt, i, cands, rows, v_i)
            mean, se = _weighted_mean_se(U, w, sampled)
            k = int(np.argmax(mean))
            own, own_se = _own_utility(fmt, i, v_i, strategies[i], rows, w, sampled, rng)
            regret = max(0.0, float(mean[k]) - own)
            rows_out.append(EqCheckRow(i, v_i, cands[k], regret, float(math.hypot(se[k], own_se))))
    return EqCheckReport(rows_out)


def _per_player(grids, n) -> bool:
    """True when ``grids`` holds one grid per player rather than one shared grid."""
    return (isinstance(grids, (list, tuple)) and len(grids) == n
            and all(isinstance(g, BidGrid) or np.ndim(g) >= 1 for g in grids))


def _action_sets(fmt, grids, n):
    if _per_player(grids, n):
        return [candidate_actions(fmt, _grid_points(g)) for g in grids]
    return [candidate_actions(fmt, _grid_points(grids))] * n


def pure_ne_enumerate(fmt: AuctionFormat, values: Sequence, grid, tol: float = 1e-12,
                      limit: int = CANDIDATE_LIMIT) -> list[np.ndarray]:
    """Every grid profile at which no player has a strictly improving grid deviation."""
    n = len(values)
    sets = _action_sets(fmt, grid, n)
    sizes = [len(s) for s in sets]
    total = int(np.prod(sizes))
    if total > limit:
        raise ResourceLimitError(f"{total} joint profiles exceed {limit}")
    idx = np.indices(sizes).reshape(n, -1).T
    profiles = np.stack([sets[i][idx[:, i]] for i in range(n)], axis=1)
    U = utilities_batch(fmt, profiles, values)
    stable = np.ones(total, dtype=bool)
    for i in range(n):
        Ui = U[:, i].reshape(sizes)
        best = Ui.max(axis=i, keepdims=True)
        stable &= (Ui >= best - tol).reshape(-1)
    return [profiles[k] for k in np.flatnonzero(stable)]


@dataclass(frozen=True)
class PureBne:
    strategies: tuple[TypeTable, ...]
    epsilon: float
    welfare: float


def enumerate_pure_bne(fmt: AuctionFormat, prior: Prior, grid, epsilon: float = 0.0,
                       limit: int = 10**6) -> list[PureBne]:
    """All pure type->grid-bid profiles that are epsilon-BNE under a discrete prior.

    Welfare is the exact expectation over the prior's atoms. Single-good
    formats only.
    """
    if fmt.multi_item:
        raise ValueError("enumerate_pure_bne supports single-good formats")
    if not is_discrete(prior):
        raise ValueError("prior must be discrete")
    from .priors import atoms

    atom_list = atoms(prior)
    profiles = np.array([[float(x) for x in p] for p, _ in atom_list])
    probs = np.array([w for _, w in atom_list])
    n = profiles.shape[1]
    bids = _grid_points(grid)
    K = bids.size
    types = [sorted({float(x) for x in profiles[:, i]}) for i in range(n)]
    type_idx = np.stack([np.searchsorted(types[i], profiles[:, i]) for i in range(n)], axis=1)
    per_player = [K ** len(types[i]) for i in range(n)]
    total = int(np.prod(per_player))
    if total > limit:
        raise ResourceLimitError(f"{total} strategy profiles exceed {limit}")
    # strategy tables: tables[i] has shape (per_player[i], n_types_i) of bid indices
    tables = [np.array(list(itertools.product(range(K), repeat=len(types[i])))) for i in range(n)]
    joint = np.indices(per_player).reshape(n, -1).T  # (S, n) strategy index per player
    # bid index of every player at every atom under every joint strategy: (S, A, n)
    bid_idx = np.stack([tables[i][joint[:, i]][:, type_idx[:, i]] for i in range(n)], axis=2)
    played = bids[bid_idx]
    S = joint.shape[0]
    eps = np.zeros(S)
    for i in range(n):
        for t, t_val in enumerate(types[i]):
            at = np.flatnonzero(type_idx[:, i] == t)
            w = probs[at] / probs[at].sum()
            base = played[:, at, :]                              # (S, a, n)
            dev = np.repeat(base[None, ...], K, axis=0)          # (K, S, a, n)
            dev[..., i] = bids[:, None, None]
            u_dev = player_utility_batch(fmt, dev.reshape(-1, n), i, t_val).reshape(K, S, len(at)) @ w
            u_now = player_utility_batch(fmt, base.reshape(-1, n), i, t_val).reshape(S, len(at)) @ w
            eps = np.maximum(eps, u_dev.max(axis=0) - u_now)
    keep = np.flatnonzero(eps <= epsilon + 1e-12)
    out = []
    for s in keep:
        alloc, _ = fmt.settle(played[s])
        sw = (alloc * profiles).sum(axis=1) @ probs
        strat = tuple(TypeTable(tuple(types[i]), tuple(float(bids[b]) for b in tables[i][joint[s, i]]))
                      for i in range(n))
        out.append(PureBne(strat, float(eps[s]), float(sw)))
    return out
