"""Type distributions: independent products of 1-D marginals, or correlated joints.

Marginals are either ``Uniform(lo, hi)`` on scalar values or ``Discrete``
over any hashable-ish type values (floats or valuation objects). Sampling is
driven by explicit seeds or ``numpy.random.Generator`` objects; nothing here
touches global RNG state.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Any, Sequence, Union

import numpy as np

__all__ = [
    "Uniform",
    "Discrete",
    "point_mass",
    "IndependentProduct",
    "CorrelatedJoint",
    "Prior",
    "sample_profile",
    "sample_profiles",
    "atoms",
    "is_discrete",
    "conditional_nodes",
    "type_values",
    "as_rng",
]

PROB_TOL = 1e-12


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _check_probs(probs: Sequence[float]) -> tuple[float, ...]:
    p = tuple(float(x) for x in probs)
    if any(x < 0 or not np.isfinite(x) for x in p):
        raise ValueError("probabilities must be finite and nonnegative")
    if abs(sum(p) - 1.0) > PROB_TOL:
        raise ValueError(f"probabilities sum to {sum(p)!r}, not 1")
    return p


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"Uniform needs lo < hi, got [{self.lo}, {self.hi}]")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size)

    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def quadrature(self, points: int = 101) -> tuple[np.ndarray, np.ndarray]:
        """Midpoint-rule nodes and equal weights."""
        h = (self.hi - self.lo) / points
        nodes = self.lo + h * (np.arange(points) + 0.5)
        return nodes, np.full(points, 1.0 / points)

    def grid(self, points: int = 101) -> np.ndarray:
        return np.linspace(self.lo, self.hi, points)


@dataclass(frozen=True)
class Discrete:
    support: tuple[Any, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.support) != len(self.weights) or not self.support:
            raise ValueError("support and weights must be nonempty and equally long")
        object.__setattr__(self, "support", tuple(self.support))
        object.__setattr__(self, "weights", _check_probs(self.weights))

    def sample(self, rng: np.random.Generator, size: int):
        idx = rng.choice(len(self.support), size=size, p=self.weights)
        if all(isinstance(x, (int, float)) for x in self.support):
            return np.asarray(self.support, dtype=float)[idx]
        return [self.support[k] for k in idx]

    def mean(self) -> float:
        return float(np.dot(np.asarray(self.support, dtype=float), self.weights))


def point_mass(x) -> Discrete:
    return Discrete((x,), (1.0,))


Marginal = Union[Uniform, Discrete]


@dataclass(frozen=True)
class IndependentProduct:
    per_player: tuple[Marginal, ...]

    def __post_init__(self):
        object.__setattr__(self, "per_player", tuple(self.per_player))
        if not self.per_player:
            raise ValueError("need at least one player")

    @property
    def n(self) -> int:
        return len(self.per_player)


@dataclass(frozen=True)
class CorrelatedJoint:
    support: tuple[tuple[Any, ...], ...]
    probabilities: tuple[float, ...]

    def __post_init__(self):
        support = tuple(tuple(p) for p in self.support)
        if not support or len(support) != len(self.probabilities):
            raise ValueError("support and probabilities must be nonempty and equally long")
        if len({len(p) for p in support}) != 1:
            raise ValueError("all profiles in the support must have the same length")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probabilities", _check_probs(self.probabilities))

    @property
    def n(self) -> int:
        return len(self.support[0])


Prior = Union[IndependentProduct, CorrelatedJoint]


def _is_scalar_profile(profile) -> bool:
    return all(isinstance(x, (int, float, np.floating)) for x in profile)


def sample_profiles(prior: Prior, size: int, seed=None):
    """``size`` independent profiles.

    Scalar-valued priors give an array of shape ``(size, n)``; otherwise a
    list of tuples.
    """
    rng = as_rng(seed)
    if isinstance(prior, CorrelatedJoint):
        idx = rng.choice(len(prior.support), size=size, p=prior.probabilities)
        if _is_scalar_profile(prior.support[0]):
            return np.asarray(prior.support, dtype=float)[idx]
        return [prior.support[k] for k in idx]
    cols = [d.sample(rng, size) for d in prior.per_player]
    if all(isinstance(c, np.ndarray) for c in cols):
        return np.column_stack(cols)
    return [tuple(c[k] for c in cols) for k in range(size)]


def sample_profile(prior: Prior, seed=None) -> tuple:
    draw = sample_profiles(prior, 1, seed)
    first = draw[0]
    return tuple(float(x) for x in first) if isinstance(draw, np.ndarray) else tuple(first)


def is_discrete(prior: Prior) -> bool:
    if isinstance(prior, CorrelatedJoint):
        return True
    return all(isinstance(d, Discrete) for d in prior.per_player)


def _marginal_nodes(d: Marginal, points: int):
    if isinstance(d, Uniform):
        nodes, w = d.quadrature(points)
        return list(nodes), list(w)
    return list(d.support), list(d.weights)


def atoms(prior: Prior, points: int | None = None) -> list[tuple[tuple, float]]:
    """Enumerate ``(profile, probability)``.

    Uniform marginals are only allowed when ``points`` is given, in which case
    they are replaced by their midpoint quadrature rule.
    """
    if isinstance(prior, CorrelatedJoint):
        return list(zip(prior.support, prior.probabilities))
    per = []
    for d in prior.per_player:
        if isinstance(d, Uniform) and points is None:
            raise ValueError("continuous marginal: pass `points` to discretize")
        per.append(list(zip(*_marginal_nodes(d, points or 0))))
    out = []
    for combo in itertools.product(*per):
        prob = float(np.prod([w for _, w in combo]))
        out.append((tuple(x for x, _ in combo), prob))
    return out


def _same_type(a, b) -> bool:
    if isinstance(a, (int, float, np.floating)) and isinstance(b, (int, float, np.floating)):
        return float(a) == float(b)
    return a == b


def conditional_nodes(prior: Prior, i: int, v_i, points: int = 101):
    """Weighted profiles for the opponents of ``i`` given her type ``v_i``.

    Returns a list of ``(profile, weight)`` where each profile has ``v_i`` in
    slot ``i``. Independent priors ignore ``v_i`` when weighting; correlated
    joints condition on atoms whose ``i``-th entry equals ``v_i``.
    """
    if isinstance(prior, CorrelatedJoint):
        rows = [(p, w) for p, w in zip(prior.support, prior.probabilities) if _same_type(p[i], v_i)]
        total = sum(w for _, w in rows)
        if total <= 0:
            raise ValueError(f"type {v_i!r} has zero probability for player {i}")
        return [(tuple(p), w / total) for p, w in rows]
    per = []
    for j, d in enumerate(prior.per_player):
        if j == i:
            per.append([(v_i, 1.0)])
        else:
            per.append(list(zip(*_marginal_nodes(d, points))))
    out = []
    for combo in itertools.product(*per):
        out.append((tuple(x for x, _ in combo), float(np.prod([w for _, w in combo]))))
    return out


def type_values(prior: Prior, i: int, points: int = 101) -> list:
    """Types of player ``i`` at which equilibrium conditions are checked."""
    if isinstance(prior, CorrelatedJoint):
        seen = []
        for p in prior.support:
            if not any(_same_type(p[i], s) for s in seen):
                seen.append(p[i])
        return seen
    d = prior.per_player[i]
    if isinstance(d, Uniform):
        return list(d.grid(points))
    return list(d.support)
