import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from auction_poa.auctions import FirstPrice, SimultaneousItems, welfare_batch
from auction_poa.valuations import Additive, SingleMinded, UnitDemand, value
from auction_poa.welfare import (
    ResourceLimitError,
    opt_brute_force,
    opt_matching,
    opt_single_item,
    opt_welfare,
)


def permutation_oracle(w):
    """Best one-to-one assignment by enumerating permutations (padding with dummies)."""
    n, m = w.shape
    k = max(n, m)
    pad = np.zeros((k, k))
    pad[:n, :m] = w
    return max(sum(pad[i, p[i]] for i in range(k)) for p in itertools.permutations(range(k)))


def test_single_item():
    assert opt_single_item((0.8, 1.0)) == type(opt_single_item((0.8, 1.0)))(1.0, 1)
    assert opt_single_item((0.01, 1.0)).welfare == 1.0
    assert opt_single_item((0.5, 0.5, 0.5)).allocation == 0
    with pytest.raises(ValueError):
        opt_single_item(())


def test_matching_examples():
    assert opt_matching(np.ones((2, 2))).welfare == 2
    assert opt_matching(np.ones((5, 5))).welfare == 5


def test_matching_vs_permutations(rng):
    for _ in range(50):
        w = rng.integers(0, 10, size=(3, 3)).astype(float)
        assert opt_matching(w).welfare == permutation_oracle(w)


def test_brute_force_examples():
    assert opt_brute_force((SingleMinded(2, frozenset({0, 1}), 3.0), Additive((2, 2)))).welfare == 4
    r = opt_brute_force((Additive((1, 3)), Additive((2, 1))))
    assert r.welfare == 5 and r.allocation == (frozenset({1}), frozenset({0}))
    with pytest.raises(ResourceLimitError):
        opt_brute_force(tuple(Additive((1,) * 8) for _ in range(9)))


def test_brute_force_matches_matching_3x3(rng):
    for _ in range(30):
        prof = [UnitDemand(tuple(rng.uniform(size=3))) for _ in range(3)]
        assert opt_brute_force(prof).welfare == pytest.approx(opt_matching(prof).welfare)


@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**31 - 1), st.floats(0.1, 10))
def test_scaling_covariance(n, m, seed, t):
    r = np.random.default_rng(seed)
    prof = [Additive(tuple(r.uniform(size=m))) for _ in range(n)]
    scaled = [Additive(tuple(t * np.asarray(v.weights))) for v in prof]
    a, b = opt_brute_force(prof), opt_brute_force(scaled)
    assert b.welfare == pytest.approx(t * a.welfare)
    assert sum(value(v, S) for v, S in zip(scaled, a.allocation)) == pytest.approx(b.welfare)


@given(st.integers(0, 2**31 - 1))
def test_opt_dominates_any_bid_profile(seed):
    r = np.random.default_rng(seed)
    prof = [UnitDemand(tuple(r.uniform(size=2))) for _ in range(3)]
    B = r.uniform(size=(50, 3, 2))
    fmt = SimultaneousItems(2)
    assert np.all(welfare_batch(fmt, B, prof) <= opt_welfare(fmt, prof) + 1e-12)
    v = r.uniform(size=3)
    assert np.all(welfare_batch(FirstPrice(), r.uniform(size=(50, 3)), v) <= opt_welfare(FirstPrice(), v) + 1e-12)
