import numpy as np
import pytest

from auction_poa.priors import (
    CorrelatedJoint,
    Discrete,
    IndependentProduct,
    Uniform,
    atoms,
    conditional_nodes,
    point_mass,
    sample_profile,
    sample_profiles,
)


def test_probabilities_must_sum_to_one():
    with pytest.raises(ValueError):
        Discrete((0.0, 1.0), (0.5, 0.4))
    with pytest.raises(ValueError):
        CorrelatedJoint(((0.0, 1.0),), (0.9,))
    with pytest.raises(ValueError):
        Uniform(1.0, 1.0)


def test_single_atom_joint():
    p = CorrelatedJoint(((0.3, 0.7),), (1.0,))
    for seed in range(5):
        assert sample_profile(p, seed) == (0.3, 0.7)


def test_point_masses():
    p = IndependentProduct((point_mass(0.2), point_mass(0.9)))
    assert sample_profile(p, 4) == (0.2, 0.9)


def test_uniform_means():
    x = sample_profiles(IndependentProduct((Uniform(0, 1), Uniform(0, 1))), 100_000, 0)
    assert np.all(np.abs(x.mean(axis=0) - 0.5) <= 0.005)


def test_reproducible():
    p = IndependentProduct((Uniform(0, 2), Discrete((0.1, 0.5), (0.3, 0.7))))
    assert np.array_equal(sample_profiles(p, 50, 7), sample_profiles(p, 50, 7))


def test_correlated_conditioning():
    p = CorrelatedJoint(((0.4, 0.6), (0.4, 0.9), (1.0, 0.6), (1.0, 0.9)), (0.4, 0.1, 0.1, 0.4))
    nodes = conditional_nodes(p, 0, 0.4)
    assert [w for _, w in nodes] == pytest.approx([0.8, 0.2])
    assert sum(w for _, w in atoms(p)) == pytest.approx(1.0)


def test_quadrature_nodes():
    nodes, w = Uniform(0, 2).quadrature(4)
    assert np.allclose(nodes, [0.25, 0.75, 1.25, 1.75])
    assert w.sum() == pytest.approx(1.0)
