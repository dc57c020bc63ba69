"""Velocity lattice, sphere quadrature, weights, and moments."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact import (MaxwellParams, WeightSpec, eval_maxwellian, make_grid,
                      make_sphere_quadrature, moments, weighted_l1_norm)


def test_grid_geometry():
    g = make_grid(9, 4.5)
    assert g.n_nodes == 729
    assert g.spacing == pytest.approx(9.0 / 8.0)
    assert np.allclose(g.nodes.min(axis=0), [-4.5] * 3)
    assert np.allclose(g.nodes.max(axis=0), [4.5] * 3)
    # trapezoid weights integrate 1 exactly over the cube
    assert np.sum(g.quad_weights) == pytest.approx(9.0 ** 3)


@pytest.mark.parametrize("bad", [4, 3, 0, -5])
def test_grid_rejects_bad_point_counts(bad):
    with pytest.raises(ValueError):
        make_grid(bad, 4.5)


def test_grid_rejects_bad_extent():
    with pytest.raises(ValueError):
        make_grid(9, -1.0)


def test_sphere_quadrature_polynomial_exactness():
    sph = make_sphere_quadrature(16, 32)
    w, om = sph.weights, sph.nodes
    assert np.sum(w) == pytest.approx(4.0 * np.pi, rel=1e-12)
    assert np.allclose(w @ om, 0.0, atol=1e-12)
    # second moment: int omega omega^T = (4 pi / 3) I
    second = (om.T * w) @ om
    assert np.allclose(second, 4.0 * np.pi / 3.0 * np.eye(3), atol=1e-10)


def test_sphere_quadrature_abs_dot():
    # int_{S^2} |omega . e| domega = 2 pi for any unit e; the integrand has a
    # kink on the equator, so the rule is only ~1e-3 accurate here
    sph = make_sphere_quadrature(16, 32)
    for e in np.eye(3):
        val = sph.weights @ np.abs(sph.nodes @ e)
        assert val == pytest.approx(2.0 * np.pi, rel=1e-2)


def test_sphere_quadrature_validation():
    with pytest.raises(ValueError):
        make_sphere_quadrature(2, 32)
    with pytest.raises(ValueError):
        make_sphere_quadrature(16, 4)


def test_weight_spec_values():
    g = make_grid(9, 4.5)
    w = WeightSpec(m=2.0)
    expect = 1.0 + (g.nodes ** 2).sum(axis=1)
    assert np.allclose(w.values(g), expect)


@given(a=st.floats(-5, 5, allow_nan=False))
@settings(max_examples=20, deadline=None)
def test_weighted_l1_homogeneity(a):
    g = make_grid(5, 3.0)
    rng = np.random.default_rng(0)
    f = rng.normal(size=g.n_nodes)
    w = WeightSpec(m=1.0)
    assert weighted_l1_norm(a * f, w, g) == pytest.approx(
        abs(a) * weighted_l1_norm(f, w, g), rel=1e-12, abs=1e-12)


@given(seed=st.integers(0, 1000))
@settings(max_examples=20, deadline=None)
def test_weighted_l1_triangle(seed):
    g = make_grid(5, 3.0)
    rng = np.random.default_rng(seed)
    f, h = rng.normal(size=(2, g.n_nodes))
    w = WeightSpec(m=3.0)
    assert weighted_l1_norm(f + h, w, g) <= (
        weighted_l1_norm(f, w, g) + weighted_l1_norm(h, w, g)) * (1 + 1e-12)


def test_moments_of_maxwellian():
    g = make_grid(15, 4.5)
    p = MaxwellParams(T=0.5, mu=np.array([0.3, -0.2, 0.1]))
    M = eval_maxwellian(p, g.nodes)
    mass, momentum, energy = moments(M, g)
    assert mass == pytest.approx((2 * np.pi) ** -3, rel=5e-3)
    assert np.allclose(momentum / mass, p.mu, atol=5e-3)
    assert energy / mass == pytest.approx(3 * p.T + p.mu @ p.mu, rel=1e-2)
