"""Maxwellian equilibria, moment matching, null basis."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact import (MaxwellParams, X_VOLUME, eval_maxwellian, make_grid,
                      match_moments, moments, null_basis)


def test_params_validation():
    with pytest.raises(ValueError):
        MaxwellParams(T=0.0)
    with pytest.raises(ValueError):
        MaxwellParams(T=-1.0)


def test_normalized_flag():
    assert MaxwellParams().is_normalized
    assert not MaxwellParams(T=0.6).is_normalized
    assert not MaxwellParams(mu=np.array([0.1, 0, 0])).is_normalized


def test_maxwellian_peak_value():
    p = MaxwellParams()
    # closed form at the peak: (2 pi)^-3 pi^{-3/2}
    assert eval_maxwellian(p, np.zeros(3)) == pytest.approx(
        (2 * np.pi) ** -3 * np.pi ** -1.5, rel=1e-14)


def test_maxwellian_total_mass():
    g = make_grid(15, 4.5)
    p = MaxwellParams()
    mass, _, _ = moments(eval_maxwellian(p, g.nodes), g)
    assert mass * X_VOLUME == pytest.approx(1.0, abs=5e-3)


@given(T=st.floats(0.3, 0.8), mux=st.floats(-0.5, 0.5))
@settings(max_examples=15, deadline=None)
def test_match_moments_roundtrip(T, mux):
    g = make_grid(15, 4.5)
    p = MaxwellParams(T=T, mu=np.array([mux, 0.0, 0.0]))
    q = match_moments(eval_maxwellian(p, g.nodes), g)
    assert q.T == pytest.approx(T, rel=2e-2)
    assert np.allclose(q.mu, p.mu, atol=2e-2)


def test_match_moments_rejects_wrong_mass():
    g = make_grid(9, 4.5)
    M = eval_maxwellian(MaxwellParams(), g.nodes)
    with pytest.raises(ValueError, match="mass"):
        match_moments(2.0 * M, g)


def test_null_basis_matches_finite_differences():
    g = make_grid(9, 4.5)
    p = MaxwellParams(T=0.5)
    nb = null_basis(p, g).functions
    eps = 1e-6
    dT = (eval_maxwellian(MaxwellParams(T=0.5 + eps), g.nodes)
          - eval_maxwellian(MaxwellParams(T=0.5 - eps), g.nodes)) / (2 * eps)
    assert np.allclose(nb[1], dT, rtol=1e-6, atol=1e-12)
    for k in range(3):
        mu = np.zeros(3)
        mu[k] = eps
        dmu = (eval_maxwellian(MaxwellParams(mu=mu), g.nodes)
               - eval_maxwellian(MaxwellParams(mu=-mu), g.nodes)) / (2 * eps)
        assert np.allclose(nb[2 + k], dmu, rtol=1e-6, atol=1e-12)
