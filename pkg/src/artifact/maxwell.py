"""Maxwellian equilibria, their parameter derivatives, and moment matching.

Mass convention: distributions carry total mass 1 over R^3 x T^3, so
velocity-only integrals of a Maxwellian equal (2*pi)^-3.  Concretely

    M_{T,mu}(v) = (2*pi)^-3 (2*pi*T)^{-3/2} exp(-|v - mu|^2 / (2*T)).

The five parameter derivatives (d/dT, d/dmu_k, and M itself) span the null
space of the linearized collision operator at mode n = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import VelocityGrid, moments

X_VOLUME = (2.0 * np.pi) ** 3  # volume of the 3-torus


@dataclass(frozen=True)
class MaxwellParams:
    """Temperature and mean velocity identifying an equilibrium M_{T,mu}."""

    T: float = 0.5
    mu: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError(f"temperature must be positive, got {self.T}")
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))

    @property
    def is_normalized(self) -> bool:
        """True for the normalized case T = 1/2, mu = 0 in which the
        closed-form kernels are stated."""
        return abs(self.T - 0.5) < 1e-14 and np.all(np.abs(self.mu) < 1e-14)


@dataclass(frozen=True)
class NullBasis:
    """The five zero-eigenvector grid functions of L_0.

    b0 = M, b1 = dM/dT, b(2+k) = dM/dmu_k, evaluated on the lattice.
    """

    params: MaxwellParams
    functions: np.ndarray  # (5, N)

    def __iter__(self):
        return iter(self.functions)


def eval_maxwellian(p: MaxwellParams, v: np.ndarray) -> np.ndarray:
    """M_{T,mu} at one velocity or an (N, 3) batch."""
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    vv = v[None, :] if single else v
    d2 = ((vv - p.mu[None, :]) ** 2).sum(axis=1)
    out = (2.0 * np.pi) ** -3 * (2.0 * np.pi * p.T) ** -1.5 * np.exp(-d2 / (2.0 * p.T))
    return float(out[0]) if single else out


def match_moments(g0: np.ndarray, grid: VelocityGrid,
                  mass_tol: float = 1e-2) -> MaxwellParams:
    """Unique (T, mu) whose Maxwellian matches the first/second moments of g0.

    g0 has unit total mass over R^3 x T^3, i.e. velocity mass (2*pi)^-3.
    Closed-form inversion: mu is the mean velocity, 3*T the centered energy.
    The mass gate is a guard against mis-normalized data, not an accuracy
    statement: the trapezoid mass of a Maxwellian itself carries an O(2e-3)
    defect on the coarsest supported grids.
    """
    mass, momentum, energy = moments(g0, grid)
    total = mass * X_VOLUME
    if abs(total - 1.0) > mass_tol:
        raise ValueError(f"initial datum must have unit mass, got {total:.3e}")
    mu = momentum / mass
    T = (energy / mass - float(mu @ mu)) / 3.0
    if T <= 0:
        raise ValueError(f"degenerate data: inferred temperature {T:.3e} <= 0")
    return MaxwellParams(T=T, mu=mu)


def null_basis(p: MaxwellParams, grid: VelocityGrid) -> NullBasis:
    """Analytic-derivative zero eigenvectors on the lattice."""
    m = eval_maxwellian(p, grid.nodes)
    d = grid.nodes - p.mu[None, :]
    d2 = (d * d).sum(axis=1)
    funcs = np.empty((5, grid.n_nodes))
    funcs[0] = m
    funcs[1] = m * (d2 / (2.0 * p.T ** 2) - 1.5 / p.T)
    for k in range(3):
        funcs[2 + k] = m * d[:, k] / p.T
    return NullBasis(params=p, functions=funcs)
