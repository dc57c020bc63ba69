"""Velocity-space discretization: cubic lattice, sphere quadrature, norms, moments.

Every operator in this package lives on a uniform cubic velocity lattice
truncated to a box [-extent, extent]^3.  The product trapezoid rule is used
throughout: it is symmetric (odd integrands cancel exactly on the symmetric
lattice) and, for smooth rapidly-decaying integrands, converges much faster
than its nominal second order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss


@dataclass(frozen=True)
class VelocityGrid:
    """Uniform cubic velocity lattice with trapezoid quadrature weights.

    nodes are ordered lexicographically in (i, j, k) with v = -extent + i*h,
    so the grid is its own mirror image: node(-v) is present for every node(v).
    """

    points_per_axis: int
    extent: float
    spacing: float
    axis: np.ndarray          # (P,) 1-D node coordinates
    nodes: np.ndarray         # (N, 3) flattened lattice
    quad_weights: np.ndarray  # (N,) product trapezoid weights

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    def index_of(self, i: int, j: int, k: int) -> int:
        p = self.points_per_axis
        return (i * p + j) * p + k

    @property
    def shape(self) -> tuple[int, int, int]:
        p = self.points_per_axis
        return (p, p, p)


@dataclass(frozen=True)
class SphereQuadrature:
    """Quadrature rule on the unit sphere: Gauss-Legendre in cos(theta)
    crossed with a uniform azimuthal grid."""

    nodes: np.ndarray    # (M, 3) unit vectors
    weights: np.ndarray  # (M,)


@dataclass(frozen=True)
class WeightSpec:
    """Polynomial weight <v - center>^m with <w> = sqrt(1 + |w|^2)."""

    m: float = 0.0
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.m < 0:
            raise ValueError(f"weight exponent m must be >= 0, got {self.m}")

    def values(self, grid: VelocityGrid) -> np.ndarray:
        d = grid.nodes - np.asarray(self.center)[None, :]
        return (1.0 + (d * d).sum(axis=1)) ** (self.m / 2.0)


def make_grid(points_per_axis: int, extent: float) -> VelocityGrid:
    """Build the velocity lattice.

    points_per_axis must be odd (so v = 0 is a node) and >= 5; extent > 0.
    """
    if points_per_axis % 2 == 0:
        raise ValueError(
            f"points_per_axis must be odd to center the lattice, got {points_per_axis}")
    if points_per_axis < 5:
        raise ValueError(f"points_per_axis must be >= 5, got {points_per_axis}")
    if extent <= 0:
        raise ValueError(f"extent must be positive, got {extent}")
    p = points_per_axis
    axis = np.linspace(-extent, extent, p)
    h = 2.0 * extent / (p - 1)
    w1 = np.full(p, h)
    w1[0] = w1[-1] = h / 2.0
    nodes = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1)
    weights = w1[:, None, None] * w1[None, :, None] * w1[None, None, :]
    return VelocityGrid(
        points_per_axis=p,
        extent=float(extent),
        spacing=h,
        axis=axis,
        nodes=nodes.reshape(-1, 3),
        quad_weights=weights.ravel(),
    )


def make_sphere_quadrature(n_polar: int, n_azimuthal: int) -> SphereQuadrature:
    """Sphere rule: Gauss-Legendre in cos(theta) x uniform midpoint in phi.

    Exact for all spherical harmonics of degree < min(2*n_polar, n_azimuthal);
    weights sum to 4*pi exactly (up to roundoff).
    """
    if n_polar < 4:
        raise ValueError(f"n_polar must be >= 4, got {n_polar}")
    if n_azimuthal < 8:
        raise ValueError(f"n_azimuthal must be >= 8, got {n_azimuthal}")
    cos_t, w_t = leggauss(n_polar)
    sin_t = np.sqrt(1.0 - cos_t ** 2)
    phi = (np.arange(n_azimuthal) + 0.5) * (2.0 * np.pi / n_azimuthal)
    ct = np.repeat(cos_t, n_azimuthal)
    st = np.repeat(sin_t, n_azimuthal)
    ph = np.tile(phi, n_polar)
    nodes = np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=1)
    weights = np.repeat(w_t, n_azimuthal) * (2.0 * np.pi / n_azimuthal)
    return SphereQuadrature(nodes=nodes, weights=weights)


def moments(f: np.ndarray, grid: VelocityGrid) -> tuple[float, np.ndarray, float]:
    """Velocity moments (mass, momentum, energy) by grid quadrature.

    Returns (sum q f, sum q v f, sum q |v|^2 f).  For mode-resolved fields
    the caller multiplies by (2*pi)^3 for the x-integral.
    """
    f = np.asarray(f)
    if f.shape != (grid.n_nodes,):
        raise ValueError(f"field shape {f.shape} does not match grid ({grid.n_nodes},)")
    qf = grid.quad_weights * f
    mass = qf.sum()
    momentum = qf @ grid.nodes
    energy = qf @ (grid.nodes ** 2).sum(axis=1)
    return float(mass), momentum, float(energy)


def weighted_l1_norm(f: np.ndarray, w: WeightSpec, grid: VelocityGrid) -> float:
    """Weighted L1 norm: sum_i q_i <v_i - mu>^m |f_i|."""
    return float(np.sum(grid.quad_weights * w.values(grid) * np.abs(f)))
