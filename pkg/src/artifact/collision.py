"""Hard-sphere collision operator Q(f,g) and collision frequency nu.

Q(f,g)(v) = int du int dw |(u-v).w| [f(u')g(v') - f(u)g(v)],
u' = u - ((u-v).w)w,  v' = v + ((u-v).w)w,  w on the unit sphere.

Discretization notes
--------------------
* The u-integral uses the grid trapezoid rule; the w-integral the sphere rule
  (the integrand is even in w, so one hemisphere at double weight suffices).
* Off-grid post-collision velocities are interpolated trilinearly in the
  ratio f/M ("equilibrium-weighted" interpolation): hard-sphere collisions
  preserve u+v and |u|^2+|v|^2, so M(u')M(v') = M(u)M(v) exactly and the
  integrand can be written
      M(u)M(v) [ (f/M)(u') (g/M)(v') - (f/M)(u) (g/M)(v) ].
  This annihilates Q(M,M) identically and moves the interpolation error onto
  the smooth ratio instead of the Gaussian; plain trilinear interpolation of
  f itself leaves an O(1) equilibrium defect at practical resolutions.
* Post-collision points leaving the box are clamped to the boundary
  coordinate-wise; the Gaussian weight at 6.4 sigma makes this invisible.
* The raw quadrature does not conserve moments to 1e-6; apply_q therefore
  projects out the tiny non-conserving component along the five collision
  invariants (a linear correction, so bilinearity is preserved).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.special import erf

from .grid import SphereQuadrature, VelocityGrid, make_sphere_quadrature
from .maxwell import MaxwellParams, eval_maxwellian


@dataclass
class CollisionConfig:
    """Grid + sphere rule + interpolation policy for collision quadrature."""

    grid: VelocityGrid
    sphere: SphereQuadrature
    interpolation: str = "trilinear"
    conserve: bool = True  # project onto the collision-invariant complement
    params: MaxwellParams = field(default_factory=MaxwellParams)

    def __post_init__(self):
        if self.interpolation != "trilinear":
            raise ValueError(f"unsupported interpolation: {self.interpolation}")


def default_collision_config(grid: VelocityGrid, n_polar: int = 16,
                             n_azimuthal: int = 32,
                             params: MaxwellParams | None = None) -> CollisionConfig:
    return CollisionConfig(grid=grid,
                           sphere=make_sphere_quadrature(n_polar, n_azimuthal),
                           params=params or MaxwellParams())


def _tri_stencil(rel: np.ndarray):
    """Trilinear gather stencil for points at offset `rel` (grid units) from
    a node: integer base corner + the 8 corner weights (z fastest)."""
    base = np.floor(rel).astype(np.int64)
    fx, fy, fz = (rel - base).T
    w = np.stack([
        (1 - fx) * (1 - fy) * (1 - fz),
        (1 - fx) * (1 - fy) * fz,
        (1 - fx) * fy * (1 - fz),
        (1 - fx) * fy * fz,
        fx * (1 - fy) * (1 - fz),
        fx * (1 - fy) * fz,
        fx * fy * (1 - fz),
        fx * fy * fz,
    ], axis=1)
    return base, w


@njit(cache=True, fastmath=True)
def _q_kernel(Fp, Gp, F, G, P, W, lin_u, wu, lin_v, wv, cw, w1, M3, out):
    """Accumulate one sphere direction: gain (interpolated) minus loss.

    Fp/Gp are the ratio fields f/M, g/M edge-replicated to a (P+2W)^3 box
    (replication realizes the coordinate clamp for post-collision points
    leaving the box); F/G the unpadded ratios.  lin_u/wu and lin_v/wv are
    the flattened padded-array stencil base offsets (relative to the output
    node) and trilinear corner weights for u' and v', indexed by the lattice
    offset k = (u-v)/h; cw = |(u-v).w| times the direction's sphere weight;
    w1 the 1-D trapezoid weights; M3 = M on the lattice.  out accumulates
    sum_u q M(u) cw [gain - loss]; the caller multiplies by M(v).
    """
    Pp = P + 2 * W
    D = 2 * P - 1
    s1 = Pp * Pp
    for ix in range(P):
        for iy in range(P):
            for iz in range(P):
                i = (ix * P + iy) * P + iz
                ip = ((ix + W) * Pp + (iy + W)) * Pp + (iz + W)
                gv0 = G[i]
                acc = 0.0
                for ux in range(P):
                    kx = (ux - ix + P - 1) * D
                    w1x = w1[ux]
                    for uy in range(P):
                        ky = (kx + uy - iy + P - 1) * D
                        w1xy = w1x * w1[uy]
                        ub = (ux * P + uy) * P
                        for uz in range(P):
                            k = ky + uz - iz + P - 1
                            c = cw[k]
                            if c == 0.0:
                                continue
                            q = c * w1xy * w1[uz] * M3[ub + uz]
                            bu = ip + lin_u[k]
                            bv = ip + lin_v[k]
                            fu = (wu[k, 0] * Fp[bu] + wu[k, 1] * Fp[bu + 1]
                                  + wu[k, 2] * Fp[bu + Pp] + wu[k, 3] * Fp[bu + Pp + 1]
                                  + wu[k, 4] * Fp[bu + s1] + wu[k, 5] * Fp[bu + s1 + 1]
                                  + wu[k, 6] * Fp[bu + s1 + Pp]
                                  + wu[k, 7] * Fp[bu + s1 + Pp + 1])
                            gv = (wv[k, 0] * Gp[bv] + wv[k, 1] * Gp[bv + 1]
                                  + wv[k, 2] * Gp[bv + Pp] + wv[k, 3] * Gp[bv + Pp + 1]
                                  + wv[k, 4] * Gp[bv + s1] + wv[k, 5] * Gp[bv + s1 + 1]
                                  + wv[k, 6] * Gp[bv + s1 + Pp]
                                  + wv[k, 7] * Gp[bv + s1 + Pp + 1])
                            acc += q * (fu * gv - F[ub + uz] * gv0)
                out[i] += acc


@njit(cache=True, fastmath=True)
def _q_kernel_sym(Fp, F, P, W, lin_u, wu, lin_v, wv, cw, w3, M3, out):
    """Symmetric variant of _q_kernel for f = g.

    The collision map (u, v) -> (u', v') swaps endpoints under u <-> v, so the
    gain product f(u')f(v') is shared by the pair of output nodes; gathering it
    once and scattering to both halves the interpolation work.  w3 holds the
    per-node product trapezoid weights.
    """
    Pp = P + 2 * W
    D = 2 * P - 1
    s1 = Pp * Pp
    for ix in range(P):
        for iy in range(P):
            for iz in range(P):
                i = (ix * P + iy) * P + iz
                ip = ((ix + W) * Pp + (iy + W)) * Pp + (iz + W)
                fi = F[i]
                acc = 0.0
                for ux in range(P):
                    kx = (ux - ix + P - 1) * D
                    for uy in range(P):
                        ky = (kx + uy - iy + P - 1) * D
                        ub = (ux * P + uy) * P
                        for uz in range(P):
                            j = ub + uz
                            if j <= i:
                                continue
                            k = ky + uz - iz + P - 1
                            c = cw[k]
                            if c == 0.0:
                                continue
                            bu = ip + lin_u[k]
                            bv = ip + lin_v[k]
                            fu = (wu[k, 0] * Fp[bu] + wu[k, 1] * Fp[bu + 1]
                                  + wu[k, 2] * Fp[bu + Pp] + wu[k, 3] * Fp[bu + Pp + 1]
                                  + wu[k, 4] * Fp[bu + s1] + wu[k, 5] * Fp[bu + s1 + 1]
                                  + wu[k, 6] * Fp[bu + s1 + Pp]
                                  + wu[k, 7] * Fp[bu + s1 + Pp + 1])
                            fv = (wv[k, 0] * Fp[bv] + wv[k, 1] * Fp[bv + 1]
                                  + wv[k, 2] * Fp[bv + Pp] + wv[k, 3] * Fp[bv + Pp + 1]
                                  + wv[k, 4] * Fp[bv + s1] + wv[k, 5] * Fp[bv + s1 + 1]
                                  + wv[k, 6] * Fp[bv + s1 + Pp]
                                  + wv[k, 7] * Fp[bv + s1 + Pp + 1])
                            b = fu * fv - F[j] * fi
                            acc += c * w3[j] * M3[j] * b
                            out[j] += c * w3[i] * M3[i] * b
                out[i] += acc


def apply_q(f: np.ndarray, g: np.ndarray, cfg: CollisionConfig) -> np.ndarray:
    """Bilinear hard-sphere collision operator on grid functions."""
    out = apply_q_raw(f, g, cfg)
    if cfg.conserve:
        out = project_invariants(out, cfg)
    return out


def apply_q_raw(f: np.ndarray, g: np.ndarray, cfg: CollisionConfig) -> np.ndarray:
    """Quadrature evaluation of Q(f,g) without the conservation projection."""
    grid = cfg.grid
    P, h = grid.points_per_axis, grid.spacing
    M = eval_maxwellian(cfg.params, grid.nodes)
    F = np.asarray(f, dtype=float) / M
    G = np.asarray(g, dtype=float) / M

    w1 = np.full(P, h)
    w1[0] = w1[-1] = h / 2.0

    keep = cfg.sphere.nodes[:, 2] > 0.0
    omegas = cfg.sphere.nodes[keep]
    oweights = cfg.sphere.weights[keep] * 2.0  # integrand even in omega

    r = np.arange(-(P - 1), P)
    KX, KY, KZ = np.meshgrid(r, r, r, indexing="ij")
    K = np.ascontiguousarray(
        np.stack([KX, KY, KZ], axis=-1).reshape(-1, 3).astype(np.int64))

    # pad width: post-collision points reach at most sqrt(6)*extent, i.e.
    # (sqrt(6)-1)*extent beyond the box, plus one cell for the stencil.
    W = int(np.ceil((np.sqrt(6.0) - 1.0) * grid.extent / h)) + 2
    Pp = P + 2 * W
    Fp = np.pad(F.reshape(P, P, P), W, mode="edge").ravel()
    Gp = np.pad(G.reshape(P, P, P), W, mode="edge").ravel()

    symmetric = f is g  # identity, not equality: keeps the dispatch predictable
    w3 = (w1[:, None, None] * w1[None, :, None] * w1[None, None, :]).ravel()

    out = np.zeros(grid.n_nodes)
    for w, ow in zip(omegas, oweights):
        cdot = K @ w  # (u-v).w in units of h
        base_u, wu = _tri_stencil(K - cdot[:, None] * w[None, :])
        base_v, wv = _tri_stencil(cdot[:, None] * w[None, :])
        lin_u = (base_u[:, 0] * Pp + base_u[:, 1]) * Pp + base_u[:, 2]
        lin_v = (base_v[:, 0] * Pp + base_v[:, 1]) * Pp + base_v[:, 2]
        if symmetric:
            _q_kernel_sym(Fp, F, P, W, lin_u, wu, lin_v, wv,
                          np.abs(cdot) * h * ow, w3, M, out)
        else:
            _q_kernel(Fp, Gp, F, G, P, W, lin_u, wu, lin_v, wv,
                      np.abs(cdot) * h * ow, w1, M, out)
    return M * out


def project_invariants(qout: np.ndarray, cfg: CollisionConfig) -> np.ndarray:
    """Remove the quadrature-induced component along the collision invariants.

    Subtracts sum_a c_a M p_a with p in {1, v1, v2, v3, |v|^2}, chosen so the
    mass/momentum/energy moments of the result vanish exactly.
    """
    grid = cfg.grid
    M = eval_maxwellian(cfg.params, grid.nodes)
    v = grid.nodes
    basis = np.stack([np.ones(grid.n_nodes), v[:, 0], v[:, 1], v[:, 2],
                      (v ** 2).sum(axis=1)])
    q = grid.quad_weights
    gram = (basis * (q * M)) @ basis.T
    mom = (basis * q) @ qout
    coef = np.linalg.solve(gram, mom)
    return qout - (coef @ basis) * M


_SQRT2 = np.sqrt(2.0)


def eval_nu(p: MaxwellParams, v: np.ndarray,
            cfg: CollisionConfig | None = None) -> np.ndarray | float:
    """Collision frequency nu(v) = int int |(u-v).w| M(u) du dw.

    Closed form: the sphere integral of |w.omega| is 2*pi*|w|, and the
    remaining Gaussian integral is the mean distance E|X - v| for
    X ~ N(mu, T I), expressible with erf.  nu_quadrature provides the
    brute-force cross-check.
    """
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    vv = v[None, :] if single else v
    T, s = p.T, np.sqrt(p.T)
    r = np.linalg.norm(vv - p.mu[None, :], axis=1)
    rr = np.where(r < 1e-12, 1.0, r)
    mean_dist = np.where(
        r < 1e-12,
        2.0 * s * np.sqrt(2.0 / np.pi),
        s * np.sqrt(2.0 / np.pi) * np.exp(-r ** 2 / (2.0 * T))
        + (rr + T / rr) * erf(rr / (s * _SQRT2)))
    out = 2.0 * np.pi * (2.0 * np.pi) ** -3 * mean_dist
    return float(out[0]) if single else out


def nu_quadrature(p: MaxwellParams, v: np.ndarray, grid: VelocityGrid
                  ) -> np.ndarray | float:
    """Oracle evaluation of nu by grid quadrature of 2*pi*|u-v|*M(u)."""
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    vv = v[None, :] if single else v
    M = eval_maxwellian(p, grid.nodes)
    d = np.linalg.norm(grid.nodes[None, :, :] - vv[:, None, :], axis=2)
    out = 2.0 * np.pi * (d * M[None, :]) @ grid.quad_weights
    return float(out[0]) if single else out


def nu_min(p: MaxwellParams, grid: VelocityGrid,
           cfg: CollisionConfig | None = None) -> float:
    """Lambda = min_v nu(v); attained at v = mu by radial monotonicity."""
    return float(np.min(eval_nu(p, grid.nodes, cfg)))
