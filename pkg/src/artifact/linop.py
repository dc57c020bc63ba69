"""Linearized collision operator: closed-form kernels, matrices, projections.

Linearizing the collision operator about a normalized equilibrium M (T = 1/2,
mu = 0) gives L_0 f = nu f + K f with K f = -Q(M, f) - Q(f, M) - nu f, and for
each spatial Fourier mode n the operator L_n = nu + i n.v + K.  The integral
operator K has the classical closed-form kernel

    k(v, u) = c_K [ pi e^{-|v|^2} |u - v|
                    - 2 pi |u - v|^{-1} exp(-((u - v).v)^2 / |u - v|^2) ],

with normalization c_K = 2 (2 pi)^{-3} pi^{-3/2}.  The first piece is the
(smooth) loss-type part, the second combines the two gain-type parts and has
an integrable 1/|u - v| singularity on the diagonal.

Matrix discretizations map function values at the lattice nodes to values of
Kf at the nodes.  Two schemes are provided:

* "product" (default): product integration.  On each 2h macro-cell the density
  is represented as M(u) times a triquadratic Lagrange interpolant of f/M
  (exact on the null-space functions up to interpolation error), and the
  kernel is integrated against that representation with composite Gauss rules,
  adaptively refined near the kernel singularity (dyadic subdivision in the
  eight cells touching it).  This is the accurate scheme used for spectra and
  semigroups.
* "pointwise": A_ij = q_j k(v_i, u_j) with the singular diagonal replaced by
  the analytic cell average of the 1/|w| singularity.  Cheap, and adequate for
  norm estimates and resolvent bounds.

Column caution: in the "product" scheme the representation weight M(u)/M(v_j)
makes far-corner columns carry large entries; all spectral/semigroup numerics
conjugate by sqrt(M) first (see symmetrized_entries).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .collision import CollisionConfig, apply_q_raw, eval_nu
from .grid import VelocityGrid, WeightSpec
from .maxwell import MaxwellParams, NullBasis, eval_maxwellian, null_basis

#: Normalization constant of the closed-form kernel, 2 (2 pi)^-3 pi^-3/2.
KERNEL_NORMALIZATION = 2.0 * (2.0 * np.pi) ** -3 * np.pi ** -1.5

#: Integral of 1/|x| over the unit cube centered at the origin.  Used for the
#: analytic diagonal of the "pointwise" scheme; cross-checked by quadrature in
#: the test suite.
UNIT_CELL_INV_DISTANCE = 2.3800773639795545


def kernel_loss_part(v: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Smooth kernel piece pi e^{-|v|^2} |u - v| (no normalization).

    v (n, 3) and u (m, 3) produce an (n, m) array.
    """
    v = np.atleast_2d(np.asarray(v, dtype=float))
    u = np.atleast_2d(np.asarray(u, dtype=float))
    r = np.linalg.norm(u[None, :, :] - v[:, None, :], axis=-1)
    return np.pi * np.exp(-(v ** 2).sum(-1))[:, None] * r


def kernel_gain_part(v: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Singular kernel piece 2 pi |u-v|^{-1} exp(-((u-v).v)^2/|u-v|^2).

    Zero is returned on the diagonal u = v (the assembly schemes integrate the
    singularity analytically or by refinement instead of sampling it).
    """
    v = np.atleast_2d(np.asarray(v, dtype=float))
    u = np.atleast_2d(np.asarray(u, dtype=float))
    w = u[None, :, :] - v[:, None, :]
    r = np.sqrt((w ** 2).sum(-1))
    rr = np.where(r < 1e-14, 1.0, r)
    dot = (w * v[:, None, :]).sum(-1)
    return 2.0 * np.pi / rr * np.exp(-((dot / rr) ** 2)) * (r > 1e-14)


def kernel_values(v: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Combined closed-form kernel k(v, u)/c_K = loss part minus gain part."""
    return kernel_loss_part(v, u) - kernel_gain_part(v, u)


@dataclass
class OperatorMatrix:
    """Dense matrix representation of an operator on grid functions.

    entries[i, j] maps nodal values f_j to (Af)_i; induced_norm measures the
    operator on the weighted L1 space determined by `weight`:

        ||A|| = max_j sum_i q_i w_i |A_ij| / (q_j w_j),

    the exact operator norm of the matrix acting on quadrature-discretized
    integrable functions.
    """

    entries: np.ndarray
    grid: VelocityGrid
    params: MaxwellParams
    weight: WeightSpec = field(default_factory=WeightSpec)
    mode: np.ndarray | None = None  # spatial mode n for L_n, else None

    def __post_init__(self):
        n = self.grid.n_nodes
        if self.entries.shape != (n, n):
            raise ValueError(
                f"entries shape {self.entries.shape} does not match grid ({n}, {n})")
        if self.mode is not None:
            self.mode = np.asarray(self.mode, dtype=float)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.entries @ f

    def induced_norm(self) -> float:
        qw = self.grid.quad_weights * self.weight.values(self.grid)
        col = qw @ np.abs(self.entries)
        return float(np.max(col / qw))


def _lag2(x: np.ndarray) -> np.ndarray:
    """Quadratic Lagrange basis on nodes {0, 1, 2}, evaluated at x."""
    return np.stack([(x - 1) * (x - 2) / 2, -x * (x - 2), x * (x - 1) / 2],
                    axis=-1)


def _dyadic_rule(corner: tuple[int, int, int], gauss, levels: int = 10):
    """Dyadic quadrature on [0,1]^3 resolving a corner singularity: at each
    level the cube is halved toward the corner and the seven outer subcubes
    get a 3^3 Gauss rule."""
    xg, wg = gauss
    pts, wts = [], []
    base = np.stack(np.meshgrid(xg, xg, xg, indexing="ij"), -1).reshape(-1, 3)
    bw = np.array([wa * wb * wc for wa in wg for wb in wg for wc in wg])
    for lev in range(levels):
        s2 = 0.5 ** (lev + 1)
        for ox in (0, 1):
            for oy in (0, 1):
                for oz in (0, 1):
                    if ox == oy == oz == 0:
                        continue
                    off = np.array([ox, oy, oz]) * s2
                    pts.append(off + base * s2)
                    wts.append(bw * s2 ** 3)
    p = np.concatenate(pts)
    w = np.concatenate(wts)
    for d in range(3):
        if corner[d]:
            p[:, d] = 1.0 - p[:, d]
    return p, w


def _assemble_product(grid: VelocityGrid, m_base: int = 3, alpha: float = 1.0,
                      cap: int = 8) -> np.ndarray:
    """Product-integration assembly of the un-normalized kernel matrix.

    Returns A with (Kf)(v_i) ~ c_K sum_j A_ij f_j.  Base pass: per 2h
    macro-cell, composite Gauss against the equilibrium-weighted triquadratic
    interpolant.  Correction pass: rows re-integrate nearby cells at a
    resolution proportional to the distance from the singularity.
    """
    P, h, E = grid.points_per_axis, grid.spacing, grid.extent
    if (P - 1) % 2 != 0:
        raise ValueError("product scheme needs an even cell count per axis")
    V = grid.nodes
    N = grid.n_nodes
    v2 = (V ** 2).sum(1)
    nmac = (P - 1) // 2

    xg, wg = leggauss(m_base)
    xg = (xg + 1) / 2
    wg = wg / 2
    pts, wts = [], []
    for fx in range(2):
        for fy in range(2):
            for fz in range(2):
                for a in range(m_base):
                    for b in range(m_base):
                        for c in range(m_base):
                            pts.append([fx + xg[a], fy + xg[b], fz + xg[c]])
                            wts.append(wg[a] * wg[b] * wg[c] * h ** 3)
    pts = np.array(pts)
    wts = np.array(wts)
    PHI = (_lag2(pts[:, 0])[:, :, None, None]
           * _lag2(pts[:, 1])[:, None, :, None]
           * _lag2(pts[:, 2])[:, None, None, :]).reshape(len(pts), 27)

    A = np.zeros((N, N))
    idx = np.arange(N).reshape(P, P, P)
    for mx in range(nmac):
        for my in range(nmac):
            for mz in range(nmac):
                org = -E + np.array([2 * mx, 2 * my, 2 * mz]) * h
                U = org + pts * h
                nodes = idx[2 * mx:2 * mx + 3, 2 * my:2 * my + 3,
                            2 * mz:2 * mz + 3].ravel()
                colfac = np.exp(v2[nodes][None, :] - (U ** 2).sum(1)[:, None])
                A[:, nodes] += kernel_values(V, U) @ ((wts[:, None] * PHI) * colfac)

    # Correction pass.
    xg3, wg3 = leggauss(3)
    xg3 = (xg3 + 1) / 2
    wg3 = wg3 / 2
    sub_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def cell_quad(msub: int):
        if msub not in sub_cache:
            p, w = [], []
            for sx in range(msub):
                for sy in range(msub):
                    for sz in range(msub):
                        for a in range(3):
                            for b in range(3):
                                for c in range(3):
                                    p.append([(sx + xg3[a]) / msub,
                                              (sy + xg3[b]) / msub,
                                              (sz + xg3[c]) / msub])
                                    w.append(wg3[a] * wg3[b] * wg3[c] / msub ** 3)
            sub_cache[msub] = (np.array(p), np.array(w))
        return sub_cache[msub]

    pf, wf = [], []
    for a in range(m_base):
        for b in range(m_base):
            for c in range(m_base):
                pf.append([xg[a], xg[b], xg[c]])
                wf.append(wg[a] * wg[b] * wg[c])
    pf = np.array(pf)
    wf = np.array(wf)

    dy_cache: dict[tuple[int, int, int], tuple[np.ndarray, np.ndarray]] = {}
    for i in range(N):
        vi = V[i]
        iv = np.array(np.unravel_index(i, (P, P, P)))
        vnorm = np.linalg.norm(vi)
        Rc = alpha * h * (1.0 + vnorm)
        c0 = np.maximum(0, iv - (int(np.ceil(Rc / h)) + 1))
        c1 = np.minimum(P - 2, iv + int(np.ceil(Rc / h)))
        for cx in range(c0[0], c1[0] + 1):
            for cy in range(c0[1], c1[1] + 1):
                for cz in range(c0[2], c1[2] + 1):
                    cc = np.array([cx, cy, cz])
                    ctr = -E + (cc + 0.5) * h
                    d = np.linalg.norm(ctr - vi)
                    dmin = max(d - 0.87 * h, 0.0)
                    s_req = alpha * max(dmin, 0.25 * h) / (1.0 + vnorm)
                    if not (dmin == 0.0 or h / m_base > s_req):
                        continue
                    org = -E + cc * h
                    mc = cc // 2
                    fo = cc - 2 * mc
                    nodes = idx[2 * mc[0]:2 * mc[0] + 3,
                                2 * mc[1]:2 * mc[1] + 3,
                                2 * mc[2]:2 * mc[2] + 3].ravel()
                    # remove the base-rule contribution of this fine cell
                    Ub = org + pf * h
                    phis = (_lag2(fo[0] + pf[:, 0])[:, :, None, None]
                            * _lag2(fo[1] + pf[:, 1])[:, None, :, None]
                            * _lag2(fo[2] + pf[:, 2])[:, None, None, :]
                            ).reshape(len(pf), 27)
                    colf = np.exp(v2[nodes][None, :] - (Ub ** 2).sum(1)[:, None])
                    Kb = kernel_values(vi[None, :], Ub)[0]
                    A[i, nodes] -= (Kb[:, None] * (wf[:, None] * h ** 3 * phis)
                                    * colf).sum(0)
                    # re-add at the required resolution
                    rel = (vi - org) / h
                    singular = (dmin == 0.0
                                and np.all((np.abs(rel) < 1e-9)
                                           | (np.abs(rel - 1) < 1e-9)))
                    if singular:
                        corner = tuple((np.abs(rel - 1) < 1e-9).astype(int))
                        if corner not in dy_cache:
                            dy_cache[corner] = _dyadic_rule(corner, (xg3, wg3))
                        pr, wr = dy_cache[corner]
                    else:
                        msub = min(cap, max(1, int(np.ceil(
                            h / (3.0 * max(s_req, 1e-9))))))
                        pr, wr = cell_quad(msub)
                    Ur = org + pr * h
                    phir = (_lag2(fo[0] + pr[:, 0])[:, :, None, None]
                            * _lag2(fo[1] + pr[:, 1])[:, None, :, None]
                            * _lag2(fo[2] + pr[:, 2])[:, None, None, :]
                            ).reshape(len(pr), 27)
                    colr = np.exp(v2[nodes][None, :] - (Ur ** 2).sum(1)[:, None])
                    Kr = kernel_values(vi[None, :], Ur)[0]
                    A[i, nodes] += (Kr[:, None] * (wr[:, None] * h ** 3 * phir)
                                    * colr).sum(0)
    return A


def _assemble_pointwise(grid: VelocityGrid) -> np.ndarray:
    """Collocation assembly A_ij = q_j k(v_i, u_j)/c_K with the analytic
    cell-averaged diagonal for the 1/|w| singularity."""
    V = grid.nodes
    A = kernel_values(V, V) * grid.quad_weights[None, :]
    diag = -2.0 * np.pi * (UNIT_CELL_INV_DISTANCE / grid.spacing) * grid.quad_weights
    np.fill_diagonal(A, diag)
    return A


_MEMORY_CACHE: dict[tuple, np.ndarray] = {}


def _cache_dir() -> str | None:
    d = os.environ.get("ARTIFACT_CACHE_DIR")
    if d is None:
        d = os.path.join(os.path.expanduser("~"), ".cache", "artifact")
    if d == "":
        return None
    os.makedirs(d, exist_ok=True)
    return d


def _cached_kernel_matrix(grid: VelocityGrid, scheme: str, m_base: int,
                          alpha: float, cap: int) -> np.ndarray:
    key = (grid.points_per_axis, round(grid.extent, 12), scheme, m_base,
           alpha, cap)
    if key in _MEMORY_CACHE:
        return _MEMORY_CACHE[key]
    cdir = _cache_dir()
    fname = None
    if cdir is not None:
        tag = "_".join(str(k) for k in key).replace(".", "p")
        fname = os.path.join(cdir, f"kmat_{tag}.npy")
        if os.path.exists(fname):
            A = np.load(fname)
            _MEMORY_CACHE[key] = A
            return A
    if scheme == "product":
        A = _assemble_product(grid, m_base=m_base, alpha=alpha, cap=cap)
    elif scheme == "pointwise":
        A = _assemble_pointwise(grid)
    else:
        raise ValueError(f"unknown assembly scheme: {scheme}")
    _MEMORY_CACHE[key] = A
    if fname is not None:
        np.save(fname, A)
    return A


def assemble_k_closed_form(p: MaxwellParams, grid: VelocityGrid,
                           weight: WeightSpec | None = None,
                           scheme: str = "product", m_base: int = 3,
                           alpha: float = 1.0, cap: int = 8) -> OperatorMatrix:
    """Matrix of the integral part K of the linearized operator.

    Requires the normalized equilibrium (T = 1/2, mu = 0) in which the closed
    form is valid; non-normalized parameters must be handled by rescaling
    before discretization.
    """
    if not p.is_normalized:
        raise ValueError(
            "closed-form kernel requires the normalized equilibrium T=1/2, mu=0")
    A = _cached_kernel_matrix(grid, scheme, m_base, alpha, cap)
    return OperatorMatrix(entries=KERNEL_NORMALIZATION * A, grid=grid,
                          params=p, weight=weight or WeightSpec())


def assemble_ln(n: np.ndarray, p: MaxwellParams, grid: VelocityGrid,
                k_matrix: OperatorMatrix | None = None,
                weight: WeightSpec | None = None,
                scheme: str = "product") -> OperatorMatrix:
    """Matrix of L_n = diag(nu + i n.v) + K for spatial mode n."""
    n = np.asarray(n, dtype=float)
    if k_matrix is None:
        k_matrix = assemble_k_closed_form(p, grid, weight=weight, scheme=scheme)
    nu = eval_nu(p, grid.nodes)
    diag = nu + 1j * (grid.nodes @ n)
    entries = k_matrix.entries.astype(complex) + np.diag(diag)
    return OperatorMatrix(entries=entries, grid=grid, params=p,
                          weight=weight or k_matrix.weight, mode=n)


def apply_k_spherical(f: np.ndarray, p: MaxwellParams,
                      cfg: CollisionConfig) -> np.ndarray:
    """K f evaluated through the collision quadrature:

        K f = -Q(M, f) - Q(f, M) - nu f,

    using the raw (unprojected) quadrature so that the identity holds at the
    discrete level.  Cross-validates the closed-form kernel matrices.
    """
    M = eval_maxwellian(p, cfg.grid.nodes)
    nu = eval_nu(p, cfg.grid.nodes)
    return (-apply_q_raw(M, f, cfg) - apply_q_raw(f, M, cfg) - nu * f)


@dataclass
class ProjectionP:
    """Spectral projection onto the five-dimensional null space of L_0.

    P f = sum_ab b_a (G^-1)_ab m_b(f) with b the null basis, m the moment
    functionals (mass, momentum, energy) and G_ab = m_a(b_b); exact projector
    by construction, and P f = 0 whenever all five moments of f vanish.
    """

    basis: NullBasis
    functionals: np.ndarray   # (5, N): rows are q-weighted moment functionals
    gram_inverse: np.ndarray  # (5, 5)

    def apply(self, f: np.ndarray) -> np.ndarray:
        coef = self.gram_inverse @ (self.functionals @ f)
        return coef @ self.basis.functions


def build_projection(p: MaxwellParams, grid: VelocityGrid) -> ProjectionP:
    basis = null_basis(p, grid)
    v = grid.nodes
    poly = np.stack([np.ones(grid.n_nodes), v[:, 0], v[:, 1], v[:, 2],
                     (v ** 2).sum(axis=1)])
    functionals = poly * grid.quad_weights[None, :]
    gram = functionals @ basis.functions.T
    return ProjectionP(basis=basis, functionals=functionals,
                       gram_inverse=np.linalg.inv(gram))


def apply_projection(f: np.ndarray, proj: ProjectionP) -> np.ndarray:
    return proj.apply(f)


def assemble_k_zeta_n(zeta: complex, n: np.ndarray, p: MaxwellParams,
                      grid: VelocityGrid,
                      k_matrix: OperatorMatrix | None = None) -> OperatorMatrix:
    """Matrix of K_{zeta,n} = K (nu + i n.v - zeta)^{-1}.

    Raises ValueError if zeta comes within 1e-12 of the multiplication
    operator's range (the denominator would be singular).
    """
    n = np.asarray(n, dtype=float)
    if k_matrix is None:
        k_matrix = assemble_k_closed_form(p, grid)
    nu = eval_nu(p, grid.nodes)
    denom = nu + 1j * (grid.nodes @ n) - zeta
    dmin = float(np.min(np.abs(denom)))
    if dmin < 1e-12:
        raise ValueError(
            f"zeta = {zeta} is within {dmin:.2e} of the essential range of "
            "nu + i n.v; resolvent factorization is singular there")
    entries = k_matrix.entries / denom[None, :]
    return OperatorMatrix(entries=entries, grid=grid, params=p,
                          weight=k_matrix.weight, mode=n)


def symmetrized_entries(op: OperatorMatrix) -> np.ndarray:
    """Conjugate the matrix by sqrt(M): B = D^{-1} A D with D = diag(sqrt M).

    In the product scheme raw columns carry M(u_j)^{-1}-type factors (entries
    up to ~1e12 at moderate extents); the conjugated matrix is well scaled, and
    all dense factorizations (Schur, expm, direct solves) must act on it.  The
    scaling is applied through exponentials of log M differences, which is
    exact up to one rounding.
    """
    d2 = ((op.grid.nodes - op.params.mu[None, :]) ** 2).sum(axis=1)
    loghalf = -d2 / (4.0 * op.params.T)  # log sqrt(M) up to a constant
    scale = np.exp(loghalf[None, :] - loghalf[:, None])
    return op.entries * scale


def desymmetrize_vector(g: np.ndarray, op: OperatorMatrix) -> np.ndarray:
    """Map a sqrt(M)-frame vector back to the plain frame: f = sqrt(M) g."""
    return np.sqrt(eval_maxwellian(op.params, op.grid.nodes)) * g


def symmetrize_vector(f: np.ndarray, op: OperatorMatrix) -> np.ndarray:
    """Map a plain-frame vector to the sqrt(M) frame: g = f / sqrt(M)."""
    return f / np.sqrt(eval_maxwellian(op.params, op.grid.nodes))
