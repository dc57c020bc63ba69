"""Propagator experiments: e^{-t L_n}, its contour representation, Duhamel
iterates, the oscillation operator K_t^(n), and exponential-decay fits.

Frame convention: every dense factorization (expm, Schur, eigendecomposition)
acts on the sqrt(M)-conjugated matrix, which is well scaled; results are
mapped back to the plain frame afterwards.  See linop.symmetrized_entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.linalg
from numpy.polynomial.legendre import leggauss

from .collision import eval_nu
from .grid import VelocityGrid, WeightSpec, weighted_l1_norm
from .linop import (KERNEL_NORMALIZATION, OperatorMatrix, ProjectionP,
                    desymmetrize_vector, kernel_gain_part, kernel_values,
                    symmetrize_vector, symmetrized_entries)
from .maxwell import MaxwellParams, eval_maxwellian
from .spectra import ContourGamma


@dataclass
class DecayFit:
    """Log-linear fit of a norm curve: norm(t) ~ amplitude * e^{-rate t}."""

    rate: float
    amplitude: float
    weight_loss: float
    r_squared: float
    t_window: tuple[float, float]
    accepted: bool

    def __post_init__(self):
        if self.accepted and self.rate <= 0:
            raise ValueError(f"accepted fit must have positive rate, got {self.rate}")


@dataclass
class DuhamelLedger:
    """Norm curves of the Duhamel iterates A_k over a common t-grid."""

    k_max: int
    t_grid: np.ndarray
    norm_curves: np.ndarray  # (k_max + 1, len(t_grid))

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError(f"k_max must be >= 1, got {self.k_max}")
        if np.any(self.norm_curves < 0):
            raise ValueError("norm curves must be nonnegative")


def semigroup_apply(A: OperatorMatrix, t: float, f: np.ndarray,
                    method: str = "expm") -> np.ndarray:
    """e^{-t A} f by dense scaling-and-squaring ("expm") or high-order ODE
    integration of du/dt = -A u ("ode"); the two agree to ~1e-8."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    sym = symmetrized_entries(A)
    g = symmetrize_vector(np.asarray(f, dtype=sym.dtype), A)
    if method == "expm":
        out = scipy.linalg.expm(-t * sym) @ g
    elif method == "ode":
        if t == 0:
            out = g
        else:
            def rhs(_, u):
                return -(sym @ u)
            sol = scipy.integrate.solve_ivp(rhs, (0.0, t), g.astype(complex),
                                            method="DOP853", rtol=1e-11,
                                            atol=1e-13 * max(1.0, np.abs(g).max()))
            if not sol.success:
                raise RuntimeError(f"ODE propagation failed: {sol.message}")
            out = sol.y[:, -1]
    else:
        raise ValueError(f"unknown method: {method}")
    return desymmetrize_vector(out, A)


def semigroup_curve(A: OperatorMatrix, ts: np.ndarray, f: np.ndarray
                    ) -> np.ndarray:
    """e^{-t A} f for many t at once through one eigendecomposition.

    Returns an array of shape (len(ts), dim) in the plain frame.  Cheaper than
    repeated expm when sampling decay curves.
    """
    sym = symmetrized_entries(A)
    lam, vecs = scipy.linalg.eig(sym)
    g = symmetrize_vector(np.asarray(f, dtype=complex), A)
    c = np.linalg.solve(vecs, g)
    ts = np.asarray(ts, dtype=float)
    out = (vecs @ (c[:, None] * np.exp(-np.outer(lam, ts)))).T
    sqrtM = np.sqrt(eval_maxwellian(A.params, A.grid.nodes))
    return out * sqrtM[None, :]


def contour_semigroup(A: OperatorMatrix, gamma: ContourGamma,
                      proj: ProjectionP | None, t: float, f: np.ndarray,
                      t_min: float = 0.5, fine_step: float = 2e-3,
                      coarse_step: float = 0.05, ray_step: float = 0.02,
                      ray_length: float = 40.0) -> np.ndarray:
    """e^{-t A} f through the contour integral
    -(1/2 pi i) sum_zeta w e^{-t zeta} (zeta - A)^{-1} f over Gamma_n.

    The resolvent is evaluated through one complex Schur factorization of the
    sqrt(M)-frame matrix plus a triangular solve per contour node.  For n = 0
    the projection (1 - P) is applied first (the contour excludes the null
    cluster, so the P-component has no representation).
    """
    if t < t_min:
        raise ValueError(
            f"contour quadrature needs t >= {t_min} (got {t}): the integrand "
            "relies on e^{-t Re zeta} decay along the rays")
    if np.linalg.norm(gamma.n) == 0.0:
        if proj is None:
            raise ValueError("n = 0 requires the projection P to remove the "
                             "null-cluster component")
        f = f - proj.apply(f)
    # resolve the resolvent's fine structure where it lives: within the
    # essential band |Im zeta| <= max |n.v| + 1
    fine_halfwidth = float(np.abs(gamma.n) @ np.full(3, A.grid.extent)) + 1.0
    zeta, w = gamma.quadrature(fine_step=fine_step,
                               fine_halfwidth=fine_halfwidth,
                               coarse_step=coarse_step, ray_step=ray_step,
                               ray_length=ray_length)
    sym = symmetrized_entries(A).astype(complex)
    T, Z = scipy.linalg.schur(sym, output="complex")
    g = symmetrize_vector(np.asarray(f, dtype=complex), A)
    gz = Z.conj().T @ g
    acc = np.zeros_like(gz)
    eye = np.eye(A.dim)
    for z_k, w_k in zip(zeta, w):
        x = scipy.linalg.solve_triangular(z_k * eye - T, gz, lower=False)
        acc += w_k * np.exp(-t * z_k) * x
    out = -(1.0 / (2.0j * np.pi)) * (Z @ acc)
    return desymmetrize_vector(out, A)


def duhamel_term(k: int, n: np.ndarray, t: float, f: np.ndarray,
                 k_matrix: OperatorMatrix, n_steps: int = 128) -> np.ndarray:
    """k-th Duhamel iterate for L_n = D + K with D = nu + i n.v:

        A_0(t) f = e^{-t D} f,
        A_k(t) f = -int_0^t e^{-(t-s) D} K A_{k-1}(s) f ds,

    so that sum_k A_k(t) f -> e^{-t L_n} f.  The nested time integrals are
    evaluated on a shared uniform grid with trapezoid weights, reusing the
    previous iterate's trajectory (cost O(k n_steps^2) elementwise passes)."""
    if not (0 <= k <= 12):
        raise ValueError(f"k must lie in [0, 12], got {k}")
    n = np.asarray(n, dtype=float)
    grid = k_matrix.grid
    nu = eval_nu(k_matrix.params, grid.nodes)
    D = nu + 1j * (grid.nodes @ n)
    f = np.asarray(f, dtype=complex)
    if k == 0:
        return np.exp(-t * D) * f
    ts = np.linspace(0.0, t, n_steps + 1)
    dt = ts[1] - ts[0]
    prop = np.exp(-np.outer(ts, D))      # e^{-s D} for all grid times
    cur = prop * f[None, :]              # A_0 trajectory
    for _ in range(k):
        KA = cur @ k_matrix.entries.T    # K applied at every time sample
        nxt = np.zeros_like(cur)
        for i in range(1, n_steps + 1):
            wts = np.full(i + 1, dt)
            wts[0] = wts[-1] = dt / 2.0
            # e^{-(t_i - s_j) D} = prop[i] / prop[j]
            integ = (wts[:, None] * KA[:i + 1] / prop[:i + 1]).sum(0)
            nxt[i] = -prop[i] * integ
        cur = nxt
    return cur[-1]


def duhamel_ledger(k_max: int, n: np.ndarray, t_grid: np.ndarray,
                   f: np.ndarray, k_matrix: OperatorMatrix,
                   weight: WeightSpec | None = None,
                   n_steps: int = 128) -> DuhamelLedger:
    """Weighted-norm curves of A_k(t) f for k = 0..k_max."""
    weight = weight or WeightSpec()
    t_grid = np.asarray(t_grid, dtype=float)
    curves = np.empty((k_max + 1, len(t_grid)))
    for k in range(k_max + 1):
        for j, t in enumerate(t_grid):
            curves[k, j] = weighted_l1_norm(
                duhamel_term(k, n, t, f, k_matrix, n_steps=n_steps),
                weight, k_matrix.grid)
    return DuhamelLedger(k_max=k_max, t_grid=t_grid, norm_curves=curves)


class OscillationEvaluator:
    """Quadrature evaluator for the oscillation operator

        K_t^(n) = K e^{-t (nu + i n.v)} K,

    measured as an operator from the <v>^3-strengthened L1 into weighted L1.

    A naive product of assembled K matrices plateaus: the middle
    multiplication operator oscillates with frequency t|n| and the nodal rule
    neither resolves the phase nor cancels the near-diagonal kernel mass.
    Instead, the middle integral over u is evaluated on a refined grid —
    piecewise-linear Filon weights along the oscillation axis crossed with a
    midpoint transverse grid — with the kernel's 1/|u-v| singularities
    subtracted inside a ball of radius h/2 and re-added analytically:
    radial moments of e^{-i xi u.e1} over the ball are closed-form, and the
    smooth kernel factors are corrected to first order with finite-difference
    kernel gradients.  The doubly-singular diagonal (both kernel arguments at
    the same node) gets its own analytic ball term.

    The construction assumes n parallel to a coordinate axis; by the cubic
    symmetry of the grid the norm depends only on |n|, so any axis-aligned
    mode reduces to the e1 case.
    """

    def __init__(self, grid: VelocityGrid, p: MaxwellParams,
                 ref: int = 8, rt: int = 4,
                 sphere: tuple[int, int] = (24, 48)):
        if not p.is_normalized:
            raise ValueError("oscillation evaluator requires the normalized "
                             "equilibrium")
        self.grid = grid
        self.params = p
        P, E, h = grid.points_per_axis, grid.extent, grid.spacing
        V = grid.nodes
        self.nu = eval_nu(p, V)
        self.ball_radius = R = h / 2.0

        ht = h / rt
        axt = np.linspace(-E + ht / 2, E - ht / 2, (P - 1) * rt)
        self.ax_f = np.linspace(-E, E, (P - 1) * ref + 1)
        self.wmt = np.full(len(axt), ht)
        Uf = np.stack(np.meshgrid(self.ax_f, axt, axt, indexing="ij"),
                      -1).reshape(-1, 3)
        self.nu_f = eval_nu(p, Uf)

        # Both kernel factors carry the same ball correction (the Gaussian
        # argument (u - v).v/|u - v| only changes sign between the two
        # orientations).  Assembled in chunks over the coarse nodes: the
        # correction temporaries are chunk x n_fine x 3 doubles and would
        # otherwise dominate peak memory.
        nf = len(Uf)
        self.KL32 = np.empty((grid.n_nodes, nf), np.float32)
        self.KR32 = np.empty((nf, grid.n_nodes), np.float32)
        for s0 in range(0, grid.n_nodes, 64):
            sl = slice(s0, min(s0 + 64, grid.n_nodes))
            Vb = V[sl]
            W = Uf[None, :, :] - Vb[:, None, :]
            r = np.sqrt((W ** 2).sum(-1))
            rr = np.maximum(r, 1e-14)
            wdc = ((W / rr[:, :, None]) * Vb[:, None, :]).sum(-1)
            corr = np.where(r < R, 2 * np.pi / rr * np.exp(-wdc ** 2), 0.0)
            self.KL32[sl] = kernel_values(Vb, Uf) + corr
            self.KR32[:, sl] = kernel_values(Uf, Vb) + corr.T
            del W, r, rr, wdc, corr

        self.kVV = kernel_values(V, V)
        d = np.arange(grid.n_nodes)
        self.kVV[d, d] = 0.0
        eps = 1e-5
        self.G1, self.G2, self.dnu = [], [], []
        for dd in range(3):
            dv = np.zeros(3)
            dv[dd] = eps
            g = (kernel_values(V + dv, V) - kernel_values(V - dv, V)) / (2 * eps)
            g[d, d] = 0.0  # the i = j cell is handled by the diagonal term
            self.G1.append(g)
            g = (kernel_values(V, V + dv) - kernel_values(V, V - dv)) / (2 * eps)
            g[d, d] = 0.0
            self.G2.append(g)
            self.dnu.append((eval_nu(p, V + dv) - eval_nu(p, V - dv)) / (2 * eps))

        npol, nazi = sphere
        ct, wt = leggauss(npol)
        st = np.sqrt(1.0 - ct ** 2)
        phi = (np.arange(nazi) + 0.5) * (2.0 * np.pi / nazi)
        self.om = np.stack([np.repeat(st, nazi) * np.cos(np.tile(phi, npol)),
                            np.repeat(st, nazi) * np.sin(np.tile(phi, npol)),
                            np.repeat(ct, nazi)], 1)
        self.wom = np.repeat(wt, nazi) * (2.0 * np.pi / nazi)
        self.angC = np.exp(-(self.om @ V.T) ** 2)
        self.ang2 = np.exp(-2.0 * (self.om @ V.T) ** 2)
        self.diag_idx = d

    @staticmethod
    def _filon_weights(ax: np.ndarray, xi: float) -> np.ndarray:
        """Exact integration weights for int f(u) e^{-i xi u} du with f
        piecewise linear on the uniform grid ax."""
        h = ax[1] - ax[0]
        th = xi * h
        if abs(th) < 1e-6:
            I0, I1 = 1.0 + 0j, 0.5 + 0j
        else:
            e = np.exp(-1j * th)
            I0 = (1 - e) / (1j * th)
            I1 = (e * (1 + 1j * th) - 1) / th ** 2
        w = np.zeros(len(ax), complex)
        ph = np.exp(-1j * xi * ax[:-1])
        w[:-1] += h * (I0 - I1) * ph
        w[1:] += h * I1 * ph
        return w

    @staticmethod
    def _radial_moment(a: np.ndarray, R: float, k: int) -> np.ndarray:
        """int_0^R rho^k e^{-i a rho} drho for k in {0, 1, 2}, closed form."""
        a = np.asarray(a, dtype=float)
        out = np.empty(a.shape, complex)
        s = np.abs(a) < 1e-9
        out[s] = R ** (k + 1) / (k + 1)
        b = -1j * a[~s]
        eR = np.exp(b * R)
        if k == 0:
            out[~s] = (eR - 1.0) / b
        elif k == 1:
            out[~s] = eR * (R / b - 1 / b ** 2) + 1 / b ** 2
        else:
            out[~s] = eR * (R ** 2 / b - 2 * R / b ** 2 + 2 / b ** 3) - 2 / b ** 3
        return out

    def norm(self, n, t: float, weight: WeightSpec | None = None) -> float:
        """Induced norm of K_t^(n) against the <v>^3-strengthened input."""
        n_abs = self._mode_magnitude(n)
        xi = n_abs * t
        V = self.grid.nodes
        R = self.ball_radius
        wf = self._filon_weights(self.ax_f, xi)
        Wq = ((wf[:, None, None] * self.wmt[None, :, None]
               * self.wmt[None, None, :]).reshape(-1) * np.exp(-t * self.nu_f))
        Bre = self.KL32 @ (Wq.real.astype(np.float32)[:, None] * self.KR32)
        Bim = self.KL32 @ (Wq.imag.astype(np.float32)[:, None] * self.KR32)
        B = Bre.astype(np.float64) + 1j * Bim.astype(np.float64)

        a_ = xi * self.om[:, 0]
        g1 = self._radial_moment(a_, R, 1)
        g2 = self._radial_moment(a_, R, 2)
        J0 = -2 * np.pi * ((self.wom * g1)[None, :] @ self.angC).ravel()
        Jv = -2 * np.pi * np.stack(
            [((self.wom * g2 * self.om[:, dd])[None, :] @ self.angC).ravel()
             for dd in range(3)])
        eph = np.exp(-1j * xi * V[:, 0])
        env = np.exp(-t * self.nu)
        PL = (eph * env * J0)[:, None] * self.kVV
        for dd in range(3):
            PL += (eph * env * Jv[dd])[:, None] * (
                self.G1[dd] - t * self.dnu[dd][:, None] * self.kVV)
        PR = self.kVV * (eph * env * J0)[None, :]
        for dd in range(3):
            PR += (self.G2[dd] - t * self.dnu[dd][None, :] * self.kVV) * (
                eph * env * Jv[dd])[None, :]
        B += PL + PR

        g0 = self._radial_moment(a_, R, 0)
        Jd = (2 * np.pi) ** 2 * ((self.wom * g0)[None, :] @ self.ang2).ravel()
        d = self.diag_idx
        B[d, d] += eph * env * Jd

        q = self.grid.quad_weights
        wout = (weight or WeightSpec()).values(self.grid)
        w3 = (1.0 + (V ** 2).sum(1)) ** 1.5
        colsums = (q * wout) @ np.abs(B)
        return float(KERNEL_NORMALIZATION ** 2 * (colsums / w3).max())

    def column_functional(self, n, t: float, j: int) -> float:
        """Single-column value sum_i q_i |(K_t^(n))_{i j}| / <v_j>^3 — a lower
        bound on norm(); used to anchor against brute-force quadrature."""
        full = self._column(n, t, j)
        q = self.grid.quad_weights
        w3 = (1.0 + (self.grid.nodes[j] ** 2).sum()) ** 1.5
        return float((q * np.abs(full)).sum() / w3)

    def _column(self, n, t: float, j: int) -> np.ndarray:
        # evaluate the full matrix and slice: correctness over speed
        n_abs = self._mode_magnitude(n)
        xi = n_abs * t
        V = self.grid.nodes
        R = self.ball_radius
        wf = self._filon_weights(self.ax_f, xi)
        Wq = ((wf[:, None, None] * self.wmt[None, :, None]
               * self.wmt[None, None, :]).reshape(-1) * np.exp(-t * self.nu_f))
        col_re = self.KL32 @ (Wq.real.astype(np.float32) * self.KR32[:, j])
        col_im = self.KL32 @ (Wq.imag.astype(np.float32) * self.KR32[:, j])
        col = col_re.astype(np.float64) + 1j * col_im.astype(np.float64)

        a_ = xi * self.om[:, 0]
        g1 = self._radial_moment(a_, R, 1)
        g2 = self._radial_moment(a_, R, 2)
        J0 = -2 * np.pi * ((self.wom * g1)[None, :] @ self.angC).ravel()
        Jv = -2 * np.pi * np.stack(
            [((self.wom * g2 * self.om[:, dd])[None, :] @ self.angC).ravel()
             for dd in range(3)])
        eph = np.exp(-1j * xi * V[:, 0])
        env = np.exp(-t * self.nu)
        col += (eph * env * J0) * self.kVV[:, j]
        for dd in range(3):
            col += (eph * env * Jv[dd]) * (
                self.G1[dd][:, j] - t * self.dnu[dd] * self.kVV[:, j])
        col += self.kVV[:, j] * (eph[j] * env[j] * J0[j])
        for dd in range(3):
            col += (self.G2[dd][:, j] - t * self.dnu[dd][j] * self.kVV[:, j]) * (
                eph[j] * env[j] * Jv[dd][j])
        g0 = self._radial_moment(a_, R, 0)
        Jd = (2 * np.pi) ** 2 * ((self.wom * g0)[None, :] @ self.ang2).ravel()
        col[j] += eph[j] * env[j] * Jd[j]
        return KERNEL_NORMALIZATION ** 2 * col

    @staticmethod
    def _mode_magnitude(n) -> float:
        n_arr = np.atleast_1d(np.asarray(n, dtype=float))
        if n_arr.size == 1:
            return float(abs(n_arr[0]))
        if np.count_nonzero(n_arr) > 1:
            raise NotImplementedError(
                "oscillation norm is implemented for axis-aligned modes "
                "(cubic symmetry reduces them to |n| e1)")
        return float(np.linalg.norm(n_arr))


_EVALUATOR_CACHE: dict[tuple, OscillationEvaluator] = {}


def oscillation_norm(n, t: float, k_matrix: OperatorMatrix,
                     nu: np.ndarray | None = None,
                     weight: WeightSpec | None = None) -> float:
    """Norm of K_t^(n) = K e^{-t(nu + i n.v)} K against the <v>^3-strengthened
    input norm.  The assembled k_matrix supplies grid and parameters; the
    operator itself is re-quadratured by the Filon evaluator (see
    OscillationEvaluator for why the nodal matrix product is insufficient)."""
    key = (k_matrix.grid.points_per_axis, round(k_matrix.grid.extent, 12))
    if key not in _EVALUATOR_CACHE:
        _EVALUATOR_CACHE[key] = OscillationEvaluator(k_matrix.grid,
                                                     k_matrix.params)
    return _EVALUATOR_CACHE[key].norm(n, t, weight=weight)


def fit_decay(ts: np.ndarray, norms: np.ndarray,
              window: tuple[float, float] = (1.0, 8.0),
              weight_loss: float = 0.0,
              min_samples: int = 10) -> DecayFit:
    """Least-squares line on log(norm) vs t inside the window.

    rate = -slope; fits with r^2 < 0.98 are returned with accepted=False.
    """
    ts = np.asarray(ts, dtype=float)
    norms = np.asarray(norms, dtype=float)
    mask = (ts >= window[0]) & (ts <= window[1])
    if mask.sum() < min_samples:
        raise ValueError(
            f"need >= {min_samples} samples in window {window}, got {mask.sum()}")
    if np.any(norms[mask] <= 0):
        raise ValueError("norm samples must be positive for a log-linear fit")
    x = ts[mask]
    y = np.log(norms[mask])
    slope, intercept = np.polyfit(x, y, 1)
    yhat = slope * x + intercept
    ss_res = float(((y - yhat) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    r2 = max(0.0, min(1.0, r2))
    accepted = r2 >= 0.98 and -slope > 0
    return DecayFit(rate=float(-slope), amplitude=float(np.exp(intercept)),
                    weight_loss=weight_loss, r_squared=r2,
                    t_window=(float(window[0]), float(window[1])),
                    accepted=accepted)
