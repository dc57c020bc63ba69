"""Nonlinear mode-truncated time evolution on the 3-torus.

The density g(v, x, t) is expanded in spatial Fourier modes,
g = sum_n e^{i n.x} g_n(v), truncated to |n|_inf <= n_max.  The evolution is

    d g_n / dt = -i (n.v) g_n + sum_{n1 + n2 = n} Q(g_{n1}, g_{n2}),

with the convolution restricted to |n1|, |n2| <= n_max.  The quadratic mode
convolution is evaluated by collocation: g is reconstructed at a small
x-lattice (enough points per active axis to de-alias products of bandwidth
2 n_max), Q(g(x_c), g(x_c)) is computed pointwise (real fields, so the
symmetric collision fast path applies), and target coefficients are read off
by the inverse DFT.  For trigonometric polynomials this reproduces the mode
convolution exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .collision import CollisionConfig, apply_q, default_collision_config, eval_nu
from .grid import VelocityGrid, WeightSpec, make_grid, moments, weighted_l1_norm
from .linop import assemble_ln, symmetrized_entries
from .maxwell import (MaxwellParams, X_VOLUME, eval_maxwellian, match_moments)
from .semigroup import DecayFit, fit_decay

Mode = tuple[int, int, int]


@dataclass
class ModeField:
    """Sparse mode-resolved velocity field: coefficients g_n for the modes
    present (absent modes are zero).  Physical reality requires
    g_{-n} = conj(g_n)."""

    n_max: int
    coefficients: dict[Mode, np.ndarray]
    grid: VelocityGrid

    def __post_init__(self):
        for n in self.coefficients:
            if max(abs(c) for c in n) > self.n_max:
                raise ValueError(f"mode {n} exceeds n_max = {self.n_max}")

    def get(self, n: Mode) -> np.ndarray:
        z = self.coefficients.get(tuple(n))
        if z is None:
            return np.zeros(self.grid.n_nodes, dtype=complex)
        return z

    def reality_defect(self) -> float:
        d = 0.0
        for n, g in self.coefficients.items():
            neg = tuple(-c for c in n)
            d = max(d, float(np.abs(g - np.conj(self.get(neg))).max()))
        return d

    def enforce_reality(self) -> "ModeField":
        out = {}
        seen = set()
        for n in self.coefficients:
            if n in seen:
                continue
            neg = tuple(-c for c in n)
            avg = 0.5 * (self.get(n) + np.conj(self.get(neg)))
            out[n] = avg
            out[neg] = np.conj(avg)
            seen.add(n)
            seen.add(neg)
        return ModeField(self.n_max, out, self.grid)

    def active_axes(self) -> list[int]:
        return [d for d in range(3)
                if any(n[d] != 0 for n in self.coefficients)]

    # -- linear-space helpers for time stepping ---------------------------
    def axpy(self, a: float, other: "ModeField") -> "ModeField":
        keys = set(self.coefficients) | set(other.coefficients)
        return ModeField(self.n_max,
                         {n: self.get(n) + a * other.get(n) for n in keys},
                         self.grid)

    def reconstruct(self, x: np.ndarray) -> np.ndarray:
        """g(x, .) on the velocity grid for one spatial point x (3-vector)."""
        acc = np.zeros(self.grid.n_nodes, dtype=complex)
        for n, gn in self.coefficients.items():
            acc += gn * np.exp(1j * float(np.dot(n, x)))
        return acc


@dataclass
class RelaxationRun:
    """Recorded time series of one nonlinear relaxation experiment."""

    params: MaxwellParams
    t_series: np.ndarray
    distance_series: np.ndarray
    conservation_drift: dict[str, float]
    controlling_series: np.ndarray
    fit: DecayFit
    c0_used: float
    positivity_min: float
    mass_series: np.ndarray | None = None
    momentum_series: np.ndarray | None = None  # (n_samples, 3)
    energy_series: np.ndarray | None = None

    def __post_init__(self):
        if np.any(self.distance_series < 0):
            raise ValueError("distance series must be nonnegative")
        if np.any(np.diff(self.controlling_series) < -1e-12):
            raise ValueError("controlling series must be nondecreasing")


@dataclass
class DynamicsConfig:
    """Collision quadrature + truncation + integrator policy."""

    collision: CollisionConfig
    n_max: int = 1
    dt_safety: float = 1.0   # c in the stability bound dt <= c/(nu_max + n_max extent)
    weight: WeightSpec = field(default_factory=WeightSpec)

    @property
    def grid(self) -> VelocityGrid:
        return self.collision.grid

    def stability_dt(self) -> float:
        g = self.grid
        nu_max = float(np.max(eval_nu(self.collision.params, g.nodes)))
        return self.dt_safety / (nu_max + self.n_max * g.extent)


def default_dynamics_config(grid: VelocityGrid, n_max: int = 1,
                            n_polar: int = 8, n_azimuthal: int = 16
                            ) -> DynamicsConfig:
    """Default dynamics setup: the collision sphere rule is halved relative
    to the operator-accuracy default (the conservation projection is exact
    regardless, and the mode convolution multiplies the collision cost)."""
    return DynamicsConfig(
        collision=default_collision_config(grid, n_polar, n_azimuthal),
        n_max=n_max)


def _slow_mode_shape(p: MaxwellParams, grid: VelocityGrid,
                     mode: np.ndarray) -> np.ndarray:
    """Eigenvector of L_mode with smallest-real-part eigenvalue, in the plain
    frame, deterministically phased."""
    L = assemble_ln(mode, p, grid)
    sym = symmetrized_entries(L)
    lam, vecs = np.linalg.eig(sym)
    k = int(np.argmin(lam.real))
    phi = vecs[:, k]
    sqrtM = np.sqrt(eval_maxwellian(p, grid.nodes))
    phi = phi * sqrtM  # back to the plain frame
    j = int(np.argmax(np.abs(phi)))
    phi = phi * (np.abs(phi[j]) / phi[j])  # largest entry real positive
    return phi


def init_perturbation(p: MaxwellParams, mode, amplitude: float,
                      shape: str = "transport",
                      grid: VelocityGrid | None = None,
                      n_max: int = 1) -> ModeField:
    """Maxwellian background plus a conjugate mode pair +-mode.

    Shapes ("transport": M(v) v_d along the mode axis; "slow_mode": the
    slowest eigenvector of L_mode) are normalized so sup |shape| / M = 1;
    the reconstructed g = M (1 + amplitude Re(...)) is then positive for any
    amplitude < 1, and a pointwise probe verifies it.
    """
    if grid is None:
        raise ValueError("init_perturbation requires a velocity grid")
    mode = np.asarray(mode, dtype=int)
    if not np.any(mode):
        raise ValueError("perturbation mode must be nonzero")
    M = eval_maxwellian(p, grid.nodes)
    if shape == "transport":
        axis = int(np.argmax(np.abs(mode)))
        prof = grid.nodes[:, axis] - p.mu[axis]
        phi = M * prof / np.max(np.abs(prof))
        phi = phi.astype(complex)
    elif shape == "slow_mode":
        phi = _slow_mode_shape(p, grid, mode.astype(float))
        phi = phi / np.max(np.abs(phi) / M)
    else:
        raise ValueError(f"unknown perturbation shape: {shape}")
    coeffs: dict[Mode, np.ndarray] = {
        (0, 0, 0): M.astype(complex),
        tuple(int(c) for c in mode): 0.5 * amplitude * phi,
        tuple(int(-c) for c in mode): 0.5 * amplitude * np.conj(phi),
    }
    out = ModeField(n_max=n_max, coefficients=coeffs, grid=grid)
    probe = [np.zeros(3)]
    axis = int(np.argmax(np.abs(mode)))
    for xval in (np.pi / 2, np.pi, 3 * np.pi / 2):
        xx = np.zeros(3)
        xx[axis] = xval
        probe.append(xx)
    gmin = min(float(out.reconstruct(x).real.min()) for x in probe)
    if gmin < 0.0:
        raise ValueError(
            f"amplitude {amplitude} violates positivity (min g = {gmin:.3e})")
    return out


def _collocation_lattice(field: ModeField) -> tuple[list[np.ndarray], int]:
    """De-aliasing x-lattice: npts points on each active axis (products of
    bandwidth n_max live at |k| <= 2 n_max, so npts >= 3 n_max + 1 leaves the
    retained modes alias-free)."""
    npts = 3 * field.n_max + 1
    axes = field.active_axes()
    pts_1d = 2.0 * np.pi * np.arange(npts) / npts
    lattice = []
    if not axes:
        lattice.append(np.zeros(3))
        return lattice, 1
    from itertools import product
    for combo in product(pts_1d, repeat=len(axes)):
        x = np.zeros(3)
        for a, val in zip(axes, combo):
            x[a] = val
        lattice.append(x)
    return lattice, npts


def rhs(field: ModeField, cfg: DynamicsConfig) -> ModeField:
    """Mode-truncated right-hand side: transport plus collision convolution."""
    grid = cfg.grid
    lattice, npts = _collocation_lattice(field)
    axes = field.active_axes()
    qvals = []
    for x in lattice:
        gc = field.reconstruct(x)
        if np.abs(gc.imag).max() > 1e-10 * max(np.abs(gc.real).max(), 1e-300):
            raise ValueError("field violates reality symmetry; collocation "
                             "values must be real")
        gr = np.ascontiguousarray(gc.real)
        qvals.append(apply_q(gr, gr, cfg.collision))
    inv = 1.0 / len(lattice)
    # targets: every retained mode supported on the active axes (the
    # convolution can populate modes absent from the input)
    from itertools import product as iproduct
    rng = range(-field.n_max, field.n_max + 1)
    targets = set(field.coefficients)
    if axes:
        for combo in iproduct(rng, repeat=len(axes)):
            n = [0, 0, 0]
            for a, val in zip(axes, combo):
                n[a] = val
            targets.add(tuple(n))
    out: dict[Mode, np.ndarray] = {}
    for n in targets:
        acc = np.zeros(grid.n_nodes, dtype=complex)
        for x, qv in zip(lattice, qvals):
            acc += np.exp(-1j * float(np.dot(n, x))) * qv
        ndotv = grid.nodes @ np.asarray(n, dtype=float)
        out[n] = -1j * ndotv * field.get(n) + inv * acc
    return ModeField(field.n_max, out, grid)


def step_rk4(field: ModeField, dt: float, cfg: DynamicsConfig) -> ModeField:
    """Classical RK4 step with the reality constraint re-enforced."""
    bound = cfg.stability_dt()
    if dt > bound * (1 + 1e-12):
        raise ValueError(
            f"dt = {dt} exceeds the stability bound {bound:.4g} "
            f"= c / (nu_max + n_max * extent)")
    k1 = rhs(field, cfg)
    k2 = rhs(field.axpy(dt / 2, k1), cfg)
    k3 = rhs(field.axpy(dt / 2, k2), cfg)
    k4 = rhs(field.axpy(dt, k3), cfg)
    out = field.axpy(dt / 6, k1).axpy(dt / 3, k2).axpy(dt / 3, k3).axpy(dt / 6, k4)
    return out.enforce_reality()


def _distance_norm(field: ModeField, M: np.ndarray, w: WeightSpec,
                   x_pts: int = 32) -> float:
    """|| g - M ||_{L1(v,x)} by midpoint x-quadrature on the active axes.

    x_pts must be large: the integrand |cos(x + theta)| has slowly decaying
    even harmonics, and the one aliased by an N-point midpoint rule leaves a
    2/(N^2 - 1) relative ripple in the phase theta.  As the mode's phase
    rotates in time that ripple shows up as oscillation of the recorded
    distance, flooring log-linear decay fits (3% at N = 8, 0.2% at N = 32).
    """
    axes = field.active_axes()
    grid = field.grid
    if not axes:
        return weighted_l1_norm(field.get((0, 0, 0)) - M, w, grid) * X_VOLUME
    from itertools import product
    pts = 2.0 * np.pi * (np.arange(x_pts) + 0.5) / x_pts
    total = 0.0
    count = 0
    for combo in product(pts, repeat=len(axes)):
        x = np.zeros(3)
        for a, val in zip(axes, combo):
            x[a] = val
        fv = field.reconstruct(x).real - M
        total += weighted_l1_norm(fv, w, grid)
        count += 1
    return total / count * X_VOLUME


def _positivity_min(field: ModeField, x_pts: int = 8) -> float:
    """min over an x-sample lattice and all v of the reconstructed g,
    relative to the peak value."""
    axes = field.active_axes()
    from itertools import product
    pts = 2.0 * np.pi * np.arange(x_pts) / x_pts
    gmin, gmax = np.inf, 0.0
    combos = product(pts, repeat=len(axes)) if axes else [()]
    for combo in combos:
        x = np.zeros(3)
        for a, val in zip(axes, combo):
            x[a] = val
        gv = field.reconstruct(x).real
        gmin = min(gmin, float(gv.min()))
        gmax = max(gmax, float(gv.max()))
    return gmin / gmax


def run_relaxation(init: ModeField, t_end: float, dt: float | None,
                   cfg: DynamicsConfig,
                   fit_window: tuple[float, float] | None = None,
                   record_every: int = 1) -> RelaxationRun:
    """Integrate the truncated system and measure relaxation to equilibrium.

    The target Maxwellian is fixed from the t = 0 moments and never refit.
    The controlling function uses C0 = 0.8 x fitted rate.
    """
    grid = cfg.grid
    if dt is None:
        dt = cfg.stability_dt()
    n_steps = int(np.ceil(t_end / dt - 1e-9))
    p0 = match_moments(init.get((0, 0, 0)).real, grid)
    M = eval_maxwellian(p0, grid.nodes)
    w = cfg.weight

    g0 = init.get((0, 0, 0)).real
    mass0, mom0, en0 = moments(g0, grid)
    scale_mom = max(float(np.max(np.abs(mom0))), mass0 * np.sqrt(en0 / mass0))

    ts = [0.0]
    dist = [_distance_norm(init, M, w)]
    masses, moms, ens = [mass0], [mom0], [en0]
    drift = {"mass": 0.0, "momentum": 0.0, "energy": 0.0}
    pos_min = _positivity_min(init)

    field = init
    t = 0.0
    for step in range(n_steps):
        h = min(dt, t_end - t)
        field = step_rk4(field, h, cfg)
        t += h
        if np.any([not np.all(np.isfinite(gc)) for gc in
                   field.coefficients.values()]):
            raise RuntimeError(f"non-finite field at t = {t}; aborting")
        if (step + 1) % record_every == 0 or step == n_steps - 1:
            ts.append(t)
            dist.append(_distance_norm(field, M, w))
            g0c = field.get((0, 0, 0)).real
            mass, mom, en = moments(g0c, grid)
            masses.append(mass)
            moms.append(mom)
            ens.append(en)
            drift["mass"] = max(drift["mass"], abs(mass - mass0) / mass0)
            drift["momentum"] = max(drift["momentum"],
                                    float(np.max(np.abs(mom - mom0))) / scale_mom)
            drift["energy"] = max(drift["energy"], abs(en - en0) / en0)
            pos_min = min(pos_min, _positivity_min(field))

    ts = np.asarray(ts)
    dist = np.asarray(dist)
    if fit_window is None:
        fit_window = (min(1.0, 0.05 * t_end), t_end)
    fit = fit_decay(ts, dist, window=fit_window)
    c0 = 0.8 * fit.rate
    ctrl = controlling_series(ts, dist, c0)
    return RelaxationRun(params=p0, t_series=ts, distance_series=dist,
                         conservation_drift=drift, controlling_series=ctrl,
                         fit=fit, c0_used=c0, positivity_min=pos_min,
                         mass_series=np.asarray(masses),
                         momentum_series=np.asarray(moms),
                         energy_series=np.asarray(ens))


def controlling_series(ts: np.ndarray, dist: np.ndarray, c0: float
                       ) -> np.ndarray:
    """M(t) = max_{s <= t} e^{c0 s} dist(s); nondecreasing by construction."""
    return np.maximum.accumulate(np.exp(c0 * np.asarray(ts)) * np.asarray(dist))


def controlling_function(run: RelaxationRun, c0: float) -> np.ndarray:
    """Recompute the controlling function from a stored run at any c0."""
    return controlling_series(run.t_series, run.distance_series, c0)
