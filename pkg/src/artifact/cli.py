"""Experiment driver.

Usage:
    artifact <kernels|spectrum|propagator|simulate> --config cfg.yaml \
             [--out DIR] [--quick] [--seed N]

Configuration is a single YAML file.  Schema (all keys optional; defaults in
parentheses; unknown keys are rejected):

    grid:        points_per_axis (15), extent (4.5)
    sphere:      n_polar (16), n_azimuthal (32)
    weight_m:    output-norm weight exponent (0.0)
    modes:       list of integer 3-vectors ([[0,0,0],[1,0,0]])
    contour:     theta_factor (0.05; theta = factor x Lambda), psi (4.0)
    integrator:  t_end (20.0), dt (null = stability bound), amplitude (0.1),
                 mode ([1,0,0]), shape (transport | slow_mode), n_max (1),
                 sphere: n_polar (8), n_azimuthal (16)
    kernels:     n_gaussians (10), upsilon_m ([0,2,4,6]), n_upsilon (100)
    propagator:  oscillation_modes ([0,1,2,4,8]),
                 oscillation_times ([0.5,1,2,4]),
                 fit_window ([1.0,8.0]), duhamel_k_max (3), contour_t (1.0)
    seed:        RNG seed (0; the --seed flag overrides)

Outputs: plain CSV files (header row; complex values split into _re/_im
columns) plus a human-readable summary.txt per command.  Identical config +
seed produce byte-identical outputs.

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import os
import sys
from dataclasses import dataclass, field

import numpy as np
import yaml

from .collision import apply_q, default_collision_config, eval_nu, nu_min
from .grid import VelocityGrid, WeightSpec, make_grid, weighted_l1_norm
from .linop import (OperatorMatrix, apply_k_spherical, assemble_k_closed_form,
                    assemble_ln, build_projection, kernel_gain_part,
                    kernel_loss_part)
from .maxwell import MaxwellParams, eval_maxwellian
from .spectra import compute_spectrum, contour_gamma, delta_constants
from .semigroup import (contour_semigroup, duhamel_ledger, fit_decay,
                        oscillation_norm, semigroup_apply, semigroup_curve)
from .dynamics import (default_dynamics_config, init_perturbation,
                       run_relaxation)


class ValidationError(ValueError):
    """Configuration or precondition violation (exit code 1)."""


_SCHEMA = {
    "grid": {"points_per_axis": 15, "extent": 4.5},
    "sphere": {"n_polar": 16, "n_azimuthal": 32},
    "weight_m": 0.0,
    "modes": [[0, 0, 0], [1, 0, 0]],
    "contour": {"theta_factor": 0.05, "psi": 4.0},
    "integrator": {"t_end": 20.0, "dt": None, "amplitude": 0.1,
                   "mode": [1, 0, 0], "shape": "transport", "n_max": 1,
                   "sphere": {"n_polar": 8, "n_azimuthal": 16}},
    "kernels": {"n_gaussians": 10, "upsilon_m": [0, 2, 4, 6],
                "n_upsilon": 100},
    "propagator": {"oscillation_modes": [0, 1, 2, 4, 8],
                   "oscillation_times": [0.5, 1.0, 2.0, 4.0],
                   "fit_window": [1.0, 8.0], "duhamel_k_max": 3,
                   "contour_t": 1.0},
    "seed": 0,
}


def _merge(defaults, given, path=""):
    if given is None:
        return copy.deepcopy(defaults)
    if isinstance(defaults, dict):
        if not isinstance(given, dict):
            raise ValidationError(f"config key '{path}' must be a mapping")
        out = {}
        for k, v in given.items():
            if k not in defaults:
                raise ValidationError(f"unknown config key '{path}{k}'")
        for k, dv in defaults.items():
            if isinstance(dv, dict):
                out[k] = _merge(dv, given.get(k), f"{path}{k}.")
            else:
                out[k] = copy.deepcopy(given[k] if k in given else dv)
        return out
    return copy.deepcopy(given)


@dataclass
class RunConfig:
    raw: dict
    out_dir: str
    quick: bool
    seed: int

    @property
    def grid(self) -> VelocityGrid:
        g = self.raw["grid"]
        try:
            return make_grid(int(g["points_per_axis"]), float(g["extent"]))
        except ValueError as exc:
            raise ValidationError(f"grid: {exc}") from exc

    @property
    def params(self) -> MaxwellParams:
        return MaxwellParams()

    @property
    def weight(self) -> WeightSpec:
        try:
            return WeightSpec(m=float(self.raw["weight_m"]))
        except ValueError as exc:
            raise ValidationError(f"weight_m: {exc}") from exc

    @property
    def modes(self) -> list[np.ndarray]:
        ms = self.raw["modes"]
        if not ms:
            raise ValidationError("modes: list must be nonempty")
        out = []
        for m in ms:
            if len(m) != 3 or any(int(c) != c for c in m):
                raise ValidationError(f"modes: {m} is not an integer 3-vector")
            out.append(np.asarray(m, dtype=float))
        return out


def load_config(path: str | None, out_dir: str, quick: bool,
                seed: int | None) -> RunConfig:
    given = {}
    if path is not None:
        try:
            with open(path) as fh:
                given = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ValidationError(f"cannot read config: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ValidationError(f"config is not valid YAML: {exc}") from exc
    raw = _merge(_SCHEMA, given)
    if quick:
        raw["grid"]["points_per_axis"] = 9
        raw["integrator"]["n_max"] = 1
        raw["integrator"]["t_end"] = 10.0
    return RunConfig(raw=raw, out_dir=out_dir, quick=quick,
                     seed=int(seed if seed is not None else raw["seed"]))


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return "%.12g" % x
    return str(x)


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _write_summary(path: str, lines: list[str]) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------- kernels

def cmd_kernels(cfg: RunConfig) -> int:
    grid, p, w = cfg.grid, cfg.params, cfg.weight
    rng = np.random.default_rng(cfg.seed)
    os.makedirs(cfg.out_dir, exist_ok=True)
    lines = [f"kernels report  grid={grid.points_per_axis}^3 "
             f"extent={grid.extent} seed={cfg.seed}"]

    # pinned point values of the closed-form kernel pieces
    pins = [
        ("loss_part v=0 u=e1", kernel_loss_part(np.zeros(3), np.eye(3)[0])[0, 0],
         np.pi),
        ("gain_part v=0 u=e1", kernel_gain_part(np.zeros(3), np.eye(3)[0])[0, 0],
         2 * np.pi),
        ("gain_part v=2e1 u=3e1",
         kernel_gain_part(2 * np.eye(3)[0], 3 * np.eye(3)[0])[0, 0],
         2 * np.pi * np.exp(-4.0)),
    ]
    _write_csv(os.path.join(cfg.out_dir, "kernel_points.csv"),
               ["name", "value", "reference", "abs_error"],
               [(n, v, r, abs(v - r)) for n, v, r in pins])
    lines.append("pinned point values: max |error| = %.3e"
                 % max(abs(v - r) for _, v, r in pins))

    # spherical-quadrature K vs closed-form matrix on random Gaussians
    K = assemble_k_closed_form(p, grid, weight=w)
    sph = cfg.raw["sphere"]
    try:
        ccfg = default_collision_config(grid, int(sph["n_polar"]),
                                        int(sph["n_azimuthal"]), p)
    except ValueError as exc:
        raise ValidationError(f"sphere: {exc}") from exc
    n_g = int(cfg.raw["kernels"]["n_gaussians"])
    ratios, rows = [], []
    for i in range(n_g):
        c = rng.uniform(-1.5, 1.5, size=3)
        s = rng.uniform(0.6, 1.5)
        f = np.exp(-((grid.nodes - c) ** 2).sum(1) / (2 * s * s))
        a = apply_k_spherical(f, p, ccfg)
        b = K.apply(f)
        num = weighted_l1_norm(a, w, grid)
        den = weighted_l1_norm(b, w, grid)
        ratios.append(num / den)
        rows.append((i, num, den, num / den))
    fitted = float(np.exp(np.mean(np.log(ratios))))
    dev = float(max(abs(r / fitted - 1.0) for r in ratios))
    _write_csv(os.path.join(cfg.out_dir, "kernel_cross_validation.csv"),
               ["index", "spherical_norm", "closed_form_norm", "ratio"], rows)
    lines.append(f"spherical/closed-form fitted constant = {fitted:.6g}")
    lines.append(f"max deviation from fitted constant = {dev:.3%} "
                 f"({'PASS' if dev <= 0.05 else 'FAIL'} vs 5%)")

    # empirical Upsilon_m: ||<v>^m K f|| / ||<v>^{m+1} f|| over random f
    vm2 = 1.0 + (grid.nodes ** 2).sum(1)
    ups_rows = []
    for m in cfg.raw["kernels"]["upsilon_m"]:
        wm = WeightSpec(m=float(m))
        wm1 = WeightSpec(m=float(m) + 1.0)
        best = 0.0
        for _ in range(int(cfg.raw["kernels"]["n_upsilon"])):
            f = rng.normal(size=grid.n_nodes) * np.exp(-0.5 * vm2)
            best = max(best, weighted_l1_norm(K.apply(f), wm, grid)
                       / weighted_l1_norm(f, wm1, grid))
        ups_rows.append((m, best))
    _write_csv(os.path.join(cfg.out_dir, "upsilon.csv"),
               ["m", "empirical_upsilon"], ups_rows)
    lines.append("empirical Upsilon_m: " + ", ".join(
        f"m={m}: {u:.4g}" for m, u in ups_rows))

    # delta constants table
    d_rows = []
    for m in (1, 2, 3):
        d = delta_constants(float(m), grid, p)
        d_rows.append((m, d.delta_m0, d.delta_m1, d.delta_m2_log10))
    _write_csv(os.path.join(cfg.out_dir, "delta_constants.csv"),
               ["m", "delta_m0", "delta_m1", "delta_m2_log10"], d_rows)

    _write_summary(os.path.join(cfg.out_dir, "summary.txt"), lines)
    return 0


# ---------------------------------------------------------------- spectrum

def cmd_spectrum(cfg: RunConfig) -> int:
    grid, p = cfg.grid, cfg.params
    os.makedirs(cfg.out_dir, exist_ok=True)
    K = assemble_k_closed_form(p, grid, weight=cfg.weight)
    lines = [f"spectrum report  grid={grid.points_per_axis}^3 "
             f"extent={grid.extent}"]
    for n in cfg.modes:
        L = assemble_ln(n, p, grid, k_matrix=K)
        rep = compute_spectrum(L)
        tag = "n=%d,%d,%d" % tuple(int(c) for c in n)
        fname = "eigenvalues_n%d_%d_%d.csv" % tuple(int(c) for c in n)
        _write_csv(os.path.join(cfg.out_dir, fname),
                   ["re", "im"],
                   [(z.real, z.imag) for z in
                    sorted(rep.eigenvalues, key=lambda z: (z.real, z.imag))])
        lines.append(f"{tag}: {len(rep.eigenvalues)} eigenvalues, "
                     f"null cluster {len(rep.null_cluster)} "
                     f"(radius {rep.grid_meta['cluster_radius']:.3e}), "
                     f"gap = {rep.gap:.6f} > 0")
    _write_summary(os.path.join(cfg.out_dir, "summary.txt"), lines)
    return 0


# ---------------------------------------------------------------- propagator

def cmd_propagator(cfg: RunConfig) -> int:
    grid, p, w = cfg.grid, cfg.params, cfg.weight
    prop = cfg.raw["propagator"]
    rng = np.random.default_rng(cfg.seed)
    os.makedirs(cfg.out_dir, exist_ok=True)
    K = assemble_k_closed_form(p, grid, weight=w)
    proj = build_projection(p, grid)
    lam = nu_min(p, grid)
    lines = [f"propagator report  grid={grid.points_per_axis}^3"]

    # decay fits per mode
    M = eval_maxwellian(p, grid.nodes)
    f = rng.normal(size=grid.n_nodes) * M
    window = tuple(float(x) for x in prop["fit_window"])
    ts = np.linspace(window[0], window[1], 25)
    fit_rows = []
    for n in cfg.modes:
        L = assemble_ln(n, p, grid, k_matrix=K)
        f0 = f - proj.apply(f) if not np.any(n) else f
        curve = semigroup_curve(L, ts, f0)
        if not np.any(n):
            curve = curve - np.array([proj.apply(u) for u in curve])
        norms = np.array([weighted_l1_norm(u, w, grid) for u in curve])
        fit = fit_decay(ts, norms, window=window)
        tag = "n=%d,%d,%d" % tuple(int(c) for c in n)
        marker = "" if fit.accepted else "  REJECTED"
        lines.append(f"decay {tag}: rate={fit.rate:.6f} "
                     f"amplitude={fit.amplitude:.4g} "
                     f"r2={fit.r_squared:.5f}{marker}")
        fit_rows.append((tag, fit.rate, fit.amplitude, fit.r_squared,
                         int(fit.accepted)))
    _write_csv(os.path.join(cfg.out_dir, "decay_fits.csv"),
               ["mode", "rate", "amplitude", "r_squared", "accepted"],
               fit_rows)

    # contour comparison at the first nonzero mode
    nz = [n for n in cfg.modes if np.any(n)]
    if nz:
        n = nz[0]
        ct = float(prop["contour_t"])
        L = assemble_ln(n, p, grid, k_matrix=K)
        gamma = contour_gamma(n, float(cfg.raw["contour"]["theta_factor"]) * lam,
                              float(cfg.raw["contour"]["psi"]), p, grid)
        ref = semigroup_apply(L, ct, f)
        got = contour_semigroup(L, gamma, proj, ct, f)
        rel = (weighted_l1_norm(got - ref, w, grid)
               / weighted_l1_norm(ref, w, grid))
        lines.append(f"contour vs expm at n={n.astype(int).tolist()}, "
                     f"t={ct}: rel error = {rel:.3e} "
                     f"({'PASS' if rel <= 1e-4 else 'FAIL'} vs 1e-4)")

    # oscillation lattice
    osc_rows = []
    for nn in prop["oscillation_modes"]:
        for t in prop["oscillation_times"]:
            osc_rows.append((nn, t, oscillation_norm(float(nn), float(t), K)))
    _write_csv(os.path.join(cfg.out_dir, "oscillation.csv"),
               ["n", "t", "norm"], osc_rows)

    # Duhamel ledger
    tgrid = np.linspace(0.25, 2.0, 8)
    led = duhamel_ledger(int(prop["duhamel_k_max"]),
                         nz[0] if nz else np.array([1.0, 0, 0]),
                         tgrid, f, K, weight=w)
    _write_csv(os.path.join(cfg.out_dir, "duhamel.csv"),
               ["k", "t", "norm"],
               [(k, t, led.norm_curves[k, j])
                for k in range(led.k_max + 1)
                for j, t in enumerate(led.t_grid)])

    _write_summary(os.path.join(cfg.out_dir, "summary.txt"), lines)
    return 0


# ---------------------------------------------------------------- simulate

def cmd_simulate(cfg: RunConfig) -> int:
    grid, p = cfg.grid, cfg.params
    integ = cfg.raw["integrator"]
    os.makedirs(cfg.out_dir, exist_ok=True)
    sph = integ["sphere"]
    dcfg = default_dynamics_config(grid, n_max=int(integ["n_max"]),
                                   n_polar=int(sph["n_polar"]),
                                   n_azimuthal=int(sph["n_azimuthal"]))
    try:
        fld = init_perturbation(p, integ["mode"], float(integ["amplitude"]),
                                shape=str(integ["shape"]), grid=grid,
                                n_max=int(integ["n_max"]))
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    dt = integ["dt"]
    run = run_relaxation(fld, float(integ["t_end"]),
                         None if dt is None else float(dt), dcfg)
    rows = []
    for i, t in enumerate(run.t_series):
        rows.append((t, run.distance_series[i], run.mass_series[i],
                     run.momentum_series[i][0], run.momentum_series[i][1],
                     run.momentum_series[i][2], run.energy_series[i],
                     run.controlling_series[i]))
    _write_csv(os.path.join(cfg.out_dir, "relaxation.csv"),
               ["t", "distance", "mass", "momentum1", "momentum2",
                "momentum3", "energy", "controlling"], rows)

    K = assemble_k_closed_form(p, grid)
    L = assemble_ln(np.asarray(integ["mode"], dtype=float), p, grid,
                    k_matrix=K)
    gap = compute_spectrum(L).gap
    ratio = run.fit.rate / gap
    msup = float(run.controlling_series.max() / run.controlling_series[0])
    lines = [
        f"simulate report  grid={grid.points_per_axis}^3 "
        f"t_end={integ['t_end']} amplitude={integ['amplitude']} "
        f"shape={integ['shape']}",
        f"target params: T={run.params.T:.6f} "
        f"mu={run.params.mu.tolist()}",
        f"fitted rate = {run.fit.rate:.6f} (r2 = {run.fit.r_squared:.5f})",
        f"linear gap(L_n) = {gap:.6f}; rate/gap = {ratio:.4f}",
        "conservation drift: " + ", ".join(
            f"{k}={v:.3e}" for k, v in sorted(run.conservation_drift.items())),
        f"controlling function at C0 = {run.c0_used:.6f}: "
        f"sup/initial = {msup:.4f} ({'bounded' if msup <= 3 else 'UNBOUNDED'})",
        f"positivity floor (relative) = {run.positivity_min:.3e}",
    ]
    _write_summary(os.path.join(cfg.out_dir, "summary.txt"), lines)
    return 0


# ---------------------------------------------------------------- driver

def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="artifact",
                                 description=__doc__.splitlines()[0])
    ap.add_argument("command",
                    choices=["kernels", "spectrum", "propagator", "simulate"])
    ap.add_argument("--config", default=None, help="YAML config path")
    ap.add_argument("--out", default="artifact_out", help="output directory")
    ap.add_argument("--quick", action="store_true",
                    help="9^3 grid, n_max=1, t_end=10")
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config, args.out, args.quick, args.seed)
        dispatch = {"kernels": cmd_kernels, "spectrum": cmd_spectrum,
                    "propagator": cmd_propagator, "simulate": cmd_simulate}
        return dispatch[args.command](cfg)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except (ValueError,) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except (RuntimeError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
