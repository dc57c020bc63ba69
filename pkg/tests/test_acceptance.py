"""End-to-end acceptance criteria.

Each test evaluates one numbered criterion and prints a single
"ACCEPTANCE <n>: PASS/FAIL" line with per-clause details.  Tests are
deliberately not weakened when a clause fails on the supported grids; failing
clauses are analyzed in the project notes and README.

Run with `pytest tests/test_acceptance.py -v -s`.  Several criteria assemble
15^3 and 19^3 kernel matrices; the first run populates the on-disk cache and
is much slower than subsequent ones.
"""

import time

import numpy as np
import pytest

from artifact import (MaxwellParams, WeightSpec, apply_k_spherical, apply_q,
                      assemble_k_closed_form, assemble_ln, build_projection,
                      compute_spectrum, contour_gamma, contour_semigroup,
                      default_collision_config, default_dynamics_config,
                      delta_constants, delta_m1_closed_form,
                      delta_m1_maximized, delta_m2_log10, eval_maxwellian,
                      eval_nu, fit_decay, init_perturbation, kernel_gain_part,
                      kernel_loss_part, make_grid, moments, null_basis,
                      nu_min, oscillation_norm, run_relaxation,
                      semigroup_apply, semigroup_curve, weighted_l1_norm)
from artifact.linop import symmetrized_entries
from artifact import semigroup

import conftest

E1 = np.array([1.0, 0.0, 0.0])
W0 = WeightSpec()

pytestmark = pytest.mark.acceptance


def _report(num: int, clauses: list) -> None:
    ok = all(good for _, good, _ in clauses)
    detail = "; ".join(f"{name}: {'ok' if good else 'FAIL'} ({info})"
                       for name, good, info in clauses)
    line = f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} -- {detail}"
    print("\n" + line)
    conftest.ACCEPTANCE_LINES.append(line)
    assert ok, f"criterion {num} failing clauses: " + "; ".join(
        name for name, good, _ in clauses if not good)


@pytest.fixture(scope="module")
def p():
    return MaxwellParams()


@pytest.fixture(scope="module")
def g9():
    return make_grid(9, 4.5)


@pytest.fixture(scope="module")
def g15():
    return make_grid(15, 4.5)


@pytest.fixture(scope="module")
def k9(p, g9):
    return assemble_k_closed_form(p, g9)


@pytest.fixture(scope="module")
def k15(p, g15):
    return assemble_k_closed_form(p, g15)


def _null_residuals(p, grid, k_matrix):
    L0 = assemble_ln(np.zeros(3), p, grid, k_matrix=k_matrix)
    nu = eval_nu(p, grid.nodes)
    out = []
    for b in null_basis(p, grid):
        out.append(weighted_l1_norm(L0.apply(b), W0, grid)
                   / weighted_l1_norm(nu * b, W0, grid))
    return np.array(out)


def test_criterion_1_equilibrium(p, g15):
    cfg = default_collision_config(g15, 16, 32, p)
    M = eval_maxwellian(p, g15.nodes)
    t0 = time.time()
    out = apply_q(M, M, cfg)
    elapsed = time.time() - t0
    num = weighted_l1_norm(out, W0, g15)
    den = weighted_l1_norm(eval_nu(p, g15.nodes) * M, W0, g15)
    _report(1, [
        ("||Q(M,M)|| <= 1e-3 ||nu M||", num <= 1e-3 * den,
         f"ratio {num / den:.2e}"),
        ("runtime <= 60 s", elapsed <= 60.0, f"{elapsed:.1f} s"),
    ])


def test_criterion_2_collision_invariants(p, g9):
    cfg = default_collision_config(g9, 8, 16, p)
    M = eval_maxwellian(p, g9.nodes)
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(20):
        f = np.zeros(g9.n_nodes)
        for _ in range(rng.integers(2, 4)):
            c = rng.uniform(-1.0, 1.0, size=3)
            s = rng.uniform(0.8, 1.4)
            f += rng.uniform(0.2, 1.0) * M * np.exp(
                -((g9.nodes - c) ** 2).sum(1) / (2 * s * s))
        out = apply_q(f, f, cfg)
        mass, momentum, energy = moments(out, g9)
        scale = weighted_l1_norm(f, W0, g9) ** 2
        worst = max(worst, abs(mass) / scale,
                    float(np.max(np.abs(momentum))) / scale,
                    abs(energy) / scale)
    _report(2, [
        ("invariant moments <= 1e-6 x ||f||^2 (20 mixtures)", worst <= 1e-6,
         f"max {worst:.2e}"),
    ])


def test_criterion_3_null_space(p, g15, k15):
    res15 = _null_residuals(p, g15, k15)
    g19 = make_grid(19, 4.5)
    k19 = assemble_k_closed_form(p, g19)
    res19 = _null_residuals(p, g19, k19)
    _report(3, [
        ("all ||L0 b|| <= 5e-3 relative at 15^3", np.all(res15 <= 5e-3),
         f"max {res15.max():.2e}"),
        ("max residual decreases >= 2x at 19^3",
         res19.max() <= res15.max() / 2.0,
         f"{res15.max():.2e} -> {res19.max():.2e}"),
    ])


def test_criterion_4_spectral_gap(p, g15, k15):
    t0 = time.time()
    rep0 = compute_spectrum(assemble_ln(np.zeros(3), p, g15, k_matrix=k15))
    t_dense = time.time() - t0

    g19 = make_grid(19, 4.5)
    k19 = assemble_k_closed_form(p, g19)
    t0 = time.time()
    rep19 = compute_spectrum(assemble_ln(np.zeros(3), p, g19, k_matrix=k19))
    t_iter = time.time() - t0
    # a failing assert pins this frame's locals for the rest of the session;
    # release the 19^3 matrix so later tests keep their memory headroom
    del k19

    mode_ok, mode_info = True, []
    for n in (E1, 2 * E1):
        rep = compute_spectrum(assemble_ln(n, p, g15, k_matrix=k15))
        min_re = float(np.min(rep.eigenvalues.real))
        mode_info.append(f"n={int(n[0])}e1 min Re {min_re:.5f}")
        if min_re < 0.8 * rep0.gap:
            mode_ok = False

    _report(4, [
        ("5-eigenvalue cluster at 0, gap > 0",
         len(rep0.null_cluster) == 5 and rep0.gap > 0,
         f"cluster {len(rep0.null_cluster)}, gap {rep0.gap:.5f}"),
        ("modes e1, 2e1 clear 0.8 x gap of the imaginary axis", mode_ok,
         f"threshold {0.8 * rep0.gap:.5f}; " + ", ".join(mode_info)),
        ("gap stable within 20% at 19^3",
         abs(rep19.gap - rep0.gap) <= 0.2 * rep0.gap,
         f"{rep0.gap:.5f} -> {rep19.gap:.5f}"),
        ("3375-dim eigendecomposition <= 10 min", t_dense <= 600.0,
         f"{t_dense:.0f} s"),
        ("iterative 19^3 mode <= 2 min", t_iter <= 120.0, f"{t_iter:.0f} s"),
    ])


def test_criterion_5_semigroup_decay(p, g9, k9):
    L0 = assemble_ln(np.zeros(3), p, g9, k_matrix=k9)
    gap = compute_spectrum(L0).gap
    M = eval_maxwellian(p, g9.nodes)
    rng = np.random.default_rng(42)
    f = rng.normal(size=g9.n_nodes) * M

    # (1 - P) via the Riesz projection of the discrete operator: remove the
    # computed null-cluster eigencomponents exactly, so the fitted late-time
    # rate is the spectral gap rather than the projection-residual floor
    S = symmetrized_entries(L0)
    lam, V = np.linalg.eig(S)
    cluster = np.argsort(np.abs(lam))[:5]
    coef = np.linalg.solve(V, f / np.sqrt(M))
    coef[cluster] = 0.0
    f0 = (V @ coef).real * np.sqrt(M)

    # the window starts late: the essential spectrum decays at Lambda ~ 0.0286
    # and must clear the gap mode (~ 0.0202) before the rate is readable
    ts = np.linspace(300.0, 600.0, 25)
    norms = np.array([weighted_l1_norm(u, W0, g9)
                      for u in semigroup_curve(L0, ts, f0)])
    fit = fit_decay(ts, norms, window=(300.0, 600.0))

    mode_fits = []
    for n in (E1, 2 * E1, 4 * E1):
        L = assemble_ln(n, p, g9, k_matrix=k9)
        ms = np.linspace(1.0, 8.0, 25)
        mnorms = np.array([weighted_l1_norm(u, W0, g9)
                           for u in semigroup_curve(L, ms, f)])
        mode_fits.append(fit_decay(ms, mnorms, window=(1.0, 8.0)))

    _report(5, [
        ("L0 rate matches gap within 15%", abs(fit.rate - gap) <= 0.15 * gap,
         f"rate {fit.rate:.5f} vs gap {gap:.5f}"),
        ("r^2 >= 0.99", fit.r_squared >= 0.99, f"{fit.r_squared:.5f}"),
        ("modes e1, 2e1, 4e1 positive rate",
         all(m.rate > 0 for m in mode_fits),
         ", ".join(f"{m.rate:.4f}" for m in mode_fits)),
    ])


def test_criterion_6_contour_representation(p, g9, k9):
    L = assemble_ln(E1, p, g9, k_matrix=k9)
    M = eval_maxwellian(p, g9.nodes)
    rng = np.random.default_rng(6)
    f = rng.normal(size=g9.n_nodes) * M
    gamma = contour_gamma(E1, 0.05 * nu_min(p, g9), 4.0, p, g9)
    t0 = time.time()
    got = contour_semigroup(L, gamma, None, 1.0, f)
    elapsed = time.time() - t0
    ref = semigroup_apply(L, 1.0, f)
    rel = (weighted_l1_norm(got - ref, W0, g9)
           / weighted_l1_norm(ref, W0, g9))
    _report(6, [
        ("contour vs expm <= 1e-4 relative", rel <= 1e-4, f"{rel:.2e}"),
        ("runtime <= 5 min", elapsed <= 300.0, f"{elapsed:.0f} s"),
    ])


def test_criterion_7_oscillation_trend(p, g9, k9):
    ns = [0, 1, 2, 4, 8]
    ts = [0.5, 1.0, 2.0, 4.0]
    lam = nu_min(p, g9)
    vals = {(n, t): oscillation_norm(float(n), t, k9)
            for n in ns for t in ts}
    # the module-level evaluator cache holds two ~200 MB fine-grid kernel
    # factors; release them before the remaining criteria run
    semigroup._EVALUATOR_CACHE.clear()

    mono = all(vals[(a, t)] >= vals[(b, t)]
               for t in (1.0, 2.0) for a, b in zip(ns, ns[1:]))

    # log-space least squares for C in val ~ C e^{-Lambda t} / (1 + |n| t)
    logs = np.array([np.log(vals[(n, t)]) for n in ns for t in ts])
    model = np.array([-lam * t - np.log1p(n * t) for n in ns for t in ts])
    log_c = float(np.mean(logs - model))
    resid = logs - (model + log_c)
    r2 = 1.0 - float((resid ** 2).sum()) / float(
        ((logs - logs.mean()) ** 2).sum())

    _report(7, [
        ("norm nonincreasing in |n| at t in {1, 2}", mono, "lattice scan"),
        ("log-space fit R^2 >= 0.9", r2 >= 0.9,
         f"R^2 {r2:.4f}, C {np.exp(log_c):.3e}"),
    ])


def test_criterion_8_delta_constants(p, g15):
    closed_ok = all(
        abs(delta_m1_closed_form(m) - delta_m1_maximized(m)) <= 1e-12
        for m in (1, 2, 4, 8, 16))
    d0 = [delta_constants(float(m), g15, p).delta_m0 for m in (1, 2, 3)]
    d0_mono = all(a >= b for a, b in zip(d0, d0[1:]))
    # delta_{m,2} compared in log10 (the values overflow float64 quickly)
    d2 = [delta_m2_log10(m) for m in (4, 8, 16)]
    d2_mono = all(a >= b for a, b in zip(d2, d2[1:]))
    _report(8, [
        ("delta_{1,1} = 0.5 exactly", delta_m1_closed_form(1) == 0.5,
         f"{delta_m1_closed_form(1)!r}"),
        ("closed form vs maximization <= 1e-12", closed_ok, "m in {1,2,4,8,16}"),
        ("delta_{m,0} nonincreasing over {1,2,3}", d0_mono,
         " -> ".join(f"{x:.3e}" for x in d0)),
        ("delta_{m,2} nonincreasing over {4,8,16}", d2_mono,
         "log10 " + " -> ".join(f"{x:.1f}" for x in d2)),
    ])


def test_criterion_9_nonlinear_relaxation(p):
    # quick-profile timing clause first (9^3, n_max = 1, t_end = 10)
    g9q = make_grid(9, 4.5)
    cfg9 = default_dynamics_config(g9q)
    t0 = time.time()
    fld9 = init_perturbation(p, E1, 0.1, shape="slow_mode", grid=g9q)
    run_relaxation(fld9, 10.0, None, cfg9)
    t_quick = time.time() - t0

    # the measured run: 11^3, t_end = 20, amplitude 0.1, single spatial mode
    g11 = make_grid(11, 4.5)
    cfg11 = default_dynamics_config(g11)
    fld = init_perturbation(p, E1, 0.1, shape="slow_mode", grid=g11)
    run = run_relaxation(fld, 20.0, None, cfg11)
    k11 = assemble_k_closed_form(p, g11)
    gap = compute_spectrum(assemble_ln(E1, p, g11, k_matrix=k11)).gap

    drift = max(run.conservation_drift.values())
    msup = float(run.controlling_series.max() / run.controlling_series[0])
    _report(9, [
        ("conservation drift <= 1e-8", drift <= 1e-8, f"{drift:.2e}"),
        ("log-linear decay r^2 >= 0.98", run.fit.r_squared >= 0.98,
         f"{run.fit.r_squared:.5f}"),
        ("rate within 25% of linear gap",
         abs(run.fit.rate - gap) <= 0.25 * gap,
         f"rate {run.fit.rate:.5f} vs gap {gap:.5f}"),
        ("controlling function sup/initial <= 3", msup <= 3.0, f"{msup:.3f}"),
        ("quick profile <= 15 min", t_quick <= 900.0, f"{t_quick:.0f} s"),
    ])


def test_criterion_10_kernel_cross_validation(p, g15, k15):
    z = np.zeros(3)
    pin_err = max(
        abs(kernel_loss_part(z, E1)[0, 0] - np.pi),
        abs(kernel_gain_part(z, E1)[0, 0] - 2 * np.pi),
        abs(kernel_gain_part(2 * E1, 3 * E1)[0, 0] - 2 * np.pi * np.exp(-4.0)))

    cfg = default_collision_config(g15, 16, 32, p)
    M = eval_maxwellian(p, g15.nodes)
    rng = np.random.default_rng(0)
    pairs = []
    for _ in range(10):
        c = rng.uniform(-1.0, 1.0, size=3)
        s = rng.uniform(1.0, 1.6)
        f = M * np.exp(-((g15.nodes - c) ** 2).sum(1) / (2 * s * s))
        pairs.append((apply_k_spherical(f, p, cfg), k15.apply(f)))
    a = np.concatenate([x for x, _ in pairs])
    b = np.concatenate([y for _, y in pairs])
    qw = np.tile(g15.quad_weights, 10)
    const = float((qw * a * b).sum() / (qw * b * b).sum())
    dev = max(weighted_l1_norm(x - const * y, W0, g15)
              / weighted_l1_norm(const * y, W0, g15) for x, y in pairs)

    _report(10, [
        ("agreement up to one fitted constant, <= 5% deviation", dev <= 0.05,
         f"constant {const:.4f}, max dev {dev:.3%}"),
        ("pinned kernel values to 1e-10", pin_err <= 1e-10,
         f"max err {pin_err:.1e}"),
    ])
