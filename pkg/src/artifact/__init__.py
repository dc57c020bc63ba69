"""Numerical study of relaxation to equilibrium for the spatially
inhomogeneous hard-sphere Boltzmann equation on the 3-torus.

Layers:

* grid / maxwell — velocity lattice, quadrature, equilibria, moments.
* collision — the bilinear hard-sphere operator Q(f, g) and frequency nu.
* linop — the linearized operator: closed-form kernels, dense matrices of
  K and L_n, the null-space projection P.
* spectra — eigenvalues, spectral gaps, contours, resolvent norms, and the
  weighted smallness constants delta_{m,.}.
* semigroup — propagators e^{-t L_n}: matrix exponentials, the contour
  representation, Duhamel iterates, oscillation norms, decay fits.
* dynamics — nonlinear mode-truncated time evolution with conservation,
  positivity, and relaxation-rate monitors.
* cli — experiment driver emitting CSV reports.
"""

from .grid import (SphereQuadrature, VelocityGrid, WeightSpec, make_grid,
                   make_sphere_quadrature, moments, weighted_l1_norm)
from .maxwell import (MaxwellParams, NullBasis, X_VOLUME, eval_maxwellian,
                      match_moments, null_basis)
from .collision import (CollisionConfig, apply_q, apply_q_raw,
                        default_collision_config, eval_nu, nu_min,
                        nu_quadrature, project_invariants)
from .linop import (KERNEL_NORMALIZATION, OperatorMatrix, ProjectionP,
                    apply_k_spherical, apply_projection, assemble_k_closed_form,
                    assemble_k_zeta_n, assemble_ln, build_projection,
                    kernel_gain_part, kernel_loss_part, kernel_values,
                    symmetrized_entries)
from .spectra import (ContourGamma, DeltaConstants, SpectrumReport,
                      compute_spectrum, contour_gamma, default_psi,
                      delta_constants, delta_m1_closed_form,
                      delta_m1_maximized, delta_m2_log10, multiplier_fit,
                      resolvent_norm, spectral_gap)
from .semigroup import (DecayFit, DuhamelLedger, OscillationEvaluator,
                        contour_semigroup, duhamel_ledger, duhamel_term,
                        fit_decay, oscillation_norm, semigroup_apply,
                        semigroup_curve)
from .dynamics import (DynamicsConfig, ModeField, RelaxationRun,
                       controlling_function, default_dynamics_config,
                       init_perturbation, rhs, run_relaxation, step_rk4)

__version__ = "0.1.0"
