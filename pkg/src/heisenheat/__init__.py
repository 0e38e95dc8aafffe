"""Numerical laboratory for the semilinear heat equation on the Heisenberg group."""
__version__ = "0.1.0"

from .group import (GroupParams, GroupPoint, compose, dilate, distance, fujita_exponent,
                    gauge, identity, inverse)
from .grid import (DivergedFieldError, GridSpec, ScalarField, group_convolve, integrate,
                   interpolate, read_hfield, sample, weighted_sup_norm, write_hfield)
from .sublaplacian import (StencilReport, apply_sublaplacian, apply_vector_field,
                           stability_timestep, sum_of_squares_apply)
from .heat import (KernelSnapshot, check_scaling_identity, check_semigroup, fit_gaussian_sandwich,
                   heat_kernel, heat_kernels, propagate_linear)
from .solver import SolverConfig, TrajectoryRecord, initial_datum, run, step
from .mild import (SpaceTimeField, WeightedNormParams, check_duhamel_bound, check_linear_decay,
                   contraction_probe, norm_X, phi_operator, picard_solve)
from .certificates import (BumpPair, CertificateReport, derivative_bound_check, functionals_phi,
                           functionals_psi, lemma_g_check, make_bumps, phi_R_eval, psi_R_eval,
                           subcritical_exponent, subcritical_inequality_check)
from .sweep import SweepConfig, SweepResult, classify_regime, grid_policy, run_sweep, theory_slope
from .estimators import LifespanScalingRegressor
