"""Atomistic chains with nearest and next-to-nearest neighbour interactions.

Discrete energies, effective potentials, continuum limits and first-order
diagnostics.
"""

from .axioms import AxiomReport, validate_axioms
from .continuum import (ContinuumProfile, InfHOpts, cap_and_relocate, crack_predictor_f, energy_h,
                        estimate_inf_h, euler_lagrange_residual, jump_discrepancy_check)
from .discrete import (ChainState, MinimizeOpts, energy_hn, gradient_hn, minimize_hn,
                       rescaled_energy)
from .effective import (EffectiveProfile, SearchParams, build_effective, certify_quadratic_lower_bound,
                        compute_j0, j0_star_star, residual_r)
from .errors import *  # noqa: F401,F403
from .gamma_dev import (build_competitors, build_even_odd, compactness_diagnostics,
                        first_order_lower_bound, jump_detect_sqrt_n, splitting_identity_check)
from .potentials import (SINGULAR, DeadLoad, LennardJones, LiveLoad, OneSidedQuartic, QuadraticWell,
                         TabulatedModel, ZeroLoad)
from .sweep import run_sweep

__version__ = "0.1.0"
