"""Isoperimetric, capacitary and Orlicz-Sobolev inequalities for 1-D measures."""

from .measure import (BUILTINS, GridFunction, ModelMeasure1D, double_well, expectation_of,
                      gaussian, make_builtin, median_of, p_exponential, power_alpha, tabulated,
                      uniform_interval)
from .orlicz import (NFunction, dual_norm, orlicz_norm, phi_q, power, recentering_ratio,
                     weak_orlicz_norm)
from .profiles import (ProfileTable, cap1_grid_oracle, cap1_profile, capq_grid_oracle,
                       capq_halfline, capq_profile, d_lin_estimate, iso_profile, iso_tilde)
from .report import VerificationReport
from .semigroup import SemigroupSolver, evolve, isoperimetric_via_semigroup, spectral_gap
from .transitions import (ConstantSet, HypothesisError, InequalityConstant, K_const,
                          cap_to_orlicz_bracket, capacity_constant, converse_constant_C,
                          converse_iso_bound, equivalence_report, forward_constant_B,
                          forward_theorem_check, gamma_const, lift_capacity, orlicz_to_cap,
                          replay_iso_bound, semigroup_chain_constants)

__all__ = [name for name in dir() if not name.startswith("_")]
