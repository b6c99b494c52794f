"""Separation-of-variables numerics for the SL(2,R) spin chain and the open Toda chain."""

from .errors import DegeneratePointError, DomainError, EvaluationError, PoleError, UsageError
from .cgamma import abs_gamma_sq, gamma, gamma_ratio, log_gamma, log_gamma_ratio
from .quad import (QuadSpec, Estimate, cauchy_derivatives, extrapolate_to_zero, integrate_cube,
                   integrate_halfplane, integrate_line, integrate_nested)
from .measures import (ChainConfig, SpectralVector, mu_A, mu_A_total_mass, mu_asymptotic, mu_B, mu_BB,
                       mu_coord, mu_toda)
from .gustafson import ParamSet, first_lhs, first_rhs, reduced_lhs, reduced_rhs, second_lhs, second_rhs
from .toda import psi_toda, toda_completeness_kernel, toda_orthogonality_kernel
from .spinchain import (EigenfunctionQuery, eigen_residual, lambda_factor, monodromy_apply, norm_const,
                        overlap_AA_closed, overlap_B_AxA_closed, overlap_BA_closed, overlap_BB_closed,
                        overlap_UpsilonPhi_closed, phi_eval, propagator_D, psi_eval, psi_momentum_kernel,
                        reproducing_kernel, upsilon_eval)
from .deltafam import (RegulatorSchedule, TestFunction, convergence_study, kernel_Ctilde, kernel_cosh, kernel_S,
                       sokhotsky_check, weak_pairing, weight_W)

__version__ = "0.1.0"
