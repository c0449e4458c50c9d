"""Schrodinger bridge scaling of stochastic matrices and quantum channels."""

from .classical import (ClassicalSolution, NonnegMatrix, check_aat_irreducible,
                        check_fully_indecomposable, jacobian_F, pattern_feasibility, phi_A,
                        phi_A_alpha, solve_classical)
from .config import SolverConfig
from .diagnostics import (contraction_kappa, d_alpha_bounds, estimate_ab, jacobian_P,
                          probe_uniqueness)
from .linalg import (band_of, hermitian_eig, hilbert_distance, pd_inv_sqrt, psd_sqrt,
                     traceless_basis)
from .quantum import (BridgeSolution, GPCertificate, KrausMap, apply, apply_dual,
                      build_scaled_channel, d_alpha, diagonal_embedding, gp_certificate, phi_map,
                      random_channel, solve_fixed_point, tilde_Q)

__version__ = "0.1.0"
