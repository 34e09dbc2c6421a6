"""stabmor: stability-preserving Galerkin model order reduction.

Sparse ODE systems ``E x' = A x + B u, y = C x`` are reduced with a Krylov
basis ``V`` and a left projection ``W = M E V`` built from the solution
``M`` of ``A^T M E + E^T M A + I = 0``. ``W`` is approximated by
quadrature of a frequency-domain integral so ``M`` is never formed.
Stable descriptor systems are first regularised into stable ODE systems.
"""

__version__ = "0.1.0"

from .arnoldi import (ArnoldiInfo, ExpansionPoint, ProjectionPair, arnoldi_basis,
                      biorthogonalize, multipoint_basis)
from .dae import (RegularisationConfig, properness_probe, regularisation_error_sweep,
                  regularize)
from .exceptions import *  # noqa: F401,F403
from .io import (RunRecord, SystemManifest, load_manifest, load_matrix_market,
                 load_system, save_system, write_matrix_market)
from .linalg import generalized_eigenvalues, lu_factor, lu_solve_multi
from .quadrature import (AdaptiveConfig, MidpointRefinement, QuadratureRule,
                         adaptive_gk15, gauss_legendre_rule, graded_breakpoints,
                         nested_midpoint_sequence)
from .stabilize import (certify_perturbation_bound, lyapunov_dense_oracle, mtilde_dense,
                        stability_sweep, stabilized_projection)
from .system import (FrequencyGrid, ReducedModel, SparseSystem, StabilityReport,
                     frequency_response, h2_norm, is_asymptotically_stable,
                     reduce_with_pair, relative_h2_error, spectral_abscissa,
                     transfer_eval)
