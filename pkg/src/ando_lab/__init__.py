"""Model-based dilations and norm bounds for commuting contractive matrices."""

__version__ = "0.1.0"

from .bounds import (BoundConfig, BoundEngine, BoundReport, bound_am3, bound_general,
                     bound_min_both_orders, bound_two_unitary_exact, bound_unitary_pure, verify_chain)
from .cmatrix import DEFAULT_TOL, Tolerances, hermitian_sqrt, operator_norm, unitary_completion
from .contraction import (CommutingPair, RowContraction, StructureDecomposition, commuting_pair, defect,
                          is_pure, row_contraction, structure_decomposition, unitary_cnu_split)
from .dilation import (TransferFunction, UnitaryColligation, ando_dilation_pair, commutant_lift,
                       intertwining_isometry, isometry_condition_check, transfer_eval_at_matrix,
                       transfer_eval_scalar, transfer_series_fock, unitary_extension,
                       verify_intertwining_dilation)
from .errors import *  # noqa: F401,F403
from .fock import (MultiAnalyticOp, TruncatedFock, constrained_projection_symmetric, creation_matrix,
                   poisson_kernel)
from .model_space import (BlaschkeData, ModelSpace, build_model_space, constrained_poisson_kernel_1d,
                          minimal_polynomial)
from .polynomial import (BivariatePolyMatrix, FreePoly, HereditaryPoly, eval_bivariate, eval_free,
                         eval_hereditary, fejer_smooth, torus_sup_norm)
