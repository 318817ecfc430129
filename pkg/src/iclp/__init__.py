"""Pure differential privacy for functional summaries.

Releases epsilon-DP versions of mean functions, kernel density estimates,
covariance surfaces, and function-on-scalar regression coefficients by
perturbing them with an independent component Laplace process whose
coefficient scales follow the eigenvalues of a chosen covariance kernel.
"""

from .errors import (ConfigError, DataError, DegenerateKernelError,
                     GridMismatchError, IclpError, ParseError,
                     PrivacyInfeasibleError)
from .grid import (FunctionOnGrid, GridSpec, inner_product, l2_distance,
                   l2_norm, load_csv, save_csv, unit_interval_grid)
from .kernels import KernelSpec, gram, kernel_value, power_kernel_values, \
    trace_normalized
from .mechanisms import (FosRelease, MechanismConfig, SanitizedRelease,
                         clip_to_tau, dp_covariance, dp_fos_regression,
                         dp_kde, frl_mean, gp_adp_mean, iclp_ar_mean,
                         iclp_qr_mean, mean_release_max_log_ratio,
                         rerm_sensitivity, sanitize_mean,
                         worst_case_neighbors)
from .noise import (NoiseDraw, PrivacyBudget, calibrate, child_seed,
                    dp_ratio_check, max_laplace_log_ratio, sample_gp,
                    sample_iclp)
from .selection import PssChoice, cv_psi, default_cv_grid, fit_decay, \
    pss_frl, pss_qr
from .spectral import (SpectralBasis, cameron_martin_norm, decompose,
                       partial_trace, power_norm, project, reconstruct,
                       weighted_l1_norm)

__version__ = "0.1.0"
