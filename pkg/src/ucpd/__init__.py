"""Two-sample U-process change-point toolkit for dependent series."""

from .changepoint import MCSettings, TestReport, integral_test, sup_test
from .covariance import (
    CovarianceModel,
    LongRunCovariance,
    limit_cov_theorem1,
    limit_cov_theorem2,
    longrun_table,
    weighted_sum_limit,
)
from .data import EvalGrid, MalformedInputError, ProcessField, SeriesSample
from .datagen import GeneratorSpec, generate, inject_change
from .estimator import ChangePointDetector, UProcessTransformer, check_series
from .gaussian_limit import GaussianField, build_field, critical_value, sample_paths
from .kernels import (
    ComponentsUnavailableError,
    KernelModel,
    fit_components,
    hoeffding_components,
    make_kernel,
)
from .uprocess import (
    eval_e_prime_n,
    eval_en,
    eval_Rn,
    eval_Rn_prime,
    eval_Wn,
    eval_Wn_prime,
    monotone_split,
    telescope_degenerate,
)
from .validation import validate_convergence

__version__ = "0.1.0"
