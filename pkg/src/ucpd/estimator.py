"""scikit-learn style front end over the functional API."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .changepoint import MCSettings, integral_test, sup_test
from .data import FIELD_LABELS, EvalGrid, SeriesSample
from .kernels import fit_components, make_kernel
from .uprocess import FIELD_EVALUATORS


def check_series(X):
    """Validate a univariate series given as a 1-D array or a single column.

    Returns a :class:`SeriesSample`.
    """
    if isinstance(X, SeriesSample):
        return X
    arr = check_array(X, ensure_2d=False, dtype=np.float64, ensure_min_samples=2)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ValueError(f"expected a single series (one column), got shape {arr.shape}")
        arr = arr[:, 0]
    return SeriesSample(arr)


def _grid_for(est, n):
    if est.t_points is not None:
        s = EvalGrid.default(n, est.R, est.s_count).s_points
        return EvalGrid.from_t_points(s, est.t_points, n, est.R)
    return EvalGrid.default(n, est.R, est.s_count, est.t_stride)


class UProcessTransformer(BaseEstimator, TransformerMixin):
    """Map a series to one of the U-process fields on an (s, t) grid.

    Parameters
    ----------
    label : str
        Field to return, one of ``FIELD_LABELS``.
    kernel : str
        Built-in kernel name.
    marginal : str
        Marginal assumed by closed-form components.
    components : {'closed_form', 'fitted'}
        Where h1, h2 and theta come from.  ``'fitted'`` estimates them from
        the series passed to :meth:`fit`.
    R, s_count, t_stride, t_points
        Grid settings, see :meth:`EvalGrid.default`.
    """

    def __init__(self, label="en_prime", kernel="difference", marginal="uniform01",
                 components="closed_form", R=1.0, s_count=None, t_stride=1, t_points=None):
        self.label = label
        self.kernel = kernel
        self.marginal = marginal
        self.components = components
        self.R = R
        self.s_count = s_count
        self.t_stride = t_stride
        self.t_points = t_points

    def fit(self, X, y=None):
        if self.label not in FIELD_LABELS:
            raise ValueError(f"label must be one of {FIELD_LABELS}")
        if self.components not in ("closed_form", "fitted"):
            raise ValueError("components must be 'closed_form' or 'fitted'")
        sample = check_series(X)
        model = make_kernel(self.kernel, self.marginal)
        if self.components == "fitted":
            model = fit_components(model.kernel_only(), sample)
        self.model_ = model
        self.n_ = sample.n
        return self

    def transform(self, X):
        """Field values, shape ``(|S|, |T|)``; the grid is kept in ``grid_``."""
        check_is_fitted(self, "model_")
        sample = check_series(X)
        self.grid_ = _grid_for(self, sample.n)
        return np.array(FIELD_EVALUATORS[self.label](sample, self.model_, self.grid_).values)


class ChangePointDetector(BaseEstimator):
    """Single change-point test with a location estimate.

    :meth:`fit` runs the test; :meth:`predict` labels each observation with
    its segment (0 before the estimated change, 1 after), or all 0 when the
    null is not rejected.
    """

    def __init__(self, functional="sup_abs", alpha=0.05, kernel="difference", mu=None,
                 m=2000, seed=0, max_lag=None, taper="bartlett", covariance="derived",
                 R=1.0, s_count=None, t_stride=1, t_points=None):
        self.functional = functional
        self.alpha = alpha
        self.kernel = kernel
        self.mu = mu
        self.m = m
        self.seed = seed
        self.max_lag = max_lag
        self.taper = taper
        self.covariance = covariance
        self.R = R
        self.s_count = s_count
        self.t_stride = t_stride
        self.t_points = t_points

    def fit(self, X, y=None):
        sample = check_series(X)
        grid = _grid_for(self, sample.n)
        mc = MCSettings(self.m, self.seed, self.max_lag, self.taper, self.covariance)
        if self.functional == "sup_abs":
            report = sup_test(sample, grid, self.alpha, mc, self.kernel)
        elif self.functional == "integral_mu":
            report = integral_test(sample, grid, self.mu, self.alpha, mc, self.kernel)
        else:
            raise ValueError("functional must be 'sup_abs' or 'integral_mu'")
        self.report_ = report
        self.statistic_ = report.statistic
        self.p_value_ = report.p_value
        self.reject_ = report.reject
        self.change_point_ = report.argmax_t
        self.n_ = sample.n
        return self

    def predict(self, X=None):
        check_is_fitted(self, "report_")
        n = self.n_ if X is None else check_series(X).n
        labels = np.zeros(n, dtype=int)
        if self.reject_:
            labels[int(round(self.change_point_ * n)):] = 1
        return labels

    def fit_predict(self, X, y=None):
        return self.fit(X).predict()
