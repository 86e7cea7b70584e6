"""Change-point tests built on the sup and mu-weighted functionals of e'_n."""

from dataclasses import dataclass, field

import numpy as np

from .covariance import (
    CovarianceModel,
    THEOREM2_VARIANTS,
    limit_cov_theorem1,
    longrun_table,
)
from .data import EvalGrid, as_sample, dump_json
from .gaussian_limit import build_field, check_weights, exceedance_rank, functional_values, sample_paths
from .kernels import KernelModel, fit_components, make_kernel
from .uprocess import eval_e_prime_n, eval_en


@dataclass(frozen=True)
class MCSettings:
    """Monte Carlo and long-run covariance settings for a test run.

    ``covariance`` picks the limit covariance of e'_n: ``'derived'`` (default,
    matches simulation), or one of the printed variants kept for comparison.
    """

    m: int = 2000
    seed: int = 0
    max_lag: int = None
    taper: str = "bartlett"
    covariance: str = "derived"

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be positive")
        if self.covariance not in THEOREM2_VARIANTS:
            raise ValueError(f"covariance must be one of {sorted(THEOREM2_VARIANTS)}")


@dataclass(frozen=True)
class TestReport:
    statistic: float
    functional: str
    critical_value: float
    p_value: float
    n: int
    grid: EvalGrid
    argmax_t: float
    seed: int
    m: int
    alpha: float
    reject: bool
    diagnostics: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def to_dict(self):
        return {
            "statistic": self.statistic,
            "functional": self.functional,
            "critical_value": self.critical_value,
            "p_value": self.p_value,
            "n": self.n,
            "argmax_t": self.argmax_t,
            "seed": self.seed,
            "m": self.m,
            "alpha": self.alpha,
            "reject": self.reject,
            "grid": {
                "R": self.grid.R,
                "n": self.grid.n,
                "s_points": self.grid.s_points.tolist(),
                "t_index": self.grid.t_index.tolist(),
            },
            "diagnostics": self.diagnostics,
        }

    def to_json(self, path=None):
        return dump_json(self.to_dict(), path)

    def summary(self):
        verdict = "reject" if self.reject else "accept"
        return (f"{self.functional}: statistic={self.statistic:.6g} critical_value={self.critical_value:.6g} "
                f"p_value={self.p_value:.4g} argmax_t={self.argmax_t:.4g} n={self.n} m={self.m} -> {verdict}")


def _resolve_kernel(kernel):
    if isinstance(kernel, KernelModel):
        return kernel
    return make_kernel(kernel)


def _process_and_cov(sample, grid, mc, kernel, model):
    """The observed field and the covariance function of its limit."""
    cm = CovarianceModel("fitted", mc.max_lag, mc.taper, sample)
    if model is not None:
        model.require_components()
        vals = eval_en(sample, model, grid).values
        C = longrun_table(cm, model, grid.s_points)
        formula, label = limit_cov_theorem1, "en"
    else:
        k = _resolve_kernel(kernel)
        fitted = fit_components(k.kernel_only(), sample, grid.s_points)
        vals = eval_e_prime_n(sample, k, grid).values
        C = longrun_table(cm, fitted, grid.s_points)
        formula, label = THEOREM2_VARIANTS[mc.covariance], "en_prime"

    def cov_fn(s, t, s2, t2):
        return formula(t, t2, s, s2, C)

    return vals, cov_fn, C, label


def _run(sample, grid, alpha, mc, kernel, model, functional, weights):
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    sample = as_sample(sample)
    if grid is None:
        grid = EvalGrid.default(sample.n)
    if grid.n != sample.n:
        raise ValueError(f"grid built for n={grid.n}, sample has n={sample.n}")
    if functional == "integral_mu":
        weights = check_weights(weights, grid.s_points.size)
    vals, cov_fn, C, label = _process_and_cov(sample, grid, mc, kernel, model)

    if functional == "sup_abs":
        per_t = np.max(np.abs(vals), axis=0)
    else:
        per_t = weights @ vals**2
    col = int(np.argmax(per_t))  # first maximum, i.e. the smallest t on ties
    statistic = float(per_t[col])

    gfield = build_field(grid, cov_fn)
    sims = functional_values(sample_paths(gfield, mc.m, mc.seed), functional, weights)
    sims = np.sort(sims)
    q = exceedance_rank(alpha, mc.m)
    crit = float(sims[mc.m - q])
    exceed = int(np.count_nonzero(sims >= statistic))

    diagnostics = {
        "process": label,
        "jitter_used": gfield.jitter_used,
        "eigen_clipped": gfield.clipped,
        "covariance": "theorem1" if model is not None else mc.covariance,
        "max_lag": mc.max_lag,
        "taper": mc.taper,
    }
    if C.is_zero:
        diagnostics["degenerate_covariance"] = True
    return TestReport(
        statistic=statistic,
        functional=functional,
        critical_value=crit,
        p_value=exceed / mc.m,
        n=sample.n,
        grid=grid,
        argmax_t=float(grid.t_points[col]),
        seed=mc.seed,
        m=mc.m,
        alpha=float(alpha),
        reject=exceed < q,
        diagnostics=diagnostics,
    )


def sup_test(sample, grid=None, alpha=0.05, mc=MCSettings(), kernel="difference", model=None):
    """Test for a change point with the statistic max over the grid of |e'_n(s, t)|.

    Parameters
    ----------
    sample : SeriesSample or array_like
    grid : EvalGrid, optional
        Defaults to :meth:`EvalGrid.default` for the sample size.
    alpha : float
        Level in (0, 1).
    mc : MCSettings
    kernel : str or KernelModel
        Built-in name or a model; only g is used, the components are
        re-estimated from the sample.
    model : KernelModel, optional
        A model with known components.  If given, the test uses e_n with
        the known theta and the matching limit covariance instead.

    Returns
    -------
    TestReport
        ``reject`` holds exactly when ``statistic > critical_value``, which
        holds exactly when ``p_value < alpha``.  If the fitted long-run
        covariance is identically zero the limit is degenerate, every
        simulated value is 0 and a nonzero statistic gets p-value 0; the
        report then carries ``diagnostics['degenerate_covariance']``.
    """
    return _run(sample, grid, alpha, mc, kernel, model, "sup_abs", None)


def integral_test(sample, grid=None, mu_weights=None, alpha=0.05, mc=MCSettings(),
                  kernel="difference", model=None):
    """Test with the statistic max_t sum_k w_k e'_n(s_k, t)^2.

    ``mu_weights`` discretizes the measure mu on the s-grid; it must be
    non-negative with at least one positive entry.  Other arguments as in
    :func:`sup_test`.
    """
    if mu_weights is None:
        raise ValueError("mu_weights is required")
    return _run(sample, grid, alpha, mc, kernel, model, "integral_mu", mu_weights)
