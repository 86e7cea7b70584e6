"""Monte Carlo convergence study of sup|e'_n| towards its Gaussian limit."""

from concurrent.futures import ThreadPoolExecutor
import math

import numpy as np
from scipy import stats

from ._rng import derive_seed
from .covariance import CovarianceModel, limit_cov_theorem2, longrun_table
from .data import EvalGrid, dump_json
from .datagen import generate, with_n
from .gaussian_limit import build_field, functional_values, sample_paths
from .kernels import make_kernel
from .uprocess import eval_e_prime_n, eval_Rn

MIN_REPLICATIONS = 50


def study_t_count(ns, cap=20):
    """Largest divisor of gcd(ns) not above ``cap``: t = j/T is then on every grid."""
    g = math.gcd(*(int(n) for n in ns))
    return max(d for d in range(1, min(cap, g) + 1) if g % d == 0)


def _replicate(spec, n_max, seed, r):
    return generate(with_n(spec, n_max, seed=derive_seed(seed, 0, r))).values


def validate_convergence(spec, ns, m, seed=0, kernel="difference", R=1.0, s_count=11,
                         limit_m=None, threads=1):
    """Compare sup|e'_n| with sup|W'| over growing n on a fixed (s, t) grid.

    Replication r draws one series of length max(ns) and uses its prefixes,
    so different n share random numbers and the trend is not blurred by
    independent noise.  For each n the report holds the Kolmogorov-Smirnov
    distance between the m values of sup|e'_n| and ``limit_m`` simulated
    values of sup|W'| (closed-form covariance of the generator), the mean of
    sup|R_n|, and that mean divided by log(n)/n and by sqrt(log(n)/n).

    Parameters
    ----------
    spec : GeneratorSpec
        Null model; its ``n`` is ignored.
    ns : sequence of int
        Strictly increasing sample sizes.
    m : int
        Replications per n, at least 50.
    threads : int
        Worker threads for the replications; the report does not depend on it.

    Returns
    -------
    dict
        JSON-ready; serialized by :func:`report_json` it is byte-identical
        across runs with the same arguments.
    """
    ns = [int(n) for n in ns]
    if m < MIN_REPLICATIONS:
        raise ValueError(f"m={m} is too small for a distribution comparison; need at least {MIN_REPLICATIONS}")
    if not ns or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("ns must be non-empty and strictly increasing")
    if ns[0] < 2:
        raise ValueError("every n must be at least 2")
    if threads < 1:
        raise ValueError("threads must be at least 1")
    limit_m = max(2000, 4 * m) if limit_m is None else int(limit_m)

    model = make_kernel(kernel, spec.marginal)
    s = np.array([0.0]) if s_count == 1 else np.linspace(-R, R, s_count)
    T = study_t_count(ns)
    t_frac = np.arange(T + 1) / T

    # limit law of sup|W'| on the same grid
    lgrid = EvalGrid(s, np.arange(T + 1), T, R)
    C = longrun_table(CovarianceModel("closed_form", series_model=spec), model, s)
    field = build_field(lgrid, lambda a, t, b, t2: limit_cov_theorem2(t, t2, a, b, C))
    limit_sup = functional_values(sample_paths(field, limit_m, derive_seed(seed, 1)), "sup_abs")

    n_max = ns[-1]

    def one(r):
        x = _replicate(spec, n_max, seed, r)
        out = []
        for n in ns:
            grid = EvalGrid(s, np.round(t_frac * n).astype(np.int64), n, R)
            xn = x[:n]
            out.append((eval_e_prime_n(xn, model, grid).sup_abs(), eval_Rn(xn, model, grid).sup_abs()))
        return out

    if threads == 1:
        results = [one(r) for r in range(m)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(m)))
    arr = np.array(results)  # (m, len(ns), 2)

    rows = []
    for c, n in enumerate(ns):
        sup_e = arr[:, c, 0]
        mean_rn = float(arr[:, c, 1].mean())
        rate = math.log(n) / n
        rows.append({
            "n": n,
            "ks_distance": float(stats.ks_2samp(sup_e, limit_sup).statistic),
            "mean_sup_en_prime": float(sup_e.mean()),
            "mean_sup_Rn": mean_rn,
            "ratio_log_n_over_n": mean_rn / rate,
            "ratio_sqrt_log_n_over_n": mean_rn / math.sqrt(rate),
        })
    return {
        "generator": {k: v for k, v in spec.describe().items() if k not in ("n", "seed")},
        "kernel": kernel,
        "m": int(m),
        "limit_m": limit_m,
        "seed": int(seed),
        "s_points": s.tolist(),
        "t_points": t_frac.tolist(),
        "limit_mean_sup": float(limit_sup.mean()),
        "rows": rows,
    }


def report_json(report, path=None):
    return dump_json(report, path)
