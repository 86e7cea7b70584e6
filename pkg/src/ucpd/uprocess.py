"""Two-sample empirical U-process and its Hoeffding pieces.

For a split after observation k (so [nt] = k) and threshold s,

    e_n(s, k/n) = n^{-3/2} sum_{i<=k<j} (1{g(X_i, X_j) <= s} - center(s)).

Every field is computed from the integer cross-pair counts
N(s, k) = #{i <= k < j : g(X_i, X_j) <= s}.  The fast evaluator obtains them
by a single sweep over k: moving X_{k+1} into the left block adds the pairs
(k+1, j > k+1) and removes the pairs (i <= k, k+1), so

    N(s, k+1) = N(s, k) + #{j > k+1 : g(X_{k+1}, X_j) <= s}
                        - #{i <= k : g(X_i, X_{k+1}) <= s}.

Each update row is sorted once and read off the whole s-grid by binary
search.  The ``oracle`` method re-sums every block from scratch.
"""

import math

import numpy as np

from .data import EvalGrid, ProcessField, as_sample
from .kernels import component_table

_CHUNK = 1 << 22


def _kernel_fn(kernel):
    return getattr(kernel, "evaluate", kernel)


def _check_method(method):
    if method not in ("fast", "oracle"):
        raise ValueError(f"method must be 'fast' or 'oracle', got {method!r}")


def _check_grid(sample, grid):
    if not isinstance(grid, EvalGrid):
        raise TypeError("grid must be an EvalGrid")
    if grid.n != sample.n:
        raise ValueError(f"t grid is built for n={grid.n} but the sample has n={sample.n}")


def _update_counts(x, g, s_points):
    """Per-observation counts of kernel values at or below each s.

    Returns ``(fwd, bwd)``, both ``(n, |S|)`` int64: ``fwd[l]`` counts
    j > l with g(x_l, x_j) <= s, ``bwd[l]`` counts i < l with g(x_i, x_l) <= s.
    """
    n = x.size
    s = np.asarray(s_points, dtype=float)
    fwd = np.zeros((n, s.size), dtype=np.int64)
    bwd = np.zeros((n, s.size), dtype=np.int64)
    step = max(1, _CHUNK // n)
    idx = np.arange(n)
    for lo in range(0, n, step):
        rows = idx[lo:lo + step]
        # forward rows g(x_l, x_j); entries with j <= l are masked out
        vals = np.array(np.broadcast_to(g(x[rows, None], x[None, :]), (rows.size, n)), dtype=float)
        vals[idx[None, :] <= rows[:, None]] = np.inf
        vals.sort(axis=1)
        for r, l in enumerate(rows):
            fwd[l] = np.searchsorted(vals[r, : n - 1 - l], s, side="right")
        # backward rows g(x_i, x_l) for i < l
        vals = np.array(np.broadcast_to(g(x[None, :], x[rows, None]), (rows.size, n)), dtype=float)
        vals[idx[None, :] >= rows[:, None]] = np.inf
        vals.sort(axis=1)
        for r, l in enumerate(rows):
            bwd[l] = np.searchsorted(vals[r, :l], s, side="right")
    return fwd, bwd


def cross_counts(sample, kernel, s_points):
    """All cross-pair counts by the incremental sweep.

    Returns ``(N, total)`` where ``N[k, m] = #{i <= k < j : g(X_i,X_j) <= s_m}``
    for k = 0..n and ``total[m] = #{i < j : g(X_i, X_j) <= s_m}``.
    """
    sample = as_sample(sample)
    x = np.array(sample.values)
    fwd, bwd = _update_counts(x, _kernel_fn(kernel), s_points)
    N = np.zeros((x.size + 1, fwd.shape[1]), dtype=np.int64)
    np.cumsum(fwd - bwd, axis=0, out=N[1:])
    return N, fwd.sum(axis=0)


def _oracle_block_sums(x, g, grid, center):
    """Direct evaluation of sum_{i<=k<j} (1{g <= s} - center(s)) for every grid point."""
    n = x.size
    out = np.zeros(grid.shape)
    for c, k in enumerate(grid.t_index):
        if k == 0 or k == n:
            continue
        block = np.asarray(g(x[:k, None], x[None, k:]), dtype=float)
        for r, s in enumerate(grid.s_points):
            out[r, c] = np.sum((block <= s) - center[r])
    return out


def _oracle_pair_mean(x, g, s_points):
    n = x.size
    iu = np.triu_indices(n, 1)
    vals = np.asarray(g(x[:, None], x[None, :]), dtype=float)
    vals = np.broadcast_to(vals, (n, n))[iu]
    return np.array([np.mean(vals <= s) for s in s_points])


def _scale(n):
    return float(n) ** 1.5


def eval_en(sample, model, grid, method="fast"):
    """e_n centered by theta_s, the independent-copy probability."""
    _check_method(method)
    sample = as_sample(sample)
    _check_grid(sample, grid)
    model.require_components()
    theta = np.asarray(model.theta(grid.s_points), dtype=float).reshape(-1)
    n = sample.n
    if method == "oracle":
        vals = _oracle_block_sums(np.array(sample.values), model.evaluate, grid, theta) / _scale(n)
    else:
        N, _ = cross_counts(sample, model, grid.s_points)
        k = grid.t_index
        vals = (N[k].T - (k * (n - k))[None, :] * theta[:, None]) / _scale(n)
    return ProcessField(grid, vals, "en")


def eval_e_prime_n(sample, kernel, grid, method="fast"):
    """e'_n: the centering is the mean indicator over all pairs i < j."""
    _check_method(method)
    sample = as_sample(sample)
    _check_grid(sample, grid)
    n = sample.n
    g = _kernel_fn(kernel)
    if method == "oracle":
        x = np.array(sample.values)
        u_hat = _oracle_pair_mean(x, g, grid.s_points)
        vals = _oracle_block_sums(x, g, grid, u_hat) / _scale(n)
    else:
        N, total = cross_counts(sample, g, grid.s_points)
        k = grid.t_index
        pairs = n * (n - 1) // 2
        # integer numerator k(n-k) * total; one rounding in the division
        vals = (N[k].T - np.outer(total, k * (n - k)) / pairs) / _scale(n)
    return ProcessField(grid, vals, "en_prime")


def _centered_tables(sample, model, grid):
    H1, H2, theta = component_table(model, sample.values, grid.s_points)
    return H1 - theta, H2 - theta, H1, H2, theta


def _linear_part(h1c, h2c, t_index):
    """n^{-3/2} [(n-k) sum_{i<=k} h1c(X_i) + k sum_{j>k} h2c(X_j)], shape (|S|, |T|)."""
    n = h1c.shape[0]
    c1 = np.vstack([np.zeros(h1c.shape[1]), np.cumsum(h1c, axis=0)])
    c2 = np.vstack([np.zeros(h2c.shape[1]), np.cumsum(h2c, axis=0)])
    k = t_index
    tail2 = c2[n][None, :] - c2[k]
    return (((n - k)[:, None] * c1[k]) + (k[:, None] * tail2)).T / _scale(n)


def _centering_correction(h1c, h2c, t_index):
    """k(n-k) / (n^{3/2} C(n,2)) [sum_i (n-i) h1c(X_i) + sum_j (j-1) h2c(X_j)]."""
    n = h1c.shape[0]
    i = np.arange(1, n + 1)
    lin = (n - i) @ h1c + (i - 1) @ h2c
    k = t_index
    w = k * (n - k) / (_scale(n) * (n * (n - 1) / 2))
    return np.outer(lin, w)


def eval_Wn(sample, model, grid):
    """Linear (first-order) part W_n of e_n."""
    sample = as_sample(sample)
    _check_grid(sample, grid)
    h1c, h2c, *_ = _centered_tables(sample, model, grid)
    return ProcessField(grid, _linear_part(h1c, h2c, grid.t_index), "Wn")


def eval_Rn(sample, model, grid, method="fast"):
    """Degenerate remainder R_n = e_n - W_n."""
    en = eval_en(sample, model, grid, method=method)
    wn = eval_Wn(sample, model, grid)
    return ProcessField(grid, en.values - wn.values, "Rn")


def eval_Wn_prime(sample, model, grid):
    """Linear part of e'_n: W_n minus the empirical-centering correction."""
    sample = as_sample(sample)
    _check_grid(sample, grid)
    h1c, h2c, *_ = _centered_tables(sample, model, grid)
    vals = _linear_part(h1c, h2c, grid.t_index) - _centering_correction(h1c, h2c, grid.t_index)
    return ProcessField(grid, vals, "Wn_prime")


def eval_Rn_prime(sample, model, grid, method="fast"):
    """R'_n = e'_n - W'_n."""
    ep = eval_e_prime_n(sample, model, grid, method=method)
    wp = eval_Wn_prime(sample, model, grid)
    return ProcessField(grid, ep.values - wp.values, "Rn_prime")


def degenerate_sums_direct(sample, model, grid):
    """Evaluate R_n and R'_n straight from h3 by pair enumeration.

    Independent of the subtraction route in :func:`eval_Rn` and
    :func:`eval_Rn_prime`; O(n^2 |S| |T|), meant for small n.
    Returns ``(Rn, Rn_prime)`` fields.
    """
    sample = as_sample(sample)
    _check_grid(sample, grid)
    x = np.array(sample.values)
    n = x.size
    _, _, H1, H2, theta = _centered_tables(sample, model, grid)
    G = np.broadcast_to(np.asarray(model.evaluate(x[:, None], x[None, :]), dtype=float), (n, n))
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    rn = np.zeros(grid.shape)
    total = np.zeros(grid.s_points.size)
    for r, s in enumerate(grid.s_points):
        h3 = (G <= s) - H1[:, r][:, None] - H2[:, r][None, :] + theta[r]
        total[r] = h3[upper].sum()
        for c, k in enumerate(grid.t_index):
            rn[r, c] = h3[:k, k:].sum()
    k = grid.t_index
    corr = np.outer(total, k * (n - k)) / (n * (n - 1) / 2)
    return (
        ProcessField(grid, rn / _scale(n), "Rn"),
        ProcessField(grid, (rn - corr) / _scale(n), "Rn_prime"),
    )


def monotone_split(sample, model, grid):
    """Split W_n = xi_circ - xi_star into two coordinatewise non-decreasing fields.

    With F_1 = h1, F_2 = h2 (uncentered) and means m_1 = m_2 = theta_s:

        xi_circ = n^{-1/2} sum_{i<=k} F_1(X_i) + k n^{-3/2} sum_{j<=n} F_2(X_j)
                  + (m_1 + m_2) k^2 n^{-3/2}
        xi_star = k n^{-3/2} sum_{i<=k} (F_1 + F_2)(X_i) + (m_1 + m_2) k n^{-1/2}
    """
    sample = as_sample(sample)
    _check_grid(sample, grid)
    H1, H2, theta = component_table(model, sample.values, grid.s_points)
    n = sample.n
    k = grid.t_index.astype(float)
    c1 = np.vstack([np.zeros(H1.shape[1]), np.cumsum(H1, axis=0)])[grid.t_index].T
    c12 = np.vstack([np.zeros(H1.shape[1]), np.cumsum(H1 + H2, axis=0)])[grid.t_index].T
    f2_all = H2.sum(axis=0)[:, None]
    m = 2 * theta[:, None]
    rn = math.sqrt(n)
    xi_circ = c1 / rn + k * f2_all / _scale(n) + m * k**2 / _scale(n)
    xi_star = k * c12 / _scale(n) + m * k / rn
    return ProcessField(grid, xi_circ, "xi_circ"), ProcessField(grid, xi_star, "xi_star")


# -- telescoping of the degenerate double sum ----------------------------------


def _pair_matrix(sample, h3):
    if callable(h3):
        x = np.array(as_sample(sample).values)
        return np.broadcast_to(np.asarray(h3(x[:, None], x[None, :]), dtype=float), (x.size, x.size))
    return np.asarray(h3, dtype=float)


def direct_block_sum(h, k):
    """S_k = sum_{i<=k<j} h_{ij}, exactly rounded."""
    h = np.asarray(h, dtype=float)
    return math.fsum(h[:k, k:].ravel())


def telescoped_block_sum(h, k):
    """S_k via sum_{l<=k} sum_{j>l} h_{lj} - sum_{i<l<=k} h_{il}, exactly rounded.

    Both sums are formed with :func:`math.fsum`, so the result is the correctly
    rounded value of the same real number as :func:`direct_block_sum`.
    """
    h = np.asarray(h, dtype=float)
    n = h.shape[0]
    terms = []
    for l in range(k):
        terms.extend(h[l, l + 1:].tolist())
        terms.extend((-h[:l, l]).tolist())
    return math.fsum(terms)


def telescope_degenerate(sample, h3, k):
    """S_k for the pair array h_{ij} = h3(X_i, X_j) (or a given matrix), telescoped."""
    h = _pair_matrix(sample, h3)
    n = h.shape[0]
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must lie in 1..{n - 1}, got {k}")
    return telescoped_block_sum(h, k)


FIELD_EVALUATORS = {
    "en": lambda x, m, g: eval_en(x, m, g),
    "en_prime": lambda x, m, g: eval_e_prime_n(x, m, g),
    "Wn": lambda x, m, g: eval_Wn(x, m, g),
    "Rn": lambda x, m, g: eval_Rn(x, m, g),
    "Wn_prime": lambda x, m, g: eval_Wn_prime(x, m, g),
    "Rn_prime": lambda x, m, g: eval_Rn_prime(x, m, g),
    "xi_circ": lambda x, m, g: monotone_split(x, m, g)[0],
    "xi_star": lambda x, m, g: monotone_split(x, m, g)[1],
}
