"""Simulation of the Gaussian limit field and Monte Carlo critical values."""

from dataclasses import dataclass
import math

import numpy as np
from scipy import linalg

from ._rng import stream
from .data import EvalGrid

FUNCTIONALS = ("sup_abs", "integral_mu")


class NumericalError(RuntimeError):
    """Covariance assembly or factorization failed."""


@dataclass(frozen=True)
class GaussianField:
    """A centered Gaussian vector over grid points in (s, t) row-major order."""

    grid: EvalGrid
    cov: np.ndarray
    factor: np.ndarray
    jitter_used: float = 0.0
    clipped: float = 0.0

    @property
    def dim(self):
        return self.cov.shape[0]

    def reconstruction_error(self):
        return float(np.max(np.abs(self.factor @ self.factor.T - self.cov), initial=0.0))


def grid_points(grid):
    """Coordinates (s, t) of every grid point, in row-major order."""
    S, T = grid.shape
    s = np.repeat(grid.s_points, T)
    t = np.tile(grid.t_points, S)
    return s, t


def assemble_cov(grid, cov_fn):
    s, t = grid_points(grid)
    cov = np.asarray(cov_fn(s[:, None], t[:, None], s[None, :], t[None, :]), dtype=float)
    cov = np.broadcast_to(cov, (s.size, s.size))
    if not np.all(np.isfinite(cov)):
        raise NumericalError("covariance matrix contains non-finite entries")
    return (cov + cov.T) / 2


def factorize(cov):
    """Lower-triangular factor of a near-PSD matrix.

    Rows that are identically zero are left out of the factorization.  The
    rest is repaired by clipping negative eigenvalues to 0, then the smallest
    diagonal jitter in 0, 1e-12, 1e-11, ... that lets Cholesky succeed is
    added.  Returns ``(factor, jitter, clipped)`` where ``clipped`` is the
    largest eigenvalue magnitude removed.
    """
    d = cov.shape[0]
    factor = np.zeros((d, d))
    active = np.flatnonzero(np.any(cov != 0, axis=1))
    if active.size == 0:
        return factor, 0.0, 0.0
    sub = cov[np.ix_(active, active)]
    w, V = linalg.eigh(sub)
    clipped = float(max(0.0, -w.min()))
    if clipped > 0:
        sub = (V * np.clip(w, 0, None)) @ V.T
        sub = (sub + sub.T) / 2
    eye = np.eye(active.size)
    for jitter in [0.0] + [10.0 ** e for e in range(-12, -1)]:
        try:
            L = linalg.cholesky(sub + jitter * eye, lower=True)
        except linalg.LinAlgError:
            continue
        factor[np.ix_(active, active)] = L
        return factor, jitter, clipped
    raise NumericalError("covariance matrix could not be factorized even with jitter 1e-2")


def build_field(grid, cov_fn):
    """Assemble the grid covariance from ``cov_fn(s, t, s2, t2)`` and factor it.

    ``cov_fn`` must broadcast over array arguments.
    """
    cov = assemble_cov(grid, cov_fn)
    factor, jitter, clipped = factorize(cov)
    return GaussianField(grid, cov, factor, jitter, clipped)


def sample_paths(field, m, seed):
    """``m`` draws of the field, shape ``(m, |S|, |T|)``.

    Replication r uses its own stream keyed by (seed, r), so any subset of
    replications can be regenerated independently.
    """
    S, T = field.grid.shape
    if m <= 0:
        return np.zeros((0, S, T))
    active = np.flatnonzero(np.any(field.factor != 0, axis=1))
    z = np.empty((m, active.size))
    for r in range(m):
        z[r] = stream(seed, r).standard_normal(active.size)
    paths = np.zeros((m, field.dim))
    if active.size:
        paths[:, active] = z @ field.factor[np.ix_(active, active)].T
    return paths.reshape(m, S, T)


def check_weights(weights, size):
    w = np.asarray(weights, dtype=float).ravel()
    if w.size != size:
        raise ValueError(f"need {size} weights, one per s-point, got {w.size}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and non-negative")
    if not np.any(w > 0):
        raise ValueError("weights must not all be zero")
    return w


def functional_values(paths, functional="sup_abs", weights=None):
    """Apply the test functional to fields of shape ``(..., |S|, |T|)``.

    ``sup_abs``: max over the grid of |W|.
    ``integral_mu``: max over t of sum_k w_k W(s_k, t)^2.
    """
    paths = np.asarray(paths, dtype=float)
    if functional == "sup_abs":
        return np.max(np.abs(paths), axis=(-2, -1))
    if functional == "integral_mu":
        w = check_weights(weights, paths.shape[-2])
        return np.max(np.einsum("k,...kt->...t", w, paths**2), axis=-1)
    raise ValueError(f"functional must be one of {FUNCTIONALS}, got {functional!r}")


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def exceedance_rank(alpha, m):
    """Smallest count q with q/m >= alpha, evaluated in floating point.

    A p-value computed as count/m is below alpha exactly when count < q.
    This is ceil(alpha m) except where alpha m is within rounding of an
    integer.
    """
    _check_alpha(alpha)
    q = min(max(math.ceil(alpha * m), 1), m)
    while q > 1 and (q - 1) / m >= alpha:
        q -= 1
    while q / m < alpha:
        q += 1
    return q


def mc_critical_value(sims, alpha):
    """The q-th largest simulated value, q from :func:`exceedance_rank`.

    With this choice ``stat > value`` holds exactly when
    :func:`mc_p_value` < alpha.
    """
    _check_alpha(alpha)
    sims = np.sort(np.asarray(sims, dtype=float))
    m = sims.size
    if m == 0:
        raise ValueError("no simulated values")
    return float(sims[m - exceedance_rank(alpha, m)])


def mc_p_value(sims, statistic):
    """Fraction of simulated values at or above the statistic."""
    sims = np.asarray(sims, dtype=float)
    return float(np.count_nonzero(sims >= statistic) / sims.size)


def simulate_functional(field, functional="sup_abs", m=2000, seed=0, weights=None):
    return functional_values(sample_paths(field, m, seed), functional, weights)


def critical_value(field, functional="sup_abs", alpha=0.05, m=2000, seed=0, weights=None):
    """Empirical (1 - alpha)-quantile of the functional over ``m`` simulated paths."""
    _check_alpha(alpha)
    return mc_critical_value(simulate_functional(field, functional, m, seed, weights), alpha)


def critical_value_table(field, alphas, functional="sup_abs", m=2000, seed=0, weights=None):
    """JSON-ready records ``{alpha, functional, m, seed, value}``; one simulation shared."""
    sims = simulate_functional(field, functional, m, seed, weights)
    return [
        {"alpha": float(a), "functional": functional, "m": int(m), "seed": int(seed),
         "value": mc_critical_value(sims, a)}
        for a in alphas
    ]
