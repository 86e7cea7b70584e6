"""Long-run covariances of the first-order components and the limit covariances.

Notation: ``C(i, j, s, s2) = sum_k Cov(h_{i,s}(X_0), h_{j,s2}(X_k))`` for
i, j in {1, 2}.  Stationarity gives ``C(i, j, s2, s) = C(j, i, s, s2)``; the
limit-covariance functions use it to put arguments in canonical order
(t <= t2) before evaluating a formula.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .data import SeriesSample, as_sample, write_table_csv, dump_json
from .datagen import GeneratorSpec
from .kernels import get_marginal, projection_table

TAPERS = ("truncated", "bartlett")


@dataclass(frozen=True)
class CovarianceModel:
    """Settings for long-run covariance estimation.

    ``component_source='fitted'`` estimates from a :class:`SeriesSample`
    held in ``series_model``; ``'closed_form'`` integrates against the joint
    law of a :class:`GeneratorSpec`.  ``max_lag=None`` picks floor(n^{1/3})
    when fitting and an exact/negligible-tail cut-off in closed form.
    """

    component_source: str = "fitted"
    max_lag: int = None
    taper: str = "bartlett"
    series_model: object = None

    def __post_init__(self):
        if self.component_source not in ("closed_form", "fitted"):
            raise ValueError("component_source must be 'closed_form' or 'fitted'")
        if self.taper not in TAPERS:
            raise ValueError(f"taper must be one of {TAPERS}")
        if self.max_lag is not None and self.max_lag < 0:
            raise ValueError("max_lag must be non-negative")
        if self.component_source == "fitted":
            object.__setattr__(self, "series_model", as_sample(self.series_model))
        elif not isinstance(self.series_model, GeneratorSpec):
            raise TypeError("closed_form mode needs a GeneratorSpec as series_model")


def taper_weights(max_lag, taper="bartlett"):
    """Weights w_0..w_L; Bartlett uses w_k = 1 - k/(L+1)."""
    k = np.arange(max_lag + 1)
    if taper == "bartlett":
        return 1 - k / (max_lag + 1)
    return np.ones(max_lag + 1)


def default_max_lag(n):
    """floor(n^{1/3}), computed exactly (1000 ** (1/3) is 9.999... in floating point)."""
    L = round(n ** (1 / 3))
    while L**3 > n:
        L -= 1
    while (L + 1) ** 3 <= n:
        L += 1
    return L


def _fitted_matrix(cm, funcs):
    x = np.array(cm.series_model.values)
    n = x.size
    L = default_max_lag(n) if cm.max_lag is None else cm.max_lag
    if L >= n:
        raise ValueError(f"max_lag={L} must be smaller than n={n}")
    F = np.asarray(funcs(x), dtype=float).reshape(n, -1)
    F = F - F.mean(axis=0)
    w = taper_weights(L, cm.taper)
    gamma0 = F.T @ F / n
    out = (gamma0 + gamma0.T) / 2
    for k in range(1, L + 1):
        gk = F[:-k].T @ F[k:] / n
        out = out + w[k] * (gk + gk.T)
    return out


_GH_NODES = 160


def _gauss_hermite():
    z, w = np.polynomial.hermite_e.hermegauss(_GH_NODES)
    return z, w / np.sqrt(2 * np.pi)


def _closed_form_matrix(cm, funcs):
    spec = cm.series_model
    marginal = get_marginal(spec.marginal)
    # the generators map the latent Gaussian path through Phi for uniform01
    to_x = stats.norm.cdf if spec.marginal == "uniform01" else (lambda z: z)

    # lag 0 by adaptive quadrature over the marginal
    def outer(x):
        F = np.asarray(funcs(np.atleast_1d(x)), dtype=float).reshape(-1)
        return np.outer(F, F).ravel()

    mean = np.asarray(marginal.expect(lambda x: np.asarray(funcs(np.atleast_1d(x)), dtype=float).reshape(-1)))
    d = mean.size
    second = np.asarray(marginal.expect(outer)).reshape(d, d)
    gamma0 = second - np.outer(mean, mean)
    total = (gamma0 + gamma0.T) / 2

    rng = spec.dependence_range
    if rng is None:
        phi = spec.phi
        L = cm.max_lag if cm.max_lag is not None else min(400, max(1, math.ceil(math.log(1e-12) / math.log(abs(phi)))))
    else:
        L = rng if cm.max_lag is None else min(rng, cm.max_lag)
    if L == 0:
        return total

    z, w = _gauss_hermite()
    F0 = np.asarray(funcs(to_x(z)), dtype=float).reshape(z.size, d)
    # the same rule for the product of means keeps far-lag terms unbiased
    mean_gh = w @ F0
    last = None
    for k in range(1, L + 1):
        rho = spec.latent_autocorrelation(k)
        if rho == 0.0:
            last = np.zeros((d, d))
            continue
        zk = rho * z[:, None] + math.sqrt(1 - rho**2) * z[None, :]
        Fk = np.asarray(funcs(to_x(zk.ravel())), dtype=float).reshape(z.size, z.size, d)
        # E[f(X_0) g(X_k)] with X_0 = T(z_a), X_k = T(rho z_a + sqrt(1-rho^2) z_b)
        cond = np.einsum("b,abq->aq", w, Fk)
        cross = (F0 * w[:, None]).T @ cond - np.outer(mean_gh, mean_gh)
        # Gaussian copulas are time-reversible, so lag -k contributes cross^T
        last = (cross + cross.T) / 2
        total = total + 2 * last
    if rng is None and cm.max_lag is None and last is not None:
        phi = spec.phi
        total = total + 2 * last * phi / (1 - phi)
    return total


def longrun_cov_matrix(cm, funcs):
    """Matrix of long-run covariances of the columns of ``funcs(x)``.

    ``funcs`` maps an array of observations (length m) to an ``(m, d)``
    array.  Entry (p, q) is sum_{|k|<=L} w_k Cov(f_p(X_0), f_q(X_k)).
    """
    if cm.component_source == "fitted":
        return _fitted_matrix(cm, funcs)
    return _closed_form_matrix(cm, funcs)


def longrun_cov(cm, f, g):
    """sum_k w_k Cov(f(X_0), g(X_k)) for two scalar functions."""

    def funcs(x):
        return np.column_stack([np.broadcast_to(f(x), np.shape(x)), np.broadcast_to(g(x), np.shape(x))])

    mat = longrun_cov_matrix(cm, funcs)
    return float((mat[0, 1] + mat[1, 0]) / 2)


class LongRunCovariance:
    """Table of C_{i,j}(s, s2) on an s-grid, from a stacked (2S, 2S) matrix.

    Rows/columns 0..S-1 are h_{1,s_k}, S..2S-1 are h_{2,s_k}.
    """

    def __init__(self, s_points, gamma):
        self.s_points = np.asarray(s_points, dtype=float)
        gamma = np.asarray(gamma, dtype=float)
        S = self.s_points.size
        if gamma.shape != (2 * S, 2 * S):
            raise ValueError("gamma must be (2S, 2S)")
        self.gamma = (gamma + gamma.T) / 2

    def _index(self, s):
        s = np.asarray(s, dtype=float)
        idx = np.searchsorted(self.s_points, s)
        idx = np.clip(idx, 0, self.s_points.size - 1)
        if not np.all(self.s_points[idx] == s):
            raise KeyError("s value not on the covariance grid")
        return idx

    def block(self, i, j):
        S = self.s_points.size
        return self.gamma[(i - 1) * S:i * S, (j - 1) * S:j * S]

    def __call__(self, i, j, s, s2):
        return self.block(i, j)[self._index(s), self._index(s2)]

    @property
    def is_zero(self):
        return not np.any(self.gamma)

    def to_csv(self, path):
        S = self.s_points.size
        keys = np.concatenate([self.s_points, self.s_points])
        write_table_csv(path, keys, keys, self.gamma,
                        comments=[f"stacked long-run covariance, h1 rows 0..{S - 1}, h2 rows {S}..{2 * S - 1}"],
                        corner="s\\s")

    def to_dict(self):
        return {"s_points": self.s_points.tolist(), "gamma": self.gamma.tolist()}

    def to_json(self, path):
        dump_json(self.to_dict(), path)


class ConstantCovariance:
    """C_{i,j}(s, s2) not depending on s: handy for formula checks."""

    def __init__(self, c11, c12, c21, c22):
        self.c = {(1, 1): c11, (1, 2): c12, (2, 1): c21, (2, 2): c22}

    def __call__(self, i, j, s, s2):
        return np.broadcast_to(np.asarray(self.c[(i, j)], dtype=float), np.broadcast(s, s2).shape)


def longrun_table(cm, model, s_points):
    """Long-run covariance table of the centered components on ``s_points``."""
    s = np.asarray(s_points, dtype=float)
    model.require_components()
    # theta may come from quadrature: evaluate it once, not per function table
    theta = np.asarray(model.theta(s), dtype=float).reshape(s.shape)

    def funcs(x):
        H1, H2 = projection_table(model, x, s)
        return np.hstack([H1 - theta, H2 - theta])

    return LongRunCovariance(s, longrun_cov_matrix(cm, funcs))


# -- limit covariance formulas -------------------------------------------------


def _canonical(t, t2, s, s2):
    t, t2, s, s2 = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (t, t2, s, s2)))
    if np.any((t < 0) | (t > 1) | (t2 < 0) | (t2 > 1)):
        raise ValueError("t and t' must lie in [0, 1]")
    swap = t > t2
    return (np.where(swap, t2, t), np.where(swap, t, t2),
            np.where(swap, s2, s), np.where(swap, s, s2))


def _c_terms(C, s, s2):
    c11, c12 = C(1, 1, s, s2), C(1, 2, s, s2)
    c21, c22 = C(2, 1, s, s2), C(2, 2, s, s2)
    return c11, c12, c21, c22


def limit_cov_theorem1(t, t2, s, s2, C):
    """Covariance of the limit of e_n (centering by the true probability).

    For t <= t2: t(1-t)(1-t2) C11 + t(1-t2)(t2-t) C21 + t t2 (1-t2) C22.
    """
    t, t2, s, s2 = _canonical(t, t2, s, s2)
    c11, _, c21, c22 = _c_terms(C, s, s2)
    return t * (1 - t) * (1 - t2) * c11 + t * (1 - t2) * (t2 - t) * c21 + t * t2 * (1 - t2) * c22


def _a_terms(C, s, s2):
    c11, c12, c21, c22 = _c_terms(C, s, s2)
    c1a = c11 - c12          # C_1^a(s, s2)
    c1a_rev = c11 - c21      # C_1^a(s2, s)
    c2a = c21 - c22          # C_2^a(s, s2)
    c2a_rev = c12 - c22      # C_2^a(s2, s)
    ca = c11 - c12 - c21 + c22
    return c11, c21, c22, c1a, c1a_rev, c2a, c2a_rev, ca


def limit_cov_theorem2_verbatim(t, t2, s, s2, C):
    """The published eight-term covariance for empirical centering, as printed.

    A stray ``(s', s)`` factor in the fifth term is read as 1.  This form
    collapses to :func:`limit_cov_theorem1` when h1 = h2 but does not match
    simulation; see :func:`limit_cov_theorem2`.
    """
    t, t2, s, s2 = _canonical(t, t2, s, s2)
    c11, c21, c22, c1a, c1a_rev, c2a, c2a_rev, ca = _a_terms(C, s, s2)
    q = t * (1 - t) * t2 * (1 - t2)
    return (
        t * (1 - t) * (1 - t2) * c11
        + (t2 - t) * t * (1 - t2) * c21
        + (1 - t2) * t * t2 * c22
        - 2 * t * t2 * (1 - t**2) * (1 - t2) * c1a
        - 2 * q * c1a_rev
        - 2 * t * t2 * (1 - t2) * (2 + t2 - 2 * t - t**2) * c2a
        - 2 * q * c2a_rev
        + 4 * q * (t**2 + t + 10 / 3) * ca
    )


def limit_cov_theorem2_expanded(t, t2, s, s2, C):
    """The published sixteen-term unsimplified covariance, as printed."""
    t, t2, s, s2 = _canonical(t, t2, s, s2)
    c11, c21, c22, c1a, c1a_rev, c2a, c2a_rev, ca = _a_terms(C, s, s2)
    q = t * (1 - t) * t2 * (1 - t2)
    return (
        t * (1 - t) * (1 - t2) * c11
        - 2 * q * c1a
        - 2 * t**2 * (1 - t) * (1 - t2) * c1a_rev
        + 4 * t * q * ca
        + (t2 - t) * t * (1 - t2) * c21
        - 2 * (t2 - t) * t * t2 * (1 - t2) * c2a
        - 2 * (t2 - t) * t * (1 - t) * (1 - t2) * c1a_rev
        + 4 * (t2 - t) * q * ca
        + (1 - t2) * t * t2 * c22
        - 2 * (1 - t2) * t * t2 * (1 - t2) * c2a
        - 2 * (1 - t2) * t * (1 - t) * t2 * c2a_rev
        + 4 * (1 - t2) * q * ca
        - 2 * t * q * c1a
        - 2 * (1 - t2) * t**2 * t * t2 * (1 - t2) * c2a
        + 4 * q * ca
        + 4 / 3 * q * ca
    )


def weight_integrals(t, t2):
    """I_{ij}(t, t2) = int_0^1 phi_i(t, u) phi_j(t2, u) du for t <= t2.

    phi_1(t, u) = (1-t) 1{u <= t} - 2t(1-t)(1-u),
    phi_2(t, u) = t 1{u > t} - 2t(1-t) u
    are the weights by which the linear part of e'_n integrates the partial-sum
    limits of h1 and h2.
    """
    A, A2 = 2 * t * (1 - t), 2 * t2 * (1 - t2)
    i11 = (1 - t) * (1 - t2) * t - (1 - t) * A2 * (t - t**2 / 2) - A * (1 - t2) * (t2 - t2**2 / 2) + A * A2 / 3
    i12 = -(1 - t) * A2 * t**2 / 2 - A * t2 * (1 - t2) ** 2 / 2 + A * A2 / 6
    i21 = t * (1 - t2) * (t2 - t) - t * A2 * (1 - t) ** 2 / 2 - A * (1 - t2) * t2**2 / 2 + A * A2 / 6
    i22 = t * t2 * (1 - t2) - t * A2 * (1 - t**2) / 2 - A * t2 * (1 - t2**2) / 2 + A * A2 / 3
    return i11, i12, i21, i22


def limit_cov_theorem2(t, t2, s, s2, C):
    """Covariance of the limit of e'_n (empirical centering).

    sum_{i,j} C_{ij}(s, s2) I_{ij}(t, t2) with :func:`weight_integrals`.  This
    is the form that agrees with Monte Carlo; it reduces to
    :func:`limit_cov_theorem1` only when the centering correction vanishes.
    """
    t, t2, s, s2 = _canonical(t, t2, s, s2)
    c11, c12, c21, c22 = _c_terms(C, s, s2)
    i11, i12, i21, i22 = weight_integrals(t, t2)
    return c11 * i11 + c12 * i12 + c21 * i21 + c22 * i22


THEOREM2_VARIANTS = {
    "derived": limit_cov_theorem2,
    "verbatim": limit_cov_theorem2_verbatim,
    "expanded": limit_cov_theorem2_expanded,
}


# -- weighted sums of a summable sequence -------------------------------------


def geometric_sequence(ratio, tol=1e-18):
    """One-sided c_j = ratio^|j|, truncated once below ``tol``."""
    if not 0 <= abs(ratio) < 1:
        raise ValueError("need |ratio| < 1")
    if ratio == 0:
        return np.array([1.0])
    J = int(math.ceil(math.log(tol) / math.log(abs(ratio))))
    return ratio ** np.arange(J + 1, dtype=float)


def _isum(lo, hi, power):
    """sum_{i=lo}^{hi} i^power for integer arrays, 0 when hi < lo."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    empty = hi < lo

    def f(m):
        if power == 1:
            return m * (m + 1) / 2
        return m * (m + 1) * (2 * m + 1) / 6

    return np.where(empty, 0.0, f(hi) - f(lo - 1))


def weighted_sum_limit(c, a, b, order=1):
    """Finite-n weighted sums of a symmetric summable sequence and their limit.

    ``c`` holds c_0, c_1, ..., c_J with c_{-j} = c_j and c_j = 0 beyond J.
    order 1: (1/n) sum_{i,j=[an]+1}^{[bn]} (i/n) c_{j-i} -> (b^2-a^2)/2 sum_j c_j
    order 2: (1/n) sum (i/n)(j/n) c_{j-i}          -> (b^3-a^3)/3 sum_j c_j

    Returns ``(finite_n, limit)`` where ``finite_n`` is a function of n.
    """
    c = np.asarray(c, dtype=float).ravel()
    if not 0 <= a < b <= 1:
        raise ValueError(f"need 0 <= a < b <= 1, got a={a}, b={b}")
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    total = c[0] + 2 * c[1:].sum()
    limit = (b ** (order + 1) - a ** (order + 1)) / (order + 1) * total

    def finite_n(n):
        A, B = math.floor(a * n), math.floor(b * n)
        N = B - A
        J = min(c.size - 1, max(N - 1, 0))
        k = np.arange(-J, J + 1)
        cj = c[np.abs(k)]
        lo = np.where(k >= 0, A + 1, A + 1 - k)
        hi = np.where(k >= 0, B - k, B)
        s1 = _isum(lo, hi, 1)
        if order == 1:
            inner = s1 / n
        else:
            inner = (_isum(lo, hi, 2) + k * s1) / n**2
        return float(np.sum(cj * inner) / n)

    return finite_n, float(limit)
