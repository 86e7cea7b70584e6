"""Kernel models g(u, v) and the Hoeffding split of the indicator 1{g <= s}.

All callables stored on a :class:`KernelModel` broadcast over NumPy arrays:
``evaluate(u, v)``, ``h1(u, s)``, ``h2(v, s)`` and ``theta(s)``.  ``h1`` and
``h2`` are the *uncentered* projections P{g(u, X) <= s} and P{g(X, v) <= s};
the centered first-order parts are produced by :func:`hoeffding_components`.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate, stats

from .data import SeriesSample


class ComponentsUnavailableError(ValueError):
    pass


_MISSING = "components unavailable; fit them with fit_components or supply closed forms"


@dataclass(frozen=True)
class Marginal:
    """Law of X_1 for closed-form components."""

    name: str
    dist: object
    sup_pdf: float
    support: tuple

    def cdf(self, x):
        return self.dist.cdf(x)

    def sf(self, x):
        return self.dist.sf(x)

    def expect(self, func):
        """E[func(X)] for a vector-valued ``func`` by adaptive quadrature."""
        lo, hi = self.support

        def integrand(x):
            return np.asarray(func(np.array(x)), dtype=float) * self.dist.pdf(x)

        if np.isfinite(lo):
            # break at interior points so kinks of clipped CDFs are resolved
            pts = np.linspace(lo, hi, 9)
            total = 0.0
            for a, b in zip(pts[:-1], pts[1:]):
                total = total + integrate.quad_vec(integrand, a, b, epsabs=1e-13, epsrel=1e-11)[0]
            return total
        return integrate.quad_vec(integrand, lo, hi, epsabs=1e-13, epsrel=1e-11)[0]


MARGINALS = {
    "uniform01": Marginal("uniform01", stats.uniform(0.0, 1.0), 1.0, (0.0, 1.0)),
    "standard_normal": Marginal(
        "standard_normal", stats.norm(), 1.0 / np.sqrt(2 * np.pi), (-np.inf, np.inf)
    ),
}


def get_marginal(marginal):
    if isinstance(marginal, Marginal):
        return marginal
    try:
        return MARGINALS[marginal]
    except KeyError:
        raise ValueError(f"unknown marginal {marginal!r}; choose from {sorted(MARGINALS)}") from None


@dataclass(frozen=True)
class KernelModel:
    """A kernel g with optional Hoeffding components.

    Attributes
    ----------
    evaluate : callable
        ``g(u, v)``, broadcasting.
    symmetric : bool
        Whether g(u, v) = g(v, u) is declared.
    marginal_cdf : callable, optional
        CDF of X_1 when the components are closed forms.
    h1, h2 : callable, optional
        Uncentered projections ``h1(u, s) = P{g(u, X_1) <= s}`` and
        ``h2(v, s) = P{g(X_1, v) <= s}``.
    theta : callable, optional
        ``theta(s) = P{g(X_1, X_1') <= s}`` with X_1' an independent copy.
    lipschitz_bound : float, optional
        Constant M with ``|h_i(x, s') - h_i(x, s)| <= M (s' - s)``.
    """

    evaluate: object
    symmetric: bool = False
    marginal_cdf: object = None
    h1: object = None
    h2: object = None
    theta: object = None
    lipschitz_bound: float = None
    name: str = "custom"
    params: dict = None
    source: str = "closed_form"

    @property
    def has_components(self):
        return self.h1 is not None and self.h2 is not None and self.theta is not None

    def require_components(self):
        if not self.has_components:
            raise ComponentsUnavailableError(_MISSING)

    def kernel_only(self):
        """The same kernel with all components stripped."""
        return replace(self, h1=None, h2=None, theta=None, marginal_cdf=None,
                       lipschitz_bound=None, source="none")


# -- built-in catalog ----------------------------------------------------------


def _affine_cdf(marginal, a, b):
    """CDF of a*X + b."""
    if a == 0:
        raise ValueError("affine scale must be non-zero")
    if a > 0:
        return lambda y: marginal.cdf((np.asarray(y, dtype=float) - b) / a)
    return lambda y: marginal.sf((np.asarray(y, dtype=float) - b) / a)


def _theta_by_quadrature(marginal, h1):
    def theta(s):
        s = np.asarray(s, dtype=float)
        flat = np.atleast_1d(s).ravel()
        out = marginal.expect(lambda x: h1(x, flat))
        return np.clip(np.asarray(out).reshape(s.shape), 0.0, 1.0)

    return theta


def signed_difference(marginal="uniform01"):
    """g(u, v) = v - u.  At s = 0 this is the Wilcoxon kernel."""
    m = get_marginal(marginal)

    def h1(u, s):
        return m.cdf(np.asarray(u, dtype=float) + s)

    def h2(v, s):
        return m.sf(np.asarray(v, dtype=float) - s)

    if m.name == "uniform01":
        def theta(s):
            # CDF of the difference of two independent uniforms
            s = np.clip(np.asarray(s, dtype=float), -1.0, 1.0)
            return np.where(s <= 0, 0.5 * (1 + s) ** 2, 1 - 0.5 * (1 - s) ** 2)
    elif m.name == "standard_normal":
        def theta(s):
            return stats.norm.cdf(np.asarray(s, dtype=float) / np.sqrt(2.0))
    else:
        theta = _theta_by_quadrature(m, h1)

    return KernelModel(
        evaluate=lambda u, v: np.subtract(v, u, dtype=float),
        symmetric=False,
        marginal_cdf=m.cdf,
        h1=h1,
        h2=h2,
        theta=theta,
        lipschitz_bound=m.sup_pdf,
        name="difference",
        params={"marginal": m.name},
    )


def additive(marginal="uniform01", a1=1.0, b1=0.0, a2=1.0, b2=0.0):
    """g(u, v) = g1(u) + g2(v) with affine g1(x) = a1 x + b1, g2(x) = a2 x + b2."""
    m = get_marginal(marginal)
    F1 = _affine_cdf(m, a1, b1)  # law of g1(X)
    F2 = _affine_cdf(m, a2, b2)  # law of g2(X)

    def h1(u, s):
        return F2(s - (a1 * np.asarray(u, dtype=float) + b1))

    def h2(v, s):
        return F1(s - (a2 * np.asarray(v, dtype=float) + b2))

    return KernelModel(
        evaluate=lambda u, v: (a1 * np.asarray(u, dtype=float) + b1) + (a2 * np.asarray(v, dtype=float) + b2),
        symmetric=(a1, b1) == (a2, b2),
        marginal_cdf=m.cdf,
        h1=h1,
        h2=h2,
        theta=_theta_by_quadrature(m, h1),
        lipschitz_bound=max(m.sup_pdf / abs(a1), m.sup_pdf / abs(a2)),
        name="additive",
        params={"marginal": m.name, "a1": a1, "b1": b1, "a2": a2, "b2": b2},
    )


def absolute_difference(marginal="uniform01", a1=1.0, b1=0.0, a2=1.0, b2=0.0):
    """g(u, v) = |g1(u) - g2(v)| with affine g1, g2."""
    m = get_marginal(marginal)
    F1 = _affine_cdf(m, a1, b1)
    F2 = _affine_cdf(m, a2, b2)

    def _band(F, c, s):
        s = np.asarray(s, dtype=float)
        # continuous laws: P{|c - Y| <= s} = F(c + s) - F(c - s) for s >= 0
        return np.where(s >= 0, F(c + np.abs(s)) - F(c - np.abs(s)), 0.0)

    def h1(u, s):
        return _band(F2, a1 * np.asarray(u, dtype=float) + b1, s)

    def h2(v, s):
        return _band(F1, a2 * np.asarray(v, dtype=float) + b2, s)

    return KernelModel(
        evaluate=lambda u, v: np.abs((a1 * np.asarray(u, dtype=float) + b1) - (a2 * np.asarray(v, dtype=float) + b2)),
        symmetric=(a1, b1) == (a2, b2),
        marginal_cdf=m.cdf,
        h1=h1,
        h2=h2,
        theta=_theta_by_quadrature(m, h1),
        lipschitz_bound=2 * max(m.sup_pdf / abs(a1), m.sup_pdf / abs(a2)),
        name="absdiff",
        params={"marginal": m.name, "a1": a1, "b1": b1, "a2": a2, "b2": b2},
    )


BUILTIN_KERNELS = {
    "difference": signed_difference,
    "additive": additive,
    "absdiff": absolute_difference,
}


def make_kernel(name, marginal="uniform01", **params):
    """Look up a built-in kernel by name."""
    try:
        factory = BUILTIN_KERNELS[name]
    except KeyError:
        raise ValueError(f"unknown kernel {name!r}; choose from {sorted(BUILTIN_KERNELS)}") from None
    return factory(marginal, **params)


# -- Hoeffding decomposition ----------------------------------------------------


def hoeffding_components(model, s):
    """Centered first-order parts at threshold ``s``.

    Returns ``(h1c, h2c, theta_s)`` with ``h1c(u) = h1(u, s) - theta_s`` and
    ``h2c(v) = h2(v, s) - theta_s``.
    """
    model.require_components()
    theta_s = float(model.theta(s))

    def h1c(u):
        return model.h1(u, s) - theta_s

    def h2c(v):
        return model.h2(v, s) - theta_s

    return h1c, h2c, theta_s


def degenerate_kernel(model, s):
    """The degenerate part h3(u, v) = 1{g(u,v) <= s} - h1(u,s) - h2(v,s) + theta_s."""
    model.require_components()
    theta_s = float(model.theta(s))

    def h3(u, v):
        ind = (model.evaluate(u, v) <= s).astype(float)
        return ind - model.h1(u, s) - model.h2(v, s) + theta_s

    return h3


def component_table(model, x, s_points):
    """Uncentered components at every (x_i, s_k).

    Returns ``(H1, H2, theta)`` with ``H1[i, k] = h1(x_i, s_k)``, ``H2``
    likewise and ``theta[k] = theta(s_k)``.
    """
    model.require_components()
    s = np.asarray(s_points, dtype=float)
    H1, H2 = projection_table(model, x, s)
    theta = np.asarray(model.theta(s), dtype=float).reshape(s.shape)
    return H1, H2, theta


def projection_table(model, x, s_points):
    """``(H1, H2)`` of :func:`component_table` without theta."""
    x = np.asarray(x, dtype=float)
    s = np.asarray(s_points, dtype=float)
    h1, h2 = model.h1, model.h2
    if isinstance(h1, _PluginProjection):
        return h1.table(x, s), h2.table(x, s)
    shape = (x.size, s.size)
    H1 = np.broadcast_to(np.asarray(h1(x[:, None], s[None, :]), dtype=float), shape)
    H2 = np.broadcast_to(np.asarray(h2(x[:, None], s[None, :]), dtype=float), shape)
    return H1, H2


# -- plug-in fallback -----------------------------------------------------------

_CHUNK = 1 << 22  # elements per block of pairwise kernel values


class _PluginProjection:
    """u -> mean_j 1{g(u, X_j) <= s} (axis=0) or mean_i 1{g(X_i, u) <= s} (axis=1)."""

    def __init__(self, g, ref, first):
        self.g = g
        self.ref = ref
        self.first = first

    def _pairs(self, u):
        # one row of sorted kernel values per entry of u
        if self.first:
            vals = self.g(u[:, None], self.ref[None, :])
        else:
            vals = self.g(self.ref[None, :], u[:, None])
        vals = np.broadcast_to(np.asarray(vals, dtype=float), (u.size, self.ref.size)).copy()
        vals.sort(axis=1)
        return vals

    def table(self, x, s):
        x = np.asarray(x, dtype=float).ravel()
        s = np.asarray(s, dtype=float).ravel()
        out = np.empty((x.size, s.size))
        step = max(1, _CHUNK // max(self.ref.size, 1))
        for lo in range(0, x.size, step):
            rows = self._pairs(x[lo:lo + step])
            for r, row in enumerate(rows):
                out[lo + r] = np.searchsorted(row, s, side="right")
        return out / self.ref.size

    def __call__(self, u, s):
        u, s = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(s, dtype=float))
        uniq, inv = np.unique(u.ravel(), return_inverse=True)
        sf = s.ravel()
        out = np.empty(sf.size)
        order = np.argsort(inv, kind="stable")
        bounds = np.searchsorted(inv[order], np.arange(uniq.size + 1))
        step = max(1, _CHUNK // max(self.ref.size, 1))
        for lo in range(0, uniq.size, step):
            rows = self._pairs(uniq[lo:lo + step])
            for r, row in enumerate(rows):
                idx = order[bounds[lo + r]:bounds[lo + r + 1]]
                out[idx] = np.searchsorted(row, sf[idx], side="right")
        return (out / self.ref.size).reshape(u.shape)


class _PluginTheta:
    """V-statistic plug-in: mean over all n^2 ordered pairs, cached per s."""

    def __init__(self, h1):
        self.h1 = h1
        self._cache = {}

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        flat = np.atleast_1d(s).ravel()
        todo = np.array(sorted({v for v in flat.tolist() if v not in self._cache}))
        if todo.size:
            vals = self.h1.table(self.h1.ref, todo).mean(axis=0)
            self._cache.update(zip(todo.tolist(), vals.tolist()))
        out = np.array([self._cache[v] for v in flat.tolist()])
        return out.reshape(s.shape)


def fit_components(model, reference_sample, s_grid=None):
    """Plug-in components from a reference sample.

    ``h1(u, s)`` becomes the mean over j of ``1{g(u, X_j) <= s}``, ``h2``
    likewise, and ``theta(s)`` the mean over all ordered pairs (i, j),
    diagonal included, so that the empirical mean of ``h1(X_i, s)`` equals
    ``theta(s)`` exactly.  The full sample is used; if ``s_grid`` is given,
    theta is tabulated on it up front.
    """
    if isinstance(reference_sample, SeriesSample):
        ref = np.array(reference_sample.values, dtype=float)
    else:
        ref = np.asarray(reference_sample, dtype=float).ravel()
    if ref.size == 0:
        raise ValueError("reference sample is empty")
    h1 = _PluginProjection(model.evaluate, ref, first=True)
    h2 = _PluginProjection(model.evaluate, ref, first=False)
    theta = _PluginTheta(h1)
    if s_grid is not None:
        theta(np.asarray(s_grid, dtype=float))
    return replace(
        model,
        h1=h1,
        h2=h2,
        theta=theta,
        marginal_cdf=None,
        lipschitz_bound=None,
        source="fitted",
    )
