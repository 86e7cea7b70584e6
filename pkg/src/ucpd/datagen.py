"""Seeded stationary generators with known marginals and dependence class.

Every family is a unit-variance Gaussian process Z passed through the target
marginal: X = Z for ``standard_normal`` and X = Phi(Z) for ``uniform01``.  The
joint law of (X_0, X_k) is therefore a Gaussian copula with correlation
:meth:`GeneratorSpec.latent_autocorrelation`, which is what the closed-form
covariance code integrates against.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import signal, stats

from ._rng import stream
from .data import SeriesSample, as_sample

FAMILIES = ("iid", "ar1", "ma_q")
_MARGINALS = ("uniform01", "standard_normal")


@dataclass(frozen=True)
class GeneratorSpec:
    family: str = "iid"
    marginal: str = "uniform01"
    n: int = 1000
    seed: int = 0
    burn_in: int = None
    phi: float = 0.0
    coefficients: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.marginal not in _MARGINALS:
            raise ValueError(f"marginal must be one of {_MARGINALS}, got {self.marginal!r}")
        if int(self.n) < 2:
            raise ValueError("n must be at least 2")
        if self.family == "ar1" and not abs(self.phi) < 1:
            raise ValueError(f"ar1 needs |phi| < 1, got {self.phi}")
        burn = self.burn_in
        if burn is None:
            burn = 1000 if self.family == "ar1" else 0
        if burn < 0:
            raise ValueError("burn_in must be non-negative")
        object.__setattr__(self, "burn_in", int(burn))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))

    @property
    def mixing_class(self):
        if self.family == "iid":
            return "independent"
        if self.family == "ar1":
            return "geometric_beta"
        return f"m_dependent({len(self.coefficients)})"

    @property
    def dependence_range(self):
        """Lags beyond which the latent correlation is exactly 0 (None if infinite)."""
        if self.family == "iid":
            return 0
        if self.family == "ma_q":
            return len(self.coefficients)
        return 0 if self.phi == 0 else None

    def latent_autocorrelation(self, k):
        k = abs(int(k))
        if k == 0:
            return 1.0
        if self.family == "iid":
            return 0.0
        if self.family == "ar1":
            return float(self.phi ** k)
        theta = np.concatenate([[1.0], self.coefficients])
        if k >= theta.size:
            return 0.0
        return float(theta[:-k] @ theta[k:] / (theta @ theta))

    def describe(self):
        d = {
            "family": self.family,
            "marginal": self.marginal,
            "n": self.n,
            "seed": self.seed,
            "burn_in": self.burn_in,
            "mixing_class": self.mixing_class,
        }
        if self.family == "ar1":
            d["phi"] = self.phi
        if self.family == "ma_q":
            d["coefficients"] = list(self.coefficients)
        return d


def latent_path(spec):
    """The unit-variance Gaussian path before the marginal transform."""
    rng = stream(spec.seed)
    total = spec.n + spec.burn_in
    if spec.family == "iid":
        z = rng.standard_normal(total)
    elif spec.family == "ar1":
        phi = spec.phi
        eps = rng.standard_normal(total) * np.sqrt(1 - phi**2)
        # stationary start, so burn-in is a safety margin rather than a necessity
        z0 = rng.standard_normal()
        z, _ = signal.lfilter([1.0], [1.0, -phi], eps, zi=[phi * z0])
    else:
        theta = np.concatenate([[1.0], spec.coefficients])
        q = theta.size - 1
        eps = rng.standard_normal(total + q)
        z = np.convolve(eps, theta, mode="valid") / np.sqrt(theta @ theta)
    return np.asarray(z[spec.burn_in:], dtype=float)


def generate(spec):
    """Draw a series; identical output for identical specs."""
    z = latent_path(spec)
    x = stats.norm.cdf(z) if spec.marginal == "uniform01" else z
    return SeriesSample(x, provenance=spec.describe())


def inject_change(sample, t0, shift):
    """Add ``shift`` to every X_i with i > [n t0]."""
    sample = as_sample(sample)
    if not 0 < t0 <= 1:
        raise ValueError(f"t0 must lie in (0, 1], got {t0}")
    n = sample.n
    k = int(np.floor(n * t0 + 1e-12))
    x = np.array(sample.values)
    x[k:] += shift
    prov = sample.provenance
    prov = dict(prov) if isinstance(prov, dict) else {"source": prov}
    prov["change"] = {"t0": t0, "shift": shift, "index": k}
    return SeriesSample(x, provenance=prov)


def with_n(spec, n, seed=None):
    return replace(spec, n=n, seed=spec.seed if seed is None else seed)
