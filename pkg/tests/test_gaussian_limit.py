import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from ucpd.covariance import ConstantCovariance, limit_cov_theorem1
from ucpd.data import EvalGrid
from ucpd.gaussian_limit import (
    NumericalError,
    build_field,
    critical_value,
    critical_value_table,
    factorize,
    functional_values,
    mc_critical_value,
    mc_p_value,
    sample_paths,
)

POINT = EvalGrid([0.0], [1], 2, 1.0)


def const_cov(v):
    return lambda s, t, s2, t2: np.full(np.broadcast(s, t2).shape, v)


def grid5():
    return EvalGrid.from_t_points(np.linspace(-0.5, 0.5, 5), [0.1, 0.3, 0.5, 0.7, 0.9], 10, 0.5)


def test_zero_field():
    g = grid5()
    f = build_field(g, const_cov(0.0))
    assert not np.any(f.factor) and f.jitter_used == 0
    assert not np.any(sample_paths(f, 5, 0))
    assert critical_value(f, "sup_abs", 0.05, 100, 0) == 0.0


def test_scalar_field():
    f = build_field(POINT, const_cov(2.25))
    assert f.factor.tolist() == [[1.5]]
    paths = sample_paths(f, 100_000, 1)
    assert paths.shape == (100_000, 1, 1)
    f1 = build_field(POINT, const_cov(1.0))
    assert np.var(sample_paths(f1, 100_000, 2)) == pytest.approx(1.0, abs=0.02)


def test_theorem1_grid_factorizes_with_small_jitter():
    g = grid5()
    C = ConstantCovariance(0.08, 0.08, 0.08, 0.08)
    f = build_field(g, lambda s, t, s2, t2: limit_cov_theorem1(t, t2, s, s2, C))
    assert f.jitter_used <= 1e-10
    assert f.reconstruction_error() <= 1e-8 + f.jitter_used
    assert np.max(np.abs(f.cov - f.cov.T)) <= 1e-12


def test_indefinite_matrix_is_repaired():
    cov = np.array([[1.0, 1.0 + 1e-9], [1.0 + 1e-9, 1.0]])
    L, jitter, clipped = factorize(cov)
    assert clipped > 0
    assert np.max(np.abs(L @ L.T - cov)) <= 1e-8 + jitter


def test_non_finite_covariance_rejected():
    with pytest.raises(NumericalError):
        build_field(POINT, const_cov(np.nan))


def test_determinism_and_per_replication_streams():
    f = build_field(grid5(), lambda s, t, s2, t2: np.exp(-np.abs(s - s2) - np.abs(t - t2)))
    a = sample_paths(f, 10, 7)
    assert np.array_equal(a, sample_paths(f, 10, 7))
    # replication r depends on (seed, r) only
    assert np.array_equal(a[:4], sample_paths(f, 4, 7))
    assert not np.array_equal(a, sample_paths(f, 10, 8))
    assert sample_paths(f, 0, 7).shape == (0, 5, 5)


def test_empirical_covariance_converges():
    g = grid5()
    f = build_field(g, lambda s, t, s2, t2: np.exp(-np.abs(s - s2) - 2 * np.abs(t - t2)))
    m = 20_000
    p = sample_paths(f, m, 3).reshape(m, -1)
    emp = p.T @ p / m
    assert np.max(np.abs(emp - f.cov)) < 5 / np.sqrt(m) * np.max(np.abs(f.cov))


def test_half_normal_quantile():
    f = build_field(POINT, const_cov(4.0))
    cv = critical_value(f, "sup_abs", 0.05, 100_000, 0)
    assert cv == pytest.approx(2 * stats.norm.ppf(0.975), rel=0.02)
    cv2 = critical_value(f, "sup_abs", 0.05, 100_000, 1)
    assert abs(cv - cv2) / cv < 0.02


def test_alpha_validation():
    f = build_field(POINT, const_cov(1.0))
    for a in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            critical_value(f, "sup_abs", a, 10, 0)


def test_quantile_monotone_in_alpha():
    f = build_field(grid5(), lambda s, t, s2, t2: np.exp(-np.abs(s - s2) - np.abs(t - t2)))
    table = critical_value_table(f, [0.01, 0.05, 0.1, 0.5], m=2000, seed=1)
    vals = [r["value"] for r in table]
    assert vals == sorted(vals, reverse=True)
    assert set(table[0]) == {"alpha", "functional", "m", "seed", "value"}


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=1, max_size=40), st.floats(0.001, 0.999), st.floats(-1, 11))
def test_decision_consistency(sims, alpha, stat):
    cv = mc_critical_value(sims, alpha)
    p = mc_p_value(sims, stat)
    assert (stat > cv) == (p < alpha)


def test_functionals():
    paths = np.array([[[1.0, -3.0], [2.0, 0.5]]])
    assert functional_values(paths, "sup_abs")[0] == 3.0
    assert functional_values(paths, "integral_mu", [1.0, 2.0])[0] == max(1 + 8, 9 + 0.5)
    # a point mass on one s gives the squared sup at that s
    assert functional_values(paths, "integral_mu", [0.0, 1.0])[0] == 4.0
    assert np.all(functional_values(np.random.default_rng(0).normal(size=(20, 3, 4)), "sup_abs") >= 0)
    with pytest.raises(ValueError):
        functional_values(paths, "integral_mu", [0.0, 0.0])
    with pytest.raises(ValueError):
        functional_values(paths, "integral_mu", [1.0, -1.0])
    with pytest.raises(ValueError):
        functional_values(paths, "integral_mu", [1.0])
    with pytest.raises(ValueError):
        functional_values(paths, "max")
