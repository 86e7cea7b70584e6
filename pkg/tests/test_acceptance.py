"""Acceptance criteria, each at its stated tolerance.

Every test prints one PASS/FAIL line; the lines are repeated in the pytest
terminal summary under "acceptance criteria".
"""

import io
import math
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import record
from ucpd import cli
from ucpd._rng import derive_seed, stream
from ucpd.changepoint import MCSettings, sup_test
from ucpd.covariance import (
    CovarianceModel,
    ConstantCovariance,
    THEOREM2_VARIANTS,
    geometric_sequence,
    limit_cov_theorem1,
    longrun_table,
    weighted_sum_limit,
)
from ucpd.data import EvalGrid
from ucpd.datagen import GeneratorSpec, generate, inject_change
from ucpd.kernels import BUILTIN_KERNELS, make_kernel
from ucpd.uprocess import (
    degenerate_sums_direct,
    direct_block_sum,
    eval_e_prime_n,
    eval_en,
    eval_Rn,
    eval_Wn,
    eval_Wn_prime,
    monotone_split,
    telescoped_block_sum,
)

KERNELS = sorted(BUILTIN_KERNELS)


def _random_case(r):
    """Sample, kernel and grid for random case r (n <= 200)."""
    rng = stream(1000, r)
    n = int(rng.integers(5, 201))
    family = ("iid", "ar1", "ma_q")[r % 3]
    marginal = ("uniform01", "standard_normal")[(r // 3) % 2]
    spec = GeneratorSpec(family, marginal, n=n, seed=derive_seed(1000, r), phi=0.5,
                         coefficients=(0.6, -0.3) if family == "ma_q" else ())
    model = make_kernel(KERNELS[r % len(KERNELS)], marginal)
    grid = EvalGrid.default(n, R=1.5, s_count=int(rng.integers(3, 12)), t_stride=int(rng.integers(1, 8)))
    return generate(spec), model, grid


def test_criterion_01_hoeffding_identities():
    t0 = time.perf_counter()
    worst = 0.0
    for r in range(100):
        x, model, grid = _random_case(r)
        rn, rnp = degenerate_sums_direct(x, model, grid)
        en = eval_en(x, model, grid).values
        ep = eval_e_prime_n(x, model, grid).values
        worst = max(worst,
                    np.max(np.abs(en - eval_Wn(x, model, grid).values - rn.values)),
                    np.max(np.abs(ep - eval_Wn_prime(x, model, grid).values - rnp.values)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 60
    record(1, ok, f"max |e - W - R| over 100 samples = {worst:.2e} (tol 1e-12), {elapsed:.1f}s")
    assert ok


def test_criterion_02_oracle_equivalence_and_speed():
    worst = 0.0
    for r in range(30):
        x, model, grid = _random_case(r)
        for fn in (eval_en, eval_e_prime_n):
            fast = fn(x, model, grid).values
            slow = fn(x, model, grid, method="oracle").values
            worst = max(worst, np.max(np.abs(fast - slow)))

    # speed at n = 5000, |S| = 256: time the fast sweep on the full t-grid and
    # the oracle on a spread of split points, then scale the oracle by the
    # number of pair comparisons (its cost is additive over t and grows like k(n-k))
    n = 5000
    x = generate(GeneratorSpec("iid", "uniform01", n=n, seed=11))
    model = make_kernel("difference")
    grid = EvalGrid.default(n, s_count=256)
    t0 = time.perf_counter()
    fast = eval_e_prime_n(x, model, grid)
    t_fast = time.perf_counter() - t0
    ks = np.array([1, 500, 1250, 2500, 4000, 4999])
    sub = EvalGrid(grid.s_points, ks, n, grid.R)
    t0 = time.perf_counter()
    slow = eval_e_prime_n(x, model, sub, method="oracle")
    t_sub = time.perf_counter() - t0
    all_k = np.arange(n + 1, dtype=float)
    t_oracle = t_sub * np.sum(all_k * (n - all_k)) / np.sum(ks * (n - ks))
    agree = np.max(np.abs(slow.values - fast.values[:, ks]))
    speedup = t_oracle / t_fast
    ok = worst <= 1e-10 and agree <= 1e-10 and speedup >= 10
    record(2, ok, f"max |fast - oracle| = {max(worst, agree):.2e} (tol 1e-10); n=5000 |S|=256: "
                  f"fast {t_fast:.2f}s, oracle ~{t_oracle:.0f}s (extrapolated), speed-up {speedup:.0f}x")
    assert ok


def test_criterion_03_telescoping():
    mismatches = 0
    checked = 0
    for r in range(40):
        rng = stream(3000, r)
        n = int(rng.integers(2, 51))
        h = rng.uniform(-1, 1, size=(n, n))
        for k in range(1, n):
            checked += 1
            mismatches += direct_block_sum(h, k) != telescoped_block_sum(h, k)
    ok = mismatches == 0
    record(3, ok, f"{checked} (array, k) cases, {mismatches} inexact")
    assert ok


def test_criterion_04_monotone_split():
    t0 = time.perf_counter()
    worst_id = 0.0
    min_inc = np.inf
    const = 0.0
    for r in range(30):
        rng = stream(4000, r)
        n = int(rng.integers(20, 401))
        marginal = ("uniform01", "standard_normal")[r % 2]
        spec = GeneratorSpec(("iid", "ar1")[r % 2], marginal, n=n, seed=derive_seed(4000, r), phi=0.5)
        x = generate(spec)
        model = make_kernel(KERNELS[r % len(KERNELS)], marginal)
        grid = EvalGrid.default(n, R=1.5, s_count=9)
        circ, star = monotone_split(x, model, grid)
        wn = eval_Wn(x, model, grid).values
        worst_id = max(worst_id, np.max(np.abs(circ.values - star.values - wn)))
        for f in (circ.values, star.values):
            min_inc = min(min_inc, np.diff(f, axis=0).min(), np.diff(f, axis=1).min())
        const = max(const, np.diff(star.values, axis=1).max() * math.sqrt(n))
    elapsed = time.perf_counter() - t0
    ok = worst_id <= 1e-12 and min_inc >= -1e-12 and const <= 32 and elapsed < 60
    record(4, ok, f"max |xi_circ - xi_star - W_n| = {worst_id:.2e}; smallest increment {min_inc:.2e}; "
                  f"measured constant {const:.3f} (bound 32) in max t-increment <= C n^(-1/2)")
    assert ok


def test_criterion_05_symmetric_collapse():
    rng = stream(5000)
    t = rng.uniform(size=10_000)
    t2 = rng.uniform(size=10_000)
    c = rng.uniform(-2, 2, size=10_000)
    C = ConstantCovariance(c, c, c, c)
    lo, hi = np.minimum(t, t2), np.maximum(t, t2)
    target = lo * (1 - hi) * (1 + 2 * hi - 2 * lo) * c
    err = np.max(np.abs(limit_cov_theorem1(t, t2, 0.0, 0.0, C) - target))
    # the printed empirical-centering forms reduce to the same expression when
    # h1 = h2 (all C_a terms vanish); which form is right is decided by criterion 7
    other = {k: np.max(np.abs(f(t, t2, 0.0, 0.0, C) - target)) for k, f in THEOREM2_VARIANTS.items()}
    ok = err <= 1e-14
    record(5, ok, f"max |theorem-1 form - t(1-t')(1+2t'-2t)C| = {err:.2e} (tol 1e-14); "
                  "empirical-centering variants with equal C: "
                  + ", ".join(f"{k} {v:.1e}" for k, v in sorted(other.items())))
    assert ok


def test_criterion_06_weighted_sum_lemma():
    c = geometric_sequence(0.5)
    f1, lim1 = weighted_sum_limit(c, 0.0, 1.0, order=1)
    f2, lim2 = weighted_sum_limit(c, 0.0, 1.0, order=2)
    v1, v2 = f1(10_000), f2(10_000)
    ok = abs(v1 - 1.5) <= 1e-2 and abs(v2 - 1.0) <= 1e-2 and lim1 == 1.5 and abs(lim2 - 1.0) < 1e-15
    record(6, ok, f"order 1: {v1:.6f} (limit 1.5), order 2: {v2:.6f} (limit 1)")
    assert ok


def test_criterion_07_covariance_vs_monte_carlo():
    n, reps = 2000, 2000
    s = np.array([-0.5, -0.25, 0.0, 0.25, 0.5])
    t = np.array([0.1, 0.3, 0.5, 0.7, 0.9])
    grid = EvalGrid.from_t_points(s, t, n, 0.5)
    model = make_kernel("difference")
    half = EvalGrid.from_t_points([0.0], [0.5], n, 0.5)
    t0 = time.perf_counter()
    ep = np.empty((reps, s.size * t.size))
    w_half = np.empty(reps)
    for r in range(reps):
        x = generate(GeneratorSpec("iid", "uniform01", n=n, seed=derive_seed(7000, r)))
        ep[r] = eval_e_prime_n(x, model, grid).values.ravel()
        w_half[r] = eval_Wn(x, model, half).values[0, 0]
    elapsed = time.perf_counter() - t0
    mc = np.cov(ep, rowvar=False)

    spec = GeneratorSpec("iid", "uniform01", n=n)
    C = longrun_table(CovarianceModel("closed_form", series_model=spec), model, s)
    S, T = np.meshgrid(s, t, indexing="ij")
    S, T = S.ravel(), T.ravel()
    rel = {}
    for name, f in THEOREM2_VARIANTS.items():
        lim = f(T[:, None], T[None, :], S[:, None], S[None, :], C)
        big = np.abs(lim) > 0.005
        rel[name] = (np.max(np.abs(mc[big] - lim[big]) / np.abs(lim[big])), int(big.sum()))
    var_half = w_half.var(ddof=1)
    var_rel = abs(var_half - 1 / 48) * 48
    derived_rel, count = rel["derived"]
    ok = derived_rel <= 0.25 and var_rel <= 0.20 and count > 0
    record(7, ok, f"derived limit covariance: max rel. error {derived_rel:.3f} on {count} entries > 0.005 "
                  f"(tol 0.25); printed forms: verbatim {rel['verbatim'][0]:.2f}, expanded {rel['expanded'][0]:.2f} "
                  f"(not asserted); Var W_n(0,1/2) = {var_half:.5f} vs 1/48 = {1 / 48:.5f} "
                  f"(rel {var_rel:.3f}, tol 0.20); {elapsed:.0f}s")
    assert ok


def test_criterion_08_remainder_decay():
    ns, reps = (100, 400, 1600), 200
    model = make_kernel("difference")
    t0 = time.perf_counter()
    means = []
    for n in ns:
        grid = EvalGrid.default(n)
        sups = [eval_Rn(generate(GeneratorSpec("ar1", "uniform01", n=n, seed=derive_seed(8000, n, r), phi=0.5)),
                        model, grid).sup_abs()
                for r in range(reps)]
        means.append(float(np.mean(sups)))
    elapsed = time.perf_counter() - t0
    ok = all(b <= a for a, b in zip(means, means[1:]))
    record(8, ok, "mean sup|R_n|: " + ", ".join(f"n={n}: {m:.4f}" for n, m in zip(ns, means))
           + f"; {elapsed:.0f}s")
    assert ok


def test_criterion_09_size_and_power():
    n, reps, alpha = 2000, 500, 0.05
    grid = EvalGrid.default(n, R=1.0, s_count=11, t_stride=40)
    mc = MCSettings(m=2000, seed=9)
    t0 = time.perf_counter()
    null_rej = 0
    alt_rej = 0
    locs = []
    for r in range(reps):
        x = generate(GeneratorSpec("iid", "uniform01", n=n, seed=derive_seed(9000, 0, r)))
        null_rej += sup_test(x, grid, alpha, mc).reject
        y = generate(GeneratorSpec("iid", "standard_normal", n=n, seed=derive_seed(9000, 1, r)))
        rep = sup_test(inject_change(y, 0.5, 1.0), grid, alpha, mc)
        alt_rej += rep.reject
        locs.append(rep.argmax_t)
    elapsed = time.perf_counter() - t0
    size, power, med = null_rej / reps, alt_rej / reps, float(np.median(locs))
    ok = 0.02 <= size <= 0.10 and power >= 0.9 and abs(med - 0.5) <= 0.1
    record(9, ok, f"size {size:.3f} (in [0.02, 0.10]), power {power:.3f} (>= 0.9), "
                  f"median argmax_t {med:.3f} (within 0.1 of 0.5); {elapsed:.0f}s")
    assert ok


def _pipeline(tmp: Path):
    """Run every seeded CLI pipeline once; return the bytes of all artifacts."""
    tmp.mkdir()
    quiet = io.StringIO()
    steps = [
        ["simulate", "--family", "ar1", "--phi", "0.5", "--n", "300", "--seed", "4",
         "--output", str(tmp / "x.csv")],
        ["simulate", "--family", "iid", "--n", "300", "--seed", "5", "--change-t0", "0.5",
         "--shift", "0.5", "--output", str(tmp / "y.csv")],
        ["compute", "--input", str(tmp / "x.csv"), "--labels", ",".join(("en", "Wn", "Rn", "en_prime")),
         "--s-count", "7", "--t-stride", "10", "--output", str(tmp / "fields")],
        ["compute", "--input", str(tmp / "x.csv"), "--labels", "Wn_prime,xi_star", "--components", "fitted",
         "--format", "json", "--s-count", "5", "--t-stride", "25", "--output", str(tmp / "fields")],
        ["test", "--input", str(tmp / "y.csv"), "--s-count", "7", "--t-stride", "10", "--m", "300",
         "--seed", "3", "--output", str(tmp / "test.json")],
        ["test", "--input", str(tmp / "y.csv"), "--s-count", "3", "--t-stride", "10", "--m", "300",
         "--functional", "integral_mu", "--mu", "1,2,1", "--output", str(tmp / "itest.json")],
        ["critvals", "--family", "ar1", "--phi", "0.5", "--n", "100", "--s-count", "5", "--t-stride", "10",
         "--m", "300", "--alpha", "0.01,0.05,0.1", "--output", str(tmp / "cv.json")],
        ["validate", "--ns", "40,80", "--m", "50", "--s-count", "5", "--output", str(tmp / "val.json")],
    ]
    for argv in steps:
        assert cli.main(argv, out=quiet, err=quiet) == 0, (argv, quiet.getvalue())
    return {p.relative_to(tmp).as_posix(): p.read_bytes() for p in sorted(tmp.rglob("*")) if p.is_file()}


def test_criterion_10_determinism(tmp_path):
    a = _pipeline(tmp_path / "a")
    b = _pipeline(tmp_path / "b")
    # artifacts mention their own paths nowhere, so equal names must mean equal bytes
    differ = [k for k in a if a[k] != b.get(k)]
    ok = set(a) == set(b) and not differ and len(a) >= 10
    record(10, ok, f"{len(a)} artifacts from simulate/compute/test/critvals/validate, "
                   f"{len(differ)} differ between two runs")
    assert ok
