from fractions import Fraction

import numpy as np
import pytest

from aaps.diagnostics import (
    ess,
    ess_batch_means,
    efficiency,
    k_diagnostic,
    segment_placement_pmf,
    tune_epsilon,
    tune_k,
    write_kdiag_csv,
)
from aaps.sampler import AapsConfig, run_aaps
from aaps.targets import make_product_target, scale_progression


# ---------------------------------------------------------------------------
# effective sample size
# ---------------------------------------------------------------------------


def test_ess_iid_sequence():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(10_000)
    assert 0.9 <= ess(x) / len(x) <= 1.1


def test_ess_ar1_matches_closed_form():
    rho = 0.9
    rng = np.random.default_rng(1)
    n = 100_000
    x = np.empty(n)
    x[0] = rng.standard_normal()
    innov = rng.standard_normal(n - 1)
    for i in range(1, n):
        x[i] = rho * x[i - 1] + innov[i - 1]
    ratio = ess(x) / n
    expect = (1 - rho) / (1 + rho)
    assert abs(ratio - expect) / expect < 0.25


def test_ess_antithetic_sequence_exceeds_n():
    x = np.tile([1.0, -1.0], 500)
    val = ess(x)
    assert np.isfinite(val)
    assert val > len(x)


def test_ess_constant_sequence_is_zero():
    assert ess(np.full(500, 3.7)) == 0.0


def test_ess_shift_scale_invariant():
    rng = np.random.default_rng(2)
    x = np.cumsum(rng.standard_normal(5000)) * 0.1 + rng.standard_normal(5000)
    a = ess(x)
    b = ess(5.0 - 2.5 * x)
    assert a == pytest.approx(b, rel=1e-8)


def test_ess_requires_enough_samples():
    with pytest.raises(ValueError):
        ess(np.arange(50, dtype=float))


def test_batch_means_cross_check():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(20_000)
    bm = ess_batch_means(x)
    ar = ess(x)
    assert 0.5 < bm / ar < 2.0


# ---------------------------------------------------------------------------
# efficiency
# ---------------------------------------------------------------------------


def test_efficiency_direct_quotient():
    assert efficiency([100.0, 200.0], 1000) == pytest.approx(0.1)


def test_efficiency_halves_with_doubled_work():
    e1 = efficiency([150.0, 80.0], 500)
    e2 = efficiency([150.0, 80.0], 1000)
    assert e1 == pytest.approx(2 * e2)


def test_efficiency_rejects_zero_work():
    with pytest.raises(ValueError):
        efficiency([10.0], 0)


def test_relative_efficiency_composition():
    eff_aaps = efficiency([120.0], 3000)
    eff_other = efficiency([90.0], 4000)
    rel = eff_other / eff_aaps
    assert rel == pytest.approx((90.0 / 4000) / (120.0 / 3000))


# ---------------------------------------------------------------------------
# segment-count diagnostic
# ---------------------------------------------------------------------------


def test_placement_pmf_k2():
    np.testing.assert_allclose(segment_placement_pmf(2), [1 / 3, 4 / 9, 2 / 9], rtol=1e-14)


def test_placement_pmf_sums_to_one_exactly():
    for k in list(range(1, 50)) + [100, 500, 1000]:
        # rational arithmetic: no float tolerance involved
        total = Fraction(1, k + 1) + sum(
            Fraction(2 * (k + 1 - j), (k + 1) ** 2) for j in range(1, k + 1))
        assert total == 1
        assert abs(segment_placement_pmf(k).sum() - 1.0) < 1e-12


def test_diagnostic_normalisation_and_argmax():
    k_star = 9
    rng = np.random.default_rng(4)
    counts = rng.integers(1, 100, size=k_star + 1)
    diag = k_diagnostic(counts, k_star)
    assert diag.m_bar.sum() == pytest.approx(100.0 * (k_star + 1), abs=1e-9)
    assert diag.k_hat == int(np.argmax(diag.m))


def test_diagnostic_null_case_ties_to_smallest():
    k_star = 6
    # counts exactly proportional to p: p * (k_star+1)^2 is integral
    counts = np.array([7, 12, 10, 8, 6, 4, 2]) * 100
    p = segment_placement_pmf(k_star)
    np.testing.assert_allclose(counts / counts.sum(), p, rtol=1e-12)
    diag = k_diagnostic(counts, k_star)
    assert np.ptp(diag.m) / diag.m[0] < 1e-12  # m is constant
    assert diag.k_hat == 0


def test_diagnostic_scale_invariant():
    k_star = 8
    rng = np.random.default_rng(5)
    counts = rng.integers(1, 50, size=k_star + 1)
    d1 = k_diagnostic(counts, k_star)
    d2 = k_diagnostic(counts * 17, k_star)
    assert d1.k_hat == d2.k_hat
    np.testing.assert_allclose(d1.m_bar, d2.m_bar, rtol=1e-12)


def test_diagnostic_rejects_bad_input():
    with pytest.raises(ValueError):
        k_diagnostic([1, 2, 3], 5)
    with pytest.raises(ValueError):
        k_diagnostic(np.zeros(6), 5)
    with pytest.raises(ValueError):
        segment_placement_pmf(0)


def test_kdiag_csv_format(tmp_path):
    diag = k_diagnostic([10, 30, 20, 5], 3)
    path = tmp_path / "kdiag.csv"
    write_kdiag_csv(diag, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0].startswith("# k_hat=")
    assert lines[1] == "k,n,p,m,m_bar"
    assert len(lines) == 2 + 4


# ---------------------------------------------------------------------------
# tuning procedures
# ---------------------------------------------------------------------------


def unit_gaussian_1d_like():
    prog = scale_progression("SD", 1.0001, 2, seed=0)
    return make_product_target("gaussian", prog)


def test_tune_epsilon_respects_stability_bound():
    # unit-scale Gaussian: the leapfrog is only stable below 2 sigma
    t = unit_gaussian_1d_like()
    res = tune_epsilon(t, n_stage1=150, n_stage2=600, seed=0)
    assert res.stage1_epsilon < 2.0
    assert res.stage1_epsilon > 1.0  # and the search should get close
    assert res.ok
    assert res.acceptance >= 0.75


def test_acceptance_monotone_in_epsilon():
    prog = scale_progression("VAR", 5.0, 6, seed=1)
    t = make_product_target("gaussian", prog)
    rates = []
    for eps in (0.3, 0.6, 0.9, 1.3, 1.7):
        cfg = AapsConfig(k=5, epsilon=eps)
        res = run_aaps(t, cfg, 4000, rng=6)
        rates.append(res.acceptance_rate)
    diffs = np.diff(rates)
    assert np.all(diffs <= 0.02)  # non-increasing up to MC noise


def test_short_paths_optimal_without_scale_heterogeneity():
    # grid-search oracle: on an (essentially) isotropic Gaussian the
    # efficiency argmax over K sits at a small K.  Perfectly equal scales
    # make the diagnostic profile tie across its periodic peaks, so the
    # diagnostic itself is checked just below on mildly uneven scales.
    from aaps.diagnostics import ess as _ess

    t = unit_gaussian_1d_like()
    effs = {}
    for k in (0, 1, 2, 3, 5, 8):
        cfg = AapsConfig(k=k, epsilon=1.6)
        res = run_aaps(t, cfg, 6000, rng=70 + k)
        min_ess = min(_ess(res.samples[:, j]) for j in range(2))
        effs[k] = min_ess / res.n_leapfrog
    best = max(effs, key=effs.get)
    assert best <= 3

    prog = scale_progression("SD", 1.3, 4, seed=2)
    near_iso = make_product_target("gaussian", prog)
    res = tune_k(near_iso, epsilon=1.5, k_star=12, chunk=2500,
                 max_iterations=40_000, seed=7)
    assert res.k_hat <= 3


def test_tune_k_escalates_when_window_too_small():
    # VAR progression with scale ratio 40: the widest component needs ~15
    # segments per half period, well beyond the initial window of 10
    prog = scale_progression("VAR", 40.0, 20, seed=1)
    t = make_product_target("gaussian", prog)
    res = tune_k(t, epsilon=1.2, k_star=10, chunk=1500, max_iterations=60_000, seed=8)
    assert res.k_star > 10  # at least one doubling happened


def test_tune_k_requires_generous_window():
    with pytest.raises(ValueError):
        tune_k(unit_gaussian_1d_like(), epsilon=0.5, k_star=5)
