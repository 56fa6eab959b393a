import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from aaps.targets import (
    make_bimodal,
    make_modified_rosenbrock,
    make_product_target,
    make_radford_neal_gaussian,
    scale_progression,
)

from helpers import assert_gradient_matches, finite_difference_gradient, random_points


# ---------------------------------------------------------------------------
# scale progressions
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("kind,first,last", [
    ("SD", 1.0, 20.0),
    ("VAR", 1.0, 20.0),
    ("H", 20.0, 1.0),
    ("invSD", 20.0, 1.0),
])
def test_progression_endpoints(kind, first, last):
    prog = scale_progression(kind, 20.0, 12, seed=5)
    assert prog.sigmas[0] == pytest.approx(first, rel=1e-14)
    assert prog.sigmas[-1] == pytest.approx(last, rel=1e-14)


@given(
    kind=st.sampled_from(["SD", "VAR", "H", "invSD"]),
    xi=st.floats(min_value=1.01, max_value=200.0),
    d=st.integers(min_value=2, max_value=80),
    seed=st.integers(min_value=0, max_value=2**31),
)
@settings(max_examples=60, deadline=None)
def test_progression_ratio_is_xi(kind, xi, d, seed):
    sig = scale_progression(kind, xi, d, seed).sigmas
    assert np.all(sig > 0)
    assert sig.max() / sig.min() == pytest.approx(xi, rel=1e-12)


def test_progression_jitter_reproducible():
    a = scale_progression("VAR", 10.0, 30, seed=77).sigmas
    b = scale_progression("VAR", 10.0, 30, seed=77).sigmas
    c = scale_progression("VAR", 10.0, 30, seed=78).sigmas
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_progression_interior_weights_formula():
    d, xi, seed = 10, 5.0, 3
    sig = scale_progression("SD", xi, d, seed).sigmas
    rng = np.random.default_rng(seed)
    u = rng.uniform(-0.5, 0.5, size=d - 2)
    w = (np.arange(2, d) - 1 + u) / (d - 1)
    np.testing.assert_allclose(sig[1:-1], (xi - 1) * w + 1, rtol=1e-14)


def test_progression_rejects_bad_config():
    with pytest.raises(ValueError):
        scale_progression("SD", 1.0, 10)
    with pytest.raises(ValueError):
        scale_progression("SD", 0.5, 10)
    with pytest.raises(ValueError):
        scale_progression("SD", 5.0, 1)
    with pytest.raises(ValueError):
        scale_progression("quadratic", 5.0, 10)


# ---------------------------------------------------------------------------
# product targets
# ---------------------------------------------------------------------------


def test_standard_normal_component():
    prog = scale_progression("SD", 2.0, 2, seed=0)
    # component 1 has sigma = 1; check it behaves as a standard normal
    t = make_product_target("gaussian", prog)
    e1 = np.array([2.0, 0.0])
    assert t.grad_u(e1)[0] == pytest.approx(2.0)
    x = np.array([1.5, 0.0])
    assert t.u(x) - t.u(np.zeros(2)) == pytest.approx(1.5**2 / 2)


def test_logistic_gradient_zero_at_origin():
    prog = scale_progression("SD", 3.0, 4, seed=1)
    t = make_product_target("logistic", prog)
    np.testing.assert_allclose(t.grad_u(np.zeros(4)), 0.0, atol=1e-14)


def test_skew_gaussian_matches_stated_density():
    prog = scale_progression("SD", 2.0, 2, seed=0)  # sigma_1 = 1
    t = make_product_target("skew_gaussian", prog, alpha_skew=3.0)

    def u_ref(v):  # -log[2 phi(x) Phi(3x)] for the unit-scale component
        return -np.log(2.0 * norm.pdf(v) * norm.cdf(3.0 * v))

    x = np.array([0.5, 0.0])
    fd = (u_ref(0.5 + 1e-6) - u_ref(0.5 - 1e-6)) / 2e-6
    assert t.grad_u(x)[0] == pytest.approx(fd, abs=1e-6)


@pytest.mark.parametrize("family", ["gaussian", "logistic", "skew_gaussian"])
@pytest.mark.parametrize("kind", ["SD", "VAR", "H", "invSD"])
def test_product_gradients_match_finite_differences(family, kind):
    prog = scale_progression(kind, 8.0, 6, seed=2)
    t = make_product_target(family, prog)
    assert_gradient_matches(t, random_points(6, 25, scale=3.0, seed=4))


def test_product_targets_factorise():
    prog = scale_progression("VAR", 6.0, 5, seed=9)
    for family in ("gaussian", "logistic", "skew_gaussian"):
        t = make_product_target(family, prog)
        x = np.array([0.7, -1.3, 2.1, 0.05, -0.6])
        u0 = t.u(np.zeros(5))
        total = 0.0
        for i in range(5):
            xi = np.zeros(5)
            xi[i] = x[i]
            total += t.u(xi) - u0
        assert t.u(x) - u0 == pytest.approx(total, rel=1e-10, abs=1e-10)


def test_skew_gaussian_stable_in_far_tail():
    prog = scale_progression("SD", 2.0, 2, seed=0)
    t = make_product_target("skew_gaussian", prog)
    x = np.array([-40.0, 0.0])
    assert np.isfinite(t.u(x))
    assert np.all(np.isfinite(t.grad_u(x)))


def test_u_and_grad_agrees_with_parts():
    prog = scale_progression("H", 4.0, 5, seed=11)
    for family in ("gaussian", "logistic", "skew_gaussian"):
        t = make_product_target(family, prog)
        x = np.linspace(-1, 1, 5)
        u, g = t.u_and_grad(x)
        assert u == pytest.approx(t.u(x))
        np.testing.assert_allclose(g, t.grad_u(x), rtol=1e-13)


# ---------------------------------------------------------------------------
# modified Rosenbrock
# ---------------------------------------------------------------------------


def test_rosenbrock_schedule_values():
    # d=2: the schedule denominator vanishes; first pair uses s^2 = 1
    t2 = make_modified_rosenbrock(2)
    assert t2.dim == 2
    x = np.array([1.0, 0.0])
    g = finite_difference_gradient(t2.u, x)
    np.testing.assert_allclose(t2.grad_u(x), g, atol=1e-5)

    # direct evaluation of 99(i-1)/(d/2-1)+1 at i=2, d=4
    i, n_pairs = 2, 2
    assert 99.0 * (i - 1) / (n_pairs - 1) + 1.0 == pytest.approx(100.0)


def test_rosenbrock_gradient_examples():
    t = make_modified_rosenbrock(4)
    x = np.array([1.0, 1.0, 0.0, 0.0])
    fd = finite_difference_gradient(t.u, x)
    np.testing.assert_allclose(t.grad_u(x), fd, atol=1e-5)
    assert_gradient_matches(t, random_points(4, 25, scale=2.0, seed=5))


def test_rosenbrock_rejects_odd_dimension():
    with pytest.raises(ValueError):
        make_modified_rosenbrock(5)
    with pytest.raises(ValueError):
        make_modified_rosenbrock(0)


# ---------------------------------------------------------------------------
# bimodal mixture
# ---------------------------------------------------------------------------


def test_bimodal_collapses_at_zero_separation():
    t = make_bimodal(1, 0.0)
    # mixture gradient at 0 from the two-component closed form
    x = np.array([0.0])
    g = t.grad_u(x)
    assert np.isfinite(g[0])
    # symmetric mixture: gradient vanishes at the midpoint
    assert g[0] == pytest.approx(0.0, abs=1e-12)
    # off-centre value matches the analytic mixture gradient
    x = np.array([1.3])
    w1 = np.exp(-1.3**2 / 2)
    w2 = np.exp(-1.3**2 / 200) / 10.0
    expect = (w1 * 1.3 + w2 * 1.3 / 100) / (w1 + w2)
    assert t.grad_u(x)[0] == pytest.approx(expect, rel=1e-12)


def test_bimodal_finite_at_mode_centres():
    t = make_bimodal(40, 7.0)
    centre1 = np.zeros(40)
    centre1[0] = -7.0
    centre2 = np.zeros(40)
    centre2[0] = 7.0
    assert np.isfinite(t.u(centre1))
    assert np.isfinite(t.u(centre2))


def test_bimodal_gradient_matches_finite_differences():
    t = make_bimodal(40, 7.0)
    x = np.zeros(40)
    x[0] = 7.0
    fd = finite_difference_gradient(t.u, x)
    np.testing.assert_allclose(t.grad_u(x), fd, atol=1e-5)
    t_small = make_bimodal(3, 2.0)
    assert_gradient_matches(t_small, random_points(3, 25, scale=4.0, seed=6))


def test_bimodal_equal_covariance_reduces_to_gaussian():
    # a=0 with matched covariances would be a single Gaussian; emulate by
    # comparing U differences of the near-collapse against the wide part
    t = make_bimodal(2, 0.0)
    x = np.array([0.4, -0.2])
    assert np.isfinite(t.u(x))
    assert t.u(x) > t.u(np.zeros(2))


# ---------------------------------------------------------------------------
# linearly spaced Gaussian
# ---------------------------------------------------------------------------


def test_rn_gaussian_scales():
    t = make_radford_neal_gaussian(30, 110.0)
    assert t.scales.max() / t.scales.min() == pytest.approx(110.0)
    assert t.scales[1] == pytest.approx(1.0 + 109.0 / 29.0)
    iso = make_radford_neal_gaussian(2, 1.0)
    np.testing.assert_array_equal(iso.scales, np.ones(2))
    assert_gradient_matches(t, random_points(30, 10, scale=5.0, seed=8))
