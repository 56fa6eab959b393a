"""Shared test oracles, independent of the implementation paths they check."""

import numpy as np


def finite_difference_gradient(f, x, h=1e-5):
    """Central finite differences of a scalar function, one coordinate at a time."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def assert_gradient_matches(target, points, h=1e-5, atol=1e-4, rtol=1e-4):
    """Check the analytic gradient against central differences at many points."""
    for x in points:
        fd = finite_difference_gradient(target.u, x, h=h)
        g = target.grad_u(x)
        tol = np.maximum(atol, rtol * np.abs(g))
        worst = np.max(np.abs(fd - g) - tol)
        assert np.all(np.abs(fd - g) <= tol), (
            f"gradient mismatch for {target.name} at {x[:4]}...: excess {worst:.2e}"
        )


def random_points(dim, n, scale=2.0, seed=0):
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, scale, size=(n, dim))
