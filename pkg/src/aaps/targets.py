"""Target distributions used by the samplers and the benchmark harness.

Every target exposes the potential U(x) = -log pi(x) (up to an additive
constant) together with its hand-derived gradient.  Additive constants are
dropped everywhere: no sampler in this package ever needs a normalised
density.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import log_ndtr

__all__ = [
    "Target",
    "ScaleProgression",
    "scale_progression",
    "make_product_target",
    "make_modified_rosenbrock",
    "make_bimodal",
    "make_radford_neal_gaussian",
]

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class Target:
    """A target density defined through its potential and gradient.

    `u` and `grad_u` take a length-`dim` vector; `u` returns a float and
    `grad_u` a length-`dim` vector.  `u_and_grad`, when supplied, computes
    both in one call (used on the sampler hot path).  `scales`, when set,
    holds the per-component standard deviations of a product target so
    tests and tuning code can consult the true moments.
    """

    name: str
    dim: int
    u: Callable[[np.ndarray], float]
    grad_u: Callable[[np.ndarray], np.ndarray]
    _u_and_grad: Optional[Callable] = None
    scales: Optional[np.ndarray] = None
    param_names: Optional[tuple] = None

    def u_and_grad(self, x: np.ndarray):
        if self._u_and_grad is not None:
            return self._u_and_grad(x)
        return self.u(x), self.grad_u(x)


# ---------------------------------------------------------------------------
# Scale progressions
# ---------------------------------------------------------------------------

_PROGRESSION_KINDS = ("SD", "VAR", "H", "invSD")


@dataclass(frozen=True)
class ScaleProgression:
    """Jittered interpolation of per-component scales between 1 and xi.

    The interpolation weights satisfy w_1 = 0, w_d = 1 and
    w_i = (i - 1 + U_i)/(d - 1) with U_i ~ Unif(-0.5, 0.5) for the interior
    components, so the extreme scales are hit exactly and the ratio of the
    largest to the smallest scale is exactly `xi`.
    """

    kind: str
    xi: float
    d: int
    seed: int
    sigmas: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.kind not in _PROGRESSION_KINDS:
            raise ValueError(f"unknown progression kind {self.kind!r}; expected one of {_PROGRESSION_KINDS}")
        if self.xi <= 1.0:
            raise ValueError(f"scale ratio xi must exceed 1, got {self.xi}")
        if self.d < 2:
            raise ValueError(f"need at least 2 components, got d={self.d}")
        object.__setattr__(self, "sigmas", _progression_sigmas(self.kind, self.xi, self.d, self.seed))


def _progression_sigmas(kind: str, xi: float, d: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    w = np.empty(d)
    w[0] = 0.0
    w[-1] = 1.0
    if d > 2:
        i = np.arange(2, d)
        w[1:-1] = (i - 1 + rng.uniform(-0.5, 0.5, size=d - 2)) / (d - 1)
    if kind == "SD":
        sig = (xi - 1.0) * w + 1.0
    elif kind == "VAR":
        sig = np.sqrt((xi**2 - 1.0) * w + 1.0)
    elif kind == "H":
        sig = 1.0 / np.sqrt((1.0 - 1.0 / xi**2) * w + 1.0 / xi**2)
    else:  # invSD
        sig = 1.0 / ((1.0 - 1.0 / xi) * w + 1.0 / xi)
    return sig


def scale_progression(kind: str, xi: float, d: int, seed: int = 0) -> ScaleProgression:
    """Build a jittered scale progression (kinds: SD, VAR, H, invSD)."""
    return ScaleProgression(kind=kind, xi=xi, d=d, seed=seed)


# ---------------------------------------------------------------------------
# Product targets: Gaussian / logistic / skew-Gaussian components
# ---------------------------------------------------------------------------


def make_product_target(family: str, progression: ScaleProgression, alpha_skew: float = 3.0) -> Target:
    """Product of independent 1-d densities with per-component scales.

    Families:
      * ``gaussian``:       N(0, sigma_i^2)
      * ``logistic``:       logistic density with scale sigma_i
      * ``skew_gaussian``:  2 phi(x/sigma) Phi(alpha_skew x/sigma) / sigma

    The potential is exact up to an additive constant and the gradient is
    analytic.
    """
    sig = progression.sigmas
    d = progression.d
    family = family.lower()

    if family == "gaussian":
        nu = 1.0 / sig**2

        def u_and_grad(x):
            g = nu * x
            return 0.5 * float(x @ g), g

        def u(x):
            return 0.5 * float(x @ (nu * x))

        def grad_u(x):
            return nu * x

    elif family == "logistic":
        inv_s = 1.0 / sig

        # U_i = -t + 2 log(1 + e^t) with t = x/sigma; the softplus form keeps
        # both tails finite in double precision.
        def u(x):
            t = x * inv_s
            softplus = np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))
            return float(np.sum(2.0 * softplus - t))

        def grad_u(x):
            return inv_s * np.tanh(0.5 * x * inv_s)

        def u_and_grad(x):
            return u(x), grad_u(x)

    elif family == "skew_gaussian":
        nu = 1.0 / sig**2
        inv_s = 1.0 / sig
        a = float(alpha_skew)

        def u(x):
            t = a * x * inv_s
            return float(0.5 * (x @ (nu * x)) - np.sum(log_ndtr(t)))

        def grad_u(x):
            t = a * x * inv_s
            # phi(t)/Phi(t) evaluated in log space; stable far into the left tail
            mills = np.exp(-0.5 * t * t - 0.5 * _LOG_2PI - log_ndtr(t))
            return nu * x - a * inv_s * mills

        def u_and_grad(x):
            t = a * x * inv_s
            quad = 0.5 * (x @ (nu * x))
            lcdf = log_ndtr(t)
            mills = np.exp(-0.5 * t * t - 0.5 * _LOG_2PI - lcdf)
            return float(quad - np.sum(lcdf)), nu * x - a * inv_s * mills

    else:
        raise ValueError(f"unknown product family {family!r}")

    return Target(
        name=f"{family}_{progression.kind}_d{d}_xi{progression.xi:g}",
        dim=d,
        u=u,
        grad_u=grad_u,
        _u_and_grad=u_and_grad,
        scales=sig,
    )


# ---------------------------------------------------------------------------
# Modified Rosenbrock
# ---------------------------------------------------------------------------


def make_modified_rosenbrock(d: int, beta: float = 1.0, s_squared: Optional[np.ndarray] = None) -> Target:
    """Banana-shaped target with quadratic (leapfrog-stable) tails.

    Pairs (x_{2i-1}, x_{2i}) interact through

        U_i = (x_{2i-1} - sqrt(2) beta s_i)^2 / (2 s_i^2)
            + (x_{2i} - g_i(x_{2i-1}))^2 / 2,
        g_i(v) = v^2 / (sqrt(2) s_i (1 + v^2 / (4 s_i^2))),

    with s_i^2 = 99 (i-1)/(d/2 - 1) + 1 by default (s_1^2 = 1 when d = 2,
    where the schedule denominator vanishes).  The bounded curvature of g_i
    keeps the banana shape while the tails grow only quadratically.
    """
    if d < 2 or d % 2 != 0:
        raise ValueError(f"dimension must be a positive even integer, got {d}")
    n_pairs = d // 2
    if s_squared is None:
        if n_pairs == 1:
            s_squared = np.array([1.0])
        else:
            i = np.arange(1, n_pairs + 1)
            s_squared = 99.0 * (i - 1) / (n_pairs - 1) + 1.0
    s_squared = np.asarray(s_squared, dtype=float)
    if s_squared.shape != (n_pairs,) or np.any(s_squared <= 0):
        raise ValueError("s_squared must hold d/2 positive values")
    s = np.sqrt(s_squared)
    mu = np.sqrt(2.0) * beta * s

    def _parts(x):
        v = x[0::2]
        y = x[1::2]
        q = 1.0 + v * v / (4.0 * s_squared)
        g = v * v / (np.sqrt(2.0) * s * q)
        return v, y, q, g

    def u(x):
        v, y, _, g = _parts(x)
        return float(0.5 * np.sum((v - mu) ** 2 / s_squared) + 0.5 * np.sum((y - g) ** 2))

    def grad_u(x):
        v, y, q, g = _parts(x)
        dg = (2.0 * v * q - v**3 / (2.0 * s_squared)) / (np.sqrt(2.0) * s * q * q)
        r = y - g
        out = np.empty_like(x)
        out[0::2] = (v - mu) / s_squared - r * dg
        out[1::2] = r
        return out

    return Target(
        name=f"modified_rosenbrock_d{d}",
        dim=d,
        u=u,
        grad_u=grad_u,
    )


# ---------------------------------------------------------------------------
# Bimodal Gaussian mixture
# ---------------------------------------------------------------------------


def make_bimodal(d: int, a: float) -> Target:
    """Equal-weight mixture of N((-a,0,..), I) and N((a,0,..), 100 I).

    The log density and its gradient are evaluated through a log-sum-exp of
    the two component log densities, so widely separated modes stay stable.
    """
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    var2 = 100.0
    # component log-normalisers differ, so they cannot be dropped
    logz1 = 0.0
    logz2 = -0.5 * d * np.log(var2)

    def _component_logs(x):
        r1 = x.copy()
        r1[0] += a
        r2 = x.copy()
        r2[0] -= a
        l1 = -0.5 * float(r1 @ r1) + logz1
        l2 = -0.5 * float(r2 @ r2) / var2 + logz2
        return r1, r2, l1, l2

    def u(x):
        _, _, l1, l2 = _component_logs(x)
        return -float(np.logaddexp(l1, l2))

    def u_and_grad(x):
        r1, r2, l1, l2 = _component_logs(x)
        lse = np.logaddexp(l1, l2)
        w1 = np.exp(l1 - lse)
        w2 = np.exp(l2 - lse)
        return -float(lse), w1 * r1 + (w2 / var2) * r2

    def grad_u(x):
        return u_and_grad(x)[1]

    return Target(
        name=f"bimodal_d{d}_a{a:g}",
        dim=d,
        u=u,
        grad_u=grad_u,
        _u_and_grad=u_and_grad,
    )


# ---------------------------------------------------------------------------
# Linearly spaced product Gaussian (online HMC/NUTS comparison setup)
# ---------------------------------------------------------------------------


def make_radford_neal_gaussian(d: int = 30, xi: float = 110.0) -> Target:
    """Product Gaussian with standard deviations linearly spaced on [1, xi].

    The blog post this configuration is drawn from does not state the exact
    scale schedule; linear spacing with no jitter is our reading, flagged as
    an approximation rather than asserted.
    """
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    if xi < 1.0:
        raise ValueError(f"scale ratio must be >= 1, got {xi}")
    sig = np.linspace(1.0, xi, d)
    nu = 1.0 / sig**2

    def u_and_grad(x):
        g = nu * x
        return 0.5 * float(x @ g), g

    return Target(
        name=f"rn_gaussian_d{d}_xi{xi:g}",
        dim=d,
        u=lambda x: 0.5 * float(x @ (nu * x)),
        grad_u=lambda x: nu * x,
        _u_and_grad=u_and_grad,
        scales=sig,
    )
