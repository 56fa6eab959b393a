"""Stochastic volatility posterior: latent AR(1) log-variance with Gaussian data.

Model
-----
    Y_t | x_t        ~ N(0, kappa^2 exp(x_t)),        t = 1..T
    X_1              ~ N(0, sigma^2 / (1 - phi^2))
    X_t | X_{t-1}    ~ N(phi x_{t-1}, sigma^2),       t = 2..T

Priors: pi0(kappa) proportional to 1/kappa (improper), 1/sigma^2 ~
Gamma(shape=10, rate=0.05), and (1 + phi)/2 ~ Beta(20, 1.5).

The sampling space is the unconstrained vector (alpha, beta, gamma, x_1..x_T)
with phi = tanh(alpha/2), kappa = e^beta and sigma^2 = e^gamma.  The log
posterior below includes the change-of-variable Jacobians:

  * kappa:   log pi0(kappa) + log|dkappa/dbeta| = -beta + beta = 0, so beta
    carries a flat (improper) contribution; no truncation is applied since
    the leapfrog never needs a normalised density.
  * sigma^2: with tau = e^{-gamma} ~ Gamma(a, b), the density of gamma is
    exp(-a*gamma - b*e^{-gamma}) up to a constant.
  * phi:     Beta(A, B) on (1+phi)/2 plus the tanh Jacobian gives
    A log(1+phi) + B log(1-phi) = -A softplus(-alpha) - B softplus(alpha)
    up to a constant.

Full log posterior (dropping constants), with s2 = e^gamma:

    sum_t [ -beta - x_t/2 - y_t^2 e^{-x_t - 2 beta} / 2 ]
  + (1/2) log(1 - phi^2) - (T/2) gamma
  - x_1^2 (1 - phi^2) / (2 s2) - sum_{t>=2} (x_t - phi x_{t-1})^2 / (2 s2)
  - a*gamma - b*e^{-gamma} - A*softplus(-alpha) - B*softplus(alpha)
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .targets import Target

__all__ = ["SVModelData", "simulate_sv_data", "make_sv_posterior", "save_sv_csv", "load_sv_csv"]

# prior hyperparameters (Gamma in shape/rate form, Beta in standard form)
_GAMMA_SHAPE = 10.0
_GAMMA_RATE = 0.05
_BETA_A = 20.0
_BETA_B = 1.5


@dataclass(frozen=True)
class SVModelData:
    """Observed series for the stochastic volatility posterior.

    `x_true` keeps the simulated latent log-variance path when the data are
    synthetic; the posterior itself never looks at it.
    """

    y: np.ndarray
    x_true: Optional[np.ndarray] = None

    @property
    def T(self) -> int:
        return len(self.y)


def simulate_sv_data(T: int, phi: float, kappa: float, sigma: float, seed: int = 0) -> SVModelData:
    """Draw a synthetic observation series from the generative model.

    The latent chain starts from its stationary law N(0, sigma^2/(1-phi^2)),
    which requires |phi| < 1.
    """
    if T < 2:
        raise ValueError(f"need at least 2 observations, got T={T}")
    if abs(phi) >= 1.0:
        raise ValueError(f"|phi| must be < 1 for a stationary start, got {phi}")
    if kappa <= 0 or sigma <= 0:
        raise ValueError("kappa and sigma must be positive")
    rng = np.random.default_rng(seed)
    x = np.empty(T)
    x[0] = rng.normal(0.0, sigma / np.sqrt(1.0 - phi**2))
    innov = rng.normal(0.0, sigma, size=T - 1)
    for t in range(1, T):
        x[t] = phi * x[t - 1] + innov[t - 1]
    y = rng.normal(0.0, 1.0, size=T) * kappa * np.exp(0.5 * x)
    return SVModelData(y=y, x_true=x)


def _softplus(t: float) -> float:
    return float(np.maximum(t, 0.0) + np.log1p(np.exp(-abs(t))))


def _sigmoid(t: float) -> float:
    if t >= 0:
        return 1.0 / (1.0 + np.exp(-t))
    e = np.exp(t)
    return e / (1.0 + e)


def make_sv_posterior(data: SVModelData) -> Target:
    """Posterior over (alpha, beta, gamma, x_1..x_T) for the given series."""
    y = np.asarray(data.y, dtype=float)
    if len(y) < 2:
        raise ValueError("need at least 2 observations")
    if not np.all(np.isfinite(y)):
        raise ValueError("observations must be finite")
    T = len(y)
    y2 = y * y
    dim = T + 3

    def u_and_grad(theta: np.ndarray):
        alpha, beta, gamma = theta[0], theta[1], theta[2]
        x = theta[3:]
        phi = np.tanh(0.5 * alpha)
        one_m_phi2 = 1.0 - phi * phi
        s2_inv = np.exp(-gamma)

        # observation likelihood
        e_term = y2 * np.exp(-x - 2.0 * beta)  # y_t^2 / (kappa^2 e^{x_t})
        logp = float(np.sum(-beta - 0.5 * x - 0.5 * e_term))
        d_x = -0.5 + 0.5 * e_term
        d_beta = -T + float(np.sum(e_term))

        # latent AR(1)
        diff = x[1:] - phi * x[:-1]
        ss = float(diff @ diff)
        logp += 0.5 * np.log(one_m_phi2) - 0.5 * T * gamma \
            - 0.5 * s2_inv * (x[0] ** 2 * one_m_phi2 + ss)
        d_x[0] += -x[0] * one_m_phi2 * s2_inv
        d_x[:-1] += phi * diff * s2_inv
        d_x[1:] += -diff * s2_inv
        d_phi = -phi / one_m_phi2 + s2_inv * (phi * x[0] ** 2 + float(diff @ x[:-1]))
        d_gamma = -0.5 * T + 0.5 * s2_inv * (x[0] ** 2 * one_m_phi2 + ss)

        # priors in the unconstrained parameterisation
        logp += -_GAMMA_SHAPE * gamma - _GAMMA_RATE * np.exp(-gamma)
        d_gamma += -_GAMMA_SHAPE + _GAMMA_RATE * np.exp(-gamma)
        logp += -_BETA_A * _softplus(-alpha) - _BETA_B * _softplus(alpha)
        d_alpha_prior = _BETA_A * _sigmoid(-alpha) - _BETA_B * _sigmoid(alpha)

        grad = np.empty(dim)
        grad[0] = -(d_phi * 0.5 * one_m_phi2 + d_alpha_prior)
        grad[1] = -d_beta
        grad[2] = -d_gamma
        grad[3:] = -d_x
        return -logp, grad

    return Target(
        name=f"sv_T{T}",
        dim=dim,
        u=lambda theta: u_and_grad(theta)[0],
        grad_u=lambda theta: u_and_grad(theta)[1],
        _u_and_grad=u_and_grad,
        param_names=("alpha", "beta", "gamma") + tuple(f"x_{t}" for t in range(1, T + 1)),
    )


def save_sv_csv(data: SVModelData, path) -> None:
    """Write the observation series as CSV with columns (t, y_t)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "y"])
        for t, val in enumerate(data.y, start=1):
            w.writerow([t, repr(float(val))])


def load_sv_csv(path) -> SVModelData:
    """Read an observation series written by :func:`save_sv_csv`."""
    ys = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[:2] != ["t", "y"]:
            raise ValueError(f"unexpected SV data header: {header}")
        for row in r:
            ys.append(float(row[1]))
    return SVModelData(y=np.array(ys))
