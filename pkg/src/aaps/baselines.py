"""Comparison kernels sharing the leapfrog integrator: HMC and a basic NUTS.

HMC follows the textbook recipe: refresh the momentum, take L leapfrog
steps, accept with min(1, exp(H0 - H1)).  With ``blur=True`` the step size
of each iteration is drawn uniformly from [0.8 eps, 1.2 eps] (one draw per
iteration, shared by all L steps), which trades a little extra noise for
robustness against near-periodic trajectories.  The blur factor is drawn
even when blurring is off (from the degenerate interval [1, 1]), so a
collapsed blur interval reproduces plain HMC variate-for-variate.

The no-U-turn sampler is the basic slice-sampling variant with a fixed
step size: double the trajectory in a random direction until the ends stop
moving apart, pick a point uniformly from the slice-admissible set via the
usual recursive scheme, and prune any subtree whose energy error exceeds
``delta_max``.  Every leapfrog step is counted, including those in
discarded subtrees: work done is work paid for.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .dynamics import DiagonalMass, PhaseState, StepCounter, leapfrog_step
from .sampler import ChainResult, IterationStats, _as_generator

__all__ = ["HmcConfig", "NutsConfig", "hmc_iteration", "nuts_iteration", "run_hmc", "run_nuts"]


@dataclass
class HmcConfig:
    epsilon: float
    n_steps: int
    blur: bool = False
    blur_range: tuple = (0.8, 1.2)
    mass: Optional[DiagonalMass] = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.n_steps < 1:
            raise ValueError(f"need at least one leapfrog step, got {self.n_steps}")
        lo, hi = self.blur_range
        if not (0 < lo <= hi):
            raise ValueError(f"invalid blur range {self.blur_range}")


@dataclass
class NutsConfig:
    epsilon: float
    max_depth: int = 10
    delta_max: float = 1000.0
    mass: Optional[DiagonalMass] = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_depth < 1:
            raise ValueError(f"max tree depth must be >= 1, got {self.max_depth}")


def hmc_iteration(x_curr: np.ndarray, cfg: HmcConfig, target, rng: np.random.Generator,
                  counter: Optional[StepCounter] = None, cache=None):
    """One HMC transition; returns (x_next, stats, cache)."""
    mass = cfg.mass if cfg.mass is not None else DiagonalMass.identity(len(x_curr))
    if cache is None:
        u0, g0 = target.u_and_grad(x_curr)
    else:
        u0, g0 = cache
    p0 = mass.sample_momentum(rng)
    z0 = PhaseState(x_curr, p0, g0, u0)
    h0 = z0.energy(mass)
    # the factor is drawn even without blurring (from [1, 1]) so that a
    # collapsed blur interval replays a plain-HMC chain variate-for-variate
    lo, hi = cfg.blur_range if cfg.blur else (1.0, 1.0)
    eps = cfg.epsilon * rng.uniform(lo, hi)
    z = z0
    for _ in range(cfg.n_steps):
        z = leapfrog_step(z, eps, mass, target, counter)
        if not np.isfinite(z.u):
            stats = IterationStats(False, 0.0, cfg.n_steps, None, False, step_size=eps)
            return x_curr, stats, (u0, g0)
    h1 = z.energy(mass)
    if not np.isfinite(h1):
        stats = IterationStats(False, 0.0, cfg.n_steps, None, False, step_size=eps)
        return x_curr, stats, (u0, g0)
    log_alpha = h0 - h1
    alpha = 1.0 if log_alpha >= 0.0 else math.exp(log_alpha)
    accepted = alpha >= 1.0 or rng.random() < alpha
    stats = IterationStats(accepted, alpha, cfg.n_steps, None, True, step_size=eps)
    if accepted:
        return z.x, stats, (z.u, z.grad)
    return x_curr, stats, (u0, g0)


def run_hmc(target, cfg: HmcConfig, n_iterations: int, x0: Optional[np.ndarray] = None,
            rng=None, counter: Optional[StepCounter] = None) -> ChainResult:
    rng = _as_generator(rng)
    if cfg.mass is None:
        cfg = replace(cfg, mass=DiagonalMass.identity(target.dim))
    x = np.zeros(target.dim) if x0 is None else np.asarray(x0, dtype=float)
    counter = counter if counter is not None else StepCounter()
    start = counter.n
    samples = np.empty((n_iterations, target.dim))
    alphas = np.empty(n_iterations)
    step_sizes = np.empty(n_iterations)
    n_acc = 0
    cache = None
    for i in range(n_iterations):
        x, stats, cache = hmc_iteration(x, cfg, target, rng, counter, cache)
        samples[i] = x
        alphas[i] = stats.alpha
        step_sizes[i] = stats.step_size
        n_acc += stats.accepted
    return ChainResult(samples, counter.n - start, n_acc / max(n_iterations, 1),
                       np.zeros(1, dtype=np.int64), alphas, step_sizes=step_sizes)


# ---------------------------------------------------------------------------
# no-U-turn sampler
# ---------------------------------------------------------------------------


def _no_uturn(z_minus: PhaseState, z_plus: PhaseState, mass: DiagonalMass) -> bool:
    span = z_plus.x - z_minus.x
    return (span @ mass.velocity(z_minus.p)) >= 0.0 and (span @ mass.velocity(z_plus.p)) >= 0.0


def _build_tree(z: PhaseState, log_u: float, v: int, depth: int, cfg: NutsConfig,
                target, mass: DiagonalMass, rng: np.random.Generator,
                counter: Optional[StepCounter]):
    """Recursively double a trajectory; returns (z_minus, z_plus, z_prop, n, s)."""
    if depth == 0:
        z1 = leapfrog_step(z, v * cfg.epsilon, mass, target, counter)
        h1 = z1.energy(mass)
        if not np.isfinite(h1):
            return z1, z1, z1, 0, False
        n1 = 1 if log_u <= -h1 else 0
        s1 = log_u < cfg.delta_max - h1
        return z1, z1, z1, n1, s1
    z_minus, z_plus, z_prop, n1, s1 = _build_tree(z, log_u, v, depth - 1, cfg, target, mass, rng, counter)
    if s1:
        if v == -1:
            z_minus, _, z_prop2, n2, s2 = _build_tree(z_minus, log_u, v, depth - 1, cfg, target, mass, rng, counter)
        else:
            _, z_plus, z_prop2, n2, s2 = _build_tree(z_plus, log_u, v, depth - 1, cfg, target, mass, rng, counter)
        if n2 > 0 and rng.random() < n2 / (n1 + n2):
            z_prop = z_prop2
        s1 = s2 and _no_uturn(z_minus, z_plus, mass)
        n1 += n2
    return z_minus, z_plus, z_prop, n1, s1


def nuts_iteration(x_curr: np.ndarray, cfg: NutsConfig, target, rng: np.random.Generator,
                   counter: Optional[StepCounter] = None, cache=None):
    """One no-U-turn transition; returns (x_next, stats, cache)."""
    mass = cfg.mass if cfg.mass is not None else DiagonalMass.identity(len(x_curr))
    if cache is None:
        u0, g0 = target.u_and_grad(x_curr)
    else:
        u0, g0 = cache
    own_counter = counter if counter is not None else StepCounter()
    start = own_counter.n
    p0 = mass.sample_momentum(rng)
    z0 = PhaseState(x_curr, p0, g0, u0)
    h0 = z0.energy(mass)
    log_u = math.log(rng.random()) - h0

    z_minus = z_plus = z0
    z_sel = z0
    n = 1
    moved = False
    for depth in range(cfg.max_depth):
        v = 1 if rng.random() < 0.5 else -1
        if v == -1:
            z_minus, _, z_prop, n1, s1 = _build_tree(z_minus, log_u, v, depth, cfg, target, mass, rng, own_counter)
        else:
            _, z_plus, z_prop, n1, s1 = _build_tree(z_plus, log_u, v, depth, cfg, target, mass, rng, own_counter)
        if s1 and n1 > 0 and rng.random() < min(1.0, n1 / n):
            z_sel = z_prop
            moved = True
        n += n1
        if not (s1 and _no_uturn(z_minus, z_plus, mass)):
            break
    n_steps = own_counter.n - start
    stats = IterationStats(moved, 1.0 if moved else 0.0, n_steps, None, True)
    return z_sel.x, stats, (z_sel.u, z_sel.grad)


def run_nuts(target, cfg: NutsConfig, n_iterations: int, x0: Optional[np.ndarray] = None,
             rng=None, counter: Optional[StepCounter] = None) -> ChainResult:
    rng = _as_generator(rng)
    if cfg.mass is None:
        cfg = replace(cfg, mass=DiagonalMass.identity(target.dim))
    x = np.zeros(target.dim) if x0 is None else np.asarray(x0, dtype=float)
    counter = counter if counter is not None else StepCounter()
    start = counter.n
    samples = np.empty((n_iterations, target.dim))
    alphas = np.empty(n_iterations)
    n_moved = 0
    cache = None
    for i in range(n_iterations):
        x, stats, cache = nuts_iteration(x, cfg, target, rng, counter, cache)
        samples[i] = x
        alphas[i] = stats.alpha
        n_moved += stats.accepted
    return ChainResult(samples, counter.n - start, n_moved / max(n_iterations, 1),
                       np.zeros(1, dtype=np.int64), alphas)
