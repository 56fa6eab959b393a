"""Effective sample size, efficiency, and the step-size / segment-count tuners.

ESS uses the autoregressive spectral estimator: fit an AR(p) model by
Yule-Walker with the order chosen by AIC, take the spectral density at
frequency zero as sigma2_pred / (1 - sum phi_j)^2, and set
ESS = n * var(x) / spec0.  A batch-means estimator is included as an
independent cross-check only; all reported numbers come from the AR
estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dynamics import DiagonalMass, StepCounter
from .sampler import AapsConfig, ChainResult, Scheme, run_aaps

__all__ = [
    "ess",
    "ess_batch_means",
    "efficiency",
    "min_ess",
    "KDiagnostic",
    "k_diagnostic",
    "segment_placement_pmf",
    "write_kdiag_csv",
    "TuneEpsilonResult",
    "tune_epsilon",
    "TuneKResult",
    "tune_k",
]


# ---------------------------------------------------------------------------
# effective sample size
# ---------------------------------------------------------------------------


def _autocovariances(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased (1/n) autocovariances c_0..c_max_lag via FFT."""
    n = len(x)
    xc = x - x.mean()
    m = 1
    while m < 2 * n:
        m <<= 1
    f = np.fft.rfft(xc, m)
    acov = np.fft.irfft(f * np.conj(f), m)[: max_lag + 1]
    return acov / n


def _levinson_durbin(c: np.ndarray, max_order: int):
    """Yule-Walker solutions for all orders 0..max_order.

    Returns (coeffs per order, prediction variance per order); orders where
    the recursion degenerates are truncated away.
    """
    var = c[0]
    phis = [np.zeros(0)]
    variances = [var]
    phi = np.zeros(0)
    for k in range(1, max_order + 1):
        if var <= 0:
            break
        acc = c[k] - (phi @ c[k - 1:0:-1] if k > 1 else 0.0)
        ref = acc / var
        new_phi = np.empty(k)
        new_phi[: k - 1] = phi - ref * phi[::-1]
        new_phi[k - 1] = ref
        var = var * (1.0 - ref * ref)
        phi = new_phi
        phis.append(phi)
        variances.append(var)
    return phis, variances


def _spectrum0_ar(x: np.ndarray) -> float:
    """AR-fitted spectral density at frequency zero (AIC order selection)."""
    n = len(x)
    max_order = min(n - 1, int(10.0 * math.log10(n)))
    c = _autocovariances(x, max_order)
    if c[0] <= 0:
        return 0.0
    phis, variances = _levinson_durbin(c, max_order)
    aics = [n * math.log(max(v, 1e-300)) + 2.0 * k for k, v in enumerate(variances)]
    best = int(np.argmin(aics))
    denom = 1.0 - float(np.sum(phis[best]))
    if denom == 0.0:
        return 0.0
    return variances[best] / denom**2


def ess(samples: Sequence[float]) -> float:
    """Effective sample size of a scalar chain (AR-spectral estimator).

    A constant chain has ESS 0 by convention; strongly antithetic chains
    can legitimately exceed the chain length.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1:
        raise ValueError("ess expects a 1-d sequence; apply per component")
    n = len(x)
    if n < 100:
        raise ValueError(f"need at least 100 samples for a stable estimate, got {n}")
    if np.all(x == x[0]):
        return 0.0
    var = float(np.var(x, ddof=1))
    if var == 0.0:
        return 0.0
    spec0 = _spectrum0_ar(x)
    if spec0 <= 0.0:
        return 0.0
    return n * var / spec0


def ess_batch_means(samples: Sequence[float], n_batches: int = 30) -> float:
    """Batch-means ESS; used only to sanity-check the AR estimator."""
    x = np.asarray(samples, dtype=float)
    n = len(x)
    if n < 2 * n_batches:
        raise ValueError("too few samples for the requested batch count")
    var = float(np.var(x, ddof=1))
    if var == 0.0:
        return 0.0
    size = n // n_batches
    trimmed = x[: size * n_batches].reshape(n_batches, size)
    bm_var = float(np.var(trimmed.mean(axis=1), ddof=1))
    if bm_var <= 0.0:
        return float(n)
    return n * var / (size * bm_var)


def min_ess(samples: np.ndarray) -> float:
    """Minimum per-component ESS of an (n, d) sample array."""
    return min(ess(samples[:, j]) for j in range(samples.shape[1]))


def efficiency(ess_values, n_leapfrog: int) -> float:
    """Minimum component ESS per leapfrog step: the cost-aware yardstick."""
    if n_leapfrog <= 0:
        raise ValueError("leapfrog count must be positive")
    return float(np.min(ess_values)) / n_leapfrog


# ---------------------------------------------------------------------------
# segment-count diagnostic
# ---------------------------------------------------------------------------


def segment_placement_pmf(k_star: int) -> np.ndarray:
    """P(|j| = k) when the window offset and the proposal segment are uniform.

    The window placement alone makes small |j| more likely: p(0) = 1/(K+1)
    and p(k) = 2 (K+1-k)/(K+1)^2 for k >= 1.
    """
    if k_star < 1:
        raise ValueError("k_star must be >= 1")
    k = np.arange(k_star + 1, dtype=float)
    p = 2.0 * (k_star + 1.0 - k) / (k_star + 1.0) ** 2
    p[0] = 1.0 / (k_star + 1.0)
    return p


@dataclass
class KDiagnostic:
    """Normalised proposal-segment profile and its argmax."""

    k_star: int
    counts: np.ndarray
    p: np.ndarray
    m: np.ndarray
    m_bar: np.ndarray
    k_hat: int


def k_diagnostic(counts: Sequence[int], k_star: int) -> KDiagnostic:
    """Fold the |j| histogram against the placement pmf.

    m(k) = n(k)/p(k) removes the placement bias; m_bar rescales the profile
    to sum to 100 (K*+1) so runs of different lengths are comparable.  Ties
    in the argmax go to the smallest k (cheaper at equal evidence).
    """
    counts = np.asarray(counts, dtype=float)
    if counts.shape != (k_star + 1,):
        raise ValueError(f"histogram must have K*+1 = {k_star + 1} entries, got {counts.shape}")
    if counts.sum() <= 0:
        raise ValueError("histogram is empty")
    p = segment_placement_pmf(k_star)
    m = counts / p
    m_bar = 100.0 * (k_star + 1.0) * m / m.sum()
    return KDiagnostic(
        k_star=k_star,
        counts=counts.astype(np.int64),
        p=p,
        m=m,
        m_bar=m_bar,
        k_hat=int(np.argmax(m)),
    )


def write_kdiag_csv(diag: KDiagnostic, path) -> None:
    """CSV report: a comment line carrying K-hat, then (k, n, p, m, m_bar) rows."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# k_hat={diag.k_hat} k_star={diag.k_star}\n")
        fh.write("k,n,p,m,m_bar\n")
        for k in range(diag.k_star + 1):
            fh.write(f"{k},{int(diag.counts[k])},{diag.p[k]!r},{diag.m[k]!r},{diag.m_bar[k]!r}\n")


# ---------------------------------------------------------------------------
# step-size tuning
# ---------------------------------------------------------------------------


def _default_eps_grid() -> np.ndarray:
    return np.geomspace(0.01, 4.0, 48)


@dataclass
class TuneEpsilonResult:
    epsilon: float
    acceptance: float
    stage1_epsilon: float
    ok: bool
    history: list = field(default_factory=list)


def tune_epsilon(target, mass: Optional[DiagonalMass] = None, eps_grid: Optional[np.ndarray] = None,
                 n_stage1: int = 200, n_stage2: int = 2000, k_stage2: int = 10,
                 accept_low: float = 0.75, accept_high: float = 0.87, shrink: float = 0.9,
                 scheme: Scheme = Scheme.PI_SJD, delta: float = 1000.0,
                 seed: int = 0, x0: Optional[np.ndarray] = None,
                 max_shrinks: int = 80) -> TuneEpsilonResult:
    """Two-stage step-size search.

    Stage 1 scans a geometric grid from the top for the largest step size
    whose K=0 runs never breach the energy-spread guard.  Stage 2 runs a
    longer window (K=10 by default) and shrinks the step size geometrically
    until the empirical acceptance rate reaches `accept_low`; acceptance is
    monotone non-increasing in the step size, so the window
    [accept_low, accept_high] is entered from below.
    """
    grid = np.sort(np.asarray(eps_grid if eps_grid is not None else _default_eps_grid()))[::-1]
    mass = mass if mass is not None else DiagonalMass.identity(target.dim)
    history = []

    stage1 = None
    for eps in grid:
        cfg = AapsConfig(k=0, epsilon=float(eps), scheme=scheme, delta=delta, mass=mass)
        res = run_aaps(target, cfg, n_stage1, x0=x0, rng=np.random.default_rng(seed))
        history.append(("stage1", float(eps), res.n_unstable / n_stage1))
        if res.n_unstable == 0:
            stage1 = float(eps)
            break
    if stage1 is None:
        return TuneEpsilonResult(float(grid[-1]), 0.0, float(grid[-1]), False, history)

    eps = stage1
    x_start = x0
    acc = 0.0
    for _ in range(max_shrinks):
        cfg = AapsConfig(k=k_stage2, epsilon=eps, scheme=scheme, delta=delta, mass=mass)
        res = run_aaps(target, cfg, n_stage2, x0=x_start, rng=np.random.default_rng(seed + 1))
        acc = res.acceptance_rate
        history.append(("stage2", eps, acc))
        x_start = res.samples[-1]
        if acc >= accept_low:
            return TuneEpsilonResult(eps, acc, stage1, True, history)
        eps *= shrink
    return TuneEpsilonResult(eps, acc, stage1, False, history)


# ---------------------------------------------------------------------------
# segment-count tuning
# ---------------------------------------------------------------------------


@dataclass
class TuneKResult:
    k_hat: int
    k_star: int
    stabilized: bool
    iterations_used: int
    diagnostic: KDiagnostic
    budget_exhausted: bool = False


def tune_k(target, epsilon: float, k_star: int = 20, mass: Optional[DiagonalMass] = None,
           scheme: Scheme = Scheme.PI_SJD, delta: float = 1000.0,
           chunk: int = 2000, max_iterations: int = 200_000,
           stab_tol: float = 0.05, escalate_frac: float = 0.9,
           seed: int = 0, x0: Optional[np.ndarray] = None) -> TuneKResult:
    """Pick the segment count from the proposal-segment profile.

    Runs at a deliberately large K*, accumulating the |j| histogram in
    chunks until the normalised profile settles (L1 change between the two
    halves of the run below `stab_tol`), then takes the argmax.  If the
    argmax sits near the top of the window (>= escalate_frac * K*), the
    window was too small: K* doubles and the run restarts.  The 5%
    stability tolerance and the escalation trigger are defaults, not
    canon; override them per target as needed.
    """
    if k_star < 10:
        raise ValueError(f"the probe window should be generous, need k_star >= 10, got {k_star}")
    mass = mass if mass is not None else DiagonalMass.identity(target.dim)
    used = 0
    best: Optional[TuneKResult] = None
    rng = np.random.default_rng(seed)
    while True:
        if best is not None and used >= max_iterations:
            best.budget_exhausted = True
            return best
        cfg = AapsConfig(k=k_star, epsilon=epsilon, scheme=scheme, delta=delta, mass=mass)
        half_hists = [np.zeros(k_star + 1, dtype=np.int64), np.zeros(k_star + 1, dtype=np.int64)]
        x_start = x0
        stabilized = False
        n_run = 0
        while used < max_iterations:
            for half in (0, 1):
                res = run_aaps(target, cfg, chunk, x0=x_start, rng=rng)
                half_hists[half] += res.seg_hist
                x_start = res.samples[-1]
                used += chunk
                n_run += chunk
            d1 = k_diagnostic(half_hists[0], k_star)
            d2 = k_diagnostic(half_hists[1], k_star)
            change = float(np.abs(d1.m_bar - d2.m_bar).sum() / d1.m_bar.sum())
            if change < stab_tol:
                stabilized = True
                break
        diag = k_diagnostic(half_hists[0] + half_hists[1], k_star)
        best = TuneKResult(diag.k_hat, k_star, stabilized, used, diag,
                           budget_exhausted=not stabilized and used >= max_iterations)
        if used >= max_iterations:
            return best
        if diag.k_hat >= escalate_frac * k_star:
            k_star *= 2
            continue
        return best
