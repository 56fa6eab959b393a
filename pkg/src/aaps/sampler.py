"""The apogee-to-apogee path sampling kernel.

One iteration refreshes the momentum, picks uniformly at random how the
window of K+1 segments straddles the current segment, builds that window
with the leapfrog integrator, proposes one of its points with probability
proportional to a weight function w(z_curr, .), and accepts with the ratio
that makes the extended target exp{-H} invariant:

    alpha = min(1, pi~(prop) w(prop,curr) sum_z w(curr,z)
                 / [pi~(curr) w(curr,prop) sum_z w(prop,z)]).

Weight schemes
--------------
    PI          pi~(z')                    (always accepts)
    SJD         ||x'-x||^2
    PI_SJD      pi~(z') ||x'-x||^2
    AJD         ||x'-x||
    PI_AJD      pi~(z') ||x'-x||
    PI_HALVES   pi~(z') restricted to the opposite half (always accepts)

Schemes PI, SJD and PI_SJD support a streaming mode whose memory use does
not grow with the path: a per-direction weighted reservoir picks the
proposal in one pass, and per-coordinate summary statistics
(T0, T1_k, T2_k) reconstruct the reverse-direction weight sum without
storing any point.  The other schemes keep the path in memory.

All weights and totals are handled in log space (the stochastic-volatility
posterior drives pi~ far outside double-precision linear range).

RNG decision order, fixed so that the streaming and stored engines consume
identical variates: momentum draw, then the window offset c, then one
uniform per visited point after the first on each side (reservoir), then
the forward/backward merge, then the accept draw (skipped when alpha >= 1
or when the proposal is the current point).  Scheme PI_HALVES instead
draws: momentum, c, the half assignment (only when the current point is
the boundary point), then one uniform for the categorical proposal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from .dynamics import (
    DEFAULT_MAX_PATH_STEPS,
    DiagonalMass,
    PhaseState,
    StepCounter,
    build_segment_range,
    stream_segment_range,
)

__all__ = [
    "Scheme",
    "AapsConfig",
    "IterationStats",
    "ChainResult",
    "aaps_iteration",
    "run_aaps",
    "reservoir_select",
    "two_sided_merge",
    "denominator_from_summaries",
    "WeightReservoir",
    "SummaryStats",
    "scheme6_split",
]

_NEG_INF = float("-inf")


def _logaddexp(a: float, b: float) -> float:
    """Scalar log(e^a + e^b) without numpy's per-call dispatch overhead."""
    if a == _NEG_INF:
        return b
    if b == _NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


class Scheme(Enum):
    """Proposal weight w(z, z') used to pick a point from the path."""

    PI = "pi"
    SJD = "sjd"
    PI_SJD = "pi_sjd"
    AJD = "ajd"
    PI_AJD = "pi_ajd"
    PI_HALVES = "pi_halves"


STREAMING_SCHEMES = (Scheme.PI, Scheme.SJD, Scheme.PI_SJD)
ALWAYS_ACCEPT_SCHEMES = (Scheme.PI, Scheme.PI_HALVES)


@dataclass
class AapsConfig:
    """Tuning parameters of the kernel.

    `k` is the number of segments beyond the current one; `delta` the
    maximum allowed spread of H along a path before it is discarded.
    `storage` is "auto" (stream when the scheme allows it), "stream" or
    "stored".
    """

    k: int
    epsilon: float
    scheme: Scheme = Scheme.PI_SJD
    delta: float = 1000.0
    mass: Optional[DiagonalMass] = None
    storage: str = "auto"
    max_path_steps: int = DEFAULT_MAX_PATH_STEPS

    def __post_init__(self):
        if self.k < 0:
            raise ValueError(f"k must be a non-negative integer, got {self.k}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.delta <= 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if isinstance(self.scheme, str):
            self.scheme = Scheme(self.scheme)
        if self.storage not in ("auto", "stream", "stored"):
            raise ValueError(f"unknown storage mode {self.storage!r}")
        if self.storage == "stream" and self.scheme not in STREAMING_SCHEMES:
            raise ValueError(f"scheme {self.scheme.value} has no streaming implementation")

    def resolved_storage(self) -> str:
        if self.storage != "auto":
            return self.storage
        return "stream" if self.scheme in STREAMING_SCHEMES else "stored"


@dataclass
class IterationStats:
    accepted: bool
    alpha: float
    n_leapfrog: int
    abs_segment: Optional[int]
    stable: bool
    step_size: float = 0.0  # realized step size (HMC blurring telemetry)


@dataclass
class ChainResult:
    """Output of a fixed-length run of one kernel."""

    samples: np.ndarray
    n_leapfrog: int
    acceptance_rate: float
    seg_hist: np.ndarray
    alphas: np.ndarray
    n_unstable: int = 0
    step_sizes: Optional[np.ndarray] = None

    @property
    def n_iterations(self) -> int:
        return len(self.samples)


# ---------------------------------------------------------------------------
# streaming building blocks
# ---------------------------------------------------------------------------


class WeightReservoir:
    """Single-pass weighted selection: after offers with log weights lw_i,
    the retained item is item k with probability exp(lw_k) / sum exp(lw_i).

    The first offer seeds the reservoir without consuming randomness; every
    later offer consumes exactly one uniform.
    """

    __slots__ = ("log_total", "item", "seg", "n")

    def __init__(self):
        self.log_total = _NEG_INF
        self.item = None
        self.seg = 0
        self.n = 0

    def offer(self, item, seg: int, log_w: float, rng: np.random.Generator) -> None:
        self.n += 1
        if self.n == 1:
            self.item = item
            self.seg = seg
            self.log_total = log_w
            return
        new_total = _logaddexp(self.log_total, log_w)
        u = rng.random()
        if log_w > _NEG_INF and u < math.exp(log_w - new_total):
            self.item = item
            self.seg = seg
        self.log_total = new_total


def reservoir_select(weighted_items, rng: np.random.Generator):
    """Draw one item from an iterable of (item, log_weight) pairs in one pass.

    Returns (item, log_total).  P(item k) = w_k / sum_i w_i exactly.
    """
    res = WeightReservoir()
    for item, log_w in weighted_items:
        res.offer(item, 0, log_w, rng)
    if res.n == 0:
        raise ValueError("reservoir_select needs at least one item")
    return res.item, res.log_total


def two_sided_merge(forward_item, log_total_fwd: float, backward_item, log_total_bwd: float,
                    rng: np.random.Generator):
    """Combine per-direction reservoir winners into one weighted draw.

    Picks the forward item with probability tot_fwd / (tot_fwd + tot_bwd)
    (totals given in log space), which turns two one-sided weighted draws
    into a correct weighted draw over the whole path.
    """
    log_num = _logaddexp(log_total_fwd, log_total_bwd)
    if log_num == _NEG_INF:
        raise ValueError("both sides have zero total weight")
    if rng.random() < math.exp(log_total_fwd - log_num):
        return forward_item
    return backward_item


class SummaryStats:
    """Per-coordinate sums T0 = sum lam_i, T1 = sum lam_i x_i, T2 = sum lam_i x_i^2.

    `lam_i` is pi~(z_i) (stored via a running max-shift in log space) or 1.
    These 3d numbers are all the state needed to evaluate
    sum_i lam_i ||x_i - x'||^2 at any x'.
    """

    __slots__ = ("log_ref", "s0", "s1", "s2", "use_pi")

    def __init__(self, d: int, use_pi: bool):
        self.log_ref = _NEG_INF
        self.s0 = 0.0
        self.s1 = np.zeros(d)
        self.s2 = np.zeros(d)
        self.use_pi = use_pi

    def add(self, x: np.ndarray, log_pi: float) -> None:
        lam = log_pi if self.use_pi else 0.0
        if lam > self.log_ref:
            scale = math.exp(self.log_ref - lam) if self.log_ref > _NEG_INF else 0.0
            self.s0 *= scale
            self.s1 *= scale
            self.s2 *= scale
            self.log_ref = lam
        w = math.exp(lam - self.log_ref)
        self.s0 += w
        self.s1 += w * x
        self.s2 += w * (x * x)

    def merged(self, other: "SummaryStats") -> "SummaryStats":
        out = SummaryStats(len(self.s1), self.use_pi)
        ref = max(self.log_ref, other.log_ref)
        if ref == _NEG_INF:
            return out
        out.log_ref = ref
        for part in (self, other):
            if part.log_ref > _NEG_INF:
                c = math.exp(part.log_ref - ref)
                out.s0 += c * part.s0
                out.s1 += c * part.s1
                out.s2 += c * part.s2
        return out


def denominator_from_summaries(summaries: SummaryStats, x_prop: np.ndarray, scheme: Scheme) -> float:
    """log sum_i w(z_prop, z_i) evaluated from summary statistics alone.

    Supports the schemes whose reverse weight sum is a quadratic in x_prop:
    PI (the sum is just T0), SJD and PI_SJD.
    """
    if scheme is Scheme.PI:
        return math.log(summaries.s0) + summaries.log_ref if summaries.s0 > 0 else _NEG_INF
    if scheme not in (Scheme.SJD, Scheme.PI_SJD):
        raise ValueError(f"scheme {scheme.value} needs the stored-path evaluator")
    q = float(np.sum(summaries.s2 - 2.0 * x_prop * summaries.s1 + (x_prop * x_prop) * summaries.s0))
    if q <= 0.0:
        return _NEG_INF
    return math.log(q) + summaries.log_ref


# ---------------------------------------------------------------------------
# per-scheme log weights
# ---------------------------------------------------------------------------


def _log_weight(scheme: Scheme, log_pi: float, sq_dist: float) -> float:
    if scheme is Scheme.PI:
        return log_pi
    if sq_dist <= 0.0:
        return _NEG_INF
    if scheme is Scheme.SJD:
        return math.log(sq_dist)
    if scheme is Scheme.PI_SJD:
        return log_pi + math.log(sq_dist)
    if scheme is Scheme.AJD:
        return 0.5 * math.log(sq_dist)
    if scheme is Scheme.PI_AJD:
        return log_pi + 0.5 * math.log(sq_dist)
    raise ValueError(f"no pointwise weight for scheme {scheme}")


# ---------------------------------------------------------------------------
# scheme 6: split the path into pi~-halves, propose from the opposite one
# ---------------------------------------------------------------------------


@dataclass
class Scheme6Split:
    """Deterministic part of the opposite-half proposal.

    `boundary` is the time-ordered index h where the cumulative pi~ passes
    half the total; the boundary point is split into a backward part of
    weight `w_back` and a forward part of weight `w_fwd`
    (w_back + w_fwd = pi~(z_h), all scaled by exp(log_scale)).
    """

    boundary: int
    w_back: float
    w_fwd: float
    weights: np.ndarray
    total: float
    log_scale: float


def scheme6_split(log_pis: np.ndarray) -> Scheme6Split:
    log_pis = np.asarray(log_pis, dtype=float)
    scale = float(np.max(log_pis))
    w = np.exp(log_pis - scale)
    cum = np.cumsum(w)
    total = float(cum[-1])
    half = 0.5 * total
    h = int(np.searchsorted(cum, half, side="left"))
    before = float(cum[h - 1]) if h > 0 else 0.0
    return Scheme6Split(
        boundary=h,
        w_back=half - before,
        w_fwd=float(cum[h]) - half,
        weights=w,
        total=total,
        log_scale=scale,
    )


def scheme6_propose(log_pis: np.ndarray, current_index: int, rng: np.random.Generator) -> int:
    """Opposite-half proposal: returns the index of the proposed point.

    Following the split, the current point's half is determined by its
    position relative to the boundary (a weighted coin decides when it *is*
    the boundary point), and the proposal is drawn from the other half with
    probability proportional to pi~, the boundary point carrying only its
    fractional weight.
    """
    sp = scheme6_split(log_pis)
    h = sp.boundary
    if current_index < h:
        current_first = True
    elif current_index > h:
        current_first = False
    else:
        current_first = rng.random() < sp.w_back / sp.weights[h]
    if current_first:
        # opposite half: boundary point (forward part) and everything after
        w = sp.weights[h:].copy()
        w[0] = sp.w_fwd
        return h + _categorical(w, rng)
    w = sp.weights[: h + 1].copy()
    w[-1] = sp.w_back
    return _categorical(w, rng)


def _categorical(weights: np.ndarray, rng: np.random.Generator) -> int:
    cum = np.cumsum(weights)
    total = cum[-1]
    u = rng.random() * total
    return int(np.searchsorted(cum, u, side="right"))


# ---------------------------------------------------------------------------
# the transition kernel
# ---------------------------------------------------------------------------


class _StreamEngine:
    """Reservoir + summaries per direction; memory independent of K.

    In stored mode the summaries are skipped (the stored path evaluates the
    weight sums directly); the reservoir runs identically in both modes so
    the two implementations consume the same random variates.
    """

    __slots__ = ("res_f", "res_b", "sums_f", "sums_b", "scheme", "x0", "mass", "rng",
                 "collect_sums", "points_held")

    def __init__(self, d: int, scheme: Scheme, x0: np.ndarray, mass: DiagonalMass,
                 rng: np.random.Generator, collect_sums: bool = True):
        use_pi = scheme is not Scheme.SJD
        self.res_f = WeightReservoir()
        self.res_b = WeightReservoir()
        self.sums_f = SummaryStats(d, use_pi) if collect_sums else None
        self.sums_b = SummaryStats(d, use_pi) if collect_sums else None
        self.scheme = scheme
        self.x0 = x0
        self.mass = mass
        self.rng = rng
        self.collect_sums = collect_sums
        self.points_held = 2  # at most the two reservoir candidates

    def visit(self, z: PhaseState, seg: int, side: int) -> None:
        log_pi = -z.energy(self.mass)
        dx = z.x - self.x0
        log_w = _log_weight(self.scheme, log_pi, float(dx @ dx))
        if side > 0:
            self.res_f.offer(z, seg, log_w, self.rng)
            if self.collect_sums:
                self.sums_f.add(z.x, log_pi)
        else:
            self.res_b.offer(z, seg, log_w, self.rng)
            if self.collect_sums:
                self.sums_b.add(z.x, log_pi)


def _propose_schemes_1to5(cfg: AapsConfig, z0: PhaseState, a: int, b: int, target,
                          mass: DiagonalMass, rng: np.random.Generator,
                          counter: Optional[StepCounter]):
    """Shared proposal machinery for the five pointwise-weight schemes.

    Returns (stable, z_prop, seg_prop, log_alpha, n_steps).
    """
    scheme = cfg.scheme
    stored = cfg.resolved_storage() == "stored"
    engine = _StreamEngine(len(z0.x), scheme, z0.x, mass, rng, collect_sums=not stored)
    path_points: List[PhaseState] = []
    path_segs: List[int] = []

    if stored:
        def visit(z, seg, side):
            path_points.append(z)
            path_segs.append(seg)
            engine.visit(z, seg, side)
    else:
        visit = engine.visit

    summary = stream_segment_range(z0, a, b, cfg.epsilon, mass, target, cfg.delta, visit,
                                   counter=counter, max_steps=cfg.max_path_steps)
    if not summary.stable:
        return False, None, None, _NEG_INF, summary.n_steps

    log_num_stream = _logaddexp(engine.res_f.log_total, engine.res_b.log_total)
    if log_num_stream == _NEG_INF:
        # every weight vanished (single-point path under a distance scheme):
        # fall back to the current point, which always has itself in the pool
        return True, z0, 0, 0.0, summary.n_steps

    z_prop = two_sided_merge(engine.res_f.item, engine.res_f.log_total,
                             engine.res_b.item, engine.res_b.log_total, rng)
    seg_prop = engine.res_f.seg if z_prop is engine.res_f.item else engine.res_b.seg

    if z_prop is z0:
        return True, z0, 0, 0.0, summary.n_steps
    if scheme is Scheme.PI:
        # the ratio cancels algebraically for w(z, z') = pi~(z')
        return True, z_prop, seg_prop, 0.0, summary.n_steps

    log_pi_cur = -z0.energy(mass)
    log_pi_prop = -z_prop.energy(mass)
    dx = z_prop.x - z0.x
    sq = float(dx @ dx)
    log_w_cur_to_prop = _log_weight(scheme, log_pi_prop, sq)
    log_w_prop_to_cur = _log_weight(scheme, log_pi_cur, sq)

    if stored:
        xs = np.array([z.x for z in path_points])
        log_pis = np.array([-z.energy(mass) for z in path_points])
        log_num = _logsum_weights(scheme, xs, log_pis, z0.x)
        log_den = _logsum_weights(scheme, xs, log_pis, z_prop.x)
    else:
        log_num = log_num_stream
        log_den = denominator_from_summaries(engine.sums_f.merged(engine.sums_b), z_prop.x, scheme)

    log_alpha = (log_pi_prop + log_w_prop_to_cur + log_num) - (log_pi_cur + log_w_cur_to_prop + log_den)
    return True, z_prop, seg_prop, log_alpha, summary.n_steps


def _logsum_weights(scheme: Scheme, xs: np.ndarray, log_pis: np.ndarray, x_ref: np.ndarray) -> float:
    """Direct log sum_i w(z_ref, z_i) over a stored path."""
    dx = xs - x_ref
    sq = np.einsum("ij,ij->i", dx, dx)
    if scheme is Scheme.PI:
        lw = log_pis
    else:
        with np.errstate(divide="ignore"):
            log_sq = np.log(sq)
        if scheme is Scheme.SJD:
            lw = log_sq
        elif scheme is Scheme.PI_SJD:
            lw = log_pis + log_sq
        elif scheme is Scheme.AJD:
            lw = 0.5 * log_sq
        else:  # PI_AJD
            lw = log_pis + 0.5 * log_sq
    m = float(np.max(lw))
    if m == _NEG_INF:
        return _NEG_INF
    return m + math.log(float(np.sum(np.exp(lw - m))))


def _propose_scheme6(cfg: AapsConfig, z0: PhaseState, a: int, b: int, target,
                     mass: DiagonalMass, rng: np.random.Generator,
                     counter: Optional[StepCounter]):
    path = build_segment_range(z0, a, b, cfg.epsilon, mass, target, cfg.delta,
                               counter=counter, max_steps=cfg.max_path_steps)
    if not path.stable:
        return False, None, None, _NEG_INF, path.n_steps
    log_pis = np.array([-z.energy(mass) for z in path.points])
    idx = scheme6_propose(log_pis, path.start, rng)
    return True, path.points[idx], path.segments[idx], 0.0, path.n_steps


def aaps_iteration(x_curr: np.ndarray, cfg: AapsConfig, target, rng: np.random.Generator,
                   counter: Optional[StepCounter] = None,
                   cache: Optional[Tuple[float, np.ndarray]] = None):
    """One transition of the kernel.

    Returns (x_next, stats, cache) where `cache` carries (U, grad U) at
    x_next so consecutive iterations never re-evaluate the target at the
    resting position.
    """
    mass = cfg.mass if cfg.mass is not None else DiagonalMass.identity(len(x_curr))
    if cache is None:
        u0, g0 = target.u_and_grad(x_curr)
    else:
        u0, g0 = cache
    p0 = mass.sample_momentum(rng)
    z0 = PhaseState(x_curr, p0, g0, u0)
    c = int(rng.integers(0, cfg.k + 1))
    a, b = -c, cfg.k - c

    if cfg.scheme is Scheme.PI_HALVES:
        stable, z_prop, seg_prop, log_alpha, n_steps = _propose_scheme6(
            cfg, z0, a, b, target, mass, rng, counter)
    else:
        stable, z_prop, seg_prop, log_alpha, n_steps = _propose_schemes_1to5(
            cfg, z0, a, b, target, mass, rng, counter)

    if not stable:
        stats = IterationStats(False, 0.0, n_steps, None, False)
        return x_curr, stats, (u0, g0)

    alpha = 1.0 if log_alpha >= 0.0 else math.exp(log_alpha)
    accepted = alpha >= 1.0 or rng.random() < alpha
    stats = IterationStats(accepted, alpha, n_steps, abs(seg_prop), True)
    if accepted:
        return z_prop.x, stats, (z_prop.u, z_prop.grad)
    return x_curr, stats, (u0, g0)


def run_aaps(target, cfg: AapsConfig, n_iterations: int, x0: Optional[np.ndarray] = None,
             rng=None, counter: Optional[StepCounter] = None) -> ChainResult:
    """Run a fixed-length chain and collect samples and summary statistics."""
    rng = _as_generator(rng)
    if cfg.mass is None:
        cfg = replace(cfg, mass=DiagonalMass.identity(target.dim))
    x = np.zeros(target.dim) if x0 is None else np.asarray(x0, dtype=float)
    counter = counter if counter is not None else StepCounter()
    start_steps = counter.n
    samples = np.empty((n_iterations, target.dim))
    alphas = np.empty(n_iterations)
    seg_hist = np.zeros(cfg.k + 1, dtype=np.int64)
    n_acc = 0
    n_unstable = 0
    cache = None
    for i in range(n_iterations):
        x, stats, cache = aaps_iteration(x, cfg, target, rng, counter, cache)
        samples[i] = x
        alphas[i] = stats.alpha
        if stats.stable:
            seg_hist[stats.abs_segment] += 1
        else:
            n_unstable += 1
        if stats.accepted:
            n_acc += 1
    return ChainResult(
        samples=samples,
        n_leapfrog=counter.n - start_steps,
        acceptance_rate=n_acc / n_iterations if n_iterations else 0.0,
        seg_hist=seg_hist,
        alphas=alphas,
        n_unstable=n_unstable,
    )


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
