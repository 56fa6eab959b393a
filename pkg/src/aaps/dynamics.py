"""Leapfrog integration, apogee detection and segment-path traversal.

A *segment* is the stretch of a discrete leapfrog path between two
consecutive apogees, where an apogee is a local maximum of the potential
along the trajectory, detected between steps l and l+1 whenever

    p_l . M^{-1} grad U(x_l) > 0   and   p_{l+1} . M^{-1} grad U(x_{l+1}) < 0.

Because the leapfrog map is deterministic and skew reversible, rebuilding a
path from any of its points (with shifted segment indices) reproduces the
identical point set; the samplers in this package lean on that invariance.

Gradient bookkeeping: each leapfrog step evaluates the target gradient
exactly once, and the step counters that feed every efficiency number are
incremented inside :func:`leapfrog_step` and nowhere else.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

__all__ = [
    "PhaseState",
    "DiagonalMass",
    "StepCounter",
    "leapfrog_step",
    "is_apogee_crossing",
    "PathSummary",
    "SegmentPath",
    "build_segment_range",
    "stream_segment_range",
    "dump_path_csv",
]

DEFAULT_MAX_PATH_STEPS = 1_000_000


class PhaseState:
    """Position-momentum pair with the gradient and potential at x cached.

    The total energy is memoised on first evaluation; a chain uses a single
    mass matrix, so the cache never needs invalidating (momentum flips
    preserve the kinetic energy and copy the cache).
    """

    __slots__ = ("x", "p", "grad", "u", "_h")

    def __init__(self, x: np.ndarray, p: np.ndarray, grad: np.ndarray, u: float):
        self.x = x
        self.p = p
        self.grad = grad
        self.u = u
        self._h = None

    @classmethod
    def at(cls, x: np.ndarray, p: np.ndarray, target) -> "PhaseState":
        u, g = target.u_and_grad(x)
        return cls(x, p, g, u)

    def energy(self, mass: "DiagonalMass") -> float:
        if self._h is None:
            self._h = self.u + mass.kinetic(self.p)
        return self._h

    def flipped(self) -> "PhaseState":
        """Same point with negated momentum; reuses the cached gradient."""
        z = PhaseState(self.x, -self.p, self.grad, self.u)
        z._h = self._h
        return z


class DiagonalMass:
    """Diagonal mass matrix: momentum law N(0, M) and kinetic energy p'M^{-1}p/2."""

    __slots__ = ("diag", "inv_diag", "_sqrt_diag", "_is_identity")

    def __init__(self, diag: np.ndarray):
        diag = np.asarray(diag, dtype=float)
        if np.any(diag <= 0):
            raise ValueError("mass matrix entries must be strictly positive")
        self.diag = diag
        self.inv_diag = 1.0 / diag
        self._sqrt_diag = np.sqrt(diag)
        self._is_identity = bool(np.all(diag == 1.0))

    @classmethod
    def identity(cls, d: int) -> "DiagonalMass":
        return cls(np.ones(d))

    def kinetic(self, p: np.ndarray) -> float:
        if self._is_identity:
            return 0.5 * float(p @ p)
        return 0.5 * float(p @ (self.inv_diag * p))

    def sample_momentum(self, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(len(self.diag))
        if self._is_identity:
            return z
        return self._sqrt_diag * z

    def velocity(self, p: np.ndarray) -> np.ndarray:
        """M^{-1} p."""
        if self._is_identity:
            return p
        return self.inv_diag * p


@dataclass
class StepCounter:
    """Mutable leapfrog-step counter shared across a chain."""

    n: int = 0


def leapfrog_step(z: PhaseState, eps: float, mass: DiagonalMass, target,
                  counter: Optional[StepCounter] = None) -> PhaseState:
    """One leapfrog step: half momentum kick, drift, half momentum kick.

    Exactly one fresh gradient evaluation (at the new position), cached on
    the returned state.
    """
    p_half = z.p - (0.5 * eps) * z.grad
    x1 = z.x + eps * mass.velocity(p_half)
    u1, g1 = target.u_and_grad(x1)
    p1 = p_half - (0.5 * eps) * g1
    if counter is not None:
        counter.n += 1
    return PhaseState(x1, p1, g1, u1)


def _uphill_dot(z: PhaseState, mass: DiagonalMass) -> float:
    """p . M^{-1} grad U(x): the rate of change of U along the trajectory."""
    return float(mass.velocity(z.p) @ z.grad)


def is_apogee_crossing(z_l: PhaseState, z_next: PhaseState, mass: DiagonalMass) -> bool:
    """True when U has passed a local maximum between the two states.

    Exact-zero dot products count as "not uphill": the event has probability
    zero and a fixed convention keeps path reconstruction deterministic.
    """
    return _uphill_dot(z_l, mass) > 0.0 and _uphill_dot(z_next, mass) < 0.0


@dataclass
class PathSummary:
    """Outcome of one segment-range traversal."""

    stable: bool = True
    h_min: float = np.inf
    h_max: float = -np.inf
    n_points: int = 0
    n_steps: int = 0


def stream_segment_range(z0: PhaseState, a: int, b: int, eps: float, mass: DiagonalMass,
                         target, delta: float,
                         visit: Callable[[PhaseState, int, int], None],
                         counter: Optional[StepCounter] = None,
                         max_steps: int = DEFAULT_MAX_PATH_STEPS) -> PathSummary:
    """Traverse segments a..b around z0, handing each point to `visit` once.

    The visitor is called as ``visit(z, segment, side)`` with ``side=+1``
    for z0 and the forward sweep and ``side=-1`` for the backward sweep.
    Traversal order: z0 first, then all forward points in time order, then
    all backward points moving away from z0.  Retained state is independent
    of the path length; storage is entirely the visitor's business.

    Forward integration runs until the apogee closing segment `b` appears;
    the backward sweep integrates (x, -p) with the same stepper and
    re-reflects each point, which realises skew reversibility by
    construction.  The energy-spread guard max H - min H < delta is checked
    as points join the path; a breach (or any non-finite value, or exceeding
    `max_steps`) aborts the traversal with ``stable=False``.
    """
    if not (a <= 0 <= b):
        raise ValueError(f"need a <= 0 <= b, got a={a}, b={b}")
    summary = PathSummary()
    h0 = z0.energy(mass)
    if not np.isfinite(h0):
        summary.stable = False
        return summary
    summary.h_min = summary.h_max = h0
    summary.n_points = 1
    visit(z0, 0, +1)
    if summary.h_max - summary.h_min >= delta:
        summary.stable = False
        return summary

    def extend(start: PhaseState, last_seg: int, side: int) -> bool:
        z = start
        prev_dot = _uphill_dot(z, mass)
        seg = 0
        while True:
            if summary.n_steps >= max_steps:
                return False
            z_new = leapfrog_step(z, eps, mass, target, counter)
            summary.n_steps += 1
            h = z_new.energy(mass)
            if not np.isfinite(h):
                return False
            dot = _uphill_dot(z_new, mass)
            if prev_dot > 0.0 and dot < 0.0:
                seg += 1
                if seg > last_seg:
                    return True  # z_new opens a segment beyond the window; drop it
            if h < summary.h_min:
                summary.h_min = h
            elif h > summary.h_max:
                summary.h_max = h
            summary.n_points += 1
            visit(z_new if side > 0 else z_new.flipped(), side * seg, side)
            if summary.h_max - summary.h_min >= delta:
                return False
            z = z_new
            prev_dot = dot

    if not extend(z0, b, +1):
        summary.stable = False
        return summary
    if not extend(z0.flipped(), -a, -1):
        summary.stable = False
        return summary
    return summary


@dataclass
class SegmentPath:
    """A fully stored segment range in time order (index `start` is z0)."""

    points: List[PhaseState]
    segments: List[int]
    start: int
    stable: bool
    h_min: float
    h_max: float
    n_steps: int

    def __len__(self) -> int:
        return len(self.points)

    def crossing_count(self) -> int:
        n = 0
        for s_prev, s_next in zip(self.segments, self.segments[1:]):
            if s_next != s_prev:
                n += 1
        return n


def build_segment_range(z0: PhaseState, a: int, b: int, eps: float, mass: DiagonalMass,
                        target, delta: float,
                        counter: Optional[StepCounter] = None,
                        max_steps: int = DEFAULT_MAX_PATH_STEPS) -> SegmentPath:
    """Store the whole segment range a..b around z0, in time order."""
    forward: List[tuple] = []
    backward: List[tuple] = []

    def visit(z, seg, side):
        (forward if side > 0 else backward).append((z, seg))

    summary = stream_segment_range(z0, a, b, eps, mass, target, delta, visit,
                                   counter=counter, max_steps=max_steps)
    points = [z for z, _ in reversed(backward)] + [z for z, _ in forward]
    segments = [s for _, s in reversed(backward)] + [s for _, s in forward]
    return SegmentPath(
        points=points,
        segments=segments,
        start=len(backward),
        stable=summary.stable,
        h_min=summary.h_min,
        h_max=summary.h_max,
        n_steps=summary.n_steps,
    )


def dump_path_csv(path: SegmentPath, mass: DiagonalMass, fh) -> None:
    """Debug dump: one row per path point (step, segment, x.., p.., H)."""
    d = len(path.points[0].x)
    header = ["step", "segment"] + [f"x_{k+1}" for k in range(d)] + [f"p_{k+1}" for k in range(d)] + ["H"]
    fh.write(",".join(header) + "\n")
    for i, (z, seg) in enumerate(zip(path.points, path.segments)):
        row = [str(i - path.start), str(seg)]
        row += [repr(float(v)) for v in z.x]
        row += [repr(float(v)) for v in z.p]
        row.append(repr(z.energy(mass)))
        fh.write(",".join(row) + "\n")
