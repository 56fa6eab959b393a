"""Benchmark harness: configs, single runs, grid sweeps and experiment presets.

Configuration lives in a flat INI file with three sections::

    [target]
    family = gaussian            ; gaussian|logistic|skew_gaussian|
                                 ; modified_rosenbrock|bimodal|rn_gaussian|sv
    d = 40
    xi = 20
    progression = VAR            ; SD|VAR|H|invSD
    scale_seed = 1
    alpha_skew = 3.0
    a = 7                        ; bimodal mode separation
    sv_T = 100                   ; sv family only
    sv_phi = 0.98
    sv_kappa = 0.65
    sv_sigma = 0.15
    sv_seed = 1
    sv_csv =                     ; optional: load observations instead

    [sampler]
    kinds = aaps,hmc,hmc_blur,nuts
    schemes = pi_sjd             ; aaps only; comma list sweeps schemes
    epsilon = 1.2                ; or epsilon_grid = 0.6,0.9,1.2
    k = 5                        ; or k_grid = ... (aaps)
    l = 10                       ; or l_grid = ... (hmc / hmc_blur)
    delta = 1000
    max_depth = 10
    k_star = 40                  ; diagnostic window for tune-k / diagnose

    [run]
    iterations = 20000
    burn_in = 2000               ; defaults to 10% of iterations
    replicates = 1
    seed = 42
    out = runs/demo
    thin = 1

Every run is fully determined by (config, master seed): replicate r of
grid point g draws its generator from SeedSequence([seed, g, r]).  All
deterministic outputs are byte-stable across runs; wall-clock times go to
a separate timings.csv so the main tables stay reproducible.
"""

from __future__ import annotations

import configparser
import csv
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .baselines import HmcConfig, NutsConfig, run_hmc, run_nuts
from .diagnostics import ess
from .dynamics import DiagonalMass, StepCounter
from .sampler import AapsConfig, Scheme, run_aaps
from .stochvol import load_sv_csv, make_sv_posterior, simulate_sv_data
from .targets import (
    make_bimodal,
    make_modified_rosenbrock,
    make_product_target,
    make_radford_neal_gaussian,
    scale_progression,
)

__all__ = [
    "TargetSpec",
    "SamplerSpec",
    "RunSpec",
    "ExperimentConfig",
    "GridPoint",
    "SweepRecord",
    "build_target",
    "parse_config",
    "write_config",
    "expand_grid",
    "run_single",
    "run_sweep",
    "write_sweep_csv",
    "write_summary_csv",
    "write_samples_csv",
    "preset",
    "PRESET_NAMES",
    "SWEEP_COLUMNS",
]

SWEEP_SCHEMA = "sweep-v1"
SWEEP_COLUMNS = [
    "schema", "target", "sampler", "scheme", "epsilon", "k", "l", "replicate",
    "iterations", "min_ess", "ess_alpha", "ess_beta", "ess_gamma",
    "acceptance", "leapfrog", "efficiency",
]


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TargetSpec:
    family: str
    d: int = 2
    xi: float = 20.0
    progression: str = "VAR"
    scale_seed: int = 1
    alpha_skew: float = 3.0
    a: float = 7.0
    sv_T: int = 100
    sv_phi: float = 0.98
    sv_kappa: float = 0.65
    sv_sigma: float = 0.15
    sv_seed: int = 1
    sv_csv: str = ""


@dataclass(frozen=True)
class SamplerSpec:
    kinds: Tuple[str, ...] = ("aaps",)
    schemes: Tuple[str, ...] = ("pi_sjd",)
    epsilon_grid: Tuple[float, ...] = (1.0,)
    k_grid: Tuple[int, ...] = (1,)
    l_grid: Tuple[int, ...] = (10,)
    delta: float = 1000.0
    max_depth: int = 10
    k_star: int = 40


@dataclass(frozen=True)
class RunSpec:
    iterations: int = 10_000
    burn_in: int = -1  # -1: 10% of iterations
    replicates: int = 1
    seed: int = 0
    out: str = "."
    thin: int = 1

    def burn(self) -> int:
        return self.iterations // 10 if self.burn_in < 0 else self.burn_in

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.burn_in >= 0 and self.iterations > 0 and self.burn_in >= self.iterations:
            raise ValueError("burn_in must be smaller than iterations")
        if self.replicates < 1:
            raise ValueError("need at least one replicate")


@dataclass(frozen=True)
class ExperimentConfig:
    target: TargetSpec
    sampler: SamplerSpec
    run: RunSpec


_VALID_FAMILIES = ("gaussian", "logistic", "skew_gaussian", "modified_rosenbrock",
                   "bimodal", "rn_gaussian", "sv")
_VALID_KINDS = ("aaps", "hmc", "hmc_blur", "nuts")


def build_target(spec: TargetSpec):
    """Instantiate the target density described by a TargetSpec."""
    fam = spec.family
    if fam in ("gaussian", "logistic", "skew_gaussian"):
        prog = scale_progression(spec.progression, spec.xi, spec.d, spec.scale_seed)
        return make_product_target(fam, prog, alpha_skew=spec.alpha_skew)
    if fam == "modified_rosenbrock":
        return make_modified_rosenbrock(spec.d)
    if fam == "bimodal":
        return make_bimodal(spec.d, spec.a)
    if fam == "rn_gaussian":
        return make_radford_neal_gaussian(spec.d, spec.xi)
    if fam == "sv":
        if spec.sv_csv:
            data = load_sv_csv(spec.sv_csv)
        else:
            data = simulate_sv_data(spec.sv_T, spec.sv_phi, spec.sv_kappa,
                                    spec.sv_sigma, seed=spec.sv_seed)
        return make_sv_posterior(data)
    raise ValueError(f"unknown target family {fam!r}; expected one of {_VALID_FAMILIES}")


def _floats(text: str) -> Tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _ints(text: str) -> Tuple[int, ...]:
    return tuple(int(tok) for tok in text.split(",") if tok.strip())


def parse_config(path) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    with open(path) as fh:
        cp.read_file(fh)

    t = cp["target"]
    target = TargetSpec(
        family=t.get("family"),
        d=t.getint("d", 2),
        xi=t.getfloat("xi", 20.0),
        progression=t.get("progression", "VAR"),
        scale_seed=t.getint("scale_seed", 1),
        alpha_skew=t.getfloat("alpha_skew", 3.0),
        a=t.getfloat("a", 7.0),
        sv_T=t.getint("sv_T", 100),
        sv_phi=t.getfloat("sv_phi", 0.98),
        sv_kappa=t.getfloat("sv_kappa", 0.65),
        sv_sigma=t.getfloat("sv_sigma", 0.15),
        sv_seed=t.getint("sv_seed", 1),
        sv_csv=t.get("sv_csv", ""),
    )
    if target.family not in _VALID_FAMILIES:
        raise ValueError(f"unknown target family {target.family!r}")

    s = cp["sampler"]
    kinds = tuple(k.strip() for k in s.get("kinds", "aaps").split(",") if k.strip())
    for kind in kinds:
        if kind not in _VALID_KINDS:
            raise ValueError(f"unknown sampler kind {kind!r}; expected one of {_VALID_KINDS}")
    if "epsilon_grid" in s:
        eps_grid = _floats(s["epsilon_grid"])
    else:
        eps_grid = (s.getfloat("epsilon", 1.0),)
    if "k_grid" in s:
        k_grid = _ints(s["k_grid"])
    else:
        k_grid = (s.getint("k", 1),)
    if "l_grid" in s:
        l_grid = _ints(s["l_grid"])
    else:
        l_grid = (s.getint("l", 10),)
    sampler = SamplerSpec(
        kinds=kinds,
        schemes=tuple(x.strip() for x in s.get("schemes", "pi_sjd").split(",") if x.strip()),
        epsilon_grid=eps_grid,
        k_grid=k_grid,
        l_grid=l_grid,
        delta=s.getfloat("delta", 1000.0),
        max_depth=s.getint("max_depth", 10),
        k_star=s.getint("k_star", 40),
    )
    if not eps_grid or not k_grid or not l_grid:
        raise ValueError("grids must be non-empty")

    r = cp["run"]
    run = RunSpec(
        iterations=r.getint("iterations", 10_000),
        burn_in=r.getint("burn_in", -1),
        replicates=r.getint("replicates", 1),
        seed=r.getint("seed", 0),
        out=r.get("out", "."),
        thin=r.getint("thin", 1),
    )
    return ExperimentConfig(target=target, sampler=sampler, run=run)


def write_config(cfg: ExperimentConfig, path) -> None:
    cp = configparser.ConfigParser()
    t = cfg.target
    cp["target"] = {"family": t.family, "d": str(t.d)}
    if t.family in ("gaussian", "logistic", "skew_gaussian"):
        cp["target"].update({"xi": f"{t.xi:g}", "progression": t.progression,
                             "scale_seed": str(t.scale_seed)})
        if t.family == "skew_gaussian":
            cp["target"]["alpha_skew"] = f"{t.alpha_skew:g}"
    elif t.family == "rn_gaussian":
        cp["target"]["xi"] = f"{t.xi:g}"
    elif t.family == "bimodal":
        cp["target"]["a"] = f"{t.a:g}"
    elif t.family == "sv":
        cp["target"].update({"sv_T": str(t.sv_T), "sv_phi": f"{t.sv_phi:g}",
                             "sv_kappa": f"{t.sv_kappa:g}", "sv_sigma": f"{t.sv_sigma:g}",
                             "sv_seed": str(t.sv_seed)})
        if t.sv_csv:
            cp["target"]["sv_csv"] = t.sv_csv
    s = cfg.sampler
    cp["sampler"] = {
        "kinds": ",".join(s.kinds),
        "schemes": ",".join(s.schemes),
        "epsilon_grid": ",".join(f"{e:g}" for e in s.epsilon_grid),
        "k_grid": ",".join(str(k) for k in s.k_grid),
        "l_grid": ",".join(str(l) for l in s.l_grid),
        "delta": f"{s.delta:g}",
        "max_depth": str(s.max_depth),
        "k_star": str(s.k_star),
    }
    r = cfg.run
    cp["run"] = {
        "iterations": str(r.iterations),
        "burn_in": str(r.burn_in),
        "replicates": str(r.replicates),
        "seed": str(r.seed),
        "out": r.out,
        "thin": str(r.thin),
    }
    with open(path, "w") as fh:
        cp.write(fh)


# ---------------------------------------------------------------------------
# grid expansion and execution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridPoint:
    """One cell of the sweep: a sampler with every parameter pinned."""

    index: int
    kind: str
    scheme: str
    epsilon: float
    k: int
    l: int


def expand_grid(sampler: SamplerSpec) -> List[GridPoint]:
    points = []
    idx = 0
    for kind in sampler.kinds:
        for eps in sampler.epsilon_grid:
            if kind == "aaps":
                for scheme in sampler.schemes:
                    for k in sampler.k_grid:
                        points.append(GridPoint(idx, kind, scheme, eps, k, 0))
                        idx += 1
            elif kind in ("hmc", "hmc_blur"):
                for l in sampler.l_grid:
                    points.append(GridPoint(idx, kind, "", eps, 0, l))
                    idx += 1
            else:  # nuts
                points.append(GridPoint(idx, kind, "", eps, 0, 0))
                idx += 1
    return points


@dataclass
class SweepRecord:
    point: GridPoint
    replicate: int
    iterations: int
    min_ess: float
    named_ess: dict
    acceptance: float
    leapfrog: int
    efficiency: float
    wall_time: float
    samples: Optional[np.ndarray] = None
    error: str = ""

    def row(self, target_name: str) -> list:
        named = {k: "" for k in ("alpha", "beta", "gamma")}
        for key, val in self.named_ess.items():
            if key in named:
                named[key] = repr(val)
        p = self.point
        return [
            SWEEP_SCHEMA, target_name, p.kind, p.scheme,
            f"{p.epsilon:g}", str(p.k), str(p.l), str(self.replicate),
            str(self.iterations),
            repr(self.min_ess), named["alpha"], named["beta"], named["gamma"],
            repr(self.acceptance), str(self.leapfrog), repr(self.efficiency),
        ]


def _rng_for(master_seed: int, point_index: int, replicate: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, point_index, replicate]))


def run_single(cfg: ExperimentConfig, point: GridPoint, replicate: int = 0,
               keep_samples: bool = False) -> SweepRecord:
    """Execute one (grid point, replicate) chain: burn-in, sample, ESS."""
    target = build_target(cfg.target)
    rng = _rng_for(cfg.run.seed, point.index, replicate)
    mass = DiagonalMass.identity(target.dim)
    n_iter = cfg.run.iterations
    burn = min(cfg.run.burn(), n_iter)
    x0 = np.zeros(target.dim)

    def make_runner():
        if point.kind == "aaps":
            kcfg = AapsConfig(k=point.k, epsilon=point.epsilon, scheme=Scheme(point.scheme),
                              delta=cfg.sampler.delta, mass=mass)
            return lambda n, x, c: run_aaps(target, kcfg, n, x0=x, rng=rng, counter=c)
        if point.kind in ("hmc", "hmc_blur"):
            hcfg = HmcConfig(epsilon=point.epsilon, n_steps=point.l,
                             blur=point.kind == "hmc_blur", mass=mass)
            return lambda n, x, c: run_hmc(target, hcfg, n, x0=x, rng=rng, counter=c)
        ncfg = NutsConfig(epsilon=point.epsilon, max_depth=cfg.sampler.max_depth,
                          delta_max=cfg.sampler.delta, mass=mass)
        return lambda n, x, c: run_nuts(target, ncfg, n, x0=x, rng=rng, counter=c)

    runner = make_runner()
    t_start = time.perf_counter()
    if burn > 0:
        burn_res = runner(burn, x0, StepCounter())
        x0 = burn_res.samples[-1]
    counter = StepCounter()
    n_keep = n_iter - burn
    result = runner(n_keep, x0, counter) if n_keep > 0 else None
    wall = time.perf_counter() - t_start

    if result is None or n_keep == 0:
        return SweepRecord(point, replicate, 0, 0.0, {}, 0.0, 0, 0.0, wall,
                           samples=np.zeros((0, target.dim)) if keep_samples else None)

    samples = result.samples
    if n_keep >= 100:
        ess_values = np.array([ess(samples[:, j]) for j in range(target.dim)])
    else:
        # too short for a defensible spectral fit; report degenerate ESS
        ess_values = np.zeros(target.dim)
    named = {}
    if target.param_names:
        for j, name in enumerate(target.param_names[:3]):
            named[name] = float(ess_values[j])
    eff = float(ess_values.min()) / result.n_leapfrog if result.n_leapfrog else 0.0
    return SweepRecord(
        point=point,
        replicate=replicate,
        iterations=n_keep,
        min_ess=float(ess_values.min()),
        named_ess=named,
        acceptance=result.acceptance_rate,
        leapfrog=result.n_leapfrog,
        efficiency=eff,
        wall_time=wall,
        samples=samples[:: cfg.run.thin] if keep_samples else None,
    )


def _run_cell(args) -> SweepRecord:
    cfg, point, replicate = args
    try:
        return run_single(cfg, point, replicate)
    except Exception as exc:  # record, keep sweeping
        rec = SweepRecord(point, replicate, 0, 0.0, {}, 0.0, 0, 0.0, 0.0)
        rec.error = f"{type(exc).__name__}: {exc}"
        return rec


def run_sweep(cfg: ExperimentConfig, threads: int = 1) -> List[SweepRecord]:
    """Full Cartesian sweep; failures are recorded per cell, never fatal.

    Results come back sorted by (grid index, replicate) regardless of
    worker scheduling.
    """
    points = expand_grid(cfg.sampler)
    cells = [(cfg, p, r) for p in points for r in range(cfg.run.replicates)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(_run_cell, cells))
    else:
        records = [_run_cell(c) for c in cells]
    records.sort(key=lambda rec: (rec.point.index, rec.replicate))
    return records


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------


def write_sweep_csv(records: Sequence[SweepRecord], target_name: str, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for rec in records:
            if rec.error:
                continue
            w.writerow(rec.row(target_name))


def write_timings_csv(records: Sequence[SweepRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sampler", "scheme", "epsilon", "k", "l", "replicate", "wall_time_s", "error"])
        for rec in records:
            p = rec.point
            w.writerow([p.kind, p.scheme, f"{p.epsilon:g}", p.k, p.l, rec.replicate,
                        f"{rec.wall_time:.3f}", rec.error])


def write_summary_csv(records: Sequence[SweepRecord], path) -> None:
    """One row per grid point: mean and sd of efficiency over replicates."""
    by_point = {}
    for rec in records:
        if rec.error:
            continue
        by_point.setdefault(rec.point, []).append(rec)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sampler", "scheme", "epsilon", "k", "l", "replicates",
                    "efficiency_mean", "efficiency_sd", "min_ess_mean", "acceptance_mean"])
        for point in sorted(by_point, key=lambda p: p.index):
            recs = by_point[point]
            effs = np.array([r.efficiency for r in recs])
            w.writerow([
                point.kind, point.scheme, f"{point.epsilon:g}", point.k, point.l, len(recs),
                repr(float(effs.mean())),
                repr(float(effs.std(ddof=1)) if len(recs) > 1 else 0.0),
                repr(float(np.mean([r.min_ess for r in recs]))),
                repr(float(np.mean([r.acceptance for r in recs]))),
            ])


def write_samples_csv(samples: np.ndarray, path, param_names=None) -> None:
    """(iteration, x_1..x_d) rows, or named parameter columns when known."""
    d = samples.shape[1] if samples.ndim == 2 else 0
    names = list(param_names) if param_names else [f"x_{j+1}" for j in range(d)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration"] + names)
        for i, row in enumerate(samples):
            w.writerow([i] + [repr(float(v)) for v in row])


def write_kdiag_pairs_csv(pairs, path) -> None:
    """(label, k_grid, k_hat) rows for the diagnostic-vs-grid scatter."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "k_grid", "k_hat"])
        for label, k_grid_opt, k_hat in pairs:
            w.writerow([label, k_grid_opt, k_hat])


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

PRESET_NAMES = ("fig1", "fig2-weights", "table1", "table2-sv", "table3-bimodal",
                "fig6-kdiag", "apogee-rate")

_ALL_SCHEMES = ("pi", "sjd", "pi_sjd", "ajd", "pi_ajd", "pi_halves")


def preset(name: str, desk_scale: bool = False) -> List[Tuple[str, ExperimentConfig]]:
    """Named experiment configurations; grids are ours, not canon.

    Multi-target experiments return one config per target.  ``desk_scale``
    shrinks dimensions, grids and iteration counts so everything finishes
    in minutes on one core.
    """
    if name == "fig1":
        d = 20 if desk_scale else 40
        iters = 4000 if desk_scale else 100_000
        eps = (0.4, 0.7, 1.0) if desk_scale else tuple(np.round(np.geomspace(0.2, 1.4, 8), 3))
        ls = (5, 15, 40) if desk_scale else (1, 2, 5, 10, 20, 40, 80, 160)
        ks = (0, 2, 6) if desk_scale else (0, 1, 2, 4, 8, 16, 32)
        cfg = ExperimentConfig(
            TargetSpec("modified_rosenbrock", d=d),
            SamplerSpec(kinds=("aaps", "hmc", "hmc_blur"), epsilon_grid=eps,
                        k_grid=ks, l_grid=ls),
            RunSpec(iterations=iters, seed=101),
        )
        return [("fig1", cfg)]

    if name == "fig2-weights":
        iters = 4000 if desk_scale else 100_000
        ks = (0, 1, 2, 3, 5, 8, 12, 18) if desk_scale else tuple(range(0, 31, 2))
        cfg = ExperimentConfig(
            TargetSpec("gaussian", d=40, xi=20.0, progression="H", scale_seed=1),
            SamplerSpec(kinds=("aaps",), schemes=_ALL_SCHEMES, epsilon_grid=(1.2,), k_grid=ks),
            RunSpec(iterations=iters, seed=102),
        )
        return [("fig2-weights", cfg)]

    if name == "table1":
        iters = 4000 if desk_scale else 100_000
        out = []
        for prog in ("SD", "VAR"):
            cfg = ExperimentConfig(
                TargetSpec("gaussian", d=40, xi=20.0, progression=prog, scale_seed=1),
                SamplerSpec(kinds=("aaps", "hmc", "hmc_blur", "nuts"),
                            epsilon_grid=(0.7, 1.0, 1.4) if desk_scale else tuple(np.round(np.geomspace(0.3, 1.9, 8), 3)),
                            k_grid=(2, 5, 10) if desk_scale else tuple(range(0, 25, 2)),
                            l_grid=(10, 30, 60) if desk_scale else (1, 2, 5, 10, 20, 40, 80, 160)),
                RunSpec(iterations=iters, seed=103, replicates=1),
            )
            out.append((f"table1-{prog.lower()}", cfg))
        return out

    if name == "table2-sv":
        cfg = ExperimentConfig(
            TargetSpec("sv", sv_T=100 if desk_scale else 1000, sv_seed=1),
            SamplerSpec(kinds=("aaps", "hmc_blur", "nuts"),
                        epsilon_grid=(0.15, 0.25) if desk_scale else (0.1, 0.15, 0.2, 0.3),
                        k_grid=(2, 5) if desk_scale else (1, 2, 4, 8, 16),
                        l_grid=(10, 30) if desk_scale else (5, 10, 20, 40, 80)),
            RunSpec(iterations=2000 if desk_scale else 100_000,
                    replicates=2 if desk_scale else 10, seed=104),
        )
        return [("table2-sv", cfg)]

    if name == "table3-bimodal":
        out = []
        for a in (7.0, 10.0, 15.0):
            cfg = ExperimentConfig(
                TargetSpec("bimodal", d=40, a=a),
                SamplerSpec(kinds=("aaps", "hmc_blur", "nuts"),
                            epsilon_grid=(0.5, 0.9) if desk_scale else (0.3, 0.5, 0.7, 0.9, 1.2),
                            k_grid=(1, 3) if desk_scale else (0, 1, 2, 4, 8),
                            l_grid=(10, 30) if desk_scale else (5, 10, 20, 40, 80)),
                RunSpec(iterations=4000 if desk_scale else 100_000, seed=105),
            )
            out.append((f"table3-bimodal-a{a:g}", cfg))
        return out

    if name == "fig6-kdiag":
        out = []
        for xi in (10.0, 20.0):
            cfg = ExperimentConfig(
                TargetSpec("skew_gaussian", d=40, xi=xi, progression="VAR", scale_seed=1),
                SamplerSpec(kinds=("aaps",), epsilon_grid=(0.35,),
                            k_grid=tuple(range(0, 21, 2)), k_star=40),
                RunSpec(iterations=4000 if desk_scale else 100_000, seed=106),
            )
            out.append((f"fig6-kdiag-xi{xi:g}", cfg))
        return out

    if name == "apogee-rate":
        # consumed by the apogee-rate subcommand, which reads no grids; the
        # target section is a placeholder so the file round-trips
        cfg = ExperimentConfig(
            TargetSpec("gaussian", d=100 if not desk_scale else 50, xi=3.0,
                       progression="VAR", scale_seed=1),
            SamplerSpec(kinds=("aaps",)),
            RunSpec(iterations=0, seed=107),
        )
        return [("apogee-rate", cfg)]

    raise ValueError(f"unknown preset {name!r}; valid names: {', '.join(PRESET_NAMES)}")
