"""Apogee-to-apogee path sampling, baselines, diagnostics and benchmarks."""

from .dynamics import (
    DiagonalMass,
    PhaseState,
    StepCounter,
    build_segment_range,
    is_apogee_crossing,
    leapfrog_step,
    stream_segment_range,
)
from .sampler import AapsConfig, ChainResult, Scheme, aaps_iteration, run_aaps
from .baselines import HmcConfig, NutsConfig, hmc_iteration, nuts_iteration, run_hmc, run_nuts
from .diagnostics import ess, efficiency, k_diagnostic, tune_epsilon, tune_k
from .targets import (
    Target,
    make_bimodal,
    make_modified_rosenbrock,
    make_product_target,
    make_radford_neal_gaussian,
    scale_progression,
)
from .stochvol import SVModelData, make_sv_posterior, simulate_sv_data

__version__ = "0.1.0"

__all__ = [
    "AapsConfig",
    "ChainResult",
    "DiagonalMass",
    "HmcConfig",
    "NutsConfig",
    "PhaseState",
    "Scheme",
    "StepCounter",
    "SVModelData",
    "Target",
    "aaps_iteration",
    "build_segment_range",
    "efficiency",
    "ess",
    "hmc_iteration",
    "is_apogee_crossing",
    "k_diagnostic",
    "leapfrog_step",
    "make_bimodal",
    "make_modified_rosenbrock",
    "make_product_target",
    "make_radford_neal_gaussian",
    "make_sv_posterior",
    "nuts_iteration",
    "run_aaps",
    "run_hmc",
    "run_nuts",
    "scale_progression",
    "simulate_sv_data",
    "stream_segment_range",
    "tune_epsilon",
    "tune_k",
]
