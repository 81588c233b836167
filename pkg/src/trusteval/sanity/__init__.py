"""Scenario generators with known prediction rankings and the experiments built on them."""

from .criteria import CRITERIA, Criterion, default_criteria
from .generators import (
    DetectionSanityConfig,
    SanityScenario,
    TrackingSanityConfig,
    fig8_closed_form,
    fig8_scenario,
    gen_detection_scenario,
    gen_tracking_scenario,
    perturb_to_approximate_truth,
    swap_likelihood,
)
from .harness import (
    ConsistencyResult,
    SanityResult,
    default_thresholds,
    run_consistency_experiment,
    run_sanity_experiment,
)

__all__ = [
    "CRITERIA",
    "ConsistencyResult",
    "Criterion",
    "DetectionSanityConfig",
    "SanityResult",
    "SanityScenario",
    "TrackingSanityConfig",
    "default_criteria",
    "default_thresholds",
    "fig8_closed_form",
    "fig8_scenario",
    "gen_detection_scenario",
    "gen_tracking_scenario",
    "perturb_to_approximate_truth",
    "run_consistency_experiment",
    "run_sanity_experiment",
    "swap_likelihood",
]
