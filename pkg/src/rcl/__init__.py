"""Simulator and analysis harness for a crash-tolerant consensus
protocol whose decision is a hidden uniform lottery over the surviving
agents, together with the deviation catalogue used to study its
equilibrium properties."""

from .core import (Context, Decision, Failure, FailurePattern, Outcome,
                   UtilityParams, canonicalize_failure, classify_outcome,
                   utilities, validate_pattern)
from .deviations import DeviationSpec
from .harness import (ExperimentConfig, GainResult, Stats, deviation_gain,
                      expost_exhibit, fairness_test, monte_carlo,
                      naive_exploit_config)
from .sharing import (DEFAULT_PRIME, LinePoly, check_collinear, make_shares,
                      reconstruct, share_point)
from .simulator import (PiParams, RunRecord, estimate_reachability,
                        sample_context, run)

__all__ = [
    "Context", "Decision", "Failure", "FailurePattern", "Outcome",
    "UtilityParams", "canonicalize_failure", "classify_outcome",
    "utilities", "validate_pattern", "DeviationSpec", "ExperimentConfig",
    "GainResult", "Stats", "deviation_gain", "expost_exhibit",
    "fairness_test", "monte_carlo", "naive_exploit_config",
    "DEFAULT_PRIME", "LinePoly", "check_collinear", "make_shares",
    "reconstruct", "share_point", "PiParams", "RunRecord",
    "estimate_reachability", "sample_context", "run",
]

__version__ = "0.1.0"
