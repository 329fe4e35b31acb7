"""Sampling without replacement with between-round advantage updates for
constructive combinatorial optimization, plus the self-improvement training
loop that feeds on it."""

from .core import (
    InfeasibleTrajectoryError,
    Instance,
    SequencePolicy,
    Trajectory,
    total_log_prob,
    validate_trajectory,
)
from .sampler import (
    BeamEntry,
    SamplerConfig,
    SampleResult,
    derive_rng,
    estimate_expectation,
    conditional_expectation,
    gumbeldore_sample,
    nucleus_schedule,
    nucleus_truncate,
    sample_wr,
    sbs_round,
)
from .trie import SamplingTrie, UpdateMode
from .policy import LinearPolicy, greedy_rollout, zero_policy
from .selfimprove import TrainConfig, run_epoch, run_training, validate_greedy

__all__ = [
    "BeamEntry",
    "InfeasibleTrajectoryError",
    "Instance",
    "LinearPolicy",
    "SampleResult",
    "SamplerConfig",
    "SamplingTrie",
    "SequencePolicy",
    "TrainConfig",
    "Trajectory",
    "UpdateMode",
    "conditional_expectation",
    "derive_rng",
    "estimate_expectation",
    "greedy_rollout",
    "gumbeldore_sample",
    "nucleus_schedule",
    "nucleus_truncate",
    "run_epoch",
    "run_training",
    "sample_wr",
    "sbs_round",
    "total_log_prob",
    "validate_greedy",
    "validate_trajectory",
    "zero_policy",
]
