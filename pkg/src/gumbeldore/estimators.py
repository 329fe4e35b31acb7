"""Importance-weighted expectation estimators over sequences sampled
without replacement, thresholded at the smallest kept perturbed score."""

from __future__ import annotations

import math
from typing import Iterable, NamedTuple

from .gumbel import exceedance_prob, log_exceedance_prob


class ScoredSample(NamedTuple):
    """One complete sampled sequence as seen by the estimators."""

    logprob: float  # total log-probability under the distribution sampled from
    score: float  # Gumbel-perturbed log-probability
    objective: float


class EstimatorTerm(NamedTuple):
    logprob: float
    exceedance: float  # probability the sample's perturbed score beats the threshold
    weight: float  # exp(logprob) / exceedance
    objective: float


class EstimateResult(NamedTuple):
    normalized: float
    unnormalized: float
    degenerate: bool  # fewer than 2 samples: both values fall back to the single objective


def _check_sorted(entries: list) -> None:
    for a, b in zip(entries, entries[1:]):
        if a.score < b.score:
            raise ValueError("samples must be sorted by perturbed score, descending")


def estimator_terms(entries: Iterable[ScoredSample]) -> list:
    """Weights for all but the last entry, thresholded at the last entry's score.

    The last (smallest-score) entry only supplies the threshold and carries
    no weight of its own.
    """
    entries = list(entries)
    _check_sorted(entries)
    if len(entries) < 2:
        return []
    kappa = entries[-1].score
    terms = []
    for e in entries[:-1]:
        q = exceedance_prob(e.logprob, kappa)
        if q > 0.0:
            w = math.exp(e.logprob) / q
        else:
            # q underflowed; weight via logs (w = exp(logprob - log q)).
            w = math.exp(e.logprob - log_exceedance_prob(e.logprob, kappa))
        terms.append(EstimatorTerm(e.logprob, q, w, e.objective))
    return terms


def estimate_expectation(entries: Iterable[ScoredSample]) -> EstimateResult:
    """Estimate E[f] from one round of sampling without replacement.

    Unnormalized: sum w_i f_i (unbiased). Normalized: sum w_i f_i / sum w_i
    (biased but consistent, lower variance). A single sample is degenerate
    and returns its own objective for both.
    """
    entries = list(entries)
    if len(entries) < 2:
        if not entries:
            raise ValueError("estimate_expectation requires at least one sample")
        f = entries[0].objective
        return EstimateResult(f, f, True)
    terms = estimator_terms(entries)
    wsum = sum(t.weight for t in terms)
    wfsum = sum(t.weight * t.objective for t in terms)
    normalized = wfsum / wsum if wsum > 0.0 else entries[0].objective
    return EstimateResult(normalized, wfsum, False)


def conditional_expectation(entries: Iterable[ScoredSample]) -> float:
    """Normalized estimate restricted to the samples sharing a common prefix.

    The caller supplies exactly the subset that shares the prefix, still in
    descending score order; a singleton subset returns its own objective.
    """
    entries = list(entries)
    if not entries:
        raise ValueError("conditional_expectation requires a non-empty subset")
    return estimate_expectation(entries).normalized
