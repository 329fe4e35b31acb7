"""Round-wise stochastic beam search over the sampling trie, the growing
nucleus schedule, and the full multi-round sampler with advantage updates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .core import Instance, SequencePolicy, Trajectory, conditional_log_probs
from .estimators import (  # re-exported: these consume this module's round output
    EstimateResult,
    EstimatorTerm,
    ScoredSample,
    conditional_expectation,
    estimate_expectation,
    estimator_terms,
)
from .gumbel import conditioned_scores, sample_gumbel
from .trie import CommittedSequence, DepletedTrieError, SamplingTrie, UpdateMode

__all__ = [
    "BeamEntry",
    "SamplerConfig",
    "SampleResult",
    "EstimateResult",
    "EstimatorTerm",
    "ScoredSample",
    "conditional_expectation",
    "estimate_expectation",
    "estimator_terms",
    "derive_rng",
    "nucleus_truncate",
    "nucleus_schedule",
    "sbs_round",
    "gumbeldore_sample",
    "sample_wr",
]

# Cumulative-probability comparisons get a hair of slack so that an exact
# boundary like (0.5, 0.3) with p = 0.8 is included, as defined.
_NUCLEUS_TOL = 1e-12


def derive_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent, reproducible generator for a (seed, *stream) tuple.

    Worker-count independent: every instance/repetition derives its own
    stream, so results do not depend on how work is distributed.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(stream)))


class BeamEntry(NamedTuple):
    """A (partial) sequence on the beam.

    logprob is the total log-probability under the distribution the current
    round samples from (trie-adjusted, nucleus-truncated); score is its
    Gumbel-perturbed counterpart used for ranking.
    """

    tokens: tuple
    logprob: float
    score: float


@dataclass(frozen=True)
class SamplerConfig:
    k: int  # beam width
    rounds: int
    sigma: float = 0.0
    p_min: float = 1.0
    mode: UpdateMode = UpdateMode.NONE
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("beam width k must be >= 1")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.sigma < 0.0:
            raise ValueError("sigma must be non-negative")
        if not (0.0 < self.p_min <= 1.0):
            raise ValueError("p_min must lie in (0, 1]")
        object.__setattr__(self, "mode", UpdateMode(self.mode))


@dataclass
class SampleResult:
    best: Trajectory
    best_f: float
    samples: list = field(default_factory=list)  # (Trajectory, objective) in draw order


def nucleus_schedule(round_i: int, n: int, p_min: float) -> float:
    """Nucleus size for round i of n: linear from p_min up to 1.

    A single round has no schedule to interpolate and uses p_min itself.
    """
    if not 1 <= round_i <= n:
        raise ValueError(f"round {round_i} outside [1, {n}]")
    if n == 1:
        return p_min
    frac = (round_i - 1) / (n - 1)
    return (1.0 - frac) * p_min + frac


def _log_normalize(logw: list) -> list:
    m = max(logw)
    ls = m + math.log(sum(math.exp(w - m) for w in logw))
    return [w - ls for w in logw]


def _nucleus_list(tokens: list, log_weights: list, p: float):
    """Smallest descending-probability set with cumulative mass >= p,
    renormalized. p = 1 keeps all tokens in their given order; p < 1 returns
    the kept tokens in descending-probability order (probability ties break
    by token index)."""
    logps = _log_normalize(log_weights)
    if p >= 1.0:
        return tokens, logps
    probs = [math.exp(lp) for lp in logps]
    order = sorted(range(len(tokens)), key=lambda i: (-probs[i], tokens[i]))
    keep = []
    csum = 0.0
    for i in order:
        keep.append(i)
        csum += probs[i]
        if csum >= p - _NUCLEUS_TOL:
            break
    return [tokens[i] for i in keep], _log_normalize([logps[i] for i in keep])


def nucleus_truncate(cond_weights: Sequence, p: float) -> list:
    """Top-p truncation of a (token, log-weight) vector; p = 1 keeps all."""
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    tokens = [t for t, _ in cond_weights]
    logw = [float(w) for _, w in cond_weights]
    toks, logps = _nucleus_list(tokens, logw, p)
    return list(zip(toks, logps))


def sbs_round(trie: SamplingTrie, k: int, p: float, rng: np.random.Generator) -> list:
    """One stochastic-beam-search round of width k over the current trie policy.

    Children of each beam node receive Gumbel scores conditioned on their
    parent's score, so keeping the top k by score at every level draws up to
    k complete sequences without replacement. The root score is itself a
    standard Gumbel draw: the round's conditionals are normalized, so this
    reproduces exactly the joint law of independently perturbing every
    complete sequence, which the expectation estimators rely on (pinning the
    root to a constant provably biases them). Ties break by lexicographic
    token order for reproducibility.
    """
    if trie.root.depleted:
        raise DepletedTrieError("cannot run a sampling round on a depleted trie")
    T = trie.instance.num_steps
    # Beam rows carry their trie node so no per-level root walks are needed;
    # candidate rows start with (-score, tokens) so plain tuple sort ranks
    # by score descending with lexicographic tie-breaks.
    beam = [((), 0.0, sample_gumbel(0.0, rng), trie.root)]
    for _depth in range(T):
        candidates = []
        for tokens, logprob, score, node in beam:
            trie.ensure_expanded(node, tokens)
            cached = node.trunc_cache.get(p)
            if cached is None:
                cached = _nucleus_list(*trie._adjusted_arrays(node), p)
                node.trunc_cache[p] = cached
            toks, logps = cached
            locations = [logprob + lp for lp in logps]
            scores = conditioned_scores(locations, score, rng)
            candidates.extend(
                (-g, tokens + (tok,), lp, node)
                for tok, lp, g in zip(toks, locations, scores)
            )
        candidates.sort()
        beam = [
            (tokens, lp, -neg, trie.child_of(parent, tokens[-1]))
            for neg, tokens, lp, parent in candidates[:k]
        ]
    return [BeamEntry(tokens, lp, score) for tokens, lp, score, _node in beam]


def gumbeldore_sample(
    instance: Instance,
    policy: SequencePolicy,
    config: SamplerConfig,
    rng: np.random.Generator | None = None,
    round_callback: Callable | None = None,
) -> SampleResult:
    """Sample k sequences per round for n rounds, without replacement across
    all rounds, updating the trie between rounds per config.mode.

    Each round: pick the nucleus size from the schedule, run one SBS round,
    evaluate objectives, estimate the expected objective from the round, and
    commit the round to the trie (mass removal plus advantage bonuses).
    Returns the best sequence found over the union of all rounds.
    """
    if rng is None:
        rng = derive_rng(config.seed)
    trie = SamplingTrie(instance, policy)
    samples: list = []
    best_tokens: tuple | None = None
    best_f = -math.inf
    for i in range(1, config.rounds + 1):
        if trie.root.depleted:
            break
        p = nucleus_schedule(i, config.rounds, config.p_min)
        entries = sbs_round(trie, config.k, p, rng)
        objectives = [instance.objective(e.tokens) for e in entries]
        mu = estimate_expectation(
            [ScoredSample(e.logprob, e.score, f) for e, f in zip(entries, objectives)]
        ).normalized
        trie.commit_round(
            [
                CommittedSequence(e.tokens, e.logprob, e.score, f)
                for e, f in zip(entries, objectives)
            ],
            mu,
            config.sigma,
            config.mode,
        )
        for e, f in zip(entries, objectives):
            samples.append((Trajectory(e.tokens, True), f))
            if f > best_f:
                best_f, best_tokens = f, e.tokens
        if round_callback is not None:
            round_callback(trie, i, entries, objectives)
    if best_tokens is None:
        raise ValueError("sampler produced no trajectories")
    return SampleResult(Trajectory(best_tokens, True), best_f, samples)


def sample_wr(
    instance: Instance, policy: SequencePolicy, m: int, rng: np.random.Generator
) -> list:
    """m i.i.d. ancestral rollouts from the policy; duplicates allowed."""
    if m < 1:
        raise ValueError("m must be >= 1")
    T = instance.num_steps
    out = []
    for _ in range(m):
        tokens: tuple = ()
        for _step in range(T):
            cond = conditional_log_probs(policy, instance, tokens)
            toks = list(cond)
            cum = np.cumsum([math.exp(cond[t]) for t in toks])
            idx = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
            tokens += (toks[min(idx, len(toks) - 1)],)
        out.append(Trajectory(tokens, True))
    return out
