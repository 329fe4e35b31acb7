"""Shared contracts: tokens, trajectories, the sequence-policy interface,
and log-domain probability accounting used across the whole package."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Protocol, Sequence, runtime_checkable

import numpy as np

# Tokens are dense non-negative integer indices into an instance's action
# space; problem modules own the mapping to domain objects (nodes, jobs).
Token = int
TokenSeq = tuple  # tuple[Token, ...]

NEG_INF = float("-inf")


@dataclass(frozen=True)
class Trajectory:
    """An ordered token sequence; complete trajectories are feasible solutions."""

    tokens: tuple
    complete: bool

    def __len__(self) -> int:
        return len(self.tokens)


def as_tokens(traj) -> tuple:
    """Accept either a Trajectory or a raw token sequence."""
    if isinstance(traj, Trajectory):
        return tuple(traj.tokens)
    return tuple(traj)


@runtime_checkable
class Instance(Protocol):
    """A CO problem instance: defines feasible tokens per prefix and an
    objective to maximize over complete trajectories."""

    kind: str

    @property
    def num_steps(self) -> int: ...

    def feasible_tokens(self, prefix: Sequence[Token]) -> list: ...

    def objective(self, tokens: Sequence[Token]) -> float: ...


@runtime_checkable
class SequencePolicy(Protocol):
    """Factorized sequence model: returns one finite logit per feasible token.

    Implementations must be deterministic for fixed inputs and parameters and
    must return tokens in ascending order; all randomness lives in the
    sampler's seeded RNG.
    """

    def conditional_logits(
        self, instance: Instance, prefix: Sequence[Token]
    ) -> list: ...


class ValidationReport(NamedTuple):
    ok: bool
    first_violation: int | None


class InfeasibleTrajectoryError(ValueError):
    """A trajectory leaves the feasible set; carries the violating position."""

    def __init__(self, index: int, token):
        self.index = index
        self.token = token
        super().__init__(f"infeasible token {token!r} at position {index}")


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable log-softmax of a 1-D logit vector."""
    shifted = logits - logits.max()
    return shifted - math.log(np.exp(shifted).sum())


def logsumexp(values: Iterable[float]) -> float:
    vals = [v for v in values if v != NEG_INF]
    if not vals:
        return NEG_INF
    m = max(vals)
    return m + math.log(sum(math.exp(v - m) for v in vals))


def logaddexp(a: float, b: float) -> float:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    m = max(a, b)
    return m + math.log(math.exp(a - m) + math.exp(b - m))


def log1mexp(x: float) -> float:
    """log(1 - exp(x)) for x <= 0, with log1mexp(0) = -inf.

    Uses the expm1/log1p split at -log(2) to stay accurate near both ends.
    """
    if x >= 0.0:
        if x == 0.0:
            return NEG_INF
        raise ValueError(f"log1mexp requires x <= 0, got {x}")
    if x > -math.log(2.0):
        return math.log(-math.expm1(x))
    return math.log1p(-math.exp(x))


def log_diff_exp(log_a: float, log_b: float) -> float:
    """log(exp(log_a) - exp(log_b)) for log_b <= log_a; -inf when equal
    or when float noise pushes log_b marginally above log_a."""
    if log_b == NEG_INF:
        return log_a
    if log_b >= log_a:
        return NEG_INF
    return log_a + log1mexp(log_b - log_a)


def validate_trajectory(instance: Instance, traj) -> ValidationReport:
    """Check each token against the feasible set of its prefix.

    Returns (ok, first_violation_index); never raises.
    """
    tokens = as_tokens(traj)
    if len(tokens) > instance.num_steps:
        return ValidationReport(False, instance.num_steps)
    for i, tok in enumerate(tokens):
        if tok not in instance.feasible_tokens(tokens[:i]):
            return ValidationReport(False, i)
    return ValidationReport(True, None)


def conditional_log_probs(
    policy: SequencePolicy, instance: Instance, prefix: Sequence[Token]
) -> dict:
    """Log-softmax of the policy's logits over the feasible tokens of a prefix."""
    pairs = policy.conditional_logits(instance, tuple(prefix))
    if not pairs:
        raise ValueError(f"policy returned empty feasible set for prefix {prefix!r}")
    toks = [t for t, _ in pairs]
    logps = log_softmax(np.asarray([l for _, l in pairs], dtype=float))
    return dict(zip(toks, logps.tolist()))


def total_log_prob(policy: SequencePolicy, instance: Instance, traj) -> float:
    """Sum over steps of the log-softmax probability of each chosen token."""
    tokens = as_tokens(traj)
    report = validate_trajectory(instance, tokens)
    if not report.ok:
        idx = report.first_violation
        tok = tokens[idx] if idx is not None and idx < len(tokens) else None
        raise InfeasibleTrajectoryError(idx, tok)
    total = 0.0
    for i, tok in enumerate(tokens):
        total += conditional_log_probs(policy, instance, tokens[:i])[tok]
    return total
