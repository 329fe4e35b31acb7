"""Trainable desk-scale policy: a linear-softmax scorer over per-candidate
problem features, with exact next-token cross-entropy gradients."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .core import Instance, Trajectory, log_softmax
from .problems import feature_dim, feature_matrix


@dataclass(frozen=True)
class LinearPolicy:
    """logit(candidate) = weights . features(candidate); zero weights give the
    uniform policy over feasible tokens."""

    weights: np.ndarray
    problem_kind: str

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (feature_dim(self.problem_kind),):
            raise ValueError(
                f"expected {feature_dim(self.problem_kind)} weights for {self.problem_kind}"
            )
        if not np.isfinite(w).all():
            raise ValueError("weights must be finite")
        object.__setattr__(self, "weights", w)

    def conditional_logits(self, instance: Instance, prefix) -> list:
        tokens, feats = feature_matrix(instance, prefix)
        return list(zip(tokens, (feats @ self.weights).tolist()))

    def with_weights(self, weights) -> "LinearPolicy":
        return LinearPolicy(np.array(weights, dtype=float), self.problem_kind)


def zero_policy(kind: str) -> LinearPolicy:
    return LinearPolicy(np.zeros(feature_dim(kind)), kind)


class BatchItem(NamedTuple):
    instance: Instance
    prefix: tuple
    target: int


@dataclass(frozen=True)
class TrainBatch:
    items: tuple

    def __len__(self) -> int:
        return len(self.items)


def nll_loss_and_grad(policy: LinearPolicy, batch: TrainBatch):
    """Mean next-token cross-entropy and its exact gradient.

    Per item the gradient is sum_c (softmax_c - 1[c == target]) * features_c,
    averaged over the batch.
    """
    if len(batch) == 0:
        raise ValueError("batch must be non-empty")
    loss = 0.0
    grad = np.zeros_like(policy.weights)
    for item in batch.items:
        tokens, feats = feature_matrix(item.instance, item.prefix)
        if item.target not in tokens:
            raise ValueError(f"target {item.target} infeasible after {item.prefix}")
        logp = log_softmax(feats @ policy.weights)
        probs = np.exp(logp)
        onehot = np.zeros(len(tokens))
        onehot[tokens.index(item.target)] = 1.0
        loss -= logp[tokens.index(item.target)]
        grad += feats.T @ (probs - onehot)
    n = len(batch)
    return loss / n, grad / n


def sgd_step(policy: LinearPolicy, grad: np.ndarray, lr: float) -> LinearPolicy:
    """Plain SGD with the gradient clipped to unit L2 norm."""
    if lr <= 0.0:
        raise ValueError("learning rate must be positive")
    grad = np.asarray(grad, dtype=float)
    if not np.isfinite(grad).all():
        raise ValueError("non-finite gradient")
    norm = float(np.linalg.norm(grad))
    if norm > 1.0:
        grad = grad / norm
    return policy.with_weights(policy.weights - lr * grad)


def greedy_rollout(policy: LinearPolicy, instance: Instance) -> Trajectory:
    """Deterministic argmax rollout; logit ties go to the lowest token index."""
    tokens: tuple = ()
    for _ in range(instance.num_steps):
        cands, feats = feature_matrix(instance, tokens)
        logits = feats @ policy.weights
        tokens += (cands[int(np.argmax(logits))],)  # argmax returns the first max
    return Trajectory(tokens, True)


def save_checkpoint(path, policy: LinearPolicy, epoch: int, val_score: float) -> None:
    """Text checkpoint: four header lines, then one weight per line."""
    lines = [
        f"kind {policy.problem_kind}",
        f"feature_dim {policy.weights.shape[0]}",
        f"epoch {epoch}",
        f"val_score {repr(float(val_score))}",
    ]
    lines += [repr(float(w)) for w in policy.weights]
    Path(path).write_text("\n".join(lines) + "\n")


def load_checkpoint(path):
    lines = Path(path).read_text().splitlines()
    header = dict(line.split(maxsplit=1) for line in lines[:4])
    dim = int(header["feature_dim"])
    weights = np.asarray([float(x) for x in lines[4 : 4 + dim]])
    policy = LinearPolicy(weights, header["kind"])
    meta = {"epoch": int(header["epoch"]), "val_score": float(header["val_score"])}
    return policy, meta


def sample_training_batch(
    dataset_entries: Sequence, batch_size: int, rng: np.random.Generator
) -> TrainBatch:
    """Uniform batch of (instance, prefix, next-token target) pairs drawn from
    stored full trajectories; prefix lengths are uniform over [0, T)."""
    if not dataset_entries:
        raise ValueError("cannot sample a batch from an empty dataset")
    items = []
    picks = rng.integers(0, len(dataset_entries), size=batch_size)
    for i in picks:
        instance, traj = dataset_entries[int(i)][0], dataset_entries[int(i)][1]
        tokens = traj.tokens
        d = int(rng.integers(0, len(tokens)))
        items.append(BatchItem(instance, tokens[:d], tokens[d]))
    return TrainBatch(tuple(items))
