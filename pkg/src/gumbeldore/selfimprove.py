"""Self-improvement training: each epoch samples solutions for fresh random
instances with the best policy so far, keeps the best solution per instance
as a pseudo-expert target, trains the current policy on next-token
prediction, and promotes it (resetting the dataset) when its greedy
validation score strictly improves."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from .core import Instance, Trajectory
from .policy import (
    LinearPolicy,
    greedy_rollout,
    nll_loss_and_grad,
    sample_training_batch,
    sgd_step,
    zero_policy,
)
from .problems import make_generator
from .sampler import SamplerConfig, derive_rng, gumbeldore_sample
from .workers import parallel_map

# RNG stream ids; every consumer owns an independent derived stream so that
# e.g. changing the update mode cannot shift instance generation.
_S_VALIDATION = 1
_S_INSTANCES = 2
_S_SAMPLE = 3
_S_TRAIN = 4

PROMOTION_EPS = 1e-9  # strict improvement margin; avoids float-noise dataset resets


@dataclass(frozen=True)
class TrainConfig:
    problem: str
    sampler: SamplerConfig
    tsp_n: int = 10
    jssp_jobs: int = 4
    jssp_machines: int = 4
    instances_per_epoch: int = 50
    batches_per_epoch: int = 100
    batch_size: int = 32
    lr: float = 1e-2
    epochs: int = 40
    validation_size: int = 32
    seed: int = 0
    workers: int = 1

    @property
    def samples_per_instance(self) -> int:
        return self.sampler.k * self.sampler.rounds

    def generator(self) -> Callable:
        return make_generator(
            self.problem, n=self.tsp_n, jobs=self.jssp_jobs, machines=self.jssp_machines
        )


@dataclass(frozen=True)
class DatasetEntry:
    instance: Instance
    trajectory: Trajectory
    objective: float
    epoch_added: int


@dataclass
class TrainState:
    current: LinearPolicy
    best: LinearPolicy
    best_val: float
    dataset: list = field(default_factory=list)
    validation: list = field(default_factory=list)
    epoch: int = 0


def validate_greedy(policy: LinearPolicy, validation: Sequence[Instance]) -> float:
    """Mean objective of deterministic greedy rollouts."""
    if not validation:
        raise ValueError("validation set must be non-empty")
    return sum(
        inst.objective(greedy_rollout(policy, inst).tokens) for inst in validation
    ) / len(validation)


def effective_p_min(epoch: int, total_epochs: int, late_p_min: float) -> float:
    """Full distribution for the first half of training, then the configured
    nucleus floor."""
    return 1.0 if epoch <= total_epochs // 2 else late_p_min


def initial_state(config: TrainConfig) -> TrainState:
    gen = config.generator()
    rng = derive_rng(config.seed, _S_VALIDATION)
    validation = [gen(rng) for _ in range(config.validation_size)]
    policy = zero_policy(config.problem)
    return TrainState(
        current=policy,
        best=policy,
        best_val=validate_greedy(policy, validation),
        validation=validation,
    )


def _sample_instance(payload):
    idx, instance, policy, cfg, seed, epoch = payload
    rng = derive_rng(seed, _S_SAMPLE, epoch, idx)
    result = gumbeldore_sample(instance, policy, cfg, rng)
    return idx, result.best, result.best_f


def run_epoch(state: TrainState, config: TrainConfig) -> dict:
    """One full epoch; mutates state and returns its metrics record."""
    state.epoch += 1
    epoch = state.epoch
    gen = config.generator()
    inst_rng = derive_rng(config.seed, _S_INSTANCES, epoch)
    instances = [gen(inst_rng) for _ in range(config.instances_per_epoch)]

    cfg = replace(
        config.sampler, p_min=effective_p_min(epoch, config.epochs, config.sampler.p_min)
    )
    results = parallel_map(
        _sample_instance,
        [
            (idx, inst, state.best, cfg, config.seed, epoch)
            for idx, inst in enumerate(instances)
        ],
        config.workers,
    )
    best_fs = []
    for idx, best_traj, best_f in results:
        state.dataset.append(DatasetEntry(instances[idx], best_traj, best_f, epoch))
        best_fs.append(best_f)

    train_rng = derive_rng(config.seed, _S_TRAIN, epoch)
    entries = [(e.instance, e.trajectory) for e in state.dataset]
    for _ in range(config.batches_per_epoch):
        batch = sample_training_batch(entries, config.batch_size, train_rng)
        _, grad = nll_loss_and_grad(state.current, batch)
        state.current = sgd_step(state.current, grad, config.lr)

    mean_val = validate_greedy(state.current, state.validation)
    promoted = mean_val > state.best_val + PROMOTION_EPS
    if promoted:
        state.best = state.current
        state.best_val = mean_val
        state.dataset = []

    return {
        "epoch": epoch,
        "mean_val_f": mean_val,
        "best_val_f": state.best_val,
        "mean_best_sampled_f": sum(best_fs) / len(best_fs),
        "dataset_size": len(state.dataset),
        "promoted": promoted,
    }


def run_training(
    config: TrainConfig,
    on_epoch: Callable | None = None,
    on_promote: Callable | None = None,
):
    """Full training loop from a zero-initialized (uniform) policy.

    Returns (best policy, metrics records, final state). on_promote fires
    with (epoch, policy, val_score) whenever the best policy is replaced.
    """
    state = initial_state(config)
    metrics: list = []
    for _ in range(config.epochs):
        record = run_epoch(state, config)
        metrics.append(record)
        if on_epoch is not None:
            on_epoch(record)
        if record["promoted"] and on_promote is not None:
            on_promote(state.epoch, state.best, state.best_val)
    return state.best, metrics, state


def sigma_grid_search(
    policy: LinearPolicy,
    instances: Sequence[Instance],
    grid: Sequence[float],
    k: int,
    rounds: int,
    p_min: float,
    seed: int,
    workers: int = 1,
):
    """Pick the advantage step size by sampling the same validation instances
    with each candidate value and keeping the best mean best-objective.

    Instances share RNG streams across candidates, so the comparison is
    paired. Ties go to the smallest step size.
    """
    records = []
    best_sigma, best_score = None, -math.inf
    for sigma in grid:
        cfg = SamplerConfig(k=k, rounds=rounds, sigma=sigma, p_min=p_min, mode="gd")
        results = parallel_map(
            _sample_instance,
            [(idx, inst, policy, cfg, seed, 0) for idx, inst in enumerate(instances)],
            workers,
        )
        score = sum(r[2] for r in results) / len(results)
        records.append({"sigma": sigma, "mean_best_f": score})
        if score > best_score:
            best_sigma, best_score = sigma, score
    return best_sigma, records
