"""Job-shop scheduling: a schedule is an ordered sequence of job indices.

Each occurrence of a job schedules that job's next operation at the earliest
feasible time; machine and job availability times advance together via
z = max(job availability, machine availability) + processing time. All
timing arithmetic stays in exact integers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_PROC_TIME = 99  # processing times drawn uniformly from [1, 99]


class JsspInstance:
    kind = "jssp"

    def __init__(self, machine_of, proc_time):
        self.machine_of = [list(map(int, row)) for row in machine_of]
        self.proc_time = [list(map(int, row)) for row in proc_time]
        self.jobs = len(self.machine_of)
        if self.jobs == 0 or len(self.proc_time) != self.jobs:
            raise ValueError("machine and time tables must have the same non-zero job count")
        self.machines = len(self.machine_of[0])
        for i, (mrow, prow) in enumerate(zip(self.machine_of, self.proc_time)):
            if sorted(mrow) != list(range(self.machines)):
                raise ValueError(f"job {i}: machine row is not a permutation")
            if len(prow) != self.machines or any(p < 1 for p in prow):
                raise ValueError(f"job {i}: processing times must be positive, one per machine")

    @property
    def num_steps(self) -> int:
        return self.jobs * self.machines

    def feasible_tokens(self, prefix) -> list:
        counts = [0] * self.jobs
        for tok in prefix:
            counts[tok] += 1
        return [j for j in range(self.jobs) if counts[j] < self.machines]

    def objective(self, tokens) -> float:
        tokens = tuple(tokens)
        counts = [0] * self.jobs
        for tok in tokens:
            if not 0 <= tok < self.jobs:
                raise ValueError(f"unknown job index {tok}")
            counts[tok] += 1
        if counts != [self.machines] * self.jobs:
            raise ValueError("schedule must contain each job exactly once per machine")
        state = initial_state(self)
        for tok in tokens:
            state, _ = jssp_step(self, state, tok)
        return -max(state.avail_mach)


@dataclass(frozen=True)
class JsspState:
    """Construction state: per-job next operation and availability times."""

    next_op: tuple
    avail_mach: tuple
    avail_job: tuple


def initial_state(instance: JsspInstance) -> JsspState:
    return JsspState(
        (0,) * instance.jobs, (0,) * instance.machines, (0,) * instance.jobs
    )


def jssp_step(instance: JsspInstance, state: JsspState, job: int):
    """Schedule the next operation of a job; returns (new state, finish time)."""
    op = state.next_op[job]
    if op >= instance.machines:
        raise ValueError(f"job {job} is already finished")
    machine = instance.machine_of[job][op]
    z = max(state.avail_job[job], state.avail_mach[machine]) + instance.proc_time[job][op]
    next_op = state.next_op[:job] + (op + 1,) + state.next_op[job + 1 :]
    avail_mach = state.avail_mach[:machine] + (z,) + state.avail_mach[machine + 1 :]
    avail_job = state.avail_job[:job] + (z,) + state.avail_job[job + 1 :]
    return JsspState(next_op, avail_mach, avail_job), z


def state_after(instance: JsspInstance, prefix) -> JsspState:
    state = initial_state(instance)
    for tok in prefix:
        state, _ = jssp_step(instance, state, tok)
    return state


def gen_jssp(jobs: int, machines: int, rng: np.random.Generator) -> JsspInstance:
    """Random instance: uniform integer times in [1, 99], one uniformly random
    machine permutation per job."""
    if jobs < 1 or machines < 1:
        raise ValueError("need at least one job and one machine")
    machine_of = [rng.permutation(machines).tolist() for _ in range(jobs)]
    proc_time = rng.integers(1, MAX_PROC_TIME + 1, size=(jobs, machines)).tolist()
    return JsspInstance(machine_of, proc_time)


def jssp_features(instance: JsspInstance, state: JsspState, job: int) -> np.ndarray:
    """Features of scheduling `job` next; see feature_matrix for the columns."""
    candidates = [j for j in range(instance.jobs) if state.next_op[j] < instance.machines]
    _, matrix = _features_for(instance, state, candidates)
    return matrix[candidates.index(job)]


def feature_matrix(instance: JsspInstance, prefix):
    """Per-candidate features for every unfinished job.

    Columns (times scaled by the max processing time bucket of 100):
    next-op processing time, earliest-start shift over the best candidate,
    remaining work of the job, remaining operation fraction, and the machine
    idle gap the op would cause if scheduled now.
    """
    state = state_after(instance, prefix)
    candidates = [j for j in range(instance.jobs) if state.next_op[j] < instance.machines]
    return _features_for(instance, state, candidates)


def _features_for(instance: JsspInstance, state: JsspState, candidates):
    m_total = instance.machines
    starts = []
    rows = []
    for j in candidates:
        op = state.next_op[j]
        machine = instance.machine_of[j][op]
        starts.append(max(state.avail_job[j], state.avail_mach[machine]))
    r_min = min(starts)
    for j, r in zip(candidates, starts):
        op = state.next_op[j]
        machine = instance.machine_of[j][op]
        remaining_work = sum(instance.proc_time[j][op:])
        rows.append(
            [
                instance.proc_time[j][op] / 100.0,
                (r - r_min) / 100.0,
                remaining_work / (100.0 * m_total),
                (m_total - op) / m_total,
                (r - state.avail_mach[machine]) / 100.0,
            ]
        )
    return candidates, np.asarray(rows, dtype=float)
