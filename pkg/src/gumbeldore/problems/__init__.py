"""Concrete CO domains (TSP, JSSP): generation, objectives, per-token
features for the policy, and plain-text instance files."""

from __future__ import annotations

from pathlib import Path

from .jssp import (
    JsspInstance,
    JsspState,
    gen_jssp,
    initial_state,
    jssp_features,
    jssp_step,
    state_after,
)
from .tsp import TspInstance, gen_tsp, tsp_features

from . import jssp as _jssp
from . import tsp as _tsp

FEATURE_DIMS = {"tsp": 6, "jssp": 5}


def feature_dim(kind: str) -> int:
    return FEATURE_DIMS[kind]


def feature_matrix(instance, prefix):
    """(candidate tokens, feature rows) for the feasible next tokens."""
    if instance.kind == "tsp":
        return _tsp.feature_matrix(instance, prefix)
    if instance.kind == "jssp":
        return _jssp.feature_matrix(instance, prefix)
    raise ValueError(f"unknown problem kind {instance.kind!r}")


def make_generator(problem: str, *, n: int = 10, jobs: int = 4, machines: int = 4):
    """Instance generator closure for a problem kind and size."""
    if problem == "tsp":
        return lambda rng: gen_tsp(n, rng)
    if problem == "jssp":
        return lambda rng: gen_jssp(jobs, machines, rng)
    raise ValueError(f"unknown problem kind {problem!r}")


class InstanceFileError(ValueError):
    def __init__(self, path, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


def parse_instance(path, kind: str):
    """Read a plain-text instance file; errors carry the offending line number."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if kind == "tsp":
        return _parse_tsp(path, lines)
    if kind == "jssp":
        return _parse_jssp(path, lines)
    raise ValueError(f"unknown problem kind {kind!r}")


def _parse_tsp(path, lines):
    try:
        n = int(lines[0])
    except (IndexError, ValueError):
        raise InstanceFileError(path, 1, "expected the node count") from None
    coords = []
    for i in range(n):
        try:
            x, y = lines[1 + i].split()
            coords.append((float(x), float(y)))
        except (IndexError, ValueError):
            raise InstanceFileError(path, 2 + i, "expected 'x y' coordinates") from None
    return TspInstance(coords)


def _parse_jssp(path, lines):
    try:
        jobs, machines = map(int, lines[0].split())
    except (IndexError, ValueError):
        raise InstanceFileError(path, 1, "expected 'J M' counts") from None
    machine_of, proc_time = [], []
    for i in range(jobs):
        try:
            fields = list(map(int, lines[1 + i].split()))
            if len(fields) != 2 * machines:
                raise ValueError
            machine_of.append(fields[0::2])
            proc_time.append(fields[1::2])
        except (IndexError, ValueError):
            raise InstanceFileError(
                path, 2 + i, f"expected {machines} 'machine time' pairs"
            ) from None
    return JsspInstance(machine_of, proc_time)


def write_instance(path, instance) -> None:
    """Write the canonical text form (LF newlines, shortest float repr)."""
    path = Path(path)
    if instance.kind == "tsp":
        rows = [str(instance.n)]
        rows += [f"{repr(float(x))} {repr(float(y))}" for x, y in instance.coords]
    elif instance.kind == "jssp":
        rows = [f"{instance.jobs} {instance.machines}"]
        for mrow, prow in zip(instance.machine_of, instance.proc_time):
            rows.append(" ".join(f"{m} {p}" for m, p in zip(mrow, prow)))
    else:
        raise ValueError(f"unknown problem kind {instance.kind!r}")
    path.write_text("\n".join(rows) + "\n")
