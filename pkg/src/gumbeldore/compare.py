"""Head-to-head comparison of sampling methods on a frozen policy: i.i.d.
sampling, round-wise sampling without replacement, the growing nucleus
variant, and the advantage-updating samplers."""

from __future__ import annotations

import math
from typing import Sequence

from .core import Instance
from .policy import LinearPolicy
from .sampler import SamplerConfig, derive_rng, gumbeldore_sample, sample_wr
from .trie import UpdateMode
from .workers import parallel_map

METHODS = ("wr", "wor", "wor_nucleus", "gd", "theory_gd")

_S_COMPARE = 11


def _method_config(method: str, k: int, rounds: int, sigma: float, p_min: float) -> SamplerConfig:
    mode, sig, pm = {
        "wor": (UpdateMode.NONE, 0.0, 1.0),
        "wor_nucleus": (UpdateMode.NONE, 0.0, p_min),
        "gd": (UpdateMode.GD, sigma, p_min),
        "theory_gd": (UpdateMode.THEORY_GD, sigma, p_min),
    }[method]
    if rounds == 1:
        pm = 1.0  # a single round has no schedule; it degenerates to plain WOR
    return SamplerConfig(k=k, rounds=rounds, sigma=sig, p_min=pm, mode=mode)


def _run_cell(payload):
    methods, instance, policy, k, rounds, sigma, p_min, seed, rep, idx = payload
    rows = []
    for method in methods:
        # Same derived stream for every method: identically configured
        # methods produce identical rows, and differing ones stay paired.
        rng = derive_rng(seed, _S_COMPARE, rep, idx)
        if method == "wr":
            trajs = sample_wr(instance, policy, k * rounds, rng)
            objectives = [instance.objective(t.tokens) for t in trajs]
            best_f = max(objectives)
            num_unique = len({t.tokens for t in trajs})
            sig, pm = 0.0, 1.0
        else:
            cfg = _method_config(method, k, rounds, sigma, p_min)
            result = gumbeldore_sample(instance, policy, cfg, rng)
            best_f = result.best_f
            num_unique = len(result.samples)
            sig, pm = cfg.sigma, cfg.p_min
        rows.append(
            {
                "method": method,
                "k": k,
                "n": rounds,
                "sigma": sig,
                "p_min": pm,
                "rep": rep,
                "instance_id": idx,
                "best_f": best_f,
                "num_unique": num_unique,
            }
        )
    return rows


def compare_methods(
    instances: Sequence[Instance],
    policy: LinearPolicy,
    methods: Sequence[str],
    k: int,
    rounds_list: Sequence[int],
    sigma: float,
    p_min: float,
    reps: int,
    seed: int,
    workers: int = 1,
) -> list:
    """One record per (method, rounds, repetition, instance), in that nesting
    order; each repetition re-samples the same instances with fresh noise."""
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods: {sorted(unknown)}")
    records: list = []
    for rounds in rounds_list:
        payloads = [
            (tuple(methods), inst, policy, k, rounds, sigma, p_min, seed, rep, idx)
            for rep in range(reps)
            for idx, inst in enumerate(instances)
        ]
        for rows in parallel_map(_run_cell, payloads, workers):
            records.extend(rows)
    return records


def summarize(records: Sequence[dict]) -> list:
    """Per (method, rounds): mean of the per-repetition mean best objective,
    with the standard error across repetitions."""
    cells: dict = {}
    for r in records:
        cells.setdefault((r["method"], r["n"]), {}).setdefault(r["rep"], []).append(r["best_f"])
    out = []
    for (method, n), by_rep in sorted(cells.items()):
        rep_means = [sum(v) / len(v) for _, v in sorted(by_rep.items())]
        m = sum(rep_means) / len(rep_means)
        if len(rep_means) > 1:
            var = sum((x - m) ** 2 for x in rep_means) / (len(rep_means) - 1)
            se = math.sqrt(var / len(rep_means))
        else:
            se = 0.0
        out.append(
            {"method": method, "n": n, "reps": len(rep_means), "mean_best_f": m, "stderr": se}
        )
    return out


def rep_means(records: Sequence[dict], method: str, rounds: int) -> list:
    """Per-repetition mean best objective for one (method, rounds) cell."""
    by_rep: dict = {}
    for r in records:
        if r["method"] == method and r["n"] == rounds:
            by_rep.setdefault(r["rep"], []).append(r["best_f"])
    return [sum(v) / len(v) for _, v in sorted(by_rep.items())]
