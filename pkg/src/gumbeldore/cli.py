"""Command-line entry point: training runs, sampler comparisons, oracle
suites, instance generation, evaluation, and the step-size grid search.

Every command is a pure function of (flags, seed, input files): the metrics
files it writes are byte-identical across reruns and worker counts. Wall
times and timestamps live only in manifest.json, which is the one
deliberately non-deterministic output.
"""

from __future__ import annotations

import argparse
import json
import math
import subprocess
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from . import compare as compare_mod
from . import oracle_suites
from .oracle import held_karp
from .policy import load_checkpoint, save_checkpoint, zero_policy
from .problems import make_generator, parse_instance, write_instance
from .sampler import SamplerConfig, derive_rng, gumbeldore_sample
from .selfimprove import TrainConfig, run_training, sigma_grid_search
from .trie import UpdateMode
from .workers import parallel_map

DEFAULT_SIGMA = {"tsp": 0.3, "jssp": 0.05}
MODE_MAP = {"none": UpdateMode.NONE, "gd": UpdateMode.GD, "theory": UpdateMode.THEORY_GD}

_S_EVAL = 21
_S_GEN = 22
_S_GRID_VAL = 23


class UsageError(Exception):
    pass


def _git_describe() -> str:
    try:
        proc = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=5,
        )
        return proc.stdout.strip() or "unknown"
    except Exception:
        return "unknown"


class RunContext:
    """Owns the output directory: deterministic metrics files plus a manifest
    holding the volatile metadata (timestamps, wall time, git describe)."""

    def __init__(self, out_dir, command: str, config: dict, seed: int):
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.started = time.monotonic()
        self.manifest = {
            "command": command,
            "config": config,
            "seed": seed,
            "git_describe": _git_describe(),
            "started": datetime.now(timezone.utc).isoformat(),
        }

    def write_jsonl(self, records, name: str = "metrics.jsonl") -> None:
        lines = [json.dumps(r, sort_keys=True) for r in records]
        (self.out / name).write_text("".join(line + "\n" for line in lines))

    def finish(self) -> None:
        self.manifest["finished"] = datetime.now(timezone.utc).isoformat()
        self.manifest["wall_ms"] = int((time.monotonic() - self.started) * 1000)
        (self.out / "manifest.json").write_text(json.dumps(self.manifest, indent=2, sort_keys=True) + "\n")


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=1)


def _add_problem_size(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problem", choices=["tsp", "jssp"], default="tsp")
    p.add_argument("--n", type=int, default=10, help="TSP node count")
    p.add_argument("--jobs", type=int, default=4)
    p.add_argument("--machines", type=int, default=4)


def _add_sampler(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=32, help="beam width")
    p.add_argument("--rounds", type=int, default=4)
    p.add_argument("--sigma", type=float, default=None, help="default: 0.3 tsp / 0.05 jssp")
    p.add_argument("--p-min", type=float, default=0.95, dest="p_min")
    p.add_argument("--mode", choices=sorted(MODE_MAP), default="gd")


def _resolve_sigma(args) -> float:
    return DEFAULT_SIGMA[args.problem] if args.sigma is None else args.sigma


def _config_echo(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _load_instances(args, count_flag: str = "count"):
    """Instances from --instances dir (sorted by filename) or generated."""
    if getattr(args, "instances", None):
        folder = Path(args.instances)
        files = sorted(folder.glob("*.txt"))
        if not files:
            raise UsageError(f"no instance files in {folder}")
        return [parse_instance(f, args.problem) for f in files], [f.name for f in files]
    gen = make_generator(args.problem, n=args.n, jobs=args.jobs, machines=args.machines)
    rng = derive_rng(args.seed, _S_GEN)
    count = getattr(args, count_flag)
    instances = [gen(rng) for _ in range(count)]
    return instances, [f"generated_{i:04d}" for i in range(count)]


# -- subcommands -------------------------------------------------------------


def cmd_train(args) -> int:
    sigma = _resolve_sigma(args)
    sampler = SamplerConfig(
        k=args.k,
        rounds=args.rounds,
        sigma=sigma,
        p_min=args.p_min,
        mode=MODE_MAP[args.mode],
        seed=args.seed,
    )
    config = TrainConfig(
        problem=args.problem,
        sampler=sampler,
        tsp_n=args.n,
        jssp_jobs=args.jobs,
        jssp_machines=args.machines,
        instances_per_epoch=args.instances_per_epoch,
        batches_per_epoch=args.batches,
        batch_size=args.batch_size,
        lr=args.lr,
        epochs=args.epochs,
        validation_size=args.val_size,
        seed=args.seed,
        workers=args.workers,
    )
    ctx = RunContext(args.out, "train", _config_echo(args), args.seed)

    def on_promote(epoch, policy, val_score):
        save_checkpoint(ctx.out / f"checkpoint_e{epoch:04d}.txt", policy, epoch, val_score)

    best, metrics, state = run_training(config, on_promote=on_promote)
    save_checkpoint(ctx.out / "checkpoint_best.txt", best, state.epoch, state.best_val)
    ctx.write_jsonl(metrics)
    ctx.finish()
    return 0


def cmd_sample_compare(args) -> int:
    ckpt = Path(args.checkpoint)
    if not ckpt.is_file():
        raise UsageError(f"checkpoint not found: {ckpt}")
    policy, _meta = load_checkpoint(ckpt)
    args.problem = policy.problem_kind
    sigma = DEFAULT_SIGMA[args.problem] if args.sigma is None else args.sigma
    instances, _names = _load_instances(args, "num_instances")
    ctx = RunContext(args.out, "sample-compare", _config_echo(args), args.seed)
    records = compare_mod.compare_methods(
        instances,
        policy,
        args.methods.split(","),
        args.k,
        list(range(1, args.rounds + 1)),
        sigma,
        args.p_min,
        args.reps,
        args.seed,
        args.workers,
    )
    ctx.write_jsonl(records)
    ctx.write_jsonl(compare_mod.summarize(records), "summary.jsonl")
    ctx.finish()
    return 0


def cmd_oracle(args) -> int:
    names = sorted(oracle_suites.SUITES) if args.suite == "all" else [args.suite]
    results = oracle_suites.run_suites(names, args.cases, args.seed)
    failed = False
    for res in results:
        print(f"{res.name}: {res.passed}/{res.cases} pass")
        if res.failures:
            failed = True
            print(json.dumps(res.failures[0], sort_keys=True), file=sys.stderr)
    if args.out:
        ctx = RunContext(args.out, "oracle", _config_echo(args), args.seed)
        ctx.write_jsonl(
            [
                {"suite": r.name, "cases": r.cases, "passed": r.passed}
                for r in results
            ]
        )
        ctx.finish()
    return 1 if failed else 0


def cmd_gen(args) -> int:
    ctx = RunContext(args.out, "gen", _config_echo(args), args.seed)
    gen = make_generator(args.problem, n=args.n, jobs=args.jobs, machines=args.machines)
    rng = derive_rng(args.seed, _S_GEN)
    for i in range(args.count):
        write_instance(ctx.out / f"instance_{i:04d}.txt", gen(rng))
    ctx.finish()
    return 0


def _eval_one(payload):
    idx, name, instance, policy, m, seed = payload
    from .policy import greedy_rollout

    greedy = greedy_rollout(policy, instance)
    greedy_f = instance.objective(greedy.tokens)
    k = min(32, m)
    cfg = SamplerConfig(k=k, rounds=math.ceil(m / k), sigma=0.0, p_min=1.0, mode=UpdateMode.NONE)
    result = gumbeldore_sample(instance, policy, cfg, derive_rng(seed, _S_EVAL, idx))
    best_f = max(greedy_f, result.best_f)  # the greedy rollout is part of the pool
    record = {
        "instance_id": idx,
        "file": name,
        "greedy_f": greedy_f,
        "best_f": best_f,
        "num_sampled": len(result.samples),
    }
    if instance.kind == "tsp" and instance.n <= 16:
        opt = held_karp(instance)
        record["opt_len"] = opt
        record["greedy_gap"] = (-greedy_f - opt) / opt
        record["best_gap"] = (-best_f - opt) / opt
    return record


def cmd_eval(args) -> int:
    ckpt = Path(args.checkpoint)
    if not ckpt.is_file():
        raise UsageError(f"checkpoint not found: {ckpt}")
    policy, _meta = load_checkpoint(ckpt)
    args.problem = policy.problem_kind
    instances, names = _load_instances(args, "count")
    ctx = RunContext(args.out, "eval", _config_echo(args), args.seed)
    records = parallel_map(
        _eval_one,
        [
            (i, names[i], inst, policy, args.m, args.seed)
            for i, inst in enumerate(instances)
        ],
        args.workers,
    )
    ctx.write_jsonl(records)
    mean_greedy = sum(r["greedy_f"] for r in records) / len(records)
    mean_best = sum(r["best_f"] for r in records) / len(records)
    print(f"instances: {len(records)}  mean greedy f: {mean_greedy:.6f}  mean best f: {mean_best:.6f}")
    ctx.finish()
    return 0


def cmd_sigma_grid(args) -> int:
    ctx = RunContext(args.out, "sigma-grid", _config_echo(args), args.seed)
    if args.checkpoint:
        policy, _meta = load_checkpoint(Path(args.checkpoint))
        args.problem = policy.problem_kind
    else:
        # Pretrain with the update switched off, then search the grid.
        sampler = SamplerConfig(
            k=args.k, rounds=args.rounds, sigma=0.0, p_min=1.0, mode=UpdateMode.GD, seed=args.seed
        )
        config = TrainConfig(
            problem=args.problem,
            sampler=sampler,
            tsp_n=args.n,
            jssp_jobs=args.jobs,
            jssp_machines=args.machines,
            instances_per_epoch=args.instances_per_epoch,
            batches_per_epoch=args.batches,
            batch_size=args.batch_size,
            lr=args.lr,
            epochs=args.pre_epochs,
            validation_size=args.val_size,
            seed=args.seed,
            workers=args.workers,
        )
        policy, _metrics, _state = run_training(config)
        save_checkpoint(ctx.out / "checkpoint_pretrained.txt", policy, args.pre_epochs, float("nan"))
    gen = make_generator(args.problem, n=args.n, jobs=args.jobs, machines=args.machines)
    rng = derive_rng(args.seed, _S_GRID_VAL)
    val = [gen(rng) for _ in range(args.val_size)]
    grid = [float(x) for x in args.grid.split(",")]
    best_sigma, records = sigma_grid_search(
        policy, val, grid, args.k, args.rounds, args.p_min, args.seed, args.workers
    )
    ctx.write_jsonl(records + [{"selected_sigma": best_sigma}])
    print(f"selected sigma: {best_sigma}")
    ctx.finish()
    return 0


# -- argument wiring ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gumbeldore")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("train", help="run the self-improvement training loop")
    _add_common(p)
    _add_problem_size(p)
    _add_sampler(p)
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--instances-per-epoch", type=int, default=50, dest="instances_per_epoch")
    p.add_argument("--batches", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=32, dest="batch_size")
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--val-size", type=int, default=32, dest="val_size")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample-compare", help="compare sampling methods on a frozen policy")
    _add_common(p)
    _add_problem_size(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--instances", default=None, help="directory of instance files")
    p.add_argument("--num-instances", type=int, default=100, dest="num_instances")
    p.add_argument("--k", type=int, default=32)
    p.add_argument("--rounds", type=int, default=4, help="sweeps 1..rounds")
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--p-min", type=float, default=0.95, dest="p_min")
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--methods", default=",".join(compare_mod.METHODS))
    p.set_defaults(func=cmd_sample_compare)

    p = sub.add_parser("oracle", help="run the oracle verification suites")
    p.add_argument("--suite", choices=["all"] + sorted(oracle_suites.SUITES), default="all")
    p.add_argument("--cases", type=int, default=200)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("gen", help="write instance files")
    _add_common(p)
    _add_problem_size(p)
    p.add_argument("--count", type=int, default=10)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("eval", help="evaluate a checkpoint on an instance set")
    _add_common(p)
    _add_problem_size(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--instances", default=None)
    p.add_argument("--count", type=int, default=100, help="generated instances if no --instances")
    p.add_argument("--m", type=int, default=128, help="sampling budget per instance")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sigma-grid", help="grid-search the advantage step size")
    _add_common(p)
    _add_problem_size(p)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--pre-epochs", type=int, default=20, dest="pre_epochs")
    p.add_argument("--instances-per-epoch", type=int, default=50, dest="instances_per_epoch")
    p.add_argument("--batches", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=32, dest="batch_size")
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--val-size", type=int, default=32, dest="val_size")
    p.add_argument("--k", type=int, default=32)
    p.add_argument("--rounds", type=int, default=4)
    p.add_argument("--p-min", type=float, default=1.0, dest="p_min")
    p.add_argument("--grid", default="0,0.1,0.2,0.3,0.5,1.0,2.0,3.0,5.0")
    p.set_defaults(func=cmd_sigma_grid)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
