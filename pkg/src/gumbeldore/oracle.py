"""Independent brute-force ground truths: enumerable sequence models with
exact expectations, the provable advantage update on exact expectations,
exact TSP optima, and a worklist JSSP scheduler.

Everything here is deliberately written against its own code paths (plain
probability space, explicit enumeration) so it can serve as an oracle for
the log-domain engine.
"""

from __future__ import annotations

import math
from itertools import permutations

import numpy as np


class EnumerableModel:
    """Explicit small sequence model; doubles as instance and policy in tests.

    conds maps every internal prefix to {token: conditional probability};
    leaf_values maps every complete token tuple to its objective.
    """

    kind = "enum"

    def __init__(self, depth: int, conds: dict, leaf_values: dict):
        self.depth = depth
        self.conds = {tuple(k): dict(v) for k, v in conds.items()}
        self.leaf_values = {tuple(k): float(v) for k, v in leaf_values.items()}
        for prefix, dist in self.conds.items():
            total = sum(dist.values())
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"conditionals at {prefix} sum to {total}")
            if any(p <= 0.0 for p in dist.values()):
                raise ValueError(f"non-positive conditional at {prefix}")

    @property
    def num_steps(self) -> int:
        return self.depth

    def feasible_tokens(self, prefix) -> list:
        return sorted(self.conds[tuple(prefix)])

    def objective(self, tokens) -> float:
        return self.leaf_values[tuple(tokens)]

    def conditional_logits(self, instance, prefix) -> list:
        dist = self.conds[tuple(prefix)]
        return [(t, math.log(dist[t])) for t in sorted(dist)]

    def leaves(self) -> list:
        return sorted(self.leaf_values)


def uniform_full_model(depth: int, branching: int, leaf_values=None) -> EnumerableModel:
    """Full b-ary tree with uniform conditionals everywhere."""
    conds, values = {}, {}

    def build(prefix):
        if len(prefix) == depth:
            values[prefix] = 0.0
            return
        conds[prefix] = {t: 1.0 / branching for t in range(branching)}
        for t in range(branching):
            build(prefix + (t,))

    build(())
    if leaf_values is not None:
        for k, v in leaf_values.items():
            values[tuple(k)] = float(v)
    return EnumerableModel(depth, conds, values)


def random_enumerable_model(
    rng: np.random.Generator,
    depth: int = 3,
    branching: int = 3,
    fixed_branching: bool = True,
    f_low: float = -1.0,
    f_high: float = 1.0,
) -> EnumerableModel:
    """Random small model: Dirichlet conditionals, uniform leaf objectives."""
    conds, values = {}, {}

    def build(prefix):
        if len(prefix) == depth:
            values[prefix] = float(rng.uniform(f_low, f_high))
            return
        b = branching if fixed_branching else int(rng.integers(2, branching + 1))
        probs = rng.dirichlet(np.ones(b))
        probs = (probs + 1e-9) / (probs + 1e-9).sum()  # keep strictly positive
        conds[prefix] = {t: float(probs[t]) for t in range(b)}
        for t in range(b):
            build(prefix + (t,))

    build(())
    return EnumerableModel(depth, conds, values)


def enumerate_leaf_distribution(model: EnumerableModel) -> dict:
    """Exact product-of-conditionals probability of every complete sequence."""
    out = {}

    def walk(prefix, prob):
        if len(prefix) == model.depth:
            out[prefix] = prob
            return
        for tok, p in model.conds[prefix].items():
            walk(prefix + (tok,), prob * p)

    walk((), 1.0)
    return out


def exact_expectation(model: EnumerableModel) -> float:
    dist = enumerate_leaf_distribution(model)
    return sum(p * model.leaf_values[leaf] for leaf, p in dist.items())


def exact_conditional_expectation(model: EnumerableModel, prefix) -> float:
    """E[f | prefix] by enumeration of the subtree."""
    prefix = tuple(prefix)
    dist = enumerate_leaf_distribution(model)
    mass = 0.0
    total = 0.0
    for leaf, p in dist.items():
        if leaf[: len(prefix)] == prefix:
            mass += p
            total += p * model.leaf_values[leaf]
    if mass == 0.0:
        raise ValueError(f"prefix {prefix} unreachable")
    return total / mass


def reweight_single_choice(probs, values, j: int):
    """Categorical single-logit shift: raise choice j's logit by its advantage.

    logit'(j) = log p(j) + values[j] - E[values]; other logits unchanged.
    Returns the renormalized distribution; never decreases E[values].
    """
    probs = np.asarray(probs, dtype=float)
    values = np.asarray(values, dtype=float)
    logits = np.log(probs)
    logits[j] += values[j] - float(probs @ values)
    shifted = np.exp(logits - logits.max())
    return shifted / shifted.sum()


def apply_exact_advantage_update(model: EnumerableModel, trajectory, sigma: float) -> EnumerableModel:
    """Shift each trajectory token's logit by sigma times its exact advantage
    (child minus parent conditional expectation), then renormalize.

    All expectations are computed on the original model by enumeration; the
    result provably has expectation no worse than the original.
    """
    trajectory = tuple(trajectory)
    new_conds = {k: dict(v) for k, v in model.conds.items()}
    for i in range(1, len(trajectory) + 1):
        prefix, tok = trajectory[: i - 1], trajectory[i - 1]
        adv = exact_conditional_expectation(model, trajectory[:i]) - exact_conditional_expectation(
            model, prefix
        )
        dist = new_conds[prefix]
        logits = {t: math.log(p) for t, p in dist.items()}
        logits[tok] += sigma * adv
        top = max(logits.values())
        norm = sum(math.exp(l - top) for l in logits.values())
        new_conds[prefix] = {t: math.exp(l - top) / norm for t, l in logits.items()}
    return EnumerableModel(model.depth, new_conds, model.leaf_values)


def adjusted_leaf_distribution_reference(model: EnumerableModel, committed, sigma: float) -> dict:
    """Reference evaluation of the trie semantics in plain probability space.

    committed is a list of (tokens, advantage) pairs. Each node's weight is
    (original subtree mass - committed mass beneath) * exp(sigma * sum of
    advantages beneath); conditionals renormalize among siblings; committed
    leaves are excluded. Independent of the log-domain trie implementation.
    """
    orig = enumerate_leaf_distribution(model)
    committed = [(tuple(t), float(a)) for t, a in committed]
    committed_set = {t for t, _ in committed}

    def node_weight(prefix):
        mass = sum(p for leaf, p in orig.items() if leaf[: len(prefix)] == prefix)
        removed = sum(orig[t] for t, _ in committed if t[: len(prefix)] == prefix)
        bonus = sum(a for t, a in committed if t[: len(prefix)] == prefix)
        return (mass - removed) * math.exp(sigma * bonus)

    out = {}

    def walk(prefix, prob):
        if len(prefix) == model.depth:
            if prefix not in committed_set:
                out[prefix] = prob
            return
        weights = {t: node_weight(prefix + (t,)) for t in model.conds[prefix]}
        total = sum(weights.values())
        for tok, w in weights.items():
            if w > 0.0:
                walk(prefix + (tok,), prob * w / total)

    walk((), 1.0)
    total = sum(out.values())
    return {k: v / total for k, v in out.items()}


def held_karp(instance) -> float:
    """Exact shortest closed tour by bitmask DP over node subsets; N <= 16."""
    n = instance.n
    if n > 16:
        raise ValueError("exact DP limited to 16 nodes")
    pts = [(float(x), float(y)) for x, y in instance.coords]
    d = [[math.hypot(a[0] - b[0], a[1] - b[1]) for b in pts] for a in pts]
    m = n - 1  # nodes 1..n-1 tracked in the mask
    full = 1 << m
    inf = math.inf
    dp = [[inf] * m for _ in range(full)]
    for j in range(m):
        dp[1 << j][j] = d[0][j + 1]
    for mask in range(full):
        row = dp[mask]
        for j in range(m):
            base = row[j]
            if base == inf or not mask & (1 << j):
                continue
            dj = d[j + 1]
            for l in range(m):
                if mask & (1 << l):
                    continue
                nxt = mask | (1 << l)
                cost = base + dj[l + 1]
                if cost < dp[nxt][l]:
                    dp[nxt][l] = cost
    return min(dp[full - 1][j] + d[j + 1][0] for j in range(m))


def tsp_brute_force(instance) -> float:
    """Optimal tour length by full permutation search; tiny N only."""
    n = instance.n
    if n > 9:
        raise ValueError("factorial search limited to 9 nodes")
    pts = [(float(x), float(y)) for x, y in instance.coords]

    def length(order):
        tour = (0,) + order + (0,)
        return sum(
            math.hypot(pts[a][0] - pts[b][0], pts[a][1] - pts[b][1])
            for a, b in zip(tour, tour[1:])
        )

    return min(length(order) for order in permutations(range(1, n)))


def jssp_makespan_reference(instance, sequence) -> int:
    """Makespan by worklist scheduling over explicit machine queues.

    Derives each machine's processing order from the job sequence, then
    repeatedly starts every operation whose job predecessor is finished and
    which is at the front of its machine queue. Exact integer arithmetic.
    """
    jobs, machines = instance.jobs, instance.machines
    next_op = [0] * jobs
    queues = [[] for _ in range(machines)]
    for tok in sequence:
        op = next_op[tok]
        queues[instance.machine_of[tok][op]].append((tok, op))
        next_op[tok] += 1
    if next_op != [machines] * jobs:
        raise ValueError("sequence does not schedule every operation exactly once")

    end = {}
    heads = [0] * machines
    machine_free = [0] * machines
    remaining = jobs * machines
    while remaining:
        progressed = False
        for m in range(machines):
            while heads[m] < len(queues[m]):
                job, op = queues[m][heads[m]]
                job_ready = end.get((job, op - 1), 0) if op > 0 else 0
                if op > 0 and (job, op - 1) not in end:
                    break
                start = max(job_ready, machine_free[m])
                end[(job, op)] = start + instance.proc_time[job][op]
                machine_free[m] = end[(job, op)]
                heads[m] += 1
                remaining -= 1
                progressed = True
        if not progressed:
            raise RuntimeError("scheduling deadlock; sequence order should prevent this")
    return max(machine_free)
