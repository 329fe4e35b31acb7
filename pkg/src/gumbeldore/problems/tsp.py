"""Euclidean TSP on the unit square with a fixed start node.

Tokens are node indices; a trajectory is the visiting order of the N-1
non-start nodes and the objective is the negative closed-tour length.
"""

from __future__ import annotations

import numpy as np


class TspInstance:
    kind = "tsp"
    start_node = 0

    def __init__(self, coords):
        coords = np.asarray(coords, dtype=float)
        if coords.ndim != 2 or coords.shape[1] != 2 or coords.shape[0] < 3:
            raise ValueError("TSP instance needs an (N, 2) array with N >= 3")
        self.coords = coords
        self.n = coords.shape[0]
        diff = coords[:, None, :] - coords[None, :, :]
        self.dist = np.sqrt((diff**2).sum(axis=2))

    @property
    def num_steps(self) -> int:
        return self.n - 1

    def feasible_tokens(self, prefix) -> list:
        seen = set(prefix)
        seen.add(self.start_node)
        return [i for i in range(self.n) if i not in seen]

    def objective(self, tokens) -> float:
        tokens = tuple(tokens)
        if sorted(tokens) != list(range(1, self.n)):
            raise ValueError("tour must visit every non-start node exactly once")
        order = (self.start_node,) + tokens
        length = self.dist[order[-1], self.start_node]
        for a, b in zip(order, order[1:]):
            length += self.dist[a, b]
        return -float(length)


def gen_tsp(n: int, rng: np.random.Generator) -> TspInstance:
    """Random instance: n i.i.d. uniform points in the unit square."""
    if n < 3:
        raise ValueError("TSP needs at least 3 nodes")
    return TspInstance(rng.random((n, 2)))


def feature_matrix(instance: TspInstance, prefix):
    """Per-candidate features for every feasible next node.

    Columns: distance from the current node, distance back to the start,
    delta-x, delta-y, normalized nearest-distance rank among the remaining
    candidates, and the fraction of nodes still unvisited.
    """
    remaining = instance.feasible_tokens(prefix)
    current = prefix[-1] if prefix else instance.start_node
    rem = np.asarray(remaining, dtype=np.intp)
    n = len(remaining)
    out = np.empty((n, 6))
    d_cur = instance.dist[current].take(rem)
    out[:, 0] = d_cur
    out[:, 1] = instance.dist[instance.start_node].take(rem)
    cur_xy = instance.coords[current]
    cand_xy = instance.coords.take(rem, axis=0)
    out[:, 2] = cand_xy[:, 0] - cur_xy[0]
    out[:, 3] = cand_xy[:, 1] - cur_xy[1]
    order = np.lexsort((rem, d_cur))
    ranks = np.empty(n)
    ranks[order] = np.arange(n)
    out[:, 4] = ranks / (n - 1 if n > 1 else 1)
    out[:, 5] = n / instance.n
    return remaining, out


def tsp_features(instance: TspInstance, prefix, candidate: int) -> np.ndarray:
    tokens, matrix = feature_matrix(instance, prefix)
    return matrix[tokens.index(candidate)]
