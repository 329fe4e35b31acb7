"""Augmented search trie: caches policy conditionals per prefix, removes the
mass of sampled sequences so re-sampling is without replacement, and carries
advantage bonuses that reshape the remaining distribution between rounds."""

from __future__ import annotations

import math
from enum import Enum
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .core import (
    NEG_INF,
    Instance,
    SequencePolicy,
    log_diff_exp,
    log_softmax,
    logaddexp,
)
from .estimators import ScoredSample, conditional_expectation

# A node counts as depleted once its sampled mass is within this relative
# log-distance of its original mass; exact exhaustion is not float-detectable.
DEPLETION_LOG_TOL = 1e-12


class UpdateMode(str, Enum):
    NONE = "none"
    GD = "gd"  # one global advantage per sequence, propagated to all ancestors
    THEORY_GD = "theory_gd"  # per-node local advantages from subset estimates


class DepletedTrieError(RuntimeError):
    """Raised when sampling is requested from an exhausted (sub)trie."""


class DuplicateTrajectoryError(RuntimeError):
    """A committed trajectory was already marked sampled (a sampler bug)."""


class CommittedSequence(NamedTuple):
    """A complete sequence handed to commit_round after a sampling round."""

    tokens: tuple
    logprob: float  # total log-prob under the trie policy the round sampled from
    score: float  # perturbed log-probability (orders subset estimates)
    objective: float


class TrieNode:
    __slots__ = (
        "token",
        "children",
        "cond_tokens",
        "cond_logps",
        "cond_index",
        "log_orig_mass",
        "log_sampled_mass",
        "bonus",
        "depleted",
        "adj_cache",
        "trunc_cache",
    )

    def __init__(self, token, log_orig_mass: float):
        self.token = token
        self.children: dict = {}
        self.cond_tokens: list | None = None  # set on first expansion
        self.cond_logps: list | None = None
        self.cond_index: dict | None = None
        self.log_orig_mass = log_orig_mass
        self.log_sampled_mass = NEG_INF
        self.bonus = 0.0
        self.depleted = False
        self.adj_cache = None  # (tokens, log-weights); valid until a commit below
        self.trunc_cache: dict = {}  # nucleus p -> (tokens, renormalized log-probs)

    @property
    def expanded(self) -> bool:
        return self.cond_tokens is not None

    def remaining_log_mass(self) -> float:
        """log of the un-sampled original mass beneath this node; -inf when depleted."""
        if self.depleted:
            return NEG_INF
        return log_diff_exp(self.log_orig_mass, self.log_sampled_mass)

    def _mass_exhausted(self) -> bool:
        return self.log_sampled_mass >= self.log_orig_mass - DEPLETION_LOG_TOL

    def _invalidate(self) -> None:
        self.adj_cache = None
        if self.trunc_cache:
            self.trunc_cache.clear()


class SamplingTrie:
    """One trie per (instance, sampling run); single-writer.

    Original-measure masses are frozen at first expansion; commits only ever
    add to sampled mass and bonuses, so removal stays measured in the
    original model.
    """

    def __init__(self, instance: Instance, policy: SequencePolicy):
        self.instance = instance
        self.policy = policy
        self.root = TrieNode(None, 0.0)
        self.policy_calls = 0  # instrumentation: actual policy queries

    # -- structure ---------------------------------------------------------

    def node(self, prefix: Sequence[int]) -> TrieNode:
        """Walk to the node for a prefix, materializing children on the way.

        Materializing a child requires its parent to be expanded, because the
        child's original mass is parent mass plus the conditional log-prob.
        """
        node = self.root
        for depth, tok in enumerate(prefix):
            child = node.children.get(tok)
            if child is None:
                self.ensure_expanded(node, prefix[:depth])
                child = self.child_of(node, tok)
            node = child
        return node

    def child_of(self, node: TrieNode, token) -> TrieNode:
        """Fetch or materialize one child of an expanded node."""
        child = node.children.get(token)
        if child is None:
            if token not in node.cond_index:
                raise KeyError(f"token {token} infeasible at this node")
            child = TrieNode(token, node.log_orig_mass + node.cond_logps[node.cond_index[token]])
            node.children[token] = child
        return child

    def ensure_expanded(self, node: TrieNode, prefix: Sequence[int]) -> list:
        """Cache the policy conditionals at a node; the policy is queried at
        most once per node, ever."""
        if node.cond_tokens is None:
            pairs = self.policy.conditional_logits(self.instance, tuple(prefix))
            self.policy_calls += 1
            if not pairs:
                raise ValueError(f"policy returned empty feasible set at prefix {tuple(prefix)}")
            node.cond_tokens = [t for t, _ in pairs]
            logits = [l for _, l in pairs]
            m = max(logits)
            ls = m + math.log(sum(math.exp(l - m) for l in logits))
            node.cond_logps = [l - ls for l in logits]
            node.cond_index = {t: i for i, t in enumerate(node.cond_tokens)}
        return list(zip(node.cond_tokens, node.cond_logps))

    # -- current trie policy -----------------------------------------------

    def _adjusted_arrays(self, node: TrieNode):
        """(tokens, log-weights) over non-depleted children.

        A child's weight is its remaining original mass scaled by exp(bonus);
        never-sampled children reduce to their full original mass.
        """
        cached = node.adj_cache
        if cached is not None:
            return cached
        if node.cond_tokens is None:
            raise ValueError("node must be expanded before weighting its children")
        if node.depleted:
            raise DepletedTrieError("adjusted weights requested at a depleted node")
        toks: list = []
        logw: list = []
        base = node.log_orig_mass
        children = node.children
        for i, tok in enumerate(node.cond_tokens):
            child = children.get(tok)
            if child is None:
                toks.append(tok)
                logw.append(base + node.cond_logps[i])
            elif not child.depleted:
                toks.append(tok)
                logw.append(child.remaining_log_mass() + child.bonus)
        if not toks:
            raise DepletedTrieError("all children depleted; node should have been marked")
        node.adj_cache = (toks, logw)
        return node.adj_cache

    def adjusted_child_weights(self, node: TrieNode) -> list:
        toks, logw = self._adjusted_arrays(node)
        return list(zip(toks, logw))

    # -- committing a round --------------------------------------------------

    def commit_round(
        self,
        sampled: Sequence[CommittedSequence],
        mu: float,
        sigma: float,
        mode: UpdateMode,
    ) -> None:
        """Mark a round's sequences as sampled and apply the advantage update.

        Every sequence's original-measure total probability is removed from
        all nodes on its path. In GD mode each path node additionally gains
        sigma * (objective - mu); in theory mode each covered node gains a
        local advantage estimated from the sequences sharing its prefix.
        Depletion flags are refreshed bottom-up afterwards.
        """
        mode = UpdateMode(mode)
        T = self.instance.num_steps
        seen: set = set()
        paths: list = []
        for seq in sampled:
            tokens = tuple(seq.tokens)
            if len(tokens) != T:
                raise ValueError(f"cannot commit incomplete trajectory of length {len(tokens)}")
            if tokens in seen:
                raise DuplicateTrajectoryError(f"duplicate within round: {tokens}")
            seen.add(tokens)
            path = [self.root]
            for d in range(T):
                path.append(self.node(tokens[: d + 1]))
            if path[-1].log_sampled_mass != NEG_INF:
                raise DuplicateTrajectoryError(f"already sampled: {tokens}")
            paths.append(path)

        for seq, path in zip(sampled, paths):
            orig_lp = path[-1].log_orig_mass  # leaf mass == product of original conditionals
            for node in path:
                node.log_sampled_mass = logaddexp(node.log_sampled_mass, orig_lp)
                node._invalidate()
            if mode is UpdateMode.GD and sigma != 0.0:
                adv = seq.objective - mu
                for node in path[1:]:
                    node.bonus += sigma * adv

        if mode is UpdateMode.THEORY_GD and sigma != 0.0:
            self._apply_local_advantages(sampled, sigma)

        for path in paths:
            self._refresh_depletion(path)

    def _apply_local_advantages(self, sampled: Sequence[CommittedSequence], sigma: float) -> None:
        ordered = sorted(sampled, key=lambda s: (-s.score, s.tokens))
        subsets: dict = {(): list(ordered)}
        for seq in ordered:
            for d in range(1, len(seq.tokens) + 1):
                subsets.setdefault(seq.tokens[:d], []).append(seq)
        estimates = {
            prefix: conditional_expectation(
                [ScoredSample(s.logprob, s.score, s.objective) for s in subset]
            )
            for prefix, subset in subsets.items()
        }
        for prefix, subset in subsets.items():
            if not prefix:
                continue
            # A single covering sequence gives no usable estimate; stay neutral.
            if len(subset) < 2:
                continue
            advantage = estimates[prefix] - estimates[prefix[:-1]]
            self.node(prefix).bonus += sigma * advantage

    def _refresh_depletion(self, path: list) -> None:
        for node in reversed(path):
            if node._mass_exhausted():
                node.depleted = True
            elif node.expanded and node.children:
                kids = [node.children.get(t) for t in node.cond_tokens]
                node.depleted = all(k is not None and k.depleted for k in kids)

    # -- oracle-scale helpers ------------------------------------------------

    def remaining_log_mass(self, node: TrieNode) -> float:
        return node.remaining_log_mass()

    def exact_leaf_distribution(self, max_leaves: int = 100_000) -> dict:
        """Fully expand and return the current trie-policy distribution over
        un-sampled complete trajectories. Enumerable instances only."""
        T = self.instance.num_steps
        if self._count_leaves((), 0, max_leaves) > max_leaves:
            raise ValueError(f"instance has more than {max_leaves} complete trajectories")
        out: dict = {}
        if self.root.depleted:
            return out

        def descend(prefix: tuple, node: TrieNode, logp: float) -> None:
            if len(prefix) == T:
                out[prefix] = math.exp(logp)
                return
            self.ensure_expanded(node, prefix)
            toks, logw = self._adjusted_arrays(node)
            cond = log_softmax(np.asarray(logw))
            for tok, lp in zip(toks, cond):
                descend(prefix + (tok,), self.node(prefix + (tok,)), logp + lp)

        descend((), self.root, 0.0)
        total = sum(out.values())
        return {k: v / total for k, v in out.items()}

    def _count_leaves(self, prefix: tuple, count: int, limit: int) -> int:
        if len(prefix) == self.instance.num_steps:
            return count + 1
        for tok in self.instance.feasible_tokens(prefix):
            count = self._count_leaves(prefix + (tok,), count, limit)
            if count > limit:
                return count
        return count

    def iter_nodes(self) -> Iterator[TrieNode]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(node.children.values())

    def dump(self) -> str:
        """Indented text tree with (token, remaining mass, bonus, depleted) per node."""
        lines: list = []

        def walk(node: TrieNode, depth: int) -> None:
            label = "root" if node.token is None else str(node.token)
            rem = math.exp(node.remaining_log_mass())
            flag = " depleted" if node.depleted else ""
            lines.append(f"{'  ' * depth}{label} R={rem:.6g} B={node.bonus:.6g}{flag}")
            for tok in sorted(node.children):
                walk(node.children[tok], depth + 1)

        walk(self.root, 0)
        return "\n".join(lines)
