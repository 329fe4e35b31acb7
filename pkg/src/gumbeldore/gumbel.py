"""Numerically stable Gumbel utilities for perturbed-score beam search
and the importance-weighted expectation estimators."""

from __future__ import annotations

import math

import numpy as np

from .core import NEG_INF

# Uniform draws are clamped away from 0 before the double log; the upper
# end never reaches 1.0 with numpy's [0, 1) generator.
_U_FLOOR = 1e-300
_LOG_HALF = -math.log(2.0)


def sample_gumbel(location: float, rng: np.random.Generator) -> float:
    """One draw from Gumbel(location) with unit scale: location - log(-log(U))."""
    u = rng.random()
    if u < _U_FLOOR:
        u = _U_FLOOR
    return location - math.log(-math.log(u))


def _conditioned_gumbels(locations, target_max: float, uniforms) -> list:
    """Core transform: unconditioned draws shifted so their max is target_max.

        v_i = target_max - g_i + log(1 - exp(g_i - Z)),  Z = max g_i
        out_i = target_max - max(v_i, 0) - log1p(exp(-|v_i|))

    The argmax coordinate (v = -inf) maps to target_max exactly; the naive
    triple-exp form of the same transform overflows, this one does not.
    Children counts are small, so plain math beats vectorization here.
    """
    g = [
        loc - math.log(-math.log(u if u > _U_FLOOR else _U_FLOOR))
        for loc, u in zip(locations, uniforms)
    ]
    z = max(g)
    out = []
    for gi in g:
        d = gi - z
        if d == 0.0:
            out.append(target_max)
            continue
        log1m = math.log(-math.expm1(d)) if d > _LOG_HALF else math.log1p(-math.exp(d))
        v = target_max - gi + log1m
        if v >= 0.0:
            out.append(target_max - v - math.log1p(math.exp(-v)))
        else:
            out.append(target_max - math.log1p(math.exp(v)))
    return out


def conditioned_scores(locations, target_max: float, rng: np.random.Generator) -> list:
    """Internal fast path: one uniform block per call, list in, list out."""
    return _conditioned_gumbels(locations, target_max, rng.random(len(locations)).tolist())


def gumbels_with_max(locations, target_max: float, rng: np.random.Generator) -> np.ndarray:
    """Sample independent Gumbel(locations[i]) jointly conditioned on their
    maximum equaling target_max; the max of the output is exact."""
    locs = [float(x) for x in np.atleast_1d(np.asarray(locations, dtype=float))]
    if not locs:
        raise ValueError("gumbels_with_max requires at least one location")
    if not (all(map(math.isfinite, locs)) and math.isfinite(target_max)):
        raise ValueError("locations and target_max must be finite")
    return np.asarray(conditioned_scores(locs, target_max, rng))


def exceedance_prob(location: float, threshold: float) -> float:
    """P(G > threshold) for G ~ Gumbel(location): 1 - exp(-exp(location - threshold))."""
    if not (math.isfinite(location) and math.isfinite(threshold)):
        raise ValueError("location and threshold must be finite")
    d = location - threshold
    if d >= 709.0:  # exp would overflow; the probability is 1 anyway
        return 1.0
    return min(1.0, max(0.0, -math.expm1(-math.exp(d))))


def log_exceedance_prob(location: float, threshold: float) -> float:
    """log P(G > threshold), accurate when the probability underflows."""
    d = location - threshold
    if d >= 709.0:
        return 0.0
    x = math.exp(d)
    if x < 1e-200:  # 1 - exp(-x) ~ x
        return d
    q = -math.expm1(-x)
    return math.log(q) if q > 0.0 else NEG_INF
