"""Low-dimensional layout of a membership graph by stochastic descent.

Edges attract with probability proportional to their weight (an edge of
weight w fires every max_w / w epochs); non-edges repel via negative
sampling. The output-space membership curve 1 / (1 + a * x^(2b)) is fit
once per (spread, min_dist) pair.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from scipy.optimize import curve_fit

from ..dataio import ReducedEmbedding

INITIAL_ALPHA = 1.0
NEGATIVE_SAMPLE_RATE = 5
REPULSION_STRENGTH = 1.0
GRAD_CLIP = 4.0
INIT_RANGE = 10.0


def fit_output_curve(spread: float = 1.0, min_dist: float = 0.1) -> tuple[float, float]:
    """Fit (a, b) so 1/(1 + a x^(2b)) tracks the piecewise target curve.

    Target is 1 below min_dist, exp(-(x - min_dist)/spread) beyond, sampled
    on 300 points over [0, 3 * spread].
    """
    if spread <= 0 or min_dist < 0:
        raise ValueError("need spread > 0 and min_dist >= 0")

    def curve(x, a, b):
        return 1.0 / (1.0 + a * x ** (2.0 * b))

    xv = np.linspace(0.0, 3.0 * spread, 300)
    yv = np.where(xv < min_dist, 1.0, np.exp(-(xv - min_dist) / spread))
    params, _ = curve_fit(curve, xv, yv)
    return float(params[0]), float(params[1])


def make_epochs_per_sample(weights: np.ndarray, epochs: int) -> np.ndarray:
    """Epoch gap between firings of each edge: max(w) / w."""
    w = np.asarray(weights, dtype=np.float64)
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if w.size == 0 or np.any(w <= 0):
        raise ValueError("edge weights must be positive")
    return w.max() / w


@njit(cache=True)
def _rng_next(state):
    # xorshift64: wraps on uint64 like the hardware would
    x = state[0]
    x ^= x << np.uint64(13)
    x ^= x >> np.uint64(7)
    x ^= x << np.uint64(17)
    state[0] = x
    return x


@njit(cache=True)
def _clip(v):
    if v > GRAD_CLIP:
        return GRAD_CLIP
    if v < -GRAD_CLIP:
        return -GRAD_CLIP
    return v


@njit(cache=True)
def _run_layout(pos, heads, tails, epochs_per_sample, a, b, gamma, neg_rate, epochs, rng_state):
    n = pos.shape[0]
    dim = pos.shape[1]
    n_edges = heads.shape[0]
    epoch_of_next_sample = epochs_per_sample.copy()
    epochs_per_negative = epochs_per_sample / neg_rate
    epoch_of_next_negative = epochs_per_negative.copy()

    for epoch in range(epochs):
        alpha = INITIAL_ALPHA * (1.0 - epoch / epochs)
        for e in range(n_edges):
            if epoch_of_next_sample[e] > epoch:
                continue
            i = heads[e]
            j = tails[e]

            d2 = 0.0
            for c in range(dim):
                diff = pos[i, c] - pos[j, c]
                d2 += diff * diff
            if d2 > 0.0:
                coeff = (-2.0 * a * b * d2 ** (b - 1.0)) / (a * d2**b + 1.0)
            else:
                coeff = 0.0
            for c in range(dim):
                g = _clip(coeff * (pos[i, c] - pos[j, c]))
                pos[i, c] += alpha * g
                pos[j, c] -= alpha * g

            epoch_of_next_sample[e] += epochs_per_sample[e]

            n_neg = int((epoch - epoch_of_next_negative[e]) / epochs_per_negative[e])
            for _ in range(n_neg):
                t = int(_rng_next(rng_state) % np.uint64(n))
                if t == i:
                    continue
                d2 = 0.0
                for c in range(dim):
                    diff = pos[i, c] - pos[t, c]
                    d2 += diff * diff
                if d2 > 0.0:
                    coeff = (2.0 * gamma * b) / ((0.001 + d2) * (a * d2**b + 1.0))
                    for c in range(dim):
                        pos[i, c] += alpha * _clip(coeff * (pos[i, c] - pos[t, c]))
                else:
                    for c in range(dim):
                        pos[i, c] += alpha * GRAD_CLIP
            epoch_of_next_negative[e] += n_neg * epochs_per_negative[e]


def _seed_state(seed: int) -> np.ndarray:
    # splitmix64 scramble so seed 0 still yields a nonzero xorshift state
    mask = (1 << 64) - 1
    z = (int(seed) + 0x9E3779B97F4A7C15) & mask
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
    z ^= z >> 31
    if z == 0:
        z = 0x2545F4914F6CDD1D
    return np.array([z], dtype=np.uint64)


def optimize_layout(
    graph,
    out_dims: int,
    epochs: int,
    seed: int,
    min_dist: float = 0.1,
    spread: float = 1.0,
    negative_sample_rate: int = NEGATIVE_SAMPLE_RATE,
    repulsion_strength: float = REPULSION_STRENGTH,
    ids=None,
) -> ReducedEmbedding:
    """Lay out `graph` in out_dims dimensions; bit-reproducible per seed.

    Positions start uniform in [-10, 10] from a seeded generator; the
    descent itself uses an internal integer RNG so results do not depend
    on platform-specific float RNG behavior. Learning rate anneals
    linearly to zero.
    """
    if out_dims < 1:
        raise ValueError("out_dims must be >= 1")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    a, b = fit_output_curve(spread, min_dist)
    rng = np.random.default_rng(seed)
    pos = rng.uniform(-INIT_RANGE, INIT_RANGE, size=(graph.n, out_dims)).astype(np.float32)
    # each undirected edge runs in both directions so the two endpoints
    # take turns as the negatively-sampled anchor
    heads = np.concatenate([graph.heads, graph.tails]).astype(np.int64)
    tails = np.concatenate([graph.tails, graph.heads]).astype(np.int64)
    weights = np.concatenate([graph.weights, graph.weights])
    order = np.lexsort((tails, heads))
    eps = make_epochs_per_sample(weights[order], epochs)
    _run_layout(
        pos,
        heads[order],
        tails[order],
        eps,
        a,
        b,
        float(repulsion_strength),
        float(negative_sample_rate),
        epochs,
        _seed_state(seed),
    )
    if ids is None:
        ids = tuple(f"row-{i:06d}" for i in range(graph.n))
    return ReducedEmbedding(pos, tuple(ids), seed=seed)
