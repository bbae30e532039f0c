"""Synthetic graph-prediction task: x in [1, 6] -> stochastic block model graph.

For input ``x`` with ``k = floor(x)`` and ``f = x - k``:

* 40 to 45 nodes, split as evenly as possible into ``k`` base blocks
  (remainder to the lowest-index blocks, so block 0 is the largest);
* when ``f > 0`` the second half (floor) of block 0 forms an emerging block;
* edge probabilities: 0.9 inside a block, 0.01 across blocks and
  ``p(x) = 0.889 f + 0.01`` between the two halves of the splitting block;
* node label = block index; emerging-block nodes get the new label ``k``
  with probability ``f`` and label 0 otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import OutOfRangeError
from .graph import LabeledGraph, one_hot_features

X_MIN, X_MAX = 1.0, 6.0
N_MIN, N_MAX = 40, 45
P_INTRA = 0.9
P_INTER = 0.01


def _check_x(x: float) -> float:
    x = float(x)
    if not X_MIN <= x <= X_MAX:
        raise OutOfRangeError(f"input x must lie in [{X_MIN}, {X_MAX}], got {x}")
    return x


def split_probability(x: float) -> float:
    x = _check_x(x)
    return 0.889 * (x - math.floor(x)) + 0.01


@dataclass(frozen=True)
class SbmSpec:
    """Block layout for one input ``x`` and node count ``n``."""

    x: float
    n: int

    @property
    def base_blocks(self) -> int:
        return int(math.floor(self.x))

    @property
    def frac(self) -> float:
        return self.x - self.base_blocks

    def block_sizes(self) -> list[int]:
        k = self.base_blocks
        q, r = divmod(self.n, k)
        return [q + 1 if b < r else q for b in range(k)]

    def assignment(self) -> np.ndarray:
        """Structural block per node; the emerging block (if any) has index ``k``."""
        sizes = self.block_sizes()
        blocks = np.repeat(np.arange(len(sizes)), sizes)
        if self.frac > 0:
            s0 = sizes[0]
            blocks[s0 - s0 // 2: s0] = self.base_blocks
        return blocks

    def probability_matrix(self) -> np.ndarray:
        k = self.base_blocks
        nb = k + 1 if self.frac > 0 else k
        P = np.full((nb, nb), P_INTER)
        np.fill_diagonal(P, P_INTRA)
        if self.frac > 0:
            P[0, k] = P[k, 0] = split_probability(self.x)
        return P


def sample_labels(spec: SbmSpec, rng: np.random.Generator) -> np.ndarray:
    blocks = spec.assignment()
    labels = blocks.copy()
    emerging = np.flatnonzero(blocks == spec.base_blocks)
    if emerging.size:
        keep_new = rng.random(emerging.size) < spec.frac
        labels[emerging[~keep_new]] = 0
    return labels


def sample_graph(x: float, rng=None, one_hot: bool = False) -> LabeledGraph:
    """Draw one SBM graph for input ``x``; labels are 1-D integer features by default."""
    x = _check_x(x)
    rng = np.random.default_rng(rng)
    n = int(rng.integers(N_MIN, N_MAX + 1))
    spec = SbmSpec(x, n)
    blocks = spec.assignment()
    P = spec.probability_matrix()[np.ix_(blocks, blocks)]
    iu = np.triu_indices(n, 1)
    C = np.zeros((n, n))
    C[iu] = rng.random(iu[0].size) < P[iu]
    C = C + C.T
    labels = sample_labels(spec, rng)
    F = one_hot_features(labels, int(X_MAX)) if one_hot else labels.astype(float)[:, None]
    return LabeledGraph(C, F)


def make_dataset(N: int = 50, seed=0, one_hot: bool = False,
                 x_range: tuple[float, float] = (X_MIN, X_MAX)) -> tuple[np.ndarray, list]:
    """``N`` pairs ``(x_i, y_i)`` with ``x_i ~ U[1, 6]``; one derived seed per sample."""
    if N < 1:
        raise ValueError("dataset size must be at least 1")
    ss = np.random.SeedSequence(seed)
    xs_seed, *sample_seeds = ss.spawn(N + 1)
    X = np.random.default_rng(xs_seed).uniform(*x_range, size=N)
    graphs = [sample_graph(x, np.random.default_rng(s), one_hot) for x, s in zip(X, sample_seeds)]
    return X, graphs
