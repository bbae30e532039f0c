import os
import sys
from pathlib import Path

# single-threaded BLAS and numba for reproducible timings
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np  # noqa: E402
import pytest  # noqa: E402

sys.path.insert(0, str(Path(__file__).parent))

from fgwpred.graph import LabeledGraph, RelaxedGraph  # noqa: E402


def random_adjacency(rng, n, p=0.5):
    U = np.triu(rng.random((n, n)) < p, 1).astype(float)
    return U + U.T


def random_labeled(rng, n, d=2, p=0.5):
    labels = rng.integers(d, size=n)
    return LabeledGraph(random_adjacency(rng, n, p), np.eye(d)[labels])


def random_relaxed(rng, n, d=2):
    U = np.triu(rng.random((n, n)))
    return RelaxedGraph(U + np.triu(U, 1).T, rng.random((n, d)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
