"""Graphs as uniform-measure (C, F) pairs.

A :class:`LabeledGraph` is a discrete target graph with a binary symmetric
adjacency ``C`` and node features ``F``.  A :class:`RelaxedGraph` is the
continuous counterpart produced by barycentric predictors: ``C`` has entries
in ``[0, 1]``.  Node weights are always uniform (``1/n``) and never stored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    AsymmetricAdjacencyError,
    LabelOutOfRangeError,
    NegativeTauError,
    NonBinaryEntryError,
    NonSquareError,
    ParseError,
    RowCountMismatchError,
    SchemaVersionMismatchError,
    SizeMismatchError,
)

SCHEMA_VERSION = 1
SYMMETRY_TOL = 1e-12
GRAPH_SUFFIX = ".fgwg"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def _check_shapes(C: np.ndarray, F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    C = np.asarray(C, dtype=float)
    F = np.asarray(F, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1] or C.shape[0] < 1:
        raise NonSquareError(f"adjacency must be a non-empty square matrix, got shape {C.shape}")
    if F.ndim == 1:
        F = F.reshape(-1, 1)
    if F.ndim != 2 or F.shape[0] != C.shape[0]:
        raise RowCountMismatchError(
            f"feature matrix has {F.shape[0] if F.ndim else 0} rows for {C.shape[0]} nodes"
        )
    if not (np.all(np.isfinite(C)) and np.all(np.isfinite(F))):
        raise NonBinaryEntryError("graph entries must be finite")
    asym = np.max(np.abs(C - C.T))
    if asym > SYMMETRY_TOL:
        raise AsymmetricAdjacencyError(f"adjacency asymmetry {asym:.3e} exceeds {SYMMETRY_TOL}")
    return 0.5 * (C + C.T), F


@dataclass(frozen=True, eq=False)
class Graph:
    """Common read-only view: adjacency ``C`` (n x n) and features ``F`` (n x d)."""

    C: np.ndarray
    F: np.ndarray

    @property
    def n(self) -> int:
        return self.C.shape[0]

    @property
    def d(self) -> int:
        return self.F.shape[1]

    @property
    def h(self) -> np.ndarray:
        return np.full(self.n, 1.0 / self.n)

    def same_as(self, other: "Graph") -> bool:
        return (
            type(self) is type(other)
            and np.array_equal(self.C, other.C)
            and np.array_equal(self.F, other.F)
        )


class LabeledGraph(Graph):
    """Discrete graph: ``C`` symmetric with entries in {0, 1}."""

    def __init__(self, C, F):
        C, F = _check_shapes(C, F)
        if not np.all((C == 0.0) | (C == 1.0)):
            raise NonBinaryEntryError("labeled graph adjacency must be binary")
        object.__setattr__(self, "C", _frozen(C))
        object.__setattr__(self, "F", _frozen(F))

    def __repr__(self) -> str:
        return f"LabeledGraph(n={self.n}, d={self.d}, edges={int(np.triu(self.C, 1).sum())})"


class RelaxedGraph(Graph):
    """Continuous graph: ``C`` symmetric with entries in [0, 1]; ``F`` rows finite."""

    def __init__(self, C, F, clamp: bool = True):
        C, F = _check_shapes(C, F)
        if clamp:
            C = np.clip(C, 0.0, 1.0)
        elif C.min() < 0.0 or C.max() > 1.0:
            raise NonBinaryEntryError("relaxed adjacency entries must lie in [0, 1]")
        object.__setattr__(self, "C", _frozen(C))
        object.__setattr__(self, "F", _frozen(F))

    def __repr__(self) -> str:
        return f"RelaxedGraph(n={self.n}, d={self.d})"


def new_labeled_graph(C, F) -> LabeledGraph:
    return LabeledGraph(C, F)


def as_relaxed(g: Graph) -> RelaxedGraph:
    if isinstance(g, RelaxedGraph):
        return g
    return RelaxedGraph(g.C, g.F)


class Permutation:
    """Bijection on ``{0, ..., n-1}``; node ``i`` is sent to ``perm[i]``."""

    def __init__(self, perm):
        perm = np.asarray(perm)
        if perm.ndim != 1 or not np.array_equal(np.sort(perm), np.arange(perm.size)):
            raise SizeMismatchError("permutation must be a bijection on 0..n-1")
        self.perm = perm.astype(np.int64)
        self.perm.setflags(write=False)

    def __len__(self) -> int:
        return self.perm.size

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(np.arange(n))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "Permutation":
        return cls(rng.permutation(n))

    def inverse(self) -> "Permutation":
        return Permutation(np.argsort(self.perm))

    def matrix(self) -> np.ndarray:
        """0/1 matrix ``P`` with ``P[i, perm[i]] = 1``."""
        P = np.zeros((len(self), len(self)))
        P[np.arange(len(self)), self.perm] = 1.0
        return P


def permute(g: Graph, p: Permutation) -> Graph:
    """Relabel nodes so that ``C'[p(i), p(j)] = C[i, j]`` and ``F'[p(i)] = F[i]``."""
    if len(p) != g.n:
        raise SizeMismatchError(f"permutation over {len(p)} elements for a graph of {g.n} nodes")
    inv = np.argsort(p.perm)
    return type(g)(g.C[np.ix_(inv, inv)], g.F[inv])


def one_hot_features(labels, d: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if labels.size and (labels.min() < 0 or labels.max() >= d):
        raise LabelOutOfRangeError(f"labels must lie in [0, {d})")
    F = np.zeros((labels.size, d))
    F[np.arange(labels.size), labels] = 1.0
    return F


def normalized_laplacian(C) -> np.ndarray:
    """``I - D^{-1/2} C D^{-1/2}``; isolated nodes contribute a zero scaled row/column."""
    C = np.asarray(C, dtype=float)
    deg = C.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    L = np.eye(C.shape[0]) - inv_sqrt[:, None] * C * inv_sqrt[None, :]
    return 0.5 * (L + L.T)


def diffuse_features(C, F, tau: float) -> np.ndarray:
    """Heat-kernel smoothing ``expm(-tau * Lap(C)) @ F`` via eigendecomposition."""
    if tau < 0:
        raise NegativeTauError(f"tau must be nonnegative, got {tau}")
    F = np.asarray(F, dtype=float)
    if tau == 0:
        return F.copy()
    evals, evecs = np.linalg.eigh(normalized_laplacian(C))
    return evecs @ (np.exp(-tau * evals)[:, None] * (evecs.T @ F))


def snap_to_one_hot(F) -> np.ndarray:
    """Map each row to the basis vector of its largest entry (lowest index on ties)."""
    F = np.asarray(F, dtype=float)
    return one_hot_features(np.argmax(F, axis=1), F.shape[1])


def bernoulli_sample(z: Graph, rng, snap_features: bool = False) -> LabeledGraph:
    """Draw each edge ``i < j`` once with probability ``C[i, j]``; no self-loops."""
    rng = np.random.default_rng(rng)
    n = z.n
    iu = np.triu_indices(n, 1)
    draws = rng.random(iu[0].size) < np.clip(z.C[iu], 0.0, 1.0)
    C = np.zeros((n, n))
    C[iu] = draws
    C = C + C.T
    F = snap_to_one_hot(z.F) if snap_features else z.F
    return LabeledGraph(C, F)


# --- serialization ---------------------------------------------------------

def to_document(g: Graph) -> dict:
    return {
        "version": SCHEMA_VERSION,
        "kind": "labeled" if isinstance(g, LabeledGraph) else "relaxed",
        "n": g.n,
        "d": g.d,
        "C": [float(v) for v in g.C.ravel()],
        "F": [float(v) for v in g.F.ravel()],
    }


def from_document(doc) -> Graph:
    if not isinstance(doc, dict):
        raise ParseError("graph document must be a JSON object")
    if doc.get("version") != SCHEMA_VERSION:
        raise SchemaVersionMismatchError(
            f"unsupported graph document version {doc.get('version')!r}"
        )
    try:
        n, d = int(doc["n"]), int(doc["d"])
        C = np.asarray(doc["C"], dtype=float).reshape(n, n)
        F = np.asarray(doc["F"], dtype=float).reshape(n, d)
        kind = doc.get("kind", "labeled")
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed graph document: {exc}") from exc
    if kind == "labeled":
        return LabeledGraph(C, F)
    if kind == "relaxed":
        return RelaxedGraph(C, F, clamp=False)
    raise ParseError(f"unknown graph kind {kind!r}")


def serialize(g: Graph) -> str:
    return json.dumps(to_document(g))


def deserialize(text: str) -> Graph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"graph document is not valid JSON: {exc}") from exc
    return from_document(doc)


def write_graph(path, g: Graph) -> None:
    Path(path).write_text(serialize(g) + "\n")


def read_graph(path) -> Graph:
    return deserialize(Path(path).read_text())
