"""Nonparametric barycentric predictor with kernel ridge weights.

The templates are the training graphs and the weights are the kernel ridge
coefficients ``alpha(x) = (K + lam I)^{-1} k_x``.  Prediction solves a
barycenter over the templates with the (truncated, clamped, renormalized)
weights; decoding scores a finite candidate set with the raw weights.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .barycenter import BarycenterResult, solve_barycenter
from .errors import (
    DimMismatchError,
    ParseError,
    EmptyCandidateSetError,
    InsufficientTrainingDataError,
    NotPositiveDefiniteError,
)
from .fgw import FgwProblem, solve_fgw
from .graph import Graph, from_document, to_document

PSD_TOL = 1e-8
MODEL_VERSION = 1


@dataclass(frozen=True)
class Kernel:
    kind: str = "gaussian"
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "linear", "precomputed"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "gaussian" and not self.gamma > 0:
            raise ValueError("gaussian kernel needs gamma > 0")

    def __call__(self, X, Y) -> np.ndarray:
        X = _as_inputs(X)
        Y = _as_inputs(Y)
        if X.shape[1] != Y.shape[1]:
            raise DimMismatchError(f"input dimensions differ: {X.shape[1]} vs {Y.shape[1]}")
        if self.kind == "linear":
            return X @ Y.T
        if self.kind == "gaussian":
            sq = (X * X).sum(1)[:, None] + (Y * Y).sum(1)[None, :] - 2.0 * X @ Y.T
            return np.exp(-self.gamma * np.maximum(sq, 0.0))
        raise ValueError("a precomputed kernel cannot be evaluated on raw inputs")


def _as_inputs(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X.reshape(-1, 1)
    return X


def gram_matrix(kernel: Kernel, X) -> np.ndarray:
    if kernel.kind == "precomputed":
        K = np.asarray(X, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise DimMismatchError("a precomputed Gram matrix must be square")
        if np.max(np.abs(K - K.T)) > PSD_TOL * max(1.0, np.abs(K).max()):
            raise NotPositiveDefiniteError("precomputed Gram matrix is not symmetric")
        if np.linalg.eigvalsh(0.5 * (K + K.T)).min() < -PSD_TOL:
            raise NotPositiveDefiniteError("precomputed Gram matrix is not PSD")
        return 0.5 * (K + K.T)
    K = kernel(X, X)
    return 0.5 * (K + K.T)


@dataclass
class KrrModel:
    K: np.ndarray
    lam: float
    kernel: Kernel = field(default_factory=Kernel)
    inputs: np.ndarray | None = None
    graphs: list = field(default_factory=list)
    _factor: tuple = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return self.K.shape[0]

    def solve(self, rhs) -> np.ndarray:
        return cho_solve(self._factor, rhs)


def fit_krr(K, lam: float, inputs=None, graphs=(), kernel: Kernel | None = None) -> KrrModel:
    """Factor ``K + lam I`` once; ``inputs``/``graphs`` are kept for prediction."""
    if not lam > 0:
        raise ValueError(f"ridge parameter must be positive, got {lam}")
    K = np.asarray(K, dtype=float)
    graphs = list(graphs)
    if graphs and len(graphs) != K.shape[0]:
        raise DimMismatchError(f"{len(graphs)} graphs for a {K.shape[0]}x{K.shape[0]} Gram matrix")
    try:
        factor = cho_factor(K + lam * np.eye(K.shape[0]), lower=True)
    except LinAlgError as exc:
        raise NotPositiveDefiniteError(f"K + lam*I is not positive definite: {exc}") from exc
    return KrrModel(K, float(lam), kernel or Kernel(), None if inputs is None else _as_inputs(inputs),
                    graphs, factor)


def fit(X, graphs, kernel: Kernel, lam: float) -> KrrModel:
    graphs = list(graphs)
    X = _as_inputs(X)
    if X.shape[0] != len(graphs):
        raise DimMismatchError(f"{X.shape[0]} inputs for {len(graphs)} graphs")
    if not graphs:
        raise InsufficientTrainingDataError("cannot fit on an empty training set")
    return fit_krr(gram_matrix(kernel, X), lam, X, graphs, kernel)


def weights_at(model: KrrModel, x=None, kx=None) -> np.ndarray:
    """Raw ridge coefficients at one input; pass ``kx`` for precomputed kernels."""
    if kx is None:
        kx = model.kernel(model.inputs, _as_inputs(x).reshape(1, -1)).ravel()
    return model.solve(np.asarray(kx, dtype=float))


def truncate_weights(alpha, top_k: int) -> np.ndarray:
    """Keep the ``top_k`` largest entries (lowest index first on ties), zero the rest."""
    alpha = np.asarray(alpha, dtype=float)
    if not 1 <= top_k <= alpha.size:
        raise ValueError(f"top_k must lie in [1, {alpha.size}], got {top_k}")
    keep = np.argsort(-alpha, kind="stable")[:top_k]
    out = np.zeros_like(alpha)
    out[keep] = alpha[keep]
    return out


def predict_result(model: KrrModel, x=None, n: int = 40, beta: float = 0.5, top_k: int | None = None,
                   kx=None, **barycenter_opts) -> BarycenterResult:
    alpha = weights_at(model, x, kx)
    if top_k is not None:
        alpha = truncate_weights(alpha, top_k)
    return solve_barycenter(model.graphs, alpha, n, beta, **barycenter_opts)


def predict(model: KrrModel, x=None, n: int = 40, beta: float = 0.5, top_k: int | None = None,
            kx=None, **barycenter_opts):
    """Relaxed graph of size ``n``: the FGW barycenter of the training graphs."""
    return predict_result(model, x, n, beta, top_k, kx, **barycenter_opts).graph


def fgw_matrix(rows, cols, beta: float = 0.5, **solver_opts) -> np.ndarray:
    """``D[i, j] = FGW(rows[i], cols[j])``."""
    D = np.empty((len(rows), len(cols)))
    for i, a in enumerate(rows):
        for j, b in enumerate(cols):
            D[i, j] = solve_fgw(FgwProblem(a, b, beta), **solver_opts).value
    return D


def rank_by_scores(scores) -> list[int]:
    """Ascending order, lowest index first on ties."""
    return [int(i) for i in np.argsort(np.asarray(scores), kind="stable")]


def candidate_scores(alpha, candidates, templates, beta: float = 0.5, distances=None,
                     **solver_opts) -> np.ndarray:
    """``score(y) = sum_j alpha_j FGW(y, z_j)`` over the nonzero weights.

    ``distances`` may hold a precomputed ``len(candidates) x len(templates)``
    FGW matrix, in which case no solver is run.
    """
    alpha = np.asarray(alpha, dtype=float)
    if len(candidates) == 0:
        raise EmptyCandidateSetError("candidate set is empty")
    kept = np.flatnonzero(alpha)
    if distances is None:
        D = fgw_matrix(candidates, [templates[j] for j in kept], beta, **solver_opts)
    else:
        D = np.asarray(distances, dtype=float)[:, kept]
    return D @ alpha[kept]


def decode_candidates(model: KrrModel, x, candidates, top_k: int | None = None, beta: float = 0.5,
                      kx=None, distances=None, **solver_opts) -> list[tuple[int, Graph, float]]:
    """Rank candidates by their weighted FGW to the training graphs.

    Returns ``(index, candidate, score)`` triples, best (lowest score) first.
    """
    alpha = weights_at(model, x, kx)
    if top_k is not None:
        alpha = truncate_weights(alpha, top_k)
    scores = candidate_scores(alpha, candidates, model.graphs, beta, distances, **solver_opts)
    return [(i, candidates[i], float(scores[i])) for i in rank_by_scores(scores)]


def save_model(path, model: KrrModel, **meta) -> None:
    """Write the kernel, ridge parameter, training inputs and graphs as JSON.

    Extra keyword arguments (e.g. the selected ``gamma`` grid scores) are
    stored under ``meta``.  Precomputed-kernel models cannot be saved.
    """
    if model.kernel.kind == "precomputed" or model.inputs is None:
        raise ValueError("only models fitted on explicit inputs can be saved")
    doc = {
        "version": MODEL_VERSION,
        "kind": "krr",
        "kernel": {"kind": model.kernel.kind, "gamma": model.kernel.gamma},
        "lambda": model.lam,
        "inputs": model.inputs.tolist(),
        "graphs": [to_document(g) for g in model.graphs],
        "meta": meta,
    }
    Path(path).write_text(json.dumps(doc))


def load_model(path) -> tuple[KrrModel, dict]:
    """Inverse of :func:`save_model`; refits the Cholesky factor."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not a model file: {exc}") from exc
    if doc.get("kind") != "krr" or doc.get("version") != MODEL_VERSION:
        raise ParseError(f"{path}: not a version-{MODEL_VERSION} KRR model")
    kernel = Kernel(doc["kernel"]["kind"], doc["kernel"]["gamma"])
    graphs = [from_document(g) for g in doc["graphs"]]
    return fit(np.asarray(doc["inputs"], dtype=float), graphs, kernel, doc["lambda"]), doc["meta"]
