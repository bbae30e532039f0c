"""Evaluation drivers shared by the CLI: Top-k decoding, interpolation curves,
weight-truncation sweeps and KRR hyperparameter selection."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientTrainingDataError
from .fgw import FgwProblem, solve_fgw
from .graph import Graph
from .krr import Kernel, fgw_matrix, fit, rank_by_scores, truncate_weights, weights_at
from .neural import NeuralModel


def model_weights(model, x) -> np.ndarray:
    if isinstance(model, NeuralModel):
        return model.alpha(x)
    return weights_at(model, x)


def model_templates(model) -> list:
    if isinstance(model, NeuralModel):
        return list(model.templates())
    return model.graphs


def truth_position(ranking: list[int], candidates, truth: Graph) -> int | None:
    """Rank (0-based) of the first candidate identical to ``truth``."""
    for pos, idx in enumerate(ranking):
        if candidates[idx].same_as(truth):
            return pos
    return None


@dataclass
class EvalReport:
    topk: dict = field(default_factory=dict)
    n_test: int = 0
    mean_fgw_to_truth: float | None = None
    curve: list = field(default_factory=list)
    runtime_s: float = 0.0

    def rows(self) -> list[tuple]:
        return [(k, acc) for k, acc in sorted(self.topk.items())]


def topk_from_positions(positions, ks) -> dict:
    n = len(positions)
    return {
        k: (sum(1 for p in positions if p is not None and p < k) / n if n else 0.0)
        for k in ks
    }


def rank_candidates(alpha, candidates, templates, beta, top_k=None, solver_opts=None,
                    distances=None):
    """Ranking of ``candidates`` by ``sum_j alpha_j FGW(y, z_j)`` (truncated weights)."""
    if top_k is not None:
        alpha = truncate_weights(alpha, min(top_k, len(alpha)))
    kept = np.flatnonzero(alpha)
    if distances is None:
        D = fgw_matrix(candidates, [templates[j] for j in kept], beta, **(solver_opts or {}))
    else:
        D = np.asarray(distances)[:, kept]
    return rank_by_scores(D @ alpha[kept])


def eval_topk(model, X, truths, candidates, ks=(1, 10, 20), top_k=5, beta=0.5,
              solver_opts=None) -> EvalReport:
    """Fraction of test inputs whose true graph is among the ``k`` best-scored candidates."""
    t0 = time.perf_counter()
    templates = model_templates(model)
    positions = []
    for x, truth, cands in zip(X, truths, candidates):
        ranking = rank_candidates(model_weights(model, x), cands, templates, beta, top_k,
                                  solver_opts)
        positions.append(truth_position(ranking, cands, truth))
    report = EvalReport(topk_from_positions(positions, ks), len(positions))
    report.runtime_s = time.perf_counter() - t0
    return report


def eval_weights_sweep(model, X, truths, candidates, keeps=(1, 5, 10, 20), ks=(1, 10, 20),
                       beta=0.5, solver_opts=None) -> dict:
    """Top-k accuracies for each number of kept weights; returns ``{keep: {k: acc}}``."""
    templates = model_templates(model)
    N = len(templates)
    keeps = [min(k, N) for k in keeps]
    positions = {k: [] for k in keeps}
    for x, truth, cands in zip(X, truths, candidates):
        alpha = model_weights(model, x)
        order = np.argsort(-alpha, kind="stable")[: max(keeps)]
        D = np.zeros((len(cands), N))
        D[:, order] = fgw_matrix(cands, [templates[j] for j in order], beta, **(solver_opts or {}))
        for keep in keeps:
            ranking = rank_candidates(alpha, cands, templates, beta, keep, distances=D)
            positions[keep].append(truth_position(ranking, cands, truth))
    return {keep: topk_from_positions(positions[keep], ks) for keep in keeps}


def interpolation_points(model, X, truths, top_k=10, beta=0.5, n=None,
                         barycenter_opts=None, solver_opts=None) -> list[tuple[float, float]]:
    """Per test point: ``(d0, d_pred)``.

    ``d0`` is the FGW between the truth and the template (training graph for
    KRR) with the largest weight; ``d_pred`` is the FGW between the truth and
    the barycenter of the ``top_k`` heaviest templates.  The barycenter size
    defaults to the size of the heaviest template.
    """
    from .barycenter import solve_barycenter

    solver_opts = solver_opts or {}
    templates = model_templates(model)
    points = []
    for x, truth in zip(X, truths):
        alpha = model_weights(model, x)
        closest = templates[int(np.argmax(alpha))]
        d0 = solve_fgw(FgwProblem(closest, truth, beta), **solver_opts).value
        w = truncate_weights(alpha, min(top_k, len(alpha)))
        size = n or closest.n
        pred = solve_barycenter(templates, w, size, beta, **(barycenter_opts or {})).graph
        d_pred = solve_fgw(FgwProblem(pred, truth, beta), **solver_opts).value
        points.append((d0, d_pred))
    return points


def interpolation_curve(points, d_min_grid) -> list[tuple[float, int, float, float]]:
    """Rows ``(d_min, count, mean_d0, mean_d_pred)`` over points with ``d0 > d_min``.

    Thresholds that leave no point are skipped.
    """
    rows = []
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    for d_min in d_min_grid:
        sel = pts[pts[:, 0] > d_min]
        if sel.size == 0:
            continue
        rows.append((float(d_min), int(sel.shape[0]), float(sel[:, 0].mean()),
                     float(sel[:, 1].mean())))
    return rows


def validation_split(N: int, seed) -> tuple[np.ndarray, np.ndarray]:
    if N < 2:
        raise InsufficientTrainingDataError("need at least two samples for a validation split")
    perm = np.random.default_rng(seed).permutation(N)
    n_val = max(1, N // 5)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


@dataclass
class KrrSelection:
    lam: float
    gamma: float
    top1: float
    table: list  # (gamma, lambda, top1) in grid order


def select_krr(X, graphs, kernel_kind="gaussian", lambda_grid=None, gamma_grid=None, beta=0.5,
               top_k=5, seed=0, candidates=None, solver_opts=None) -> KrrSelection:
    """Grid search on a 1/5 validation split by Top-1 accuracy.

    Validation candidates are the given per-input candidate sets, or else the
    set of all validation targets.  Ties keep the first grid point (gamma
    outer loop, lambda inner loop, both in the given order).
    """
    lambda_grid = list(lambda_grid if lambda_grid is not None else np.logspace(-6, 2, 9))
    gamma_grid = list(gamma_grid if gamma_grid is not None else np.logspace(-3, 2, 6))
    if kernel_kind != "gaussian":
        gamma_grid = [1.0]
    X = np.asarray(X, dtype=float).reshape(len(graphs), -1)
    tr, va = validation_split(len(graphs), seed)
    train_graphs = [graphs[i] for i in tr]
    solver_opts = solver_opts or {}
    if candidates is None:
        cand_sets = [[graphs[i] for i in va]] * len(va)
        shared = fgw_matrix(cand_sets[0], train_graphs, beta, **solver_opts)
        dists = [shared] * len(va)
    else:
        cand_sets = [candidates[i] for i in va]
        dists = [fgw_matrix(c, train_graphs, beta, **solver_opts) for c in cand_sets]

    table = []
    best = None
    for gamma in gamma_grid:
        for lam in lambda_grid:
            model = fit(X[tr], train_graphs, Kernel(kernel_kind, gamma), lam)
            positions = []
            for v, cands, D in zip(va, cand_sets, dists):
                ranking = rank_candidates(weights_at(model, X[v]), cands, train_graphs, beta,
                                          top_k, distances=D)
                positions.append(truth_position(ranking, cands, graphs[v]))
            top1 = topk_from_positions(positions, [1])[1]
            table.append((float(gamma), float(lam), top1))
            if best is None or top1 > best[2]:
                best = (float(gamma), float(lam), top1)
    return KrrSelection(best[1], best[0], best[2], table)
