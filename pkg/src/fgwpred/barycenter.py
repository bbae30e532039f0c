"""Weighted FGW barycenters by block-coordinate descent.

Given templates ``z_j = (C_j, F_j)`` and weights ``w_j``, the barycenter of
size ``n`` minimizes ``sum_j w_j FGW(z, z_j)``.  The solver alternates
between refreshing the plans ``pi_j`` (template j -> barycenter, shape
``n_j x n``) and the closed-form updates::

    C = n^2 sum_j w_j pi_j^T C_j pi_j
    F = n   sum_j w_j pi_j^T F_j
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ShapeMismatchError, WeightError
from .fgw import FgwProblem, fgw_objective, solve_fgw
from .graph import Graph, RelaxedGraph
from .ot import TransportPlan, monotone_coupling, product_coupling

STAGNATION_TOL = 1e-12


class TemplateSet(Sequence):
    """Non-empty list of graphs sharing a feature dimension; sizes may differ."""

    def __init__(self, templates):
        templates = list(templates)
        if not templates:
            raise ValueError("a template set needs at least one graph")
        d = templates[0].d
        if any(t.d != d for t in templates):
            raise ShapeMismatchError("templates must share the feature dimension")
        self._templates = templates

    def __getitem__(self, j):
        return self._templates[j]

    def __len__(self) -> int:
        return len(self._templates)

    @property
    def d(self) -> int:
        return self._templates[0].d

    @property
    def sizes(self) -> list[int]:
        return [t.n for t in self._templates]


@dataclass
class BarycenterResult:
    graph: RelaxedGraph
    plans: list  # TransportPlan per template, None where the weight is zero
    objective: float
    iterations: int
    weights: np.ndarray
    objective_trace: np.ndarray = field(repr=False)


def normalize_weights(weights) -> np.ndarray:
    """Drop negative weights and rescale the rest to sum to one."""
    w = np.asarray(weights, dtype=float).ravel()
    if not np.all(np.isfinite(w)):
        raise WeightError("weights must be finite")
    w = np.maximum(w, 0.0)
    total = w.sum()
    if total <= 0.0:
        raise WeightError("at least one weight must be positive")
    return w / total


def _check_update_args(plans, templates, weights, n):
    w = np.asarray(weights, dtype=float)
    if w.size != len(templates) or len(plans) != len(templates):
        raise ShapeMismatchError("plans, templates and weights must have the same length")
    if np.any(w < 0) or w.sum() <= 0:
        raise WeightError("weights must be nonnegative with a positive sum")
    for plan, t, wj in zip(plans, templates, w):
        if wj > 0 and np.shape(_pi(plan)) != (t.n, n):
            raise ShapeMismatchError(
                f"plan shape {np.shape(_pi(plan))} does not couple a {t.n}-node template "
                f"to a {n}-node barycenter"
            )
    return w


def _pi(plan):
    return plan.pi if isinstance(plan, TransportPlan) else plan


def update_structure(plans, templates, weights, n: int) -> np.ndarray:
    w = _check_update_args(plans, templates, weights, n)
    C = np.zeros((n, n))
    for plan, t, wj in zip(plans, templates, w):
        if wj > 0:
            pi = _pi(plan)
            C += wj * (pi.T @ t.C @ pi)
    C *= n * n
    return np.clip(0.5 * (C + C.T), 0.0, 1.0)


def update_features(plans, templates, weights, n: int) -> np.ndarray:
    w = _check_update_args(plans, templates, weights, n)
    F = np.zeros((n, templates[0].d))
    for plan, t, wj in zip(plans, templates, w):
        if wj > 0:
            F += wj * (_pi(plan).T @ t.F)
    return n * F


def weighted_objective(graph: Graph, plans, templates, weights, beta: float) -> float:
    """``sum_j w_j E_j(pi_j)`` with each plan held fixed."""
    total = 0.0
    for plan, t, wj in zip(plans, templates, weights):
        if wj > 0:
            total += wj * fgw_objective(FgwProblem(t, graph, beta), _pi(plan))
    return total


def _initial_graph(templates, w, n, init, rng):
    if isinstance(init, Graph):
        if init.n != n:
            raise ShapeMismatchError(f"initial graph has {init.n} nodes, expected {n}")
        return RelaxedGraph(init.C, init.F), None
    if init == "random":
        C = rng.random((n, n))
        C = np.triu(C) + np.triu(C, 1).T
        mean_row = sum(wj * t.F.mean(axis=0) for t, wj in zip(templates, w) if wj > 0)
        return RelaxedGraph(C, np.tile(mean_row, (n, 1))), None
    if init != "largest":
        raise ValueError(f"unknown init {init!r}")
    j = int(np.argmax(w))
    pi0 = monotone_coupling(templates[j].n, n)
    ws = np.zeros_like(w)
    ws[j] = 1.0
    plans = [pi0 if k == j else None for k in range(len(templates))]
    C = update_structure(plans, templates, ws, n)
    F = update_features(plans, templates, ws, n)
    return RelaxedGraph(C, F), (j, pi0)


def solve_barycenter(templates, weights, n: int, beta: float = 0.5, max_outer: int = 100,
                     tol: float = 1e-7, init="largest", seed=None,
                     fgw_max_iter: int = 500, fgw_tol: float = 1e-9) -> BarycenterResult:
    """Fréchet mean of ``templates`` under the FGW discrepancy.

    ``weights`` are clamped at zero and renormalized.  ``init`` is
    ``"largest"`` (blow-up of the heaviest template to ``n`` nodes),
    ``"random"``, or a graph of size ``n``.  Plans are warm-started from the
    previous outer iteration so the objective trace never increases.
    """
    templates = templates if isinstance(templates, TemplateSet) else TemplateSet(templates)
    if n < 1:
        raise ValueError("barycenter size must be at least 1")
    if max_outer < 1:
        raise ValueError("max_outer must be at least 1")
    w = normalize_weights(weights)
    if w.size != len(templates):
        raise ShapeMismatchError(f"{w.size} weights for {len(templates)} templates")
    rng = np.random.default_rng(seed)
    active = [j for j in range(len(templates)) if w[j] > 0]

    z, blowup = _initial_graph(templates, w, n, init, rng)
    plans = [None] * len(templates)
    for j in active:
        plans[j] = product_coupling(templates[j].n, n)
    if blowup is not None:
        plans[blowup[0]] = blowup[1]

    trace = []
    best = None
    it = 0
    for it in range(1, max_outer + 1):
        new_plans = [None] * len(templates)
        for j in active:
            sol = solve_fgw(FgwProblem(templates[j], z, beta), max_iter=fgw_max_iter,
                            tol=fgw_tol, init=plans[j])
            new_plans[j] = np.array(sol.plan.pi)
        C = update_structure(new_plans, templates, w, n)
        F = update_features(new_plans, templates, w, n)
        z_new = RelaxedGraph(C, F)
        obj = weighted_objective(z_new, new_plans, templates, w, beta)
        if trace and obj > trace[-1] + STAGNATION_TOL:
            it -= 1
            break
        prev = trace[-1] if trace else None
        z, plans = z_new, new_plans
        trace.append(obj)
        best = (z, plans, obj)
        if prev is not None and prev - obj <= tol * abs(prev):
            break

    z, plans, obj = best
    plans = [TransportPlan(p) if p is not None else None for p in plans]
    return BarycenterResult(z, plans, obj, it, w, np.asarray(trace))
