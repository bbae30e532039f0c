"""Linear optimal transport between uniform marginals.

``solve_exact`` returns a vertex of the transportation polytope and is the
direction oracle of the Frank-Wolfe solvers.  ``solve_sinkhorn`` is the
entropic alternative; it never drives Frank-Wolfe because its plans are not
vertices.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ._simplex import network_simplex
from .errors import DimMismatchError, NonFiniteCostError, ShapeMismatchError

MARGINAL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Coupling with uniform marginals ``1/n1`` (rows) and ``1/n2`` (columns)."""

    pi: np.ndarray

    def __post_init__(self):
        pi = np.array(self.pi, dtype=float)
        if pi.ndim != 2:
            raise ShapeMismatchError("transport plan must be a matrix")
        pi[(pi < 0) & (pi >= -1e-15)] = 0.0
        pi.setflags(write=False)
        object.__setattr__(self, "pi", pi)

    @property
    def shape(self) -> tuple[int, int]:
        return self.pi.shape

    @property
    def a(self) -> np.ndarray:
        return np.full(self.pi.shape[0], 1.0 / self.pi.shape[0])

    @property
    def b(self) -> np.ndarray:
        return np.full(self.pi.shape[1], 1.0 / self.pi.shape[1])

    def marginal_violation(self) -> float:
        return max(
            np.max(np.abs(self.pi.sum(axis=1) - self.a)),
            np.max(np.abs(self.pi.sum(axis=0) - self.b)),
        )

    def is_feasible(self, tol: float = MARGINAL_TOL) -> bool:
        return self.pi.min() >= 0.0 and self.marginal_violation() <= tol


def product_coupling(n1: int, n2: int) -> np.ndarray:
    return np.full((n1, n2), 1.0 / (n1 * n2))


def monotone_coupling(n1: int, n2: int) -> np.ndarray:
    """North-west-corner coupling of the two uniform measures (a blow-up map)."""
    pi = np.zeros((n1, n2))
    # integer masses: rows n2 each, columns n1 each
    s = np.full(n1, n2)
    d = np.full(n2, n1)
    i = j = 0
    while i < n1 and j < n2:
        q = min(s[i], d[j])
        pi[i, j] = q
        s[i] -= q
        d[j] -= q
        if s[i] == 0:
            i += 1
        if j < n2 and d[j] == 0:
            j += 1
    return pi / (n1 * n2)


def feature_cost_matrix(F1, F2) -> np.ndarray:
    """Pairwise squared Euclidean distances between rows of ``F1`` and ``F2``."""
    F1 = np.atleast_2d(np.asarray(F1, dtype=float))
    F2 = np.atleast_2d(np.asarray(F2, dtype=float))
    if F1.shape[1] != F2.shape[1]:
        raise DimMismatchError(f"feature dimensions differ: {F1.shape[1]} vs {F2.shape[1]}")
    diff = F1[:, None, :] - F2[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _check_cost(cost) -> np.ndarray:
    cost = np.ascontiguousarray(cost, dtype=float)
    if cost.ndim != 2 or cost.size == 0:
        raise ShapeMismatchError(f"cost must be a non-empty matrix, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise NonFiniteCostError("cost matrix contains non-finite entries")
    return cost


def _max_pivots(n1: int, n2: int) -> int:
    return 50 * (n1 + n2) * max(n1, n2) + 1000


def exact_plan(cost: np.ndarray) -> np.ndarray:
    """Raw optimal vertex plan as an ndarray (no validation; used in hot loops)."""
    n1, n2 = cost.shape
    x, _, _, _ = network_simplex(cost, _max_pivots(n1, n2))
    return x / float(n1 * n2)


def solve_exact(cost) -> tuple[TransportPlan, float]:
    """Optimal transport between uniform marginals by the transportation simplex.

    Returns a vertex of the transportation polytope (at most ``n1 + n2 - 1``
    nonzeros) and its cost.  The result is deterministic for a given cost.
    """
    cost = _check_cost(cost)
    pi = exact_plan(cost)
    return TransportPlan(pi), float(np.sum(cost * pi))


def dual_potentials(cost) -> tuple[np.ndarray, np.ndarray]:
    """Potentials ``(u, v)`` of the optimal basis: ``u_i + v_j = cost_ij`` on its arcs."""
    cost = _check_cost(cost)
    n1, n2 = cost.shape
    _, u, v, _ = network_simplex(cost, _max_pivots(n1, n2))
    return u, v


def round_to_polytope(pi: np.ndarray) -> np.ndarray:
    """Project an approximate coupling onto exact uniform marginals (Altschuler et al.)."""
    n1, n2 = pi.shape
    a = np.full(n1, 1.0 / n1)
    b = np.full(n2, 1.0 / n2)
    r = pi.sum(axis=1)
    x = np.minimum(1.0, np.divide(a, r, out=np.ones_like(a), where=r > 0))
    pi = x[:, None] * pi
    c = pi.sum(axis=0)
    y = np.minimum(1.0, np.divide(b, c, out=np.ones_like(b), where=c > 0))
    pi = pi * y[None, :]
    err_r = a - pi.sum(axis=1)
    err_c = b - pi.sum(axis=0)
    mass = err_r.sum()
    if mass > 0:
        pi = pi + np.outer(err_r, err_c) / mass
    return pi


def _sinkhorn_scaling(K, max_iter, tol, check_every=10):
    n1, n2 = K.shape
    a = np.full(n1, 1.0 / n1)
    b = np.full(n2, 1.0 / n2)
    u = np.ones(n1)
    v = np.ones(n2)
    for it in range(max_iter):
        u = a / (K @ v)
        v = b / (K.T @ u)
        if it % check_every == 0 and np.max(np.abs(u * (K @ v) - a)) < tol:
            return u[:, None] * K * v[None, :], True
    return u[:, None] * K * v[None, :], False


def _sinkhorn_log(cost, epsilon, max_iter, tol, check_every=10):
    n1, n2 = cost.shape
    log_a = np.full(n1, -np.log(n1))
    log_b = np.full(n2, -np.log(n2))
    f = np.zeros(n1)
    g = np.zeros(n2)
    K = -cost / epsilon
    for it in range(max_iter):
        f = epsilon * (log_a - logsumexp(K + g[None, :] / epsilon, axis=1))
        g = epsilon * (log_b - logsumexp(K + f[:, None] / epsilon, axis=0))
        if it % check_every == 0:
            pi = np.exp(K + f[:, None] / epsilon + g[None, :] / epsilon)
            if np.max(np.abs(pi.sum(axis=1) - np.exp(log_a))) < tol:
                return pi, True
    return np.exp(K + f[:, None] / epsilon + g[None, :] / epsilon), False


def solve_sinkhorn(cost, epsilon: float, max_iter: int = 10000, tol: float = 1e-9,
                   warn: bool = True) -> tuple[TransportPlan, float, bool]:
    """Entropic OT between uniform marginals, rounded onto the polytope.

    Scaling iterations are used while ``exp(-cost/epsilon)`` stays far from
    underflow, log-domain updates otherwise.  Returns ``(plan, value,
    converged)``; when the iteration budget runs out a ``RuntimeWarning`` is
    emitted (unless ``warn=False``) and the rounded last iterate is returned
    with ``converged=False``.
    """
    cost = _check_cost(cost)
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    shifted = cost - cost.min()
    if shifted.max() / epsilon < 300.0:
        pi, converged = _sinkhorn_scaling(np.exp(-shifted / epsilon), max_iter, tol)
    else:
        pi, converged = _sinkhorn_log(cost, epsilon, max_iter, tol)
    pi = round_to_polytope(pi)
    if not converged and warn:
        warnings.warn("Sinkhorn did not converge; returning the rounded last iterate",
                      RuntimeWarning, stacklevel=2)
    return TransportPlan(pi), float(np.sum(cost * pi)), converged
