"""Conditional-gradient loop for the fused GW quadratic program (numba kernel).

Graphs are assumed symmetric, so the gradient of the quadratic term is
``2 * T(G)`` with ``T(G) = c - 2 C1 G C2^T``.
"""

import numpy as np
from numba import njit

from ._simplex import basis_plan, initial_basis, simplex_from_basis


@njit(cache=True)
def quad_step(a, b):
    """Minimizer on [0, 1] of ``a t^2 + b t``."""
    if a > 0.0:
        t = -b / (2.0 * a)
        if t < 0.0:
            return 0.0
        if t > 1.0:
            return 1.0
        return t
    if a + b < 0.0:
        return 1.0
    return 0.0


@njit(cache=True)
def fgw_cg(C1, C2, M, beta, G0, max_iter, tol, trace):
    """Frank-Wolfe from ``G0``.

    Returns ``(G, value, iterations, converged, gap)``; ``trace[:iterations+1]``
    holds the objective after each accepted step.
    """
    n1 = C1.shape[0]
    n2 = C2.shape[0]
    max_pivots = 50 * (n1 + n2) * max(n1, n2) + 1000
    a = np.full(n1, 1.0 / n1)
    b = np.full(n2, 1.0 / n2)
    c1 = np.dot(C1 * C1, a)
    c2 = np.dot(C2 * C2, b)
    const = np.empty((n1, n2))
    for i in range(n1):
        for j in range(n2):
            const[i, j] = c1[i] + c2[j]
    C2t = np.ascontiguousarray(C2.T)

    # the simplex basis is carried across iterations: supplies never change,
    # so the previous optimal basis stays feasible for the next gradient
    u = np.zeros(n1)
    v = np.zeros(n2)
    rows = np.empty(0, dtype=np.int64)
    cols = np.empty(0, dtype=np.int64)
    flow = np.empty(0, dtype=np.int64)

    G = G0.copy()
    A = np.dot(np.dot(C1, G), C2t)
    T = const - 2.0 * A
    E = (1.0 - beta) * np.sum(M * G) + beta * np.sum(T * G)
    trace[0] = E
    gap = np.inf
    converged = False
    it = 0
    while it < max_iter:
        grad = (1.0 - beta) * M + 2.0 * beta * T
        if it == 0:
            rows, cols, flow = initial_basis(grad)
        simplex_from_basis(grad, rows, cols, flow, u, v, max_pivots)
        x = basis_plan(rows, cols, flow, n1, n2)
        D = x / float(n1 * n2) - G
        gap = -np.sum(grad * D)
        if gap <= tol:
            converged = True
            break
        AD = np.dot(np.dot(C1, D), C2t)
        qa = -2.0 * beta * np.sum(AD * D)
        qb = (1.0 - beta) * np.sum(M * D) + 2.0 * beta * np.sum(T * D)
        tau = quad_step(qa, qb)
        if tau == 0.0:
            converged = True
            break
        G_new = G + tau * D
        A_new = A + tau * AD
        T_new = const - 2.0 * A_new
        E_new = (1.0 - beta) * np.sum(M * G_new) + beta * np.sum(T_new * G_new)
        if E_new > E:
            # float noise at the optimum; keep the previous iterate
            converged = True
            break
        it += 1
        G = G_new
        A = A_new
        T = T_new
        decrease = E - E_new
        E = E_new
        trace[it] = E
        if decrease <= tol * abs(E + decrease):
            converged = True
            break
    return G, E, it, converged, gap
