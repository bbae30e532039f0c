"""Transportation simplex for uniform marginals (numba kernel).

The uniform problem is scaled to integers (row supply ``n2``, column demand
``n1``) and perturbed: every supply gets ``+1`` and the last demand ``+n1``,
after multiplying by ``P = 2*n1 + 1``.  The perturbed problem has no
degenerate basis, so the simplex cannot cycle, and every basic flow equals
``P * x + e`` with ``|e| <= n1 < P/2``; rounding ``flow / P`` recovers an
optimal vertex of the unperturbed problem.  All flow arithmetic is int64.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _initial_basis(cost, supply, demand, rows, cols, flow):
    # greedy least-cost allocation; each step exhausts exactly one row or column
    n1, n2 = cost.shape
    order = np.argsort(cost.ravel(), kind="mergesort")
    s = supply.copy()
    d = demand.copy()
    k = 0
    m = n1 + n2 - 1
    for idx in order:
        i = idx // n2
        j = idx % n2
        if s[i] > 0 and d[j] > 0:
            q = min(s[i], d[j])
            rows[k] = i
            cols[k] = j
            flow[k] = q
            s[i] -= q
            d[j] -= q
            k += 1
            if k == m:
                break
    return k


@njit(cache=True)
def _build_adjacency(rows, cols, n1, n2, head, nxt):
    # node ids: rows 0..n1-1, columns n1..n1+n2-1; two adjacency slots per arc
    head[:] = -1
    for k in range(rows.size):
        a = 2 * k
        nxt[a] = head[rows[k]]
        head[rows[k]] = a
        b = 2 * k + 1
        nxt[b] = head[n1 + cols[k]]
        head[n1 + cols[k]] = b


@njit(cache=True)
def _potentials(cost, rows, cols, head, nxt, u, v, stack, seen):
    n1 = u.size
    seen[:] = False
    u[0] = 0.0
    seen[0] = True
    top = 0
    stack[top] = 0
    top += 1
    while top > 0:
        top -= 1
        node = stack[top]
        a = head[node]
        while a != -1:
            k = a >> 1
            if node < n1:
                other = n1 + cols[k]
                if not seen[other]:
                    v[cols[k]] = cost[rows[k], cols[k]] - u[rows[k]]
                    seen[other] = True
                    stack[top] = other
                    top += 1
            else:
                other = rows[k]
                if not seen[other]:
                    u[rows[k]] = cost[rows[k], cols[k]] - v[cols[k]]
                    seen[other] = True
                    stack[top] = other
                    top += 1
            a = nxt[a]


@njit(cache=True)
def _tree_path(rows, cols, head, nxt, n1, src, dst, parent_arc, stack, seen, path):
    # arcs on the tree path from node dst back to node src, in walk order
    seen[:] = False
    seen[src] = True
    parent_arc[src] = -1
    top = 0
    stack[top] = src
    top += 1
    while top > 0:
        top -= 1
        node = stack[top]
        if node == dst:
            break
        a = head[node]
        while a != -1:
            k = a >> 1
            other = n1 + cols[k] if node < n1 else rows[k]
            if not seen[other]:
                seen[other] = True
                parent_arc[other] = k
                stack[top] = other
                top += 1
            a = nxt[a]
    length = 0
    node = dst
    while node != src:
        k = parent_arc[node]
        path[length] = k
        length += 1
        node = rows[k] if node >= n1 else n1 + cols[k]
    return length


@njit(cache=True)
def perturbed_masses(n1, n2):
    P = 2 * n1 + 1
    supply = np.full(n1, n2 * P + 1, dtype=np.int64)
    demand = np.full(n2, n1 * P, dtype=np.int64)
    demand[n2 - 1] += n1
    return supply, demand, P


@njit(cache=True)
def initial_basis(cost):
    n1, n2 = cost.shape
    m = n1 + n2 - 1
    supply, demand, _ = perturbed_masses(n1, n2)
    rows = np.empty(m, dtype=np.int64)
    cols = np.empty(m, dtype=np.int64)
    flow = np.empty(m, dtype=np.int64)
    _initial_basis(cost, supply, demand, rows, cols, flow)
    return rows, cols, flow


@njit(cache=True)
def simplex_from_basis(cost, rows, cols, flow, u, v, max_pivots):
    """Pivot from a feasible basis (modified in place) to an optimal one."""
    n1, n2 = cost.shape
    m = n1 + n2 - 1
    nn = n1 + n2
    head = np.empty(nn, dtype=np.int64)
    nxt = np.empty(2 * m, dtype=np.int64)
    stack = np.empty(nn, dtype=np.int64)
    seen = np.zeros(nn, dtype=np.bool_)
    parent_arc = np.empty(nn, dtype=np.int64)
    path = np.empty(nn, dtype=np.int64)

    scale = 0.0
    for i in range(n1):
        for j in range(n2):
            if abs(cost[i, j]) > scale:
                scale = abs(cost[i, j])
    tol = 1e-12 * (1.0 + scale)

    pivots = 0
    while True:
        _build_adjacency(rows, cols, n1, n2, head, nxt)
        _potentials(cost, rows, cols, head, nxt, u, v, stack, seen)
        # Dantzig pricing; strict comparison in row-major scan = lowest index on ties
        best = -tol
        ei = -1
        ej = -1
        for i in range(n1):
            ui = u[i]
            for j in range(n2):
                r = cost[i, j] - ui - v[j]
                if r < best:
                    best = r
                    ei = i
                    ej = j
        if ei < 0 or pivots >= max_pivots:
            break
        pivots += 1
        length = _tree_path(rows, cols, head, nxt, n1, ei, n1 + ej,
                            parent_arc, stack, seen, path)
        # walking from column ej back to row ei, arcs alternate -, +, -, ...
        theta = -1
        leave = -1
        for t in range(0, length, 2):
            k = path[t]
            if theta < 0 or flow[k] < theta or (flow[k] == theta and k < leave):
                theta = flow[k]
                leave = k
        for t in range(length):
            k = path[t]
            if t % 2 == 0:
                flow[k] -= theta
            else:
                flow[k] += theta
        rows[leave] = ei
        cols[leave] = ej
        flow[leave] = theta
    return pivots


@njit(cache=True)
def basis_plan(rows, cols, flow, n1, n2):
    """Integer vertex plan (scaled by ``n1*n2``) of a perturbed basis."""
    P = 2 * n1 + 1
    x = np.zeros((n1, n2), dtype=np.int64)
    for k in range(rows.size):
        x[rows[k], cols[k]] = (flow[k] + P // 2) // P
    return x


@njit(cache=True)
def network_simplex(cost, max_pivots):
    """Return ``(x, u, v, pivots)``: integer vertex plan scaled by ``n1*n2`` and duals."""
    n1, n2 = cost.shape
    rows, cols, flow = initial_basis(cost)
    u = np.zeros(n1)
    v = np.zeros(n2)
    pivots = simplex_from_basis(cost, rows, cols, flow, u, v, max_pivots)
    return basis_plan(rows, cols, flow, n1, n2), u, v, pivots
