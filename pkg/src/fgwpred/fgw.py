"""Fused Gromov-Wasserstein discrepancy between uniform-measure graphs.

The objective for a coupling ``pi`` between ``z1 = (C1, F1)`` and
``z2 = (C2, F2)`` is::

    (1 - beta) * <M_F, pi> + beta * sum_{i,j,k,l} (C1[i,k] - C2[j,l])**2 pi[i,j] pi[k,l]

with ``M_F`` the squared feature distances.  It is minimized over the
transportation polytope with a conditional-gradient (Frank-Wolfe) method
whose line search is solved in closed form.  The problem is a nonconvex QP,
so ``solve_fgw`` returns a stationary point; ``restarts`` widens the search.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._fw import fgw_cg, quad_step
from .errors import ShapeMismatchError
from .graph import Graph
from .ot import TransportPlan, exact_plan, feature_cost_matrix, product_coupling, solve_sinkhorn


@dataclass(frozen=True, eq=False)
class FgwProblem:
    z1: Graph
    z2: Graph
    beta: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.beta < 1.0 and self.z1.d != self.z2.d:
            raise ShapeMismatchError(
                f"feature dimensions differ: {self.z1.d} vs {self.z2.d}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.z1.n, self.z2.n

    @cached_property
    def M(self) -> np.ndarray:
        if self.beta == 1.0:
            return np.zeros(self.shape)
        return feature_cost_matrix(self.z1.F, self.z2.F)

    def transposed(self) -> "FgwProblem":
        return FgwProblem(self.z2, self.z1, self.beta)


@dataclass
class FgwSolution:
    value: float
    plan: TransportPlan
    iterations: int
    converged: bool
    gap: float
    objective_trace: np.ndarray = field(repr=False)


def _as_pi(pi) -> np.ndarray:
    return pi.pi if isinstance(pi, TransportPlan) else np.asarray(pi, dtype=float)


def _check_plan(problem: FgwProblem, pi: np.ndarray) -> None:
    if pi.shape != problem.shape:
        raise ShapeMismatchError(f"plan shape {pi.shape} does not match problem {problem.shape}")


def gw_tensor_apply(C1, C2, pi) -> np.ndarray:
    """``T[i, j] = sum_{k,l} (C1[i,k] - C2[j,l])**2 * pi[k, l]``.

    Uses the square-loss factorization with the actual marginals of ``pi``,
    so it is exact for any matrix ``pi`` (not only couplings).
    """
    C1 = np.asarray(C1, dtype=float)
    C2 = np.asarray(C2, dtype=float)
    pi = _as_pi(pi)
    if pi.shape != (C1.shape[0], C2.shape[0]):
        raise ShapeMismatchError(
            f"plan shape {pi.shape} incompatible with {C1.shape[0]}x{C2.shape[0]}"
        )
    r = pi.sum(axis=1)
    s = pi.sum(axis=0)
    const = ((C1 * C1) @ r)[:, None] + ((C2 * C2) @ s)[None, :]
    return const - 2.0 * C1 @ pi @ C2.T


def fgw_objective(problem: FgwProblem, pi) -> float:
    pi = _as_pi(pi)
    _check_plan(problem, pi)
    value = (1.0 - problem.beta) * np.sum(problem.M * pi)
    if problem.beta > 0:
        value += problem.beta * np.sum(gw_tensor_apply(problem.z1.C, problem.z2.C, pi) * pi)
    return float(value)


def objective_gradient(problem: FgwProblem, pi) -> np.ndarray:
    """Gradient of the objective in ``pi`` (symmetric adjacencies)."""
    pi = _as_pi(pi)
    _check_plan(problem, pi)
    return (1.0 - problem.beta) * problem.M + 2.0 * problem.beta * gw_tensor_apply(
        problem.z1.C, problem.z2.C, pi
    )


def fw_direction(problem: FgwProblem, pi) -> TransportPlan:
    """Vertex of the polytope minimizing the linearized objective at ``pi``."""
    return TransportPlan(exact_plan(np.ascontiguousarray(objective_gradient(problem, pi))))


def line_search_coefficients(problem: FgwProblem, pi, direction) -> tuple[float, float]:
    """``(a, b)`` with ``E(pi + t*(s - pi)) = E(pi) + a t^2 + b t``."""
    pi = _as_pi(pi)
    delta = _as_pi(direction) - pi
    C1, C2, beta = problem.z1.C, problem.z2.C, problem.beta
    a = -2.0 * beta * np.sum((C1 @ delta @ C2.T) * delta)
    b = (1.0 - beta) * np.sum(problem.M * delta)
    if beta > 0:
        b += 2.0 * beta * np.sum(gw_tensor_apply(C1, C2, pi) * delta)
    return float(a), float(b)


def line_search(problem: FgwProblem, pi, direction) -> float:
    """Exact minimizer on [0, 1] of the objective along ``pi -> direction``."""
    a, b = line_search_coefficients(problem, pi, direction)
    if a == 0.0 and b == 0.0:
        return 0.0
    return float(quad_step(a, b))


def random_feasible_plan(n1: int, n2: int, rng: np.random.Generator,
                         epsilon: float = 1.0) -> np.ndarray:
    """Entropic plan for a random uniform cost, rounded onto the polytope."""
    plan, _, _ = solve_sinkhorn(rng.random((n1, n2)), epsilon, max_iter=300, tol=1e-6,
                                warn=False)
    return np.array(plan.pi)


def _orientation_key(z: Graph) -> tuple:
    return (z.n, z.d, z.C.tobytes(), z.F.tobytes())


def _run(problem: FgwProblem, G0: np.ndarray, max_iter: int, tol: float) -> FgwSolution:
    trace = np.empty(max_iter + 1)
    G, _, iters, converged, gap = fgw_cg(
        np.ascontiguousarray(problem.z1.C),
        np.ascontiguousarray(problem.z2.C),
        np.ascontiguousarray(problem.M),
        float(problem.beta),
        np.ascontiguousarray(G0, dtype=float),
        int(max_iter),
        float(tol),
        trace,
    )
    plan = TransportPlan(G)
    value = max(fgw_objective(problem, plan.pi), 0.0)
    return FgwSolution(value, plan, int(iters), bool(converged), float(gap),
                       trace[: iters + 1].copy())


def solve_fgw(problem: FgwProblem, max_iter: int = 500, tol: float = 1e-9,
              restarts: int = 1, init=None, seed=None) -> FgwSolution:
    """Conditional-gradient solve of the FGW program.

    Parameters
    ----------
    problem : FgwProblem
    max_iter : int
        Frank-Wolfe iteration cap per run.
    tol : float
        Stop when the relative objective decrease or the FW gap falls below it.
    restarts : int
        Total number of runs.  The first starts from ``init`` (default: the
        product coupling); the others from random feasible plans.
    init : array-like, optional
        Feasible initial coupling.
    seed : int or Generator, optional
        Randomness for the extra restarts.

    Returns
    -------
    FgwSolution
        The best run; ``value`` is the objective at ``plan``.

    Notes
    -----
    The pair is solved in a canonical orientation (smaller graph first, ties
    broken by the raw bytes), so ``solve_fgw(z2, z1)`` returns exactly the
    transpose of ``solve_fgw(z1, z2)`` for matched options.
    """
    n1, n2 = problem.shape
    G0 = product_coupling(n1, n2) if init is None else _as_pi(init)
    _check_plan(problem, G0)
    if _orientation_key(problem.z1) > _orientation_key(problem.z2):
        # solve in a canonical orientation so that swapping the graphs gives
        # exactly the transposed solution (simplex tie-breaks are not symmetric)
        sol = solve_fgw(problem.transposed(), max_iter, tol, restarts, G0.T, seed)
        return FgwSolution(sol.value, TransportPlan(sol.plan.pi.T), sol.iterations,
                           sol.converged, sol.gap, sol.objective_trace)
    best = _run(problem, G0, max_iter, tol)
    if restarts > 1:
        rng = np.random.default_rng(seed)
        for _ in range(restarts - 1):
            sol = _run(problem, random_feasible_plan(n1, n2, rng), max_iter, tol)
            if sol.value < best.value:
                best = sol
    return best


def fgw_distance(z1: Graph, z2: Graph, beta: float = 0.5, **kwargs) -> float:
    """Squared FGW discrepancy ``FGW_2^2(z1, z2)``."""
    return solve_fgw(FgwProblem(z1, z2, beta), **kwargs).value


def grad_fixed_plan(problem: FgwProblem, pi) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of ``fgw_objective`` w.r.t. ``C1`` and ``F1`` with ``pi`` held fixed.

    Entries of ``C1`` are treated as independent variables.
    """
    pi = _as_pi(pi)
    _check_plan(problem, pi)
    z1, z2, beta = problem.z1, problem.z2, problem.beta
    r = pi.sum(axis=1)
    dC = 2.0 * beta * (z1.C * np.outer(r, r) - pi @ z2.C @ pi.T)
    if beta < 1.0:
        dF = 2.0 * (1.0 - beta) * (r[:, None] * z1.F - pi @ z2.F)
    else:
        dF = np.zeros_like(z1.F)
    return dC, dF
