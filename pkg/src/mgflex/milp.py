"""Best-first branch-and-bound over binary variables.

Children are warm-started from the parent's final tableau: branching only
fixes a binary, which keeps the parent basis dual feasible, so a few dual
simplex pivots restore optimality.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .lp import LpOptions, LpProblem, LpSolution, LpStatus, Tableau, solve_lp

log = logging.getLogger(__name__)


class MilpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NODE_LIMIT = "NodeLimit"


@dataclass
class MilpProblem:
    base: LpProblem
    binary_vars: list[int] = field(default_factory=list)

    def __post_init__(self):
        self.binary_vars = sorted(set(int(j) for j in self.binary_vars))
        for j in self.binary_vars:
            if not 0 <= j < self.base.n_vars:
                raise ValueError(f"binary index {j} out of range")
            if self.base.lower[j] < 0 or self.base.upper[j] > 1:
                raise ValueError(f"binary variable {j} has bounds outside [0, 1]")


@dataclass
class MilpOptions:
    int_tol: float = 1e-6
    gap_tol: float = 0.0
    node_limit: int = 200_000
    lp: LpOptions = field(default_factory=LpOptions)


@dataclass
class MilpSolution:
    status: MilpStatus
    x: np.ndarray
    objective_value: float
    nodes_explored: int
    root_bound: float = math.nan

    @property
    def optimal(self) -> bool:
        return self.status is MilpStatus.OPTIMAL


def _most_fractional(x: np.ndarray, binaries: list[int], tol: float) -> int | None:
    best, best_frac = None, tol
    for j in binaries:
        f = x[j] - math.floor(x[j])
        frac = min(f, 1.0 - f)
        if frac > best_frac:
            best, best_frac = j, frac
    return best


def solve_milp(problem: MilpProblem, options: MilpOptions | None = None) -> MilpSolution:
    """Solve to proven optimality within ``gap_tol`` (absolute)."""
    opt = options or MilpOptions()
    base = problem.base.copy()
    for j in problem.binary_vars:
        base.lower[j] = float(math.ceil(base.lower[j] - opt.int_tol))
        base.upper[j] = float(math.floor(base.upper[j] + opt.int_tol))
        if base.lower[j] > base.upper[j]:
            return MilpSolution(MilpStatus.INFEASIBLE, np.full(base.n_vars, np.nan), math.nan, 0)

    root = Tableau(base, opt.lp)
    st = root.solve()
    nodes = 1
    if st is LpStatus.INFEASIBLE:
        return MilpSolution(MilpStatus.INFEASIBLE, np.full(base.n_vars, np.nan), math.nan, nodes)
    if st is LpStatus.UNBOUNDED:
        return MilpSolution(MilpStatus.UNBOUNDED, np.full(base.n_vars, np.nan), -math.inf, nodes)
    if st is not LpStatus.OPTIMAL:
        return MilpSolution(MilpStatus.NODE_LIMIT, np.full(base.n_vars, np.nan), math.nan, nodes)

    binaries = problem.binary_vars
    incumbent_x: np.ndarray | None = None
    incumbent = math.inf
    counter = itertools.count()
    heap: list = []

    def prune_level() -> float:
        return incumbent - opt.gap_tol - 1e-9 * (1.0 + abs(incumbent))

    def consider(tab: Tableau, depth: int) -> None:
        nonlocal incumbent, incumbent_x
        sol = tab.result(LpStatus.OPTIMAL)
        if sol.objective_value >= prune_level():
            return
        j = _most_fractional(sol.x, binaries, opt.int_tol)
        if j is not None:
            # ties on bound go to the deeper node, then to the older one
            heapq.heappush(heap, (sol.objective_value, -depth, next(counter), tab, j))
            return
        polished = _polish(tab, sol.x, binaries)
        if polished is not None and polished[1] < incumbent:
            incumbent_x, incumbent = polished

    root_bound = root.result(LpStatus.OPTIMAL).objective_value
    consider(root, 0)
    status = MilpStatus.OPTIMAL
    while heap:
        bound, neg_depth, _, tab, j = heapq.heappop(heap)
        if bound >= prune_level():
            break
        if nodes >= opt.node_limit:
            status = MilpStatus.NODE_LIMIT
            break
        for value in (0.0, 1.0):
            child = tab.copy()
            child.set_var_bounds(j, value, value)
            st = child.reoptimize()
            nodes += 1
            if st is LpStatus.OPTIMAL:
                consider(child, -neg_depth + 1)
            elif st is LpStatus.ITERATION_LIMIT:
                # the subtree is unexplored, so optimality can no longer be proven
                log.warning("LP iteration limit at a branch node; node dropped")
                status = MilpStatus.NODE_LIMIT

    if incumbent_x is None:
        st = MilpStatus.NODE_LIMIT if status is MilpStatus.NODE_LIMIT else MilpStatus.INFEASIBLE
        return MilpSolution(st, np.full(base.n_vars, np.nan), math.nan, nodes, root_bound)
    return MilpSolution(status, incumbent_x, incumbent, nodes, root_bound)


def _polish(tab: Tableau, x: np.ndarray, binaries: list[int]) -> tuple[np.ndarray, float] | None:
    """Fix binaries at their rounded values and re-solve the continuous part."""
    fixed = tab.copy()
    for j in binaries:
        v = float(round(x[j]))
        fixed.set_var_bounds(j, v, v)
    st = fixed.reoptimize()
    if st is not LpStatus.OPTIMAL:
        return None
    sol = fixed.result(st)
    xs = sol.x
    for j in binaries:
        xs[j] = float(round(xs[j]))
    return xs, float(np.dot(tab.problem.objective, xs))


def relaxation(problem: MilpProblem, options: LpOptions | None = None) -> LpSolution:
    """LP relaxation solution of ``problem``."""
    return solve_lp(problem.base, options)
