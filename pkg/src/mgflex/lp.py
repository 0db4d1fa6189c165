"""Dense bounded-variable simplex for small linear programs.

Problems are stated as ``min c.x`` subject to linear rows with relation
``<=``, ``==`` or ``>=`` and per-variable bounds that may be infinite.
Solving is a two-phase primal simplex on a dense tableau, with Bland's rule
switched on after a run of degenerate pivots. The tableau state can be kept
and re-optimised with a dual simplex after bound changes, which is how the
branch-and-bound in :mod:`mgflex.milp` warm-starts child nodes.

Debug text format (one item per line, ``#`` starts a comment)::

    var <name> <lo> <hi> <cost>
    con <name> <sense> <rhs> <index>:<coef> [<index>:<coef> ...]

``lo``/``hi`` accept ``-inf``/``inf``; sense is one of ``<=``, ``==``, ``>=``;
``name`` must not contain whitespace (``-`` is written for an empty name).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

import numpy as np

LE, EQ, GE = "<=", "==", ">="
SENSES = (LE, EQ, GE)
INF = math.inf

_BASIC, _AT_LO, _AT_HI = 0, 1, 2


class LpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"


@dataclass
class Constraint:
    coeffs: dict[int, float]
    sense: str
    rhs: float
    name: str = ""


class LpProblem:
    """A linear program built incrementally with :meth:`add_var` and
    :meth:`add_constraint`."""

    def __init__(self):
        self.objective: list[float] = []
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.var_names: list[str] = []
        self.constraints: list[Constraint] = []

    @property
    def n_vars(self) -> int:
        return len(self.objective)

    def add_var(self, name: str = "", lo: float = 0.0, hi: float = INF, cost: float = 0.0) -> int:
        if math.isnan(lo) or math.isnan(hi) or lo > hi or lo == INF or hi == -INF:
            raise ValueError(f"invalid bounds [{lo}, {hi}] for variable {name!r}")
        self.objective.append(float(cost))
        self.lower.append(float(lo))
        self.upper.append(float(hi))
        self.var_names.append(name)
        return self.n_vars - 1

    def add_constraint(self, coeffs: Mapping[int, float] | Iterable[float], sense: str, rhs: float,
                       name: str = "") -> int:
        if sense not in SENSES:
            raise ValueError(f"unknown relation {sense!r}")
        if not math.isfinite(rhs):
            raise ValueError(f"constraint {name!r} has non-finite rhs")
        if isinstance(coeffs, Mapping):
            row = {int(j): float(v) for j, v in coeffs.items() if v != 0}
        else:
            row = {j: float(v) for j, v in enumerate(coeffs) if v != 0}
        for j in row:
            if not 0 <= j < self.n_vars:
                raise ValueError(f"constraint {name!r} references unknown variable {j}")
        self.constraints.append(Constraint(row, sense, float(rhs), name))
        return len(self.constraints) - 1

    def set_cost(self, j: int, cost: float) -> None:
        self.objective[j] = float(cost)

    def set_bounds(self, j: int, lo: float, hi: float) -> None:
        if lo > hi:
            raise ValueError(f"invalid bounds [{lo}, {hi}] for variable {j}")
        self.lower[j] = float(lo)
        self.upper[j] = float(hi)

    def copy(self) -> "LpProblem":
        p = LpProblem()
        p.objective = list(self.objective)
        p.lower = list(self.lower)
        p.upper = list(self.upper)
        p.var_names = list(self.var_names)
        p.constraints = [Constraint(dict(c.coeffs), c.sense, c.rhs, c.name) for c in self.constraints]
        return p

    def matrices(self) -> tuple[np.ndarray, list[str], np.ndarray]:
        """Dense ``(A, senses, b)``."""
        A = np.zeros((len(self.constraints), self.n_vars))
        for i, con in enumerate(self.constraints):
            for j, v in con.coeffs.items():
                A[i, j] = v
        return A, [c.sense for c in self.constraints], np.array([c.rhs for c in self.constraints])

    def violation(self, x: np.ndarray) -> tuple[float, float]:
        """Largest scaled row violation and largest bound violation at ``x``."""
        row_v = 0.0
        for con in self.constraints:
            lhs = sum(v * x[j] for j, v in con.coeffs.items())
            r = lhs - con.rhs
            if con.sense == LE:
                viol = max(r, 0.0)
            elif con.sense == GE:
                viol = max(-r, 0.0)
            else:
                viol = abs(r)
            row_v = max(row_v, viol / (1.0 + abs(con.rhs)))
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        bnd_v = float(np.max(np.concatenate([lo - x, x - hi, [0.0]])))
        return row_v, max(bnd_v, 0.0)

    def dumps(self) -> str:
        lines = [f"# {self.n_vars} vars, {len(self.constraints)} constraints"]
        for j in range(self.n_vars):
            lines.append(f"var {self.var_names[j] or '-'} {self.lower[j]!r} {self.upper[j]!r} {self.objective[j]!r}")
        for con in self.constraints:
            terms = " ".join(f"{j}:{v!r}" for j, v in sorted(con.coeffs.items()))
            lines.append(f"con {con.name or '-'} {con.sense} {con.rhs!r} {terms}".rstrip())
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "LpProblem":
        p = cls()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                if parts[0] == "var":
                    name = "" if parts[1] == "-" else parts[1]
                    p.add_var(name, float(parts[2]), float(parts[3]), float(parts[4]))
                elif parts[0] == "con":
                    name = "" if parts[1] == "-" else parts[1]
                    coeffs = {}
                    for term in parts[4:]:
                        j, v = term.split(":")
                        coeffs[int(j)] = float(v)
                    p.add_constraint(coeffs, parts[2], float(parts[3]), name)
                else:
                    raise ValueError(f"unknown record {parts[0]!r}")
            except (IndexError, ValueError) as exc:
                raise ValueError(f"line {lineno}: {exc}") from exc
        return p


@dataclass
class LpOptions:
    feas_tol: float = 1e-7
    opt_tol: float = 1e-9
    pivot_tol: float = 1e-9
    max_iterations: int = 50_000
    stall_threshold: int = 50
    refactor_every: int = 100


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray
    objective_value: float
    iterations: int
    duals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class Tableau:
    """Working state of the simplex on one problem.

    Internally every column has a finite lower bound: variables bounded only
    above are negated and free variables are split. One slack column per
    row turns all rows into equalities (``==`` rows get a slack fixed at 0).
    """

    def __init__(self, problem: LpProblem, options: LpOptions | None = None):
        self.problem = problem
        self.opt = options or LpOptions()
        self.iterations = 0
        A, senses, b = problem.matrices()
        n = problem.n_vars

        # column map: original j -> list of (internal col, sign)
        cols: list[np.ndarray] = []
        lo: list[float] = []
        hi: list[float] = []
        cost: list[float] = []
        self.col_map: list[list[tuple[int, float]]] = []
        for j in range(n):
            l, h, c = problem.lower[j], problem.upper[j], problem.objective[j]
            if l > -INF:
                self.col_map.append([(len(cols), 1.0)])
                cols.append(A[:, j]); lo.append(l); hi.append(h); cost.append(c)
            elif h < INF:
                self.col_map.append([(len(cols), -1.0)])
                cols.append(-A[:, j]); lo.append(-h); hi.append(INF); cost.append(-c)
            else:
                self.col_map.append([(len(cols), 1.0), (len(cols) + 1, -1.0)])
                cols.append(A[:, j]); lo.append(0.0); hi.append(INF); cost.append(c)
                cols.append(-A[:, j]); lo.append(0.0); hi.append(INF); cost.append(-c)
        n_struct = len(cols)

        # drop empty rows, remembering whether they are satisfiable
        keep = [i for i in range(A.shape[0]) if np.any(A[i] != 0)]
        self.empty_row_infeasible = False
        for i in range(A.shape[0]):
            if i in keep:
                continue
            s, r = senses[i], b[i]
            if (s == LE and r < -self.opt.feas_tol) or (s == GE and r > self.opt.feas_tol) or \
                    (s == EQ and abs(r) > self.opt.feas_tol):
                self.empty_row_infeasible = True
        self.rows = keep
        m = len(keep)
        self.m = m
        Ak = np.column_stack(cols)[keep] if n_struct else np.zeros((m, 0))
        bk = b[keep]
        sk = [senses[i] for i in keep]

        x_struct = np.array(lo[:n_struct])
        resid = bk - (Ak @ x_struct if n_struct else 0.0)
        slack_cols = np.zeros((m, m))
        slack_lo = np.zeros(m)
        slack_hi = np.zeros(m)
        for i, s in enumerate(sk):
            slack_cols[i, i] = -1.0 if s == GE else 1.0
            slack_hi[i] = 0.0 if s == EQ else INF

        basis = []
        art_rows = []
        for i in range(m):
            val = resid[i] / slack_cols[i, i]
            if slack_lo[i] - self.opt.feas_tol <= val <= slack_hi[i] + self.opt.feas_tol:
                basis.append(n_struct + i)
            else:
                art_rows.append(i)
                basis.append(None)
        n_art = len(art_rows)
        art_cols = np.zeros((m, n_art))
        for k, i in enumerate(art_rows):
            art_cols[i, k] = 1.0 if resid[i] >= 0 else -1.0
            basis[i] = n_struct + m + k

        self.n_struct = n_struct
        self.n_art = n_art
        self.A = np.hstack([Ak, slack_cols, art_cols]) if m else np.zeros((0, n_struct + n_art))
        self.b = bk.astype(float)
        N = self.A.shape[1]
        self.lo = np.concatenate([np.array(lo, dtype=float), slack_lo, np.zeros(n_art)])
        self.hi = np.concatenate([np.array(hi, dtype=float), slack_hi, np.full(n_art, INF)])
        self.cost = np.concatenate([np.array(cost, dtype=float), np.zeros(m + n_art)])
        self.basis = np.array(basis, dtype=int)
        self.status = np.full(N, _AT_LO, dtype=np.int8)
        self.status[self.basis] = _BASIC
        self.is_art = np.zeros(N, dtype=bool)
        self.is_art[n_struct + m:] = True
        self.phase_cost = self.cost
        self._refactor(self.cost)

    # -- linear algebra -------------------------------------------------

    def _nonbasic_values(self) -> np.ndarray:
        x = np.where(self.status == _AT_HI, self.hi, self.lo)
        x[self.basis] = 0.0
        return x

    def _refactor(self, cost: np.ndarray) -> None:
        """Rebuild tableau, basic values and reduced costs from the basis."""
        self.phase_cost = cost
        if self.m == 0:
            self.T = np.zeros((0, self.A.shape[1]))
            self.beta = np.zeros(0)
            self.d = cost.copy()
            return
        B = self.A[:, self.basis]
        xn = self._nonbasic_values()
        rhs = np.column_stack([self.A, self.b - self.A @ xn])
        sol = np.linalg.solve(B, rhs)
        self.T = sol[:, :-1]
        self.beta = sol[:, -1]
        self.d = cost - cost[self.basis] @ self.T
        self.d[self.basis] = 0.0
        self._since_refactor = 0

    def _pivot(self, r: int, j: int) -> None:
        T = self.T
        prow = T[r] / T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, prow)
        T[r] = prow
        self.d = self.d - self.d[j] * prow
        self.d[j] = 0.0
        leaving = self.basis[r]
        self.basis[r] = j
        self.status[j] = _BASIC
        self.iterations += 1
        self._since_refactor += 1
        return leaving

    def _maybe_refactor(self) -> None:
        if self._since_refactor >= self.opt.refactor_every:
            self._refactor(self.phase_cost)

    # -- primal simplex ---------------------------------------------------

    def _primal(self) -> LpStatus:
        o = self.opt
        bland = False
        stall = 0
        movable = self.hi > self.lo
        while True:
            if self.iterations >= o.max_iterations:
                return LpStatus.ITERATION_LIMIT
            d = self.d
            cand = movable & (((self.status == _AT_LO) & (d < -o.opt_tol)) |
                              ((self.status == _AT_HI) & (d > o.opt_tol)))
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                return LpStatus.OPTIMAL
            j = int(idx[0]) if bland else int(idx[np.argmax(np.abs(d[idx]))])
            direction = 1.0 if self.status[j] == _AT_LO else -1.0
            a = direction * self.T[:, j]
            lo_b = self.lo[self.basis]
            hi_b = self.hi[self.basis]
            ratios = np.full(self.m, INF)
            dec = a > o.pivot_tol
            inc = a < -o.pivot_tol
            ratios[dec] = (self.beta[dec] - lo_b[dec]) / a[dec]
            fin_inc = inc & np.isfinite(hi_b)
            ratios[fin_inc] = (hi_b[fin_inc] - self.beta[fin_inc]) / -a[fin_inc]
            np.maximum(ratios, 0.0, out=ratios)
            theta_flip = self.hi[j] - self.lo[j]
            r = -1
            theta = theta_flip
            if self.m:
                rmin = float(ratios.min())
                if rmin < theta_flip:
                    theta = rmin
                    ties = np.flatnonzero(ratios <= rmin + 1e-12 * (1.0 + rmin))
                    if bland:
                        r = int(ties[np.argmin(self.basis[ties])])
                    else:
                        r = int(ties[np.argmax(np.abs(a[ties]))])
            if theta == INF:
                return LpStatus.UNBOUNDED
            self.beta -= theta * a
            if r < 0:
                self.status[j] = _AT_HI if direction > 0 else _AT_LO
            else:
                entering_val = (self.lo[j] if direction > 0 else self.hi[j]) + direction * theta
                leaving = self.basis[r]
                self.status[leaving] = _AT_LO if a[r] > 0 else _AT_HI
                self._pivot(r, j)
                self.beta[r] = entering_val
                if self.status[leaving] == _AT_HI and not math.isfinite(self.hi[leaving]):
                    self.status[leaving] = _AT_LO
                self._maybe_refactor()
            if r < 0:
                self.iterations += 1
            if theta <= 1e-12:
                stall += 1
                if stall >= o.stall_threshold:
                    bland = True
            else:
                stall = 0
                bland = False

    # -- dual simplex -----------------------------------------------------

    def _dual_feasible(self) -> bool:
        tol = 1e-7
        movable = self.hi > self.lo
        bad = movable & (((self.status == _AT_LO) & (self.d < -tol)) |
                         ((self.status == _AT_HI) & (self.d > tol)))
        return not bad.any()

    def _dual(self) -> LpStatus:
        o = self.opt
        bland = False
        stall = 0
        while True:
            if self.iterations >= o.max_iterations:
                return LpStatus.ITERATION_LIMIT
            lo_b = self.lo[self.basis]
            hi_b = self.hi[self.basis]
            tol_b = o.feas_tol * (1.0 + np.abs(self.beta))
            below = lo_b - self.beta
            above = self.beta - hi_b
            viol = np.maximum(below, above)
            bad = np.flatnonzero(viol > tol_b)
            if bad.size == 0:
                return LpStatus.OPTIMAL
            r = int(bad[np.argmin(self.basis[bad])]) if bland else int(bad[np.argmax(viol[bad])])
            go_low = below[r] > above[r]
            target = lo_b[r] if go_low else hi_b[r]
            row = self.T[r]
            movable = self.hi > self.lo
            at_lo = (self.status == _AT_LO) & movable
            at_hi = (self.status == _AT_HI) & movable
            if go_low:
                cand = (at_lo & (row < -o.pivot_tol)) | (at_hi & (row > o.pivot_tol))
            else:
                cand = (at_lo & (row > o.pivot_tol)) | (at_hi & (row < -o.pivot_tol))
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                return LpStatus.INFEASIBLE
            ratios = np.abs(self.d[idx]) / np.abs(row[idx])
            rmin = float(ratios.min())
            ties = idx[ratios <= rmin + 1e-12 * (1.0 + rmin)]
            j = int(ties[0]) if bland else int(ties[np.argmax(np.abs(row[ties]))])
            delta = (self.beta[r] - target) / row[j]
            xj = self.hi[j] if self.status[j] == _AT_HI else self.lo[j]
            self.beta -= delta * self.T[:, j]
            leaving = self.basis[r]
            self.status[leaving] = _AT_LO if go_low else _AT_HI
            self._pivot(r, j)
            self.beta[r] = xj + delta
            self._maybe_refactor()
            if rmin <= 1e-12:
                stall += 1
                if stall >= o.stall_threshold:
                    bland = True
            else:
                stall = 0
                bland = False

    # -- driver ---------------------------------------------------------

    def solve(self) -> LpStatus:
        """Two-phase primal solve from the slack/artificial start."""
        if self.empty_row_infeasible:
            return LpStatus.INFEASIBLE
        if self.n_art:
            art_cost = self.is_art.astype(float)
            self._refactor(art_cost)
            st = self._primal()
            if st is LpStatus.ITERATION_LIMIT:
                return st
            self._refactor(art_cost)
            infeas = float(np.sum(self.beta[self.is_art[self.basis]]))
            if infeas > self.opt.feas_tol * (1.0 + float(np.max(np.abs(self.b), initial=0.0))):
                return LpStatus.INFEASIBLE
            self._drive_out_artificials()
        self._refactor(self.cost)
        return self.reoptimize(primal_only=True)

    def _drive_out_artificials(self) -> None:
        for r in range(self.m):
            if not self.is_art[self.basis[r]]:
                continue
            row = self.T[r]
            cand = np.flatnonzero(~self.is_art & (self.status != _BASIC) & (np.abs(row) > 1e-7))
            if cand.size:
                j = int(cand[np.argmax(np.abs(row[cand]))])
                xj = self.hi[j] if self.status[j] == _AT_HI else self.lo[j]
                leaving = self.basis[r]
                self.status[leaving] = _AT_LO
                self._pivot(r, j)
                self.beta[r] = xj
        # artificials are pinned at zero from here on
        self.hi[self.is_art] = 0.0
        self.status[self.is_art & (self.status != _BASIC)] = _AT_LO

    def reoptimize(self, primal_only: bool = False) -> LpStatus:
        """Restore optimality after bound changes (dual then primal)."""
        if not primal_only:
            if not self._dual_feasible():
                return self._cold_restart()
            st = self._dual()
            if st is not LpStatus.OPTIMAL:
                return st
        st = self._primal()
        if st is LpStatus.OPTIMAL:
            self._refactor(self.cost)
            # a refactor can expose small residual infeasibility or pricing errors
            if not self._primal_feasible():
                st = self._dual() if self._dual_feasible() else LpStatus.OPTIMAL
            if st is LpStatus.OPTIMAL:
                st = self._primal()
        return st

    def _primal_feasible(self) -> bool:
        lo_b = self.lo[self.basis]
        hi_b = self.hi[self.basis]
        tol = self.opt.feas_tol * (1.0 + np.abs(self.beta))
        return bool(np.all(self.beta >= lo_b - tol) and np.all(self.beta <= hi_b + tol))

    def _cold_restart(self) -> LpStatus:
        fresh = Tableau(self.problem_with_bounds(), self.opt)
        st = fresh.solve()
        self.__dict__.update(fresh.__dict__)
        return st

    def problem_with_bounds(self) -> LpProblem:
        """Original problem with the current (possibly branched) bounds."""
        p = self.problem.copy()
        for j, parts in enumerate(self.col_map):
            if len(parts) == 1:
                k, s = parts[0]
                if s > 0:
                    p.lower[j], p.upper[j] = self.lo[k], self.hi[k]
                else:
                    p.lower[j], p.upper[j] = -self.hi[k], -self.lo[k]
        return p

    def set_var_bounds(self, j: int, lo: float, hi: float) -> None:
        """Change bounds of an original variable that has a single column."""
        (k, s), = self.col_map[j]
        if s < 0:
            lo, hi = -hi, -lo
        if self.status[k] != _BASIC:
            old = self.hi[k] if self.status[k] == _AT_HI else self.lo[k]
            self.lo[k], self.hi[k] = lo, hi
            if self.status[k] == _AT_HI and not math.isfinite(hi):
                self.status[k] = _AT_LO
            # keep the side that preserves dual feasibility
            if self.d[k] < 0 and math.isfinite(hi):
                self.status[k] = _AT_HI
            elif self.d[k] > 0:
                self.status[k] = _AT_LO
            new = self.hi[k] if self.status[k] == _AT_HI else self.lo[k]
            if new != old and self.m:
                self.beta -= (new - old) * self.T[:, k]
        else:
            self.lo[k], self.hi[k] = lo, hi

    def copy(self) -> "Tableau":
        t = object.__new__(Tableau)
        t.__dict__.update(self.__dict__)
        for name in ("T", "beta", "d", "lo", "hi", "basis", "status"):
            setattr(t, name, getattr(self, name).copy())
        return t

    def primal(self) -> np.ndarray:
        x_int = self._nonbasic_values()
        if self.m:
            x_int[self.basis] = self.beta
        x = np.zeros(self.problem.n_vars)
        for j, parts in enumerate(self.col_map):
            x[j] = sum(s * x_int[k] for k, s in parts)
        return x

    def duals(self) -> np.ndarray:
        y_all = np.zeros(len(self.problem.constraints))
        if self.m:
            B = self.A[:, self.basis]
            y = np.linalg.solve(B.T, self.cost[self.basis])
            y_all[self.rows] = y
        return y_all

    def result(self, status: LpStatus) -> LpSolution:
        n = self.problem.n_vars
        if status is not LpStatus.OPTIMAL:
            return LpSolution(status, np.full(n, np.nan), math.nan, self.iterations)
        x = self.primal()
        # snap to bounds that are within tolerance
        lo = np.array(self.problem.lower)
        hi = np.array(self.problem.upper)
        x = np.minimum(np.maximum(x, lo), hi)
        obj = float(np.dot(self.problem.objective, x))
        return LpSolution(status, x, obj, self.iterations, self.duals())


def solve_lp(problem: LpProblem, options: LpOptions | None = None) -> LpSolution:
    """Solve ``problem`` to optimality or report why not."""
    tab = Tableau(problem, options)
    status = tab.solve()
    return tab.result(status)


def dual_bound(problem: LpProblem, duals: np.ndarray, sign_tol: float = 1e-9) -> float:
    """Lagrangian lower bound on the optimum given row multipliers.

    Returns ``-inf`` when the multipliers do not certify a finite bound
    (wrong sign on an inequality row, or a reduced cost pushing an unbounded
    variable).
    """
    A, senses, b = problem.matrices()
    y = np.array(duals, dtype=float)
    for i, s in enumerate(senses):
        if s == LE and y[i] > sign_tol:
            return -INF
        if s == GE and y[i] < -sign_tol:
            return -INF
        if s == LE:
            y[i] = min(y[i], 0.0)
        elif s == GE:
            y[i] = max(y[i], 0.0)
    red = np.asarray(problem.objective) - A.T @ y if A.size else np.asarray(problem.objective, dtype=float)
    total = float(b @ y) if b.size else 0.0
    for j, dj in enumerate(red):
        lo, hi = problem.lower[j], problem.upper[j]
        if abs(dj) <= sign_tol * (1 + abs(problem.objective[j])):
            finite = [dj * v for v in (lo, hi) if math.isfinite(v)]
            total += min(finite) if finite else 0.0
            continue
        bound = lo if dj > 0 else hi
        if not math.isfinite(bound):
            return -INF
        total += dj * bound
    return total
