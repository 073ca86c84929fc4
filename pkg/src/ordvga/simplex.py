"""Dense two-phase simplex kernel returning primal values and row duals.

One solve of an assessment program must yield both sides of the model:
the adjustment variables come out of the primal vector and the price
variables out of the row duals, so the kernel keeps exact dual sign
conventions:

* ``max`` problems: LE rows have duals >= 0, GE rows <= 0, EQ rows free.
* ``min`` problems: GE rows have duals >= 0, LE rows <= 0, EQ rows free.
* strong duality: ``objective_value == sum(row_duals * rhs)``.
* reduced cost of variable j is ``c_j - sum_k row_duals[k] * A[k, j]``.

Pivoting runs on a Ruiz-equilibrated copy of the constraint matrix (the
assessment programs mix coefficient magnitudes across seven orders), and
the reported solution is recomputed from the final basis on the original
data, so accuracy does not depend on tableau drift.  Residuals are
measured relative to each row's magnitude; ``feas_tol`` et al. can be
scaled globally through the ``ORDVGA_TOLERANCE_SCALE`` environment
variable.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "Relation",
    "Sense",
    "VarBound",
    "Status",
    "LpRow",
    "LpProblem",
    "LpSolution",
    "NumericalBreakdown",
    "solve",
    "tolerance_scale",
    "FEAS_TOL",
    "PIVOT_TOL",
    "GAP_TOL",
]

FEAS_TOL = 1e-8
PIVOT_TOL = 1e-10
GAP_TOL = 1e-7

_OPT_TOL = 1e-9          # entering-candidate threshold on the scaled tableau
_PHASE1_TOL = 1e-9       # residual artificial mass treated as feasible
_RUIZ_SWEEPS = 4


def tolerance_scale() -> float:
    """Global multiplier for all numeric tolerances (default 1)."""
    raw = os.environ.get("ORDVGA_TOLERANCE_SCALE", "")
    try:
        value = float(raw)
    except ValueError:
        return 1.0
    return value if value > 0 else 1.0


class Relation(str, Enum):
    LE = "<="
    GE = ">="
    EQ = "="


class Sense(str, Enum):
    MIN = "min"
    MAX = "max"


class VarBound(str, Enum):
    NON_NEGATIVE = "nonneg"
    FREE = "free"


class Status(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class NumericalBreakdown(RuntimeError):
    """Raised when no admissible pivot exists or a solution fails its checks."""


@dataclass(frozen=True)
class LpRow:
    coeffs: np.ndarray
    relation: Relation
    rhs: float
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float))
        object.__setattr__(self, "relation", Relation(self.relation))
        object.__setattr__(self, "rhs", float(self.rhs))


@dataclass(frozen=True)
class LpProblem:
    sense: Sense
    objective: np.ndarray
    rows: tuple[LpRow, ...]
    var_bounds: tuple[VarBound, ...] = ()
    var_labels: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sense", Sense(self.sense))
        object.__setattr__(self, "objective", np.asarray(self.objective, dtype=float))
        object.__setattr__(self, "rows", tuple(self.rows))
        n = self.objective.size
        bounds = self.var_bounds or tuple([VarBound.NON_NEGATIVE] * n)
        if len(bounds) != n:
            raise ValueError(f"expected {n} var bounds, got {len(bounds)}")
        object.__setattr__(self, "var_bounds", tuple(VarBound(b) for b in bounds))
        for row in self.rows:
            if row.coeffs.size != n:
                raise ValueError(
                    f"row {row.label!r} has {row.coeffs.size} coefficients, expected {n}"
                )

    @property
    def n_vars(self) -> int:
        return int(self.objective.size)

    @property
    def n_rows(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class LpSolution:
    status: Status
    objective_value: float
    primal: np.ndarray
    row_duals: np.ndarray
    reduced_costs: np.ndarray
    iterations: int

    def dual_objective(self, problem: LpProblem) -> float:
        return float(np.dot(self.row_duals, [row.rhs for row in problem.rows]))


def _ruiz_equilibrate(A: np.ndarray, sweeps: int = _RUIZ_SWEEPS):
    """Iterative row/column scaling toward unit max magnitudes."""
    m, n = A.shape
    r = np.ones(m)
    c = np.ones(n)
    S = A.copy()
    for _ in range(sweeps):
        row_max = np.max(np.abs(S), axis=1)
        row_f = 1.0 / np.sqrt(np.where(row_max > 0, row_max, 1.0))
        S = S * row_f[:, None]
        r *= row_f
        col_max = np.max(np.abs(S), axis=0)
        col_f = 1.0 / np.sqrt(np.where(col_max > 0, col_max, 1.0))
        S = S * col_f[None, :]
        c *= col_f
    return S, r, c


class _Tableau:
    """Mutable simplex state over the scaled equality system."""

    def __init__(self, T: np.ndarray, rhs: np.ndarray, basis: np.ndarray,
                 pivot_tol: float, opt_tol: float, verbose: bool):
        self.T = T
        self.rhs = rhs
        self.basis = basis
        self.pivot_tol = pivot_tol
        self.opt_tol = opt_tol
        self.verbose = verbose
        self.iterations = 0
        self.in_basis = np.zeros(T.shape[1], dtype=bool)
        self.in_basis[basis] = True

    def pivot(self, pr: int, pc: int) -> None:
        T, rhs = self.T, self.rhs
        piv = T[pr, pc]
        T[pr] /= piv
        rhs[pr] /= piv
        factors = T[:, pc].copy()
        factors[pr] = 0.0
        T -= np.outer(factors, T[pr])
        rhs -= factors * rhs[pr]
        np.clip(rhs, 0.0, None, out=rhs)
        self.in_basis[self.basis[pr]] = False
        self.in_basis[pc] = True
        self.basis[pr] = pc
        self.iterations += 1

    def run(self, c: np.ndarray, allowed: np.ndarray, max_iter: int):
        """Iterate to optimality of ``min c.x`` over allowed columns.

        Returns ``("optimal", None)`` or ``("unbounded", entering_col)``.
        """
        T, rhs = self.T, self.rhs
        m, _ = T.shape
        z = c - c[self.basis] @ T
        z[self.basis] = 0.0
        bland = False
        stall_limit = 5 * (m + T.shape[1])
        stall = 0
        best_obj = np.inf
        local_iters = 0
        while True:
            if local_iters > max_iter:
                raise NumericalBreakdown(f"iteration limit {max_iter} exceeded")
            cand = allowed & ~self.in_basis & (z < -self.opt_tol)
            if not np.any(cand):
                return "optimal", None
            if bland:
                pc = int(np.flatnonzero(cand)[0])
            else:
                masked = np.where(cand, z, np.inf)
                pc = int(np.argmin(masked))
            col = T[:, pc]
            pos = col > self.pivot_tol
            if not np.any(pos):
                if np.any(col > 0):
                    raise NumericalBreakdown(
                        "pivot magnitude below pivot_tol with no admissible alternative"
                    )
                return "unbounded", pc
            ratios = np.where(pos, rhs / np.where(pos, col, 1.0), np.inf)
            theta = np.min(ratios)
            ties = np.flatnonzero(ratios <= theta + 1e-9 * (1.0 + theta))
            pr = int(ties[np.argmin(self.basis[ties])])
            if self.verbose:
                print(f"pivot row={pr} col={pc} theta={theta:.3e}")
            self.pivot(pr, pc)
            z -= z[pc] * T[pr]
            z[pc] = 0.0
            local_iters += 1

            obj = float(c[self.basis] @ rhs)
            if obj < best_obj - 1e-12 * (1.0 + abs(best_obj)):
                best_obj = obj
                stall = 0
            else:
                stall += 1
                if stall > stall_limit:
                    bland = True


def solve(problem: LpProblem, *, feas_tol: float | None = None,
          pivot_tol: float | None = None, gap_tol: float | None = None,
          max_iterations: int | None = None, verbose: bool = False) -> LpSolution:
    """Solve a linear program, returning primal values and row duals.

    Optimal solutions satisfy primal feasibility (residuals relative to
    row magnitude below ``feas_tol``), complementary slackness and a
    primal/dual objective gap below ``gap_tol``; violations raise
    ``NumericalBreakdown`` instead of returning a wrong answer.
    Infeasible problems carry a dual (Farkas) certificate in
    ``row_duals``; unbounded problems carry an improving ray in
    ``primal``.
    """
    scale = tolerance_scale()
    feas_tol = (FEAS_TOL if feas_tol is None else feas_tol) * scale
    pivot_tol = (PIVOT_TOL if pivot_tol is None else pivot_tol) * scale
    gap_tol = (GAP_TOL if gap_tol is None else gap_tol) * scale

    n = problem.n_vars
    m = problem.n_rows
    c_ext = problem.objective
    maximize = problem.sense is Sense.MAX

    if m == 0:
        return _solve_unconstrained(problem)

    A_ext = np.array([row.coeffs for row in problem.rows], dtype=float)
    b_ext = np.array([row.rhs for row in problem.rows], dtype=float)
    relations = [row.relation for row in problem.rows]

    # Internal minimization form with nonnegative right-hand sides.
    c_int = -c_ext if maximize else c_ext.copy()
    row_sign = np.ones(m)
    A_int = A_ext.copy()
    b_int = b_ext.copy()
    rel_int = list(relations)
    flip = {Relation.LE: Relation.GE, Relation.GE: Relation.LE, Relation.EQ: Relation.EQ}
    for k in range(m):
        if b_int[k] < 0:
            A_int[k] = -A_int[k]
            b_int[k] = -b_int[k]
            rel_int[k] = flip[rel_int[k]]
            row_sign[k] = -1.0

    # Free variables split into a (+, -) column pair; duals are untouched
    # by the split and the reported primal recombines the pair.
    col_var: list[tuple[int, float]] = []
    for j, bound in enumerate(problem.var_bounds):
        col_var.append((j, 1.0))
        if bound is VarBound.FREE:
            col_var.append((j, -1.0))
    n_split = len(col_var)
    A_split = np.empty((m, n_split))
    c_split = np.empty(n_split)
    for idx, (j, sgn) in enumerate(col_var):
        A_split[:, idx] = sgn * A_int[:, j]
        c_split[idx] = sgn * c_int[j]

    A_scaled, row_f, col_f = _ruiz_equilibrate(A_split)
    b_scaled = b_int * row_f

    slack_of_row = {}
    art_of_row = {}
    slack_cols: list[np.ndarray] = []
    for k, rel in enumerate(rel_int):
        if rel is Relation.EQ:
            continue
        e = np.zeros(m)
        e[k] = 1.0 if rel is Relation.LE else -1.0
        slack_of_row[k] = n_split + len(slack_cols)
        slack_cols.append(e)
    n_slack = len(slack_cols)
    art_rows = [k for k, rel in enumerate(rel_int) if rel is not Relation.LE]
    for pos, k in enumerate(art_rows):
        art_of_row[k] = n_split + n_slack + pos
    n_art = len(art_rows)
    N = n_split + n_slack + n_art

    def assemble(A_core: np.ndarray) -> np.ndarray:
        full = np.zeros((m, N))
        full[:, :n_split] = A_core
        for k, col in slack_of_row.items():
            full[k, col] = slack_cols[col - n_split][k]
        for k, col in art_of_row.items():
            full[k, col] = 1.0
        return full

    T0 = assemble(A_scaled)
    A_full = assemble(A_split)  # unscaled copy for the final basis solves

    basis = np.empty(m, dtype=int)
    for k, rel in enumerate(rel_int):
        basis[k] = slack_of_row[k] if rel is Relation.LE else art_of_row[k]

    tab = _Tableau(T0.copy(), b_scaled.copy(), basis, pivot_tol, _OPT_TOL * scale, verbose)
    max_iter = max_iterations if max_iterations is not None else 200 * (m + N) + 1000
    artificial = np.zeros(N, dtype=bool)
    artificial[n_split + n_slack:] = True

    kept = list(range(m))
    if n_art:
        c1 = np.zeros(N)
        c1[artificial] = 1.0
        outcome, _ = tab.run(c1, allowed=np.ones(N, dtype=bool), max_iter=max_iter)
        if outcome != "optimal":  # phase 1 is bounded below by zero
            raise NumericalBreakdown("phase 1 terminated without optimum")
        if float(c1[tab.basis] @ tab.rhs) > _PHASE1_TOL * scale:
            y_cert = _basis_duals(A_full, c1, tab.basis, kept, m)
            duals = _map_duals(y_cert, row_sign, maximize)
            return LpSolution(Status.INFEASIBLE, float("nan"), np.zeros(n),
                              duals, np.zeros(n), tab.iterations)
        _evict_artificials(tab, artificial, pivot_tol, kept)

    c2 = np.zeros(N)
    c2[:n_split] = c_split * col_f
    outcome, ray_col = tab.run(c2, allowed=~artificial, max_iter=max_iter)
    if outcome == "unbounded":
        ray = np.zeros(n)
        d_scaled = np.zeros(N)
        d_scaled[ray_col] = 1.0
        d_scaled[tab.basis] = -tab.T[:, ray_col]
        for idx, (j, sgn) in enumerate(col_var):
            ray[j] += sgn * col_f[idx] * d_scaled[idx]
        value = float("inf") if maximize else float("-inf")
        return LpSolution(Status.UNBOUNDED, value, ray, np.zeros(m),
                          np.zeros(n), tab.iterations)

    # Recompute the vertex and its duals from the basis on original data.
    c_full = np.zeros(N)
    c_full[:n_split] = c_split
    try:
        B = A_full[np.ix_(kept, list(tab.basis))]
        x_basic = np.linalg.solve(B, b_int[kept])
        y_kept = np.linalg.solve(B.T, c_full[tab.basis])
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdown(f"singular basis at optimum: {exc}") from exc

    x_full = np.zeros(N)
    x_full[tab.basis] = x_basic
    primal = np.zeros(n)
    for idx, (j, sgn) in enumerate(col_var):
        primal[j] += sgn * x_full[idx]

    y_int = np.zeros(m)
    y_int[kept] = y_kept
    duals = _map_duals(y_int, row_sign, maximize)
    reduced = c_ext - A_ext.T @ duals
    objective = float(c_ext @ primal)

    _check_solution(problem, A_ext, b_ext, relations, primal, duals,
                    objective, feas_tol, gap_tol)
    return LpSolution(Status.OPTIMAL, objective, primal, duals, reduced, tab.iterations)


def _solve_unconstrained(problem: LpProblem) -> LpSolution:
    n = problem.n_vars
    sign = -1.0 if problem.sense is Sense.MAX else 1.0
    c = sign * problem.objective
    ray = np.zeros(n)
    for j, bound in enumerate(problem.var_bounds):
        if bound is VarBound.FREE and c[j] != 0.0:
            ray[j] = -np.sign(c[j])
        elif c[j] < 0.0:
            ray[j] = 1.0
    if np.any(ray != 0.0):
        value = float("inf") if problem.sense is Sense.MAX else float("-inf")
        return LpSolution(Status.UNBOUNDED, value, ray, np.zeros(0), np.zeros(n), 0)
    return LpSolution(Status.OPTIMAL, 0.0, np.zeros(n), np.zeros(0),
                      problem.objective.copy(), 0)


def _evict_artificials(tab: _Tableau, artificial: np.ndarray, pivot_tol: float,
                       kept: list) -> None:
    """Pivot basic artificials out; drop rows that turn out redundant."""
    drop = []
    for pr in range(len(tab.basis)):
        if not artificial[tab.basis[pr]]:
            continue
        row = tab.T[pr]
        candidates = np.flatnonzero((np.abs(row) > pivot_tol) & ~artificial & ~tab.in_basis)
        if candidates.size:
            pc = int(candidates[np.argmax(np.abs(row[candidates]))])
            tab.pivot(pr, pc)
        else:
            drop.append(pr)
    if drop:
        keep_rows = [k for k in range(len(tab.basis)) if k not in set(drop)]
        tab.T = tab.T[keep_rows]
        tab.rhs = tab.rhs[keep_rows]
        removed = tab.basis[drop]
        tab.in_basis[removed] = False
        tab.basis = tab.basis[keep_rows]
        kept[:] = [kept[k] for k in keep_rows]


def _basis_duals(A_full: np.ndarray, c_full: np.ndarray, basis: np.ndarray,
                 kept: list, m: int) -> np.ndarray:
    B = A_full[np.ix_(kept, list(basis))]
    try:
        y = np.linalg.solve(B.T, c_full[basis])
    except np.linalg.LinAlgError:
        y = np.linalg.lstsq(B.T, c_full[basis], rcond=None)[0]
    out = np.zeros(m)
    out[kept] = y
    return out


def _map_duals(y_int: np.ndarray, row_sign: np.ndarray, maximize: bool) -> np.ndarray:
    y = row_sign * y_int
    return -y if maximize else y


def _check_solution(problem, A_ext, b_ext, relations, primal, duals,
                    objective, feas_tol, gap_tol) -> None:
    lhs = A_ext @ primal
    for k, rel in enumerate(relations):
        denom = max(1.0, float(np.max(np.abs(A_ext[k]))), abs(b_ext[k]))
        resid = lhs[k] - b_ext[k]
        if rel is Relation.LE:
            viol = resid
        elif rel is Relation.GE:
            viol = -resid
        else:
            viol = abs(resid)
        if viol > feas_tol * denom:
            raise NumericalBreakdown(
                f"row {problem.rows[k].label or k} infeasible by {viol:.3e}"
            )
    for j, bound in enumerate(problem.var_bounds):
        if bound is VarBound.NON_NEGATIVE and primal[j] < -feas_tol:
            raise NumericalBreakdown(f"variable {j} negative: {primal[j]:.3e}")
    gap = abs(objective - float(duals @ b_ext))
    if gap > gap_tol * max(1.0, abs(objective)):
        raise NumericalBreakdown(f"primal/dual objective gap {gap:.3e}")
