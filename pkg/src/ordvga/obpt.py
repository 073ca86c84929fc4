"""Stage I model: best-practice assessment of one DMU.

For the assessed DMU the model prices every metric in a common virtual
currency, requires each virtual price (metric value times unit price,
with a Likert penalty adjustment where an ordinal bound binds) to reach
a unified goal price, and measures the gap between total virtual input
and total virtual output.  A zero gap marks a top-tier DMU.

One LP solve per DMU: the adjustment program (TAP) is solved directly,
its primal vector carries the intensities and adjustment ratios, and its
row duals carry the prices of the mirror gap program (TVG).  Step I runs
at a goal price of $1; Step II rescales prices so the assessed DMU's
virtual input is exactly $1, which confines the gap to [0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .matrix import DecisionMatrix, MetricPartition
from .simplex import (
    LpProblem,
    LpRow,
    NumericalBreakdown,
    Relation,
    Sense,
    Status,
    VarBound,
    solve,
    tolerance_scale,
)

__all__ = [
    "Stage",
    "PriceVector",
    "AdjustmentVector",
    "ScscPair",
    "ScscReport",
    "StageResult",
    "SolverFailure",
    "ScscViolation",
    "build_obpt_tap",
    "build_obpt_tvg",
    "assess_obpt",
    "verify_scsc_obpt",
    "TOP_TIER_GAP_TOL",
    "PEER_INTENSITY_TOL",
    "SCSC_TOL",
]

TOP_TIER_GAP_TOL = 1e-6
PEER_INTENSITY_TOL = 1e-9
SCSC_TOL = 1e-6


class Stage(str, Enum):
    BEST_PRACTICE = "best_practice"
    SUPER = "super"


class SolverFailure(RuntimeError):
    def __init__(self, dmu: str, detail: str):
        super().__init__(f"assessment of {dmu!r} failed: {detail}")
        self.dmu, self.detail = dmu, detail


class ScscViolation(RuntimeError):
    def __init__(self, dmu: str, report: "ScscReport"):
        super().__init__(
            f"complementary slackness violated for {dmu!r}: "
            f"max |product| = {report.max_abs_product:.3e}"
        )
        self.dmu, self.report = dmu, report


@dataclass(frozen=True)
class PriceVector:
    """Virtual unit prices: tau is the unified goal price, v/u price the
    input/output metrics and dx/dy adjust ordinal metrics at a bound."""

    tau: float
    v: dict[str, float]
    u: dict[str, float]
    dx: dict[str, float]
    dy: dict[str, float]


@dataclass(frozen=True)
class AdjustmentVector:
    """Dimensionless solution of the adjustment program: per-metric
    reduction/expansion ratios and per-DMU intensities."""

    q: dict[str, float]
    p: dict[str, float]
    pi: dict[str, float]


@dataclass(frozen=True)
class ScscPair:
    condition: str
    left: float
    right: float
    product: float
    strict: bool  # exactly one factor at zero


@dataclass(frozen=True)
class ScscReport:
    pairs: tuple[ScscPair, ...]
    max_abs_product: float

    def non_strict(self) -> tuple[ScscPair, ...]:
        return tuple(p for p in self.pairs if not p.strict)


@dataclass(frozen=True)
class StageResult:
    """Complete per-DMU outcome of one assessment stage."""

    dmu: str
    stage: Stage
    tau_star: float
    gap_star: float
    t_bar: float
    prices: PriceVector
    adjustments: AdjustmentVector
    alpha_star: float
    beta_star: float
    pairs: dict[str, tuple[float, float]]  # dmu -> (virtual input, virtual output)
    targets_x: dict[str, float]
    targets_y: dict[str, float]
    targets_likert: dict[str, int]  # nearest Likert point per ordinal metric
    benchmark_alpha: float
    benchmark_beta: float
    inefficiency: float
    efficiency: float
    peers: tuple[str, ...]
    scsc: ScscReport
    metric_prices: dict[str, float]
    internal_objective: float


def build_obpt_tap(matrix: DecisionMatrix, o: str, tau: float = 1.0) -> LpProblem:
    """Adjustment program: maximize the total adjustment price.

    Variables are intensities (one per DMU) plus input/output adjustment
    ratios, all nonnegative.  Input and output balances are equalities;
    ordinal metrics add a bound row keeping the adjusted position inside
    its Likert scale.
    """
    part = matrix.partition()
    j0 = matrix.dmu_index(o)
    n, m, s = matrix.n_dmus, part.m, part.s
    n_vars = n + m + s
    q_off, p_off = n, n + m

    objective = np.zeros(n_vars)
    objective[q_off:] = tau

    labels = (
        [f"pi[{name}]" for name in matrix.dmu_names]
        + [f"q[{spec.name}]" for spec in part.input_specs]
        + [f"p[{spec.name}]" for spec in part.output_specs]
    )

    rows = []
    for i, spec in enumerate(part.input_specs):
        coeffs = np.zeros(n_vars)
        coeffs[:n] = part.x[i]
        coeffs[q_off + i] = part.x[i, j0]
        rows.append(LpRow(coeffs, Relation.EQ, part.x[i, j0], f"input[{spec.name}]"))
    for r, spec in enumerate(part.output_specs):
        coeffs = np.zeros(n_vars)
        coeffs[:n] = -part.y[r]
        coeffs[p_off + r] = part.y[r, j0]
        rows.append(LpRow(coeffs, Relation.EQ, -part.y[r, j0], f"output[{spec.name}]"))
    for k, i in enumerate(part.ordinal_inputs):
        coeffs = np.zeros(n_vars)
        coeffs[q_off + i] = part.x[i, j0]
        rhs = part.x[i, j0] - part.x_lower[k]
        rows.append(LpRow(coeffs, Relation.LE, rhs, f"likert_floor[{part.input_specs[i].name}]"))
    for k, r in enumerate(part.ordinal_outputs):
        coeffs = np.zeros(n_vars)
        coeffs[p_off + r] = part.y[r, j0]
        rhs = part.y_upper[k] - part.y[r, j0]
        rows.append(LpRow(coeffs, Relation.LE, rhs, f"likert_ceiling[{part.output_specs[r].name}]"))

    return LpProblem(Sense.MAX, objective, tuple(rows), var_labels=tuple(labels))


def build_obpt_tvg(matrix: DecisionMatrix, o: str, tau: float = 1.0) -> LpProblem:
    """Gap program: minimize virtual input minus virtual output.

    Unit prices are free, Likert adjustments nonnegative.  Every DMU's
    virtual gap at the chosen prices stays nonnegative and every virtual
    price is floored at the goal price.
    """
    part = matrix.partition()
    j0 = matrix.dmu_index(o)
    n, m, s = matrix.n_dmus, part.m, part.s
    io, ro = len(part.ordinal_inputs), len(part.ordinal_outputs)
    u_off, dx_off, dy_off = m, m + s, m + s + io
    n_vars = m + s + io + ro

    xo = part.x[:, j0]
    yo = part.y[:, j0]

    objective = np.zeros(n_vars)
    objective[:m] = xo
    objective[u_off:dx_off] = -yo
    for k, i in enumerate(part.ordinal_inputs):
        objective[dx_off + k] = xo[i] - part.x_lower[k]
    for k, r in enumerate(part.ordinal_outputs):
        objective[dy_off + k] = part.y_upper[k] - yo[r]

    labels = (
        [f"v[{spec.name}]" for spec in part.input_specs]
        + [f"u[{spec.name}]" for spec in part.output_specs]
        + [f"dx[{part.input_specs[i].name}]" for i in part.ordinal_inputs]
        + [f"dy[{part.output_specs[r].name}]" for r in part.ordinal_outputs]
    )
    bounds = [VarBound.FREE] * (m + s) + [VarBound.NON_NEGATIVE] * (io + ro)

    rows = []
    for j, name in enumerate(matrix.dmu_names):
        coeffs = np.zeros(n_vars)
        coeffs[:m] = part.x[:, j]
        coeffs[u_off:dx_off] = -part.y[:, j]
        rows.append(LpRow(coeffs, Relation.GE, 0.0, f"dmu[{name}]"))
    for i, spec in enumerate(part.input_specs):
        coeffs = np.zeros(n_vars)
        coeffs[i] = xo[i]
        if i in part.ordinal_inputs:
            coeffs[dx_off + part.ordinal_inputs.index(i)] = xo[i]
        rows.append(LpRow(coeffs, Relation.GE, tau, f"price_floor[{spec.name}]"))
    for r, spec in enumerate(part.output_specs):
        coeffs = np.zeros(n_vars)
        coeffs[u_off + r] = yo[r]
        if r in part.ordinal_outputs:
            coeffs[dy_off + part.ordinal_outputs.index(r)] = yo[r]
        rows.append(LpRow(coeffs, Relation.GE, tau, f"price_floor[{spec.name}]"))

    return LpProblem(Sense.MIN, objective, tuple(rows),
                     var_bounds=tuple(bounds), var_labels=tuple(labels))


def _split_tap_solution(part: MetricPartition, n: int, sol):
    """Pull (pi, q, p) from the TAP primal and (v, u, dx, dy) from its duals."""
    m, s = part.m, part.s
    io = len(part.ordinal_inputs)
    pi = np.maximum(sol.primal[:n], 0.0)
    q = np.maximum(sol.primal[n:n + m], 0.0)
    p = np.maximum(sol.primal[n + m:], 0.0)
    v = sol.row_duals[:m].copy()
    u = sol.row_duals[m:m + s].copy()
    dx = sol.row_duals[m + s:m + s + io].copy()
    dy = sol.row_duals[m + s + io:].copy()
    return pi, q, p, v, u, dx, dy


def _virtual_sides(part: MetricPartition, xo, yo, v, u, dx, dy,
                   stage: Stage) -> tuple[float, float]:
    """Total virtual input and output of the assessed DMU.

    Ordinal metrics contribute their adjusted virtual price: the penalty
    term moves the price toward the Likert bound that the stage can hit
    (lower input bound and upper output bound in Stage I, the opposite
    pair in Stage II).
    """
    alpha = float(xo @ v)
    beta = float(yo @ u)
    if stage is Stage.BEST_PRACTICE:
        for k, i in enumerate(part.ordinal_inputs):
            alpha += dx[k] * (xo[i] - part.x_lower[k])
        for k, r in enumerate(part.ordinal_outputs):
            beta += dy[k] * (yo[r] - part.y_upper[k])
    else:
        for k, i in enumerate(part.ordinal_inputs):
            alpha += dx[k] * (part.x_upper[k] - xo[i])
        for k, r in enumerate(part.ordinal_outputs):
            beta += dy[k] * (part.y_lower[k] - yo[r])
    return alpha, beta


def _metric_prices(part: MetricPartition, xo, yo, v, u, dx, dy,
                   stage: Stage) -> dict[str, float]:
    """Per-metric virtual cost; sums to virtual input plus virtual output."""
    out: dict[str, float] = {}
    for i, spec in enumerate(part.input_specs):
        e = xo[i] * v[i]
        if i in part.ordinal_inputs:
            k = part.ordinal_inputs.index(i)
            if stage is Stage.BEST_PRACTICE:
                e = xo[i] * (v[i] + dx[k]) - part.x_lower[k] * dx[k]
            else:
                e = xo[i] * (v[i] - dx[k]) + part.x_upper[k] * dx[k]
        out[spec.name] = float(e)
    for r, spec in enumerate(part.output_specs):
        e = yo[r] * u[r]
        if r in part.ordinal_outputs:
            k = part.ordinal_outputs.index(r)
            if stage is Stage.BEST_PRACTICE:
                e = yo[r] * (u[r] + dy[k]) - part.y_upper[k] * dy[k]
            else:
                e = yo[r] * (u[r] - dy[k]) + part.y_lower[k] * dy[k]
        out[spec.name] = float(e)
    return out


def _nearest_likert(part: MetricPartition, targets_x, targets_y) -> dict[str, int]:
    out: dict[str, int] = {}
    for k, i in enumerate(part.ordinal_inputs):
        spec = part.input_specs[i]
        out[spec.name] = int(np.clip(round(targets_x[spec.name]), spec.lower, spec.upper))
    for k, r in enumerate(part.ordinal_outputs):
        spec = part.output_specs[r]
        out[spec.name] = int(np.clip(round(targets_y[spec.name]), spec.lower, spec.upper))
    return out


def assess_obpt(matrix: DecisionMatrix, o: str) -> StageResult:
    """Run the two-step Stage I assessment of DMU ``o``.

    Step I solves the adjustment program at a goal price of $1; Step II
    rescales the price side by 1/(virtual input) so the assessed DMU's
    virtual input is $1 while the adjustment side stays unchanged.
    """
    part = matrix.partition()
    j0 = matrix.dmu_index(o)
    n = matrix.n_dmus
    xo = part.x[:, j0]
    yo = part.y[:, j0]

    problem = build_obpt_tap(matrix, o, tau=1.0)
    try:
        sol = solve(problem)
    except NumericalBreakdown as exc:
        raise SolverFailure(o, str(exc)) from exc
    if sol.status is not Status.OPTIMAL:
        raise SolverFailure(o, f"adjustment program is {sol.status.value}")

    pi, q, p, v, u, dx, dy = _split_tap_solution(part, n, sol)
    if dx.size and dx.min() < -1e-6 or dy.size and dy.min() < -1e-6:
        raise SolverFailure(o, "negative Likert price adjustment in duals")
    dx = np.maximum(dx, 0.0)
    dy = np.maximum(dy, 0.0)

    delta_sharp = sol.objective_value
    alpha_sharp, beta_sharp = _virtual_sides(part, xo, yo, v, u, dx, dy, Stage.BEST_PRACTICE)
    if abs((alpha_sharp - beta_sharp) - delta_sharp) > 1e-6 * max(1.0, abs(delta_sharp)):
        raise SolverFailure(o, "gap formula does not match the solved objective")
    if alpha_sharp <= 0.0:
        raise NumericalBreakdown(f"virtual input of {o!r} is non-positive: {alpha_sharp!r}")

    t_bar = 1.0 / alpha_sharp
    tau_star = t_bar
    v *= t_bar
    u *= t_bar
    dx *= t_bar
    dy *= t_bar
    alpha_star = alpha_sharp * t_bar
    beta_star = beta_sharp * t_bar
    gap_star = delta_sharp * t_bar

    pairs: dict[str, tuple[float, float]] = {}
    for j, name in enumerate(matrix.dmu_names):
        if j == j0:
            pairs[name] = (alpha_star, beta_star)
        else:
            pairs[name] = (float(part.x[:, j] @ v), float(part.y[:, j] @ u))

    targets_x = {spec.name: float(xo[i] * (1.0 - q[i])) for i, spec in enumerate(part.input_specs)}
    targets_y = {spec.name: float(yo[r] * (1.0 + p[r])) for r, spec in enumerate(part.output_specs)}
    x_hat = xo * (1.0 - q)
    y_hat = yo * (1.0 + p)
    benchmark_alpha = float(x_hat @ v)
    benchmark_beta = float(y_hat @ u)

    peers = tuple(
        name for j, name in enumerate(matrix.dmu_names) if pi[j] > PEER_INTENSITY_TOL * tolerance_scale()
    )

    result = StageResult(
        dmu=o,
        stage=Stage.BEST_PRACTICE,
        tau_star=tau_star,
        gap_star=gap_star,
        t_bar=t_bar,
        prices=PriceVector(
            tau=tau_star,
            v={spec.name: float(v[i]) for i, spec in enumerate(part.input_specs)},
            u={spec.name: float(u[r]) for r, spec in enumerate(part.output_specs)},
            dx={part.input_specs[i].name: float(dx[k]) for k, i in enumerate(part.ordinal_inputs)},
            dy={part.output_specs[r].name: float(dy[k]) for k, r in enumerate(part.ordinal_outputs)},
        ),
        adjustments=AdjustmentVector(
            q={spec.name: float(q[i]) for i, spec in enumerate(part.input_specs)},
            p={spec.name: float(p[r]) for r, spec in enumerate(part.output_specs)},
            pi={name: float(pi[j]) for j, name in enumerate(matrix.dmu_names)},
        ),
        alpha_star=alpha_star,
        beta_star=beta_star,
        pairs=pairs,
        targets_x=targets_x,
        targets_y=targets_y,
        targets_likert=_nearest_likert(part, targets_x, targets_y),
        benchmark_alpha=benchmark_alpha,
        benchmark_beta=benchmark_beta,
        inefficiency=gap_star / alpha_star,
        efficiency=beta_star / alpha_star,
        peers=peers,
        scsc=ScscReport((), 0.0),
        metric_prices=_metric_prices(part, xo, yo, v, u, dx, dy, Stage.BEST_PRACTICE),
        internal_objective=gap_star,
    )
    scsc = verify_scsc_obpt(matrix, result)
    result = replace(result, scsc=scsc)
    if scsc.max_abs_product > SCSC_TOL * tolerance_scale():
        raise ScscViolation(o, scsc)
    return result


def _is_zero(value: float, ref: float) -> bool:
    return abs(value) <= 1e-7 * max(1.0, abs(ref))


def _make_pair(condition: str, left: float, right: float, *, ref_left: float,
               ref_right: float = 1.0) -> ScscPair:
    left_zero = _is_zero(left, ref_left)
    right_zero = _is_zero(right, ref_right)
    return ScscPair(
        condition=condition,
        left=float(left),
        right=float(right),
        product=float(left * right),
        strict=left_zero != right_zero,
    )


def verify_scsc_obpt(matrix: DecisionMatrix, result: StageResult) -> ScscReport:
    """Evaluate every Stage I complementary-slackness product numerically.

    Each pair multiplies a constraint slack by its partner variable; all
    products must vanish at an exact optimum.  Pairs where both factors
    are zero are flagged non-strict (the solution satisfies weak but not
    strong complementarity there).
    """
    part = matrix.partition()
    j0 = matrix.dmu_index(result.dmu)
    xo = part.x[:, j0]
    yo = part.y[:, j0]
    names = matrix.dmu_names
    pi = np.array([result.adjustments.pi[name] for name in names])
    q = np.array([result.adjustments.q[spec.name] for spec in part.input_specs])
    p = np.array([result.adjustments.p[spec.name] for spec in part.output_specs])
    v = np.array([result.prices.v[spec.name] for spec in part.input_specs])
    u = np.array([result.prices.u[spec.name] for spec in part.output_specs])
    tau = result.tau_star

    pairs: list[ScscPair] = []
    for i, spec in enumerate(part.input_specs):
        slack = float(part.x[i] @ pi - xo[i] * (1.0 - q[i]))
        pairs.append(_make_pair(f"input_balance[{spec.name}]", slack, v[i], ref_left=xo[i]))
    for r, spec in enumerate(part.output_specs):
        slack = float(part.y[r] @ pi - yo[r] * (1.0 + p[r]))
        pairs.append(_make_pair(f"output_balance[{spec.name}]", slack, u[r], ref_left=yo[r]))
    for k, i in enumerate(part.ordinal_inputs):
        spec = part.input_specs[i]
        d = result.prices.dx[spec.name]
        slack = (1.0 - q[i]) * xo[i] - part.x_lower[k]
        pairs.append(_make_pair(f"likert_floor[{spec.name}]", slack, d, ref_left=xo[i]))
    for k, r in enumerate(part.ordinal_outputs):
        spec = part.output_specs[r]
        d = result.prices.dy[spec.name]
        slack = part.y_upper[k] - (1.0 + p[r]) * yo[r]
        pairs.append(_make_pair(f"likert_ceiling[{spec.name}]", slack, d, ref_left=yo[r]))
    for j, name in enumerate(names):
        gap = float(part.x[:, j] @ v - part.y[:, j] @ u)
        pairs.append(_make_pair(f"peer_gap[{name}]", gap, pi[j], ref_left=1.0))
    for i, spec in enumerate(part.input_specs):
        price = xo[i] * v[i]
        if i in part.ordinal_inputs:
            price += xo[i] * result.prices.dx[spec.name]
        pairs.append(_make_pair(f"price_floor[{spec.name}]", price - tau, q[i], ref_left=tau))
    for r, spec in enumerate(part.output_specs):
        price = yo[r] * u[r]
        if r in part.ordinal_outputs:
            price += yo[r] * result.prices.dy[spec.name]
        pairs.append(_make_pair(f"price_floor[{spec.name}]", price - tau, p[r], ref_left=tau))

    worst = max((abs(pair.product) for pair in pairs), default=0.0)
    return ScscReport(tuple(pairs), worst)
