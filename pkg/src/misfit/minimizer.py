"""Surrogate minimization over the edge-inequality polytope.

The feasible region couples one variable per vertex through edge rows
x_i + x_j <= 1 + w, a single cardinality row sum x_j = k + (N-k)*w, and the
box w <= x_j <= 1, with chosen vertices pinnable to 1.  The separable cost
sum_j f(x_j) is driven down by conditional-gradient iteration: each step
minimizes the linearized cost over the polytope (a plain LP), then moves
along the segment by exact line search.  Iterates stay feasible by
construction because they are convex combinations of polytope points.

Near-integer assignments are read off by dominance: a vertex whose value
clears (1 + w)/2 by a safety margin cannot share an edge with another such
vertex, so the cleared set is independent whenever the assignment is close
to feasible.

The product caps x_i * x_j <= ((1+w)/2)^2 - eps and x_i * x_j <= w (per
edge) are nonconvex, so when enabled they enter as exterior quadratic
penalties rather than constraints, with the weight raised over three stages
(1e2, 1e4, 1e6 times the scale of the target cost); the second cap is what
pushes interior points out toward {w, 1} assignments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .costfn import Params, compensated_sum, desired_cost, eval_cost, first_derivative
from .graph import Graph, is_independent
from .lpcore import LinearProgram, solve_lp

__all__ = [
    "PolytopeSpec",
    "MinimizeOptions",
    "FractionalAssignment",
    "SolveOutcome",
    "PolytopeInfeasibleError",
    "build_polytope_lp",
    "minimize",
    "round_solution",
    "solve_step_b",
    "emit_assignment",
]


class PolytopeInfeasibleError(ValueError):
    """The linear system has no feasible point (checked before iterating)."""


@dataclass(frozen=True)
class PolytopeSpec:
    """The feasible region and acceptance band for one minimization run."""

    graph: Graph
    k: int
    w: float
    fixed_ones: tuple = ()
    band: float = 0.0

    def __post_init__(self) -> None:
        n = self.graph.n
        if not (0 <= self.k <= n):
            raise ValueError(f"need 0 <= k <= {n}, got k={self.k}")
        if not (0.0 < self.w < 1.0):
            raise ValueError(f"need 0 < w < 1, got w={self.w}")
        if self.band < 0.0:
            raise ValueError(f"band must be non-negative, got {self.band}")
        fixed = tuple(self.fixed_ones)
        if len(set(fixed)) != len(fixed):
            raise ValueError("fixed vertices repeat")
        for v in fixed:
            if not (1 <= v <= n):
                raise ValueError(f"fixed vertex {v} out of range 1..{n}")
        if len(fixed) > self.k:
            raise ValueError(
                f"{len(fixed)} fixed vertices exceed the target size {self.k}")
        if not is_independent(self.graph, fixed):
            raise ValueError("fixed vertices share an edge")
        object.__setattr__(self, "fixed_ones", fixed)

    @property
    def target_sum(self) -> float:
        return self.k + (self.graph.n - self.k) * self.w


@dataclass(frozen=True)
class MinimizeOptions:
    """Iteration controls.  margin=None means 10 * tol_feas."""

    max_iters: int = 200
    gap_tol: float = 1e-6
    nonlinear_cuts: bool = False
    epsilon_cut: float = 1e-3
    away_steps: bool = False
    margin: float | None = None
    tol_feas: float = 1e-8

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.gap_tol < 0.0 or self.epsilon_cut < 0.0:
            raise ValueError("tolerances must be non-negative")
        if self.margin is not None and self.margin <= 0.0:
            raise ValueError("margin must be positive")

    @property
    def effective_margin(self) -> float:
        return 10.0 * self.tol_feas if self.margin is None else self.margin


@dataclass(frozen=True)
class FractionalAssignment:
    """One point of the polytope with its cost and iteration diagnostics.

    objective is the bare separable cost (penalty terms excluded); fw_gap is
    the final linearization gap, computed with whatever objective the last
    iteration used (penalized when cuts were on).
    """

    values: dict = field(default_factory=dict)   # vertex id -> value
    objective: float = math.nan
    fw_gap: float = math.inf
    iterations: int = 0
    residual: float = math.inf


@dataclass(frozen=True)
class SolveOutcome:
    """Minimization plus recognition.  assignment is None only when the
    linear system itself is infeasible."""

    assignment: FractionalAssignment | None
    recognized: frozenset | None
    status: str   # integer-found | fractional | infeasible | not-converged


def build_polytope_lp(spec: PolytopeSpec) -> LinearProgram:
    """One variable per vertex, one row per edge, one cardinality row."""
    lp = LinearProgram()
    fixed = set(spec.fixed_ones)
    for v in range(1, spec.graph.n + 1):
        if v in fixed:
            lp.add_variable(f"x{v}", lo=1.0, up=1.0)
        else:
            lp.add_variable(f"x{v}", lo=spec.w, up=1.0)
    for (i, j) in sorted(spec.graph.edges):
        lp.add_constraint(f"edge.{i}.{j}", {f"x{i}": 1.0, f"x{j}": 1.0},
                          "<=", 1.0 + spec.w)
    lp.add_constraint("cardinality",
                      {f"x{v}": 1.0 for v in range(1, spec.graph.n + 1)},
                      "=", spec.target_sum)
    return lp


def _assignment_residual(spec: PolytopeSpec, xs: dict) -> float:
    worst = abs(math.fsum(xs.values()) - spec.target_sum)
    for (i, j) in spec.graph.edges:
        worst = max(worst, xs[i] + xs[j] - (1.0 + spec.w))
    for v, value in xs.items():
        lo = 1.0 if v in spec.fixed_ones else spec.w
        worst = max(worst, lo - value, value - 1.0)
    return max(worst, 0.0)


class _Objective:
    """Separable cost plus (optionally) the exterior penalty for the edge
    product caps, with its gradient."""

    def __init__(self, spec: PolytopeSpec, params: Params,
                 epsilon_cut: float) -> None:
        self.spec = spec
        self.params = params
        self.cap_pair = ((1.0 + spec.w) / 2.0) ** 2 - epsilon_cut
        self.cap_low = spec.w
        self.rho = 0.0
        self.edges = sorted(spec.graph.edges)
        self.neighbors: dict[int, list[int]] = {v: [] for v in
                                                range(1, spec.graph.n + 1)}
        for (i, j) in self.edges:
            self.neighbors[i].append(j)
            self.neighbors[j].append(i)

    def bare(self, xs: dict) -> float:
        terms = []
        for v in sorted(xs):
            try:
                value = eval_cost(self.params, xs[v])
            except ValueError as err:
                raise ValueError(
                    f"cost undefined at vertex {v} (x = {xs[v]!r}): {err}"
                ) from None
            if not math.isfinite(value):
                raise ValueError(
                    f"cost is not finite at vertex {v} (x = {xs[v]!r})")
            terms.append(value)
        return compensated_sum(terms)

    def penalty(self, xs: dict) -> float:
        if self.rho == 0.0:
            return 0.0
        total = 0.0
        for (i, j) in self.edges:
            prod = xs[i] * xs[j]
            total += max(0.0, prod - self.cap_pair) ** 2
            total += max(0.0, prod - self.cap_low) ** 2
        return self.rho * total

    def value(self, xs: dict) -> float:
        return self.bare(xs) + self.penalty(xs)

    def gradient(self, xs: dict) -> dict:
        grad = {}
        for v in xs:
            try:
                grad[v] = first_derivative(self.params, xs[v])
            except ValueError as err:
                raise ValueError(
                    f"cost undefined at vertex {v} (x = {xs[v]!r}): {err}"
                ) from None
        if self.rho != 0.0:
            for (i, j) in self.edges:
                prod = xs[i] * xs[j]
                pull = (max(0.0, prod - self.cap_pair)
                        + max(0.0, prod - self.cap_low))
                if pull > 0.0:
                    grad[i] += 2.0 * self.rho * pull * xs[j]
                    grad[j] += 2.0 * self.rho * pull * xs[i]
        return grad


def _line_search(obj: _Objective, xs: dict, direction: dict,
                 t_max: float) -> float:
    """Exact minimization of the one-dimensional slice t -> obj(x + t*d) on
    [0, t_max]: bisection on the directional derivative, with a coarse-grid
    fallback for slices whose derivative changes sign more than once.  Only
    a step that does not increase the cost is ever returned."""

    def point(t: float) -> dict:
        return {v: xs[v] + t * direction[v] for v in xs}

    def slope(t: float) -> float:
        g = obj.gradient(point(t))
        return math.fsum(g[v] * direction[v] for v in sorted(xs))

    candidates = [0.0, t_max]
    lo, hi = 0.0, t_max
    s_lo, s_hi = slope(lo), slope(hi)
    if s_lo >= 0.0:
        candidates.append(0.0)
    elif s_hi <= 0.0:
        candidates.append(t_max)
    else:
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if slope(mid) < 0.0:
                lo = mid
            else:
                hi = mid
        candidates.append(0.5 * (lo + hi))
    # coarse sweep guards against slices with several stationary points
    candidates.extend(t_max * i / 16.0 for i in range(1, 16))
    base = obj.value(xs)
    best_t, best_v = 0.0, base
    for t in candidates:
        value = obj.value(point(t))
        if value < best_v:
            best_t, best_v = t, value
    return best_t


def _initial_point(lp: LinearProgram, spec: PolytopeSpec,
                   tol_feas: float) -> dict:
    """A deterministic feasible point that depends only on the instance:
    the solver's phase-1 vertex for the zero objective."""
    lp.set_objective("min", {})
    sol = solve_lp(lp, tol_feas=tol_feas)
    if sol.status != "optimal":
        raise PolytopeInfeasibleError(
            f"linear system is {sol.status}: no feasible assignment for "
            f"k={spec.k}, w={spec.w}")
    return {v: float(sol.values[f"x{v}"]) for v in range(1, spec.graph.n + 1)}


def _solve_lmo(lp: LinearProgram, grad: dict, tol_feas: float) -> dict:
    lp.set_objective("min", {f"x{v}": g for v, g in grad.items()})
    sol = solve_lp(lp, tol_feas=tol_feas)
    if sol.status != "optimal":
        raise PolytopeInfeasibleError(
            f"linear subproblem came back {sol.status}")
    return {v: float(sol.values[f"x{v}"]) for v in grad}


def minimize(spec: PolytopeSpec, params: Params,
             opts: MinimizeOptions = MinimizeOptions()) -> FractionalAssignment:
    """Conditional-gradient descent of the separable cost over the polytope.

    Every iterate is a convex combination of feasible points, so linear
    feasibility is maintained to solver tolerance throughout.  With the
    product caps enabled the run repeats over three rising penalty weights,
    splitting the iteration budget evenly across stages.
    """
    lp = build_polytope_lp(spec)
    xs = _initial_point(lp, spec, opts.tol_feas)
    obj = _Objective(spec, params, opts.epsilon_cut)

    if opts.nonlinear_cuts:
        scale = max(1.0, abs(desired_cost(params, spec.graph.n, spec.k)))
        stages = [1e2 * scale, 1e4 * scale, 1e6 * scale]
    else:
        stages = [0.0]
    per_stage = max(1, opts.max_iters // len(stages))

    # active-vertex bookkeeping for the optional away-direction steps
    weights: dict[tuple, float] = {tuple(sorted(xs.items())): 1.0}
    iterations = 0
    gap = math.inf

    for rho in stages:
        obj.rho = rho
        for _ in range(per_stage):
            grad = obj.gradient(xs)
            target = _solve_lmo(lp, grad, opts.tol_feas)
            gap = math.fsum(grad[v] * (xs[v] - target[v]) for v in sorted(xs))
            if gap <= opts.gap_tol:
                break
            direction = {v: target[v] - xs[v] for v in xs}
            t_max = 1.0
            away_key = None
            if opts.away_steps and len(weights) > 1:
                away_key = max(weights,
                               key=lambda key: math.fsum(
                                   grad[v] * value for v, value in key))
                away_vertex = dict(away_key)
                away_gap = math.fsum(grad[v] * (away_vertex[v] - xs[v])
                                     for v in sorted(xs))
                if away_gap > gap:
                    lam = weights[away_key]
                    if lam < 1.0:
                        direction = {v: xs[v] - away_vertex[v] for v in xs}
                        t_max = lam / (1.0 - lam)
                    else:
                        away_key = None
                else:
                    away_key = None
            step = _line_search(obj, xs, direction, t_max)
            iterations += 1
            if step <= 0.0:
                break
            xs = {v: xs[v] + step * direction[v] for v in xs}
            if opts.away_steps:
                if away_key is None:
                    target_key = tuple(sorted(target.items()))
                    weights = {key: value * (1.0 - step)
                               for key, value in weights.items()}
                    weights[target_key] = (weights.get(target_key, 0.0)
                                           + step)
                else:
                    weights = {key: value * (1.0 + step)
                               for key, value in weights.items()}
                    weights[away_key] -= step
                weights = {key: value for key, value in weights.items()
                           if value > 1e-14}

    return FractionalAssignment(values=xs,
                                objective=obj.bare(xs),
                                fw_gap=gap,
                                iterations=iterations,
                                residual=_assignment_residual(spec, xs))


def round_solution(a: FractionalAssignment, w: float, margin: float, *,
                   graph: Graph, k: int) -> frozenset | None:
    """Read an integer answer off an assignment by edge dominance: keep the
    vertices whose value clears (1 + w)/2 by the margin.  Returns None when
    the cleared set is not independent or has the wrong size (recognition
    failure, not an error)."""
    threshold = (1.0 + w) / 2.0 + margin
    chosen = frozenset(v for v, value in a.values.items() if value > threshold)
    if len(chosen) != k or not is_independent(graph, chosen):
        return None
    return chosen


def solve_step_b(spec: PolytopeSpec, params: Params,
                 opts: MinimizeOptions = MinimizeOptions()) -> SolveOutcome:
    """Minimize, then try to recognize an integer answer.

    integer-found requires both a recognized size-k independent set and a
    final cost within spec.band of the target cost (plus the unavoidable
    last-place rounding of sums at the cost's own scale); recognition alone
    is not treated as proof.
    """
    try:
        assignment = minimize(spec, params, opts)
    except PolytopeInfeasibleError:
        return SolveOutcome(assignment=None, recognized=None,
                            status="infeasible")
    margin = max(opts.effective_margin, assignment.residual)
    recognized = round_solution(assignment, spec.w, margin,
                                graph=spec.graph, k=spec.k)
    if recognized is not None:
        desired = desired_cost(params, spec.graph.n, spec.k)
        slack = spec.band + 1e-9 * max(1.0, abs(desired))
        if abs(assignment.objective - desired) <= slack:
            return SolveOutcome(assignment=assignment, recognized=recognized,
                                status="integer-found")
    if assignment.fw_gap <= opts.gap_tol:
        return SolveOutcome(assignment=assignment, recognized=None,
                            status="fractional")
    return SolveOutcome(assignment=assignment, recognized=None,
                        status="not-converged")


def emit_assignment(a: FractionalAssignment) -> str:
    """One "vertex value" line per vertex, sorted by vertex id."""
    lines = [f"{v} {a.values[v]:.10g}" for v in sorted(a.values)]
    return "\n".join(lines) + "\n"
