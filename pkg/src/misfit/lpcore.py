"""Self-contained linear-programming engine with bounded variables.

Implements a two-phase bounded-variable primal simplex over the homogeneous
logical form: every constraint row a.x (rel) b becomes a logical variable
s = a.x with bounds encoding the relation ([-inf, b] for <=, [b, b] for =,
[b, +inf] for >=), so the working system is [A | -I].(x; s) = 0 and all data
lives in the bounds.  Phase 1 minimizes the total bound infeasibility of the
basic variables with a composite (iteration-recomputed) costing; phase 2
optimizes the user objective.  Bland's smallest-index rule makes every solve
deterministic and cycle-free; the basis inverse is kept dense (numpy) with
product-form updates and periodic refactorization.

Intended scale: hundreds to a few thousand rows.  Geometric-mean row/column
scaling (on by default) tames the wide coefficient ranges produced by the
cost-function fitting models (1e-9 .. 1e10).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LinearProgram",
    "LpSolution",
    "Violation",
    "FeasibilityReport",
    "solve_lp",
    "check_feasible",
    "emit_text",
]

_RELATIONS = ("<=", "=", ">=")


@dataclass(frozen=True)
class _Row:
    name: str
    coeffs: dict
    relation: str
    rhs: float


class LinearProgram:
    """Mutable LP builder: named bounded variables, sparse constraint rows,
    and an optional linear objective.  Immutable by convention once handed to
    the solver (the solver never mutates it)."""

    def __init__(self) -> None:
        self._var_index: dict[str, int] = {}
        self.var_names: list[str] = []
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.rows: list[_Row] = []
        self._row_names: set[str] = set()
        self.objective_sense: str = "min"
        self.objective: dict[str, float] = {}

    # -- construction -----------------------------------------------------
    def add_variable(self, name: str, lo: float = 0.0, up: float = math.inf) -> None:
        if name in self._var_index:
            raise ValueError(f"variable {name!r} already declared")
        if not (lo <= up):
            raise ValueError(f"variable {name!r}: lower bound {lo} exceeds upper {up}")
        self._var_index[name] = len(self.var_names)
        self.var_names.append(name)
        self.lower.append(float(lo))
        self.upper.append(float(up))

    def add_constraint(self, name: str, coeffs: dict, relation: str, rhs: float) -> None:
        if relation not in _RELATIONS:
            raise ValueError(f"relation must be one of {_RELATIONS}, got {relation!r}")
        if name in self._row_names:
            raise ValueError(f"constraint {name!r} already declared")
        for v in coeffs:
            if v not in self._var_index:
                raise ValueError(f"constraint {name!r} references undeclared variable {v!r}")
        self._row_names.add(name)
        self.rows.append(_Row(name=name, coeffs=dict(coeffs), relation=relation, rhs=float(rhs)))

    def set_objective(self, sense: str, coeffs: dict) -> None:
        if sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        for v in coeffs:
            if v not in self._var_index:
                raise ValueError(f"objective references undeclared variable {v!r}")
        self.objective_sense = sense
        self.objective = dict(coeffs)

    # -- introspection ----------------------------------------------------
    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def variable_index(self, name: str) -> int:
        return self._var_index[name]

    def bounds_of(self, name: str) -> tuple[float, float]:
        i = self._var_index[name]
        return self.lower[i], self.upper[i]


@dataclass(frozen=True)
class LpSolution:
    """status: optimal | infeasible | unbounded | iteration-limit.

    values always holds the best-known point (for infeasible/iteration-limit
    statuses it is the point the solver stopped at)."""

    status: str
    values: dict
    objective_value: float
    iterations: int
    infeasibility: float


# -- scaling ---------------------------------------------------------------

def _geometric_scaling(cols: list[dict], m: int, n: int, passes: int = 2):
    """Geometric-mean row/column scaling factors for the structural matrix."""
    row_scale = np.ones(m)
    col_scale = np.ones(n)
    for _ in range(passes):
        # rows
        lo = np.full(m, np.inf)
        hi = np.zeros(m)
        for j in range(n):
            for i, a in cols[j].items():
                v = abs(a) * col_scale[j] * row_scale[i]
                if v > 0.0:
                    lo[i] = min(lo[i], v)
                    hi[i] = max(hi[i], v)
        for i in range(m):
            if hi[i] > 0.0 and np.isfinite(lo[i]):
                row_scale[i] /= math.sqrt(lo[i] * hi[i])
        # columns
        for j in range(n):
            vals = [abs(a) * col_scale[j] * row_scale[i] for i, a in cols[j].items() if a != 0.0]
            if vals:
                col_scale[j] /= math.sqrt(min(vals) * max(vals))
    return row_scale, col_scale


# -- the simplex core ------------------------------------------------------

_BASIC, _NB_LO, _NB_UP, _NB_FREE = 0, 1, 2, 3


class _Simplex:
    def __init__(self, lp: LinearProgram, tol_feas: float, max_iters: int, scale: bool):
        self.tol_feas = tol_feas
        self.pivot_tol = 1e-10
        self.dual_tol = 1e-9
        self.max_iters = max_iters
        self.iterations = 0
        m, n = lp.n_rows, lp.n_vars
        self.m, self.n = m, n
        self.total = n + m

        # sparse structural columns
        cols: list[dict] = [dict() for _ in range(n)]
        for i, row in enumerate(lp.rows):
            for vname, a in row.coeffs.items():
                if a != 0.0:
                    cols[lp.variable_index(vname)][i] = float(a)

        if scale and m > 0 and n > 0:
            self.row_scale, self.col_scale = _geometric_scaling(cols, m, n)
        else:
            self.row_scale, self.col_scale = np.ones(m), np.ones(n)

        # scaled column storage for all n+m columns: structural then logical.
        # Scaled structural entry: r_i * a_ij * c_j ; logical col i: -r_i... the
        # logical for row i keeps coefficient -1 by folding the row scale into
        # the logical variable itself (s'_i = r_i * s_i), so its bounds scale.
        self.cols: list[dict] = []
        for j in range(n):
            self.cols.append({i: a * self.row_scale[i] * self.col_scale[j]
                              for i, a in cols[j].items()})
        for i in range(m):
            self.cols.append({i: -1.0})

        # bounds in scaled space: x_j = c_j * x'_j  =>  x' in [lo/c, up/c]
        lo = np.empty(self.total)
        up = np.empty(self.total)
        for j in range(n):
            lo[j] = lp.lower[j] / self.col_scale[j]
            up[j] = lp.upper[j] / self.col_scale[j]
        for i, row in enumerate(lp.rows):
            b = row.rhs * self.row_scale[i]
            if row.relation == "<=":
                lo[n + i], up[n + i] = -math.inf, b
            elif row.relation == ">=":
                lo[n + i], up[n + i] = b, math.inf
            else:
                lo[n + i], up[n + i] = b, b
        self.lo, self.up = lo, up

        # objective in scaled space (minimization)
        sign = 1.0 if lp.objective_sense == "min" else -1.0
        self.cost = np.zeros(self.total)
        for vname, cval in lp.objective.items():
            j = lp.variable_index(vname)
            self.cost[j] = sign * cval * self.col_scale[j]

        # initial basis: all logicals; structurals nonbasic at a finite bound
        self.basis = list(range(n, n + m))
        self.in_basis = np.zeros(self.total, dtype=bool)
        self.in_basis[n:] = True
        self.vstat = np.empty(self.total, dtype=np.int8)
        self.values = np.zeros(self.total)
        for j in range(self.total):
            if self.in_basis[j]:
                self.vstat[j] = _BASIC
            elif math.isfinite(lo[j]):
                self.vstat[j] = _NB_LO
                self.values[j] = lo[j]
            elif math.isfinite(up[j]):
                self.vstat[j] = _NB_UP
                self.values[j] = up[j]
            else:
                self.vstat[j] = _NB_FREE
                self.values[j] = 0.0

        self.Binv = np.eye(m) * -1.0  # basis matrix of all logicals is -I
        self.pivots_since_refactor = 0
        self._recompute_basics()

    # -- linear algebra helpers ------------------------------------------
    def _col_vector(self, j: int) -> np.ndarray:
        a = np.zeros(self.m)
        for i, v in self.cols[j].items():
            a[i] = v
        return a

    def _refactorize(self) -> None:
        B = np.zeros((self.m, self.m))
        for p, j in enumerate(self.basis):
            for i, v in self.cols[j].items():
                B[i, p] = v
        self.Binv = np.linalg.inv(B)
        self.pivots_since_refactor = 0

    def _recompute_basics(self) -> None:
        rhs = np.zeros(self.m)
        for j in range(self.total):
            if not self.in_basis[j] and self.values[j] != 0.0:
                for i, v in self.cols[j].items():
                    rhs[i] += v * self.values[j]
        xb = -self.Binv @ rhs
        for p, j in enumerate(self.basis):
            self.values[j] = xb[p]

    # -- feasibility bookkeeping -----------------------------------------
    def _bound_tol(self, j: int) -> float:
        lo, up = self.lo[j], self.up[j]
        ref = max(abs(lo) if math.isfinite(lo) else 0.0,
                  abs(up) if math.isfinite(up) else 0.0)
        return self.tol_feas * max(1.0, ref)

    def _phase1_cost(self) -> tuple[np.ndarray, float]:
        """Composite phase-1 basic costs (+1 above upper, -1 below lower) and
        the current total infeasibility."""
        cb = np.zeros(self.m)
        total = 0.0
        for p, j in enumerate(self.basis):
            v = self.values[j]
            tol = self._bound_tol(j)
            if v > self.up[j] + tol:
                cb[p] = 1.0
                total += v - self.up[j]
            elif v < self.lo[j] - tol:
                cb[p] = -1.0
                total += self.lo[j] - v
        return cb, total

    # -- core iteration ---------------------------------------------------
    def _price_and_enter(self, cb: np.ndarray, use_cost: bool):
        """Return (entering j, direction, reduced cost) by Bland's rule, or None."""
        y = cb @ self.Binv
        for j in range(self.total):
            if self.in_basis[j]:
                continue
            d = (self.cost[j] if use_cost else 0.0)
            col = self.cols[j]
            d -= math.fsum(y[i] * v for i, v in col.items())
            st = self.vstat[j]
            if st == _NB_LO and d < -self.dual_tol:
                return j, +1.0, d
            if st == _NB_UP and d > self.dual_tol:
                return j, -1.0, d
            if st == _NB_FREE and abs(d) > self.dual_tol:
                return j, (-1.0 if d > 0 else +1.0), d
        return None

    def _ratio_test(self, j_enter: int, direction: float, alpha: np.ndarray,
                    phase1: bool):
        """Find the blocking step.  Returns (t, leave_pos or -1 for a bound
        flip, leave_to) where leave_to is the bound the leaving basic lands on
        ('lo'/'up'); t may be math.inf (unbounded)."""
        t_best = math.inf
        leave_pos = -1
        leave_to = ""
        # entering variable's own span
        span = self.up[j_enter] - self.lo[j_enter]
        if math.isfinite(span):
            t_best = span
        tie = 1e-15
        for p in range(self.m):
            a = alpha[p]
            if abs(a) <= self.pivot_tol:
                continue
            jb = self.basis[p]
            rate = -direction * a  # d x_basic / d t
            v = self.values[jb]
            tol = self._bound_tol(jb)
            if rate > 0.0:
                if phase1 and v > self.up[jb] + tol:
                    continue  # already above upper: moving further crosses no breakpoint
                if phase1 and v < self.lo[jb] - tol:
                    target, to = self.lo[jb], "lo"  # improving row blocks at the bound it heals
                else:
                    target, to = self.up[jb], "up"
            else:
                if phase1 and v < self.lo[jb] - tol:
                    continue
                if phase1 and v > self.up[jb] + tol:
                    target, to = self.up[jb], "up"
                else:
                    target, to = self.lo[jb], "lo"
            if not math.isfinite(target):
                continue
            t = max(0.0, (target - v) / rate)
            if t < t_best - tie:
                t_best, leave_pos, leave_to = t, p, to
            elif t <= t_best + tie and leave_pos >= 0 and jb < self.basis[leave_pos]:
                leave_pos, leave_to = p, to  # Bland tie-break: smallest column index
        return t_best, leave_pos, leave_to

    def _apply_step(self, j_enter: int, direction: float, alpha: np.ndarray,
                    t: float, leave_pos: int, leave_to: str) -> None:
        # move basics
        for p in range(self.m):
            a = alpha[p]
            if a != 0.0:
                self.values[self.basis[p]] -= direction * a * t
        new_val = self.values[j_enter] + direction * t
        if leave_pos < 0:
            # bound flip: entering variable crosses to its other bound
            self.values[j_enter] = new_val
            self.vstat[j_enter] = _NB_UP if direction > 0 else _NB_LO
            return
        j_leave = self.basis[leave_pos]
        self.values[j_enter] = new_val
        self.values[j_leave] = self.up[j_leave] if leave_to == "up" else self.lo[j_leave]
        self.vstat[j_leave] = _NB_UP if leave_to == "up" else _NB_LO
        self.in_basis[j_leave] = False
        self.basis[leave_pos] = j_enter
        self.in_basis[j_enter] = True
        self.vstat[j_enter] = _BASIC
        # product-form basis-inverse update
        piv = alpha[leave_pos]
        bp = self.Binv[leave_pos] / piv
        self.Binv -= np.outer(alpha, bp)
        self.Binv[leave_pos] = bp
        self.pivots_since_refactor += 1
        if self.pivots_since_refactor >= 64:
            self._refactorize()
            self._recompute_basics()

    def _run_phase(self, phase1: bool) -> str:
        while True:
            if self.iterations >= self.max_iters:
                return "iteration-limit"
            if phase1:
                cb, infeas = self._phase1_cost()
                if infeas <= 0.0:
                    return "feasible"
            else:
                cb = self.cost[self.basis].astype(float)
            pick = self._price_and_enter(cb, use_cost=not phase1)
            if pick is None:
                return "infeasible" if phase1 else "optimal"
            j, direction, _ = pick
            alpha = self.Binv @ self._col_vector(j)
            t, leave_pos, leave_to = self._ratio_test(j, direction, alpha, phase1)
            if math.isinf(t):
                if phase1:
                    # cannot happen for a bounded-below merit function; treat
                    # as numerical failure surfaced as iteration-limit
                    return "iteration-limit"
                return "unbounded"
            self._apply_step(j, direction, alpha, t, leave_pos, leave_to)
            self.iterations += 1

    def solve(self) -> tuple[str, float]:
        st = "iteration-limit"
        for _ in range(3):
            st = self._run_phase(phase1=True)
            if st != "feasible":
                _, infeas = self._phase1_cost()
                return st, infeas
            self._refactorize()
            self._recompute_basics()
            st = self._run_phase(phase1=False)
            self._refactorize()
            self._recompute_basics()
            _, infeas = self._phase1_cost()
            if st != "optimal" or infeas <= 0.0:
                return st, infeas
            # feasibility drifted during phase 2: repair and re-optimize
        _, infeas = self._phase1_cost()
        return ("iteration-limit" if infeas > 0.0 else st), infeas

    def extract(self, lp: LinearProgram) -> dict:
        return {name: self.values[j] * self.col_scale[j]
                for j, name in enumerate(lp.var_names)}


def solve_lp(lp: LinearProgram, tol_feas: float = 1e-8,
             max_iters: int = 20000, scale: bool = True) -> LpSolution:
    """Solve the LP; deterministic for identical input.

    Returns status optimal / infeasible / unbounded / iteration-limit; the
    values map always carries the stopping point.
    """
    if lp.n_rows == 0:
        # pure bound problem: each variable sits at its cheapest bound
        values = {}
        sign = 1.0 if lp.objective_sense == "min" else -1.0
        feasible = True
        for name, lo, up in zip(lp.var_names, lp.lower, lp.upper):
            c = sign * lp.objective.get(name, 0.0)
            if c > 0.0:
                v = lo
            elif c < 0.0:
                v = up
            else:
                v = lo if math.isfinite(lo) else (up if math.isfinite(up) else 0.0)
            if not math.isfinite(v):
                return LpSolution("unbounded", {n: 0.0 for n in lp.var_names},
                                  math.nan, 0, 0.0)
            values[name] = v
            feasible = feasible and lo <= up
        obj = math.fsum(lp.objective.get(n, 0.0) * values[n] for n in lp.var_names)
        return LpSolution("optimal" if feasible else "infeasible", values, obj, 0, 0.0)

    sx = _Simplex(lp, tol_feas=tol_feas, max_iters=max_iters, scale=scale)
    status, infeas = sx.solve()
    if status == "feasible":
        status = "optimal"
    values = sx.extract(lp)
    obj = math.fsum(lp.objective.get(n, 0.0) * values[n] for n in sorted(values))
    return LpSolution(status=status, values=values, objective_value=obj,
                      iterations=sx.iterations,
                      infeasibility=float(infeas))


# -- independent feasibility checking --------------------------------------

@dataclass(frozen=True)
class Violation:
    """One violated row or bound.

    raw is the unscaled residual (how far the relation is missed); scaled
    divides raw by the row magnitude max(1, largest |coefficient|, |rhs|)
    rounded up to the next power of two, the same relative feasibility
    measure production LP codes apply after equilibration (power-of-two
    scale factors keep the division exact in binary arithmetic)."""

    kind: str        # "constraint" or "bound"
    name: str
    relation: str
    raw: float
    scaled: float
    value: float
    rhs: float


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple
    checked_rows: int
    checked_bounds: int

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def worst(self) -> float:
        return max((v.scaled for v in self.violations), default=0.0)

    def names(self) -> list[str]:
        return [v.name for v in self.violations]

    def __str__(self) -> str:
        if self.ok:
            return (f"feasible: {self.checked_rows} rows and "
                    f"{self.checked_bounds} bounds satisfied")
        lines = [f"{len(self.violations)} violation(s):"]
        for v in self.violations:
            lines.append(f"  {v.kind} {v.name}: value {v.value:.12g} "
                         f"{v.relation} {v.rhs:.12g} missed by {v.raw:.6g} "
                         f"(scaled {v.scaled:.6g})")
        return "\n".join(lines)


def _pow2_norm(magnitude: float) -> float:
    """Round max(1, magnitude) up to the next power of two.

    Mirrors the power-of-two equilibration factors classical LP codes use so
    the residual division is exact in binary floating point."""
    m = max(1.0, magnitude)
    return float(2.0 ** math.ceil(math.log2(m)))


def check_feasible(lp: LinearProgram, point: dict, tol: float = 1e-6) -> FeasibilityReport:
    """Evaluate every constraint and bound of lp at point, independently of the
    solver.  A row is reported when its scaled violation exceeds tol; scaled =
    raw / pow2(max(1, max |coeff|, |rhs|)) where pow2 rounds up to the next
    power of two.  Term sums use compensated summation in a deterministic
    (name-sorted) order."""
    missing = [n for n in lp.var_names if n not in point]
    if missing:
        raise ValueError(f"point leaves variable(s) unassigned: {missing[:5]}")
    out: list[Violation] = []
    for row in lp.rows:
        lhs = math.fsum(a * point[v] for v, a in sorted(row.coeffs.items()))
        if row.relation == "<=":
            raw = lhs - row.rhs
        elif row.relation == ">=":
            raw = row.rhs - lhs
        else:
            raw = abs(lhs - row.rhs)
        norm = _pow2_norm(max(max((abs(a) for a in row.coeffs.values()),
                                  default=0.0), abs(row.rhs)))
        scaled = raw / norm
        if scaled > tol:
            out.append(Violation(kind="constraint", name=row.name,
                                 relation=row.relation, raw=raw, scaled=scaled,
                                 value=lhs, rhs=row.rhs))
    checked_bounds = 0
    for name, lo, up in zip(lp.var_names, lp.lower, lp.upper):
        v = point[name]
        checked_bounds += 2
        if math.isfinite(lo):
            raw = lo - v
            scaled = raw / _pow2_norm(abs(lo))
            if scaled > tol:
                out.append(Violation(kind="bound", name=name, relation=">=",
                                     raw=raw, scaled=scaled, value=v, rhs=lo))
        if math.isfinite(up):
            raw = v - up
            scaled = raw / _pow2_norm(abs(up))
            if scaled > tol:
                out.append(Violation(kind="bound", name=name, relation="<=",
                                     raw=raw, scaled=scaled, value=v, rhs=up))
    return FeasibilityReport(violations=tuple(out), checked_rows=lp.n_rows,
                             checked_bounds=checked_bounds)


def emit_text(lp: LinearProgram) -> str:
    """Debug emitter: the model as plain equations, one constraint per line."""
    lines = [f"{lp.objective_sense} " + " + ".join(
        f"{c:g}*{v}" for v, c in sorted(lp.objective.items())) if lp.objective
        else "feasibility"]
    for row in lp.rows:
        terms = " + ".join(f"{a:g}*{v}" for v, a in sorted(row.coeffs.items()))
        lines.append(f"{row.name}: {terms} {row.relation} {row.rhs:g}")
    for name, lo, up in zip(lp.var_names, lp.lower, lp.upper):
        lines.append(f"bound: {lo:g} <= {name} <= {up:g}")
    return "\n".join(lines) + "\n"
