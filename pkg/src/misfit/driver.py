"""Orchestration: floor-value sweeps, target-size search, and end-to-end
two-step runs (fit a separating cost, then minimize it over the polytope).

Fitted coefficients transfer across runs: a cost fitted once for a given
(N, k) separates desired assignments for every graph of that shape, so a
sweep can reuse one fit across the whole floor range (the polytope's floor
moves while the cost stays put), or refit at each point when asked.

Search proceeds upward from a greedy independent set: the greedy set
confirms its own size immediately, and each larger size is attempted
through a ladder of fitting configurations until one run recognizes an
integer answer or the ladder is exhausted.  A failed ladder leaves the size
unconfirmed — failure is never read as proof that no such set exists.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from .costfn import Params
from .graph import Graph, greedy_independent_set, is_independent
from .minimizer import (
    MinimizeOptions,
    PolytopeSpec,
    SolveOutcome,
    solve_step_b,
)
from .paramfit import FitConfig, fit_parameters

__all__ = [
    "SweepConfig",
    "SearchOutcome",
    "TraceEntry",
    "sweep_points",
    "sweep_w",
    "search_k",
    "run_two_step",
    "emit_trace",
    "DEFAULT_RETRIES",
]

# Fitting retry ladder for search: (eps, lowCurv) pairs tried in order.
DEFAULT_RETRIES = ((20.0, 1500), (20.0, 800), (30.0, 500))


@dataclass(frozen=True)
class TraceEntry:
    """One structured record per run."""

    k: int
    w: float
    status: str
    iterations: int
    seconds: float

    def __str__(self) -> str:
        return (f"k={self.k} w={self.w:.10g} status={self.status} "
                f"iterations={self.iterations} seconds={self.seconds:.2f}")


@dataclass(frozen=True)
class SweepConfig:
    """A floor-value range with per-run minimizer options."""

    w_lo: float
    w_hi: float
    w_step: float
    opts: MinimizeOptions = MinimizeOptions()
    stop_mode: str = "collect-all"   # or "first-hit"
    band: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 < self.w_lo <= self.w_hi < 1.0):
            raise ValueError(
                f"need 0 < w_lo <= w_hi < 1, got [{self.w_lo}, {self.w_hi}]")
        if self.w_step <= 0.0:
            raise ValueError(f"w_step must be positive, got {self.w_step}")
        if self.stop_mode not in ("collect-all", "first-hit"):
            raise ValueError(f"unknown stop_mode {self.stop_mode!r}")
        if self.band < 0.0:
            raise ValueError(f"band must be non-negative, got {self.band}")


@dataclass(frozen=True)
class SearchOutcome:
    """Best confirmed target size with its witness and the full run trace."""

    best_k: int
    witness: frozenset
    trace: tuple = ()


def sweep_points(sweep: SweepConfig) -> list[float]:
    """The floor values visited: w_lo, w_lo + step, ... up to w_hi
    (inclusive within one part in 1e9 of a step)."""
    points = []
    i = 0
    while True:
        w = sweep.w_lo + i * sweep.w_step
        if w > sweep.w_hi + 1e-9 * sweep.w_step:
            break
        points.append(min(w, sweep.w_hi))
        i += 1
    return points


def _quantized_cfg(template: FitConfig, k: int, w: float) -> FitConfig:
    """The fitting configuration whose derived floor is nearest to w (the
    floor is the ratio of two integer knobs, so refits snap onto that
    grid)."""
    low = round(w * template.intvl)
    low = max(1, min(template.intvl - 1, low))
    return replace(template, k=k, lowCurv=low)


def _infeasible_fit() -> SolveOutcome:
    return SolveOutcome(assignment=None, recognized=None,
                        status="infeasible-fit")


def sweep_w(g: Graph, k: int, cfg_template: FitConfig, sweep: SweepConfig,
            refit: bool = False, params: Params | None = None,
            jobs: int = 1, trace: list | None = None) -> list:
    """Solve across the floor range, in ascending order.

    Transfer mode (refit=False): coefficients are fitted once from the
    template (or taken from params when given) and reused at every floor
    value.  Refit mode: Step A re-runs at each point on the template's
    quantization grid.  first-hit mode stops after the first run that
    recognizes an integer answer.  Per-run failures land in the outcome
    list (and the optional trace sink); they never abort the sweep.
    """
    points = sweep_points(sweep)
    if not refit and params is None:
        report = fit_parameters(replace(cfg_template, k=k)
                                if cfg_template.k != k else cfg_template)
        params = report.params   # None on a failed fit

    def run_one(w: float) -> tuple:
        start = time.perf_counter()
        run_params = params
        if refit:
            report = fit_parameters(_quantized_cfg(cfg_template, k, w))
            run_params = report.params
        if run_params is None:
            outcome = _infeasible_fit()
        else:
            spec = PolytopeSpec(graph=g, k=k, w=w, band=sweep.band)
            outcome = solve_step_b(spec, run_params, sweep.opts)
        return w, outcome, time.perf_counter() - start

    results: list = []
    if jobs > 1 and sweep.stop_mode == "collect-all":
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_one, points))
    else:
        rows = []
        for w in points:
            row = run_one(w)
            rows.append(row)
            if sweep.stop_mode == "first-hit" and row[1].status == "integer-found":
                break
    for w, outcome, seconds in rows:
        iterations = outcome.assignment.iterations if outcome.assignment else 0
        if trace is not None:
            trace.append(TraceEntry(k=k, w=w, status=outcome.status,
                                    iterations=iterations, seconds=seconds))
        results.append((w, outcome))
    return results


def run_two_step(g: Graph, cfg: FitConfig, k: int, partial: tuple = (),
                 params: Params | None = None, band: float = 0.0,
                 opts: MinimizeOptions = MinimizeOptions()) -> SolveOutcome:
    """Fit (or transfer) a separating cost, then minimize it with the given
    vertices pinned to one.  A failed fit yields status "infeasible-fit"."""
    if params is None:
        report = fit_parameters(replace(cfg, k=k) if cfg.k != k else cfg)
        if report.params is None:
            return _infeasible_fit()
        params = report.params
    spec = PolytopeSpec(graph=g, k=k, w=cfg.w, fixed_ones=tuple(partial),
                        band=band)
    return solve_step_b(spec, params, opts)


def search_k(g: Graph, cfg_template: FitConfig, mode: str = "upward",
             k_hi: int | None = None, retries: tuple = DEFAULT_RETRIES,
             band: float = 0.0,
             opts: MinimizeOptions = MinimizeOptions()) -> SearchOutcome:
    """Find the largest target size with a recognized witness.

    upward: seed with a greedy independent set (its size is confirmed by
    construction), then attempt each next size through the retry ladder,
    stopping at the first size the ladder cannot confirm.  binary: bisect
    on [1, k_hi], moving the bottom marker past confirmed sizes and the top
    marker below unconfirmed ones.  Unconfirmed sizes are recorded in the
    trace, never proven impossible.
    """
    if mode not in ("upward", "binary"):
        raise ValueError(f"unknown search mode {mode!r}")
    if k_hi is None:
        k_hi = g.n
    if not (1 <= k_hi <= g.n):
        raise ValueError(f"need 1 <= k_hi <= {g.n}, got {k_hi}")
    trace: list[TraceEntry] = []

    def attempt(k: int) -> frozenset | None:
        """Run the ladder at size k; a recognized witness confirms it."""
        for eps, low in retries:
            cfg = replace(cfg_template, k=k, eps=eps,
                          lowCurv=min(low, cfg_template.intvl - 1))
            start = time.perf_counter()
            outcome = run_two_step(g, cfg, k, band=band, opts=opts)
            seconds = time.perf_counter() - start
            iterations = (outcome.assignment.iterations
                          if outcome.assignment else 0)
            status = outcome.status
            if status != "integer-found":
                status = f"unconfirmed({status})"
            trace.append(TraceEntry(k=k, w=cfg.w, status=status,
                                    iterations=iterations, seconds=seconds))
            if outcome.status == "integer-found":
                return outcome.recognized
        return None

    if mode == "upward":
        seed = frozenset(greedy_independent_set(g))
        best_k, witness = len(seed), seed
        k = best_k + 1
        while k <= k_hi:
            found = attempt(k)
            if found is None:
                break
            best_k, witness = k, found
            k += 1
        return SearchOutcome(best_k=best_k, witness=witness,
                             trace=tuple(trace))

    bottom, top = 1, k_hi
    best_k, witness = 0, frozenset()
    while bottom <= top:
        k = (bottom + top) // 2
        found = attempt(k)
        if found is not None:
            best_k, witness = k, found
            bottom = k + 1
        else:
            top = k - 1
    return SearchOutcome(best_k=best_k, witness=witness, trace=tuple(trace))


def emit_trace(entries) -> str:
    """One line per run: k, floor value, status, iterations, seconds."""
    return "\n".join(str(e) for e in entries) + ("\n" if entries else "")
