"""Tests for surrogate minimization over the edge-inequality polytope.

Oracle routes: small convex instances are compared against a dense grid over
the feasible region; degenerate polytopes (a unique feasible point) are
solved by hand; rounding soundness is fuzzed over random near-feasible
assignments using the edge-dominance argument.
"""

import math
import random

import pytest

from misfit.costfn import LegacyParams, PolyParams, desired_cost, eval_cost
from misfit.graph import Graph, is_independent, parse_graph, random_graph
from misfit.lpcore import solve_lp
from misfit.minimizer import (
    FractionalAssignment,
    MinimizeOptions,
    PolytopeInfeasibleError,
    PolytopeSpec,
    SolveOutcome,
    build_polytope_lp,
    emit_assignment,
    minimize,
    round_solution,
    solve_step_b,
)
from misfit.paramfit import FitConfig, fit_parameters

K4 = Graph(n=4, edges=frozenset({(1, 2), (1, 3), (1, 4),
                                 (2, 3), (2, 4), (3, 4)}))
TRIANGLE = Graph(n=3, edges=frozenset({(1, 2), (1, 3), (2, 3)}))
SINGLE_EDGE = Graph(n=2, edges=frozenset({(1, 2)}))
EDGELESS6 = Graph(n=6, edges=frozenset())

QUAD = PolyParams(a2=1.0, a1=-0.3, w=0.01)       # strictly convex
AFFINE = PolyParams(C=3.0, a1=2.0, w=0.01)

# Quartic whose derivative (x - 0.7575)(x - 0.2525)(x - 2) vanishes at the
# two interior points of the single-edge slice x1 + x2 = 1.01, making the
# slice minimum an interior point that still clears the dominance threshold.
TILTED = PolyParams(a4=0.25, a3=-3.01 / 3.0, a2=2.21126875 / 2.0,
                    a1=-0.3825375, w=0.01)


@pytest.fixture(scope="module")
def demo_graph() -> Graph:
    import importlib.resources as resources
    text = (resources.files("misfit") / "data" / "demo25.graph").read_text()
    return parse_graph(text)


@pytest.fixture(scope="module")
def fresh_params():
    cfg = FitConfig(N=25, k=4, eps=20.0, lowCurv=1500, tightened=True,
                    convexity=False, objective="feasibility")
    report = fit_parameters(cfg)
    assert report.ok
    return report.params


class TestPolytopeSpec:
    def test_target_sum(self):
        spec = PolytopeSpec(graph=EDGELESS6, k=2, w=0.25)
        assert spec.target_sum == 2 + 4 * 0.25

    @pytest.mark.parametrize("kwargs", [
        dict(k=-1, w=0.1),
        dict(k=7, w=0.1),              # more than the vertex count
        dict(k=2, w=0.0),
        dict(k=2, w=1.0),
        dict(k=2, w=0.1, band=-1.0),
        dict(k=2, w=0.1, fixed_ones=(1, 1)),
        dict(k=2, w=0.1, fixed_ones=(0,)),
        dict(k=2, w=0.1, fixed_ones=(7,)),
        dict(k=1, w=0.1, fixed_ones=(1, 2)),   # more fixed than k
    ])
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            PolytopeSpec(graph=EDGELESS6, **kwargs)

    def test_rejects_adjacent_fixed(self):
        with pytest.raises(ValueError, match="share an edge"):
            PolytopeSpec(graph=SINGLE_EDGE, k=2, w=0.1, fixed_ones=(1, 2))


class TestBuildPolytope:
    def test_shape(self):
        lp = build_polytope_lp(PolytopeSpec(graph=K4, k=2, w=0.01))
        assert lp.var_names == ["x1", "x2", "x3", "x4"]
        names = [r.name for r in lp.rows]
        assert names[-1] == "cardinality"
        assert len(names) == K4.m + 1

    def test_bounds_and_pins(self):
        spec = PolytopeSpec(graph=EDGELESS6, k=2, w=0.25, fixed_ones=(3,))
        lp = build_polytope_lp(spec)
        i3 = lp.var_names.index("x3")
        assert lp.lower[i3] == 1.0 and lp.upper[i3] == 1.0
        i1 = lp.var_names.index("x1")
        assert lp.lower[i1] == 0.25 and lp.upper[i1] == 1.0

    def test_edge_rows(self):
        lp = build_polytope_lp(PolytopeSpec(graph=SINGLE_EDGE, k=1, w=0.1))
        row = lp.rows[0]
        assert row.name == "edge.1.2"
        assert row.relation == "<=" and row.rhs == 1.1


class TestMinimize:
    def test_affine_cost_is_flat(self):
        # With a fixed coordinate sum an affine cost is constant over the
        # polytope, and that constant is the target cost.
        a = minimize(PolytopeSpec(graph=EDGELESS6, k=2, w=0.01), AFFINE)
        assert a.objective == pytest.approx(desired_cost(AFFINE, 6, 2),
                                            rel=1e-12)
        assert a.residual < 1e-9

    def test_strictly_convex_matches_hand_optimum(self):
        # On the triangle with k=1 the equalized point x = 0.34 is interior
        # feasible, and for f(x) = x^2 - 0.3x the minimum there is
        # 3 * (0.34^2 - 0.3 * 0.34) = 0.0408.
        spec = PolytopeSpec(graph=TRIANGLE, k=1, w=0.01)
        a = minimize(spec, QUAD, MinimizeOptions(max_iters=500, gap_tol=1e-9))
        assert a.objective == pytest.approx(0.0408, abs=1e-8)
        assert a.fw_gap <= 1e-9
        assert a.residual < 1e-9

    def test_matches_dense_grid(self):
        # Independent route: enumerate the feasible region on a fine grid.
        spec = PolytopeSpec(graph=TRIANGLE, k=1, w=0.01)
        a = minimize(spec, QUAD, MinimizeOptions(max_iters=500, gap_tol=1e-9))
        target = spec.target_sum
        best = math.inf
        steps = 200
        for i in range(steps + 1):
            x1 = 0.01 + (1.0 - 0.01) * i / steps
            for j in range(steps + 1):
                x2 = 0.01 + (1.0 - 0.01) * j / steps
                x3 = target - x1 - x2
                if not (0.01 - 1e-9 <= x3 <= 1.0 + 1e-9):
                    continue
                if max(x1 + x2, x1 + x3, x2 + x3) > 1.01 + 1e-9:
                    continue
                value = sum(eval_cost(QUAD, x) for x in (x1, x2, x3))
                best = min(best, value)
        assert a.objective <= best + 1e-4

    def test_unique_point_polytope(self):
        # On K4 with k=2 the cardinality row meets the edge rows only where
        # every coordinate equals (1+w)/2.
        a = minimize(PolytopeSpec(graph=K4, k=2, w=0.01), QUAD)
        for value in a.values.values():
            assert value == pytest.approx(0.505, abs=1e-9)

    def test_all_floor_when_target_empty(self):
        a = minimize(PolytopeSpec(graph=TRIANGLE, k=0, w=0.01), QUAD)
        assert all(v == pytest.approx(0.01, abs=1e-12)
                   for v in a.values.values())
        assert a.residual < 1e-12

    def test_infeasible_raises(self):
        # K4 cannot reach a coordinate sum of 3 + w: every edge caps pair
        # sums at 1 + w, so the total caps at 2(1 + w).
        with pytest.raises(PolytopeInfeasibleError):
            minimize(PolytopeSpec(graph=K4, k=3, w=0.01), QUAD)

    def test_pole_contact_names_vertex(self):
        # Pole sits exactly at the floor value, so the very first objective
        # evaluation (at a vertex with floor coordinates) must fail loudly.
        pole = LegacyParams(p=2.0, t=1.0, M=1.0, r=1.0, s=-0.1, y=1.0, w=0.1)
        with pytest.raises(ValueError, match="vertex"):
            minimize(PolytopeSpec(graph=EDGELESS6, k=2, w=0.1), pole)

    def test_descends_from_initial_point(self):
        # Route-independent descent check: the result never costs more than
        # the phase-1 starting vertex, recomputed here straight from the LP.
        rng = random.Random(7)
        for trial in range(10):
            g = random_graph(8, 0.35, seed=100 + trial)
            params = PolyParams(a3=rng.uniform(-2, 2), a2=rng.uniform(-2, 2),
                                a1=rng.uniform(-2, 2), w=0.02)
            spec = PolytopeSpec(graph=g, k=2, w=0.02)
            lp = build_polytope_lp(spec)
            lp.set_objective("min", {})
            sol = solve_lp(lp)
            assert sol.status == "optimal"
            start = sum(eval_cost(params, float(sol.values[f"x{v}"]))
                        for v in range(1, 9))
            a = minimize(spec, params, MinimizeOptions(max_iters=80))
            assert a.objective <= start + 1e-9
            assert a.residual < 1e-7

    def test_away_steps_agree_on_convex(self):
        spec = PolytopeSpec(graph=TRIANGLE, k=1, w=0.01)
        plain = minimize(spec, QUAD,
                         MinimizeOptions(max_iters=500, gap_tol=1e-9))
        away = minimize(spec, QUAD,
                        MinimizeOptions(max_iters=500, gap_tol=1e-9,
                                        away_steps=True))
        assert away.objective == pytest.approx(plain.objective, abs=1e-8)


class TestRounding:
    def make(self, values: dict) -> FractionalAssignment:
        return FractionalAssignment(values=values, objective=0.0,
                                    fw_gap=0.0, iterations=0, residual=0.0)

    def test_threshold_is_strict(self):
        w, margin = 0.01, 1e-3
        threshold = (1 + w) / 2 + margin
        at = self.make({1: threshold, 2: 0.01})
        above = self.make({1: threshold + 1e-9, 2: 0.01})
        g = Graph(n=2, edges=frozenset())
        assert round_solution(at, w, margin, graph=g, k=1) is None
        assert round_solution(above, w, margin, graph=g, k=1) == {1}

    def test_edge_dominance(self):
        w = 0.01
        a = self.make({1: 0.75 * (1 + w), 2: 0.25 * (1 + w)})
        got = round_solution(a, w, 1e-6, graph=SINGLE_EDGE, k=1)
        assert got == {1}

    def test_empty_for_all_floor(self):
        a = self.make({1: 0.01, 2: 0.01, 3: 0.01})
        assert round_solution(a, 0.01, 1e-6, graph=TRIANGLE, k=0) == frozenset()

    def test_wrong_size_fails(self):
        a = self.make({1: 0.9, 2: 0.01, 3: 0.01})
        assert round_solution(a, 0.01, 1e-6, graph=TRIANGLE, k=2) is None

    def test_dependent_set_fails(self):
        # Not near-feasible (both endpoints high), so the independence
        # screen must catch it.
        a = self.make({1: 0.9, 2: 0.9})
        assert round_solution(a, 0.01, 1e-6, graph=SINGLE_EDGE, k=2) is None

    def test_soundness_on_near_feasible_fuzz(self):
        # For any assignment whose edge sums exceed 1 + w by at most some
        # delta, a margin of at least delta makes the cleared set
        # independent: two adjacent cleared vertices would force an edge sum
        # above 1 + w + 2*margin.
        rng = random.Random(20260822)
        w = 0.015
        for trial in range(500):
            g = random_graph(20, 0.3, seed=trial)
            values = {}
            for v in range(1, 21):
                values[v] = 1.0 if rng.random() < 0.4 else w
            for (i, j) in sorted(g.edges):
                if values[i] + values[j] > 1 + w:
                    values[j if rng.random() < 0.5 else i] = w
            for v in values:
                values[v] += rng.uniform(-1e-7, 1e-7)
            delta = max([values[i] + values[j] - (1 + w)
                         for (i, j) in g.edges] + [0.0])
            margin = delta + 1e-9
            threshold = (1 + w) / 2 + margin
            cleared = frozenset(v for v, value in values.items()
                                if value > threshold)
            assert is_independent(g, cleared), (trial, sorted(cleared))


class TestStepB:
    def test_reference_run_with_cuts(self, demo_graph):
        # Nearly-affine separating coefficients make the bare cost flat over
        # the polytope; the product caps break the degeneracy and push the
        # iterate onto an integer assignment.
        flat = PolyParams(C=100000000.000082492828369,
                          a1=-0.000082507074949, a2=5e-9, w=0.015)
        spec = PolytopeSpec(graph=demo_graph, k=4, w=0.015, band=1000.0)
        out = solve_step_b(spec, flat,
                           MinimizeOptions(max_iters=60, nonlinear_cuts=True))
        assert out.status == "integer-found"
        assert len(out.recognized) == 4
        assert is_independent(demo_graph, out.recognized)

    def test_reference_run_without_cuts_stays_fractional(self, demo_graph):
        flat = PolyParams(C=100000000.000082492828369,
                          a1=-0.000082507074949, a2=5e-9, w=0.015)
        spec = PolytopeSpec(graph=demo_graph, k=4, w=0.015, band=1000.0)
        out = solve_step_b(spec, flat, MinimizeOptions(max_iters=60))
        assert out.status == "fractional"
        assert out.recognized is None

    def test_fresh_fit_end_to_end(self, demo_graph, fresh_params):
        spec = PolytopeSpec(graph=demo_graph, k=4, w=0.015, band=1000.0)
        out = solve_step_b(spec, fresh_params,
                           MinimizeOptions(max_iters=60, nonlinear_cuts=True))
        assert out.status == "integer-found"
        assert len(out.recognized) == 4
        assert is_independent(demo_graph, out.recognized)
        desired = desired_cost(fresh_params, 25, 4)
        assert out.assignment.objective == pytest.approx(desired, abs=1.0)

    def test_fixed_vertex_kept(self, demo_graph, fresh_params):
        spec = PolytopeSpec(graph=demo_graph, k=4, w=0.015,
                            fixed_ones=(14,), band=1000.0)
        out = solve_step_b(spec, fresh_params,
                           MinimizeOptions(max_iters=60, nonlinear_cuts=True))
        assert out.status == "integer-found"
        assert 14 in out.recognized

    def test_oversized_target_never_integer(self, demo_graph, fresh_params):
        # The demo graph has no independent 5-set, so recognition can never
        # succeed; no false witness is possible by construction.
        spec = PolytopeSpec(graph=demo_graph, k=5, w=0.015, band=1000.0)
        out = solve_step_b(spec, fresh_params,
                           MinimizeOptions(max_iters=40, nonlinear_cuts=True))
        assert out.status != "integer-found"
        assert out.recognized is None

    def test_infeasible_status(self):
        out = solve_step_b(PolytopeSpec(graph=K4, k=3, w=0.01), QUAD)
        assert out.status == "infeasible"
        assert out.assignment is None and out.recognized is None

    def test_unique_point_stays_fractional(self):
        out = solve_step_b(PolytopeSpec(graph=K4, k=2, w=0.01), QUAD)
        assert out.status == "fractional"
        assert out.recognized is None

    def test_band_rejects_interior_landing(self):
        # The tilted quartic's slice minimum on the single edge sits at
        # x = (0.7575, 0.2525): vertex 1 clears the dominance threshold, but
        # the cost is 0.0164 below the target cost, so a zero band refuses
        # the integer claim.
        spec = PolytopeSpec(graph=SINGLE_EDGE, k=1, w=0.01, band=0.0)
        out = solve_step_b(spec, TILTED,
                           MinimizeOptions(max_iters=100, gap_tol=1e-12))
        assert out.status == "fractional"
        assert out.assignment.values[1] == pytest.approx(0.7575, abs=1e-6)

    def test_band_accepts_within_width(self):
        spec = PolytopeSpec(graph=SINGLE_EDGE, k=1, w=0.01, band=1.0)
        out = solve_step_b(spec, TILTED,
                           MinimizeOptions(max_iters=100, gap_tol=1e-12))
        assert out.status == "integer-found"
        assert out.recognized == {1}

    def test_empty_target_recognized_empty(self):
        out = solve_step_b(PolytopeSpec(graph=TRIANGLE, k=0, w=0.01,
                                        band=1e-6), QUAD)
        assert out.status == "integer-found"
        assert out.recognized == frozenset()

    def test_not_converged_label(self):
        # A strictly convex interior optimum never reaches a zero gap, so an
        # unreachable tolerance plus a tiny budget reports non-convergence.
        spec = PolytopeSpec(graph=TRIANGLE, k=1, w=0.01)
        out = solve_step_b(spec, QUAD,
                           MinimizeOptions(max_iters=3, gap_tol=0.0))
        assert out.status == "not-converged"

    def test_deterministic(self, demo_graph, fresh_params):
        spec = PolytopeSpec(graph=demo_graph, k=4, w=0.015, band=1000.0)
        opts = MinimizeOptions(max_iters=60, nonlinear_cuts=True)
        first = solve_step_b(spec, fresh_params, opts)
        second = solve_step_b(spec, fresh_params, opts)
        assert first.recognized == second.recognized
        assert first.assignment.values == second.assignment.values


class TestEmit:
    def test_format(self):
        a = FractionalAssignment(values={2: 0.015, 1: 1.0}, objective=0.0,
                                 fw_gap=0.0, iterations=0, residual=0.0)
        assert emit_assignment(a) == "1 1\n2 0.015\n"
