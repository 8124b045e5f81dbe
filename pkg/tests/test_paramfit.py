"""Tests for the separating-cost fitting layer: configuration parsing, LP
construction, fitted-coefficient re-verification, LP-point completion, and
the legacy power-family grid scan.

Structural counts (variable/row totals for the small configuration) were
derived by hand from the row catalog before running the builder.  Margin and
feasibility expectations come from direct evaluation through the cost-function
layer, which shares no code with the LP solver.
"""

import math

import pytest

from misfit.costfn import (
    LegacyParams,
    PolyParams,
    convexity_measure,
    desired_cost,
    eval_cost,
    scenario_margin,
    second_derivative,
)
from misfit.lpcore import check_feasible, emit_text
from misfit.paramfit import (
    SUBSET_ROW_NAMES,
    FitConfig,
    FitReport,
    GridSearchResult,
    build_fit_lp,
    complete_lp_point,
    curvature_grid,
    fit_config_from_text,
    fit_parameters,
    grid_search_legacy,
    legacy_requirements,
    report_to_text,
    verify_parameters,
)

# The same three poly reference sets used in the cost-function tests, paired
# here with the configurations whose constraint systems they satisfy.
BIG = PolyParams(C=50014.9, a1=9999950000.0, a2=1.60683, a3=-1.92801,
                 a4=0.876627, b1=-0.00314755, b2=8.11163e-05,
                 b3=-5.21308e-07, b4=1.10935e-09, w=0.005)
BIG_CFG = FitConfig(N=25, k=4, eps=30.0, lowCurv=500)

FLAT = PolyParams(C=100000000.000082492828369, a1=-0.000082507074949,
                  a2=5e-9, w=0.015)
FLAT_CFG = FitConfig(N=25, k=4, eps=20.0, lowCurv=1500, tightened=True)

MID = PolyParams(C=98999971.4548247457, a1=1000028.5881573070,
                 a2=-0.0943214668, a3=0.0617447224, a4=-0.0159219866,
                 b1=0.0059862135, b2=-0.0004836134, b3=0.0000142205,
                 b4=-0.0000001472, w=0.008)
MID_CFG = FitConfig(N=150, k=20, eps=20.0, lowCurv=800, tightened=True,
                    extra150=True)

POWER2 = LegacyParams(p=2.0, t=268.435456, M=1.048576, r=268.435456,
                      s=0.000001, y=-0.000064, w=0.000001)
POWER2_DICT = dict(p=2.0, t=268.435456, M=1.048576, r=268.435456,
                   s=0.000001, y=-0.000064, w=0.000001)

# Configuration template for fresh fits: separation margins only, no
# curvature floor (the margin rows already force the midpoint-average cost
# below the split costs, which no convex function can do), solved for a
# feasible vertex rather than pushed to the value cap.
def fresh_cfg(N: int, k: int) -> FitConfig:
    return FitConfig(N=N, k=k, eps=20.0, lowCurv=1500, tightened=True,
                     convexity=False, objective="feasibility")


@pytest.fixture(scope="module")
def fit_25_4() -> FitReport:
    return fit_parameters(fresh_cfg(25, 4))


@pytest.fixture(scope="module")
def fit_18_6() -> FitReport:
    return fit_parameters(fresh_cfg(18, 6))


@pytest.fixture(scope="module")
def fit_18_8() -> FitReport:
    return fit_parameters(fresh_cfg(18, 8))


class TestFitConfig:
    def test_defaults(self):
        cfg = FitConfig(N=25, k=4)
        assert cfg.intvl == 100000
        assert cfg.eps == 30.0
        assert cfg.lowCurv == 500
        assert cfg.curv_lower_bound == 1e-8
        assert not cfg.tightened
        assert cfg.convexity
        assert cfg.objective == "max-f1"

    def test_floor_ratio(self):
        assert FitConfig(N=25, k=4, lowCurv=500, intvl=100000).w == 0.005
        assert FitConfig(N=25, k=4, lowCurv=1500).w == 0.015

    def test_value_cap(self):
        assert FitConfig(N=25, k=4).cap == 1e10
        assert FitConfig(N=25, k=4, ratio_eps=True, eps=0.01).cap == 1e4
        assert FitConfig(N=25, k=4, f1_cap=7.0).cap == 7.0

    def test_equal_weight_point(self):
        cfg = FitConfig(N=25, k=4, lowCurv=1500)
        expected = (4 + 21 * 0.015) / 25
        assert cfg.quantities.equal_wt == pytest.approx(expected, rel=1e-15)

    @pytest.mark.parametrize("kwargs", [
        dict(N=1, k=1),            # too few vertices
        dict(N=25, k=0),           # empty target
        dict(N=25, k=25),          # target covers everything
        dict(N=25, k=4, lowCurv=100000),   # floor reaches the top of the range
        dict(N=25, k=4, lowCurv=0),
        dict(N=25, k=4, eps=-1.0),
        dict(N=25, k=4, family="cubic"),
        dict(N=25, k=4, objective="min-f1"),
    ])
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            FitConfig(**kwargs)


class TestConfigText:
    def test_minimal(self):
        cfg = fit_config_from_text("N=25\nk=4\n")
        assert (cfg.N, cfg.k) == (25, 4)
        assert cfg.eps == 30.0   # defaults fill the rest

    def test_comments_and_blanks(self):
        text = """
        # target shape
        N = 150
        k = 20          # answer size
        lowCurv = 800
        eps = 20
        tightened = true
        extra150 = yes
        """
        cfg = fit_config_from_text(text)
        assert cfg.N == 150 and cfg.k == 20
        assert cfg.w == 0.008
        assert cfg.tightened and cfg.extra150

    def test_missing_required(self):
        with pytest.raises(ValueError, match="N"):
            fit_config_from_text("k=4\n")

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="unknown"):
            fit_config_from_text("N=25\nk=4\nepsilon=30\n")

    def test_bad_value(self):
        with pytest.raises(ValueError, match="bad value"):
            fit_config_from_text("N=25\nk=four\n")

    def test_bad_bool(self):
        with pytest.raises(ValueError, match="tightened"):
            fit_config_from_text("N=25\nk=4\ntightened=maybe\n")


class TestScenarioSelection:
    def test_default_small_floor(self):
        # w = 0.005 keeps every pair size down to 0.01 and splits up to
        # 100 pieces; 25 > 4m holds through m = 6.
        names = {sc.name for sc in FitConfig(N=25, k=4).scenarios()}
        assert names == {"W2", "W3", "W4", "W5", "W10", "W20", "W100",
                         "V0.01", "V0.02", "V0.05", "V0.15", "V0.3",
                         "Nkw2", "Nkw3", "Nkw4", "Nkw5", "Nkw6",
                         "equalWeight"}

    def test_tightened_higher_floor(self):
        # w = 0.015 drops the 100-piece split and the 0.01 pair, and the
        # shifted catalog never includes the thousand-piece split.
        names = {sc.name for sc in FLAT_CFG.scenarios()}
        assert names == {"W2", "W3", "W4", "W5", "W10", "W20",
                         "V0.02", "V0.05", "V0.15", "V0.3",
                         "Nkw2", "Nkw3", "Nkw4", "Nkw5", "Nkw6",
                         "equalWeight"}

    def test_half_cover_drops_partial_splits(self):
        # N = 2k leaves no room for any m-fold blowup of the target.
        names = {sc.name for sc in FitConfig(N=8, k=4, intvl=1000,
                                             lowCurv=5).scenarios()}
        assert not any(n.startswith("Nkw") for n in names)
        assert "equalWeight" in names

    def test_subset_restriction(self):
        names = [sc.name for sc in FitConfig(N=25, k=4,
                                             subset_rows=True).scenarios()]
        assert set(names) == set(SUBSET_ROW_NAMES)
        # catalog order, not listing order
        assert names == ["W3", "V0.01", "Nkw2", "Nkw3", "Nkw4"]


class TestCurvatureGrid:
    def test_small_range_full(self):
        cfg = FitConfig(N=5, k=2, intvl=10, lowCurv=1, curv_points=0)
        assert curvature_grid(cfg) == list(range(1, 11))

    def test_subsample_keeps_endpoints(self):
        g = curvature_grid(BIG_CFG)
        assert len(g) == 2000
        assert g[0] == 500 and g[-1] == 100000
        assert all(b > a for a, b in zip(g, g[1:]))

    def test_oversized_request_degrades_to_full(self):
        cfg = FitConfig(N=5, k=2, intvl=10, lowCurv=1, curv_points=500)
        assert curvature_grid(cfg) == list(range(1, 11))


class TestBuildStructure:
    TOY = FitConfig(N=5, k=2, intvl=10, lowCurv=1, eps=1.0, curv_points=0)

    def test_toy_counts(self):
        # Hand count: 9 coefficients + func1/funcW/desiredCost + 7 single
        # difference variables (W2,W3,W4,W5,W10,V0.15,V0.3) + 3 for the
        # m-fold family (Func2, Nkw2Int, Nkw2Diff) + 3 for the equal-weight
        # chain + 10 curvature values = 35 variables.  Rows: 3 core
        # definitions + 7 definitions + 7 separations + 4 m-fold +
        # 4 equal-weight + 10 curvature definitions + 10 floors + 1 cap = 46.
        lp = build_fit_lp(self.TOY)
        assert len(lp.var_names) == 35
        assert len(lp.rows) == 46

    def test_core_rows_present(self):
        lp = build_fit_lp(self.TOY)
        names = {r.name for r in lp.rows}
        for needed in ("def.func1", "def.funcW", "def.desiredCost",
                       "def.equalWeightFunc", "def.equalWtTotalCost",
                       "def.equalWeightDiff", "def.Func2", "def.Nkw2Int",
                       "def.Nkw2Diff", "sep.W2", "sep.equalWeight",
                       "def.curv1", "floor.curv10", "cap.func1"):
            assert needed in names

    def test_no_curvature_rows_when_disabled(self):
        cfg = FitConfig(N=5, k=2, intvl=10, lowCurv=1, eps=1.0,
                        curv_points=0, convexity=False)
        lp = build_fit_lp(cfg)
        assert len(lp.var_names) == 25
        assert len(lp.rows) == 26
        assert not any(r.name.startswith(("def.curv", "floor.curv"))
                       for r in lp.rows)

    def test_margin_requirements(self):
        lp = build_fit_lp(MID_CFG)
        rows = {r.name: r for r in lp.rows}
        assert rows["sep.W2"].rhs == 20.0
        assert rows["sep.piece8"].rhs == 20.0
        assert rows["sep.piece2x"].rhs == 30.0    # carries the 1.5 factor
        assert rows["cap.func1"].rhs == 1e10

    def test_ratio_mode_rows(self):
        cfg = FitConfig(N=25, k=4, ratio_eps=True, eps=0.01)
        lp = build_fit_lp(cfg)
        rows = {r.name: r for r in lp.rows}
        assert "norm.desiredCost" in rows
        assert rows["norm.desiredCost"].relation == ">="
        assert rows["sep.W2"].rhs == 0.0     # margin folded into coefficients
        assert rows["cap.func1"].rhs == 1e4

    def test_deterministic_build(self):
        a = emit_text(build_fit_lp(MID_CFG))
        b = emit_text(build_fit_lp(MID_CFG))
        assert a == b


class TestReferenceFeasibility:
    """The three reference coefficient sets, extended to full LP points,
    satisfy their constraint systems to well within 1e-6 after row scaling."""

    @pytest.mark.parametrize("params,cfg", [
        (BIG, BIG_CFG), (FLAT, FLAT_CFG), (MID, MID_CFG),
    ], ids=["big", "flat", "mid"])
    def test_reference_point_feasible(self, params, cfg):
        lp = build_fit_lp(cfg)
        point = complete_lp_point(params, cfg)
        report = check_feasible(lp, point, tol=1e-6)
        assert report.ok, str(report)
        assert report.worst < 1e-6

    def test_wrong_coefficients_fail(self):
        # Completion cannot hide genuinely non-separating coefficients: the
        # funcW shift it needs is so large that scaled residuals stay huge.
        garbage = PolyParams(C=1.0, w=BIG_CFG.w)
        lp = build_fit_lp(BIG_CFG)
        point = complete_lp_point(garbage, BIG_CFG)
        report = check_feasible(lp, point, tol=1e-6)
        assert not report.ok
        assert report.worst > 0.5


class TestVerifyParameters:
    def test_reference_set_clean(self):
        cfg = FitConfig(N=150, k=20, eps=10.0, lowCurv=800, tightened=True,
                        extra150=True, convexity=False)
        assert verify_parameters(MID, cfg) == []

    def test_larger_target_still_clean(self):
        # One more vertex in the target shrinks every margin, but at half
        # the fitted separation they all stay positive.
        cfg = FitConfig(N=150, k=21, eps=10.0, lowCurv=800, tightened=True,
                        extra150=True, convexity=False)
        assert verify_parameters(MID, cfg) == []

    def test_constant_function_fails_everywhere(self):
        # A constant cost makes every shifted breakup exactly as cheap as
        # the desired assignment, so every margin row fails at once.
        cfg = FLAT_CFG
        const = PolyParams(C=5.0, w=cfg.w)
        violations = verify_parameters(
            const, FitConfig(N=25, k=4, eps=20.0, lowCurv=1500,
                             tightened=True, convexity=False))
        assert {v.name for v in violations} == {sc.name
                                               for sc in cfg.scenarios()}
        assert all(v.kind == "margin" for v in violations)

    def test_curvature_screen(self):
        # The mid-sized set dips to large negative second derivatives near
        # the floor, so the curvature screen reports those grid points.
        cfg = FitConfig(N=150, k=20, eps=10.0, lowCurv=800, tightened=True,
                        extra150=True, convexity=True, curv_points=200)
        violations = verify_parameters(MID, cfg)
        assert violations
        assert all(v.kind == "curvature" for v in violations)
        assert violations[0].value < 0

    def test_power_family_rejected(self):
        with pytest.raises(TypeError):
            verify_parameters(POWER2, BIG_CFG)

    def test_violation_text(self):
        cfg = FitConfig(N=25, k=4, eps=20.0, lowCurv=1500, tightened=True,
                        convexity=False)
        violations = verify_parameters(PolyParams(C=5.0, w=cfg.w), cfg)
        text = str(violations[0])
        assert "margin" in text and "required" in text


class TestFreshFits:
    def test_small_fit_clean(self, fit_25_4):
        rep = fit_25_4
        assert rep.lp_status == "optimal"
        assert rep.ok
        assert rep.violations == ()
        assert rep.params is not None
        assert min(rep.slacks.values()) > -1e-6

    def test_fit_margins_recheck(self, fit_25_4):
        # Margins re-derived through the cost-function layer, bypassing the
        # report's own slack bookkeeping.
        cfg = fresh_cfg(25, 4)
        sq = cfg.quantities
        for sc in cfg.scenarios():
            margin = scenario_margin(fit_25_4.params, sq, sc)
            assert margin >= sc.margin_factor * cfg.eps - 1e-6, sc.name

    @pytest.mark.parametrize("shape", [(18, 6), (18, 8)])
    def test_other_shapes_clean(self, shape, fit_18_6, fit_18_8):
        rep = {(18, 6): fit_18_6, (18, 8): fit_18_8}[shape]
        assert rep.lp_status == "optimal"
        assert rep.ok

    def test_fit_point_feasible(self, fit_25_4):
        cfg = fresh_cfg(25, 4)
        lp = build_fit_lp(cfg)
        point = complete_lp_point(fit_25_4.params, cfg)
        report = check_feasible(lp, point, tol=1e-6)
        assert report.ok, str(report)

    def test_fit_deterministic(self, fit_25_4):
        again = fit_parameters(fresh_cfg(25, 4))
        for name in ("C", "a1", "a2", "a3", "a4", "b1", "b2", "b3", "b4"):
            assert getattr(again.params, name) == getattr(fit_25_4.params,
                                                          name)

    def test_curvature_floor_conflicts_with_margins(self):
        # With the curvature floor active, the equal-weight row demands the
        # averaged cost beat the split costs by eps, which midpoint
        # convexity forbids; the solver reports the conflict.
        cfg = FitConfig(N=25, k=4, eps=20.0, intvl=1000, lowCurv=15,
                        curv_points=60, tightened=True)
        rep = fit_parameters(cfg)
        assert rep.lp_status == "infeasible"
        assert rep.params is None
        assert not rep.ok

    def test_report_text(self, fit_25_4):
        text = report_to_text(fit_25_4)
        assert "status = optimal" in text
        assert "desiredCost = " in text
        assert "equalWeightDiff = " in text
        assert "W2 = " in text
        assert "Nkw2Diff = " in text
        assert "convex_subintervals = " in text

    def test_report_text_without_params(self):
        cfg = FitConfig(N=25, k=4, eps=20.0, intvl=1000, lowCurv=15,
                        curv_points=60, tightened=True)
        text = report_to_text(fit_parameters(cfg))
        assert "status = infeasible" in text
        assert "C = " not in text


class TestLegacyRequirements:
    def test_known_point_passes(self):
        checks = legacy_requirements(POWER2, 150, 20)
        assert all(checks.values())
        assert set(checks) == {"split20", "split10", "split5", "split4",
                               "split3", "split1000", "pair0.5", "pair0.001",
                               "pair0.02", "pair0.05", "pair0.15", "pair0.3",
                               "halvesGap"}

    def test_small_graph_skips_big_splits(self):
        # With only 30 slots the 1000-piece breakup cannot occur, so its
        # requirement passes vacuously.
        checks = legacy_requirements(POWER2, 30, 5)
        assert checks["split1000"]

    def test_gap_is_strict(self):
        # p = 1 makes the function affine, collapsing the halves gap to
        # exact equality, which the strict comparison rejects.
        affine = LegacyParams(p=1.0, t=0.0, M=1.0, r=0.0, s=1.0, y=0.0,
                              w=0.000001)
        checks = legacy_requirements(affine, 150, 20)
        assert not checks["halvesGap"]


class TestGridSearch:
    def test_finds_known_point(self):
        grids = {k: [v] for k, v in POWER2_DICT.items()}
        grids["t"] = [100.0, 268.435456]
        grids["y"] = [-0.000064, 0.0]
        res = grid_search_legacy(150, 20, grids)
        assert res.evaluated == 4
        assert res.skipped == 0
        assert len(res.hits) == 2
        known = [h for h in res.hits if h.params.t == 268.435456]
        assert len(known) == 1
        assert known[0].convexity == (990, 1000)
        assert all(known[0].checks.values())

    def test_matches_direct_evaluation(self):
        ts = [100.0, 200.0, 268.435456]
        ys = [-0.000064, 0.0]
        grids = {k: [v] for k, v in POWER2_DICT.items()}
        grids["t"], grids["y"] = ts, ys
        res = grid_search_legacy(30, 5, grids)
        expected = []
        for t in ts:                      # same nesting as the grid order
            for y in ys:
                p = LegacyParams(**{**POWER2_DICT, "t": t, "y": y})
                if all(legacy_requirements(p, 30, 5).values()):
                    expected.append((t, y))
        assert [(h.params.t, h.params.y) for h in res.hits] == expected
        assert expected   # the scan found something to compare

    def test_pole_inside_range_skipped(self):
        grids = {k: [v] for k, v in POWER2_DICT.items()}
        grids["s"] = [-0.5, 0.000001]    # -0.5 puts the pole at x = 0.5
        res = grid_search_legacy(150, 20, grids)
        assert res.evaluated == 2
        assert res.skipped == 1
        assert len(res.hits) == 1

    def test_empty_dimension(self):
        res = grid_search_legacy(150, 20, {"t": []})
        assert res == GridSearchResult(hits=(), evaluated=0, skipped=0)

    def test_point_cap(self):
        with pytest.raises(ValueError, match="cap"):
            grid_search_legacy(150, 20, {"t": [0.0] * 100,
                                         "y": [0.0] * 100,
                                         "M": [0.0] * 100},
                               max_points=1000)
