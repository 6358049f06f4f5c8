"""The six case studies: builders, oracles, schemas, fixtures, ingestion."""

import math
import random

import pytest

from energy_concierge.bruteforce import enumerate_vertices
from energy_concierge.ir import Constraint, ConvexTerm, LinExpr, OptInstance, VarDecl, VarRef, lower_to_lp, validate
from energy_concierge.problems import (
    DISPATCH_FIXTURE_A,
    HOURS,
    SCHEMAS,
    BadBounds,
    DimensionMismatch,
    ElicitedParams,
    InfeasibleSpec,
    NegativeInput,
    ProblemKind,
    ValidationFailed,
    build_battery_dispatch,
    build_battery_sizing,
    build_ev_charging,
    build_heat_pump,
    build_hvac,
    build_instance,
    build_pv_sizing,
    derived_outputs,
    fixture_params,
    load_dispatch_csv,
    load_series_csv,
    oracle,
    parse_answer,
    sample_params,
    schemas_to_jsonable,
    standard_tou_prices,
    window_hours,
)
from energy_concierge.solver import INFEASIBLE, OPTIMAL, solve_instance, solve_lp


def with_overrides(kind, **overrides):
    values = fixture_params(kind).as_dict()
    values.update(overrides)
    return ElicitedParams.of(kind, values)


class TestSchemas:
    def test_exactly_five_questions_per_kind(self):
        for kind in ProblemKind:
            assert len(SCHEMAS[kind].questions()) == 5, kind

    def test_param_names_unique(self):
        for kind in ProblemKind:
            names = [f.name for f in SCHEMAS[kind].params]
            assert len(names) == len(set(names))

    def test_schema_export_is_jsonable(self):
        import json

        out = schemas_to_jsonable()
        assert len(out) == 6
        json.dumps(out)

    def test_ev_questions_cover_the_dialogue_topics(self):
        names = [f.name for f in SCHEMAS[ProblemKind.EV_CHARGING].questions()]
        assert names == [
            "charger_power_kw",
            "daily_energy_kwh",
            "charging_location",
            "charging_window",
            "price_profile",
        ]


class TestAnswers:
    def test_out_of_range_efficiency_message(self):
        f = SCHEMAS[ProblemKind.BATTERY_SIZING].field("battery_efficiency")
        with pytest.raises(ValidationFailed) as err:
            parse_answer(f, "efficiency = 1.3")
        assert "(0, 1]" in str(err.value)

    def test_interval_and_vector_and_enum(self):
        band = SCHEMAS[ProblemKind.HVAC_SETPOINT].field("comfort_band")
        assert parse_answer(band, "65-75") == (65.0, 75.0)
        assert parse_answer(band, "65 to 75") == (65.0, 75.0)
        prices = SCHEMAS[ProblemKind.BATTERY_DISPATCH].field("price_profile")
        assert parse_answer(prices, "default") == "default"
        loc = SCHEMAS[ProblemKind.EV_CHARGING].field("charging_location")
        assert parse_answer(loc, "At Home mostly") == "home"

    def test_vector_range_check(self):
        prices = SCHEMAS[ProblemKind.EV_CHARGING].field("price_profile")
        with pytest.raises(ValidationFailed):
            parse_answer(prices, "-0.1, 0.2, 0.3")

    def test_missing_required_param(self):
        with pytest.raises(ValidationFailed) as err:
            ElicitedParams.of(ProblemKind.PV_SIZING, {"roof_area_sqft": 100.0})
        assert "required" in str(err.value)


class TestWindow:
    def test_wrap_past_midnight(self):
        assert window_hours((18, 6)) == [18, 19, 20, 21, 22, 23, 0, 1, 2, 3, 4, 5]

    def test_full_day(self):
        assert len(window_hours((0, 0))) == 24

    def test_standard_tou(self):
        prices = standard_tou_prices(window_hours((18, 6)))
        assert prices[:4] == [0.14] * 4
        assert prices[4:] == [0.06] * 8


class TestEvCharging:
    def test_fixture_objective_and_peak_zeros(self):
        p = fixture_params(ProblemKind.EV_CHARGING)
        sol = solve_instance(build_ev_charging(p))
        assert sol.status == OPTIMAL
        assert sol.objective == pytest.approx(4.20, abs=1e-9)
        assert sol.vector("x", 4) == pytest.approx([0.0] * 4, abs=1e-9)

    def test_zero_energy(self):
        sol = solve_instance(build_ev_charging(with_overrides(ProblemKind.EV_CHARGING, daily_energy_kwh=0.0)))
        assert sol.objective == pytest.approx(0.0, abs=1e-12)
        assert sol.vector("x", 12) == pytest.approx([0.0] * 12, abs=1e-9)

    def test_infeasible_spec_names_both_quantities(self):
        with pytest.raises(InfeasibleSpec) as err:
            build_ev_charging(with_overrides(ProblemKind.EV_CHARGING, daily_energy_kwh=181.0))
        assert "181" in str(err.value) and "180" in str(err.value)

    def test_oracle_matches_reduced_vertex_enumeration(self):
        # 6-hour window; small enough for exhaustive basic-solution search
        p = with_overrides(
            ProblemKind.EV_CHARGING,
            charging_window=(18.0, 0.0),
            price_profile=[0.14, 0.14, 0.13, 0.06, 0.07, 0.06],
            daily_energy_kwh=40.0,
        )
        lowered = lower_to_lp(build_ev_charging(p))
        status, _, obj = enumerate_vertices(lowered)
        assert status == OPTIMAL
        assert oracle(ProblemKind.EV_CHARGING, p).objective == pytest.approx(obj, abs=1e-9)


class TestHvac:
    def test_clamp_above_band(self):
        p = fixture_params(ProblemKind.HVAC_SETPOINT)
        sol = solve_instance(build_hvac(p))
        assert sol.value("x") == pytest.approx(75.0, abs=1e-9)
        assert sol.objective == pytest.approx(9.60, abs=1e-9)

    def test_ambient_inside_band(self):
        p = with_overrides(ProblemKind.HVAC_SETPOINT, ambient_temp_f=70.0)
        sol = solve_instance(build_hvac(p))
        assert sol.value("x") == pytest.approx(70.0, abs=1e-9)
        assert sol.objective == pytest.approx(0.0, abs=1e-9)

    def test_bad_bounds(self):
        with pytest.raises(ValidationFailed):
            with_overrides(ProblemKind.HVAC_SETPOINT, comfort_band=(80.0, 70.0))
        # the builder guards too, for params built outside the schema path
        good = fixture_params(ProblemKind.HVAC_SETPOINT)
        flipped = ElicitedParams(good.kind, tuple(
            (k, (80.0, 70.0) if k == "comfort_band" else v) for k, v in good.values
        ))
        with pytest.raises(BadBounds):
            build_hvac(flipped)


def dispatch_instance_for(horizon, prices, solar, demand, cap=20.0, power=3.0):
    """Test-local dispatch builder for reduced horizons (mirrors the 24-hour
    production formulation, independent route for the oracle check)."""
    x = [VarRef("x", t) for t in range(horizon)]
    b = [VarRef("b", t) for t in range(horizon)]
    cons = [Constraint(LinExpr.of([(1.0, b[0]), (-1.0, x[0])]), "==", 0.0)]
    for t in range(1, horizon):
        cons.append(Constraint(LinExpr.of([(1.0, b[t]), (-1.0, b[t - 1]), (-1.0, x[t])]), "==", 0.0))
    cons.append(Constraint(LinExpr.of([(1.0, b[horizon - 1])]), "==", 0.0))
    baseline = sum(prices[t] * (demand[t] - solar[t]) for t in range(horizon))
    objective = ConvexTerm("linear", LinExpr.of([(prices[t], x[t]) for t in range(horizon)], baseline))
    return OptInstance.of(
        [VarDecl.vector("x", horizon, -power, power), VarDecl.vector("b", horizon, 0.0, cap)],
        [objective],
        cons,
    )


class TestBatteryDispatch:
    def test_fixture_matches_independent_oracle(self):
        p = fixture_params(ProblemKind.BATTERY_DISPATCH)
        sol = solve_instance(build_battery_dispatch(p))
        ref = oracle(ProblemKind.BATTERY_DISPATCH, p)
        assert sol.status == OPTIMAL
        assert sol.objective == pytest.approx(ref.objective, abs=1e-6)

    def test_energy_conservation(self):
        p = fixture_params(ProblemKind.BATTERY_DISPATCH)
        sol = solve_instance(build_battery_dispatch(p))
        assert sum(sol.vector("x", HOURS)) == pytest.approx(0.0, abs=1e-6)

    def test_reduced_six_hour_vertex_enumeration(self):
        prices = [0.1, 0.1, 0.2, 0.2, 0.1, 0.1]
        solar = [0.3, 0.4, 0.1, 0.0, 0.0, 0.0]
        demand = [0.5, 0.6, 1.5, 2.0, 1.0, 0.7]
        inst = dispatch_instance_for(6, prices, solar, demand, cap=4.0, power=2.0)
        assert validate(inst) == []
        lowered = lower_to_lp(inst)
        status, _, obj = enumerate_vertices(lowered)
        sol = solve_lp(lowered)
        assert status == OPTIMAL and sol.status == OPTIMAL
        assert sol.objective == pytest.approx(obj, abs=1e-6)

    def test_idle_system_does_nothing(self):
        p = with_overrides(
            ProblemKind.BATTERY_DISPATCH,
            price_profile=[0.1] * HOURS,
            solar_production=[0.0] * HOURS,
            household_demand=[0.0] * HOURS,
        )
        sol = solve_instance(build_battery_dispatch(p))
        assert sol.objective == pytest.approx(0.0, abs=1e-9)

    def test_zero_power_fixes_cost(self):
        p = with_overrides(ProblemKind.BATTERY_DISPATCH, max_power_kw=0.0)
        sol = solve_instance(build_battery_dispatch(p))
        prices = DISPATCH_FIXTURE_A["price"]
        expected = sum(
            prices[t] * (DISPATCH_FIXTURE_A["demand"][t] - DISPATCH_FIXTURE_A["solar"][t])
            for t in range(HOURS)
        )
        assert sol.objective == pytest.approx(expected, abs=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationFailed):
            with_overrides(ProblemKind.BATTERY_DISPATCH, price_profile=[0.1] * 23)

    def test_no_export_flag_adds_floor(self):
        p = with_overrides(ProblemKind.BATTERY_DISPATCH, no_export="yes")
        inst = build_battery_dispatch(p)
        assert any(c.label.startswith("no_export") for c in inst.constraints)
        sol = solve_instance(inst)
        base = solve_instance(build_battery_dispatch(fixture_params(ProblemKind.BATTERY_DISPATCH)))
        assert sol.objective >= base.objective - 1e-9


class TestPvSizing:
    def test_fixture_reproduces_reference_outputs(self):
        p = fixture_params(ProblemKind.PV_SIZING)
        sol = solve_instance(build_pv_sizing(p))
        rows = dict((label, value) for label, value, _ in derived_outputs(ProblemKind.PV_SIZING, p, sol))
        assert rows["panel_area"] == pytest.approx(300.0, abs=1e-6)
        assert rows["total_cost"] == pytest.approx(3000.0, abs=1e-6)
        assert rows["monthly_production"] == pytest.approx(540.0, abs=1e-6)
        assert rows["annual_savings"] == pytest.approx(405.60, abs=1e-6)

    def test_binding_production_constraint(self):
        p = with_overrides(ProblemKind.PV_SIZING, monthly_consumption_kwh=300 * 15 * 0.12)
        sol = solve_instance(build_pv_sizing(p))
        assert sol.value("area") == pytest.approx(300.0, abs=1e-6)

    def test_zero_consumption_still_fills_roof(self):
        p = with_overrides(ProblemKind.PV_SIZING, monthly_consumption_kwh=0.0)
        sol = solve_instance(build_pv_sizing(p))
        assert sol.value("area") == pytest.approx(300.0, abs=1e-6)

    def test_infeasible_roof(self):
        with pytest.raises(InfeasibleSpec):
            build_pv_sizing(with_overrides(ProblemKind.PV_SIZING, monthly_consumption_kwh=1000.0))

    def test_budget_guard(self):
        with pytest.raises(InfeasibleSpec):
            build_pv_sizing(with_overrides(ProblemKind.PV_SIZING, budget_usd=100.0))


class TestHeatPump:
    def test_fixture_savings(self):
        p = fixture_params(ProblemKind.HEAT_PUMP)
        sol = solve_instance(build_heat_pump(p))
        assert sol.objective == pytest.approx(-550.0, abs=1e-9)
        rows = dict((l, v) for l, v, _ in derived_outputs(ProblemKind.HEAT_PUMP, p, sol))
        assert rows["annual_savings"] == pytest.approx(550.0, abs=1e-9)

    def test_equal_consumption_costs_maintenance(self):
        p = with_overrides(ProblemKind.HEAT_PUMP, hp_annual_consumption_kwh=3000.0)
        sol = solve_instance(build_heat_pump(p))
        assert sol.objective == pytest.approx(200.0, abs=1e-9)  # savings -200

    def test_zero_maintenance_equal_consumption(self):
        p = with_overrides(
            ProblemKind.HEAT_PUMP, hp_annual_consumption_kwh=3000.0, annual_maintenance_usd=0.0
        )
        sol = solve_instance(build_heat_pump(p))
        assert sol.objective == pytest.approx(0.0, abs=1e-12)

    def test_negative_input(self):
        good = fixture_params(ProblemKind.HEAT_PUMP)
        poked = ElicitedParams(good.kind, tuple(
            (k, -1.0 if k == "electricity_rate" else v) for k, v in good.values
        ))
        with pytest.raises(NegativeInput):
            build_heat_pump(poked)


class TestBatterySizing:
    def test_fixture_optimum(self):
        p = fixture_params(ProblemKind.BATTERY_SIZING)
        sol = solve_instance(build_battery_sizing(p))
        assert sol.value("bsize") == pytest.approx(8.66875, abs=1e-6)

    def test_no_deficit_no_battery(self):
        p = with_overrides(ProblemKind.BATTERY_SIZING, daily_solar_kwh=35.0)
        sol = solve_instance(build_battery_sizing(p))
        assert sol.value("bsize") == pytest.approx(0.0, abs=1e-9)
        assert sol.objective == pytest.approx(0.0, abs=1e-9)

    def test_priced_out_battery(self):
        p = with_overrides(ProblemKind.BATTERY_SIZING, battery_unit_cost=1e6)
        sol = solve_instance(build_battery_sizing(p))
        assert sol.value("bsize") == pytest.approx(0.0, abs=1e-3)
        rows = dict((l, v) for l, v, _ in derived_outputs(ProblemKind.BATTERY_SIZING, p, sol))
        assert rows["daily_grid_purchase"] == pytest.approx(20.0, abs=1e-2)


class TestBuilderOracleAgreement:
    @pytest.mark.parametrize("kind", list(ProblemKind), ids=lambda k: k.value)
    def test_50_random_parameter_sets(self, kind):
        rng = random.Random(f"agreement:{kind.value}")
        for _ in range(50):
            p = sample_params(kind, rng)
            sol = solve_instance(build_instance(kind, p))
            ref = oracle(kind, p)
            assert sol.status == OPTIMAL
            scale = max(1.0, abs(ref.objective))
            assert abs(sol.objective - ref.objective) <= 1e-5 * scale


class TestMonotonicity:
    def test_ev_objective_nondecreasing_in_each_price(self):
        base = fixture_params(ProblemKind.EV_CHARGING)
        v0 = oracle(ProblemKind.EV_CHARGING, base).objective
        prices = list(base.get("price_profile"))
        for t in range(len(prices)):
            bumped = list(prices)
            bumped[t] += 0.05
            v1 = oracle(
                ProblemKind.EV_CHARGING, with_overrides(ProblemKind.EV_CHARGING, price_profile=bumped)
            ).objective
            assert v1 >= v0 - 1e-12

    def test_pv_savings_nondecreasing_in_rate(self):
        # savings grow with the electricity rate (production exceeds use)
        values = []
        for rate in (0.10, 0.13, 0.20, 0.30):
            p = with_overrides(ProblemKind.PV_SIZING, electricity_rate=rate)
            sol = solve_instance(build_pv_sizing(p))
            rows = dict((l, v) for l, v, _ in derived_outputs(ProblemKind.PV_SIZING, p, sol))
            values.append(rows["annual_savings"])
        assert values == sorted(values)

    def test_battery_size_nonincreasing_in_unit_cost(self):
        sizes = []
        for cost in (2.0, 5.0, 10.0, 50.0, 200.0):
            p = with_overrides(ProblemKind.BATTERY_SIZING, battery_unit_cost=cost)
            sizes.append(oracle(ProblemKind.BATTERY_SIZING, p).assignment[VarRef("bsize")])
        assert sizes == sorted(sizes, reverse=True)


class TestDeterminism:
    def test_builders_are_deterministic(self):
        for kind in ProblemKind:
            p = fixture_params(kind)
            assert build_instance(kind, p) == build_instance(kind, p)


class TestCsv:
    def test_series_csv(self, tmp_path):
        path = tmp_path / "series.csv"
        path.write_text("t,value\n0,0.14\n1,0.06\n", encoding="utf-8")
        assert load_series_csv(path) == [0.14, 0.06]

    def test_series_csv_rejects_bad_header(self, tmp_path):
        path = tmp_path / "series.csv"
        path.write_text("hour,price\n0,0.14\n", encoding="utf-8")
        with pytest.raises(ValueError):
            load_series_csv(path)

    def test_series_csv_rejects_gaps(self, tmp_path):
        path = tmp_path / "series.csv"
        path.write_text("t,value\n0,0.14\n2,0.06\n", encoding="utf-8")
        with pytest.raises(ValueError):
            load_series_csv(path)

    def test_shipped_dispatch_fixture_matches_builtin(self):
        data = load_dispatch_csv("fixtures/data/dispatch_fixture_a.csv")
        assert data["price"] == DISPATCH_FIXTURE_A["price"]
        assert data["solar"] == DISPATCH_FIXTURE_A["solar"]
        assert data["demand"] == DISPATCH_FIXTURE_A["demand"]

    def test_shipped_series_fixture_loads(self):
        values = load_series_csv("fixtures/data/standard_tou_prices.csv")
        assert values == standard_tou_prices(window_hours((18, 6)))
