"""Gap/improvement ratios, the p and q estimators, the benchmark harness."""

import json
import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from energy_concierge.ir import Constraint, LinExpr, VarRef
from energy_concierge.metrics import (
    BadInput,
    NonPositiveOptimum,
    NonPositiveValue,
    OutOfRange,
    ScriptMissing,
    debug_histogram_model,
    estimate_p,
    estimate_q,
    expected_generations,
    improvement_over_baseline,
    mean_generations,
    normalized_gap,
    optimality_gap,
    run_benchmark,
    success_histogram,
)
from energy_concierge.pipeline import PipelineConfig
from energy_concierge.problems import (
    ProblemKind,
    build_ev_charging,
    fixture_params,
    oracle,
)
from energy_concierge.solver import solve_instance

GOLDEN_SCRIPT = Path("fixtures/scripts/golden_all.json")


def with_overrides(kind, **overrides):
    from energy_concierge.problems import ElicitedParams

    values = fixture_params(kind).as_dict()
    values.update(overrides)
    return ElicitedParams.of(kind, values)


class TestOptimalityGap:
    def test_exact_optimum(self):
        assert optimality_gap(4.2, 4.2) == pytest.approx(0.0, abs=1e-12)

    def test_direct_ratio(self):
        assert optimality_gap(1.1, 1.0) == pytest.approx(0.1, abs=1e-12)

    def test_degraded_ev_formulation_gap(self):
        # a formulation that ignores a 10% charging loss buys 77 kWh
        # instead of 70: v = 77 * 0.06 = 4.62 against v* = 4.20
        v_star = oracle(ProblemKind.EV_CHARGING, fixture_params(ProblemKind.EV_CHARGING)).objective
        degraded = with_overrides(ProblemKind.EV_CHARGING, daily_energy_kwh=77.0)
        v = solve_instance(build_ev_charging(degraded)).objective
        assert v == pytest.approx(4.62, abs=1e-9)
        assert optimality_gap(v, v_star) == pytest.approx(0.10, abs=1e-9)

    def test_rejects_nonpositive_optimum(self):
        with pytest.raises(NonPositiveOptimum):
            optimality_gap(1.0, 0.0)
        with pytest.raises(NonPositiveOptimum):
            optimality_gap(1.0, -2.0)

    def test_normalized_gap_handles_negative_optima(self):
        assert normalized_gap(-540.0, -550.0) == pytest.approx(10.0 / 550.0, abs=1e-12)

    def test_gap_nonnegative_for_restrictions(self):
        # adding constraints (redundant or tightening) can only raise the
        # minimum of a minimization, so the gap stays nonnegative
        rng = random.Random(11)
        params = fixture_params(ProblemKind.EV_CHARGING)
        v_star = oracle(ProblemKind.EV_CHARGING, params).objective
        base = build_ev_charging(params)
        for _ in range(25):
            extra = []
            for t in rng.sample(range(12), rng.randint(1, 4)):
                if rng.random() < 0.5:
                    extra.append(Constraint(LinExpr.of([(1.0, VarRef("x", t))]), "<=", rng.uniform(8, 15)))
                else:
                    extra.append(Constraint(LinExpr.of([(1.0, VarRef("x", t))]), ">=", rng.uniform(0.0, 2.0)))
            restricted = type(base).of(base.variables, base.objective, list(base.constraints) + extra, base.meta())
            sol = solve_instance(restricted)
            if sol.status != "optimal":
                continue  # tightened into infeasibility: no candidate objective
            assert optimality_gap(sol.objective, v_star) >= -1e-9


class TestImprovement:
    def test_equal_baseline(self):
        assert improvement_over_baseline(5.0, 5.0) == pytest.approx(0.0, abs=1e-12)

    def test_thirty_percent(self):
        assert improvement_over_baseline(1.3 * 4.2, 4.2) == pytest.approx(0.30, abs=1e-12)

    def test_sixty_percent(self):
        assert improvement_over_baseline(1.6 * 4.2, 4.2) == pytest.approx(0.60, abs=1e-12)

    def test_rejects_nonpositive_value(self):
        with pytest.raises(NonPositiveValue):
            improvement_over_baseline(1.0, 0.0)


PAPER_P_VALUES = [0.8, 0.25, 0.38, 0.53, 0.83, 0.38]


class TestEstimateP:
    def test_always_succeeding(self):
        assert estimate_p(1.0) == 1.0

    def test_known_forward_value(self):
        assert expected_generations(0.8) == pytest.approx(1.24992, abs=1e-9)
        assert estimate_p(1.24992) == pytest.approx(0.8, abs=1e-6)

    @pytest.mark.parametrize("p", PAPER_P_VALUES)
    def test_reported_values_round_trip(self, p):
        assert estimate_p(expected_generations(p)) == pytest.approx(p, abs=1e-6)

    @given(st.floats(min_value=1e-3, max_value=1.0, allow_nan=False))
    @settings(max_examples=1000, deadline=None)
    def test_inversion_identity(self, p):
        assert estimate_p(expected_generations(p)) == pytest.approx(p, abs=1e-6)

    def test_out_of_range(self):
        with pytest.raises(OutOfRange):
            estimate_p(0.5)
        with pytest.raises(OutOfRange):
            estimate_p(6.5)

    def test_never_succeeding_limit(self):
        # z = 6 has no solution in (0, 1]; the bisection collapses to ~0
        assert estimate_p(6.0) == pytest.approx(0.0, abs=1e-6)


class TestEstimateQ:
    def test_exact_grid_member(self):
        y = debug_histogram_model(0.26)
        assert estimate_q(y) == pytest.approx(0.26, abs=1e-12)

    def test_immediate_success(self):
        assert estimate_q([1, 0, 0, 0, 0]) == 1.0

    def test_never_succeeds(self):
        assert estimate_q([0, 0, 0, 0, 1]) == 0.0

    def test_recovers_every_grid_point(self):
        for step in range(101):
            q = step / 100.0
            assert estimate_q(debug_histogram_model(q)) == pytest.approx(q, abs=1e-12)

    def test_recovery_within_grid_resolution_for_off_grid(self):
        rng = random.Random(5)
        for _ in range(50):
            q = rng.uniform(0.0, 1.0)
            assert abs(estimate_q(debug_histogram_model(q)) - q) <= 0.01 + 1e-12

    def test_rejects_unnormalized(self):
        with pytest.raises(BadInput):
            estimate_q([0.5, 0.5, 0.5, 0, 0])
        with pytest.raises(BadInput):
            estimate_q([1, 0, 0, 0])


class TestHistogramHelpers:
    def test_success_histogram_buckets_and_caps(self):
        y = success_histogram([1, 1, 2, 3, 9])
        assert y == [0.4, 0.2, 0.2, 0.0, 0.2]

    def test_mean_generations_codes_overflow_as_six(self):
        assert mean_generations([1, 1, 7]) == pytest.approx((1 + 1 + 6) / 3)


class TestBenchmark:
    def test_golden_script_all_compile_and_match(self, tmp_path):
        records = run_benchmark(
            list(ProblemKind), 3, GOLDEN_SCRIPT,
            cfg=PipelineConfig(samples=5), out_dir=tmp_path, seed=1,
        )
        assert len(records) == 18
        assert all(r.compiled for r in records)
        assert all(r.correct for r in records)
        assert all(r.explained for r in records)
        assert all(abs(r.gap) <= 1e-6 for r in records)
        summary = (tmp_path / "summary.csv").read_text()
        assert summary.splitlines()[0] == (
            "kind,n,compiled_rate,correct_rate,explained_rate,mean_gap,mean_samples,mean_debug_iters"
        )
        for line in summary.splitlines()[1:]:
            cells = line.split(",")
            assert cells[2] == cells[3] == cells[4] == "1.000000"
            assert cells[5] == "0.000000"

    def test_injected_failure_costs_one_debug_iteration(self, tmp_path):
        template = json.loads(GOLDEN_SCRIPT.read_text())
        template["turns"]["formulate"] = ["```ecdsl\nbroken doc\n```"]
        template["turns"]["debug"] = ["```ecdsl\n{{golden_doc}}```"]
        path = tmp_path / "one_fail.json"
        path.write_text(json.dumps(template))
        records = run_benchmark(
            [ProblemKind.EV_CHARGING], 4, path,
            cfg=PipelineConfig(samples=1), out_dir=tmp_path / "out", seed=0,
        )
        assert all(r.compiled and r.correct for r in records)
        assert all(r.debug_iterations == 1 for r in records)
        summary = (tmp_path / "out" / "summary.csv").read_text()
        assert summary.splitlines()[1].split(",")[7] == "1.000000"  # mean_debug_iters

    def test_fixed_seed_reproduces_bytes(self, tmp_path):
        kinds = [ProblemKind.EV_CHARGING, ProblemKind.BATTERY_SIZING]
        run_benchmark(kinds, 3, GOLDEN_SCRIPT, out_dir=tmp_path / "a", seed=7)
        run_benchmark(kinds, 3, GOLDEN_SCRIPT, out_dir=tmp_path / "b", seed=7)
        assert (tmp_path / "a" / "summary.csv").read_bytes() == (tmp_path / "b" / "summary.csv").read_bytes()
        assert (tmp_path / "a" / "records.jsonl").read_bytes() == (tmp_path / "b" / "records.jsonl").read_bytes()

    def test_missing_script(self, tmp_path):
        with pytest.raises(ScriptMissing):
            run_benchmark([ProblemKind.EV_CHARGING], 1, tmp_path / "nope.json", out_dir=tmp_path)
