"""Grammar, parser, compiler: categories, spans, round trips, fuzzing."""

import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from energy_concierge.dsl import (
    SEMANTIC,
    SYNTACTIC,
    DslError,
    FormulationDoc,
    compile_doc,
    extract_block,
    parse,
    print_doc,
)
from energy_concierge.golden import golden_document
from energy_concierge.problems import ProblemKind, fixture_params, oracle
from energy_concierge.solver import solve_instance

FIXTURES = Path("fixtures/dsl")

GOLDEN_FILES = {
    ProblemKind.EV_CHARGING: "golden_ev_charging.ecdsl",
    ProblemKind.HVAC_SETPOINT: "golden_hvac_setpoint.ecdsl",
    ProblemKind.BATTERY_DISPATCH: "golden_battery_dispatch.ecdsl",
    ProblemKind.PV_SIZING: "golden_pv_sizing.ecdsl",
    ProblemKind.HEAT_PUMP: "golden_heat_pump.ecdsl",
    ProblemKind.BATTERY_SIZING: "golden_battery_sizing.ecdsl",
}

BROKEN_FILES = {
    "broken_syntax.ecdsl": (SYNTACTIC, "UnexpectedToken"),
    "broken_unknown_identifier.ecdsl": (SEMANTIC, "UnknownIdentifier"),
    "broken_duplicate_minimize.ecdsl": (SEMANTIC, "DuplicateMinimize"),
    "broken_sum_mismatch.ecdsl": (SEMANTIC, "SumLengthMismatch"),
}


def classify_failure(text: str):
    """(category, code) of the first failure across parse + compile, or None."""
    try:
        doc = parse(text)
    except DslError as exc:
        return exc.category, exc.code
    try:
        compile_doc(doc)
    except DslError as exc:
        return exc.category, exc.code
    return None


class TestExtractBlock:
    CASES = [
        ("single tagged", 'before\n```ecdsl\nproblem "a"\n```\nafter', 'problem "a"'),
        ("single untagged", "```\nbody\n```", "body"),
        ("single other tag", "```python\nbody\n```", "body"),
        ("trims blank lines", "```\n\n\nbody\n\n```", "body"),
        ("second tagged wins", "```\none\n```\n```ecdsl\ntwo\n```", "two"),
        ("first tagged wins", "```ecdsl\none\n```\n```\ntwo\n```", "one"),
    ]

    @pytest.mark.parametrize("name,raw,expected", CASES, ids=[c[0] for c in CASES])
    def test_extraction_table(self, name, raw, expected):
        assert extract_block(raw) == expected

    ERROR_CASES = [
        ("no fences", "just prose, no fences", "NoBlockFound"),
        ("unclosed fence", "```ecdsl\nnever closed", "NoBlockFound"),
        ("two untagged", "```\na\n```\n```\nb\n```", "AmbiguousBlocks"),
        ("two tagged", "```ecdsl\na\n```\n```ecdsl\nb\n```", "AmbiguousBlocks"),
    ]

    @pytest.mark.parametrize("name,raw,code", ERROR_CASES, ids=[c[0] for c in ERROR_CASES])
    def test_extraction_errors(self, name, raw, code):
        with pytest.raises(DslError) as err:
            extract_block(raw)
        assert err.value.code == code
        assert err.value.category == SYNTACTIC


class TestParse:
    def test_golden_ev_structure(self):
        doc = parse(FIXTURES.joinpath("golden_ev_charging.ecdsl").read_text())
        assert doc.name == "ev_charging"
        kinds = [type(s).__name__ for s in doc.statements]
        assert kinds == ["VarStmt", "ParamStmt", "MinimizeStmt", "SubjectStmt"]
        var = doc.statements[0]
        assert var.name == "x" and var.length == 12
        assert var.bounds == ((">=", 0.0), ("<=", 15.0))

    def test_misspelled_keyword_span(self):
        with pytest.raises(DslError) as err:
            parse("minimise total")
        assert err.value.category == SYNTACTIC
        assert err.value.code == "UnexpectedToken"
        assert err.value.span == (1, 1)

    def test_statement_level_span(self):
        text = 'problem "x"\nvar a >= 0\nminimise a'
        with pytest.raises(DslError) as err:
            parse(text)
        assert err.value.span == (3, 1)

    def test_one_error_per_parse(self):
        # both lines are bad; only the first is reported
        with pytest.raises(DslError) as err:
            parse('problem "x"\nminimise a\nmaximise b')
        assert err.value.span == (2, 1)

    def test_unterminated_string(self):
        with pytest.raises(DslError) as err:
            parse('problem "x\nvar a')
        assert err.value.category == SYNTACTIC

    def test_signed_numbers_in_bounds_params_rhs(self):
        doc = parse(
            'problem "signs"\n'
            "var x >= -3 <= 3\n"
            "param c = -1.5\n"
            "minimize x\n"
            "subject x >= -2\n"
        )
        assert doc.statements[0].bounds == ((">=", -3.0), ("<=", 3.0))
        assert doc.statements[1].value == -1.5
        assert doc.statements[3].rhs == -2.0

    def test_number_overflow_rejected(self):
        with pytest.raises(DslError) as err:
            parse('problem "x"\nvar a >= 0\nminimize 1e999 * a')
        assert err.value.code == "BadNumber"


class TestCompile:
    def test_duplicate_minimize_is_semantic(self):
        doc = parse('problem "d"\nvar x >= 0\nminimize x\nminimize x')
        assert isinstance(doc, FormulationDoc)  # parsing succeeded
        with pytest.raises(DslError) as err:
            compile_doc(doc)
        assert (err.value.category, err.value.code) == (SEMANTIC, "DuplicateMinimize")

    def test_unknown_identifier_with_span(self):
        with pytest.raises(DslError) as err:
            compile_doc(parse('problem "d"\nvar x >= 0\nminimize x + q[3]'))
        assert err.value.code == "UnknownIdentifier"
        assert err.value.span == (3, 14)

    def test_missing_minimize(self):
        with pytest.raises(DslError) as err:
            compile_doc(parse('problem "d"\nvar x >= 0\nsubject x <= 1'))
        assert err.value.code == "MissingMinimize"

    def test_param_arity_mismatch(self):
        with pytest.raises(DslError) as err:
            compile_doc(parse('problem "d"\nvar x >= 0\nparam p[3] = [1, 2]\nminimize x'))
        assert err.value.code == "ArityMismatch"

    def test_sum_length_mismatch(self):
        text = (
            'problem "d"\n'
            "var x[4] >= 0\n"
            "param p[3] = [1, 2, 3]\n"
            "minimize sum(t, p[t] * x[t])\n"
        )
        with pytest.raises(DslError) as err:
            compile_doc(parse(text))
        assert err.value.code == "SumLengthMismatch"

    def test_sq_inside_sum_rejected(self):
        text = 'problem "d"\nvar x[3] >= 0\nminimize sum(t, sq(x[t]))'
        with pytest.raises(DslError) as err:
            compile_doc(parse(text))
        assert (err.value.category, err.value.code) == (SEMANTIC, "NonConvexUse")

    def test_nested_sum_rejected(self):
        text = 'problem "d"\nvar x[3] >= 0\nminimize sum(t, sum(u, x[t]))'
        with pytest.raises(DslError) as err:
            compile_doc(parse(text))
        assert err.value.category == SEMANTIC

    def test_product_of_two_variables_rejected(self):
        text = 'problem "d"\nvar x >= 0\nvar y >= 0\nminimize x * y'
        with pytest.raises(DslError) as err:
            compile_doc(parse(text))
        assert err.value.code == "NonConvexUse"

    def test_negative_weight_on_abs_rejected(self):
        text = 'problem "d"\nvar x >= 0 <= 1\nminimize 0 - 2 * abs(x - 1)'
        with pytest.raises(DslError) as err:
            compile_doc(parse(text))
        assert err.value.code == "NonConvexUse"

    def test_abs_in_constraint_rejected(self):
        text = 'problem "d"\nvar x >= 0\nminimize x\nsubject abs(x) <= 1'
        with pytest.raises(DslError) as err:
            compile_doc(parse(text))
        assert err.value.code == "NonConvexUse"

    def test_declaration_must_precede_use(self):
        text = 'problem "d"\nminimize x\nvar x >= 0'
        with pytest.raises(DslError) as err:
            compile_doc(parse(text))
        assert err.value.code == "UnknownIdentifier"

    def test_duplicate_declaration(self):
        text = 'problem "d"\nvar x >= 0\nparam x = 1\nminimize x'
        with pytest.raises(DslError) as err:
            compile_doc(parse(text))
        assert err.value.code == "DuplicateDeclaration"

    def test_abs_under_sum_expands(self):
        text = (
            'problem "d"\n'
            "var x[3] >= -1 <= 1\n"
            "param w[3] = [1, 2, 3]\n"
            "minimize sum(t, w[t] * abs(x[t] - 0.5))\n"
        )
        inst = compile_doc(parse(text))
        abs_terms = [t for t in inst.objective if t.kind == "abs"]
        assert [t.weight for t in abs_terms] == [1.0, 2.0, 3.0]
        sol = solve_instance(inst)
        assert sol.objective == pytest.approx(0.0, abs=1e-9)


class TestCategorySoundness:
    @pytest.mark.parametrize("fname,expected", BROKEN_FILES.items(), ids=list(BROKEN_FILES))
    def test_broken_corpus(self, fname, expected):
        outcome = classify_failure(FIXTURES.joinpath(fname).read_text())
        assert outcome == expected

    def test_parse_errors_are_always_syntactic(self):
        bad_texts = [
            "", "problem", 'problem "x"', "???", 'problem "x"\nvar 9x',
            'problem "x"\nvar a >= b', 'problem "x"\nsubject a',
            'problem "x"\nminimize (a)', 'problem "x"\nvar a [2]]',
        ]
        for text in bad_texts:
            with pytest.raises(DslError) as err:
                parse(text)
            assert err.value.category == SYNTACTIC, text

    def test_compile_errors_are_always_semantic(self):
        bad_docs = [
            'problem "x"\nvar a >= 0\nminimize b',
            'problem "x"\nvar a >= 0\nminimize a\nminimize a',
            'problem "x"\nvar a[2] >= 0\nminimize a',
            'problem "x"\nvar a >= 0\nminimize a[1]',
            'problem "x"\nvar a[2] >= 0\nminimize a[7]',
            'problem "x"\nparam p = 1\nminimize p',  # no variables
        ]
        for text in bad_docs:
            doc = parse(text)
            with pytest.raises(DslError) as err:
                compile_doc(doc)
            assert err.value.category == SEMANTIC, text


class TestRoundTrip:
    @pytest.mark.parametrize("kind", list(ProblemKind), ids=lambda k: k.value)
    def test_print_parse_round_trip_goldens(self, kind):
        doc = parse(FIXTURES.joinpath(GOLDEN_FILES[kind]).read_text())
        assert parse(print_doc(doc)).signature() == doc.signature()

    @given(st.integers(0, 10 ** 9))
    @settings(max_examples=60, deadline=None)
    def test_print_parse_round_trip_random_docs(self, seed):
        doc = parse(random_valid_doc(random.Random(seed)))
        assert parse(print_doc(doc)).signature() == doc.signature()


def random_valid_doc(rng) -> str:
    lines = [f'problem "r{rng.randint(0, 999)}"']
    n = rng.randint(1, 3)
    lines.append(f"var x[{n}] >= 0 <= {rng.randint(1, 9)}")
    lines.append(f"var y >= {-rng.randint(0, 3)}")
    vec = ", ".join(str(round(rng.uniform(0.1, 2.0), 2)) for _ in range(n))
    lines.append(f"param p[{n}] = [{vec}]")
    lines.append(f"param c = {round(rng.uniform(0.5, 3.0), 2)}")
    objective = ["sum(t, p[t] * x[t])"]
    if rng.random() < 0.5:
        objective.append(f"{round(rng.uniform(0.1, 2.0), 2)} * abs(y - c)")
    if rng.random() < 0.5:
        objective.append("max0(y - 1)")
    lines.append("minimize " + " + ".join(objective))
    if rng.random() < 0.7:
        lines.append(f"subject sum(t, x[t]) == {rng.randint(0, n)}")
    if rng.random() < 0.3:
        lines.append(f"subject y <= {rng.randint(1, 5)}")
    return "\n".join(lines) + "\n"


class TestCompileBuilderEquivalence:
    @pytest.mark.parametrize("kind", list(ProblemKind), ids=lambda k: k.value)
    def test_golden_doc_matches_oracle(self, kind):
        params = fixture_params(kind)
        text = golden_document(kind, params)
        assert text == FIXTURES.joinpath(GOLDEN_FILES[kind]).read_text()
        inst = compile_doc(parse(text))
        sol = solve_instance(inst)
        ref = oracle(kind, params)
        assert sol.status == "optimal"
        scale = max(1.0, abs(ref.objective))
        assert abs(sol.objective - ref.objective) <= 1e-6 * scale

    def test_battery_sizing_doc_structurally_matches_builder(self):
        from energy_concierge.ir import ScalarProblem, lower_to_lp
        from energy_concierge.problems import build_battery_sizing

        params = fixture_params(ProblemKind.BATTERY_SIZING)
        compiled = compile_doc(parse(golden_document(ProblemKind.BATTERY_SIZING, params)))
        built = build_battery_sizing(params)
        assert [t.kind for t in compiled.objective] == [t.kind for t in built.objective]
        assert isinstance(lower_to_lp(compiled), ScalarProblem)


class TestParseTotality:
    @given(st.binary(max_size=2048))
    @settings(max_examples=300, deadline=None)
    def test_never_crashes_on_bytes(self, blob):
        text = blob.decode("utf-8", errors="replace")
        try:
            parse(text)
        except DslError:
            pass  # the only permitted failure mode

    @given(st.text(max_size=512))
    @settings(max_examples=300, deadline=None)
    def test_never_crashes_on_text(self, text):
        try:
            parse(text)
        except DslError:
            pass

    def test_mutation_fuzz_of_valid_documents(self):
        # byte-level mutations of golden documents: crash-free, and every
        # failure is a categorized DslError
        rng = random.Random(4242)
        corpus = [FIXTURES.joinpath(f).read_text() for f in GOLDEN_FILES.values()]
        alphabet = "abXz019 []()*+-=<>.,\"\n"
        for _ in range(2000):
            text = list(rng.choice(corpus))
            for _ in range(rng.randint(1, 6)):
                pos = rng.randrange(len(text))
                if rng.random() < 0.5:
                    text[pos] = rng.choice(alphabet)
                else:
                    text.insert(pos, rng.choice(alphabet))
            outcome = classify_failure("".join(text))
            assert outcome is None or outcome[0] in (SYNTACTIC, SEMANTIC)
