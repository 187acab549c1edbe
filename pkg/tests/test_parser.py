import pytest
from hypothesis import given, settings, strategies as st

from contlogic import corpus
from contlogic.parser import (
    ParseError, parse_experiment, parse_formula, parse_signature, parse_source, parse_theory,
    parse_typespec, print_formula, print_signature, source_kind, tokenize,
)
from contlogic.syntax import Basic, Connective, Quantifier, check_sorts, conn, const


@pytest.fixture(scope="module")
def tracial():
    return corpus.signature("tracial")


@pytest.fixture(scope="module")
def prelude():
    return corpus.theory_doc("prelude").macros


def test_cstar_signature_file():
    sig = parse_signature(corpus.read("cstar.sig"))
    assert sig.name == "cstar"
    assert sig.sorts["U"].metric == "dU" and sig.sorts["C"].scalar


def test_missing_metric_diagnostic():
    with pytest.raises(ParseError) as e:
        parse_signature("sort U;")
    d = e.value.diagnostics[0]
    assert d.code == "MissingMetric"
    assert (d.line, d.column) == (1, 6)


def test_tracial_signature_has_trace_and_re(tracial):
    assert "tr" in tracial.functions and "RE" in tracial.relations


def test_factor_axiom_with_macros(tracial, prelude):
    phi = parse_formula(tracial, "sup a in D[1]. max(0, xi(a) - eta(a))", macros=prelude)
    assert isinstance(phi, Quantifier) and phi.kind == "sup"
    assert phi.body.fn.kind == "clamppos"
    inner = phi.body.args[0]
    assert inner.fn.kind == "sub"
    assert isinstance(inner.args[1], Quantifier)
    assert check_sorts(tracial, phi)


def test_zero_is_constant_formula(tracial):
    assert parse_formula(tracial, "0") == const(0.0)


def test_scaled_ball_instance(tracial):
    phi = parse_formula(tracial, "sup a in D[n]. inf b in D[1]. dU((1/n) a, b)", params={"n": 3})
    assert phi.var.domain == tracial.domain("D", 3)
    dist = phi.body.body
    assert isinstance(dist, Basic) and dist.relation == "dU"
    assert dist.args[0].args[0].value == pytest.approx(1 / 3)


def test_norm_sugar(tracial):
    a = parse_formula(tracial, "||x||", {"x": "D[1]"})
    b = parse_formula(tracial, "dU(x, 0)", {"x": "D[1]"})
    assert a == b


def test_abs_shift_and_clamp(tracial):
    phi = parse_formula(tracial, "|RE(tr(x)) - 0.5|", {"x": "D[1]"})
    assert phi.fn.kind == "absshift" and phi.fn.param == 0.5
    assert parse_formula(tracial, "max(0, ||x||)", {"x": "D[1]"}).fn.kind == "clamppos"


def test_precedence(tracial):
    phi = parse_formula(tracial, "1 + 2 * ||x||", {"x": "D[1]"})
    assert phi.fn.kind == "add"
    assert phi.args[1].fn.kind == "scale"


def test_factor_round_trip(tracial, prelude):
    phi = parse_formula(tracial, "sup a in D[1]. max(0, xi(a) - eta(a))", macros=prelude)
    assert parse_formula(tracial, print_formula(phi, tracial)) == phi


def test_signature_printing_sorted_and_stable():
    sig = corpus.signature("cstar")
    text = print_signature(sig)
    lines = [l for l in text.splitlines() if l.startswith("sort ")]
    assert lines == sorted(lines) and len(lines) == 2
    assert print_signature(parse_signature(text)) == text
    assert parse_signature(text) == sig


def test_nested_quantifiers_fully_parenthesized(tracial):
    phi = parse_formula(tracial, "sup a in D[2]. inf b in D[1]. dU(a, b) + 1")
    text = print_formula(phi, tracial)
    assert text.startswith("(sup a in D[2]. (inf b in D[1]. ")
    assert parse_formula(tracial, text) == phi


def test_group_binding(tracial):
    phi = parse_formula(tracial, "sup x, y in D[1]. dU(x, y)")
    assert phi.var.name == "x" and phi.body.var.name == "y"


def test_hint_on_group_rejected(tracial):
    with pytest.raises(ParseError) as e:
        parse_formula(tracial, "inf x, y in D[1] @nearest. dU(x, y)")
    assert "HintOnGroup" in e.value.codes


def test_diagnostic_location(tracial):
    with pytest.raises(ParseError) as e:
        parse_formula(tracial, "sup a in D[1].\n  dU(a, )")
    d = e.value.diagnostics[0]
    assert d.line == 2 and d.snippet


def test_theory_schema_instances():
    doc = corpus.theory_doc("tcstar")
    ax = [a for a in doc.axioms if a.id == "ball_contains_open_unit"][0]
    assert ax.instances(4) == [1, 2, 3, 4]
    assert doc.instantiate(ax, 2).var.domain.index == 2


def test_duplicate_axiom_id_rejected():
    text = "theory t over cstar;\naxiom a : 0;\naxiom a : 0;\n"
    with pytest.raises(ParseError) as e:
        parse_theory(text)
    assert "DuplicateName" in e.value.codes


def test_typespec_and_experiment():
    spec = parse_typespec(corpus.read("relcomm.typ"))
    assert list(spec.variables) == ["x"]
    assert spec.conditions[0].foreach == ("g", "generators")
    exp = parse_experiment(corpus.read("ii1_limits.exp"))
    assert exp["command"] == "limits" and exp["dims"] == "1..12"


@pytest.mark.parametrize("name", corpus.bundled_files())
def test_source_kind_of_bundled_files(name):
    kind = source_kind(corpus.read(name))
    expected = {"sig": "signature", "thy": "theory", "typ": "typeSpec", "exp": "experiment"}[name.rsplit(".", 1)[1]]
    assert kind == expected
    assert parse_source(corpus.read(name))[0] == kind


_alphabet = st.sampled_from(list("()[]|,.;:+-*/^@=<>#' \n\tabxyzDBUn0123456789") + [
    "sup", "inf", "in", "max", "min", "abs", "dU", "tr", "RE", "one", "||", "^*", "..", ":=",
    "theory", "axiom", "sort", "fn", "rel", "domain", "type", "var", "cond",
])


@settings(max_examples=300, deadline=None)
@given(st.lists(_alphabet, max_size=40).map("".join))
def test_fuzz_only_parse_errors(text):
    sig = corpus.signature("tracial")
    for fn in (lambda t: parse_formula(sig, t), parse_signature, parse_theory, parse_typespec, parse_source):
        try:
            fn(text)
        except ParseError:
            pass


@settings(max_examples=200, deadline=None)
@given(st.binary(max_size=60))
def test_fuzz_bytes(data):
    text = data.decode("utf-8", errors="replace")
    try:
        tokenize(text)
        parse_source(text)
    except ParseError:
        pass
