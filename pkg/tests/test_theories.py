import numpy as np
import pytest

from contlogic import corpus
from contlogic.algebras import (
    ConvolutionL1, DirectSumTracial, MatrixCstar, MatrixTracial, UnitaryGroup, haar_unitary,
)
from contlogic.evaluator import QuantConfig, eval_sentence
from contlogic.parser import parse_formula
from contlogic.theories import (
    SUITES, SignatureMismatch, check_signature, evaluate_suite, formula_pseudo_distance,
    ii1_axiom_value, load_suite, suite_from_text, theory_fragment,
)

from oracles import ii1_grid_oracle

# eigenvalue-grid oracle, mesh 5e-4 (tests/oracles.py)
II1_ORACLE = {
    2: 0.16366159115666448,
    3: 0.015023447149542624,
    5: 0.08169011381620933,
    22: 0.00012806800197251444,
}


@pytest.mark.parametrize("name", SUITES)
def test_bundled_suites_validate(name):
    suite = load_suite(name)
    suite.validate()
    assert suite.ids and len(set(suite.ids)) == len(suite.ids)


def test_suite_lookup_and_restrict():
    suite = load_suite("tcstar")
    sub = suite.restrict(["cstar_identity"])
    assert sub.ids == ["cstar_identity"]
    with pytest.raises(KeyError):
        suite.axiom("nope")
    assert "nearest" in suite.hint_keys("ball_contains_open_unit")


def test_tcstar_on_matrix_cstar_2():
    report = evaluate_suite(MatrixCstar(2), load_suite("tcstar"), cap=4)
    assert report.verdict <= 1e-6 and report.passed
    assert report.verdict == max(r.residual for r in report.rows)
    d = report.to_dict()
    assert d["schema"] == 1 and d["instance_cap"] == 4
    assert [r["id"] for r in d["rows"]] == load_suite("tcstar").ids


def test_ttr_on_matrix_tracial_3_with_hints():
    report = evaluate_suite(MatrixTracial(3), load_suite("ttr"), cap=4)
    assert report.verdict <= 1e-6
    assert report.flagged() == []
    assert "verdict" in report.table()


def test_factor_axiom_on_direct_sum():
    suite = load_suite("tfactor").restrict(["factor"])
    report = evaluate_suite(DirectSumTracial(2, 2), suite, QuantConfig(sample_budget=64))
    assert report.row("factor").residual >= 0.499


def test_factor_axiom_vanishes_on_factors():
    suite = load_suite("tfactor").restrict(["factor"])
    for n in (1, 2, 3):
        assert evaluate_suite(MatrixTracial(n), suite, QuantConfig(sample_budget=256)).verdict == 0.0


def test_signature_mismatch():
    with pytest.raises(SignatureMismatch):
        evaluate_suite(MatrixCstar(2), load_suite("ttr"))
    with pytest.raises(SignatureMismatch):
        check_signature(ConvolutionL1(4), corpus.signature("tracial"))
    with pytest.raises(SignatureMismatch):
        check_signature(UnitaryGroup(2), corpus.signature("cstar"))
    # tracial structures interpret every cstar symbol
    check_signature(MatrixTracial(2), corpus.signature("cstar"))


def test_suite_from_text():
    suite = suite_from_text(
        "theory tiny over cstar;\naxiom zero_norm : ||0||;\naxiom star [n] : sup x in D[n]. dU(x^*^*, x);\n"
    )
    report = evaluate_suite(MatrixCstar(1), suite, cap=2)
    assert report.row("star").instances == [1, 2]
    assert report.verdict == 0.0


@pytest.mark.parametrize("make", [MatrixCstar, MatrixTracial])
def test_verdict_invariant_under_conjugation(make):
    suite = load_suite("tcstar" if make is MatrixCstar else "ttr")
    U = haar_unitary(np.random.default_rng(7), 2, 1)[0]
    base = evaluate_suite(make(2), suite, cap=2).verdict
    conj = evaluate_suite(make(2, frame=U), suite, cap=2).verdict
    assert abs(base - conj) <= 1e-6


@pytest.mark.parametrize("k", [1, 3])
def test_ii1_axiom_value_matches_oracle(k):
    assert abs(ii1_axiom_value(k).value - ii1_grid_oracle(k, mesh=5e-4)) <= 1e-3


def test_ii1_axiom_value_rejects_large_k():
    with pytest.raises(ValueError):
        ii1_axiom_value(33)


def test_ii1_value_at_22():
    bound = abs(7 / 22 - 1 / np.pi) + 1e-3
    assert ii1_axiom_value(22).value <= bound
    assert abs(ii1_axiom_value(22).value - II1_ORACLE[22]) <= 1e-3


def test_ii1_monotone_along_oracle_chain():
    chain = [2, 5, 3, 22]
    gap = {k: min(abs(j / k - 1 / np.pi) for j in range(k + 1)) for k in chain}
    oracle = [II1_ORACLE[k] for k in chain]
    # on this chain the oracle decreases exactly as the best rational gap does
    assert [gap[k] for k in chain] == sorted(gap.values(), reverse=True)
    assert oracle == sorted(oracle, reverse=True)
    values = [ii1_axiom_value(k).value for k in chain]
    assert all(abs(v - o) <= 1e-3 for v, o in zip(values, oracle))
    assert values == sorted(values, reverse=True)


def test_pseudo_distance_reflexive():
    sig = corpus.signature("tracial")
    phi = parse_formula(sig, "||x * x^* - x||", {"x": "D[1]"})
    assert formula_pseudo_distance(phi, phi, [MatrixTracial(2), MatrixTracial(3)]) == 0.0


def test_pseudo_distance_norm_vs_zero():
    sig = corpus.signature("tracial")
    M = MatrixTracial(2)
    phi = parse_formula(sig, "||x||", {"x": "D[1]"})
    zero = parse_formula(sig, "0", {})
    cfg = QuantConfig(seed_points=((M.element("one"),),))
    d = formula_pseudo_distance(phi, zero, [M], [sig.domain("D", 1)], cfg, signature=sig)
    assert d >= 1 - 1e-6


def test_pseudo_distance_involution_isometry():
    sig = corpus.signature("tracial")
    phi = parse_formula(sig, "||x||", {"x": "D[1]"})
    psi = parse_formula(sig, "||x^*||", {"x": "D[1]"})
    assert formula_pseudo_distance(phi, psi, [MatrixTracial(2), MatrixTracial(3)]) <= 1e-9


def test_pseudo_distance_signature_check():
    sig = corpus.signature("tracial")
    phi = parse_formula(sig, "||x||", {"x": "D[1]"})
    with pytest.raises(SignatureMismatch):
        formula_pseudo_distance(phi, phi, [MatrixCstar(2)], signature=sig)
    with pytest.raises(ValueError):
        formula_pseudo_distance(phi, phi, [MatrixTracial(2)], [sig.domain("D", 1)] * 2)


def test_theory_fragment_table():
    sig = corpus.signature("tracial")
    sentences = {
        "trace_unit": parse_formula(sig, "dC(tr(one), 1)"),
        "small": parse_formula(sig, "inf a in D[1]. |tr(a)|"),
        "atomless": load_suite("tii1").instantiate("atomless"),
    }
    family = [MatrixTracial(1), MatrixTracial(3)]
    frag = theory_fragment(sentences, family)
    assert frag.models == [M.spec for M in family]
    assert frag.value(family[0].spec, "trace_unit") == pytest.approx(0.0, abs=1e-12)
    assert frag.value(family[1].spec, "small") == 0.0
    assert abs(frag.value(family[1].spec, "atomless") - II1_ORACLE[3]) <= 1e-3
    d = frag.to_dict()
    assert len(d["values"]) == 2 and len(d["values"][0]) == 3
    assert eval_sentence(family[1], sentences["small"]).value == frag.row(family[1].spec)[1]
