import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from contlogic import corpus
from contlogic.algebras import DirectSumTracial, MatrixCstar, MatrixTracial, NetUnavailable, operator_norm, two_norm
from contlogic.evaluator import eval_formula, eval_sentence
from contlogic.optimizer import (
    LOWER, UPPER, CertifiedBracket, QuantConfig, certified_bracket, maximize, minimize, search,
)
from contlogic.parser import parse_formula

from oracles import scalar_trace_net


def D(M, k=1):
    return M.signature.domain("D", k)


def test_config_validation():
    with pytest.raises(ValueError):
        QuantConfig(sample_budget=0)
    with pytest.raises(ValueError):
        QuantConfig(refine_step_size=0)
    with pytest.raises(ValueError):
        QuantConfig(strategy="annealing")


def test_bracket_validation():
    with pytest.raises(ValueError):
        CertifiedBracket(1.0, 0.0, 0.1)


def test_maximize_two_norm_seeded_with_identity():
    M = MatrixTracial(2)
    est = maximize(M, D(M), lambda a: two_norm(M, a), seeds=[M.element("one")])
    assert est.value == pytest.approx(1.0)
    assert est.bound_direction == LOWER


def _factor_objective(M):
    sig = M.signature
    body = corpus.theory_doc("tfactor").instantiate(corpus.theory_doc("tfactor").axioms[-1], None).body
    return lambda a: eval_formula(M, body, {"a": a}).value


def test_maximize_factor_objective_on_direct_sum():
    M = DirectSumTracial(2, 2)
    est = maximize(M, D(M), _factor_objective(M), QuantConfig(sample_budget=16),
                   seeds=M.central_projections())
    assert est.value >= 0.499


def test_maximize_factor_objective_on_factor_is_zero():
    M = MatrixTracial(2)
    est = maximize(M, D(M), _factor_objective(M), QuantConfig(sample_budget=128))
    assert est.value == 0.0


def test_minimize_ii1_objective_on_tracial_3():
    M = MatrixTracial(3)
    f = lambda a: (two_norm(M, a @ a.conj().T - (a @ a.conj().T) @ (a @ a.conj().T))
                   + abs(M.function("tr", [a @ a.conj().T]).real - 1 / math.pi))
    p = np.diag([1.0, 0, 0]).astype(complex)
    est = minimize(M, D(M), f, QuantConfig(sample_budget=256), seeds=[p])
    assert est.value <= 0.016
    assert est.bound_direction == UPPER


@pytest.mark.parametrize("M", [MatrixCstar(2), MatrixTracial(3), DirectSumTracial(1, 2)])
def test_minimize_distance_to_zero(M):
    est = minimize(M, D(M), lambda x: float(M.metric("U", x, M.element("zero"))))
    assert est.value == 0.0
    assert np.array_equal(est.witness["x"], M.element("zero"))


def test_minimize_with_ball_hint():
    M = MatrixCstar(2)
    a = M.samples(D(M, 2), ("hint",), 1)[0]
    n = 2
    target = a / (operator_norm(a) + 1 / n)
    est = minimize(M, D(M), lambda b: operator_norm(b - target), seeds=[target])
    assert est.value <= 1e-9


def test_scalar_disc_bracket():
    M = MatrixTracial(1)
    sig = M.signature
    phi = parse_formula(sig, "dC(lam, 0)", {"lam": "B[1]"})
    br = certified_bracket(M, sig.domain("B", 1), phi, "lam", QuantConfig(net_mesh=0.01))
    assert br.contains(1.0) and br.width <= 0.02


def test_trace_gap_bracket_matches_grid_oracle():
    M = MatrixTracial(1)
    sig = M.signature
    phi = parse_formula(sig, "|tr(a) - 1/pi|", {"a": "D[1]"})
    br = certified_bracket(M, D(M), phi, "a", QuantConfig(net_mesh=0.001), sense="inf")
    assert br.contains(0.0) and br.width <= 0.002
    lo, hi = scalar_trace_net(0.001)
    assert lo <= br.upper + 1e-12 and br.lower <= hi + 1e-12


def test_no_net_for_large_matrices():
    M = MatrixTracial(4)
    phi = parse_formula(M.signature, "||a||", {"a": "D[1]"})
    with pytest.raises(NetUnavailable):
        certified_bracket(M, D(M), phi, "a", QuantConfig(strategy="certifiedNet"))


def test_bracket_contains_sampling_estimate():
    M = MatrixTracial(1)
    sig = M.signature
    body = parse_formula(sig, "|RE(tr(a * a)) - 0.3| + ||a - a^*||", {"a": "D[1]"})
    sent = parse_formula(sig, "inf a in D[1]. |RE(tr(a * a)) - 0.3| + ||a - a^*||")
    br = certified_bracket(M, D(M), body, "a", QuantConfig(net_mesh=0.005), sense="inf")
    est = eval_sentence(M, sent)
    assert br.lower - 1e-12 <= est.value
    sup_sent = parse_formula(sig, "sup a in D[1]. |RE(tr(a * a)) - 0.3| + ||a - a^*||")
    br = certified_bracket(M, D(M), body, "a", QuantConfig(net_mesh=0.005), sense="sup")
    assert eval_sentence(M, sup_sent).value <= br.upper + 1e-12


def test_search_first_maximum_wins():
    M = MatrixTracial(2)
    zero, one = M.element("zero"), M.element("one")
    res = search(M, [D(M)], lambda arr: (np.zeros(len(arr[0])), None), "sup",
                 budget=4, refine_steps=0, step_size=0.25, seeds=[(one,), (zero,)])
    assert np.array_equal(res.best[0], one)
    with pytest.raises(ValueError):
        search(M, [D(M)], lambda arr: (np.zeros(len(arr[0])), None), "max",
               budget=4, refine_steps=0, step_size=0.25)


def test_refinement_never_worsens():
    M = MatrixTracial(2)
    f = lambda a: -two_norm(M, a - 0.3 * M.element("one"))
    plain = maximize(M, D(M), f, QuantConfig(strategy="samplingOnly"))
    refined = maximize(M, D(M), f, QuantConfig(refine_steps=8))
    assert refined.value >= plain.value


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 1000))
def test_seeding_dominance(seed):
    M = MatrixTracial(2)
    rng = np.random.default_rng(seed)
    extra = M.project(D(M), M.sample(D(M), rng, 3))
    f = lambda a: float(np.real(M.function("tr", [a @ a])))
    base = maximize(M, D(M), f, QuantConfig(strategy="samplingOnly", sample_budget=8))
    seeded = maximize(M, D(M), f, QuantConfig(strategy="samplingOnly", sample_budget=8), seeds=list(extra))
    assert seeded.value >= base.value
    base = minimize(M, D(M), f, QuantConfig(strategy="samplingOnly", sample_budget=8))
    seeded = minimize(M, D(M), f, QuantConfig(strategy="samplingOnly", sample_budget=8), seeds=list(extra))
    assert seeded.value <= base.value
