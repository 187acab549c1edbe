import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from contlogic.algebras import (
    ConvolutionL1, DirectSumTracial, MatrixCstar, MatrixTracial, SupportOverflow, UnitaryGroup,
    adjoint, convolution_power, dumps_element, gelfand_eval, haar_unitary, normalized_trace,
    operator_norm, structure_from_spec, two_norm,
)


def D(M, k=1):
    return M.signature.domain("D", k)


def test_operator_norm_examples():
    assert operator_norm(np.array([[0, 2], [0, 0]], dtype=complex)) == pytest.approx(2.0)
    assert operator_norm(np.eye(4, dtype=complex)) == pytest.approx(1.0)


def test_operator_norm_matches_svd_oracle():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    assert abs(operator_norm(a) - math.sqrt(operator_norm(adjoint(a) @ a))) <= 1e-9
    assert abs(operator_norm(a) - np.linalg.svd(a, compute_uv=False)[0]) <= 1e-9


@pytest.mark.parametrize("n", [1, 2, 5])
def test_two_norm_of_unit(n):
    M = MatrixTracial(n)
    assert two_norm(M, M.element("one")) == pytest.approx(1.0)


def test_two_norm_examples():
    M = MatrixTracial(2)
    assert two_norm(M, np.diag([1, 0]).astype(complex)) == pytest.approx(math.sqrt(0.5))
    assert two_norm(M, np.array([[0, 1], [0, 0]], dtype=complex)) == pytest.approx(math.sqrt(0.5))


def test_cstar_identity_on_samples():
    M = MatrixCstar(3)
    x = M.samples(D(M), ("cstar",), 200)
    lhs = operator_norm(x @ adjoint(x))
    assert np.max(np.abs(lhs - operator_norm(x) ** 2)) <= 1e-9


def test_tracial_invariants_on_samples():
    M = MatrixTracial(3)
    a = M.samples(D(M), ("tr", 0), 200)
    b = M.samples(D(M), ("tr", 1), 200)
    assert np.all(np.sqrt(np.real(normalized_trace(adjoint(a) @ a))) <= operator_norm(a) + 1e-12)
    assert np.max(np.abs(normalized_trace(a @ b) - normalized_trace(b @ a))) <= 1e-9
    assert M.function("tr", [M.element("one")]) == pytest.approx(1.0)


def test_projection_idempotent_and_in_ball():
    for M in (MatrixCstar(3), MatrixTracial(2), DirectSumTracial(2, 1), ConvolutionL1(8)):
        rng = np.random.default_rng(0)
        p = M.sample(D(M, 2), rng, 50) * 3
        q = M.project(D(M, 2), p)
        assert M.membership_defect(D(M, 2), q) <= 1e-9
        assert np.max(np.abs(M.project(D(M, 2), q) - q)) <= 1e-9


def test_metric_axioms_on_samples():
    for M in (MatrixCstar(2), MatrixTracial(3), ConvolutionL1(6), UnitaryGroup(3)):
        dom = M.signature.domain("W") if isinstance(M, UnitaryGroup) else D(M)
        sort = dom.sort
        x, y, z = (M.samples(dom, ("metric", i), 100) for i in range(3))
        dxy, dyx = M.metric(sort, x, y), M.metric(sort, y, x)
        assert np.max(np.abs(dxy - dyx)) <= 1e-12
        assert np.all(dxy <= M.metric(sort, x, z) + M.metric(sort, z, y) + 1e-9)
        assert np.max(M.metric(sort, x, x)) <= 1e-12


def test_direct_sum_central_projection_commutes():
    M = DirectSumTracial(2, 2)
    p = M.central_projections()[0]
    a = M.samples(D(M), ("dsum",), 100)
    assert np.max(np.abs(a @ p - p @ a)) <= 1e-12
    assert normalized_trace(p).real == pytest.approx(0.5)


def test_direct_sum_trace():
    M = DirectSumTracial(1, 3)
    a = np.diag([4.0, 0, 0, 0]).astype(complex)
    assert M.function("tr", [a]) == pytest.approx(1.0)


def test_gelfand_examples():
    M = ConvolutionL1(8)
    x0 = 0.5 * (M.basis(1) + M.basis(-1))
    for t in (0.0, 0.3, 2.0):
        assert gelfand_eval(M, x0, t) == pytest.approx(math.cos(t))
        assert gelfand_eval(M, M.basis(0), t) == pytest.approx(1.0)
    x1 = convolution_power(M, x0, 2)
    assert gelfand_eval(M, x1, math.pi / 3) == pytest.approx(0.25)


def test_convolution_square():
    M = ConvolutionL1(4)
    x0 = 0.5 * (M.basis(1) + M.basis(-1))
    assert M.to_dict(convolution_power(M, x0, 2)) == {-2: 0.25, 0: 0.5, 2: 0.25}
    assert np.array_equal(convolution_power(M, x0, 1), x0)


def test_powers_are_binomial_unit_vectors():
    M = ConvolutionL1(64)
    x0 = 0.5 * (M.basis(1) + M.basis(-1))
    for i in range(7):
        m = 2 ** i
        x = convolution_power(M, x0, m)
        assert M.norm(x) == pytest.approx(1.0, abs=1e-12)
        for j, c in M.to_dict(x).items():
            assert (m + j) % 2 == 0
            assert c == pytest.approx(math.comb(m, (m + j) // 2) / 2 ** m)


def test_support_overflow():
    M = ConvolutionL1(3)
    with pytest.raises(SupportOverflow):
        M.convolve(M.basis(2), M.basis(2))
    with pytest.raises(SupportOverflow):
        M.basis(4)


def test_l1_submultiplicative_and_contractive_transform():
    M = ConvolutionL1(16)
    x = M.samples(D(M), ("l1", 0), 40)
    y = M.samples(D(M), ("l1", 1), 40)
    xy = M.convolve(x, y)
    assert np.all(M.norm(xy) <= M.norm(x) * M.norm(y) + 1e-9)
    t = np.linspace(0, 2 * np.pi, 64)
    hat = np.abs(np.stack([M.gelfand(v, t) for v in x]))
    assert np.all(hat.max(axis=1) <= M.norm(x) + 1e-9)


def test_gelfand_bound_lower_bounds_l1_distance():
    M = ConvolutionL1(16)
    x = M.samples(D(M), ("gb", 0), 20)
    z = M.samples(D(M), ("gb", 1), 20)
    y = M.samples(D(M), ("gb", 2), 20)
    t = np.linspace(0, 2 * np.pi, 128)
    for a, b, c in zip(x, z, y):
        sup = np.max(np.abs(M.gelfand(a, t) * M.gelfand(b, t) - M.gelfand(c, t)))
        assert sup <= M.norm(M.convolve(a, b) - c) + 1e-9


def test_unitary_group_closed():
    G = UnitaryGroup(3)
    W = G.signature.domain("W")
    u = G.samples(W, ("u", 0), 30)
    v = G.samples(W, ("u", 1), 30)
    prod = G.function("gmul", [u, v])
    assert G.membership_defect(W, prod) <= 1e-9
    assert G.membership_defect(W, G.function("inv", [u])) <= 1e-9
    assert np.max(G.metric("G", u, v)) <= 2 + 1e-12


def test_samples_prefix_property():
    M = MatrixTracial(2)
    a = M.samples(D(M), ("prefix",), 64 * 3)
    M2 = MatrixTracial(2)
    b = M2.samples(D(M2), ("prefix",), 70)
    assert np.array_equal(a[:70], b)


def test_structure_specs():
    assert structure_from_spec("matC*:2").spec == "matC*:2"
    assert structure_from_spec("tracial:3").n == 3
    assert structure_from_spec("dsum:2,2").blocks == (2, 2)
    assert structure_from_spec("l1:8").N == 8
    with pytest.raises(ValueError):
        structure_from_spec("hilbert:2")
    with pytest.raises(ValueError):
        MatrixCstar(33)


def test_element_json_round_trip():
    M = MatrixTracial(2)
    a = M.samples(D(M), ("json",), 1)[0]
    back = M.from_json("U", json.loads(dumps_element(M, "U", a)))
    assert np.allclose(back, a, atol=0, rtol=0)
    L = ConvolutionL1(4)
    x = 0.5 * (L.basis(1) + L.basis(-1))
    assert np.array_equal(L.from_json("U", L.to_json("U", x)), x)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_haar_unitaries_are_unitary(seed):
    u = haar_unitary(np.random.default_rng(seed), 4, 3)
    eye = np.eye(4)
    assert np.max(np.abs(adjoint(u) @ u - eye)) <= 1e-10
