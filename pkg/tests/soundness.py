"""Random pair checks of propagated moduli and range boxes on axiom matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from contlogic.algebras import MatrixCstar, MatrixTracial
from contlogic.evaluator import batch_values
from contlogic.syntax import free_variables, propagate_bounds, propagate_modulus, quantifier_matrix
from contlogic.theories import SUITES, load_suite

SLACK = 1e-9


@dataclass
class PairResult:
    axiom: str
    pairs: int
    modulus_violations: int
    box_violations: int
    worst_excess: float


def structure_for(suite) -> object:
    return MatrixTracial(2) if suite.signature.name == "tracial" else MatrixCstar(2)


def _points(M, domain, rng, count):
    """Interior samples mixed with points pushed onto the boundary."""
    pts = M.sample(domain, rng, count)
    edge = rng.random(count) < 0.5
    if domain.sort == M.scalar:
        pushed = M.project(domain, pts * 10)
        return np.where(edge, pushed, pts)
    pushed = M.project(domain, pts * 10)
    return np.where(edge[:, None, None], pushed, pts)


def _all_instances(suite, cap):
    for a in suite.axioms:
        for n in a.instances(cap):
            label = a.id if n is None else f"{a.id}@{n}"
            yield label, suite.doc.instantiate(a, n)


def check_formula(M, sig, label, phi, pairs, rng) -> PairResult:
    body, _ = quantifier_matrix(phi)
    fv = free_variables(body)
    box = propagate_bounds(sig, body)
    names = list(fv)
    if not names:
        v = batch_values(M, body, {}, {})
        bad = 0 if box.contains(v, SLACK) else 1
        return PairResult(label, pairs, 0, bad, 0.0)
    mods = {x: propagate_modulus(sig, body, x) for x in names}
    p = {x: _points(M, fv[x].domain, rng, pairs) for x in names}
    which = rng.integers(0, len(names), pairs)
    eps = 10.0 ** rng.uniform(-6, 0, pairs)
    q = {x: p[x].copy() for x in names}
    for k, x in enumerate(names):
        rows = np.nonzero(which == k)[0]
        if not len(rows):
            continue
        y = _points(M, fv[x].domain, rng, len(rows))
        d = np.asarray(M.metric(fv[x].sort, p[x][rows], y), dtype=float)
        delta = np.array([mods[x].delta(e) for e in eps[rows]])
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(d > 0, np.minimum(1.0, delta / d), 0.0)
        # convex combination stays in the ball and moves x by s * d <= delta
        shape = (-1,) + (1,) * (np.ndim(y) - 1)
        q[x][rows] = (1 - s.reshape(shape)) * p[x][rows] + s.reshape(shape) * y
        moved = np.asarray(M.metric(fv[x].sort, p[x][rows], q[x][rows]), dtype=float)
        assert np.all(moved <= delta * (1 + 1e-12) + 1e-15)
    vp = batch_values(M, body, {}, p)
    vq = batch_values(M, body, {}, q)
    excess = np.abs(vp - vq) - eps
    mod_bad = int(np.sum(excess > SLACK))
    box_bad = int(np.sum(~((vp >= box.lower - SLACK) & (vp <= box.upper + SLACK))))
    box_bad += int(np.sum(~((vq >= box.lower - SLACK) & (vq <= box.upper + SLACK))))
    return PairResult(label, pairs, mod_bad, box_bad, float(np.max(excess)))


def run_all(pairs: int = 1000, cap: int = 2, seed: int = 0) -> list[PairResult]:
    rng = np.random.default_rng(seed)
    out = []
    for name in SUITES:
        suite = load_suite(name)
        M = structure_for(suite)
        for label, phi in _all_instances(suite, cap):
            out.append(check_formula(M, suite.signature, f"{name}:{label}", phi, pairs, rng))
    return out
