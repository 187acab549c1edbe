"""Order-property patterns, l1 instability witnesses, type residuals and limit tables."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .algebras import ConvolutionL1, MatrixTracial, MissingElement, Structure
from .evaluator import QuantConfig, QuantEstimate, eval_formula, eval_sentence
from .parser import TypeSpecDoc, print_formula
from .signature import ConstantDecl, Signature
from .syntax import Condition, Const, Formula, Quantifier, Var, conn, free_variables, iter_nodes
from .theories import check_signature

__all__ = [
    "ArityMismatch", "MissingParameter", "OrderReport", "check_order_pattern",
    "l1_element", "l1_witness", "l1_phi_upper", "l1_phi_lower", "default_tgrid",
    "l1_order_report", "normalize", "type_residual", "type_status", "LimitTable",
    "sentence_limit_table",
]


class ArityMismatch(ValueError):
    pass


class MissingParameter(KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"type parameter {self.name!r} does not resolve in the structure"


# ---------------------------------------------------------------------------
# order property


@dataclass
class OrderReport:
    """Pattern check of ``psi(a_i, a_j)``: at most ``delta`` above the diagonal, at least ``1 - delta`` on and below.

    ``lower`` and ``upper`` bracket each cell; for exactly evaluated
    formulas both equal ``values``.
    """

    formula: str
    n: int
    delta: float
    values: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    separation: float
    normalization: str = "none"
    first_failure: tuple[int, int] | None = None

    @property
    def verdict(self) -> str:
        return "pass" if self.first_failure is None else "fail"

    @property
    def passed(self) -> bool:
        return self.first_failure is None

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "kind": "order_report",
            "formula": self.formula,
            "n": self.n,
            "delta": self.delta,
            "normalization": self.normalization,
            "verdict": self.verdict,
            "first_failure": list(self.first_failure) if self.first_failure else None,
            "separation": self.separation,
            "values": self.values.tolist(),
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "j", "value", "lower", "upper", "required"])
        for i in range(self.n):
            for j in range(self.n):
                req = f"<={self.delta!r}" if i < j else f">={1 - self.delta!r}"
                w.writerow([i, j, repr(float(self.values[i, j])), repr(float(self.lower[i, j])),
                            repr(float(self.upper[i, j])), req])
        return buf.getvalue()


def _first_failure(lower: np.ndarray, upper: np.ndarray, delta: float):
    n = lower.shape[0]
    for i in range(n):
        for j in range(n):
            if i < j and upper[i, j] > delta:
                return (i, j)
            if i >= j and lower[i, j] < 1 - delta:
                return (i, j)
    return None


def _tuple_distance(M: Structure, sorts: Sequence[str], a: Sequence, b: Sequence) -> float:
    return max(float(M.metric(s, x, y)) for s, x, y in zip(sorts, a, b))


def _separation(M: Structure, sorts, tuples) -> float:
    n = len(tuples)
    if n < 2:
        return math.inf
    return min(_tuple_distance(M, sorts, tuples[i], tuples[j]) for i in range(n) for j in range(i + 1, n))


def check_order_pattern(M: Structure, psi: Formula, tuples: Sequence[Sequence], delta: float,
                        left: Sequence[str] | None = None, right: Sequence[str] | None = None,
                        cfg: QuantConfig | None = None) -> OrderReport:
    """Evaluate ``psi(a_i, a_j)`` on every ordered pair of ``tuples``.

    Parameters
    ----------
    psi : Formula
        Formula in ``2k`` free variables.  ``left`` and ``right`` name the two
        groups; by default the first ``k`` free variables (in order of
        occurrence) form the left group.
    tuples : sequence of k-tuples of points
    delta : float
        Pattern tolerance.
    """
    fv = list(free_variables(psi).items())
    tuples = [tuple(t) if isinstance(t, (tuple, list)) else (t,) for t in tuples]
    if left is None or right is None:
        if len(fv) % 2:
            raise ArityMismatch(f"psi has {len(fv)} free variables, expected an even number")
        k = len(fv) // 2
        left = [n for n, _ in fv[:k]]
        right = [n for n, _ in fv[k:]]
    else:
        k = len(left)
        if len(right) != k or {*left, *right} != {n for n, _ in fv}:
            raise ArityMismatch("left/right groups must split the free variables of psi evenly")
    for t in tuples:
        if len(t) != k:
            raise ArityMismatch(f"tuple of length {len(t)} for a formula in {k} + {k} variables")
    sorts = [dict(fv)[name].sort for name in left]
    n = len(tuples)
    lower = np.zeros((n, n))
    upper = np.zeros((n, n))
    vals = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            env = dict(zip(left, tuples[i]))
            env.update(zip(right, tuples[j]))
            est = eval_formula(M, psi, env, cfg)
            vals[i, j] = est.value
            lower[i, j] = upper[i, j] = est.value
            if est.indeterminate:
                lower[i, j], upper[i, j] = -math.inf, math.inf
            elif est.bound_direction == "lowerBoundOfSup":
                upper[i, j] = math.inf
            elif est.bound_direction == "upperBoundOfInf":
                lower[i, j] = -math.inf
    return OrderReport(print_formula(psi, M.signature), n, float(delta), vals, lower, upper,
                       _separation(M, sorts, tuples), "none", _first_failure(lower, upper, delta))


# ---------------------------------------------------------------------------
# l1(Z): x_i = ((f_1 + f_-1)/2)^(2^i)


def _window(*indices: int) -> ConvolutionL1:
    return ConvolutionL1(max(1, 2 ** max(indices)))


def l1_element(M: ConvolutionL1, i: int):
    """``x_i``; raises SupportOverflow when ``2**i`` exceeds the window."""
    x0 = 0.5 * (M.basis(1) + M.basis(-1))
    return M.power(x0, 2 ** i)


def l1_witness(M: ConvolutionL1, i: int, j: int):
    """``z`` with ``x_i z = x_j`` for ``i <= j``, namely ``x_0^(2^j - 2^i)``."""
    if i > j:
        raise ValueError("the explicit witness exists only for i <= j")
    x0 = 0.5 * (M.basis(1) + M.basis(-1))
    return M.power(x0, 2 ** j - 2 ** i)


def l1_phi_upper(i: int, j: int, M: ConvolutionL1 | None = None) -> float:
    """``||x_i z - x_j||_1`` at the explicit witness; an upper bound for ``phi(x_i, x_j)``."""
    if i > j:
        raise ValueError("l1_phi_upper needs i <= j")
    M = M or _window(i, j)
    z = l1_witness(M, i, j)
    return float(M.norm(M.convolve(l1_element(M, i), z) - l1_element(M, j)))


def default_tgrid(points: int = 512, max_j: int = 6) -> np.ndarray:
    """Uniform grid on ``[0, pi]`` plus the points where ``cos(t)^(2^j) = 1/2``."""
    extra = [math.acos(2.0 ** (-(2.0 ** -j))) for j in range(max_j + 1)]
    return np.unique(np.concatenate([np.linspace(0.0, math.pi, points), extra]))


def l1_phi_lower(i: int, j: int, tgrid: Sequence[float] | None = None,
                 M: ConvolutionL1 | None = None) -> float:
    """Gelfand-transform lower bound ``max_t max(0, |x_j^(t)| - |x_i^(t)|)`` for ``phi(x_i, x_j)``.

    Valid for every ``z`` with ``||z||_1 <= 1`` because the transform is
    contractive.
    """
    M = M or _window(i, j)
    t = default_tgrid() if tgrid is None else np.asarray(tgrid, dtype=float)
    hi = np.abs(M.gelfand(l1_element(M, i), t))
    hj = np.abs(M.gelfand(l1_element(M, j), t))
    return float(max(0.0, np.max(hj - hi)))


def normalize(phi_value: float) -> float:
    """``1 - 4 min(phi, 1/4)``, mapping 0 to 1 and anything at least 1/4 to 0."""
    return 1.0 - 4.0 * min(phi_value, 0.25)


def l1_order_report(max_index: int = 4, delta: float = 0.05,
                    tgrid: Sequence[float] | None = None) -> OrderReport:
    """Certified order pattern of ``x_0 .. x_max_index`` in l1.

    The pattern formula is ``psi(a, b) = 1 - 4 min(phi(b, a), 1/4)`` with
    ``phi(x, y) = inf_{||z|| <= 1} ||x z - y||``.  Cells on and below the
    diagonal use the explicit witness (an upper bound on ``phi``, so a
    lower bound on ``psi``); cells above use the Gelfand bound.
    """
    n = max_index + 1
    M = _window(max_index)
    lower = np.zeros((n, n))
    upper = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i >= j:
                # phi(x_j, x_i) with j <= i: witness
                u = l1_phi_upper(j, i, M)
                lower[i, j] = normalize(u)
                upper[i, j] = 1.0
            else:
                lo = l1_phi_lower(j, i, tgrid, M)
                upper[i, j] = normalize(lo)
                lower[i, j] = 0.0
    values = np.where(np.arange(n)[:, None] >= np.arange(n)[None, :], lower, upper)
    xs = [(l1_element(M, i),) for i in range(n)]
    sep = _separation(M, ["U"], xs)
    return OrderReport(
        "1 - 4 min(phi(b, a), 1/4), phi(x, y) = inf_{z in D[1]} ||x z - y||",
        n, float(delta), values, lower, upper, sep, "1 - 4*min(phi(b,a), 1/4)",
        _first_failure(lower, upper, delta),
    )


# ---------------------------------------------------------------------------
# types


def _resolve_param(M: Structure, element: str):
    try:
        return M.element(element)
    except MissingElement:
        raise MissingParameter(element) from None


def type_formula(M: Structure, spec: TypeSpecDoc) -> tuple[Formula, dict, Signature]:
    """Violation formula of ``spec`` in ``M``, its parameter assignment and the expanded signature."""
    check_signature(M, spec.signature)
    env: dict = {}
    decls = []
    domains = {}
    for p in spec.params:
        domains[p.name] = p.domain
        if not p.element.startswith("@"):
            env[p.name] = _resolve_param(M, p.element)
            decls.append(ConstantDecl(p.name, p.domain.sort, p.domain))
    parts: list[Formula] = []
    for ct in spec.conditions:
        if ct.foreach is None:
            parts.append(ct.condition.violation_formula())
            continue
        cname, group = ct.foreach
        try:
            elems = M.elements(group)
        except MissingElement:
            raise MissingParameter(group) from None
        for k, e in enumerate(elems):
            name = f"{cname}#{k}"
            env[name] = e
            d = domains[cname]
            decls.append(ConstantDecl(name, d.sort, d))
            parts.append(_rename_const(ct.condition, cname, name).violation_formula())
    for c in _consts(parts):
        if c not in env:
            raise MissingParameter(c)
    if not parts:
        from .syntax import const

        return const(0.0), env, spec.signature
    body = parts[0]
    for f in parts[1:]:
        body = conn("max", body, f)
    return body, env, spec.signature.with_constants(decls)


def _consts(parts):
    out = []
    for f in parts:
        for _, n in iter_nodes(f):
            if isinstance(n, Const) and n.name not in out:
                out.append(n.name)
    return out


def _rename_const(cond: Condition, old: str, new: str) -> Condition:
    import dataclasses

    def walk(n):
        if isinstance(n, Const):
            return Const(new) if n.name == old else n
        if dataclasses.is_dataclass(n) and not isinstance(n, type):
            changes = {}
            for f in dataclasses.fields(n):
                v = getattr(n, f.name)
                if isinstance(v, tuple):
                    changes[f.name] = tuple(walk(x) for x in v)
                elif dataclasses.is_dataclass(v) and not isinstance(v, type):
                    changes[f.name] = walk(v)
            return dataclasses.replace(n, **changes) if changes else n
        return n

    return Condition(walk(cond.formula), cond.comparison, cond.threshold)


def type_residual(M: Structure, spec: TypeSpecDoc, cfg: QuantConfig | None = None,
                  seeds: Sequence | None = None) -> QuantEstimate:
    """Upper bound for ``inf`` over the type variables of the worst condition violation.

    A condition ``phi <= r`` is violated by ``max(0, phi - r)`` and
    ``phi >= r`` by ``max(0, r - phi)``.  The search is seeded with
    ``seeds`` (one point, or one tuple per variable); by default with the
    unit of the structure when it has one.
    """
    cfg = cfg or QuantConfig()
    body, env, sig = type_formula(M, spec)
    names = list(spec.variables)
    phi = body
    for name in reversed(names):
        d = spec.variables[name]
        phi = Quantifier("inf", Var(name, d.sort, d), phi)
    if seeds is None:
        try:
            seeds = [M.element("one")]
        except MissingElement:
            seeds = []
    points = []
    for s in seeds:
        points.append(tuple(s) if isinstance(s, tuple) else s)
    return eval_formula(M, phi, env, cfg.with_(seed_points=tuple(cfg.seed_points) + tuple(points)), sig)


def type_status(est: QuantEstimate, tol: float = 1e-6) -> str:
    """``realized`` when the residual is within ``tol``, otherwise ``inconclusive``.

    A positive residual in one structure does not refute consistency, which
    may only be witnessed in an elementary extension.
    """
    return "realized" if est.value <= tol else "inconclusive"


# ---------------------------------------------------------------------------
# limit tables


@dataclass
class LimitTable:
    """Values of one sentence across matrix dimensions.

    ``tail_oscillation[k]`` is ``max - min`` of the values from the k-th
    dimension onwards; no convergence claim is implied.
    """

    sentence: str
    dims: list[int]
    estimates: list[QuantEstimate]
    config: dict = field(default_factory=dict)

    @property
    def values(self) -> list[float]:
        return [float(e.value) for e in self.estimates]

    @property
    def tail_oscillation(self) -> list[float]:
        v = self.values
        return [max(v[k:]) - min(v[k:]) for k in range(len(v))]

    def value(self, dim: int) -> float:
        return self.values[self.dims.index(dim)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["dim", "value", "bound_direction", "indeterminate", "samples_used", "tail_oscillation"])
        for d, e, osc in zip(self.dims, self.estimates, self.tail_oscillation):
            w.writerow([d, repr(float(e.value)), e.bound_direction, str(bool(e.indeterminate)).lower(),
                        int(e.samples_used), repr(float(osc))])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "kind": "limit_table",
            "sentence": self.sentence,
            "config": self.config,
            "rows": [
                {"dim": d, "value": float(e.value), "bound_direction": e.bound_direction,
                 "indeterminate": bool(e.indeterminate), "samples_used": int(e.samples_used),
                 "tail_oscillation": float(o)}
                for d, e, o in zip(self.dims, self.estimates, self.tail_oscillation)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def sentence_limit_table(psi: Formula, dims: Sequence[int], cfg: QuantConfig | None = None,
                         family: Callable[[int], Structure] = MatrixTracial) -> LimitTable:
    """Evaluate the sentence ``psi`` in ``family(n)`` for each ``n`` in ``dims`` (sorted, deduplicated)."""
    cfg = cfg or QuantConfig()
    ds = sorted(set(int(d) for d in dims))
    models = [family(d) for d in ds]
    ests = [eval_sentence(M, psi, cfg) for M in models]
    text = print_formula(psi, models[0].signature) if models else ""
    return LimitTable(text, ds, ests, cfg.to_dict())
