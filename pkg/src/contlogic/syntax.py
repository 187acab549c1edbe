"""Terms, formulas, and static analysis over a signature.

Terms are built from variables, expanded-language constants, scalar literals,
function applications and ``ScalarOf`` (a real-valued formula read as an
element of the scalar sort).  Formulas are basic relations on terms,
continuous connectives, and ``sup``/``inf`` quantifiers over domains.

``propagate_bounds`` and ``propagate_modulus`` compute, by induction on the
formula, a compact range containing every possible value and a uniform
continuity modulus in a chosen free variable.  Both depend only on the
signature's declared bounds and moduli, never on a particular structure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from .signature import Domain, Modulus, Signature, SignatureError, lookup_result_domain


class SyntaxCheckError(ValueError):
    def __init__(self, message: str, path: Sequence = ()):
        self.path = tuple(path)
        where = "/".join(str(p) for p in self.path) or "<root>"
        super().__init__(f"{message} at {where}")


class SortMismatch(SyntaxCheckError):
    pass


class UnboundVariable(SyntaxCheckError):
    pass


class UnknownSymbol(SyntaxCheckError):
    pass


class BoundError(ValueError):
    """A connective cannot be bounded on the input boxes (e.g. ``recip`` near 0)."""


# ---------------------------------------------------------------------------
# terms


class Term:
    __slots__ = ()


@dataclass(frozen=True)
class Var(Term):
    name: str
    sort: str
    domain: Domain


@dataclass(frozen=True)
class Const(Term):
    """Expanded-language constant; its value comes from the assignment."""

    name: str


@dataclass(frozen=True)
class Literal(Term):
    value: float
    sort: str


@dataclass(frozen=True)
class Apply(Term):
    symbol: str
    args: tuple[Term, ...] = ()


@dataclass(frozen=True)
class ScalarOf(Term):
    formula: "Formula"
    sort: str


# ---------------------------------------------------------------------------
# range boxes and connectives


@dataclass(frozen=True)
class RangeBox:
    lower: float
    upper: float

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise BoundError(f"non-finite box [{self.lower}, {self.upper}]")
        if self.lower > self.upper:
            raise BoundError(f"empty box [{self.lower}, {self.upper}]")

    @property
    def magnitude(self) -> float:
        return max(abs(self.lower), abs(self.upper))

    def contains(self, value, slack: float = 0.0) -> bool:
        v = np.asarray(value)
        return bool(np.all((v >= self.lower - slack) & (v <= self.upper + slack)))

    def __iter__(self):
        yield self.lower
        yield self.upper


_ARITY = {
    "add": 2, "sub": 2, "mul": 2, "max": 2, "min": 2,
    "scale": 1, "abs": 1, "absshift": 1, "clamppos": 1, "recip": 1,
    "const": 0,
}
_PARAMETRIC = {"scale", "absshift", "const"}


@dataclass(frozen=True)
class ContinuousFn:
    """One member of the fixed connective family.

    ``param`` is the scale factor for ``scale``, the shift for ``absshift``
    (``|x - param|``) and the value for ``const``.
    """

    kind: str
    param: float | None = None

    def __post_init__(self):
        if self.kind not in _ARITY:
            raise ValueError(f"unknown connective {self.kind!r}")
        if (self.kind in _PARAMETRIC) != (self.param is not None):
            raise ValueError(f"connective {self.kind!r} parameter mismatch")

    @property
    def arity(self) -> int:
        return _ARITY[self.kind]

    def apply(self, *xs):
        k, p = self.kind, self.param
        if k == "add":
            return xs[0] + xs[1]
        if k == "sub":
            return xs[0] - xs[1]
        if k == "mul":
            return xs[0] * xs[1]
        if k == "max":
            return np.maximum(xs[0], xs[1])
        if k == "min":
            return np.minimum(xs[0], xs[1])
        if k == "scale":
            return p * xs[0]
        if k == "abs":
            return np.abs(xs[0])
        if k == "absshift":
            return np.abs(xs[0] - p)
        if k == "clamppos":
            return np.maximum(0.0, xs[0])
        if k == "recip":
            return 1.0 / xs[0]
        return p

    def box(self, *bs: RangeBox) -> RangeBox:
        k, p = self.kind, self.param
        if k == "const":
            return RangeBox(p, p)
        a = bs[0]
        if k == "add":
            return RangeBox(a.lower + bs[1].lower, a.upper + bs[1].upper)
        if k == "sub":
            return RangeBox(a.lower - bs[1].upper, a.upper - bs[1].lower)
        if k == "mul":
            b = bs[1]
            prods = [a.lower * b.lower, a.lower * b.upper, a.upper * b.lower, a.upper * b.upper]
            return RangeBox(min(prods), max(prods))
        if k == "max":
            return RangeBox(max(a.lower, bs[1].lower), max(a.upper, bs[1].upper))
        if k == "min":
            return RangeBox(min(a.lower, bs[1].lower), min(a.upper, bs[1].upper))
        if k == "scale":
            lo, hi = p * a.lower, p * a.upper
            return RangeBox(min(lo, hi), max(lo, hi))
        if k in ("abs", "absshift"):
            lo, hi = (a.lower, a.upper) if k == "abs" else (a.lower - p, a.upper - p)
            if lo >= 0:
                return RangeBox(lo, hi)
            if hi <= 0:
                return RangeBox(-hi, -lo)
            return RangeBox(0.0, max(-lo, hi))
        if k == "clamppos":
            return RangeBox(max(0.0, a.lower), max(0.0, a.upper))
        if k == "recip":
            if a.lower <= 0:
                raise BoundError(f"recip undefined on box [{a.lower}, {a.upper}]")
            return RangeBox(1.0 / a.upper, 1.0 / a.lower)
        raise AssertionError(k)

    def lipschitz(self, *bs: RangeBox) -> tuple[float, ...]:
        """Per-argument Lipschitz constants on the given input boxes."""
        k, p = self.kind, self.param
        if k in ("add", "sub", "max", "min"):
            return (1.0, 1.0)
        if k == "mul":
            return (bs[1].magnitude, bs[0].magnitude)
        if k == "scale":
            return (abs(p),)
        if k in ("abs", "absshift", "clamppos"):
            return (1.0,)
        if k == "recip":
            if bs[0].lower <= 0:
                raise BoundError("recip undefined near 0")
            return (1.0 / bs[0].lower ** 2,)
        return ()

    def monotonicity(self, *bs: RangeBox) -> tuple[int, ...]:
        """Per-argument monotonicity: +1 nondecreasing, -1 nonincreasing, 0 unknown."""
        k, p = self.kind, self.param

        def sign(b: RangeBox) -> int:
            if b.lower >= 0:
                return 1
            if b.upper <= 0:
                return -1
            return 0

        if k in ("add", "max", "min"):
            return (1, 1)
        if k == "sub":
            return (1, -1)
        if k == "mul":
            return (sign(bs[1]), sign(bs[0]))
        if k == "scale":
            return (1 if p >= 0 else -1,)
        if k == "abs":
            return (sign(bs[0]),)
        if k == "absshift":
            return (sign(RangeBox(bs[0].lower - p, bs[0].upper - p)),)
        if k == "clamppos":
            return (1,)
        if k == "recip":
            return (-1,)
        return ()


# ---------------------------------------------------------------------------
# formulas


class Formula:
    __slots__ = ()


@dataclass(frozen=True)
class Basic(Formula):
    relation: str
    args: tuple[Term, ...]


@dataclass(frozen=True)
class Connective(Formula):
    fn: ContinuousFn
    args: tuple[Formula, ...] = ()


@dataclass(frozen=True)
class Hint:
    """Witness-hint annotation on a quantifier: a solver name plus argument variables."""

    name: str
    args: tuple[str, ...] = ()


@dataclass(frozen=True)
class Quantifier(Formula):
    kind: str  # "sup" | "inf"
    var: Var
    body: Formula
    hint: Hint | None = None

    def __post_init__(self):
        if self.kind not in ("sup", "inf"):
            raise ValueError(f"bad quantifier {self.kind!r}")


def const(r: float) -> Connective:
    return Connective(ContinuousFn("const", float(r)))


def conn(kind: str, *args: Formula, param: float | None = None) -> Connective:
    fn = ContinuousFn(kind, None if param is None else float(param))
    if len(args) != fn.arity:
        raise ValueError(f"{kind} takes {fn.arity} arguments")
    return Connective(fn, tuple(args))


@dataclass(frozen=True)
class Condition:
    """``formula <= threshold`` or ``formula >= threshold``."""

    formula: Formula
    comparison: str
    threshold: float

    def __post_init__(self):
        if self.comparison not in ("<=", ">="):
            raise ValueError(f"bad comparison {self.comparison!r}")

    def violation_formula(self) -> Formula:
        if self.comparison == "<=":
            return conn("clamppos", conn("sub", self.formula, const(self.threshold)))
        return conn("clamppos", conn("sub", const(self.threshold), self.formula))

    def violation(self, value: float) -> float:
        if self.comparison == "<=":
            return max(0.0, value - self.threshold)
        return max(0.0, self.threshold - value)


# ---------------------------------------------------------------------------
# traversal


def term_children(t: Term) -> tuple:
    if isinstance(t, Apply):
        return t.args
    if isinstance(t, ScalarOf):
        return (t.formula,)
    return ()


def iter_nodes(node, path=()) -> Iterator[tuple[tuple, object]]:
    yield path, node
    if isinstance(node, Basic):
        kids = node.args
    elif isinstance(node, Connective):
        kids = node.args
    elif isinstance(node, Quantifier):
        kids = (node.body,)
    else:
        kids = term_children(node)
    for i, k in enumerate(kids):
        yield from iter_nodes(k, path + (i,))


def free_variables(node, bound: frozenset = frozenset()) -> dict[str, Var]:
    """Free variables in order of first occurrence."""
    out: dict[str, Var] = {}

    def walk(n, bound):
        if isinstance(n, Var):
            if n.name not in bound and n.name not in out:
                out[n.name] = n
        elif isinstance(n, Quantifier):
            walk(n.body, bound | {n.var.name})
        elif isinstance(n, (Basic, Connective)):
            for a in n.args:
                walk(a, bound)
        else:
            for a in term_children(n):
                walk(a, bound)

    walk(node, frozenset(bound))
    return out


def constants_used(node) -> list[str]:
    seen: list[str] = []
    for _, n in iter_nodes(node):
        if isinstance(n, Const) and n.name not in seen:
            seen.append(n.name)
    return seen


def is_quantifier_free(node) -> bool:
    return not any(isinstance(n, Quantifier) for _, n in iter_nodes(node))


def is_sentence(phi: Formula) -> bool:
    return not free_variables(phi)


def vacuous_quantifiers(phi: Formula) -> list[tuple]:
    return [p for p, n in iter_nodes(phi)
            if isinstance(n, Quantifier) and n.var.name not in free_variables(n.body)]


def strip_hints(node):
    """Copy of ``node`` with every quantifier hint removed."""
    if isinstance(node, Quantifier):
        return Quantifier(node.kind, node.var, strip_hints(node.body), None)
    if isinstance(node, Connective):
        return Connective(node.fn, tuple(strip_hints(a) for a in node.args))
    if isinstance(node, Basic):
        return Basic(node.relation, tuple(strip_hints(a) for a in node.args))
    if isinstance(node, Apply):
        return Apply(node.symbol, tuple(strip_hints(a) for a in node.args))
    if isinstance(node, ScalarOf):
        return ScalarOf(strip_hints(node.formula), node.sort)
    return node


def quantifier_prefix(phi: Formula) -> tuple[list[Quantifier], Formula]:
    """Leading quantifier chain and the formula under it."""
    chain = []
    while isinstance(phi, Quantifier):
        chain.append(phi)
        phi = phi.body
    return chain, phi


def quantifier_matrix(phi: Formula) -> tuple[Formula, list[Var]]:
    """Quantifier-free matrix of ``phi``: every bound variable becomes free.

    Requires distinct bound-variable names (the parser guarantees it for macro
    expansions).
    """
    bound: list[Var] = []

    def strip(n):
        if isinstance(n, Quantifier):
            bound.append(n.var)
            return strip(n.body)
        if isinstance(n, Connective):
            return Connective(n.fn, tuple(strip(a) for a in n.args))
        if isinstance(n, Basic):
            return Basic(n.relation, tuple(strip(a) for a in n.args))
        if isinstance(n, Apply):
            return Apply(n.symbol, tuple(strip(a) for a in n.args))
        if isinstance(n, ScalarOf):
            return ScalarOf(strip(n.formula), n.sort)
        return n

    m = strip(phi)
    names = [v.name for v in bound]
    if len(set(names)) != len(names):
        raise ValueError("bound variable names are not distinct")
    return m, bound


# ---------------------------------------------------------------------------
# sorts


def term_sort(sig: Signature, t: Term, path=()) -> str:
    if isinstance(t, Var):
        return t.sort
    if isinstance(t, Const):
        c = sig.constants.get(t.name)
        if c is None:
            raise UnknownSymbol(f"unknown constant {t.name!r}", path)
        return c.sort
    if isinstance(t, Literal):
        return t.sort
    if isinstance(t, ScalarOf):
        return t.sort
    if isinstance(t, Apply):
        f = sig.functions.get(t.symbol)
        if f is None:
            raise UnknownSymbol(f"unknown function symbol {t.symbol!r}", path)
        return f.result_sort
    raise TypeError(f"not a term: {t!r}")


def check_sorts(sig: Signature, phi, free: Sequence[str] | None = None) -> bool:
    """Accept ``phi`` iff it is well sorted over ``sig``; raise otherwise.

    When ``free`` is given, free variables outside it raise :class:`UnboundVariable`.
    """
    allowed = None if free is None else set(free)

    def var_ok(v: Var, path):
        fam = sig.families.get(v.domain.family)
        if fam is None:
            raise UnknownSymbol(f"unknown domain {v.domain.name!r}", path)
        if v.sort not in sig.sorts:
            raise UnknownSymbol(f"unknown sort {v.sort!r}", path)
        if fam.sort != v.sort or v.domain.sort != v.sort:
            raise SortMismatch(
                f"variable {v.name} of sort {v.sort} assigned domain {v.domain.name} of sort {fam.sort}", path
            )

    def term(t, path, bound):
        if isinstance(t, Var):
            var_ok(t, path)
            if t.name not in bound and allowed is not None and t.name not in allowed:
                raise UnboundVariable(f"free variable {t.name!r}", path)
            return t.sort
        if isinstance(t, Literal):
            if t.sort != sig.scalar_sort():
                raise SortMismatch(f"literal {t.value} outside the scalar sort", path)
            return t.sort
        if isinstance(t, ScalarOf):
            if t.sort != sig.scalar_sort():
                raise SortMismatch("formula coerced to a non-scalar sort", path)
            formula(t.formula, path + ("scalar",), bound)
            return t.sort
        if isinstance(t, Apply):
            f = sig.functions.get(t.symbol)
            if f is None:
                raise UnknownSymbol(f"unknown function symbol {t.symbol!r}", path)
            if len(t.args) != f.arity:
                raise SortMismatch(f"{t.symbol} takes {f.arity} arguments, got {len(t.args)}", path)
            for i, (a, want) in enumerate(zip(t.args, f.arg_sorts)):
                got = term(a, path + (t.symbol, i), bound)
                if got != want:
                    raise SortMismatch(f"argument {i} of {t.symbol} has sort {got}, expected {want}", path + (i,))
            return f.result_sort
        return term_sort(sig, t, path)

    def formula(n, path, bound):
        if isinstance(n, Basic):
            r = sig.relations.get(n.relation)
            if r is None:
                raise UnknownSymbol(f"unknown relation {n.relation!r}", path)
            if len(n.args) != r.arity:
                raise SortMismatch(f"{n.relation} takes {r.arity} arguments, got {len(n.args)}", path)
            for i, (a, want) in enumerate(zip(n.args, r.arg_sorts)):
                got = term(a, path + (n.relation, i), bound)
                if got != want:
                    raise SortMismatch(
                        f"argument {i} of {n.relation} has sort {got}, expected {want}", path + (i,)
                    )
        elif isinstance(n, Connective):
            if len(n.args) != n.fn.arity:
                raise SortMismatch(f"connective {n.fn.kind} arity mismatch", path)
            for i, a in enumerate(n.args):
                formula(a, path + (n.fn.kind, i), bound)
        elif isinstance(n, Quantifier):
            var_ok(n.var, path)
            formula(n.body, path + (f"{n.kind} {n.var.name}",), bound | {n.var.name})
        else:
            raise SortMismatch(f"expected a formula, found {type(n).__name__}", path)

    if isinstance(phi, Formula):
        formula(phi, (), frozenset())
    else:
        term(phi, (), frozenset())
    return True


# ---------------------------------------------------------------------------
# bounds and moduli


def _var_domain(v: Var, env: Mapping[str, Domain]) -> Domain:
    return env.get(v.name, v.domain)


def term_domain(sig: Signature, t: Term, domains: Mapping[str, Domain] | None = None) -> Domain:
    """Domain guaranteed to contain the value of ``t``."""
    return _term_domain(sig, t, dict(domains or {}))


def _term_domain(sig, t, env) -> Domain:
    if isinstance(t, Var):
        return _var_domain(t, env)
    if isinstance(t, Const):
        c = sig.constants.get(t.name)
        if c is None:
            raise UnknownSymbol(f"unknown constant {t.name!r}")
        return c.domain
    if isinstance(t, Literal):
        return sig.smallest_domain(t.sort, abs(t.value))
    if isinstance(t, ScalarOf):
        box = _bounds(sig, t.formula, env)
        return sig.smallest_domain(t.sort, box.magnitude)
    if isinstance(t, Apply):
        return lookup_result_domain(sig, t.symbol, [_term_domain(sig, a, env) for a in t.args])
    raise TypeError(f"not a term: {t!r}")


def propagate_bounds(sig: Signature, phi: Formula, domains: Mapping[str, Domain] | None = None) -> RangeBox:
    """Interval containing the value of ``phi`` in every structure for ``sig``.

    ``domains`` overrides the domains carried by free variables.
    """
    return _bounds(sig, phi, dict(domains or {}))


def _bounds(sig, n, env) -> RangeBox:
    if isinstance(n, Basic):
        doms = [_term_domain(sig, a, env) for a in n.args]
        bound, _ = sig.relation_bound(n.relation, doms)
        if sig.relations[n.relation].nonnegative:
            return RangeBox(0.0, bound)
        return RangeBox(-bound, bound)
    if isinstance(n, Connective):
        return n.fn.box(*[_bounds(sig, a, env) for a in n.args])
    if isinstance(n, Quantifier):
        inner = dict(env)
        inner.pop(n.var.name, None)
        return _bounds(sig, n.body, inner)
    raise TypeError(f"not a formula: {n!r}")


class _Mod:
    """Internal modulus during propagation: Lipschitz constant or delta function."""

    __slots__ = ("L", "fn")

    def __init__(self, L: float | None = None, fn: Callable[[float], float] | None = None):
        self.L = L
        self.fn = fn

    @staticmethod
    def of(m: Modulus) -> "_Mod":
        return _Mod(m.constant) if m.is_lipschitz else _Mod(fn=m.delta)

    def delta(self, eps: float) -> float:
        if self.L is not None:
            return math.inf if self.L == 0 else eps / self.L
        return self.fn(eps)

    @property
    def zero(self) -> bool:
        return self.L == 0


def _combine(outer: Sequence[_Mod], inner: Sequence[_Mod]) -> _Mod:
    """Modulus of ``g(h_1(x), ..., h_k(x))`` from moduli of g (per arg) and h_i."""
    pairs = [(o, i) for o, i in zip(outer, inner) if not i.zero]
    if not pairs:
        return _Mod(0.0)
    if all(o.L is not None and i.L is not None for o, i in pairs):
        return _Mod(sum(o.L * i.L for o, i in pairs))
    k = len(pairs)

    def fn(eps: float) -> float:
        return min(i.delta(o.delta(eps / k)) for o, i in pairs)

    return _Mod(fn=fn)


_EPS_GRID = tuple(10.0 ** (-9 + 0.25 * j) for j in range(61))


def _to_modulus(m: _Mod) -> Modulus:
    if m.L is not None:
        return Modulus.lipschitz(m.L)
    pairs = []
    best = 0.0
    for e in _EPS_GRID:
        d = m.fn(e)
        if math.isinf(d):
            d = 1e300
        best = max(best, d)
        pairs.append((e, best))
    return Modulus.from_table(pairs)


def propagate_modulus(sig: Signature, phi, x: str, domains: Mapping[str, Domain] | None = None) -> Modulus:
    """Modulus of ``phi`` in the free variable ``x``, uniform in the other variables."""
    return _to_modulus(_modulus(sig, phi, x, dict(domains or {})))


def _modulus(sig, n, x, env) -> _Mod:
    if isinstance(n, Var):
        return _Mod(1.0 if n.name == x else 0.0)
    if isinstance(n, (Const, Literal)):
        return _Mod(0.0)
    if isinstance(n, ScalarOf):
        return _modulus(sig, n.formula, x, env)
    if isinstance(n, Apply):
        if not n.args:
            return _Mod(0.0)
        doms = [_term_domain(sig, a, env) for a in n.args]
        lookup_result_domain(sig, n.symbol, doms)
        mods = sig.function_moduli(n.symbol, doms)
        return _combine([_Mod.of(m) for m in mods], [_modulus(sig, a, x, env) for a in n.args])
    if isinstance(n, Basic):
        doms = [_term_domain(sig, a, env) for a in n.args]
        _, mods = sig.relation_bound(n.relation, doms)
        return _combine([_Mod.of(m) for m in mods], [_modulus(sig, a, x, env) for a in n.args])
    if isinstance(n, Connective):
        if not n.args:
            return _Mod(0.0)
        boxes = [_bounds(sig, a, env) for a in n.args]
        ls = n.fn.lipschitz(*boxes)
        return _combine([_Mod(c) for c in ls], [_modulus(sig, a, x, env) for a in n.args])
    if isinstance(n, Quantifier):
        if n.var.name == x:
            return _Mod(0.0)
        inner = dict(env)
        inner.pop(n.var.name, None)
        return _modulus(sig, n.body, x, inner)
    raise TypeError(f"cannot take modulus of {n!r}")
