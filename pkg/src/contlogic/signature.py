"""Multi-sorted metric languages.

A signature lists sorts (each with a privileged metric symbol), families of
domains of quantification, and function/relation symbols.  Every symbol
carries, for each tuple of argument domains, a result domain (functions) or a
bound (relations) together with one uniform-continuity modulus per argument.

Domains come in integer-indexed families ``D[1] ⊆ D[2] ⊆ ...`` or as single
named domains.  Symbol data for indexed families is given by small integer
expressions over per-argument index parameters (``D[m], D[n] -> D[m*n]``) and
is resolved lazily, so the domain map is total over every tuple up to
``max_domain_index``.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

DEFAULT_MAX_DOMAIN_INDEX = 64


class SignatureError(ValueError):
    """Base class for malformed signatures or symbol lookups."""

    def __init__(self, message: str, declaration: str | None = None):
        self.declaration = declaration
        if declaration:
            message = f"{message} (in declaration {declaration!r})"
        super().__init__(message)


class DuplicateName(SignatureError):
    pass


class UnknownSort(SignatureError):
    pass


class MissingModulus(SignatureError):
    pass


class UndeclaredDomainTuple(SignatureError):
    pass


# ---------------------------------------------------------------------------
# integer index expressions


@dataclass(frozen=True)
class IndexExpr:
    """Integer expression over domain-index parameters.

    ``op`` is one of ``"int"``, ``"var"``, ``"+"``, ``"*"``, ``"max"``.
    """

    op: str
    value: int | str | None = None
    args: tuple["IndexExpr", ...] = ()

    @staticmethod
    def const(v: int) -> "IndexExpr":
        return IndexExpr("int", int(v))

    @staticmethod
    def var(name: str) -> "IndexExpr":
        return IndexExpr("var", name)

    def evaluate(self, env: Mapping[str, int]) -> int:
        if self.op == "int":
            return int(self.value)
        if self.op == "var":
            try:
                return int(env[self.value])
            except KeyError:
                raise SignatureError(f"unbound index parameter {self.value!r}") from None
        vals = [a.evaluate(env) for a in self.args]
        if self.op == "+":
            return sum(vals)
        if self.op == "*":
            return math.prod(vals)
        if self.op == "max":
            return max(vals)
        raise SignatureError(f"unknown index operator {self.op!r}")

    def variables(self) -> set[str]:
        if self.op == "var":
            return {self.value}
        out: set[str] = set()
        for a in self.args:
            out |= a.variables()
        return out

    def __str__(self) -> str:
        if self.op == "int":
            return str(self.value)
        if self.op == "var":
            return str(self.value)
        if self.op == "max":
            return "max(" + ", ".join(str(a) for a in self.args) + ")"
        parts = []
        for a in self.args:
            s = str(a)
            if a.op in "+*" and a.op != self.op:
                s = f"({s})"
            parts.append(s)
        return self.op.join(parts)


# ---------------------------------------------------------------------------
# moduli


@dataclass(frozen=True)
class Modulus:
    """Uniform continuity modulus ``delta(eps)``.

    Lipschitz moduli have ``delta(eps) = eps / L`` (infinite for ``L == 0``).
    Table moduli are step functions through monotone ``(eps, delta)`` pairs; below
    the first entry they scale linearly toward zero.
    """

    kind: str
    constant: float | None = None
    table: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind == "lipschitz":
            if self.constant is None or not self.constant >= 0 or math.isinf(self.constant):
                raise ValueError(f"bad Lipschitz constant {self.constant!r}")
        elif self.kind == "table":
            if not self.table:
                raise ValueError("empty modulus table")
            eps = [e for e, _ in self.table]
            dels = [d for _, d in self.table]
            if any(e <= 0 for e in eps) or any(d <= 0 for d in dels):
                raise ValueError("modulus table entries must be positive")
            if eps != sorted(eps) or dels != sorted(dels):
                raise ValueError("modulus table must be monotone nondecreasing")
        else:
            raise ValueError(f"unknown modulus kind {self.kind!r}")

    @staticmethod
    def lipschitz(constant: float) -> "Modulus":
        return Modulus("lipschitz", float(constant))

    @staticmethod
    def from_table(pairs: Iterable[tuple[float, float]]) -> "Modulus":
        return Modulus("table", None, tuple((float(e), float(d)) for e, d in pairs))

    @property
    def is_lipschitz(self) -> bool:
        return self.kind == "lipschitz"

    def delta(self, eps: float) -> float:
        if eps <= 0:
            return 0.0
        if self.kind == "lipschitz":
            return math.inf if self.constant == 0 else max(eps / self.constant, _TINY)
        eps_list = [e for e, _ in self.table]
        k = bisect.bisect_right(eps_list, eps) - 1
        if k < 0:
            e0, d0 = self.table[0]
            # clamp so a positive eps never underflows to a zero delta
            return max(d0 * eps / e0, _TINY)
        return self.table[k][1]

    def __str__(self) -> str:
        if self.kind == "lipschitz":
            return f"lipschitz {_num(self.constant)}"
        return "table [" + ", ".join(f"({_num(e)}, {_num(d)})" for e, d in self.table) + "]"


_TINY = math.ulp(0.0)


def _num(x: float) -> str:
    if float(x).is_integer():
        return str(int(x))
    return repr(float(x))


ModulusSpec = "IndexExpr | Modulus"


def _resolve_modulus(spec, env: Mapping[str, int]) -> Modulus:
    if isinstance(spec, Modulus):
        return spec
    return Modulus.lipschitz(spec.evaluate(env))


# ---------------------------------------------------------------------------
# sorts, domains, symbols


@dataclass(frozen=True)
class Domain:
    family: str
    index: int | None
    sort: str

    @property
    def name(self) -> str:
        return self.family if self.index is None else f"{self.family}[{self.index}]"

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class DomainFamily:
    name: str
    sort: str
    indexed: bool = True


@dataclass(frozen=True)
class Sort:
    name: str
    metric: str
    families: tuple[str, ...]
    scalar: bool = False


@dataclass(frozen=True)
class ArgSlot:
    """One argument position of a symbol: a domain family plus index parameter."""

    family: str
    param: str | None = None

    def __str__(self) -> str:
        return self.family if self.param is None else f"{self.family}[{self.param}]"


@dataclass(frozen=True)
class FunctionSymbol:
    name: str
    args: tuple[ArgSlot, ...]
    result_family: str
    result_index: IndexExpr | None
    moduli: tuple  # IndexExpr (Lipschitz constant) or Modulus, one per argument
    arg_sorts: tuple[str, ...] = ()
    result_sort: str = ""

    @property
    def arity(self) -> int:
        return len(self.args)

    def domain_map(self, max_index: int = DEFAULT_MAX_DOMAIN_INDEX, limit: int = 4):
        """Enumerate ``{arg domains: (result domain, moduli)}`` for indices ``<= limit``."""
        out = {}
        for env, doms in _enumerate_tuples(self.args, self.arg_sorts, limit):
            try:
                out[doms] = (self._result(env, max_index), tuple(_resolve_modulus(m, env) for m in self.moduli))
            except UndeclaredDomainTuple:
                continue
        return out

    def _result(self, env, max_index) -> Domain:
        if self.result_index is None:
            return Domain(self.result_family, None, self.result_sort)
        idx = self.result_index.evaluate(env)
        if idx < 1 or idx > max_index:
            raise UndeclaredDomainTuple(
                f"{self.name}: result domain {self.result_family}[{idx}] exceeds maxDomainIndex {max_index}"
            )
        return Domain(self.result_family, idx, self.result_sort)


@dataclass(frozen=True)
class RelationSymbol:
    name: str
    args: tuple[ArgSlot, ...]
    bound: IndexExpr
    moduli: tuple
    arg_sorts: tuple[str, ...] = ()
    nonnegative: bool = False

    @property
    def arity(self) -> int:
        return len(self.args)

    def bound_map(self, limit: int = 4):
        out = {}
        for env, doms in _enumerate_tuples(self.args, self.arg_sorts, limit):
            out[doms] = (float(self.bound.evaluate(env)), tuple(_resolve_modulus(m, env) for m in self.moduli))
        return out


def _enumerate_tuples(slots, sorts, limit):
    import itertools

    ranges = []
    for slot, _ in zip(slots, sorts):
        ranges.append([None] if slot.param is None else list(range(1, limit + 1)))
    for combo in itertools.product(*ranges):
        env = {}
        ok = True
        for slot, k in zip(slots, combo):
            if slot.param is not None:
                if slot.param in env and env[slot.param] != k:
                    ok = False
                env[slot.param] = k
        if ok:
            yield env, tuple(Domain(s.family, k, srt) for s, k, srt in zip(slots, combo, sorts))


@dataclass(frozen=True)
class ConstantDecl:
    """Expanded-language constant: a named element of a fixed domain."""

    name: str
    sort: str
    domain: Domain


@dataclass(frozen=True)
class OperatorBinding:
    """Maps surface syntax (``+``, ``*``, ``^*``) on given sorts to a function symbol."""

    op: str
    sorts: tuple[str, ...]
    symbol: str


# ---------------------------------------------------------------------------
# declarations


@dataclass(frozen=True)
class SortDecl:
    name: str
    metric: str | None
    scalar: bool = False
    metric_bound: IndexExpr | None = None


@dataclass(frozen=True)
class DomainDecl:
    family: str
    sort: str
    indexed: bool = True


@dataclass(frozen=True)
class FunctionDecl:
    name: str
    args: tuple[ArgSlot, ...]
    result: ArgSlot
    result_index: IndexExpr | None = None
    moduli: tuple = ()


@dataclass(frozen=True)
class RelationDecl:
    name: str
    args: tuple[ArgSlot, ...]
    bound: IndexExpr | None = None
    moduli: tuple = ()
    nonnegative: bool = False


@dataclass(frozen=True)
class ParamDecl:
    name: str
    domain: ArgSlot
    index: int | None = None


@dataclass(frozen=True)
class OperatorDecl:
    op: str
    sorts: tuple[str, ...]
    symbol: str


@dataclass(frozen=True)
class NameDecl:
    name: str


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Signature:
    name: str = ""
    sorts: Mapping[str, Sort] = field(default_factory=dict)
    families: Mapping[str, DomainFamily] = field(default_factory=dict)
    functions: Mapping[str, FunctionSymbol] = field(default_factory=dict)
    relations: Mapping[str, RelationSymbol] = field(default_factory=dict)
    constants: Mapping[str, ConstantDecl] = field(default_factory=dict)
    operators: Mapping[tuple, OperatorBinding] = field(default_factory=dict)
    max_domain_index: int = DEFAULT_MAX_DOMAIN_INDEX

    def __hash__(self):
        return hash((self.name, tuple(sorted(self.sorts)), tuple(sorted(self.functions))))

    # ---- domains

    @property
    def domains(self) -> list[DomainFamily]:
        return list(self.families.values())

    def domain(self, family: str, index: int | None = None) -> Domain:
        fam = self.families.get(family)
        if fam is None:
            raise UnknownSort(f"unknown domain family {family!r}")
        if fam.indexed:
            if index is None:
                raise UndeclaredDomainTuple(f"domain family {family!r} needs an index")
            if not 1 <= index <= self.max_domain_index:
                raise UndeclaredDomainTuple(
                    f"{family}[{index}] outside 1..{self.max_domain_index}"
                )
        elif index is not None:
            raise UndeclaredDomainTuple(f"domain {family!r} takes no index")
        return Domain(family, index if fam.indexed else None, fam.sort)

    def parse_domain(self, text: str) -> Domain:
        text = text.strip()
        if "[" in text:
            fam, rest = text.split("[", 1)
            return self.domain(fam.strip(), int(rest.rstrip("]")))
        return self.domain(text)

    def smallest_domain(self, sort: str, radius: float) -> Domain:
        """Smallest indexed domain of ``sort`` whose index covers ``radius``."""
        srt = self.sorts[sort]
        fam = self.families[srt.families[0]]
        if not fam.indexed:
            return Domain(fam.name, None, sort)
        idx = max(1, math.ceil(radius - 1e-12)) if math.isfinite(radius) else self.max_domain_index + 1
        if idx > self.max_domain_index:
            raise UndeclaredDomainTuple(f"{fam.name}[{idx}] exceeds maxDomainIndex {self.max_domain_index}")
        return Domain(fam.name, idx, sort)

    def scalar_sort(self) -> str | None:
        for s in self.sorts.values():
            if s.scalar:
                return s.name
        return None

    def operator(self, op: str, sorts: Sequence[str]) -> str | None:
        b = self.operators.get((op, tuple(sorts)))
        return b.symbol if b else None

    def operator_of(self, symbol: str) -> OperatorBinding | None:
        for b in self.operators.values():
            if b.symbol == symbol:
                return b
        return None

    # ---- symbols

    def lookup_result_domain(self, f: str | FunctionSymbol, arg_domains: Sequence[Domain]) -> Domain:
        return lookup_result_domain(self, f, arg_domains)

    def function_moduli(self, f: str, arg_domains: Sequence[Domain]) -> tuple[Modulus, ...]:
        sym = self.functions[f]
        env = _match_slots(sym.name, sym.args, sym.arg_sorts, arg_domains)
        return tuple(_resolve_modulus(m, env) for m in sym.moduli)

    def relation_bound(self, r: str, arg_domains: Sequence[Domain]) -> tuple[float, tuple[Modulus, ...]]:
        sym = self.relations.get(r)
        if sym is None:
            raise SignatureError(f"unknown relation {r!r}")
        env = _match_slots(sym.name, sym.args, sym.arg_sorts, arg_domains)
        return float(sym.bound.evaluate(env)), tuple(_resolve_modulus(m, env) for m in sym.moduli)

    def with_constants(self, constants: Iterable[ConstantDecl]) -> "Signature":
        merged = dict(self.constants)
        for c in constants:
            if c.name in merged or c.name in self._symbol_names():
                raise DuplicateName(f"duplicate name {c.name!r}", c.name)
            merged[c.name] = c
        return replace(self, constants=merged)

    def _symbol_names(self) -> set[str]:
        return set(self.sorts) | set(self.families) | set(self.functions) | set(self.relations)


def _match_slots(name, slots, sorts, arg_domains) -> dict[str, int]:
    if len(arg_domains) != len(slots):
        raise UndeclaredDomainTuple(
            f"{name}: expected {len(slots)} arguments, got {len(arg_domains)}"
        )
    env: dict[str, int] = {}
    for slot, d in zip(slots, arg_domains):
        if d.family != slot.family:
            raise UndeclaredDomainTuple(
                f"{name}: argument domain {d.name} not in family {slot.family}"
            )
        if slot.param is not None:
            if d.index is None:
                raise UndeclaredDomainTuple(f"{name}: argument domain {d.name} lacks an index")
            if slot.param in env:
                # repeated parameter: the declaration is read at the larger index
                env[slot.param] = max(env[slot.param], d.index)
            else:
                env[slot.param] = d.index
    return env


def lookup_result_domain(sig: Signature, f: str | FunctionSymbol, arg_domains: Sequence[Domain]) -> Domain:
    """Result domain ``D^f`` of ``f`` applied to arguments from ``arg_domains``."""
    sym = sig.functions.get(f) if isinstance(f, str) else f
    if sym is None:
        raise SignatureError(f"unknown function symbol {f!r}")
    env = _match_slots(sym.name, sym.args, sym.arg_sorts, tuple(arg_domains))
    return sym._result(env, sig.max_domain_index)


def build_signature(decls: Sequence, name: str = "", max_domain_index: int = DEFAULT_MAX_DOMAIN_INDEX) -> Signature:
    """Validate a declaration list and assemble a :class:`Signature`.

    Raises :class:`DuplicateName`, :class:`UnknownSort` or :class:`MissingModulus`
    naming the offending declaration.
    """
    sorts: dict[str, Sort] = {}
    sort_decls: dict[str, SortDecl] = {}
    families: dict[str, DomainFamily] = {}
    functions: dict[str, FunctionSymbol] = {}
    relations: dict[str, RelationSymbol] = {}
    constants: dict[str, ConstantDecl] = {}
    operators: dict[tuple, OperatorBinding] = {}
    seen: set[str] = set()

    def claim(n: str):
        if n in seen:
            raise DuplicateName(f"duplicate name {n!r}", n)
        seen.add(n)

    for d in decls:
        if isinstance(d, NameDecl):
            name = d.name
        elif isinstance(d, SortDecl):
            claim(d.name)
            if not d.metric:
                raise MissingModulus(f"sort {d.name!r} has no metric symbol", d.name)
            sort_decls[d.name] = d
        elif isinstance(d, DomainDecl):
            claim(d.family)
            if d.sort not in sort_decls:
                raise UnknownSort(f"unknown sort {d.sort!r}", d.family)
            families[d.family] = DomainFamily(d.family, d.sort, d.indexed)

    for s, d in sort_decls.items():
        fams = tuple(f.name for f in families.values() if f.sort == s)
        if not fams:
            raise UnknownSort(f"sort {s!r} has no domains", s)
        sorts[s] = Sort(s, d.metric, fams, d.scalar)

    def slot_sort(slot: ArgSlot, where: str) -> str:
        fam = families.get(slot.family)
        if fam is None:
            raise UnknownSort(f"unknown domain family {slot.family!r}", where)
        if fam.indexed and slot.param is None:
            raise UnknownSort(f"domain family {slot.family!r} needs an index", where)
        if not fam.indexed and slot.param is not None:
            raise UnknownSort(f"domain {slot.family!r} takes no index", where)
        return fam.sort

    metric_owner = {d.metric: s for s, d in sort_decls.items()}

    for d in decls:
        if isinstance(d, FunctionDecl):
            claim(d.name)
            arg_sorts = tuple(slot_sort(a, d.name) for a in d.args)
            res_fam = families.get(d.result.family)
            if res_fam is None:
                raise UnknownSort(f"unknown domain family {d.result.family!r}", d.name)
            if len(d.moduli) != len(d.args):
                raise MissingModulus(
                    f"function {d.name!r} needs {len(d.args)} moduli, got {len(d.moduli)}", d.name
                )
            params = {a.param for a in d.args if a.param}
            idx = d.result_index
            if res_fam.indexed and idx is None:
                raise MissingModulus(f"function {d.name!r} lacks a result index", d.name)
            _check_params(idx, params, d.name)
            for m in d.moduli:
                if isinstance(m, IndexExpr):
                    _check_params(m, params, d.name)
            functions[d.name] = FunctionSymbol(
                d.name, tuple(d.args), d.result.family, idx, tuple(d.moduli), arg_sorts, res_fam.sort
            )
        elif isinstance(d, RelationDecl):
            if d.name not in metric_owner:
                claim(d.name)
            elif d.name in relations:
                raise DuplicateName(f"duplicate name {d.name!r}", d.name)
            arg_sorts = tuple(slot_sort(a, d.name) for a in d.args)
            if d.bound is None:
                raise MissingModulus(f"relation {d.name!r} lacks a bound", d.name)
            if len(d.moduli) != len(d.args):
                raise MissingModulus(
                    f"relation {d.name!r} needs {len(d.args)} moduli, got {len(d.moduli)}", d.name
                )
            params = {a.param for a in d.args if a.param}
            _check_params(d.bound, params, d.name)
            relations[d.name] = RelationSymbol(
                d.name, tuple(d.args), d.bound, tuple(d.moduli), arg_sorts,
                d.nonnegative or d.name in metric_owner,
            )
        elif isinstance(d, ParamDecl):
            claim(d.name)
            srt = slot_sort(ArgSlot(d.domain.family, "k" if d.index is not None else None), d.name)
            dom = Domain(d.domain.family, d.index, srt)
            constants[d.name] = ConstantDecl(d.name, srt, dom)
        elif isinstance(d, OperatorDecl):
            for s in d.sorts:
                if s not in sorts:
                    raise UnknownSort(f"unknown sort {s!r}", f"op {d.op}")
            key = (d.op, tuple(d.sorts))
            if key in operators:
                raise DuplicateName(f"duplicate operator binding {d.op} on {d.sorts}", d.symbol)
            operators[key] = OperatorBinding(d.op, tuple(d.sorts), d.symbol)

    # implicit metric relations
    for s, d in sort_decls.items():
        if d.metric in relations:
            continue
        claim(d.metric)
        fam = families[sorts[s].families[0]]
        if fam.indexed:
            slots = (ArgSlot(fam.name, "m"), ArgSlot(fam.name, "n"))
            bound = d.metric_bound or IndexExpr("+", None, (IndexExpr.var("m"), IndexExpr.var("n")))
        else:
            if d.metric_bound is None:
                raise MissingModulus(f"metric {d.metric!r} on a non-indexed domain needs a bound", s)
            slots = (ArgSlot(fam.name), ArgSlot(fam.name))
            bound = d.metric_bound
        relations[d.metric] = RelationSymbol(
            d.metric, slots, bound, (IndexExpr.const(1), IndexExpr.const(1)), (s, s), True
        )

    for op in operators.values():
        if op.symbol not in functions:
            raise UnknownSort(f"operator {op.op} bound to unknown function {op.symbol!r}", op.symbol)

    return Signature(name, sorts, families, functions, relations, constants, operators, max_domain_index)


def _check_params(expr, params, where):
    if expr is None:
        return
    free = expr.variables() - params
    if free:
        raise UnknownSort(f"index expression uses undeclared parameters {sorted(free)}", where)
