"""Axiom suites, suite reports and finite theory fragments."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from . import corpus
from .algebras import MatrixTracial, Structure
from .evaluator import QuantConfig, QuantEstimate, eval_sentence
from .parser import AxiomTemplate, TheoryDoc, parse_theory
from .signature import Domain, Signature
from .syntax import Formula, Quantifier, Var, check_sorts, conn, free_variables

SUITES = ("core", "tcstar", "ttr", "tfactor", "tii1")
DEFAULT_CAP = 4


class SignatureMismatch(ValueError):
    pass


def check_signature(M: Structure, sig: Signature) -> None:
    """Raise :class:`SignatureMismatch` unless ``M`` interprets every symbol of ``sig``."""
    own = M.signature
    missing = [s for s in sig.sorts if s not in own.sorts]
    missing += [f for f in sig.functions if f not in own.functions]
    missing += [r for r in sig.relations if r not in own.relations]
    if missing:
        raise SignatureMismatch(
            f"{M.spec} (signature {own.name!r}) does not interpret {', '.join(sorted(missing))} "
            f"of signature {sig.name!r}"
        )


@dataclass
class AxiomSuite:
    name: str
    doc: TheoryDoc
    axioms: list[AxiomTemplate]

    @property
    def signature(self) -> Signature:
        return self.doc.signature

    @property
    def ids(self) -> list[str]:
        return [a.id for a in self.axioms]

    def axiom(self, axiom_id: str) -> AxiomTemplate:
        for a in self.axioms:
            if a.id == axiom_id:
                return a
        raise KeyError(axiom_id)

    def instantiate(self, axiom_id: str, n: int | None = None) -> Formula:
        a = self.axiom(axiom_id)
        if n is None and a.param is not None:
            n = a.instances()[0]
        return self.doc.instantiate(a, n)

    def hint_keys(self, axiom_id: str) -> list[str]:
        phi = self.instantiate(axiom_id)
        from .syntax import iter_nodes

        return [n.hint.name for _, n in iter_nodes(phi) if isinstance(n, Quantifier) and n.hint]

    def restrict(self, ids: Iterable[str]) -> "AxiomSuite":
        ids = list(ids)
        return AxiomSuite(self.name, self.doc, [self.axiom(i) for i in ids])

    def validate(self, cap: int = DEFAULT_CAP) -> None:
        for a in self.axioms:
            for n in a.instances(cap):
                check_sorts(self.signature, self.doc.instantiate(a, n))


def load_suite(name: str) -> AxiomSuite:
    """Bundled suite by theory name (``tcstar``, ``ttr``, ``tfactor``, ...)."""
    doc = corpus.theory_doc(name)
    return AxiomSuite(name, doc, list(doc.axioms))


def suite_from_text(text: str) -> AxiomSuite:
    doc = parse_theory(text)
    return AxiomSuite(doc.name, doc, list(doc.axioms))


@dataclass
class AxiomRow:
    id: str
    instances: list
    worst: QuantEstimate
    worst_instance: int | None
    values: list[float]
    seconds: float = 0.0

    @property
    def residual(self) -> float:
        return float(self.worst.value)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "instances": self.instances,
            "values": [float(v) for v in self.values],
            "worst_instance": self.worst_instance,
            "worst": self.worst.to_dict(),
        }


@dataclass
class AxiomReport:
    suite: str
    structure: str
    cap: int
    rows: list[AxiomRow]
    config: dict = field(default_factory=dict)
    tolerance: float = 1e-6

    @property
    def verdict(self) -> float:
        return max((r.residual for r in self.rows), default=0.0)

    @property
    def passed(self) -> bool:
        return self.verdict <= self.tolerance

    def row(self, axiom_id: str) -> AxiomRow:
        for r in self.rows:
            if r.id == axiom_id:
                return r
        raise KeyError(axiom_id)

    def flagged(self) -> list[str]:
        """Rows whose residual came back indeterminate (conflicting nested bounds)."""
        return [r.id for r in self.rows if r.worst.indeterminate]

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "kind": "axiom_report",
            "suite": self.suite,
            "structure": self.structure,
            "instance_cap": self.cap,
            "tolerance": self.tolerance,
            "verdict": float(self.verdict),
            "passed": bool(self.passed),
            "flagged_indeterminate": self.flagged(),
            "config": self.config,
            "rows": [r.to_dict() for r in self.rows],
        }

    def table(self) -> str:
        w = max([len(r.id) for r in self.rows] + [5])
        lines = [f"{'axiom':<{w}}  {'residual':>12}  direction"]
        for r in self.rows:
            flag = " (indeterminate)" if r.worst.indeterminate else ""
            lines.append(f"{r.id:<{w}}  {r.residual:12.3e}  {r.worst.bound_direction}{flag}")
        lines.append(f"verdict {self.verdict:.3e} over instances n <= {self.cap}")
        return "\n".join(lines)


def evaluate_suite(M: Structure, suite: AxiomSuite, cfg: QuantConfig | None = None,
                   cap: int = DEFAULT_CAP, tolerance: float = 1e-6) -> AxiomReport:
    """Evaluate every instance of every axiom of ``suite`` in ``M``.

    Parameters
    ----------
    cap : int
        Schemas in an integer parameter are instantiated for ``n = 1..cap``
        unless the axiom carries its own range.
    tolerance : float
        Residual below which the report counts as passing.
    """
    cfg = cfg or QuantConfig()
    check_signature(M, suite.signature)
    rows = []
    for a in suite.axioms:
        t0 = time.perf_counter()
        worst: QuantEstimate | None = None
        worst_n = None
        values = []
        inst = a.instances(cap)
        for n in inst:
            est = eval_sentence(M, suite.doc.instantiate(a, n), cfg)
            values.append(est.value)
            if worst is None or est.value > worst.value:
                worst, worst_n = est, n
        rows.append(AxiomRow(a.id, inst, worst, worst_n, values, time.perf_counter() - t0))
    return AxiomReport(suite.name, M.spec, cap, rows, cfg.to_dict(), tolerance)


def ii1_axiom_value(k: int, cfg: QuantConfig | None = None) -> QuantEstimate:
    """Estimate of the atomless (II_1) axiom on ``MatrixTracial(k)``; an upper bound of the inf."""
    if not 1 <= k <= 32:
        raise ValueError("k must lie in 1..32")
    suite = load_suite("tii1")
    return eval_sentence(MatrixTracial(k), suite.instantiate("atomless"), cfg or QuantConfig())


def formula_pseudo_distance(phi: Formula, psi: Formula, family: Sequence[Structure],
                            domains: Mapping[str, Domain] | Sequence[Domain] | None = None,
                            cfg: QuantConfig | None = None,
                            signature: Signature | None = None) -> float:
    """Empirical lower bound of ``sup |phi - psi|`` over ``domains``, maximized over ``family``.

    ``domains`` maps each free variable to its domain (a sequence is matched
    to the free variables in order of first occurrence); by default the
    declared domains of the variables are used.  With ``signature`` given,
    every member of ``family`` is checked against it first.
    """
    cfg = cfg or QuantConfig()
    fv = dict(free_variables(phi))
    for k, v in free_variables(psi).items():
        fv.setdefault(k, v)
    if domains is None:
        dmap = {k: v.domain for k, v in fv.items()}
    elif isinstance(domains, Mapping):
        dmap = dict(domains)
    else:
        domains = list(domains)
        if len(domains) != len(fv):
            raise ValueError(f"{len(domains)} domains for {len(fv)} free variables")
        dmap = dict(zip(fv, domains))
    body: Formula = conn("abs", conn("sub", phi, psi))
    for name in reversed(list(fv)):
        d = dmap[name]
        body = Quantifier("sup", Var(name, d.sort, d), body)
    best = 0.0
    for M in family:
        if signature is not None:
            check_signature(M, signature)
        est = eval_sentence(M, body, cfg)
        best = max(best, float(est.value))
    return best


@dataclass
class TheoryFragment:
    """Values of finitely many sentences in finitely many structures."""

    sentences: list[str]
    models: list[str]
    table: list[list[QuantEstimate]]

    def value(self, model: str, sentence: str) -> float:
        return self.table[self.models.index(model)][self.sentences.index(sentence)].value

    def row(self, model: str) -> list[float]:
        return [e.value for e in self.table[self.models.index(model)]]

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "kind": "theory_fragment",
            "sentences": self.sentences,
            "models": self.models,
            "values": [[float(e.value) for e in r] for r in self.table],
            "bound_directions": [[e.bound_direction for e in r] for r in self.table],
        }


def theory_fragment(sentences: Mapping[str, Formula], family: Sequence[Structure],
                    cfg: QuantConfig | None = None) -> TheoryFragment:
    cfg = cfg or QuantConfig()
    names = list(sentences)
    table = [[eval_sentence(M, sentences[s], cfg) for s in names] for M in family]
    return TheoryFragment(names, [M.spec for M in family], table)
