"""Interpretation of terms and formulas in a structure.

Basic and connective nodes are computed exactly (in floating point).  Each
block of consecutive same-kind quantifiers is handed to the optimizer as one
joint search; its estimate carries a bound direction, and nested directions
are combined through the monotonicity of the enclosing connectives.
"""

from __future__ import annotations

import math
from typing import Mapping

import numpy as np

from .algebras import HintContext, MissingElement, Structure
from .optimizer import (
    EXACT, INDET, LOWER, UPPER, CertifiedBracket, QuantConfig, QuantEstimate,
    certified_bracket, maximize, minimize, search,
)
from .syntax import (
    Apply, Basic, Connective, Const, Formula, Literal, Quantifier, RangeBox, ScalarOf,
    Term, Var, free_variables, is_quantifier_free, iter_nodes, propagate_bounds,
)

__all__ = [
    "MissingAssignment", "eval_term", "eval_formula", "eval_sentence", "batch_values",
    "QuantConfig", "QuantEstimate", "CertifiedBracket", "maximize", "minimize",
    "certified_bracket", "Evaluator",
]

CERTIFY_TOL = 1e-12


class MissingAssignment(KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"no value assigned to {self.name!r}"


# ---------------------------------------------------------------------------
# quantifier-free evaluation (batched)


def _term(M: Structure, t: Term, env: Mapping):
    if isinstance(t, (Var, Const)):
        try:
            return env[t.name]
        except KeyError:
            raise MissingAssignment(t.name) from None
    if isinstance(t, Literal):
        return np.complex128(t.value)
    if isinstance(t, Apply):
        return M.function(t.symbol, [_term(M, a, env) for a in t.args])
    if isinstance(t, ScalarOf):
        return np.asarray(_qf(M, t.formula, env), dtype=complex)
    raise TypeError(f"not a term: {t!r}")


def _qf(M: Structure, phi: Formula, env: Mapping):
    if isinstance(phi, Basic):
        return np.asarray(M.relation(phi.relation, [_term(M, a, env) for a in phi.args]), dtype=float)
    if isinstance(phi, Connective):
        return np.asarray(phi.fn.apply(*[_qf(M, a, env) for a in phi.args]), dtype=float)
    raise TypeError("quantifier reached in quantifier-free evaluation")


def batch_values(M: Structure, phi: Formula, env: Mapping, batch: Mapping) -> np.ndarray:
    """Values of a quantifier-free ``phi`` for stacked candidate points.

    ``batch`` maps variable names to arrays whose leading axis indexes
    candidates; ``env`` holds the unbatched rest of the assignment.
    """
    size = len(next(iter(batch.values()))) if batch else 1
    full = dict(env)
    full.update(batch)
    if M.batchable and batch:
        out = np.asarray(_qf(M, phi, full), dtype=float)
        return np.broadcast_to(out, (size,)).copy()
    vals = np.empty(size)
    for i in range(size):
        e = dict(env)
        e.update({k: v[i] for k, v in batch.items()})
        vals[i] = float(_qf(M, phi, e))
    return vals


# ---------------------------------------------------------------------------
# direction algebra


def _combine(dirs: list[str]) -> str:
    live = [d for d in dirs if d != EXACT]
    if not live:
        return EXACT
    if INDET in live or any(d != live[0] for d in live):
        return INDET
    return live[0]


def _flip(d: str) -> str:
    return {LOWER: UPPER, UPPER: LOWER}.get(d, d)


# ---------------------------------------------------------------------------
# generic hints


def _zero_like(M: Structure, sort: str, like):
    if sort == M.scalar:
        return np.complex128(0)
    try:
        return M.element("zero")
    except MissingElement:
        return np.zeros_like(np.asarray(like))


def _hint_nearest(ctx: HintContext) -> list:
    """Minimizer of a metric distance that is affine in the quantified variable."""
    q = ctx.quantifier
    x = q.var.name
    M = ctx.structure
    target = None
    for _, n in iter_nodes(q.body):
        if isinstance(n, Basic) and n.relation == M.signature.sorts[q.var.sort].metric:
            if x in free_variables(n):
                target = n
                break
    if target is None:
        return []
    probe = M.samples(ctx.domain, ("nearest-probe",), 1)[0]
    zero = _zero_like(M, q.var.sort, probe)

    def F(v):
        env = dict(ctx.assignment)
        env[x] = v
        return np.asarray(ctx.evaluate_term(target.args[0], env)) - np.asarray(ctx.evaluate_term(target.args[1], env))

    c = F(zero)
    delta = F(probe) - c
    den = np.vdot(probe, probe)
    if abs(den) < 1e-300:
        return []
    alpha = np.vdot(probe, delta) / den
    if abs(alpha) < 1e-12:
        return []
    return [-c / alpha]


def _hint_abs_real(ctx: HintContext) -> list:
    return [np.complex128(abs(np.real(ctx.args[0])))]


def _hint_abs_imag(ctx: HintContext) -> list:
    return [np.complex128(abs(np.imag(ctx.args[0])))]


GENERIC_HINTS = {
    "nearest": _hint_nearest,
    "abs_real_part": _hint_abs_real,
    "abs_imag_part": _hint_abs_imag,
}


# ---------------------------------------------------------------------------


class Evaluator:
    """Evaluates formulas in one structure under one configuration."""

    def __init__(self, M: Structure, cfg: QuantConfig | None = None, signature=None):
        self.M = M
        self.cfg = cfg or QuantConfig()
        # bounds need the domains of expanded-language constants
        self.signature = signature or M.signature
        self.samples_used = 0
        self._boxes: dict[int, tuple] = {}

    # ---- bounds

    def box(self, node: Formula) -> RangeBox:
        hit = self._boxes.get(id(node))
        if hit is None or hit[0] is not node:
            hit = (node, propagate_bounds(self.signature, node))
            self._boxes[id(node)] = hit
        return hit[1]

    # ---- recursion: returns (value, direction) and records block witnesses

    def value(self, phi: Formula, env: dict, path=(), depth: int = 0):
        if is_quantifier_free(phi):
            return float(_qf(self.M, phi, env)), EXACT
        if isinstance(phi, Quantifier):
            est = self.block(phi, env, path, depth)
            return est.value, est._internal
        if isinstance(phi, Connective):
            vals, dirs = [], []
            for i, a in enumerate(phi.args):
                v, d = self.value(a, env, path + (i,), depth)
                vals.append(v)
                dirs.append(d)
            out = float(phi.fn.apply(*vals))
            if all(d == EXACT for d in dirs):
                return out, EXACT
            boxes = [self.box(a) for a in phi.args]
            mono = phi.fn.monotonicity(*boxes)
            contrib = []
            for d, s in zip(dirs, mono):
                if d == EXACT:
                    continue
                if d == INDET or s == 0:
                    contrib.append(INDET)
                else:
                    contrib.append(d if s > 0 else _flip(d))
            return out, _combine(contrib)
        if isinstance(phi, Basic):
            # relation arguments containing quantified scalars
            full = self._basic_with_quantifiers(phi, env, path, depth)
            return full
        raise TypeError(f"not a formula: {phi!r}")

    def _basic_with_quantifiers(self, phi: Basic, env, path, depth):
        dirs: list[str] = []

        def term(t, p):
            if isinstance(t, ScalarOf):
                if is_quantifier_free(t.formula):
                    return np.complex128(_qf(self.M, t.formula, env))
                v, d = self.value(t.formula, env, p, depth)
                dirs.append(d if d == EXACT else INDET)
                return np.complex128(v)
            if isinstance(t, Apply):
                return self.M.function(t.symbol, [term(a, p + (i,)) for i, a in enumerate(t.args)])
            return _term(self.M, t, env)

        args = [term(a, path + (i,)) for i, a in enumerate(phi.args)]
        return float(self.M.relation(phi.relation, args)), _combine(dirs)

    # ---- quantifier blocks

    def block(self, q: Quantifier, env: dict, path=(), depth: int = 0) -> QuantEstimate:
        M, cfg = self.M, self.cfg
        chain = [q]
        body = q.body
        while isinstance(body, Quantifier) and body.kind == q.kind:
            chain.append(body)
            body = body.body
        names = [c.var.name for c in chain]
        domains = [c.var.domain for c in chain]
        body_path = path + (("q",) * len(chain))
        outer = depth == 0
        budget = cfg.sample_budget if outer else cfg.inner_sample_budget
        steps = (cfg.refine_steps if outer else cfg.inner_refine_steps) if cfg.refining else 0

        qfree = is_quantifier_free(body)

        def score(arrays):
            if qfree:
                vals = batch_values(M, body, env, dict(zip(names, arrays)))
                return vals, None
            vals, dirs = [], []
            for i in range(len(arrays[0])):
                e = dict(env)
                e.update({n: a[i] for n, a in zip(names, arrays)})
                v, d = self.value(body, e, body_path, depth + 1)
                vals.append(v)
                dirs.append(d)
            return np.array(vals), dirs

        seeds = self._seeds(chain, body, env, domains, names, budget, path, outer, score)
        extra = None
        if cfg.strategy == "certifiedNet" and len(chain) == 1 and qfree:
            try:
                extra = [M.net(domains[0], cfg.net_mesh)]
            except Exception:
                extra = None

        fb = free_variables(body)
        if not any(n in fb for n in names):
            # vacuous block: the body does not depend on the bound variables
            pts = tuple(M.samples(d, (path, i), 1, cfg.rng_seed)[0] for i, d in enumerate(domains))
            e = dict(env)
            e.update(dict(zip(names, pts)))
            v, d = self.value(body, e, body_path, depth + 1)
            res_value, res_best, res_dir, res_evals = v, pts, d, 1
        else:
            res = search(
                M, domains, score, q.kind, budget=budget, refine_steps=steps,
                step_size=cfg.refine_step_size, seeds=seeds, key=path, rng_seed=cfg.rng_seed,
                extra=extra,
            )
            res_value, res_best, res_dir, res_evals = res.value, res.best, res.direction, res.evaluations
        self.samples_used += res_evals

        nominal = LOWER if q.kind == "sup" else UPPER
        if res_dir in (EXACT, nominal):
            internal = nominal
        else:
            internal = INDET
        certified = False
        if internal != INDET:
            b = self.box(q)
            if q.kind == "sup" and res_value >= b.upper - CERTIFY_TOL:
                certified = True
            if q.kind == "inf" and res_value <= b.lower + CERTIFY_TOL:
                certified = True
        if certified:
            internal = EXACT
        est = QuantEstimate(
            res_value, nominal, dict(zip(names, res_best)), res_evals, internal == INDET, certified
        )
        est._internal = internal
        return est

    def _seeds(self, chain, body, env, domains, names, budget, path, outer, score):
        M, cfg = self.M, self.cfg
        firsts = [M.samples(d, (path, i), 1, cfg.rng_seed)[0] for i, d in enumerate(domains)]
        partials: list[tuple] = [()]
        any_hint = False
        for i, qn in enumerate(chain):
            fn = None
            if cfg.use_hints and qn.hint is not None:
                fn = M.hints.get(qn.hint.name) or GENERIC_HINTS.get(qn.hint.name)
            if fn is None:
                partials = [p + (firsts[i],) for p in partials]
                continue
            any_hint = True
            nxt = []
            for p in partials:
                assign = dict(env)
                assign.update(dict(zip(names[:i], p)))
                try:
                    args = tuple(assign[a] for a in qn.hint.args)
                except KeyError as e:
                    raise MissingAssignment(str(e.args[0])) from None
                rest = firsts[i + 1:]

                def objective(v, p=p, rest=rest):
                    arrays = [np.asarray(x)[None] for x in p] + [np.asarray(v)[None]] + [np.asarray(x)[None] for x in rest]
                    return float(np.asarray(score(arrays)[0])[0])

                def objective_batch(vs, p=p, rest=rest):
                    k = len(vs)
                    arrays = [np.repeat(np.asarray(x)[None], k, axis=0) for x in p] + [np.asarray(vs)] + [
                        np.repeat(np.asarray(x)[None], k, axis=0) for x in rest]
                    return np.asarray(score(arrays)[0])

                ctx = HintContext(M, qn, domains[i], assign, args, objective, objective_batch,
                                  lambda t, e: _term(M, t, e))
                for s in fn(ctx):
                    nxt.append(p + (M.project(domains[i], s),))
                    if len(nxt) >= cfg.max_seed_combinations:
                        break
            partials = nxt
        seeds = partials if any_hint else []
        # anchors: all-zero and all-unit tuples where every domain has them
        anchor_lists = [M.anchors(d) for d in domains]
        for k in range(min((len(a) for a in anchor_lists), default=0)):
            seeds.append(tuple(a[k] for a in anchor_lists))
        if outer and cfg.seed_points:
            for sp in cfg.seed_points:
                if isinstance(sp, tuple):
                    seeds.append(tuple(sp) + tuple(firsts[len(sp):]))
                else:
                    seeds.append((sp,) + tuple(firsts[1:]))
        return seeds


def _report(est_value, internal, root: Formula, samples, witness=None, certified=False) -> QuantEstimate:
    if internal == INDET:
        first = next((n for _, n in iter_nodes(root) if isinstance(n, Quantifier)), None)
        nominal = EXACT if first is None else (LOWER if first.kind == "sup" else UPPER)
        return QuantEstimate(est_value, nominal, witness or {}, samples, True, False)
    return QuantEstimate(est_value, internal, witness or {}, samples, False, certified)


def eval_term(M: Structure, t: Term, assignment: Mapping):
    """Value of ``t`` under ``assignment`` (names of variables and constants to points)."""
    ev = Evaluator(M)
    if isinstance(t, ScalarOf) and not is_quantifier_free(t.formula):
        return np.complex128(ev.value(t.formula, dict(assignment))[0])
    return _term(M, t, assignment)


def eval_formula(M: Structure, phi: Formula, assignment: Mapping | None = None,
                 cfg: QuantConfig | None = None, signature=None) -> QuantEstimate:
    """Estimate the value of ``phi``; see :class:`QuantEstimate` for the direction fields.

    ``signature`` declares any constants of ``phi`` beyond the structure's
    own signature.
    """
    env = dict(assignment or {})
    for name in free_variables(phi):
        if name not in env:
            raise MissingAssignment(name)
    ev = Evaluator(M, cfg, signature)
    if isinstance(phi, Quantifier):
        est = ev.block(phi, env)
        est.samples_used = ev.samples_used
        internal = est._internal
        if internal == INDET:
            est.indeterminate = True
        return est
    v, d = ev.value(phi, env)
    return _report(v, d, phi, ev.samples_used)


def eval_sentence(M: Structure, phi: Formula, cfg: QuantConfig | None = None) -> QuantEstimate:
    fv = free_variables(phi)
    if fv:
        raise MissingAssignment(next(iter(fv)))
    return eval_formula(M, phi, {}, cfg)
