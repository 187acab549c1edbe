"""Text formats for signatures, formulas, theories, type specs and experiments.

Every entry point either returns a fully built object or raises
:class:`ParseError` carrying a list of :class:`Diagnostic` records; no other
exception escapes on malformed input.

Formula syntax in brief::

    sup a in D[n] @nearest. inf b in D[1]. dU((1/n) a, b)
    max(0, xi(a) - eta(a))          # clampPos
    ||a*x|| - n*||x||               # ||t|| is the metric distance to 0
    |RE(tr(a)) - 0.5|               # absShift
    RE(tr(a^* * a))                 # ^* is the adjoint
    [dC(lam, 0)] * x                # [phi] reads a formula as a scalar

Precedence from tight to loose: postfix (``^k``, ``^*``), unary minus,
``*`` and ``/`` (juxtaposition counts as ``*``), ``+`` and ``-``,
comparisons (type conditions only).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .signature import (
    ArgSlot,
    Domain,
    DomainDecl,
    FunctionDecl,
    IndexExpr,
    Modulus,
    NameDecl,
    OperatorDecl,
    ParamDecl,
    RelationDecl,
    Signature,
    SignatureError,
    SortDecl,
    build_signature,
)
from .syntax import (
    Apply,
    Basic,
    Condition,
    Connective,
    Const,
    ContinuousFn,
    Formula,
    Hint,
    Literal,
    Quantifier,
    ScalarOf,
    SyntaxCheckError,
    Term,
    Var,
    conn,
    const,
)

KEYWORDS = {
    "sup", "inf", "in", "def", "axiom", "theory", "over", "include", "signature",
    "sort", "domain", "fn", "rel", "param", "op", "on", "of", "with", "metric",
    "scalar", "bound", "lipschitz", "moduli", "table", "nonnegative", "type",
    "var", "cond", "foreach", "experiment",
}
FORMULA_RESERVED = {"sup", "inf", "in", "pi"}
CONNECTIVE_CALLS = {"max", "min", "abs", "absshift", "recip", "clamppos"}


# ---------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    message: str
    line: int
    column: int
    snippet: str = ""

    def __str__(self) -> str:
        s = f"{self.line}:{self.column}: {self.severity} [{self.code}] {self.message}"
        if self.snippet:
            s += f"\n    {self.snippet}"
        return s


class ParseError(ValueError):
    def __init__(self, diagnostics: Sequence[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics) or "parse error")

    @property
    def codes(self) -> list[str]:
        return [d.code for d in self.diagnostics]


class _Fail(Exception):
    def __init__(self, code: str, message: str, tok: "Token | None" = None):
        self.code = code
        self.message = message
        self.tok = tok


# ---------------------------------------------------------------------------
# lexer


@dataclass(frozen=True)
class Token:
    kind: str  # num, ident, op, eof
    text: str
    line: int
    col: int
    pos: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+|\n)
  | (?P<comment>\#[^\n]*)
  | (?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op>\|\||\^\*|->|<=|>=|:=|\.\.|[|()\[\],.;:+\-*/^@=])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[Token]:
    """Token list ending in an ``eof`` token; raises :class:`ParseError` on bad characters."""
    return _guard(text, lambda: _tokenize(text))


def _tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    pos, line, col = 0, 1, 1
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            ch = text[pos]
            raise _Fail("BadCharacter", f"unexpected character {ch!r}", Token("op", ch, line, col, pos))
        kind = m.lastgroup
        s = m.group(0)
        if kind in ("num", "ident", "op"):
            toks.append(Token(kind, s, line, col, pos))
        nl = s.count("\n")
        if nl:
            line += nl
            col = len(s) - s.rfind("\n")
        else:
            col += len(s)
        pos = m.end()
    toks.append(Token("eof", "", line, col, pos))
    return toks


class _Stream:
    def __init__(self, toks: list[Token]):
        self.toks = toks
        self.i = 0

    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.peek()
        if t.kind != "eof":
            self.i += 1
        return t

    def at(self, text: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t.kind != "eof" and t.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    def expect(self, text: str) -> Token:
        t = self.peek()
        if t.kind == "eof" or t.text != text:
            raise _Fail("Expected", f"expected {text!r}, found {_describe(t)}", t)
        return self.next()

    def ident(self, what: str = "identifier") -> Token:
        t = self.peek()
        if t.kind != "ident":
            raise _Fail("Expected", f"expected {what}, found {_describe(t)}", t)
        return self.next()


def _describe(t: Token) -> str:
    return "end of input" if t.kind == "eof" else repr(t.text)


def _diag(text: str, f: _Fail) -> Diagnostic:
    t = f.tok
    if t is None:
        return Diagnostic("error", f.code, f.message, 1, 1, "")
    lines = text.splitlines() or [""]
    snippet = lines[t.line - 1] if 0 < t.line <= len(lines) else ""
    return Diagnostic("error", f.code, f.message, t.line, t.col, snippet.strip())


def _guard(text: str, fn: Callable):
    try:
        return fn()
    except ParseError:
        raise
    except _Fail as f:
        raise ParseError([_diag(text, f)]) from None
    except (SignatureError, SyntaxCheckError) as e:
        code = type(e).__name__
        raise ParseError([Diagnostic("error", code, str(e), 1, 1, "")]) from None
    except RecursionError:
        raise ParseError([Diagnostic("error", "TooDeep", "input nests too deeply", 1, 1, "")]) from None
    except (ValueError, TypeError, KeyError, IndexError, OverflowError, ZeroDivisionError, AttributeError) as e:
        raise ParseError([Diagnostic("error", "Malformed", f"{type(e).__name__}: {e}", 1, 1, "")]) from None


# ---------------------------------------------------------------------------
# surface expressions


@dataclass(frozen=True)
class _S:
    kind: str  # num name call bin neg pow star norm abs quant bracket paren
    tok: Token
    value: object = None
    args: tuple = ()


def _parse_expr(s: _Stream, level: int = 0) -> _S:
    left = _parse_unary(s)
    while True:
        t = s.peek()
        if t.kind == "op" and t.text in ("+", "-"):
            prec = 10
        elif t.kind == "op" and t.text in ("*", "/"):
            prec = 20
        elif _starts_juxtaposed(s):
            prec = 20
        else:
            break
        if prec <= level:
            break
        if prec == 20 and not (t.kind == "op" and t.text in ("*", "/")):
            right = _parse_expr(s, prec)
            left = _S("bin", t, "*", (left, right))
            continue
        s.next()
        right = _parse_expr(s, prec)
        left = _S("bin", t, t.text, (left, right))
    return left


def _starts_juxtaposed(s: _Stream) -> bool:
    t = s.peek()
    if t.kind == "ident":
        return t.text not in KEYWORDS or t.text in ("sup", "inf")
    return t.kind == "op" and t.text in ("(", "[")


def _parse_unary(s: _Stream) -> _S:
    t = s.peek()
    if t.kind == "op" and t.text == "-":
        s.next()
        return _S("neg", t, None, (_parse_unary(s),))
    if t.kind == "op" and t.text == "+":
        s.next()
        return _parse_unary(s)
    return _parse_postfix(s)


def _parse_postfix(s: _Stream) -> _S:
    e = _parse_primary(s)
    while True:
        t = s.peek()
        if t.kind == "op" and t.text == "^*":
            s.next()
            e = _S("star", t, None, (e,))
        elif t.kind == "op" and t.text == "^":
            s.next()
            k = s.peek()
            if k.kind != "num" or not re.fullmatch(r"\d+", k.text):
                raise _Fail("BadExponent", "exponent must be a positive integer literal", k)
            s.next()
            if int(k.text) < 1 or int(k.text) > 64:
                raise _Fail("BadExponent", "exponent must lie in 1..64", k)
            e = _S("pow", t, int(k.text), (e,))
        else:
            return e


def _parse_primary(s: _Stream) -> _S:
    t = s.peek()
    if t.kind == "num":
        s.next()
        return _S("num", t, float(t.text))
    if t.kind == "ident":
        if t.text in ("sup", "inf"):
            return _parse_quant(s)
        if t.text in KEYWORDS:
            raise _Fail("Unexpected", f"unexpected keyword {t.text!r}", t)
        s.next()
        if s.at("("):
            s.next()
            args = []
            if not s.at(")"):
                args.append(_parse_expr(s))
                while s.accept(","):
                    args.append(_parse_expr(s))
            s.expect(")")
            return _S("call", t, t.text, tuple(args))
        return _S("name", t, t.text)
    if t.kind == "op":
        if t.text == "(":
            s.next()
            e = _parse_expr(s)
            s.expect(")")
            return _S("paren", t, None, (e,))
        if t.text == "[":
            s.next()
            e = _parse_expr(s)
            s.expect("]")
            return _S("bracket", t, None, (e,))
        if t.text == "||":
            s.next()
            e = _parse_expr(s)
            s.expect("||")
            return _S("norm", t, None, (e,))
        if t.text == "|":
            s.next()
            e = _parse_expr(s)
            s.expect("|")
            return _S("abs", t, None, (e,))
    raise _Fail("Unexpected", f"unexpected {_describe(t)}", t)


def _parse_quant(s: _Stream) -> _S:
    kw = s.next()
    names = [s.ident("variable name")]
    while s.accept(","):
        names.append(s.ident("variable name"))
    s.expect("in")
    fam = s.ident("domain name")
    index = None
    if s.accept("["):
        index = _parse_expr(s)
        s.expect("]")
    hint = None
    if s.at("@"):
        at = s.next()
        hname = s.ident("hint name")
        hargs = []
        if s.accept("("):
            if not s.at(")"):
                hargs.append(s.ident("hint argument").text)
                while s.accept(","):
                    hargs.append(s.ident("hint argument").text)
            s.expect(")")
        if len(names) > 1:
            raise _Fail("HintOnGroup", "a hint needs a single quantified variable", at)
        hint = Hint(hname.text, tuple(hargs))
    s.expect(".")
    body = _parse_expr(s)
    return _S("quant", kw, (kw.text, tuple(n.text for n in names), fam, index, hint), (body,))


# ---------------------------------------------------------------------------
# macros (token level)


@dataclass(frozen=True)
class Macro:
    name: str
    params: tuple[str, ...]
    body: tuple[Token, ...]


def _split_args(toks: list[Token], start: int) -> tuple[list[list[Token]], int]:
    """Split ``( a, b )`` starting at ``toks[start] == '('``; return args and index after ')'."""
    depth = 0
    args: list[list[Token]] = [[]]
    i = start
    while True:
        t = toks[i]
        if t.kind == "eof":
            raise _Fail("Unclosed", "unclosed macro call", toks[start])
        if t.text in ("(", "["):
            depth += 1
            if depth > 1:
                args[-1].append(t)
        elif t.text in (")", "]"):
            depth -= 1
            if depth == 0:
                return ([a for a in args] if args != [[]] else []), i + 1
            args[-1].append(t)
        elif t.text == "," and depth == 1:
            args.append([])
        else:
            args[-1].append(t)
        i += 1


def _paren(toks: Sequence[Token], like: Token) -> list[Token]:
    return [Token("op", "(", like.line, like.col, like.pos), *toks, Token("op", ")", like.line, like.col, like.pos)]


def expand_macros(toks: list[Token], macros: Mapping[str, Macro], limit: int = 64) -> list[Token]:
    counter = [0]
    for _ in range(limit):
        changed = False
        out: list[Token] = []
        i = 0
        while i < len(toks):
            t = toks[i]
            if t.kind == "ident" and t.text in macros and toks[i + 1].text == "(" and (i == 0 or toks[i - 1].text != "def"):
                m = macros[t.text]
                args, j = _split_args(toks, i + 1)
                if len(args) != len(m.params):
                    raise _Fail("MacroArity", f"{m.name} takes {len(m.params)} arguments, got {len(args)}", t)
                used = {x.text for x in toks if x.kind == "ident"}
                out.extend(_instantiate(m, args, t, used, counter))
                i = j
                changed = True
            else:
                out.append(t)
                i += 1
        toks = out
        if not changed:
            return toks
    raise _Fail("MacroRecursion", "macro expansion does not terminate", toks[0] if toks else None)


def _instantiate(m: Macro, args, at: Token, used: set[str], counter) -> list[Token]:
    sub = dict(zip(m.params, args))
    body = list(m.body)
    # rename variables bound inside the body when they could capture
    renames: dict[str, str] = {}
    for k, t in enumerate(body):
        if t.kind == "ident" and t.text in ("sup", "inf"):
            j = k + 1
            while j < len(body) and body[j].kind == "ident" and body[j].text != "in":
                name = body[j].text
                if name in used and name not in m.params:
                    counter[0] += 1
                    renames[name] = f"{name}_{counter[0]}"
                j += 1
                if j < len(body) and body[j].text == ",":
                    j += 1
    out: list[Token] = []
    for k, t in enumerate(body):
        prev = body[k - 1].text if k else ""
        if t.kind == "ident" and t.text in sub and prev != "@":
            out.extend(_paren(sub[t.text], at))
        elif t.kind == "ident" and t.text in renames:
            out.append(Token("ident", renames[t.text], t.line, t.col, t.pos))
        else:
            out.append(t)
    return _paren(out, at)


# ---------------------------------------------------------------------------
# elaboration: surface -> Formula / Term


class _Elab:
    def __init__(self, sig: Signature, variables: Mapping[str, Domain], params: Mapping[str, float]):
        self.sig = sig
        self.vars = dict(variables)
        self.params = dict(params)
        self.scalar = sig.scalar_sort()

    # ---- constants

    def fold(self, e: _S) -> float | None:
        k = e.kind
        if k == "num":
            return e.value
        if k == "name":
            if e.value == "pi":
                return math.pi
            if e.value in self.params and e.value not in self.vars:
                return float(self.params[e.value])
            return None
        if k == "paren":
            return self.fold(e.args[0])
        if k == "neg":
            v = self.fold(e.args[0])
            return None if v is None else -v
        if k == "pow":
            v = self.fold(e.args[0])
            return None if v is None else v ** e.value
        if k == "bin":
            a, b = self.fold(e.args[0]), self.fold(e.args[1])
            if a is None or b is None:
                return None
            if e.value == "+":
                return a + b
            if e.value == "-":
                return a - b
            if e.value == "*":
                return a * b
            if b == 0:
                raise _Fail("DivisionByZero", "division by zero in a constant", e.tok)
            return a / b
        return None

    def index(self, e: _S) -> int:
        v = self.fold(e)
        if v is None or not float(v).is_integer():
            raise _Fail("BadIndex", "domain index must be a constant integer", e.tok)
        return int(v)

    def domain(self, fam: Token, index: _S | None) -> Domain:
        if fam.text not in self.sig.families:
            raise _Fail("UnknownDomain", f"unknown domain {fam.text!r}", fam)
        try:
            return self.sig.domain(fam.text, None if index is None else self.index(index))
        except SignatureError as err:
            raise _Fail(type(err).__name__, str(err), fam) from None

    # ---- formulas

    def formula(self, e: _S) -> Formula:
        v = self.fold(e)
        if v is not None:
            if not math.isfinite(v):
                raise _Fail("BadConstant", "non-finite constant", e.tok)
            return const(v)
        k = e.kind
        if k == "paren":
            return self.formula(e.args[0])
        if k == "bin":
            op = e.value
            a, b = e.args
            if op in ("+", "-"):
                return conn("add" if op == "+" else "sub", self.formula(a), self.formula(b))
            ca, cb = self.fold(a), self.fold(b)
            if op == "*":
                if ca is not None:
                    return conn("scale", self.formula(b), param=ca)
                if cb is not None:
                    return conn("scale", self.formula(a), param=cb)
                return conn("mul", self.formula(a), self.formula(b))
            if cb is not None:
                if cb == 0:
                    raise _Fail("DivisionByZero", "division by zero", e.tok)
                return conn("scale", self.formula(a), param=1.0 / cb)
            if ca is not None:
                r = conn("recip", self.formula(b))
                return r if ca == 1 else conn("scale", r, param=ca)
            raise _Fail("Unsupported", "only constants may divide or be divided by formulas", e.tok)
        if k == "neg":
            return conn("scale", self.formula(e.args[0]), param=-1.0)
        if k == "pow":
            base = self.formula(e.args[0])
            out = base
            for _ in range(e.value - 1):
                out = conn("mul", out, base)
            return out
        if k == "norm":
            return self.norm(e.args[0], e.tok)
        if k == "abs":
            return self.absolute(e.args[0])
        if k == "quant":
            return self.quant(e)
        if k == "call":
            return self.call_formula(e)
        if k == "name":
            raise _Fail("NotAFormula", f"{e.value!r} is not a formula", e.tok)
        if k == "bracket":
            raise _Fail("NotAFormula", "[...] is a scalar term, not a formula", e.tok)
        raise _Fail("NotAFormula", "expected a formula", e.tok)

    def absolute(self, inner: _S) -> Formula:
        try:
            if inner.kind == "bin" and inner.value == "-":
                r = self.fold(inner.args[1])
                if r is not None and self.fold(inner.args[0]) is None:
                    return conn("absshift", self.formula(inner.args[0]), param=r)
            return conn("abs", self.formula(inner))
        except _Fail as f:
            if f.code != "NotAFormula":
                raise
            # |t| of a term is its distance to zero
            return self.norm(inner, f.tok)

    def norm(self, inner: _S, tok: Token) -> Formula:
        t = self.term(inner, None)
        srt = self.sort_of(t)
        if srt is None or srt not in self.sig.sorts:
            raise _Fail("NoNorm", "cannot determine the sort under ||...||", tok)
        zero = self.zero_of(srt)
        if zero is None:
            raise _Fail("NoNorm", f"sort {srt} has no zero constant '0'", tok)
        return Basic(self.sig.sorts[srt].metric, (t, zero))

    def zero_of(self, srt: str) -> Term | None:
        if srt == self.scalar:
            return Literal(0.0, srt)
        f = self.sig.functions.get("0")
        if f is not None and f.arity == 0 and f.result_sort == srt:
            return Apply("0")
        return None

    def call_formula(self, e: _S) -> Formula:
        name = e.value
        args = e.args
        rel = self.sig.relations.get(name)
        if rel is not None:
            if len(args) != rel.arity:
                raise _Fail("Arity", f"{name} takes {rel.arity} arguments, got {len(args)}", e.tok)
            return Basic(name, tuple(self.term(a, s) for a, s in zip(args, rel.arg_sorts)))
        if name in ("max", "min"):
            if len(args) != 2:
                raise _Fail("Arity", f"{name} takes 2 arguments", e.tok)
            a, b = args
            if name == "max":
                if a.kind == "num" and a.value == 0:
                    return conn("clamppos", self.formula(b))
                if b.kind == "num" and b.value == 0:
                    return conn("clamppos", self.formula(a))
            return conn(name, self.formula(a), self.formula(b))
        if name == "abs":
            if len(args) != 1:
                raise _Fail("Arity", "abs takes 1 argument", e.tok)
            return self.absolute(args[0])
        if name in ("recip", "clamppos"):
            if len(args) != 1:
                raise _Fail("Arity", f"{name} takes 1 argument", e.tok)
            return conn(name, self.formula(args[0]))
        if name == "absshift":
            if len(args) != 2 or self.fold(args[1]) is None:
                raise _Fail("Arity", "absshift takes a formula and a constant", e.tok)
            return conn("absshift", self.formula(args[0]), param=self.fold(args[1]))
        if name in self.sig.functions:
            raise _Fail("NotAFormula", f"function symbol {name!r} yields a term, not a formula", e.tok)
        raise _Fail("UnknownSymbol", f"unknown relation or macro {name!r}", e.tok)

    def quant(self, e: _S) -> Formula:
        kind, names, fam, index, hint = e.value
        dom = self.domain(fam, index)
        for n in names:
            if n in self.params or n in FORMULA_RESERVED:
                raise _Fail("Shadowing", f"{n!r} is reserved", e.tok)
        saved = dict(self.vars)
        for n in names:
            self.vars[n] = dom
        try:
            body = self.formula(e.args[0])
        finally:
            self.vars = saved
        for i, n in enumerate(reversed(names)):
            h = hint if i == len(names) - 1 else None
            body = Quantifier(kind, Var(n, dom.sort, dom), body, h)
        return body

    # ---- terms

    def sort_of(self, t: Term) -> str | None:
        if isinstance(t, Var):
            return t.sort
        if isinstance(t, (Literal, ScalarOf)):
            return t.sort
        if isinstance(t, Const):
            c = self.sig.constants.get(t.name)
            return c.sort if c else None
        f = self.sig.functions.get(t.symbol)
        return f.result_sort if f else None

    def term(self, e: _S, expected: str | None) -> Term:
        v = self.fold(e)
        if v is not None:
            if not math.isfinite(v):
                raise _Fail("BadConstant", "non-finite constant", e.tok)
            if expected is not None and expected != self.scalar and e.kind == "num":
                f = self.sig.functions.get(e.tok.text)
                if f is not None and f.arity == 0 and f.result_sort == expected:
                    return Apply(e.tok.text)
            return Literal(float(v), self.scalar or "")
        k = e.kind
        if k == "paren":
            return self.term(e.args[0], expected)
        if k == "name":
            n = e.value
            if n in self.vars:
                dom = self.vars[n]
                return Var(n, dom.sort, dom)
            if n in self.sig.constants:
                return Const(n)
            f = self.sig.functions.get(n)
            if f is not None and f.arity == 0:
                return Apply(n)
            raise _Fail("UnknownSymbol", f"unknown name {n!r}", e.tok)
        if k == "call":
            f = self.sig.functions.get(e.value)
            if f is None:
                if e.value in self.sig.relations or e.value in CONNECTIVE_CALLS:
                    raise _Fail("NotATerm", f"{e.value!r} yields a real value; wrap it as [...]", e.tok)
                raise _Fail("UnknownSymbol", f"unknown function symbol {e.value!r}", e.tok)
            if len(e.args) != f.arity:
                raise _Fail("Arity", f"{e.value} takes {f.arity} arguments, got {len(e.args)}", e.tok)
            return Apply(e.value, tuple(self.term(a, s) for a, s in zip(e.args, f.arg_sorts)))
        if k == "bracket":
            return ScalarOf(self.formula(e.args[0]), self.scalar or "")
        if k == "star":
            t = self.term(e.args[0], expected)
            return Apply(self.op_symbol("^*", (self.sort_of(t),), e.tok), (t,))
        if k == "neg":
            t = self.term(e.args[0], expected)
            return self.scalar_times(Literal(-1.0, self.scalar or ""), t, e.tok)
        if k == "bin":
            a, b = e.args
            if e.value in ("+", "-"):
                l = self.term(a, expected)
                ls = None if isinstance(l, Literal) else self.sort_of(l)
                r = self.term(b, ls or expected)
                srt = ls or self.sort_of(r)
                if e.value == "-":
                    r = self.scalar_times(Literal(-1.0, self.scalar or ""), r, e.tok)
                return Apply(self.op_symbol("+", (srt,), e.tok), (l, r))
            if e.value == "*":
                l = self.term(a, None)
                r = self.term(b, expected)
                ls, rs = self.sort_of(l), self.sort_of(r)
                if ls == rs:
                    return Apply(self.op_symbol("*", (ls,), e.tok), (l, r))
                sym = self.sig.operator("*", (ls, rs))
                if sym is None:
                    sym = self.sig.operator("*", (rs,)) or self.sig.operator("*", (ls,))
                if sym is None:
                    raise _Fail("NoOperator", f"no '*' on sorts {ls}, {rs}", e.tok)
                return Apply(sym, (l, r))
            raise _Fail("Unsupported", "division is only allowed between constants in terms", e.tok)
        if k in ("norm", "abs", "quant", "pow"):
            raise _Fail("NotATerm", "real-valued expression used as a term; wrap it as [...]", e.tok)
        raise _Fail("NotATerm", "expected a term", e.tok)

    def scalar_times(self, lam: Term, t: Term, tok: Token) -> Term:
        if isinstance(t, Literal):
            return Literal(lam.value * t.value, t.sort)
        srt = self.sort_of(t)
        sym = self.sig.operator("*", (self.scalar, srt)) if srt != self.scalar else self.sig.operator("*", (srt,))
        if sym is None:
            raise _Fail("NoOperator", f"no scalar action on sort {srt}", tok)
        return Apply(sym, (lam, t))

    def op_symbol(self, op: str, sorts, tok: Token) -> str:
        sym = self.sig.operator(op, tuple(sorts))
        if sym is None:
            raise _Fail("NoOperator", f"no operator {op!r} on sort {', '.join(map(str, sorts))}", tok)
        return sym


def _resolve_vars(sig: Signature, variables) -> dict[str, Domain]:
    out = {}
    for k, v in (variables or {}).items():
        out[k] = sig.parse_domain(v) if isinstance(v, str) else v
    return out


def _formula_from_tokens(sig, toks, variables, params, macros) -> Formula:
    toks = expand_macros(list(toks), macros or {})
    s = _Stream(toks)
    e = _parse_expr(s)
    if s.peek().kind != "eof":
        raise _Fail("Trailing", f"unexpected {_describe(s.peek())} after formula", s.peek())
    return _Elab(sig, variables, params or {}).formula(e)


def parse_formula(
    sig: Signature,
    text: str,
    variables: Mapping[str, Domain | str] | None = None,
    params: Mapping[str, float] | None = None,
    macros: Mapping[str, Macro] | None = None,
) -> Formula:
    """Parse a formula over ``sig``.

    ``variables`` declares free variables with their domains, ``params`` binds
    template parameters (such as ``n``) to numbers, ``macros`` supplies
    definitions such as the prelude's ``xi`` and ``eta``.
    """

    def run():
        toks = _tokenize(text)
        return _formula_from_tokens(sig, toks, _resolve_vars(sig, variables), params, macros)

    return _guard(text, run)


def parse_term(sig: Signature, text: str, variables=None, params=None, expected: str | None = None) -> Term:
    def run():
        s = _Stream(_tokenize(text))
        e = _parse_expr(s)
        if s.peek().kind != "eof":
            raise _Fail("Trailing", f"unexpected {_describe(s.peek())} after term", s.peek())
        return _Elab(sig, _resolve_vars(sig, variables), params or {}).term(e, expected)

    return _guard(text, run)


# ---------------------------------------------------------------------------
# signatures


def _parse_index_expr(s: _Stream) -> IndexExpr:
    def atom():
        t = s.peek()
        if t.kind == "num" and re.fullmatch(r"\d+", t.text):
            s.next()
            return IndexExpr.const(int(t.text))
        if t.kind == "ident" and t.text == "max" and s.at("(", 1):
            s.next()
            s.next()
            args = [_parse_index_expr(s)]
            while s.accept(","):
                args.append(_parse_index_expr(s))
            s.expect(")")
            return IndexExpr("max", None, tuple(args))
        if t.kind == "ident" and t.text not in KEYWORDS:
            s.next()
            return IndexExpr.var(t.text)
        if s.accept("("):
            e = _parse_index_expr(s)
            s.expect(")")
            return e
        raise _Fail("BadIndexExpr", f"expected an index expression, found {_describe(t)}", t)

    def product():
        parts = [atom()]
        while s.accept("*"):
            parts.append(atom())
        return parts[0] if len(parts) == 1 else IndexExpr("*", None, tuple(parts))

    parts = [product()]
    while s.accept("+"):
        parts.append(product())
    return parts[0] if len(parts) == 1 else IndexExpr("+", None, tuple(parts))


def _parse_slot(s: _Stream) -> ArgSlot:
    fam = s.ident("domain family")
    if s.accept("["):
        p = s.ident("index parameter")
        s.expect("]")
        return ArgSlot(fam.text, p.text)
    return ArgSlot(fam.text)


def _parse_real(s: _Stream) -> float:
    neg = s.accept("-")
    t = s.peek()
    if t.kind != "num":
        raise _Fail("Expected", f"expected a number, found {_describe(t)}", t)
    s.next()
    return -float(t.text) if neg else float(t.text)


def _parse_modulus(s: _Stream):
    t = s.peek()
    if s.accept("lipschitz"):
        return _mod_value(s)
    if s.accept("table"):
        s.expect("[")
        pairs = []
        while True:
            s.expect("(")
            e = _parse_real(s)
            s.expect(",")
            d = _parse_real(s)
            s.expect(")")
            pairs.append((e, d))
            if not s.accept(","):
                break
        s.expect("]")
        try:
            return Modulus.from_table(pairs)
        except ValueError as err:
            raise _Fail("BadModulus", str(err), t) from None
    raise _Fail("Expected", f"expected 'lipschitz' or 'table', found {_describe(t)}", t)


def _parse_moduli(s: _Stream, arity: int) -> tuple:
    if s.accept("lipschitz"):
        s.expect("(")
        out = []
        if not s.at(")"):
            out.append(_mod_value(s))
            while s.accept(","):
                out.append(_mod_value(s))
        s.expect(")")
        return tuple(out)
    if s.accept("moduli"):
        s.expect("(")
        out = []
        if not s.at(")"):
            out.append(_parse_modulus(s))
            while s.accept(","):
                out.append(_parse_modulus(s))
        s.expect(")")
        return tuple(out)
    if arity == 0:
        return ()
    raise _Fail("MissingModulus", "expected 'lipschitz (...)' or 'moduli (...)'", s.peek())


def _mod_value(s: _Stream):
    t = s.peek()
    if t.kind == "num" and not re.fullmatch(r"\d+", t.text):
        return Modulus.lipschitz(_parse_real(s))
    return _parse_index_expr(s)


def _sig_decls(s: _Stream) -> tuple[list, str]:
    decls: list = []
    name = ""
    if s.accept("signature"):
        name = s.ident("signature name").text
        s.expect(";")
        decls.append(NameDecl(name))
    while s.peek().kind != "eof":
        t = s.peek()
        if s.accept("sort"):
            n = s.ident("sort name")
            metric = None
            scalar = False
            mbound = None
            if s.accept("with"):
                s.expect("metric")
                metric = s.ident("metric symbol").text
            while not s.at(";"):
                if s.accept("scalar"):
                    scalar = True
                elif s.accept("bound"):
                    mbound = _parse_index_expr(s)
                else:
                    raise _Fail("Unexpected", f"unexpected {_describe(s.peek())} in sort declaration", s.peek())
            s.expect(";")
            if metric is None:
                raise _Fail("MissingMetric", f"sort {n.text!r} needs 'with metric <symbol>'", n)
            decls.append(SortDecl(n.text, metric, scalar, mbound))
        elif s.accept("domain"):
            fam = s.ident("domain family")
            indexed = False
            if s.accept("["):
                s.ident("index parameter")
                s.expect("]")
                indexed = True
            s.expect("of")
            srt = s.ident("sort name")
            s.expect(";")
            decls.append(DomainDecl(fam.text, srt.text, indexed))
        elif s.accept("fn"):
            nt = s.next()
            if nt.kind not in ("ident", "num"):
                raise _Fail("Expected", f"expected a function name, found {_describe(nt)}", nt)
            s.expect(":")
            args = []
            if not s.at("->"):
                args.append(_parse_slot(s))
                while s.accept(","):
                    args.append(_parse_slot(s))
            s.expect("->")
            res_fam = s.ident("result domain")
            res_idx = None
            if s.accept("["):
                res_idx = _parse_index_expr(s)
                s.expect("]")
            moduli = _parse_moduli(s, len(args))
            s.expect(";")
            decls.append(FunctionDecl(nt.text, tuple(args), ArgSlot(res_fam.text), res_idx, moduli))
        elif s.accept("rel"):
            nt = s.ident("relation name")
            s.expect(":")
            args = [_parse_slot(s)]
            while s.accept(","):
                args.append(_parse_slot(s))
            bound = None
            if s.accept("bound"):
                bound = _parse_index_expr(s)
            moduli = _parse_moduli(s, len(args))
            nonneg = s.accept("nonnegative")
            s.expect(";")
            decls.append(RelationDecl(nt.text, tuple(args), bound, moduli, nonneg))
        elif s.accept("param"):
            nt = s.ident("parameter name")
            s.expect(":")
            fam = s.ident("domain")
            idx = None
            if s.accept("["):
                it = s.peek()
                if it.kind != "num" or not re.fullmatch(r"\d+", it.text):
                    raise _Fail("BadIndex", "parameter domain index must be an integer", it)
                s.next()
                idx = int(it.text)
                s.expect("]")
            s.expect(";")
            decls.append(ParamDecl(nt.text, ArgSlot(fam.text), idx))
        elif s.accept("op"):
            ot = s.next()
            if ot.text not in ("+", "*", "^*"):
                raise _Fail("BadOperator", f"operator must be +, * or ^*, found {_describe(ot)}", ot)
            s.expect("on")
            sorts = [s.ident("sort").text]
            while s.accept(","):
                sorts.append(s.ident("sort").text)
            s.expect("=")
            sym = s.next()
            if sym.kind not in ("ident", "num"):
                raise _Fail("Expected", "expected a function symbol", sym)
            s.expect(";")
            decls.append(OperatorDecl(ot.text, tuple(sorts), sym.text))
        else:
            raise _Fail("Unexpected", f"unexpected {_describe(t)} at top level", t)
    return decls, name


def parse_signature(text: str, max_domain_index: int = 64) -> Signature:
    def run():
        s = _Stream(_tokenize(text))
        decls, name = _sig_decls(s)
        if max_domain_index < 1:
            raise _Fail("BadIndex", "max_domain_index must be positive")
        return build_signature(decls, name, max_domain_index)

    return _guard(text, run)


# ---------------------------------------------------------------------------
# theories


@dataclass(frozen=True)
class AxiomTemplate:
    """One axiom, possibly a schema in an integer parameter."""

    id: str
    tokens: tuple[Token, ...]
    source: str
    param: str | None = None
    range: tuple[int, int] | None = None  # None: 1..cap

    def instances(self, cap: int = 4) -> list[int | None]:
        """Parameter values to evaluate; an explicit range overrides ``cap``."""
        if self.param is None:
            return [None]
        lo, hi = self.range if self.range is not None else (1, cap)
        return list(range(lo, hi + 1))


@dataclass
class TheoryDoc:
    name: str
    signature: Signature
    signature_name: str
    includes: list[str] = field(default_factory=list)
    macros: dict[str, Macro] = field(default_factory=dict)
    axioms: list[AxiomTemplate] = field(default_factory=list)

    def instantiate(self, axiom: AxiomTemplate, n: int | None) -> Formula:
        params = {} if n is None else {axiom.param: n}

        def run():
            return _formula_from_tokens(self.signature, axiom.tokens, {}, params, self.macros)

        return _guard(axiom.source, run)


def _macro_def(s: _Stream, macros: dict[str, Macro]) -> Macro:
    nt = s.ident("macro name")
    params = []
    if s.accept("("):
        if not s.at(")"):
            params.append(s.ident("parameter").text)
            while s.accept(","):
                params.append(s.ident("parameter").text)
        s.expect(")")
    s.expect(":=")
    body = _take_until_semicolon(s)
    if nt.text in macros:
        raise _Fail("DuplicateName", f"macro {nt.text!r} defined twice", nt)
    return Macro(nt.text, tuple(params), tuple(body))


def _take_until_semicolon(s: _Stream) -> list[Token]:
    out = []
    depth = 0
    while True:
        t = s.peek()
        if t.kind == "eof":
            raise _Fail("Expected", "expected ';'", t)
        if t.text in ("(", "["):
            depth += 1
        elif t.text in (")", "]"):
            depth -= 1
        if t.text == ";" and depth <= 0:
            s.next()
            return out
        out.append(s.next())


def parse_theory(
    text: str,
    resolve_signature: Callable[[str], Signature] | None = None,
    resolve_theory: Callable[[str], TheoryDoc] | None = None,
    check: bool = True,
) -> TheoryDoc:
    """Parse a ``.thy`` document.

    ``over NAME`` and ``include NAME`` are resolved against the bundled corpus
    unless resolvers are supplied.  With ``check`` every instance of every
    axiom (up to the default cap) is parsed and sort-checked.
    """
    from . import corpus

    rs = resolve_signature or corpus.signature
    rt = resolve_theory or corpus.theory_doc

    def run():
        s = _Stream(_tokenize(text))
        s.expect("theory")
        name = s.ident("theory name").text
        s.expect("over")
        sig_tok = s.ident("signature name")
        s.expect(";")
        try:
            sig = rs(sig_tok.text)
        except (KeyError, FileNotFoundError):
            raise _Fail("UnknownSignature", f"unknown signature {sig_tok.text!r}", sig_tok) from None
        doc = TheoryDoc(name, sig, sig_tok.text)
        ids: set[str] = set()
        local_macros: dict[str, Macro] = {}
        while s.peek().kind != "eof":
            t = s.peek()
            if s.accept("include"):
                it = s.ident("theory name")
                s.expect(";")
                try:
                    other = rt(it.text)
                except (KeyError, FileNotFoundError):
                    raise _Fail("UnknownTheory", f"unknown theory {it.text!r}", it) from None
                doc.includes.append(it.text)
                for m in other.macros.values():
                    doc.macros.setdefault(m.name, m)
                for ax in other.axioms:
                    if ax.id in ids:
                        raise _Fail("DuplicateName", f"axiom {ax.id!r} included twice", it)
                    ids.add(ax.id)
                    doc.axioms.append(ax)
            elif s.accept("def"):
                m = _macro_def(s, local_macros)
                local_macros[m.name] = m
                doc.macros[m.name] = m
            elif s.accept("axiom"):
                it = s.ident("axiom id")
                if it.text in ids:
                    raise _Fail("DuplicateName", f"axiom {it.text!r} defined twice", it)
                param = None
                rng = None
                if s.accept("["):
                    param = s.ident("template parameter").text
                    if s.accept("in"):
                        lo = s.next()
                        s.expect("..")
                        hi = s.next()
                        if lo.kind != "num" or hi.kind != "num":
                            raise _Fail("BadRange", "range bounds must be integers", lo)
                        rng = (int(float(lo.text)), int(float(hi.text)))
                        if rng[0] < 1 or rng[1] < rng[0]:
                            raise _Fail("BadRange", "range must be nonempty and positive", lo)
                    s.expect("]")
                s.expect(":")
                body = _take_until_semicolon(s)
                if not body:
                    raise _Fail("Expected", "empty axiom", it)
                src = text[body[0].pos: body[-1].pos + len(body[-1].text)]
                eof = Token("eof", "", body[-1].line, body[-1].col, body[-1].pos)
                ax = AxiomTemplate(it.text, tuple(body) + (eof,), src, param, rng)
                ids.add(it.text)
                doc.axioms.append(ax)
            else:
                raise _Fail("Unexpected", f"unexpected {_describe(t)} at top level", t)
        if check:
            from .syntax import check_sorts, is_sentence

            for ax in doc.axioms:
                for n in ax.instances():
                    phi = doc.instantiate(ax, n)
                    check_sorts(sig, phi)
                    if not is_sentence(phi):
                        raise _Fail("NotASentence", f"axiom {ax.id} has free variables", ax.tokens[0])
        return doc

    return _guard(text, run)


# ---------------------------------------------------------------------------
# type specs


@dataclass(frozen=True)
class ParamSpec:
    name: str
    domain: Domain
    element: str  # named structure element: zero, one, generators ...


@dataclass(frozen=True)
class CondTemplate:
    condition: Condition
    foreach: tuple[str, str] | None = None  # (loop constant, element group)


@dataclass
class TypeSpecDoc:
    name: str
    signature: Signature
    variables: dict[str, Domain]
    params: list[ParamSpec]
    conditions: list[CondTemplate]


def parse_typespec(text: str, resolve_signature: Callable[[str], Signature] | None = None) -> TypeSpecDoc:
    """Parse a ``.typ`` document.

    ::

        type relcomm over tracial;
        var x in D[1];
        param z : D[1] = zero;
        foreach g : D[1] in generators: cond ||g*x - x*g|| <= 0;
    """
    from . import corpus
    from .signature import ConstantDecl

    rs = resolve_signature or corpus.signature

    def run():
        s = _Stream(_tokenize(text))
        s.expect("type")
        name = s.ident("type name").text
        s.expect("over")
        st = s.ident("signature name")
        s.expect(";")
        try:
            base = rs(st.text)
        except (KeyError, FileNotFoundError):
            raise _Fail("UnknownSignature", f"unknown signature {st.text!r}", st) from None
        sig = base
        variables: dict[str, Domain] = {}
        params: list[ParamSpec] = []
        conds: list[CondTemplate] = []

        def dom():
            fam = s.ident("domain")
            idx = None
            if s.accept("["):
                it = s.next()
                if it.kind != "num" or not re.fullmatch(r"\d+", it.text):
                    raise _Fail("BadIndex", "domain index must be an integer", it)
                idx = int(it.text)
                s.expect("]")
            try:
                return sig.domain(fam.text, idx)
            except SignatureError as e:
                raise _Fail(type(e).__name__, str(e), fam) from None

        def cond(extra_sig):
            ct = s.expect("cond")
            body = []
            while not (s.at("<=") or s.at(">=")):
                if s.peek().kind == "eof" or s.at(";"):
                    raise _Fail("Expected", "condition needs '<=' or '>='", s.peek())
                body.append(s.next())
            cmp_ = s.next().text
            rtoks = _take_until_semicolon(s)
            eof = Token("eof", "", ct.line, ct.col, ct.pos)
            phi = _formula_from_tokens(extra_sig, body + [eof], variables, {}, {})
            rs_ = _Stream(rtoks + [eof])
            r = _Elab(extra_sig, {}, {}).fold(_parse_expr(rs_))
            if r is None or rs_.peek().kind != "eof":
                raise _Fail("BadThreshold", "threshold must be a constant", ct)
            return Condition(phi, cmp_, float(r))

        while s.peek().kind != "eof":
            t = s.peek()
            if s.accept("var"):
                names = [s.ident("variable").text]
                while s.accept(","):
                    names.append(s.ident("variable").text)
                s.expect("in")
                d = dom()
                s.expect(";")
                for n in names:
                    if n in variables:
                        raise _Fail("DuplicateName", f"variable {n!r} declared twice", t)
                    variables[n] = d
            elif s.accept("param"):
                nt = s.ident("parameter")
                s.expect(":")
                d = dom()
                s.expect("=")
                el = s.ident("element name")
                s.expect(";")
                try:
                    sig = sig.with_constants([ConstantDecl(nt.text, d.sort, d)])
                except SignatureError as e:
                    raise _Fail("DuplicateName", str(e), nt) from None
                params.append(ParamSpec(nt.text, d, el.text))
            elif s.at("cond"):
                conds.append(CondTemplate(cond(sig)))
            elif s.accept("foreach"):
                gt = s.ident("loop constant")
                s.expect(":")
                d = dom()
                s.expect("in")
                grp = s.ident("element group")
                s.expect(":")
                try:
                    loop_sig = sig.with_constants([ConstantDecl(gt.text, d.sort, d)])
                except SignatureError as e:
                    raise _Fail("DuplicateName", str(e), gt) from None
                c = cond(loop_sig)
                params.append(ParamSpec(gt.text, d, "@" + grp.text))
                conds.append(CondTemplate(c, (gt.text, grp.text)))
            else:
                raise _Fail("Unexpected", f"unexpected {_describe(t)} at top level", t)
        if not variables:
            raise _Fail("NoVariables", "a type needs at least one 'var' declaration")
        return TypeSpecDoc(name, base, variables, params, conds)

    return _guard(text, run)


# ---------------------------------------------------------------------------
# experiments


def parse_experiment(text: str) -> dict[str, str]:
    """``experiment NAME`` followed by ``key = value`` lines."""

    def run():
        lines = text.splitlines()
        out: dict[str, str] = {}
        header = False
        for ln, raw in enumerate(lines, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if not header:
                parts = line.rstrip(";").split()
                if len(parts) != 2 or parts[0] != "experiment":
                    raise _Fail("Expected", "expected 'experiment NAME'", Token("ident", line, ln, 1, 0))
                out["name"] = parts[1]
                header = True
                continue
            if "=" not in line:
                raise _Fail("Expected", "expected 'key = value'", Token("ident", line, ln, 1, 0))
            k, v = line.split("=", 1)
            k = k.strip()
            if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_\-]*", k):
                raise _Fail("BadKey", f"bad key {k!r}", Token("ident", k, ln, 1, 0))
            if k in out:
                raise _Fail("DuplicateName", f"key {k!r} given twice", Token("ident", k, ln, 1, 0))
            out[k] = v.strip().rstrip(";").strip()
        if not header:
            raise _Fail("Expected", "expected 'experiment NAME'")
        return out

    return _guard(text, run)


def source_kind(text: str) -> str:
    """Kind of a source file from its first keyword."""

    def run():
        toks = _tokenize(text)
        first = toks[0]
        kinds = {"signature": "signature", "sort": "signature", "theory": "theory",
                 "type": "typeSpec", "experiment": "experiment"}
        if first.text not in kinds:
            raise _Fail("UnknownKind", f"cannot tell the file kind from {_describe(first)}", first)
        return kinds[first.text]

    return _guard(text, run)


def parse_source(text: str):
    kind = source_kind(text)
    if kind == "signature":
        return kind, parse_signature(text)
    if kind == "theory":
        return kind, parse_theory(text)
    if kind == "typeSpec":
        return kind, parse_typespec(text)
    return kind, parse_experiment(text)


# ---------------------------------------------------------------------------
# printing


def _fmt(x: float) -> str:
    s = repr(float(x))
    return f"({s})" if x < 0 or s.startswith("-") else s


def print_term(t: Term, sig: Signature) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Const):
        return t.name
    if isinstance(t, Literal):
        return _fmt(t.value)
    if isinstance(t, ScalarOf):
        return f"[{print_formula(t.formula, sig)}]"
    if isinstance(t, Apply):
        if not t.args:
            return t.symbol
        b = sig.operator_of(t.symbol)
        if b is not None and b.op == "^*" and len(t.args) == 1:
            return f"({print_term(t.args[0], sig)}^*)"
        if b is not None and b.op in ("+", "*") and len(t.args) == 2:
            return f"({print_term(t.args[0], sig)} {b.op} {print_term(t.args[1], sig)})"
        return f"{t.symbol}(" + ", ".join(print_term(a, sig) for a in t.args) + ")"
    raise TypeError(f"not a term: {t!r}")


def print_formula(phi: Formula, sig: Signature) -> str:
    """Canonical fully parenthesized text; parsing it gives back ``phi``."""
    p = lambda f: print_formula(f, sig)  # noqa: E731
    if isinstance(phi, Basic):
        return f"{phi.relation}(" + ", ".join(print_term(a, sig) for a in phi.args) + ")"
    if isinstance(phi, Quantifier):
        h = ""
        if phi.hint is not None:
            h = f" @{phi.hint.name}" + (f"({', '.join(phi.hint.args)})" if phi.hint.args else "")
        return f"({phi.kind} {phi.var.name} in {phi.var.domain.name}{h}. {p(phi.body)})"
    if isinstance(phi, Connective):
        k, r, a = phi.fn.kind, phi.fn.param, phi.args
        if k == "const":
            return _fmt(r)
        if k == "add":
            return f"({p(a[0])} + {p(a[1])})"
        if k == "sub":
            return f"({p(a[0])} - {p(a[1])})"
        if k == "mul":
            return f"({p(a[0])} * {p(a[1])})"
        if k == "scale":
            return f"({_fmt(r)} * {p(a[0])})"
        if k in ("max", "min"):
            return f"{k}({p(a[0])}, {p(a[1])})"
        if k == "clamppos":
            return f"max(0, {p(a[0])})"
        if k == "abs":
            return f"abs({p(a[0])})"
        if k == "absshift":
            return f"abs({p(a[0])} - {_fmt(r)})"
        if k == "recip":
            return f"(1 / {p(a[0])})"
    raise TypeError(f"not a formula: {phi!r}")


def _num_str(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def _mods_str(mods) -> str:
    if all(isinstance(m, IndexExpr) for m in mods):
        return "lipschitz (" + ", ".join(str(m) for m in mods) + ")"
    parts = []
    for m in mods:
        if isinstance(m, IndexExpr):
            parts.append(f"lipschitz {m}")
        elif m.is_lipschitz:
            parts.append(f"lipschitz {float(m.constant)!r}")
        else:
            parts.append("table [" + ", ".join(f"({float(e)!r}, {float(d)!r})" for e, d in m.table) + "]")
    return "moduli (" + ", ".join(parts) + ")"


def print_signature(sig: Signature) -> str:
    """Deterministic text listing every declaration sorted by name."""
    out = [f"signature {sig.name or 'anonymous'};"]
    for n in sorted(sig.sorts):
        s = sig.sorts[n]
        out.append(f"sort {n} with metric {s.metric}" + (" scalar" if s.scalar else "") + ";")
    for n in sorted(sig.families):
        f = sig.families[n]
        out.append(f"domain {n}[n] of {f.sort};" if f.indexed else f"domain {n} of {f.sort};")
    for n in sorted(sig.functions):
        f = sig.functions[n]
        res = f.result_family + (f"[{f.result_index}]" if f.result_index is not None else "")
        mods = " " + _mods_str(f.moduli) if f.moduli else ""
        out.append(f"fn {n} : {', '.join(map(str, f.args))} -> {res}{mods};".replace(":  ->", ": ->"))
    for n in sorted(sig.relations):
        r = sig.relations[n]
        neg = " nonnegative" if r.nonnegative else ""
        out.append(f"rel {n} : {', '.join(map(str, r.args))} bound {r.bound} {_mods_str(r.moduli)}{neg};")
    for n in sorted(sig.constants):
        c = sig.constants[n]
        out.append(f"param {n} : {c.domain.name};")
    for key in sorted(sig.operators, key=lambda k: (k[0], k[1])):
        b = sig.operators[key]
        out.append(f"op {b.op} on {', '.join(b.sorts)} = {b.symbol};")
    return "\n".join(out) + "\n"


def to_text(obj, sig: Signature | None = None) -> str:
    if isinstance(obj, Signature):
        return print_signature(obj)
    if sig is None:
        raise TypeError("printing a formula or term needs its signature")
    if isinstance(obj, Formula):
        return print_formula(obj, sig)
    return print_term(obj, sig)
