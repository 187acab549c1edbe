"""Deterministic fuzz inputs for the parser: token soup, raw bytes and mutated corpus lines."""

from __future__ import annotations

import random

from contlogic import corpus
from contlogic.parser import (
    ParseError, parse_formula, parse_signature, parse_source, parse_theory, parse_typespec, tokenize,
)

VOCAB = list("()[]|,.;:+-*/^@=<>#' \n\tabxyzDBUn0123456789") + [
    "sup", "inf", "in", "max", "min", "abs", "dU", "dC", "tr", "RE", "IM", "one", "zero", "||",
    "^*", "..", ":=", "1/pi", "1e-3", "theory", "axiom", "sort", "fn", "rel", "domain", "type",
    "var", "cond", "param", "foreach", "over", "include", "define", "lipschitz", "table",
    "experiment", "command", "=", "D[1]", "B[n]", "[n]", "@nearest", "xi(a)",
]


def _corpus_lines() -> list[str]:
    lines = []
    for name in corpus.bundled_files():
        lines += [l for l in corpus.read(name).splitlines() if l.strip() and not l.startswith("#")]
    return lines


def _mutate(rng: random.Random, text: str) -> str:
    chars = list(text)
    for _ in range(rng.randint(1, 4)):
        op = rng.random()
        pos = rng.randrange(len(chars) + 1)
        if op < 0.35 and chars:
            del chars[min(pos, len(chars) - 1)]
        elif op < 0.7:
            chars.insert(pos, rng.choice(VOCAB))
        elif chars:
            i, j = rng.randrange(len(chars)), rng.randrange(len(chars))
            chars[i], chars[j] = chars[j], chars[i]
    return "".join(chars)


def inputs(count: int, seed: int = 0):
    """Yield ``count`` fuzz strings; the mix is fixed by ``seed``."""
    rng = random.Random(seed)
    lines = _corpus_lines()
    files = [corpus.read(n) for n in corpus.bundled_files()]
    for k in range(count):
        r = rng.random()
        if r < 0.4:
            yield "".join(rng.choice(VOCAB) for _ in range(rng.randint(0, 30)))
        elif r < 0.6:
            yield bytes(rng.randrange(256) for _ in range(rng.randint(0, 40))).decode("utf-8", errors="replace")
        elif r < 0.97:
            yield _mutate(rng, rng.choice(lines))
        else:
            yield _mutate(rng, rng.choice(files))


def run_one(text: str, sig) -> None:
    """Feed ``text`` to every entry point; anything other than ParseError propagates."""
    for fn in (tokenize, lambda t: parse_formula(sig, t), parse_source):
        try:
            fn(text)
        except ParseError:
            pass


def crashes(count: int, seed: int = 0) -> list[tuple[str, str]]:
    sig = corpus.signature("tracial")
    bad = []
    for text in inputs(count, seed):
        try:
            run_one(text, sig)
        except Exception as e:  # noqa: BLE001 - a crash is any non-diagnostic exception
            bad.append((text, f"{type(e).__name__}: {e}"))
    return bad
