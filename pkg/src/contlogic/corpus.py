"""Access to the bundled signatures, theories, type specs and experiments."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

SIGNATURES = ("cstar", "tracial", "banach", "unitary")
THEORIES = ("core", "tcstar", "ttr", "prelude", "tfactor", "tii1")
TYPESPECS = ("relcomm", "separation")
EXPERIMENTS = ("ii1_limits",)


def read(filename: str) -> str:
    """Text of a bundled data file such as ``"cstar.sig"``."""
    try:
        return resources.files("contlogic.data").joinpath(filename).read_text(encoding="utf-8")
    except (FileNotFoundError, IsADirectoryError):
        raise KeyError(filename) from None


def bundled_files() -> list[str]:
    return sorted(
        p.name for p in resources.files("contlogic.data").iterdir()
        if p.name.rsplit(".", 1)[-1] in ("sig", "thy", "typ", "exp")
    )


@lru_cache(maxsize=None)
def signature(name: str):
    from .parser import parse_signature

    return parse_signature(read(f"{name}.sig"))


@lru_cache(maxsize=None)
def theory_doc(name: str):
    from .parser import parse_theory

    return parse_theory(read(f"{name}.thy"), check=False)


def typespec(name: str):
    from .parser import parse_typespec

    return parse_typespec(read(f"{name}.typ"))


def experiment(name: str) -> dict[str, str]:
    from .parser import parse_experiment

    return parse_experiment(read(f"{name}.exp"))
