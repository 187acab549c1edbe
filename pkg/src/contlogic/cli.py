"""Command-line front end.

Reports go to stdout (or ``--out``) as JSON with ``"schema": 1`` and the
resolved run configuration; diagnostics go to stderr.  Exit status is 0 on
success, 1 when a check or report fails, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from . import __version__, corpus
from .algebras import STRUCTURE_KINDS, Structure, structure_from_spec
from .evaluator import QuantConfig, eval_sentence
from .parser import ParseError, TheoryDoc, parse_experiment, parse_formula, parse_source, print_formula
from .syntax import free_variables

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# flag name -> QuantConfig field and converter
CFG_FIELDS = {
    "sample_budget": int,
    "refine_steps": int,
    "refine_step_size": float,
    "strategy": str,
    "rng_seed": int,
    "inner_sample_budget": int,
    "inner_refine_steps": int,
    "net_mesh": float,
}


class UsageError(Exception):
    pass


def _parse_dims(text: str) -> list[int]:
    out: list[int] = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            a, b = int(lo), int(hi)
            if b < a:
                raise UsageError(f"empty dimension range {part!r}")
            out.extend(range(a, b + 1))
        else:
            out.append(int(part))
    if not out or any(d < 1 for d in out):
        raise UsageError(f"bad dimension list {text!r}")
    return out


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    return str(v).strip().lower() in ("1", "true", "yes", "on")


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("search")
    g.add_argument("--config", help="experiment file (.exp) with default settings; flags win")
    g.add_argument("--out", help="write the report here instead of stdout")
    g.add_argument("--sample-budget", dest="sample_budget", type=int)
    g.add_argument("--refine-steps", dest="refine_steps", type=int)
    g.add_argument("--refine-step-size", dest="refine_step_size", type=float)
    g.add_argument("--inner-sample-budget", dest="inner_sample_budget", type=int)
    g.add_argument("--inner-refine-steps", dest="inner_refine_steps", type=int)
    g.add_argument("--strategy", choices=["samplingOnly", "samplingPlusRefine", "certifiedNet"])
    g.add_argument("--net-mesh", dest="net_mesh", type=float)
    g.add_argument("--rng-seed", dest="rng_seed", type=int)
    g.add_argument("--no-hints", dest="no_hints", action="store_const", const=True)

    p = argparse.ArgumentParser(prog="contlogic", description="Evaluate continuous-logic sentences in metric structures.")
    p.add_argument("--version", action="version", version=f"contlogic {__version__}")
    sub = p.add_subparsers(dest="command")

    c = sub.add_parser("check", parents=[common], help="parse and sort-check a source file")
    c.add_argument("file")

    e = sub.add_parser("eval", parents=[common], help="evaluate one sentence in a structure")
    e.add_argument("--structure")
    e.add_argument("--sentence", help="THEORY:AXIOM[@n], a .thy file (with --axiom) or a formula file")
    e.add_argument("--axiom")
    e.add_argument("--n", type=int, help="schema parameter")

    a = sub.add_parser("axioms", parents=[common], help="run an axiom suite")
    a.add_argument("--suite", help=f"bundled theory ({', '.join(corpus.THEORIES)}) or a .thy file")
    a.add_argument("--structure")
    a.add_argument("--cap", type=int)
    a.add_argument("--tolerance", type=float)
    a.add_argument("--format", choices=["json", "table"])

    o = sub.add_parser("order", parents=[common], help="order-property pattern check")
    o.add_argument("--l1", action="store_const", const=True)
    o.add_argument("--max-index", dest="max_index", type=int)
    o.add_argument("--delta", type=float)
    o.add_argument("--format", choices=["json", "csv"])

    t = sub.add_parser("type", parents=[common], help="type residual")
    t.add_argument("--spec", help="bundled type name or a .typ file")
    t.add_argument("--structure")

    li = sub.add_parser("limits", parents=[common], help="sentence values across matrix dimensions")
    li.add_argument("--sentence")
    li.add_argument("--dims")
    li.add_argument("--format", choices=["csv", "json"])
    return p


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read config {path}: {e.strerror}") from None
    cfg = parse_experiment(text)
    return {k.replace("-", "_"): v for k, v in cfg.items()}


def _resolve(args: argparse.Namespace) -> dict:
    """Merge flags over the config file into one run configuration."""
    run = _load_config(getattr(args, "config", None))
    run.pop("name", None)
    file_command = run.pop("command", None)
    if file_command and file_command != args.command:
        raise UsageError(f"config is for command {file_command!r}, not {args.command!r}")
    for k, v in vars(args).items():
        if k in ("config",) or v is None:
            continue
        run[k] = v
    quant = {}
    for k, conv in CFG_FIELDS.items():
        if k in run:
            try:
                quant[k] = conv(run[k])
            except ValueError:
                raise UsageError(f"bad value for {k}: {run[k]!r}") from None
    quant["use_hints"] = not _bool(run.get("no_hints", False))
    try:
        run["quant"] = QuantConfig(**quant)
    except ValueError as e:
        raise UsageError(str(e)) from None
    return run


def _structure(run: dict) -> Structure:
    spec = run.get("structure")
    if not spec:
        raise UsageError(f"--structure is required (kinds: {', '.join(STRUCTURE_KINDS)})")
    try:
        return structure_from_spec(str(spec))
    except (ValueError, KeyError) as e:
        raise UsageError(str(e)) from None


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _theory(ref: str) -> TheoryDoc:
    if ref in corpus.THEORIES:
        return corpus.theory_doc(ref)
    kind, doc = parse_source(_read(ref))
    if kind != "theory":
        raise UsageError(f"{ref} is a {kind} file, not a theory")
    return doc


def _sentence(run: dict, sig_hint=None):
    """Resolve ``--sentence`` to ``(signature, formula, label)``."""
    ref = run.get("sentence")
    if not ref:
        raise UsageError("--sentence is required")
    ref = str(ref)
    n = run.get("n")
    axiom = run.get("axiom")
    if ":" in ref and not Path(ref).exists():
        theory, axiom = ref.split(":", 1)
        if "@" in axiom:
            axiom, ns = axiom.split("@", 1)
            n = int(ns)
        doc = _theory(theory)
    else:
        text = _read(ref)
        first = text.lstrip().split(None, 1)[0] if text.strip() else ""
        if first == "theory":
            doc = _theory(ref)
        else:
            if sig_hint is None:
                raise UsageError("a bare formula file needs --structure to fix the signature")
            phi = parse_formula(sig_hint, text)
            return sig_hint, phi, ref
    if axiom is None:
        if not doc.axioms:
            raise UsageError(f"theory {doc.name} has no axioms")
        axiom = doc.axioms[-1].id
    matches = [a for a in doc.axioms if a.id == axiom]
    if not matches:
        raise UsageError(f"theory {doc.name} has no axiom {axiom!r}")
    tmpl = matches[0]
    if tmpl.param is not None and n is None:
        n = tmpl.instances()[0]
    if tmpl.param is None:
        n = None
    return doc.signature, doc.instantiate(tmpl, n), f"{doc.name}:{axiom}" + (f"@{n}" if n is not None else "")


def _config_dict(run: dict) -> dict:
    out = {}
    for k, v in run.items():
        if k == "quant":
            out["quant"] = v.to_dict()
        elif k not in ("out", "format"):
            out[k] = v
    return out


def _emit(run: dict, payload, fmt: str = "json") -> None:
    if fmt == "json":
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    else:
        text = payload if payload.endswith("\n") else payload + "\n"
    if run.get("out"):
        Path(run["out"]).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_check(run: dict) -> int:
    path = run["file"]
    text = _read(path)
    report = {"schema": 1, "kind": "check", "file": path, "config": _config_dict(run)}
    try:
        kind, doc = parse_source(text)
    except ParseError as e:
        report.update(ok=False, diagnostics=[_diag_dict(d) for d in e.diagnostics])
        for d in e.diagnostics:
            print(f"{path}:{d}", file=sys.stderr)
        _emit(run, report)
        return EXIT_FAIL
    summary: dict = {"source_kind": kind}
    if kind == "theory":
        summary.update(theory=doc.name, signature=doc.signature_name, axioms=[a.id for a in doc.axioms])
    elif kind == "signature":
        summary.update(sorts=sorted(doc.sorts), functions=sorted(doc.functions), relations=sorted(doc.relations))
    elif kind == "typeSpec":
        summary.update(type=doc.name, variables=sorted(doc.variables), conditions=len(doc.conditions))
    report.update(ok=True, diagnostics=[], summary=summary)
    _emit(run, report)
    return EXIT_OK


def _diag_dict(d) -> dict:
    return {"severity": d.severity, "code": d.code, "message": d.message, "line": d.line,
            "column": d.column, "snippet": d.snippet}


def cmd_eval(run: dict) -> int:
    M = _structure(run)
    sig, phi, label = _sentence(run, M.signature)
    fv = free_variables(phi)
    if fv:
        raise UsageError(f"{label} is not a sentence (free: {', '.join(fv)})")
    est = eval_sentence(M, phi, run["quant"])
    _emit(run, {
        "schema": 1, "kind": "estimate", "sentence": label, "formula": print_formula(phi, sig),
        "structure": M.spec, "config": _config_dict(run), "estimate": est.to_dict(),
    })
    return EXIT_OK


def cmd_axioms(run: dict) -> int:
    from .theories import AxiomSuite, SignatureMismatch, evaluate_suite

    if not run.get("suite"):
        raise UsageError("--suite is required")
    M = _structure(run)
    doc = _theory(str(run["suite"]))
    suite = AxiomSuite(doc.name, doc, list(doc.axioms))
    try:
        report = evaluate_suite(M, suite, run["quant"], cap=int(run.get("cap", 4)),
                                tolerance=float(run.get("tolerance", 1e-6)))
    except SignatureMismatch as e:
        raise UsageError(str(e)) from None
    if run.get("format") == "table":
        _emit(run, report.table(), "text")
    else:
        d = report.to_dict()
        d["config"] = _config_dict(run)
        _emit(run, d)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_order(run: dict) -> int:
    from .analysis import l1_order_report

    if not _bool(run.get("l1", False)):
        raise UsageError("only the l1 order witness is available from the command line; pass --l1")
    k = int(run.get("max_index", 4))
    if not 0 <= k <= 8:
        raise UsageError("--max-index must lie in 0..8")
    rep = l1_order_report(k, float(run.get("delta", 0.05)))
    if run.get("format") == "csv":
        _emit(run, rep.to_csv(), "text")
    else:
        d = rep.to_dict()
        d["config"] = _config_dict(run)
        _emit(run, d)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_type(run: dict) -> int:
    from .analysis import MissingParameter, type_residual, type_status
    from .theories import SignatureMismatch

    ref = run.get("spec")
    if not ref:
        raise UsageError("--spec is required")
    ref = str(ref)
    if ref in corpus.TYPESPECS:
        spec = corpus.typespec(ref)
    else:
        kind, spec = parse_source(_read(ref))
        if kind != "typeSpec":
            raise UsageError(f"{ref} is a {kind} file, not a type spec")
    M = _structure(run)
    try:
        est = type_residual(M, spec, run["quant"])
    except (MissingParameter, SignatureMismatch) as e:
        raise UsageError(str(e)) from None
    _emit(run, {
        "schema": 1, "kind": "type_residual", "type": spec.name, "structure": M.spec,
        "config": _config_dict(run), "estimate": est.to_dict(), "status": type_status(est),
    })
    return EXIT_OK


def cmd_limits(run: dict) -> int:
    from .algebras import MatrixTracial
    from .analysis import sentence_limit_table

    dims = _parse_dims(run.get("dims", "1..12"))
    if max(dims) > 32:
        raise UsageError("dimensions above 32 are not supported")
    sig = corpus.signature("tracial")
    sig_, phi, label = _sentence(run, sig)
    if free_variables(phi):
        raise UsageError(f"{label} is not a sentence")
    table = sentence_limit_table(phi, dims, run["quant"], MatrixTracial)
    if run.get("format", "csv") == "csv":
        _emit(run, table.to_csv(), "text")
    else:
        d = table.to_dict()
        d["config"] = _config_dict(run)
        d["sentence_ref"] = label
        _emit(run, d)
    return EXIT_OK


COMMANDS = {
    "check": cmd_check, "eval": cmd_eval, "axioms": cmd_axioms,
    "order": cmd_order, "type": cmd_type, "limits": cmd_limits,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        run = _resolve(args)
        if "dims" in run:
            run["dims"] = ",".join(str(d) for d in _parse_dims(run["dims"]))
        return COMMANDS[args.command](run)
    except UsageError as e:
        print(f"contlogic {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as e:
        print(f"contlogic {args.command}: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
