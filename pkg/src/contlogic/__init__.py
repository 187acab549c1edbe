"""Continuous first-order logic over metric structures."""

from .signature import Domain, Modulus, Signature, build_signature, lookup_result_domain
from .syntax import (
    Apply, Basic, Condition, Connective, Const, ContinuousFn, Formula, Hint, Literal,
    Quantifier, RangeBox, ScalarOf, Term, Var, check_sorts, free_variables,
    propagate_bounds, propagate_modulus,
)
from .parser import (
    Diagnostic, ParseError, parse_experiment, parse_formula, parse_signature,
    parse_theory, parse_typespec, print_formula, print_signature, to_text,
)

__version__ = "0.1.0"
