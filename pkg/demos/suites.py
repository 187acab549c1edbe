"""Run the bundled C* and tracial axiom suites on small matrix algebras and print the reports."""

from contlogic.algebras import DirectSumTracial, MatrixCstar, MatrixTracial
from contlogic.evaluator import QuantConfig
from contlogic.theories import evaluate_suite, load_suite


def main() -> None:
    for M, suite in [(MatrixCstar(2), "tcstar"), (MatrixTracial(3), "ttr")]:
        print(f"== {suite} on {M.spec}")
        print(evaluate_suite(M, load_suite(suite), cap=3).table())
    factor = load_suite("tfactor").restrict(["factor"])
    for M in (MatrixTracial(2), DirectSumTracial(2, 2)):
        rep = evaluate_suite(M, factor, QuantConfig(sample_budget=256))
        print(f"factor axiom on {M.spec}: {rep.verdict:.6f}")


if __name__ == "__main__":
    main()
