"""Values of the atomless axiom on M_k for k = 1..12 next to the best rational gap |j/k - 1/pi|."""

import math

from contlogic.analysis import sentence_limit_table
from contlogic.theories import load_suite


def main() -> None:
    table = sentence_limit_table(load_suite("tii1").instantiate("atomless"), range(1, 13))
    print(f"{'k':>3}  {'value':>10}  {'min_j |j/k - 1/pi|':>20}  tail osc")
    for k, v, osc in zip(table.dims, table.values, table.tail_oscillation):
        gap = min(abs(j / k - 1 / math.pi) for j in range(k + 1))
        print(f"{k:>3}  {v:10.6f}  {gap:20.6f}  {osc:.6f}")


if __name__ == "__main__":
    main()
