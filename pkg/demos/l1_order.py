"""Certified order pattern for x_i = ((f_1 + f_-1)/2)^(2^i) in l1(Z)."""

import numpy as np

from contlogic.analysis import l1_order_report


def main() -> None:
    rep = l1_order_report(max_index=4, delta=0.05)
    np.set_printoptions(precision=3, suppress=True)
    print("psi bounds (lower on and below the diagonal, upper above):")
    print(rep.values)
    print(f"verdict {rep.verdict}, separation {rep.separation:.3f}, normalization {rep.normalization}")


if __name__ == "__main__":
    main()
