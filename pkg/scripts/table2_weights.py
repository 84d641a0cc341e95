"""Optimal antenna weights for a ULA (d/lambda = 0.45) under isotropic scattering.

Prints one row per array size, three decimals, largest entry scaled to 1.
"""

import argparse

import numpy as np

from dopplerspread import AodRegion, ArrayGeometry, assemble_c_matrices, closed_form_window, optimal_weights


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--ms", type=int, nargs="+", default=[8, 16, 32, 64])
    parser.add_argument("--spacing", type=float, default=0.45)
    parser.add_argument("--layout", default="equicos", choices=["equicos", "equiangle"])
    args = parser.parse_args()

    region = AodRegion.jakes()
    win = closed_form_window(region, args.layout)
    np.set_printoptions(precision=3, floatmode="fixed", linewidth=120)
    for m in args.ms:
        w = optimal_weights(assemble_c_matrices(ArrayGeometry.ula(m, args.spacing), region, win))
        half = w.weights.real[: (m + 1) // 2]
        print(f"M={m:3d}  eig={w.eigenvalue:.6g}  first half: {half}")


if __name__ == "__main__":
    main()
