"""Beam functions with equal and optimal weights, and their side-to-main ratios."""

import argparse

import numpy as np

from dopplerspread import AodRegion, ArrayGeometry, assemble_c_matrices, closed_form_window, optimal_weights
from dopplerspread.spectrum import beam_function
from dopplerspread.weighting import smr


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--m", type=int, default=16)
    parser.add_argument("--spacing", type=float, default=0.45)
    parser.add_argument("--out", default="fig5_beam.csv")
    parser.add_argument("--plot", help="optional PNG path (needs matplotlib)")
    args = parser.parse_args()

    region = AodRegion.jakes()
    geom = ArrayGeometry.ula(args.m, args.spacing)
    u = optimal_weights(assemble_c_matrices(geom, region, closed_form_window(region, "equicos"))).weights
    x = np.linspace(-2.0, 2.0, 4001)
    eq, opt = beam_function(geom, x), beam_function(geom, x, u)
    print(f"SMR equal   {smr(geom, None, x):.3e}")
    print(f"SMR optimal {smr(geom, u, x):.3e}")
    np.savetxt(args.out, np.column_stack([x, eq, opt]), delimiter=",",
               header="omega_tilde,beam_equal,beam_optimal", comments="")
    if args.plot:
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots()
        ax.semilogy(x, eq, label="equal")
        ax.semilogy(x, opt, label="optimal")
        ax.set_xlabel("normalized Doppler frequency")
        ax.set_ylabel("beam function")
        ax.set_ylim(1e-8, 2)
        ax.legend()
        fig.savefig(args.plot, dpi=150)


if __name__ == "__main__":
    main()
