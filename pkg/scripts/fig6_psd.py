"""Analytic versus Monte Carlo PSD of the Doppler-compensated channel.

Two settings: AoDs in (0, 120 deg) with equally spaced cosines, and the full
(0, 180 deg) range with equally spaced angles.
"""

import argparse
import math

import numpy as np

from dopplerspread import AodRegion, ArrayGeometry, closed_form_window, make_bank, numerical_psd, psd_analytic
from dopplerspread.channel import relative_l2

CASES = {
    "a": (AodRegion.from_degrees(0.0, 120.0), "equicos"),
    "b": (AodRegion.jakes(), "equiangle"),
}


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--m", type=int, default=16)
    parser.add_argument("--q", type=int, default=64)
    parser.add_argument("--f-d", type=float, default=1000.0)
    parser.add_argument("--realizations", type=int, default=10_000)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--out-prefix", default="fig6")
    parser.add_argument("--plot", help="optional PNG path (needs matplotlib)")
    args = parser.parse_args()

    geom = ArrayGeometry.ula(args.m, 0.45)
    curves = {}
    for name, (region, layout) in CASES.items():
        est = numerical_psd(region, geom, make_bank(region, args.q, layout, 0), args.f_d,
                            n_realizations=args.realizations, seed=args.seed)
        ana = psd_analytic(geom, region, closed_form_window(region, layout), 2 * math.pi * args.f_d, est.omega)
        print(f"case {name}: relative L2 {relative_l2(ana, est, region.mu):.4f}")
        keep = np.abs(est.omega_tilde) <= region.mu
        lookup = dict(zip(ana.omega_tilde.tolist(), ana.values.tolist()))
        x = est.omega_tilde[keep]
        a = np.array([lookup.get(v, np.inf) for v in x.tolist()])
        np.savetxt(f"{args.out_prefix}_{name}.csv", np.column_stack([x, a, est.values[keep]]), delimiter=",",
                   header="omega_tilde,psd_analytic,psd_numerical", comments="")
        curves[name] = (x, a, est.values[keep])
    if args.plot:
        import matplotlib.pyplot as plt
        fig, axes = plt.subplots(1, 2, figsize=(10, 4))
        for ax, (name, (x, a, n)) in zip(axes, curves.items()):
            ax.plot(x, n, ".", ms=2, label="numerical")
            ax.plot(x, a, label="analytic")
            ax.set_title(f"case {name}")
            ax.set_xlabel("normalized Doppler frequency")
            ax.legend()
        fig.savefig(args.plot, dpi=150)


if __name__ == "__main__":
    main()
