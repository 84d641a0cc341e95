"""RMS Doppler spread versus element spacing for several array sizes."""

import argparse
import math

import numpy as np

from dopplerspread import AodRegion, ArrayGeometry, assemble_c_matrices, closed_form_window
from dopplerspread.weighting import doppler_spread_from_matrices

SPACINGS = (0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.47, 0.49, 0.495, 0.5)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--ms", type=int, nargs="+", default=[16, 64, 256])
    parser.add_argument("--f-d", type=float, default=1000.0)
    parser.add_argument("--out", default="fig8_spread.csv")
    parser.add_argument("--plot", help="optional PNG path (needs matplotlib)")
    args = parser.parse_args()

    region = AodRegion.jakes()
    wd = 2 * math.pi * args.f_d
    rows = []
    for layout in ("equicos", "equiangle"):
        win = closed_form_window(region, layout)
        for m in args.ms:
            sig = [doppler_spread_from_matrices(assemble_c_matrices(ArrayGeometry.ula(m, d), region, win), wd)
                   for d in SPACINGS]
            k = int(np.argmin(sig))
            print(f"{layout:9s} M={m:4d}  min {sig[k]:9.3f} rad/s at d/lambda={SPACINGS[k]}")
            rows += [(layout, m, d, s) for d, s in zip(SPACINGS, sig)]
    with open(args.out, "w") as fh:
        fh.write("layout,M,d_over_lambda,sigma_ds_rad_s\n")
        fh.writelines(f"{l},{m},{d},{s!r}\n" for l, m, d, s in rows)
    if args.plot:
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots()
        for layout in ("equicos", "equiangle"):
            for m in args.ms:
                sel = [(d, s) for l, mm, d, s in rows if l == layout and mm == m]
                ax.plot(*zip(*sel), "o-" if layout == "equicos" else "s--", label=f"{layout} M={m}")
        ax.set_xlabel("d / lambda")
        ax.set_ylabel("RMS Doppler spread (rad/s)")
        ax.legend()
        fig.savefig(args.plot, dpi=150)


if __name__ == "__main__":
    main()
