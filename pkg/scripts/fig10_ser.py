"""Uncoded 16-QAM OFDM symbol error rate with equal and optimal transmit weights."""

import argparse
import math

from dopplerspread import AodRegion, ArrayGeometry, OfdmConfig, make_bank, run_ser_sweep


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--m", type=int, default=64)
    parser.add_argument("--fd-tb", type=float, default=0.1, help="normalized Doppler f_d * T_b")
    parser.add_argument("--snr", type=float, nargs="+", default=[0, 5, 10, 15, 20, 25, 30, 35, 40])
    parser.add_argument("--symbols", type=float, default=2e5, help="data symbols per SNR point")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", default="fig10_ser.csv")
    parser.add_argument("--plot", help="optional PNG path (needs matplotlib)")
    args = parser.parse_args()

    cfg = OfdmConfig()
    region = AodRegion.jakes()
    tx, rx = ArrayGeometry.ula(args.m, 0.45), ArrayGeometry.ula(4, 0.5)
    bank = make_bank(region, args.m, "equicos", 0)
    frames = math.ceil(args.symbols / cfg.data_symbols_per_frame)
    f_d = args.fd_tb / cfg.t_block
    res = {mode: run_ser_sweep(cfg, tx, rx, bank, region, f_d, mode, args.snr, frames, args.seed, args.workers)
           for mode in ("equal", "optimal")}
    with open(args.out, "w") as fh:
        fh.write("weights,snr_db,ser,ci_low,ci_high,symbols\n")
        for mode, results in res.items():
            for r in results:
                lo, hi = r.confidence_interval()
                fh.write(f"{mode},{r.snr_db:g},{r.ser!r},{lo!r},{hi!r},{r.symbols_tested}\n")
                print(f"{mode:8s} {r.snr_db:5.1f} dB  SER {r.ser:.3e}  [{lo:.2e}, {hi:.2e}]")
    if args.plot:
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots()
        for mode, results in res.items():
            ax.semilogy([r.snr_db for r in results], [max(r.ser, 1e-7) for r in results], "o-", label=mode)
        ax.set_xlabel("SNR (dB)")
        ax.set_ylabel("SER")
        ax.legend()
        fig.savefig(args.plot, dpi=150)


if __name__ == "__main__":
    main()
