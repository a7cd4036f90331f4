"""Neural CRF on embeddings trained at several alphas against indicator CRF
baselines, on the synthetic segmentation corpus.

Prints a ``model<TAB>seed<TAB>test_F1<TAB>best_epoch`` table and can write
the per-epoch dev F1 curves (``--curves``) and a plot of them (``--plot``).
"""
import argparse
import csv
import sys
from dataclasses import replace

from radembed.crf import CrfConfig
from radembed.experiments import SegmentationSetup, segmentation_runs


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alphas", type=float, nargs="+", default=[1.0, 0.8])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--crf-epochs", type=int, default=SegmentationSetup.crf_epochs)
    ap.add_argument("--hidden", type=int, default=CrfConfig.hidden)
    ap.add_argument("--out", default="-")
    ap.add_argument("--curves", help="TSV of dev F1 per epoch")
    ap.add_argument("--plot", help="PNG of the dev F1 curves (first seed)")
    args = ap.parse_args()

    setup = replace(SegmentationSetup(), crf_epochs=args.crf_epochs)
    results = {}
    for seed in args.seeds:
        results[seed] = segmentation_runs(seed, tuple(args.alphas), setup=setup,
                                          crf=CrfConfig(hidden=args.hidden))
        for r in results[seed]:
            print(f"seed={seed} {r.label} F1={r.test_f1:.4f}", file=sys.stderr)

    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="", encoding="utf-8")
    w = csv.writer(fh, delimiter="\t", lineterminator="\n")
    w.writerow(["model", "seed", "test_F1", "best_epoch"])
    for seed, runs in results.items():
        for r in runs:
            w.writerow([r.label, seed, f"{r.test_f1:.4f}", r.best_epoch])
    if fh is not sys.stdout:
        fh.close()

    if args.curves:
        with open(args.curves, "w", newline="", encoding="utf-8") as f:
            cw = csv.writer(f, delimiter="\t", lineterminator="\n")
            cw.writerow(["model", "seed", "epoch", "dev_F1"])
            for seed, runs in results.items():
                for r in runs:
                    for e, f1 in enumerate(r.dev_f1, start=1):
                        cw.writerow([r.label, seed, e, f"{f1:.4f}"])
    if args.plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        for r in results[args.seeds[0]]:
            plt.plot(range(1, len(r.dev_f1) + 1), r.dev_f1, label=r.label)
        plt.xlabel("epoch")
        plt.ylabel("dev F1")
        plt.legend()
        plt.savefig(args.plot, dpi=120, bbox_inches="tight")


if __name__ == "__main__":
    main()
