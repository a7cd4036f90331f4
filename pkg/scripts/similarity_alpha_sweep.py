"""Top-K category accuracy against alpha on the synthetic radical corpus.

Writes ``alpha<TAB>seed<TAB>K<TAB>accuracy`` rows; with ``--plot`` also a
PNG of mean accuracy per alpha (needs matplotlib).
"""
import argparse
import csv
import sys
from dataclasses import replace

from radembed.data import build_vocabulary
from radembed.embed import TrainConfig, train_embeddings
from radembed.experiments import SimilaritySetup
from radembed.similarity import category_accuracy
from radembed.synthetic import make_radical_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alphas", type=float, nargs="+", default=[0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--k", type=int, nargs="+", default=[10])
    ap.add_argument("--sentences", type=int, default=SimilaritySetup.n_sentences)
    ap.add_argument("--epochs", type=int, default=SimilaritySetup.epochs)
    ap.add_argument("--out", default="-")
    ap.add_argument("--plot", help="PNG path for a mean-accuracy curve")
    args = ap.parse_args()

    setup = replace(SimilaritySetup(), n_sentences=args.sentences, epochs=args.epochs)
    rows = []
    for seed in args.seeds:
        rc = make_radical_corpus(setup.n_sentences, seed=seed)
        vocab = build_vocabulary(rc.sentences)
        for alpha in args.alphas:
            cfg = TrainConfig(alpha=alpha, epochs=setup.epochs, lr=setup.lr,
                              init_scale=setup.init_scale, seed=seed)
            emb = train_embeddings(rc.sentences, vocab, rc.radicals, cfg).model.emb
            for k in args.k:
                acc = category_accuracy(emb, vocab, rc.dataset, k)
                rows.append((alpha, seed, k, acc))
                print(f"alpha={alpha} seed={seed} K={k} accuracy={acc:.4f}", file=sys.stderr)

    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="", encoding="utf-8")
    w = csv.writer(fh, delimiter="\t", lineterminator="\n")
    w.writerow(["alpha", "seed", "K", "accuracy"])
    w.writerows(rows)
    if fh is not sys.stdout:
        fh.close()

    if args.plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        for k in args.k:
            means = [sum(r[3] for r in rows if r[0] == a and r[2] == k) / len(args.seeds)
                     for a in args.alphas]
            plt.plot(args.alphas, means, marker="o", label=f"K={k}")
        plt.xlabel("alpha (1.0 = context loss only)")
        plt.ylabel("category accuracy")
        plt.legend()
        plt.savefig(args.plot, dpi=120, bbox_inches="tight")


if __name__ == "__main__":
    main()
