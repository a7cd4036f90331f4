"""Write the small synthetic demo inputs used in the README walkthrough.

Everything produced here is synthetic. The characters are real CJK code
points but their radicals, categories and word boundaries are invented, so
none of it is a substitute for real Chinese resources.
"""
import argparse
from pathlib import Path

from radembed.data import save_radical_dict, save_similarity_dataset, write_segmented
from radembed.synthetic import (make_pool_radicals, make_radical_corpus,
                                make_segmentation_corpus, make_word_inventory)

NOTICE = ("Synthetic demonstration data generated by scripts/make_demo_data.py.\n"
          "NOT a real corpus, radical dictionary or similarity dataset.\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data/demo")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--sentences", type=int, default=2000)
    ap.add_argument("--seg-sentences", type=int, default=500)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rc = make_radical_corpus(args.sentences, seed=args.seed)
    (out / "corpus.txt").write_text("\n".join(rc.sentences) + "\n", encoding="utf-8")
    save_radical_dict(rc.radicals, out / "radicals.tsv")
    save_similarity_dataset(rc.dataset, out / "simdata.tsv")

    inv = make_word_inventory(args.seed)
    seg = make_segmentation_corpus(args.seg_sentences, seed=args.seed, inventory=inv)
    n_train, n_dev = int(0.8 * len(seg)), int(0.1 * len(seg))
    write_segmented(seg[:n_train], out / "seg_train.txt")
    # unsegmented training text, for embeddings that cover the segmenter's characters
    (out / "seg_train_raw.txt").write_text(
        "".join("".join(s) + "\n" for s in seg[:n_train]), encoding="utf-8")
    write_segmented(seg[n_train:n_train + n_dev], out / "seg_dev.txt")
    write_segmented(seg[n_train + n_dev:], out / "seg_test.txt")
    (out / "seg_test_raw.txt").write_text(
        "".join("".join(s) + "\n" for s in seg[n_train + n_dev:]), encoding="utf-8")
    save_radical_dict(make_pool_radicals("".join(inv), seed=args.seed), out / "seg_radicals.tsv")
    (out / "README.txt").write_text(NOTICE, encoding="utf-8")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
