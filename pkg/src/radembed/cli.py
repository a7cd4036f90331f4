"""Command-line entry point: ``radembed <subcommand> [flags]``.

Every flag may also come from a JSON file given with ``--config`` (keys are
the flag names with dashes turned into underscores); explicit flags win.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import crf as crf_mod
from .data import (build_vocabulary, load_radical_dict, load_similarity_dataset,
                   read_lines, read_raw_corpus, read_segmented)
from .embed import (TrainConfig, load_embeddings, save_checkpoint, save_embeddings,
                    train_embeddings)
from .errors import ConfigError, DataFormatError, TrainingDiverged
from .similarity import category_accuracy

log = logging.getLogger("radembed")


def _existing(path: str | None, flag: str) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{flag}: no such file {path}")
    return p


def _output(path: str, flag: str) -> Path:
    p = Path(path)
    if p.parent and not p.parent.exists():
        raise ConfigError(f"{flag}: directory {p.parent} does not exist")
    return p


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout
    return open(path, "w", encoding="utf-8", newline="")


# ---------------------------------------------------------------- subcommands


def cmd_train_embed(args) -> int:
    corpus_path = _existing(args.corpus, "--corpus")
    rad_path = _existing(args.radicals, "--radicals")
    cfg = TrainConfig(alpha=args.alpha, lr=args.lr, epochs=args.epochs, window=args.window,
                      dim=args.dim, hidden=args.hidden, seed=args.seed,
                      init_scale=args.init_scale, corruptions=args.corruptions,
                      min_count=args.min_count)
    emb_out = _output(args.emb_out, "--emb-out")
    ckpt = _output(args.checkpoint or f"{args.emb_out}.ckpt.json", "--checkpoint")
    loss_csv = _output(args.loss_csv or f"{args.emb_out}.loss.csv", "--loss-csv")

    radicals = load_radical_dict(rad_path)
    corpus = read_raw_corpus(corpus_path)
    vocab = build_vocabulary(corpus, cfg.min_count)
    log.info("vocabulary %d, radical classes %d, sentences %d", len(vocab), radicals.size,
             len(corpus))
    result = train_embeddings(corpus, vocab, radicals, cfg)

    save_embeddings(vocab, result.model.emb, emb_out)
    save_checkpoint(result.model, ckpt)
    with open(loss_csv, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "mean_loss"])
        for i, loss in enumerate(result.epoch_losses, start=1):
            w.writerow([i, repr(loss)])
    return 0


def cmd_eval_sim(args) -> int:
    emb_paths = [_existing(p, "--emb") for p in args.emb]
    sim_path = _existing(args.simdata, "--simdata")
    labels = args.label or [p.stem for p in emb_paths]
    if len(labels) != len(emb_paths):
        raise ConfigError("give one --label per --emb or none at all")
    ks = args.k or [10]
    dataset = load_similarity_dataset(sim_path)
    loaded = [load_embeddings(p) for p in emb_paths]
    for (vocab, _), path in zip(loaded, emb_paths):
        for k in ks:
            if not 1 <= k < len(vocab):
                raise ConfigError(f"--k {k} must be in [1, |V|={len(vocab)}) for {path}")

    out = _open_out(args.out)
    dump = open(args.dump_neighbors, "w", encoding="utf-8") if args.dump_neighbors else None
    try:
        out.write("K\talpha\taccuracy\n")
        for (vocab, emb), label in zip(loaded, labels):
            for k in ks:
                acc, neigh = category_accuracy(emb, vocab, dataset, k, return_neighbors=True)
                out.write(f"{k}\t{label}\t{acc!r}\n")
                if dump:
                    for nl in neigh:
                        cells = " ".join(f"{c}:{s:.6f}" for c, s in nl.neighbors)
                        dump.write(f"{label}\t{k}\t{nl.query}\t{cells}\n")
    finally:
        if out is not sys.stdout:
            out.close()
        if dump:
            dump.close()
    return 0


def cmd_train_seg(args) -> int:
    train_path = _existing(args.train, "--train")
    dev_path = _existing(args.dev, "--dev")
    emb_path = _existing(args.emb, "--emb")
    rad_path = _existing(args.radicals, "--radicals")
    cfg = crf_mod.CrfConfig(emission=args.emission, window=args.window, hidden=args.hidden,
                            lr=args.lr, epochs=args.epochs, seed=args.seed,
                            init_scale=args.init_scale,
                            finetune_embeddings=args.finetune_embeddings,
                            constrain_tags=args.constrain_tags)
    if cfg.emission == "neural" and emb_path is None:
        raise ConfigError("--emission neural needs --emb")
    if cfg.emission == "char+radical" and rad_path is None:
        raise ConfigError("--emission char+radical needs --radicals")
    ckpt = _output(args.checkpoint, "--checkpoint")
    curve = _output(args.curve_out, "--curve-out") if args.curve_out else None

    train = read_segmented(train_path)
    dev = read_segmented(dev_path) if dev_path else []
    radicals = load_radical_dict(rad_path) if rad_path else None
    emb = vocab = None
    if cfg.emission == "neural":
        vocab, emb = load_embeddings(emb_path)
        chars = [c for words in train for w in words for c in w]
        oov = sum(c not in vocab for c in chars)
        if chars and oov / len(chars) > 0.1:
            log.warning("%.0f%% of training characters are missing from %s and will share "
                        "the UNK vector", 100 * oov / len(chars), emb_path)
    result = crf_mod.train_crf(train, dev, cfg, emb=emb, vocab=vocab, radicals=radicals)
    crf_mod.save_crf(result.model, ckpt)
    if curve:
        with open(curve, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "dev_f1"])
            for i, (loss, f1) in enumerate(zip(result.train_loss, result.dev_f1), start=1):
                w.writerow([i, repr(loss), repr(f1)])
    log.info("kept epoch %d", result.best_epoch)
    return 0


def cmd_eval_seg(args) -> int:
    gold_path = _existing(args.test, "--test")
    pred_path = _existing(args.pred, "--pred")
    ckpt_path = _existing(args.checkpoint, "--checkpoint")
    if (pred_path is None) == (ckpt_path is None):
        raise ConfigError("give exactly one of --checkpoint or --pred")
    gold = read_segmented(gold_path, skip_empty=False)
    if pred_path is not None:
        pred = read_segmented(pred_path, skip_empty=False)
    else:
        model = crf_mod.load_crf(ckpt_path)
        pred = [crf_mod.segment_line(model, "".join(g)) for g in gold]
    report = crf_mod.score_segmentations(gold, pred)
    out = _open_out(args.out)
    try:
        out.write("P\tR\tF1\tgold\tpredicted\tcorrect\n")
        out.write(f"{report.precision!r}\t{report.recall!r}\t{report.f1!r}\t"
                  f"{report.gold}\t{report.predicted}\t{report.correct}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_segment(args) -> int:
    model = crf_mod.load_crf(_existing(args.checkpoint, "--checkpoint"))
    if args.input and args.input != "-":
        lines = read_lines(_existing(args.input, "--input"))
    else:
        lines = [line.rstrip("\r\n") for line in sys.stdin]
    out = _open_out(args.output)
    try:
        for line in lines:
            out.write(" ".join(crf_mod.segment_line(model, line)) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


# ---------------------------------------------------------------- parser


def _alpha(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"alpha must be in [0, 1], got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of flag defaults")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(
        prog="radembed",
        description="Radical-aware character embeddings and CRF word segmentation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-embed", parents=[common],
                       help="train character embeddings with the radical-aware loss")
    p.add_argument("--corpus", required=True, help="raw corpus, one sentence per line")
    p.add_argument("--radicals", required=True, help="character<TAB>radical dictionary")
    p.add_argument("--alpha", type=_alpha, default=0.8,
                   help="weight of the context loss; 1.0 disables the radical part")
    p.add_argument("--dim", type=int, default=30)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--hidden", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--init-scale", type=float, default=0.01)
    p.add_argument("--corruptions", type=int, default=1,
                   help="corrupted windows drawn per true window")
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--emb-out", required=True, help="embedding text file to write")
    p.add_argument("--checkpoint", help="checkpoint to write (default: <emb-out>.ckpt.json)")
    p.add_argument("--loss-csv", help="epoch,mean_loss CSV (default: <emb-out>.loss.csv)")
    p.set_defaults(func=cmd_train_embed)

    p = sub.add_parser("eval-sim", parents=[common],
                       help="top-K semantic-category accuracy of embedding files")
    p.add_argument("--emb", action="append", required=True, help="embedding file (repeatable)")
    p.add_argument("--label", action="append", help="row label per --emb (default: file stem)")
    p.add_argument("--simdata", required=True, help="category<TAB>characters dataset")
    p.add_argument("--k", type=int, action="append", help="neighbour count (repeatable, default 10)")
    p.add_argument("--out", help="TSV output (default: stdout)")
    p.add_argument("--dump-neighbors", help="also write every query's neighbour list here")
    p.set_defaults(func=cmd_eval_sim)

    p = sub.add_parser("train-seg", parents=[common], help="train a CRF word segmenter")
    p.add_argument("--train", required=True, help="segmented training corpus")
    p.add_argument("--dev", help="segmented development corpus for epoch selection")
    p.add_argument("--emb", help="embedding file (neural emission mode)")
    p.add_argument("--radicals", help="radical dictionary (char+radical mode)")
    p.add_argument("--emission", choices=crf_mod.EMISSION_MODES, default="neural")
    p.add_argument("--window", type=int, default=3)
    p.add_argument("--hidden", type=int, default=300)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--init-scale", type=float, default=None,
                   help="uniform init range of the emission net (default: Glorot)")
    p.add_argument("--finetune-embeddings", action="store_true")
    p.add_argument("--constrain-tags", action="store_true",
                   help="forbid ill-formed BIES transitions in training and decoding")
    p.add_argument("--checkpoint", required=True, help="model file to write")
    p.add_argument("--curve-out", help="epoch,train_loss,dev_f1 CSV")
    p.set_defaults(func=cmd_train_seg)

    p = sub.add_parser("eval-seg", parents=[common], help="word-level P/R/F1")
    p.add_argument("--test", required=True, help="gold segmented corpus")
    p.add_argument("--checkpoint", help="segmenter to evaluate")
    p.add_argument("--pred", help="already segmented predictions instead of a model")
    p.add_argument("--out", help="TSV output (default: stdout)")
    p.set_defaults(func=cmd_eval_seg)

    p = sub.add_parser("segment", parents=[common], help="segment raw text")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", help="raw text file (default: stdin)")
    p.add_argument("--output", help="output file (default: stdout)")
    p.set_defaults(func=cmd_segment)
    return parser


def _load_config(parser: argparse.ArgumentParser, path: str) -> dict:
    try:
        defaults = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"--config: {exc}")
    if not isinstance(defaults, dict):
        parser.error("--config must hold a JSON object")
    return defaults


def parse_args(argv=None) -> argparse.Namespace:
    """Parse flags, filling anything not given on the command line from the
    ``--config`` JSON file. A flag that may repeat replaces the file's list
    rather than extending it."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return parser.parse_args(argv)

    defaults = _load_config(parser, known.config)
    choices = parser._subparsers._group_actions[0].choices
    command = next((a for a in argv if a in choices), None)
    if command is None:
        return parser.parse_args(argv)  # argparse reports the missing subcommand
    sub = choices[command]
    actions = {a.dest: a for a in sub._actions}
    unknown = set(defaults) - set(actions) - {"config"}
    if unknown:
        parser.error(f"--config: unknown keys {sorted(unknown)}")
    if "alpha" in defaults:
        try:
            defaults["alpha"] = _alpha(str(defaults["alpha"]))
        except (ValueError, argparse.ArgumentTypeError) as exc:
            parser.error(f"--config: {exc}")
    repeated = {}
    for dest, value in defaults.items():
        action = actions.get(dest)
        if action is None:
            continue
        action.required = False
        if isinstance(action, argparse._AppendAction):
            repeated[dest] = value if isinstance(value, list) else [value]
    sub.set_defaults(**{k: v for k, v in defaults.items() if k not in repeated})
    args = parser.parse_args(argv)
    for dest, value in repeated.items():
        if getattr(args, dest) is None:
            setattr(args, dest, value)
    return args


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"radembed {args.command}: {exc}", file=sys.stderr)
        return 2
    except (DataFormatError, TrainingDiverged, OSError) as exc:
        print(f"radembed {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
