"""Desk-scale experiment drivers shared by scripts/ and the acceptance tests."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .crf import CrfConfig, evaluate_segmentation, train_crf
from .data import build_vocabulary
from .embed import TrainConfig, train_embeddings
from .similarity import category_accuracy
from .synthetic import make_pool_radicals, make_radical_corpus, make_segmentation_corpus


@dataclass(frozen=True)
class SimilaritySetup:
    n_sentences: int = 2000
    epochs: int = 3
    lr: float = 0.05
    init_scale: float = 0.5
    k: int = 10


def similarity_accuracy(alpha: float, seed: int, setup: SimilaritySetup = SimilaritySetup()) -> float:
    """Train on the synthetic radical corpus built from ``seed`` and return
    top-K category accuracy."""
    rc = make_radical_corpus(setup.n_sentences, seed=seed)
    vocab = build_vocabulary(rc.sentences)
    cfg = TrainConfig(alpha=alpha, epochs=setup.epochs, lr=setup.lr,
                      init_scale=setup.init_scale, seed=seed)
    model = train_embeddings(rc.sentences, vocab, rc.radicals, cfg).model
    return category_accuracy(model.emb, vocab, rc.dataset, setup.k)


def alpha_sweep(alphas, seeds, setup: SimilaritySetup = SimilaritySetup()) -> dict[float, list[float]]:
    return {a: [similarity_accuracy(a, s, setup) for s in seeds] for a in alphas}


@dataclass(frozen=True)
class SegmentationSetup:
    n_sentences: int = 500
    n_train: int = 400
    n_dev: int = 50
    embed_epochs: int = 3
    embed_lr: float = 0.05
    embed_init_scale: float = 0.5
    crf_epochs: int = 30


@dataclass
class SegmentationRun:
    label: str
    test_f1: float
    dev_f1: list[float]
    best_epoch: int


def segmentation_runs(seed: int = 0, alphas=(1.0, 0.8), baselines=("char", "char+radical"),
                      setup: SegmentationSetup = SegmentationSetup(),
                      crf: CrfConfig = CrfConfig()) -> list[SegmentationRun]:
    """Neural CRF on embeddings trained at each alpha, plus indicator-feature
    CRF baselines, all on one synthetic segmented corpus."""
    corpus = make_segmentation_corpus(setup.n_sentences, seed=seed)
    train = corpus[:setup.n_train]
    dev = corpus[setup.n_train:setup.n_train + setup.n_dev]
    test = corpus[setup.n_train + setup.n_dev:]
    raw = ["".join(s) for s in train]
    vocab = build_vocabulary(raw)
    radicals = make_pool_radicals("".join(raw), seed=seed)
    crf = replace(crf, epochs=setup.crf_epochs, seed=seed)

    runs = []
    for alpha in alphas:
        cfg = TrainConfig(alpha=alpha, epochs=setup.embed_epochs, lr=setup.embed_lr,
                          init_scale=setup.embed_init_scale, seed=seed)
        emb = train_embeddings(raw, vocab, radicals, cfg).model.emb
        res = train_crf(train, dev, replace(crf, emission="neural"), emb=emb, vocab=vocab)
        runs.append(SegmentationRun(f"NeuralCRF(alpha={alpha})",
                                    evaluate_segmentation(res.model, test).f1,
                                    res.dev_f1, res.best_epoch))
    for mode in baselines:
        res = train_crf(train, dev, replace(crf, emission=mode), radicals=radicals)
        runs.append(SegmentationRun(f"CRF({mode})", evaluate_segmentation(res.model, test).f1,
                                    res.dev_f1, res.best_epoch))
    return runs


def mean(xs) -> float:
    return float(np.mean(xs))
