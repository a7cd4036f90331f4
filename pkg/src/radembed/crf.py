"""Linear-chain CRF over BIES tags for word segmentation.

Emission scores come either from a feed-forward network over a window of
character embeddings (lookup -> linear -> hardtanh -> linear) or, for the
classic baselines, from sparse (character, tag) and (radical, tag) weight
tables. Tag order is B, I, E, S.
"""
from __future__ import annotations

import copy
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .data import (PAD_ID, TAGS, RadicalDict, Vocabulary, build_vocabulary,
                   tags_to_words, words_to_bies)
from .embed import EmbeddingMatrix, _pack, _unpack
from .errors import ConfigError, DataFormatError, TrainingDiverged
from .numeric import hardtanh, hardtanh_grad, log_sum_exp, make_rng

log = logging.getLogger(__name__)

N_TAGS = len(TAGS)
EMISSION_MODES = ("neural", "char", "char+radical")
CHECKPOINT_FORMAT = "radembed-crf-checkpoint"
CHECKPOINT_VERSION = 1

B, I, E, S = range(4)
_ALLOWED = {(B, I), (B, E), (I, I), (I, E), (E, B), (E, S), (S, B), (S, S)}
TRANSITION_MASK = np.array(
    [[0.0 if (a, b) in _ALLOWED else -np.inf for b in range(4)] for a in range(4)])
START_MASK = np.array([0.0, -np.inf, -np.inf, 0.0])
STOP_MASK = np.array([-np.inf, -np.inf, 0.0, 0.0])


@dataclass(frozen=True)
class CrfConfig:
    emission: str = "neural"
    window: int = 3
    hidden: int = 300
    lr: float = 0.1
    epochs: int = 10
    seed: int = 0
    init_scale: float | None = None  # None: Glorot-uniform for the emission net
    finetune_embeddings: bool = False
    constrain_tags: bool = False

    def __post_init__(self):
        if self.emission not in EMISSION_MODES:
            raise ConfigError(f"emission must be one of {EMISSION_MODES}, got {self.emission!r}")
        if self.window < 1 or self.window % 2 == 0:
            raise ConfigError(f"window must be a positive odd number, got {self.window}")
        if self.hidden < 1 or self.epochs < 0:
            raise ConfigError("hidden must be positive and epochs non-negative")
        if not self.lr > 0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")


@dataclass
class NeuralEmission:
    emb: EmbeddingMatrix
    W1: np.ndarray  # H x (window*d)
    b1: np.ndarray
    W2: np.ndarray  # 4 x H
    b2: np.ndarray


@dataclass
class IndicatorEmission:
    char_w: np.ndarray  # |V| x 4
    radical_w: np.ndarray | None  # N x 4, None in character-only mode
    radical_of: np.ndarray | None  # vocabulary index -> radical class


@dataclass
class CrfModel:
    vocab: Vocabulary
    config: CrfConfig
    transition: np.ndarray  # 4x4, [previous, current]
    start: np.ndarray
    stop: np.ndarray
    emission: NeuralEmission | IndicatorEmission
    radicals: RadicalDict | None = None

    def param_arrays(self) -> dict[str, np.ndarray]:
        out = {"transition": self.transition, "start": self.start, "stop": self.stop}
        em = self.emission
        if isinstance(em, NeuralEmission):
            out.update(W_e=em.emb.W, W1=em.W1, b1=em.b1, W2=em.W2, b2=em.b2)
        else:
            out["char_w"] = em.char_w
            if em.radical_w is not None:
                out["radical_w"] = em.radical_w
        return out


@dataclass
class TagLattice:
    emissions: np.ndarray  # L x 4
    transitions: np.ndarray  # 4 x 4
    start: np.ndarray = field(default_factory=lambda: np.zeros(N_TAGS))
    stop: np.ndarray = field(default_factory=lambda: np.zeros(N_TAGS))

    @property
    def length(self) -> int:
        return self.emissions.shape[0]


@dataclass(frozen=True)
class SegEvalReport:
    precision: float
    recall: float
    f1: float
    gold: int
    predicted: int
    correct: int

    @classmethod
    def from_counts(cls, gold: int, predicted: int, correct: int) -> "SegEvalReport":
        p = correct / predicted if predicted else 0.0
        r = correct / gold if gold else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(p, r, f, gold, predicted, correct)


# ---------------------------------------------------------------- emissions


def _windows(sentence: np.ndarray, window: int) -> np.ndarray:
    """L x window matrix of character indices, PAD beyond the edges."""
    half = window // 2
    padded = np.concatenate([np.full(half, PAD_ID), sentence, np.full(half, PAD_ID)])
    idx = np.arange(len(sentence))[:, None] + np.arange(window)[None, :]
    return padded[idx].astype(np.int64)


def _neural_forward(em: NeuralEmission, sentence: np.ndarray, window: int):
    win = _windows(np.asarray(sentence, dtype=np.int64), window)
    X = em.emb.W[:, win].transpose(1, 2, 0).reshape(len(win), -1)  # L x (window*d)
    Z = X @ em.W1.T + em.b1
    A = hardtanh(Z)
    return A @ em.W2.T + em.b2, (win, X, Z, A)


def emission_scores(model: CrfModel, sentence: Sequence[int], i: int) -> np.ndarray:
    """Raw per-tag scores at position ``i``."""
    if not 0 <= i < len(sentence):
        raise ConfigError(f"position {i} outside sentence of length {len(sentence)}")
    return sentence_emissions(model, sentence)[i]


def indicator_emission_scores(em: IndicatorEmission, sentence: Sequence[int], i: int) -> np.ndarray:
    c = int(sentence[i])
    out = em.char_w[c].copy()
    if em.radical_w is not None:
        out += em.radical_w[em.radical_of[c]]
    return out


def sentence_emissions(model: CrfModel, sentence: Sequence[int]) -> np.ndarray:
    sent = np.asarray(sentence, dtype=np.int64)
    em = model.emission
    if isinstance(em, NeuralEmission):
        return _neural_forward(em, sent, model.config.window)[0]
    out = em.char_w[sent].copy()
    if em.radical_w is not None:
        out += em.radical_w[em.radical_of[sent]]
    return out


def build_lattice(model: CrfModel, sentence: Sequence[int],
                  emissions: np.ndarray | None = None) -> TagLattice:
    if emissions is None:
        emissions = sentence_emissions(model, sentence)
    T, st, sp = model.transition, model.start, model.stop
    if model.config.constrain_tags:
        T, st, sp = T + TRANSITION_MASK, st + START_MASK, sp + STOP_MASK
    return TagLattice(emissions, T, st, sp)


# ---------------------------------------------------------------- lattice algorithms


def sequence_score(lattice: TagLattice, tags: Sequence[int]) -> float:
    tags = np.asarray(tags, dtype=np.int64)
    if tags.shape != (lattice.length,):
        raise ConfigError(f"{len(tags)} tags for a lattice of length {lattice.length}")
    score = lattice.start[tags[0]] + lattice.stop[tags[-1]]
    score += lattice.emissions[np.arange(lattice.length), tags].sum()
    score += lattice.transitions[tags[:-1], tags[1:]].sum()
    return float(score)


def _forward(lattice: TagLattice) -> np.ndarray:
    L = lattice.length
    alpha = np.empty((L, N_TAGS))
    alpha[0] = lattice.start + lattice.emissions[0]
    for i in range(1, L):
        alpha[i] = log_sum_exp(alpha[i - 1][:, None] + lattice.transitions, axis=0) \
            + lattice.emissions[i]
    return alpha


def _backward(lattice: TagLattice) -> np.ndarray:
    L = lattice.length
    beta = np.empty((L, N_TAGS))
    beta[-1] = lattice.stop
    for i in range(L - 2, -1, -1):
        beta[i] = log_sum_exp(
            lattice.transitions + (lattice.emissions[i + 1] + beta[i + 1])[None, :], axis=1)
    return beta


def log_partition(lattice: TagLattice) -> float:
    if lattice.length < 1:
        raise ConfigError("empty lattice")
    return float(log_sum_exp(_forward(lattice)[-1] + lattice.stop))


@dataclass
class LatticeGrads:
    emissions: np.ndarray
    transitions: np.ndarray
    start: np.ndarray
    stop: np.ndarray


def marginals(lattice: TagLattice):
    """Posterior tag marginals (L x 4), pairwise marginals ((L-1) x 4 x 4)
    and the log partition."""
    alpha, beta = _forward(lattice), _backward(lattice)
    logz = float(log_sum_exp(alpha[-1] + lattice.stop))
    unary = np.exp(alpha + beta - logz)
    pair = np.exp(alpha[:-1, :, None] + lattice.transitions[None]
                  + (lattice.emissions[1:] + beta[1:])[:, None, :] - logz)
    return unary, pair, logz


def sequence_log_likelihood(lattice: TagLattice, gold: Sequence[int]) -> tuple[float, LatticeGrads]:
    """``log P(gold | x)`` and its gradient with respect to every lattice
    score (observed minus expected feature counts)."""
    gold = np.asarray(gold, dtype=np.int64)
    unary, pair, logz = marginals(lattice)
    ll = sequence_score(lattice, gold) - logz
    L = lattice.length
    g_em = -unary
    g_em[np.arange(L), gold] += 1.0
    g_tr = -pair.sum(axis=0)
    np.add.at(g_tr, (gold[:-1], gold[1:]), 1.0)
    g_st = -unary[0]
    g_st[gold[0]] += 1.0
    g_sp = -unary[-1]
    g_sp[gold[-1]] += 1.0
    return ll, LatticeGrads(g_em, g_tr, g_st, g_sp)


def viterbi_decode(lattice: TagLattice) -> np.ndarray:
    """Best tag sequence; on ties the lower tag index wins."""
    L = lattice.length
    if L < 1:
        raise ConfigError("empty lattice")
    delta = lattice.start + lattice.emissions[0]
    back = np.zeros((L, N_TAGS), dtype=np.int64)
    for i in range(1, L):
        cand = delta[:, None] + lattice.transitions
        back[i] = np.argmax(cand, axis=0)
        delta = cand[back[i], np.arange(N_TAGS)] + lattice.emissions[i]
    tags = np.empty(L, dtype=np.int64)
    tags[-1] = int(np.argmax(delta + lattice.stop))
    for i in range(L - 1, 0, -1):
        tags[i - 1] = back[i, tags[i]]
    return tags


# ---------------------------------------------------------------- model gradients


def sentence_loss_and_grads(model: CrfModel, sentence: Sequence[int],
                            gold: Sequence[int]) -> tuple[float, dict[str, object]]:
    """Negative log-likelihood of ``gold`` and gradients for every parameter.

    Embedding gradients are returned as ``(columns, d x k matrix)`` when
    fine-tuning is on and omitted otherwise.
    """
    sent = np.asarray(sentence, dtype=np.int64)
    em = model.emission
    if isinstance(em, NeuralEmission):
        emissions, (win, X, Z, A) = _neural_forward(em, sent, model.config.window)
    else:
        emissions = sentence_emissions(model, sent)
    lattice = build_lattice(model, sent, emissions)
    ll, lg = sequence_log_likelihood(lattice, gold)
    grads: dict[str, object] = {
        "transition": -lg.transitions, "start": -lg.start, "stop": -lg.stop}
    dE = -lg.emissions
    if isinstance(em, NeuralEmission):
        grads["W2"] = dE.T @ A
        grads["b2"] = dE.sum(axis=0)
        dZ = (dE @ em.W2) * hardtanh_grad(Z)
        grads["W1"] = dZ.T @ X
        grads["b1"] = dZ.sum(axis=0)
        if model.config.finetune_embeddings:
            d = em.emb.dim
            dX = (dZ @ em.W1).reshape(-1, d)  # one row per window slot
            cols, inv = np.unique(win.reshape(-1), return_inverse=True)
            g = np.zeros((cols.size, d))
            np.add.at(g, inv, dX)
            grads["W_e"] = (cols, g.T)
    else:
        g = np.zeros_like(em.char_w)
        np.add.at(g, sent, dE)
        grads["char_w"] = g
        if em.radical_w is not None:
            gr = np.zeros_like(em.radical_w)
            np.add.at(gr, em.radical_of[sent], dE)
            grads["radical_w"] = gr
    return -ll, grads


def apply_crf_grads(model: CrfModel, grads: dict[str, object], lr: float) -> None:
    params = model.param_arrays()
    for name, g in grads.items():
        if name == "W_e":
            cols, gm = g
            params["W_e"][:, cols] -= lr * gm
        else:
            params[name] -= lr * g


# ---------------------------------------------------------------- construction & training


def init_crf(cfg: CrfConfig, vocab: Vocabulary, rng: np.random.Generator,
             emb: EmbeddingMatrix | None = None,
             radicals: RadicalDict | None = None) -> CrfModel:
    if cfg.emission == "neural":
        if emb is None:
            raise ConfigError("neural emission mode needs an embedding matrix")
        if emb.vocab_size != len(vocab):
            raise ConfigError("embedding matrix and vocabulary sizes differ")
        fan_in, H = cfg.window * emb.dim, cfg.hidden

        def u(fi, fo, *shape):
            s = cfg.init_scale if cfg.init_scale is not None else math.sqrt(6.0 / (fi + fo))
            return rng.uniform(-s, s, size=shape)

        em: NeuralEmission | IndicatorEmission = NeuralEmission(
            EmbeddingMatrix(emb.W.copy()),
            u(fan_in, H, H, fan_in), np.zeros(H),
            u(H, N_TAGS, N_TAGS, H), np.zeros(N_TAGS))
    else:
        radical_w = radical_of = None
        if cfg.emission == "char+radical":
            if radicals is None:
                raise ConfigError("char+radical emission mode needs a radical dictionary")
            radical_w = np.zeros((radicals.size, N_TAGS))
            radical_of = radicals.for_vocab(vocab)
        em = IndicatorEmission(np.zeros((len(vocab), N_TAGS)), radical_w, radical_of)
    return CrfModel(vocab, cfg, np.zeros((N_TAGS, N_TAGS)), np.zeros(N_TAGS),
                    np.zeros(N_TAGS), em, radicals)


def encode_segmented(corpus: Sequence[Sequence[str]], vocab: Vocabulary):
    out = []
    for words in corpus:
        if not words:
            continue
        tagged = words_to_bies(words)
        out.append((vocab.encode(tagged.chars), tagged.tag_ids()))
    return out


def segment_line(model: CrfModel, text: str) -> list[str]:
    chars = "".join(c for c in text if not c.isspace())
    if not chars:
        return []
    sent = model.vocab.encode(chars)
    return tags_to_words(chars, viterbi_decode(build_lattice(model, sent)))


def _spans(words: Sequence[str]) -> set[tuple[int, int]]:
    out, pos = set(), 0
    for w in words:
        out.add((pos, pos + len(w)))
        pos += len(w)
    return out


def score_segmentations(gold: Sequence[Sequence[str]],
                        predicted: Sequence[Sequence[str]]) -> SegEvalReport:
    """Word-level P/R/F1; a predicted word is correct iff its character span
    is also a gold word span."""
    if len(gold) != len(predicted):
        raise DataFormatError(f"{len(gold)} gold sentences but {len(predicted)} predicted")
    n_gold = n_pred = n_ok = 0
    for k, (g, p) in enumerate(zip(gold, predicted)):
        if "".join(g) != "".join(p):
            raise DataFormatError(f"sentence {k + 1}: gold and predicted characters differ")
        gs, ps = _spans(g), _spans(p)
        n_gold += len(gs)
        n_pred += len(ps)
        n_ok += len(gs & ps)
    return SegEvalReport.from_counts(n_gold, n_pred, n_ok)


def evaluate_segmentation(model: CrfModel, gold: Sequence[Sequence[str]]) -> SegEvalReport:
    gold = [list(g) for g in gold if g]
    return score_segmentations(gold, [segment_line(model, "".join(g)) for g in gold])


@dataclass
class CrfTrainResult:
    model: CrfModel
    dev_f1: list[float]
    train_loss: list[float]
    best_epoch: int  # 0 means the initialisation was kept


def train_crf(
    train: Sequence[Sequence[str]],
    dev: Sequence[Sequence[str]],
    cfg: CrfConfig,
    emb: EmbeddingMatrix | None = None,
    vocab: Vocabulary | None = None,
    radicals: RadicalDict | None = None,
    on_epoch: Callable[[int, float, float], None] | None = None,
) -> CrfTrainResult:
    """Per-sentence SGD on the negative log-likelihood, keeping the epoch with
    the best development F1 (earliest on ties).

    In neural mode ``vocab`` must be the embedding vocabulary; in indicator
    modes it defaults to the characters of ``train``.
    """
    train = [w for w in train if w]
    if not train:
        raise DataFormatError("training corpus is empty")
    if vocab is None:
        if cfg.emission == "neural":
            raise ConfigError("neural emission mode needs the embedding vocabulary")
        vocab = build_vocabulary(["".join(w) for w in train])
    rng = make_rng(cfg.seed)
    model = init_crf(cfg, vocab, rng, emb, radicals)
    data = encode_segmented(train, vocab)

    best = copy.deepcopy(model)
    best_f1, best_epoch = -1.0, 0
    dev_curve: list[float] = []
    losses: list[float] = []
    for epoch in range(1, cfg.epochs + 1):
        total = 0.0
        for k in rng.permutation(len(data)):
            sent, gold = data[k]
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads = sentence_loss_and_grads(model, sent, gold)
            if not math.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss {loss} at epoch {epoch}, sentence {k}; "
                    "try a smaller learning rate")
            total += loss
            apply_crf_grads(model, grads, cfg.lr)
        losses.append(total / len(data))
        f1 = evaluate_segmentation(model, dev).f1 if dev else float("nan")
        dev_curve.append(f1)
        log.info("epoch %d loss %.5f dev F1 %.4f", epoch, losses[-1], f1)
        if on_epoch is not None:
            on_epoch(epoch, losses[-1], f1)
        if not dev or f1 > best_f1:
            best, best_f1, best_epoch = copy.deepcopy(model), f1, epoch
    return CrfTrainResult(best, dev_curve, losses, best_epoch)


# ---------------------------------------------------------------- persistence


def save_crf(model: CrfModel, path: str | Path) -> None:
    obj = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "vocab_sha256": model.vocab.digest(),
        "vocab": list(model.vocab.index_to_char),
        "radicals": [list(p) for p in model.radicals.pairs()] if model.radicals else None,
        "arrays": {k: _pack(v) for k, v in model.param_arrays().items()},
    }
    Path(path).write_text(json.dumps(obj, ensure_ascii=False) + "\n", encoding="utf-8")


def load_crf(path: str | Path) -> CrfModel:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if obj.get("format") != CHECKPOINT_FORMAT:
        raise DataFormatError(f"{path}: not a CRF checkpoint")
    if obj.get("version") != CHECKPOINT_VERSION:
        raise DataFormatError(f"{path}: unsupported checkpoint version {obj.get('version')}")
    cfg = CrfConfig(**obj["config"])
    vocab = Vocabulary(tuple(obj["vocab"]))
    if vocab.digest() != obj["vocab_sha256"]:
        raise DataFormatError(f"{path}: vocabulary hash mismatch")
    radicals = RadicalDict.from_pairs(tuple(p) for p in obj["radicals"]) if obj["radicals"] else None
    a = {k: _unpack(v) for k, v in obj["arrays"].items()}
    if cfg.emission == "neural":
        em: NeuralEmission | IndicatorEmission = NeuralEmission(
            EmbeddingMatrix(a["W_e"]), a["W1"], a["b1"], a["W2"], a["b2"])
    else:
        em = IndicatorEmission(a["char_w"], a.get("radical_w"),
                               radicals.for_vocab(vocab) if radicals else None)
    return CrfModel(vocab, cfg, a["transition"], a["start"], a["stop"], em, radicals)
