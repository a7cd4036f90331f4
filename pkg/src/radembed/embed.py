"""Context scorer + radical prediction head, and the SGD loop that trains them.

The context part scores a window of ``n`` characters with
``w2 . hardtanh(W1 [x_1; ...; x_n] + b1) + b2`` and is trained with a margin
ranking loss against the same window whose middle character was swapped for
a random one. The radical part maps each character's embedding through a
linear layer + softmax over radical classes (cross-entropy against the
dictionary radical). Both parts read the same embedding table.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .data import (PAD, UNK, NgramSample, RadicalDict, Vocabulary,
                   sample_ngrams)
from .errors import ConfigError, DataFormatError, TrainingDiverged
from .numeric import hardtanh, hardtanh_grad, make_rng

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "radembed-embedding-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class EmbeddingMatrix:
    W: np.ndarray  # d x |V|, one column per character

    @property
    def dim(self) -> int:
        return self.W.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.W.shape[1]

    def column(self, c: int) -> np.ndarray:
        return self.W[:, c]

    def window(self, idx: Sequence[int]) -> np.ndarray:
        """Concatenated embedding columns ``[x_1; ...; x_n]``."""
        return self.W[:, idx].T.reshape(-1)


@dataclass
class CwParams:
    W1: np.ndarray  # h x (n*d)
    b1: np.ndarray  # h
    W2: np.ndarray  # 1 x h
    b2: np.ndarray  # shape (1,) so it can be updated in place

    def arrays(self) -> dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}


@dataclass
class RadicalHead:
    Wr: np.ndarray  # N x d
    br: np.ndarray  # N

    @property
    def n_radicals(self) -> int:
        return self.Wr.shape[0]


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.8
    lr: float = 0.1
    epochs: int = 5
    window: int = 5
    dim: int = 30
    hidden: int = 30
    seed: int = 0
    init_scale: float = 0.01
    corruptions: int = 1
    min_count: int = 1

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        if not self.lr > 0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.window < 1 or self.window % 2 == 0:
            raise ConfigError(f"window must be a positive odd number, got {self.window}")
        if self.dim < 1 or self.hidden < 1 or self.corruptions < 1 or self.min_count < 1:
            raise ConfigError("dim, hidden, corruptions and min_count must be positive")
        if not self.init_scale >= 0:
            raise ConfigError("init_scale must be non-negative")


@dataclass
class EmbedModel:
    vocab: Vocabulary
    radicals: RadicalDict
    config: TrainConfig
    emb: EmbeddingMatrix
    cw: CwParams
    head: RadicalHead
    radical_of: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.radical_of = self.radicals.for_vocab(self.vocab)


def init_model(vocab: Vocabulary, radicals: RadicalDict, cfg: TrainConfig,
               rng: np.random.Generator) -> EmbedModel:
    s = cfg.init_scale
    V, d, h, n, N = len(vocab), cfg.dim, cfg.hidden, cfg.window, radicals.size

    def u(*shape):
        return rng.uniform(-s, s, size=shape)

    emb = EmbeddingMatrix(u(d, V))
    cw = CwParams(u(h, n * d), u(h), u(1, h), u(1))
    head = RadicalHead(u(N, d), u(N))
    return EmbedModel(vocab, radicals, cfg, emb, cw, head)


# ---------------------------------------------------------------- forward pieces


def _check_window(emb: EmbeddingMatrix, p: CwParams, window) -> list[int]:
    idx = [int(c) for c in window]
    if len(idx) * emb.dim != p.W1.shape[1]:
        raise ConfigError(f"window of {len(idx)} does not fit W1 with {p.W1.shape[1]} inputs")
    if min(idx) < 0 or max(idx) >= emb.vocab_size:
        raise ConfigError(f"character index out of range [0, {emb.vocab_size})")
    return idx


def _score_forward(emb: EmbeddingMatrix, p: CwParams, idx):
    x = emb.window(idx)
    z = p.W1 @ x + p.b1
    a = hardtanh(z)
    return float(p.W2[0] @ a + p.b2[0]), x, z, a


def score_ngram(emb: EmbeddingMatrix, p: CwParams, window: Sequence[int]) -> float:
    return _score_forward(emb, p, _check_window(emb, p, window))[0]


def ranking_loss(emb: EmbeddingMatrix, p: CwParams, s: Sequence[int],
                 s_w: Sequence[int]) -> float:
    return max(0.0, 1.0 - score_ngram(emb, p, s) + score_ngram(emb, p, s_w))


def _radical_nll(emb: EmbeddingMatrix, head: RadicalHead, c: int, gold: int):
    """(-log p_gold, predicted distribution) for one character."""
    z = head.Wr @ emb.W[:, c] + head.br
    m = z.max()
    e = np.exp(z - m)
    total = e.sum()
    return float(np.log(total) + m - z[gold]), e / total


def radical_loss(emb: EmbeddingMatrix, head: RadicalHead, c: int,
                 radical_of: np.ndarray) -> float:
    """Cross-entropy of the predicted radical distribution of character ``c``
    against its one-hot dictionary radical, i.e. ``-log p_gold``."""
    c = int(c)
    if not 0 <= c < emb.vocab_size:
        raise ConfigError(f"character index {c} out of range [0, {emb.vocab_size})")
    return _radical_nll(emb, head, c, int(radical_of[c]))[0]


# ---------------------------------------------------------------- hybrid loss


@dataclass
class HybridGrads:
    """Gradients of the hybrid loss. ``None`` means identically zero.
    Embedding gradients are sparse: ``emb_cols`` (unique) and ``emb`` (d x k)."""

    W1: np.ndarray | None
    b1: np.ndarray | None
    W2: np.ndarray | None
    b2: np.ndarray | None
    Wr: np.ndarray | None
    br: np.ndarray | None
    emb_cols: np.ndarray
    emb: np.ndarray

    def dense_emb(self, vocab_size: int) -> np.ndarray:
        out = np.zeros((self.emb.shape[0], vocab_size))
        out[:, self.emb_cols] = self.emb
        return out


def hybrid_loss(emb: EmbeddingMatrix, p: CwParams, head: RadicalHead,
                sample: NgramSample, radical_of: np.ndarray,
                alpha: float) -> tuple[float, HybridGrads]:
    """``alpha * ranking + (1 - alpha) * (sum of radical losses over the true
    window + sum over the corrupted window)``, with gradients.

    Context characters appear in both windows and so are counted twice. The
    hinge subgradient at a margin of exactly zero is taken as zero.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must be in [0, 1], got {alpha}")
    s = _check_window(emb, p, sample.window)
    sw = _check_window(emb, p, sample.corrupted)
    n, d = len(s), emb.dim

    score_s, x_s, z_s, a_s = _score_forward(emb, p, s)
    score_w, x_w, z_w, a_w = _score_forward(emb, p, sw)
    ctx = max(0.0, 1.0 - score_s + score_w)

    chars = s + sw
    uniq = list(dict.fromkeys(chars))
    col = {c: j for j, c in enumerate(uniq)}
    per_char = {}
    G = np.empty((head.n_radicals, len(uniq)))
    for j, c in enumerate(uniq):
        gold = int(radical_of[c])
        per_char[c], G[:, j] = _radical_nll(emb, head, c, gold)
        G[gold, j] -= 1.0
    rad = sum(per_char[c] for c in chars)

    loss = alpha * ctx + (1.0 - alpha) * rad

    # radical head: each unique char's softmax gradient times its multiplicity
    counts = np.zeros(len(uniq))
    for c in chars:
        counts[col[c]] += 1.0
    G *= (1.0 - alpha) * counts
    X = emb.W[:, uniq]
    gWr = G @ X.T
    gbr = G.sum(axis=1)
    gemb = head.Wr.T @ G

    gW1 = gb1 = gW2 = gb2 = None
    if ctx > 0.0 and alpha > 0.0:
        # d loss / d score_s = -alpha, d loss / d score_w = +alpha
        dz_s = -alpha * p.W2[0] * hardtanh_grad(z_s)
        dz_w = alpha * p.W2[0] * hardtanh_grad(z_w)
        gW2 = alpha * (a_w - a_s)[None, :]
        gb2 = np.zeros(1)  # the two bias contributions cancel
        gW1 = np.outer(dz_s, x_s) + np.outer(dz_w, x_w)
        gb1 = dz_s + dz_w
        dx_s = (p.W1.T @ dz_s).reshape(n, d)
        dx_w = (p.W1.T @ dz_w).reshape(n, d)
        dx = np.concatenate([dx_s, dx_w])
        for k, c in enumerate(chars):
            gemb[:, col[c]] += dx[k]

    return loss, HybridGrads(gW1, gb1, gW2, gb2, gWr, gbr, np.array(uniq), gemb)


def apply_grads(model: EmbedModel, g: HybridGrads, lr: float) -> None:
    cw = model.cw
    for param, grad in ((cw.W1, g.W1), (cw.b1, g.b1), (cw.W2, g.W2), (cw.b2, g.b2),
                        (model.head.Wr, g.Wr), (model.head.br, g.br)):
        if grad is not None:
            param -= lr * grad
    model.emb.W[:, g.emb_cols] -= lr * g.emb


# ---------------------------------------------------------------- training


@dataclass
class TrainResult:
    model: EmbedModel
    epoch_losses: list[float]


def encode_corpus(corpus: Sequence[str], vocab: Vocabulary) -> list[np.ndarray]:
    out = []
    for line in corpus:
        chars = "".join(c for c in line if not c.isspace())
        if chars:
            out.append(vocab.encode(chars))
    return out


def _run_epoch(model: EmbedModel, sentences, cfg: TrainConfig, rng, epoch: int) -> float:
    total, count = 0.0, 0
    for si in rng.permutation(len(sentences)):
        for sample in sample_ngrams(sentences[si], cfg.window, rng, len(model.vocab),
                                    cfg.corruptions):
            loss, g = hybrid_loss(model.emb, model.cw, model.head, sample,
                                  model.radical_of, cfg.alpha)
            if not math.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss {loss} at epoch {epoch + 1}, sentence {si}, "
                    f"window {sample.window}; try a smaller learning rate")
            total += loss
            count += 1
            apply_grads(model, g, cfg.lr)
    return total / count


def train_embeddings(
    corpus: Sequence[str],
    vocab: Vocabulary,
    radicals: RadicalDict,
    cfg: TrainConfig,
    on_epoch: Callable[[int, float], None] | None = None,
) -> TrainResult:
    """Per-sample SGD on the hybrid loss.

    Sentence order is reshuffled every epoch from the seeded generator;
    windows within a sentence are visited left to right.
    """
    sentences = encode_corpus(corpus, vocab)
    if not sentences:
        raise DataFormatError("training corpus has no characters")
    rng = make_rng(cfg.seed)
    model = init_model(vocab, radicals, cfg, rng)
    losses: list[float] = []
    for epoch in range(cfg.epochs):
        # overflow surfaces as a non-finite loss below, whatever np.seterr says
        with np.errstate(over="ignore", invalid="ignore"):
            mean_loss = _run_epoch(model, sentences, cfg, rng, epoch)
        losses.append(mean_loss)
        log.info("epoch %d mean loss %.6f", epoch + 1, mean_loss)
        if on_epoch is not None:
            on_epoch(epoch + 1, mean_loss)
    return TrainResult(model, losses)


# ---------------------------------------------------------------- persistence


def format_embeddings(vocab: Vocabulary, emb: EmbeddingMatrix) -> str:
    lines = [f"{len(vocab)} {emb.dim}\n"]
    for i, tok in enumerate(vocab.index_to_char):
        lines.append(tok + " " + " ".join(repr(float(v)) for v in emb.W[:, i]) + "\n")
    return "".join(lines)


def save_embeddings(vocab: Vocabulary, emb: EmbeddingMatrix, path: str | Path) -> None:
    """Text vectors: header ``|V| d``, then ``token v_1 ... v_d`` per line."""
    Path(path).write_text(format_embeddings(vocab, emb), encoding="utf-8")


def load_embeddings(path: str | Path) -> tuple[Vocabulary, EmbeddingMatrix]:
    """Inverse of :func:`save_embeddings`. Files from other tools that lack
    the ``<PAD>``/``<UNK>`` rows get zero vectors for them."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise DataFormatError(f"{path}:1: expected header '<count> <dim>'")
        count, dim = int(header[0]), int(header[1])
        tokens, rows = [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split(" ")
            if len(parts) != dim + 1:
                raise DataFormatError(f"{path}:{lineno}: expected a token and {dim} values")
            tokens.append(parts[0])
            rows.append([float(v) for v in parts[1:]])
    if len(tokens) != count:
        raise DataFormatError(f"{path}: header says {count} vectors, found {len(tokens)}")
    W = np.array(rows, dtype=np.float64).reshape(len(tokens), dim).T.copy()
    if tokens[:2] != [PAD, UNK]:
        keep = [i for i, t in enumerate(tokens) if t not in (PAD, UNK)]
        tokens = [PAD, UNK] + [tokens[i] for i in keep]
        W = np.concatenate([np.zeros((dim, 2)), W[:, keep]], axis=1)
    return Vocabulary(tuple(tokens)), EmbeddingMatrix(W)


def _pack(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "data": [float(v) for v in a.reshape(-1)]}


def _unpack(obj: dict) -> np.ndarray:
    return np.array(obj["data"], dtype=np.float64).reshape(obj["shape"])


def checkpoint_dict(model: EmbedModel) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "vocab_sha256": model.vocab.digest(),
        "vocab": list(model.vocab.index_to_char),
        "radicals": [list(p) for p in model.radicals.pairs()],
        "arrays": {
            "W_e": _pack(model.emb.W),
            "W1": _pack(model.cw.W1), "b1": _pack(model.cw.b1),
            "W2": _pack(model.cw.W2), "b2": _pack(model.cw.b2),
            "W_r": _pack(model.head.Wr), "b_r": _pack(model.head.br),
        },
    }


def save_checkpoint(model: EmbedModel, path: str | Path) -> None:
    """JSON container; floats are written with ``repr`` so they reload bit-exact."""
    Path(path).write_text(json.dumps(checkpoint_dict(model), ensure_ascii=False) + "\n",
                          encoding="utf-8")


def load_checkpoint(path: str | Path) -> EmbedModel:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if obj.get("format") != CHECKPOINT_FORMAT:
        raise DataFormatError(f"{path}: not an embedding checkpoint")
    if obj.get("version") != CHECKPOINT_VERSION:
        raise DataFormatError(f"{path}: unsupported checkpoint version {obj.get('version')}")
    vocab = Vocabulary(tuple(obj["vocab"]))
    if vocab.digest() != obj["vocab_sha256"]:
        raise DataFormatError(f"{path}: vocabulary hash mismatch")
    arr = {k: _unpack(v) for k, v in obj["arrays"].items()}
    return EmbedModel(
        vocab, RadicalDict.from_pairs(tuple(p) for p in obj["radicals"]),
        TrainConfig(**obj["config"]), EmbeddingMatrix(arr["W_e"]),
        CwParams(arr["W1"], arr["b1"], arr["W2"], arr["b2"]),
        RadicalHead(arr["W_r"], arr["b_r"]))
