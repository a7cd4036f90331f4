"""Cosine nearest neighbours and top-K semantic-category accuracy."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .data import PAD_ID, UNK_ID, SimilarityDataset, Vocabulary
from .embed import EmbeddingMatrix
from .errors import ConfigError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NeighborList:
    query: str
    neighbors: tuple[tuple[str, float], ...]


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ConfigError(f"cosine: shapes {u.shape} and {v.shape} differ")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ConfigError("cosine similarity is undefined for a zero vector")
    return float(u @ v / (nu * nv))


def _unit_columns(W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(W, axis=0)
    valid = norms > 0
    out = np.zeros_like(W)
    out[:, valid] = W[:, valid] / norms[valid]
    return out, valid


def _ranked(sims: np.ndarray, excluded: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` best scores, ties to the lower index."""
    s = np.where(excluded, -np.inf, sims)
    order = np.argsort(-s, kind="stable")
    return order[:k]


def _candidate_mask(valid: np.ndarray) -> np.ndarray:
    excluded = ~valid
    excluded[[PAD_ID, UNK_ID]] = True
    return excluded


def top_k_neighbors(emb: EmbeddingMatrix, vocab: Vocabulary, query: str, k: int) -> NeighborList:
    if query not in vocab:
        raise ConfigError(f"query {query!r} is not in the vocabulary")
    if k < 1 or k >= len(vocab):
        raise ConfigError(f"K must be in [1, |V|) = [1, {len(vocab)}), got {k}")
    q = vocab.index(query)
    unit, valid = _unit_columns(emb.W)
    if not valid[q]:
        raise ConfigError(f"query {query!r} has a zero embedding")
    excluded = _candidate_mask(valid)
    excluded[q] = True
    if k > int((~excluded).sum()):
        raise ConfigError(f"only {int((~excluded).sum())} candidate neighbours for K={k}")
    sims = unit.T @ unit[:, q]
    top = _ranked(sims, excluded, k)
    return NeighborList(query, tuple((vocab.index_to_char[i], float(sims[i])) for i in top))


def category_accuracy(emb: EmbeddingMatrix, vocab: Vocabulary, dataset: SimilarityDataset,
                      k: int = 10, return_neighbors: bool = False):
    """Mean over dataset characters of the fraction of their ``k`` nearest
    neighbours (whole vocabulary) that share their category.

    Neighbours outside the dataset count as misses. Dataset characters
    missing from the vocabulary are skipped with a warning.
    """
    if k < 1 or k >= len(vocab):
        raise ConfigError(f"K must be in [1, |V|) = [1, {len(vocab)}), got {k}")
    unit, valid = _unit_columns(emb.W)
    usable, missing = [], []
    for ch in dataset.characters:
        (usable if ch in vocab and valid[vocab.index(ch)] else missing).append(ch)
    if missing:
        log.warning("%d dataset characters not in the vocabulary, skipped: %s",
                    len(missing), "".join(missing[:50]))
    if not usable:
        raise ConfigError("no dataset character is present in the vocabulary")
    base = _candidate_mask(valid)
    if k > int((~base).sum()) - 1:
        raise ConfigError(f"K={k} exceeds the number of candidate neighbours")

    rows = np.array([vocab.index(c) for c in usable])
    sims = unit[:, rows].T @ unit
    hits = 0
    dump = []
    for r, ch in enumerate(usable):
        excluded = base.copy()
        excluded[rows[r]] = True
        top = _ranked(sims[r], excluded, k)
        cat = dataset.category_of[ch]
        names = [vocab.index_to_char[i] for i in top]
        hits += sum(dataset.category_of.get(t) == cat for t in names)
        if return_neighbors:
            dump.append(NeighborList(ch, tuple((t, float(sims[r, i])) for t, i in zip(names, top))))
    acc = hits / (k * len(usable))
    return (acc, dump) if return_neighbors else acc
