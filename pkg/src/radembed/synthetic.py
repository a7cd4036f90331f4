"""Synthetic corpora for desk-scale experiments.

None of this is real Chinese. Characters are drawn from the CJK unified block
purely so that files look like the real inputs; their meanings are arbitrary.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import RadicalDict, SimilarityDataset
from .numeric import make_rng

_CJK_BASE = 0x4E00
_KANGXI_BASE = 0x2F00


def _chars(start: int, count: int) -> list[str]:
    return [chr(_CJK_BASE + start + i) for i in range(count)]


def _zipf(n: int, s: float = 1.0) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** s
    return w / w.sum()


@dataclass
class RadicalCorpus:
    sentences: list[str]
    radicals: RadicalDict
    dataset: SimilarityDataset


def make_radical_corpus(
    n_sentences: int = 2000,
    seed: int = 0,
    n_categories: int = 8,
    per_category: int = 12,
    context_chars: int = 3,
    n_fillers: int = 20,
    filler_radicals: int = 4,
    context_purity: float = 0.85,
    flank: int = 2,
    radical_agreement: float = 0.9,
    phrases: tuple[int, int] = (2, 4),
) -> RadicalCorpus:
    """Sentences in which each semantic category has its own preferred
    context characters, and most members of a category share a radical.

    A phrase is ``flank`` characters, a member, ``flank`` characters: the
    member is drawn Zipf-distributed from one category, and each flanking
    character comes from that category's context set with probability
    ``context_purity`` (otherwise a shared filler). Phrases are joined by
    fillers. ``radical_agreement`` is the fraction of members whose radical
    is their category's radical; the rest get some other category's radical.
    """
    rng = make_rng(seed)
    members = [_chars(k * per_category, per_category) for k in range(n_categories)]
    off = n_categories * per_category
    contexts = [_chars(off + k * context_chars, context_chars) for k in range(n_categories)]
    fillers = _chars(off + n_categories * context_chars, n_fillers)
    rad_names = [chr(_KANGXI_BASE + k) for k in range(n_categories + filler_radicals)]

    pairs = []
    for k, group in enumerate(members):
        for ch in group:
            r = k
            if rng.random() >= radical_agreement:
                r = int(rng.choice([j for j in range(n_categories) if j != k]))
            pairs.append((ch, rad_names[r]))
    for i, ch in enumerate(fillers):
        # a quarter of the fillers have no dictionary entry
        if i % 4 != 3:
            pairs.append((ch, rad_names[n_categories + i % filler_radicals]))
    for k, group in enumerate(contexts):
        for i, ch in enumerate(group):
            pairs.append((ch, rad_names[n_categories + (k + i) % filler_radicals]))

    member_p = _zipf(per_category)
    sentences = []
    for _ in range(n_sentences):
        parts = [str(rng.choice(fillers))]
        for _ in range(int(rng.integers(phrases[0], phrases[1] + 1))):
            k = int(rng.integers(n_categories))
            side = [str(rng.choice(contexts[k] if rng.random() < context_purity else fillers))
                    for _ in range(2 * flank)]
            mid = members[k][int(rng.choice(per_category, p=member_p))]
            parts += side[:flank] + [mid] + side[flank:] + [str(rng.choice(fillers))]
        sentences.append("".join(parts))

    dataset = SimilarityDataset(tuple(
        (f"cat{k:02d}", frozenset(group)) for k, group in enumerate(members)))
    return RadicalCorpus(sentences, RadicalDict.from_pairs(pairs), dataset)


def make_word_inventory(seed: int = 0, n_chars: int = 60,
                        lengths: dict[int, int] | None = None,
                        shared: bool = True) -> list[str]:
    """Distinct words over a character pool. With ``shared`` characters recur
    in several words and positions; without it every character belongs to
    exactly one word, so the segmentation is determined by the characters."""
    lengths = lengths or {1: 20, 2: 40, 3: 20, 4: 8}
    rng = make_rng(seed)
    if not shared:
        pool = iter(_chars(3000, sum(k * n for k, n in lengths.items())))
        return ["".join(next(pool) for _ in range(k))
                for k, n in sorted(lengths.items()) for _ in range(n)]
    pool = _chars(3000, n_chars)
    words: list[str] = []
    seen: set[str] = set()
    for length, count in sorted(lengths.items()):
        made = 0
        while made < count:
            w = "".join(rng.choice(pool, size=length, replace=False))
            if w not in seen:
                seen.add(w)
                words.append(w)
                made += 1
    return words


def make_pool_radicals(chars, n_radicals: int = 6, seed: int = 0,
                       coverage: float = 0.8) -> RadicalDict:
    """Random radicals for an arbitrary character set; a ``1 - coverage``
    share of the characters is left out of the dictionary."""
    rng = make_rng(seed)
    names = [chr(_KANGXI_BASE + 100 + k) for k in range(n_radicals)]
    pairs = [(c, names[int(rng.integers(n_radicals))])
             for c in sorted(set(chars)) if rng.random() < coverage]
    return RadicalDict.from_pairs(pairs)


def make_segmentation_corpus(n_sentences: int = 500, seed: int = 0,
                             words_per_sentence: tuple[int, int] = (4, 10),
                             inventory: list[str] | None = None) -> list[list[str]]:
    """Sentences as word lists drawn Zipf-distributed from a fixed inventory,
    so a given word is always segmented the same way."""
    inventory = inventory or make_word_inventory(seed)
    rng = make_rng(seed + 1)
    order = rng.permutation(len(inventory))
    p = _zipf(len(inventory), 0.8)
    out = []
    for _ in range(n_sentences):
        n = int(rng.integers(words_per_sentence[0], words_per_sentence[1] + 1))
        out.append([inventory[order[int(i)]] for i in rng.choice(len(inventory), size=n, p=p)])
    return out
