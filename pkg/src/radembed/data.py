"""Corpus, dictionary and tag-scheme handling.

File formats (all UTF-8):

* raw corpus: one sentence per line, no segmentation;
* segmented corpus: one sentence per line, words separated by single spaces;
* radical dictionary: ``character<TAB>radical`` per line, ``#`` comments;
* similarity dataset: ``category<TAB>characters`` per line;
* vocabulary: one token per line in index order, ``<PAD>`` and ``<UNK>`` first.
"""
from __future__ import annotations

import hashlib
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ConfigError, DataFormatError

log = logging.getLogger(__name__)

PAD = "<PAD>"
UNK = "<UNK>"
PAD_ID = 0
UNK_ID = 1
NO_RADICAL = "<NO_RADICAL>"

TAGS = ("B", "I", "E", "S")
TAG_INDEX = {t: i for i, t in enumerate(TAGS)}

# allowed tag bigrams for a well-formed BIES sequence
_FOLLOWS = {
    "B": {"I", "E"},
    "I": {"I", "E"},
    "E": {"B", "S"},
    "S": {"B", "S"},
}


def read_lines(path: str | Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\r\n") for line in fh]


# ---------------------------------------------------------------- vocabulary


@dataclass(frozen=True)
class Vocabulary:
    index_to_char: tuple[str, ...]
    char_to_index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.index_to_char[:2] != (PAD, UNK):
            raise ConfigError("vocabulary must start with <PAD>, <UNK>")
        mapping = {c: i for i, c in enumerate(self.index_to_char)}
        if len(mapping) != len(self.index_to_char):
            raise ConfigError("vocabulary contains duplicate entries")
        object.__setattr__(self, "char_to_index", mapping)

    def __len__(self) -> int:
        return len(self.index_to_char)

    def __contains__(self, ch: str) -> bool:
        return ch in self.char_to_index

    def index(self, ch: str) -> int:
        return self.char_to_index.get(ch, UNK_ID)

    def encode(self, text: str) -> np.ndarray:
        return np.array([self.index(c) for c in text], dtype=np.int64)

    def to_text(self) -> str:
        return "".join(c + "\n" for c in self.index_to_char)

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        return cls(tuple(read_lines(path)))


def build_vocabulary(corpus: Iterable[str], min_count: int = 1) -> Vocabulary:
    """Characters seen at least ``min_count`` times, most frequent first
    (ties by code point). Whitespace is not a character of the corpus."""
    if min_count < 1:
        raise ConfigError("min_count must be >= 1")
    counts: Counter[str] = Counter()
    for line in corpus:
        counts.update(c for c in line if not c.isspace())
    if not counts:
        raise DataFormatError("cannot build a vocabulary from an empty corpus")
    kept = sorted((c for c, n in counts.items() if n >= min_count),
                  key=lambda c: (-counts[c], ord(c)))
    return Vocabulary((PAD, UNK, *kept))


# ---------------------------------------------------------------- radicals


@dataclass(frozen=True)
class RadicalDict:
    """Character -> radical class. The last class is NO_RADICAL."""

    char_to_radical: dict[str, int]
    radical_names: tuple[str, ...]

    def __post_init__(self):
        if not self.radical_names or self.radical_names[-1] != NO_RADICAL:
            raise ConfigError("radical inventory must end with the NO_RADICAL class")
        n = len(self.radical_names)
        bad = [c for c, r in self.char_to_radical.items() if not 0 <= r < n]
        if bad:
            raise ConfigError(f"radical index out of range for {bad[:5]}")

    @property
    def size(self) -> int:
        return len(self.radical_names)

    @property
    def no_radical(self) -> int:
        return len(self.radical_names) - 1

    def radical_of(self, ch: str) -> int:
        return self.char_to_radical.get(ch, self.no_radical)

    def for_vocab(self, vocab: Vocabulary) -> np.ndarray:
        """Radical class of every vocabulary index (PAD/UNK -> NO_RADICAL)."""
        out = np.array([self.radical_of(c) for c in vocab.index_to_char], dtype=np.int64)
        out[[PAD_ID, UNK_ID]] = self.no_radical
        return out

    def pairs(self) -> list[tuple[str, str]]:
        return [(c, self.radical_names[r]) for c, r in self.char_to_radical.items()]

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "RadicalDict":
        names: dict[str, int] = {}
        mapping: dict[str, int] = {}
        for ch, rad in pairs:
            r = names.setdefault(rad, len(names))
            if mapping.get(ch, r) != r:
                raise DataFormatError(f"conflicting radicals for {ch!r}")
            mapping[ch] = r
        return cls(mapping, (*names, NO_RADICAL))


def load_radical_dict(path: str | Path) -> RadicalDict:
    pairs = []
    seen: dict[str, str] = {}
    for lineno, line in enumerate(read_lines(path), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or len(parts[0]) != 1 or not parts[1]:
            raise DataFormatError(f"{path}:{lineno}: expected 'character<TAB>radical', got {line!r}")
        ch, rad = parts
        if ch in seen:
            if seen[ch] != rad:
                raise DataFormatError(
                    f"{path}:{lineno}: {ch!r} already mapped to {seen[ch]!r}, not {rad!r}")
            continue
        seen[ch] = rad
        pairs.append((ch, rad))
    if not pairs:
        log.warning("radical dictionary %s is empty; every character maps to NO_RADICAL", path)
    return RadicalDict.from_pairs(pairs)


def save_radical_dict(rd: RadicalDict, path: str | Path) -> None:
    Path(path).write_text("".join(f"{c}\t{r}\n" for c, r in rd.pairs()), encoding="utf-8")


# ---------------------------------------------------------------- ngrams


@dataclass(frozen=True)
class NgramSample:
    window: tuple[int, ...]
    corrupt_middle: int

    @property
    def corrupted(self) -> tuple[int, ...]:
        mid = len(self.window) // 2
        return self.window[:mid] + (self.corrupt_middle,) + self.window[mid + 1:]


def draw_corruption(middle: int, vocab_size: int, rng: np.random.Generator) -> int:
    """Uniform over indices 2..vocab_size-1, excluding ``middle``."""
    usable = vocab_size - 2
    if usable < 3:
        raise ConfigError(f"need at least 3 usable characters, vocabulary has {usable}")
    if middle >= 2:
        c = 2 + int(rng.integers(usable - 1))
        return c + 1 if c >= middle else c
    return 2 + int(rng.integers(usable))


def sample_ngrams(
    sentence: Sequence[int],
    n: int,
    rng: np.random.Generator,
    vocab: Vocabulary | int,
    corruptions: int = 1,
) -> Iterator[NgramSample]:
    """One window per character position, PAD-padded at the edges, each
    paired with ``corruptions`` independently drawn corrupted middles."""
    if n < 1 or n % 2 == 0:
        raise ConfigError(f"window size must be odd, got {n}")
    if len(sentence) == 0:
        raise ConfigError("cannot sample ngrams from an empty sentence")
    size = vocab if isinstance(vocab, int) else len(vocab)
    if size - 2 < 3:
        raise ConfigError(f"need at least 3 usable characters, vocabulary has {size - 2}")
    half = n // 2
    padded = (PAD_ID,) * half + tuple(int(c) for c in sentence) + (PAD_ID,) * half
    for i in range(len(sentence)):
        window = padded[i:i + n]
        for _ in range(corruptions):
            yield NgramSample(window, draw_corruption(window[half], size, rng))


# ---------------------------------------------------------------- BIES


@dataclass(frozen=True)
class TaggedSentence:
    chars: str
    tags: tuple[str, ...]

    def __post_init__(self):
        if len(self.chars) != len(self.tags):
            raise ConfigError(f"{len(self.chars)} characters but {len(self.tags)} tags")
        unknown = set(self.tags) - set(TAGS)
        if unknown:
            raise ConfigError(f"unknown tags {sorted(unknown)}")

    def tag_ids(self) -> np.ndarray:
        return np.array([TAG_INDEX[t] for t in self.tags], dtype=np.int64)


def is_well_formed(tags: Sequence[str] | Sequence[int]) -> bool:
    """Whether a BIES sequence (letters or tag ids) splits cleanly into words."""
    tags = [TAGS[t] if not isinstance(t, str) else t for t in tags]
    if not tags:
        return True
    if tags[0] not in ("B", "S") or tags[-1] not in ("E", "S"):
        return False
    return all(b in _FOLLOWS[a] for a, b in zip(tags, tags[1:]))


def words_to_bies(words: Sequence[str]) -> TaggedSentence:
    tags: list[str] = []
    for w in words:
        if not w:
            raise DataFormatError("empty word in segmentation")
        if len(w) == 1:
            tags.append("S")
        else:
            tags += ["B"] + ["I"] * (len(w) - 2) + ["E"]
    return TaggedSentence("".join(words), tuple(tags))


def bies_to_words(tagged: TaggedSentence) -> list[str]:
    """Split at every B or S and at the end. Total on any tag sequence, so
    ill-formed decoder output is repaired rather than rejected."""
    words: list[str] = []
    start = 0
    for i, t in enumerate(tagged.tags):
        if t in ("B", "S") and i > start:
            words.append(tagged.chars[start:i])
            start = i
    if start < len(tagged.chars):
        words.append(tagged.chars[start:])
    return words


def tags_to_words(chars: str, tag_ids: Sequence[int]) -> list[str]:
    return bies_to_words(TaggedSentence(chars, tuple(TAGS[int(t)] for t in tag_ids)))


# ---------------------------------------------------------------- corpora


def read_raw_corpus(path: str | Path) -> list[str]:
    return [line.strip() for line in read_lines(path)]


def parse_segmented_line(line: str, where: str = "<input>") -> list[str]:
    line = line.strip()
    if not line:
        return []
    words = line.split(" ")
    if any(not w for w in words):
        raise DataFormatError(f"{where}: empty word (repeated space) in {line!r}")
    return words


def read_segmented(path: str | Path, skip_empty: bool = True) -> list[list[str]]:
    out = []
    for lineno, line in enumerate(read_lines(path), start=1):
        words = parse_segmented_line(line, f"{path}:{lineno}")
        if words or not skip_empty:
            out.append(words)
    return out


def write_segmented(sentences: Iterable[Sequence[str]], path: str | Path) -> None:
    Path(path).write_text("".join(" ".join(s) + "\n" for s in sentences), encoding="utf-8")


# ---------------------------------------------------------------- similarity data


@dataclass(frozen=True)
class SimilarityDataset:
    categories: tuple[tuple[str, frozenset[str]], ...]
    category_of: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.categories) < 2:
            raise ConfigError("a similarity dataset needs at least two categories")
        owner: dict[str, int] = {}
        for k, (name, chars) in enumerate(self.categories):
            for c in chars:
                if c in owner:
                    raise DataFormatError(
                        f"{c!r} is in both {self.categories[owner[c]][0]!r} and {name!r}")
                owner[c] = k
        object.__setattr__(self, "category_of", owner)

    @property
    def characters(self) -> list[str]:
        return sorted(self.category_of)


def load_similarity_dataset(path: str | Path) -> SimilarityDataset:
    cats = []
    for lineno, line in enumerate(read_lines(path), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[1].strip():
            raise DataFormatError(f"{path}:{lineno}: expected 'category<TAB>characters'")
        name, chars = parts[0], parts[1].strip()
        if len(set(chars)) != len(chars):
            raise DataFormatError(f"{path}:{lineno}: repeated character in category {name!r}")
        cats.append((name, frozenset(chars)))
    return SimilarityDataset(tuple(cats))


def save_similarity_dataset(ds: SimilarityDataset, path: str | Path) -> None:
    Path(path).write_text(
        "".join(f"{name}\t{''.join(sorted(chars))}\n" for name, chars in ds.categories),
        encoding="utf-8")
