import logging
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from radembed.data import (NO_RADICAL, PAD, PAD_ID, UNK, UNK_ID, RadicalDict, TaggedSentence,
                           Vocabulary, bies_to_words, build_vocabulary, is_well_formed,
                           load_radical_dict, load_similarity_dataset, read_segmented,
                           sample_ngrams, words_to_bies)
from radembed.errors import ConfigError, DataFormatError
from radembed.numeric import make_rng

words_st = st.lists(st.text(alphabet="abcdefg我喜欢", min_size=1, max_size=5), min_size=1, max_size=12)


def test_vocabulary_frequency_order():
    v = build_vocabulary(["aa", "ab"], 1)
    assert v.index_to_char == (PAD, UNK, "a", "b")
    assert build_vocabulary(["aa", "ab"], 2).index_to_char == (PAD, UNK, "a")


def test_vocabulary_ties_by_code_point():
    assert build_vocabulary(["cba"]).index_to_char[2:] == ("a", "b", "c")


def test_vocabulary_counts_match_naive_oracle():
    rng = make_rng(3)
    alphabet = list("的一是不了人我在有他这中大来上国个到说们")
    corpus = ["".join(rng.choice(alphabet, size=int(rng.integers(1, 30)))) for _ in range(100)]
    counts = {}
    for line in corpus:
        for ch in line:
            counts[ch] = counts.get(ch, 0) + 1
    for min_count in (1, 100, 160):
        v = build_vocabulary(corpus, min_count)
        expected = sorted((c for c in counts if counts[c] >= min_count),
                          key=lambda c: (-counts[c], ord(c)))
        assert list(v.index_to_char[2:]) == expected


def test_vocabulary_errors_and_io(tmp_path):
    with pytest.raises(DataFormatError):
        build_vocabulary(["", "  "])
    with pytest.raises(ConfigError):
        build_vocabulary(["a"], 0)
    v = build_vocabulary(["我喜欢你", "你好"])
    v.save(tmp_path / "v.txt")
    assert Vocabulary.load(tmp_path / "v.txt") == v
    assert (tmp_path / "v.txt").read_text(encoding="utf-8").splitlines()[:2] == [PAD, UNK]
    assert v.index("龘") == UNK_ID


def test_vocabulary_serialization_deterministic():
    corpus = ["天地玄黄", "宇宙洪荒", "日月盈昃"]
    assert build_vocabulary(corpus).to_text().encode() == build_vocabulary(corpus).to_text().encode()


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_radical_dict_example(tmp_path):
    rd = load_radical_dict(write(tmp_path, "r.tsv", "河\t氵\n跑\t足\n"))
    assert rd.size == 3
    assert rd.radical_names == ("氵", "足", NO_RADICAL)
    assert rd.radical_of("河") == 0 and rd.radical_of("跑") == 1
    assert rd.radical_of("我") == rd.no_radical == 2


def test_radical_dict_empty_warns(tmp_path, caplog):
    with caplog.at_level(logging.WARNING):
        rd = load_radical_dict(write(tmp_path, "r.tsv", "# nothing here\n"))
    assert rd.size == 1
    assert "empty" in caplog.text


def test_radical_dict_duplicates(tmp_path):
    once = load_radical_dict(write(tmp_path, "a.tsv", "河\t氵\n跑\t足\n"))
    twice = load_radical_dict(write(tmp_path, "b.tsv", "河\t氵\n跑\t足\n河\t氵\n"))
    assert once == twice
    with pytest.raises(DataFormatError, match=":3:"):
        load_radical_dict(write(tmp_path, "c.tsv", "河\t氵\n跑\t足\n河\t足\n"))


@pytest.mark.parametrize("bad", ["河氵\n", "河\t\n", "河流\t氵\n", "河\t氵\textra\n"])
def test_radical_dict_malformed(tmp_path, bad):
    with pytest.raises(DataFormatError, match=":2:"):
        load_radical_dict(write(tmp_path, "r.tsv", "跑\t足\n" + bad))


def test_radical_dict_for_vocab():
    rd = RadicalDict.from_pairs([("河", "氵"), ("湖", "氵")])
    v = Vocabulary((PAD, UNK, "河", "我", "湖"))
    assert rd.for_vocab(v).tolist() == [1, 1, 0, 1, 0]


def test_sample_ngrams_padding_and_count():
    v = build_vocabulary(["abcdef"])
    (one,) = list(sample_ngrams([2], 3, make_rng(0), v))
    assert one.window == (PAD_ID, 2, PAD_ID)
    sent = [2, 3, 4, 5, 6, 7, 3]
    samples = list(sample_ngrams(sent, 5, make_rng(0), v))
    assert len(samples) == len(sent)
    for i, s in enumerate(samples):
        assert len(s.window) == 5 and s.window[2] == sent[i]
        assert s.corrupt_middle != s.window[2]
        assert s.corrupt_middle not in (PAD_ID, UNK_ID)
        assert s.corrupted[:2] == s.window[:2] and s.corrupted[3:] == s.window[3:]
    assert len(list(sample_ngrams(sent, 5, make_rng(0), v, corruptions=3))) == 3 * len(sent)


def test_sample_ngrams_errors():
    v = build_vocabulary(["ab"])
    with pytest.raises(ConfigError):
        list(sample_ngrams([2], 3, make_rng(0), v))
    v = build_vocabulary(["abcd"])
    with pytest.raises(ConfigError):
        list(sample_ngrams([2], 4, make_rng(0), v))
    with pytest.raises(ConfigError):
        list(sample_ngrams([], 3, make_rng(0), v))


def test_corruption_is_uniform():
    v = build_vocabulary(["abcdefghijklmnop"])
    rng = make_rng(11)
    middle = 5
    draws = Counter()
    for _ in range(10_000):
        (s,) = sample_ngrams([middle], 1, rng, v)
        draws[s.corrupt_middle] += 1
    support = [i for i in range(2, len(v)) if i != middle]
    assert set(draws) == set(support)
    expected = 10_000 / len(support)
    chi2 = sum((draws[i] - expected) ** 2 / expected for i in support)
    df = len(support) - 1
    # chi-square has mean df and variance 2 df
    assert chi2 < df + 3 * (2 * df) ** 0.5


def test_words_to_bies_examples():
    assert words_to_bies(["我", "喜欢"]).tags == ("S", "B", "E")
    assert words_to_bies(["abc"]).tags == ("B", "I", "E")
    with pytest.raises(DataFormatError):
        words_to_bies(["a", ""])


def test_bies_to_words_examples():
    assert bies_to_words(TaggedSentence("我喜欢", ("S", "B", "E"))) == ["我", "喜欢"]
    assert bies_to_words(TaggedSentence("ab", ("I", "I"))) == ["ab"]
    assert bies_to_words(TaggedSentence("abc", ("B", "B", "S"))) == ["a", "b", "c"]
    assert bies_to_words(TaggedSentence("", ())) == []


@given(words_st)
def test_bies_round_trip(words):
    tagged = words_to_bies(words)
    assert is_well_formed(tagged.tags)
    assert bies_to_words(tagged) == words


def test_bies_round_trip_1000_random():
    rng = make_rng(5)
    for _ in range(1000):
        words = ["".join(rng.choice(list("天地人和"), size=int(rng.integers(1, 5))))
                 for _ in range(int(rng.integers(1, 15)))]
        assert bies_to_words(words_to_bies(words)) == words


@given(st.lists(st.sampled_from("BIES"), max_size=20))
def test_bies_repair_preserves_characters(tags):
    chars = "".join(chr(0x4E00 + i) for i in range(len(tags)))
    words = bies_to_words(TaggedSentence(chars, tuple(tags)))
    assert "".join(words) == chars
    assert all(words)


def test_tagged_sentence_validation():
    with pytest.raises(ConfigError):
        TaggedSentence("ab", ("S",))
    with pytest.raises(ConfigError):
        TaggedSentence("a", ("X",))
    assert not is_well_formed(("I", "E"))
    assert not is_well_formed(("B", "S"))
    assert not is_well_formed(("B",))
    assert is_well_formed(("B", "I", "E", "S"))


def test_read_segmented(tmp_path):
    p = write(tmp_path, "s.txt", "我 喜欢 你\n\n好\n")
    assert read_segmented(p) == [["我", "喜欢", "你"], ["好"]]
    assert read_segmented(p, skip_empty=False) == [["我", "喜欢", "你"], [], ["好"]]
    with pytest.raises(DataFormatError, match=":2:"):
        read_segmented(write(tmp_path, "bad.txt", "a b\nc  d\n"))


def test_similarity_dataset(tmp_path):
    ds = load_similarity_dataset(write(tmp_path, "sim.tsv", "water\t河湖海\nhand\t打拍\n"))
    assert ds.category_of["湖"] == 0 and ds.category_of["拍"] == 1
    assert len(ds.characters) == 5
    with pytest.raises(DataFormatError):
        load_similarity_dataset(write(tmp_path, "dup.tsv", "a\t河湖\nb\t湖拍\n"))
    with pytest.raises(ConfigError):
        load_similarity_dataset(write(tmp_path, "one.tsv", "a\t河湖\n"))
    with pytest.raises(DataFormatError, match=":1:"):
        load_similarity_dataset(write(tmp_path, "bad.tsv", "a 河湖\nb\t拍\n"))
