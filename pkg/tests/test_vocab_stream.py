import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radartext.errors import VocabError
from radartext.tokenizer_front import TokenSequence
from radartext.vocab_stream import (build_vocab, byte_tokenize, interleave, masked_count,
                                    read_corruption_pair, read_mixed, read_text_ids, span_corrupt,
                                    splice_back, unwrap_radar, wrap_radar, write_corruption_pair,
                                    write_mixed)

V = build_vocab()


def test_default_layout():
    assert V.total == 33382
    assert V.radar_offset == 32768 and V.som_id == 33280 and V.eom_id == 33281
    assert V.first_span_sentinel == 33282 and V.span_sentinel(99) == 33381
    assert build_vocab(32768, 1, 0).total == 32771


def test_classify_is_total_and_disjoint():
    kinds = [V.classify(i) for i in range(V.total)]
    assert kinds.count("text") == 32768 and kinds.count("radar") == 512
    assert kinds.count("som") == kinds.count("eom") == 1 and kinds.count("span_sentinel") == 100
    # contiguous ranges in layout order
    order = ["text", "radar", "som", "eom", "span_sentinel"]
    firsts = [kinds.index(k) for k in order]
    assert firsts == sorted(firsts)
    with pytest.raises(VocabError):
        V.classify(V.total)
    with pytest.raises(VocabError):
        V.classify(-1)


def test_wrap_examples():
    assert wrap_radar([], V).ids == (V.som_id, V.eom_id)
    seq = wrap_radar([0, 5], V)
    assert seq.ids == (33280, 32768, 32773, 33281)
    assert seq.segments == ("S", "R", "R", "S")
    with pytest.raises(VocabError):
        wrap_radar([512], V)


def test_unwrap_rejects_bad_frames():
    with pytest.raises(VocabError):
        unwrap_radar(wrap_radar([1, 2], V).__class__((32768, V.eom_id), ("R", "S")), V)


def test_interleave():
    s = interleave([], [3, 4], V)
    assert len(s) == 4
    s = interleave([10, 11, 12], [3, 4], V, "text_first")
    assert len(s) == 7 and s.segments == ("T", "T", "T", "S", "R", "R", "S")
    r = interleave([10, 11, 12], [3, 4], V, "radar_first")
    assert r.segments == ("S", "R", "R", "S", "T", "T", "T")
    assert sorted(r.ids) == sorted(s.ids)
    with pytest.raises(VocabError, match="position 1"):
        interleave([1, 40000], [0], V)
    with pytest.raises(VocabError):
        interleave([1], [0], V, "shuffled")


def test_byte_fallback_and_text_ids(tmp_path):
    ids = byte_tokenize("walk ↑", V)
    assert all(0 <= i < 256 for i in ids) and len(ids) == len("walk ↑".encode())
    (tmp_path / "t.ids").write_text("1\n2\n40000\n")
    with pytest.raises(VocabError, match="position 2"):
        read_text_ids(tmp_path / "t.ids", V)


def test_mixed_round_trip(tmp_path):
    s = interleave([7, 8], [1, 2, 3], V)
    write_mixed(s, tmp_path / "m.ids")
    assert read_mixed(tmp_path / "m.ids") == s
    assert (tmp_path / "m.ids.seg").exists()


def _random_tokens(rng, lo=0, hi=200):
    return [int(x) for x in rng.integers(0, 512, rng.integers(lo, hi))]


def test_wrap_unwrap_inverse_1000():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        toks = _random_tokens(rng)
        assert unwrap_radar(wrap_radar(toks, V), V).ids == tuple(toks)


def test_corrupt_splice_inverse_1000():
    rng = np.random.default_rng(1)
    for seed in range(1000):
        toks = _random_tokens(rng, 1, 300)
        corrupted, targets = span_corrupt(toks, V, 0.15, 3.0, seed)
        assert splice_back(corrupted, targets, V).ids == tuple(toks)


def test_zero_mask_by_rounding():
    corrupted, targets = span_corrupt([1, 2, 3], V, 0.1, 3.0, 0)
    assert corrupted == tuple(V.radar_offset + t for t in (1, 2, 3)) and targets == ()


def test_masked_count_bounds_over_seeds():
    toks = list(range(100))
    for seed in range(100):
        c, t = span_corrupt(toks, V, 0.15, 3.0, seed)
        assert 10 <= masked_count(c, t, V) <= 20
        sentinels = [i for i in c if V.is_span_sentinel(i)]
        # one unique sentinel per span, numbered in order, target ends with the closing one
        assert sentinels == [V.span_sentinel(k) for k in range(len(sentinels))]
        assert t[-1] == V.span_sentinel(len(sentinels))


def test_masked_fraction_converges():
    toks = [int(x) for x in np.random.default_rng(2).integers(0, 512, 10_000)]
    big = build_vocab(32768, 512, 2000)  # ~500 spans need more than the default 100 sentinels
    c, t = span_corrupt(toks, big, 0.15, 3.0, 7)
    assert masked_count(c, t, big) / len(toks) == pytest.approx(0.15, rel=0.10)
    spans = sum(1 for i in c if big.is_span_sentinel(i))
    assert 1500 / spans == pytest.approx(3.0, rel=0.25)


def test_sentinel_budget_error():
    small = build_vocab(32768, 512, 5)
    with pytest.raises(VocabError, match="larger span_sentinels budget"):
        span_corrupt(list(range(200)), small, 0.15, 1.0, 0)


def test_corrupt_deterministic_and_validated():
    toks = list(range(50))
    assert span_corrupt(toks, V, seed=3) == span_corrupt(toks, V, seed=3)
    with pytest.raises(VocabError):
        span_corrupt(toks, V, 0.0)
    with pytest.raises(VocabError):
        span_corrupt([], V)


def test_corruption_pair_files(tmp_path):
    c, t = span_corrupt(list(range(60)), V, seed=1)
    write_corruption_pair(c, t, tmp_path / "ex")
    assert read_corruption_pair(tmp_path / "ex") == (c, t)


@given(st.lists(st.integers(0, 511), min_size=1, max_size=400), st.integers(0, 2**63 - 1),
       st.floats(0.01, 0.9), st.floats(1.0, 8.0))
@settings(max_examples=200, deadline=None)
def test_corrupt_inverse_property(toks, seed, ratio, mean_span):
    big = build_vocab(32768, 512, 1000)
    c, t = span_corrupt(toks, big, ratio, mean_span, seed)
    assert splice_back(c, t, big) == TokenSequence(tuple(toks), 512)
    assert masked_count(c, t, big) == (round(len(toks) * ratio) if t else 0)
