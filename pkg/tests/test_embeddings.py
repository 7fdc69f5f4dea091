from __future__ import annotations

import numpy as np
import pytest

from dupcnn.embeddings import (
    EmbeddingTable,
    NegativeSampler,
    SkipGramConfig,
    SubwordConfig,
    char_ngrams,
    load_pretrained,
    load_table,
    sgns_loss_and_grads,
    train_skipgram,
    train_subword,
)
from dupcnn.errors import ConfigurationError, FormatError, VersionError
from dupcnn.fixtures import planted_corpus

from oracles import sgns_loss


def small_cfg(**kw):
    base = dict(dim=16, window=2, negatives=3, epochs=5, seed=0)
    base.update(kw)
    return SkipGramConfig(**base)


class TestSgnsGradient:
    def test_analytic_matches_central_differences(self):
        rng = np.random.default_rng(3)
        table = rng.normal(size=(5, 4)) * 0.5  # 5-word vocabulary
        center, context, negs = table[0].copy(), table[1].copy(), table[2:5].copy()
        loss, d_center, d_context, d_negs = sgns_loss_and_grads(center, context, negs)
        assert loss == pytest.approx(sgns_loss(center, context, negs), rel=1e-12)
        h = 1e-5
        for arr, grad in ((center, d_center), (context, d_context), (negs, d_negs)):
            for idx in np.ndindex(arr.shape):
                orig = arr[idx]
                arr[idx] = orig + h
                up = sgns_loss(center, context, negs)
                arr[idx] = orig - h
                down = sgns_loss(center, context, negs)
                arr[idx] = orig
                num = (up - down) / (2 * h)
                rel = abs(num - grad[idx]) / max(abs(num), abs(grad[idx]), 1e-8)
                assert rel < 1e-6


class TestNegativeSampler:
    def test_distribution_within_one_percent(self):
        counts = np.arange(1, 11)
        sampler = NegativeSampler(counts)
        want = counts**0.75 / (counts**0.75).sum()
        np.testing.assert_allclose(sampler.probs, want, rtol=1e-12)
        draws = sampler.draw(1_000_000, seed=5)
        freq = np.bincount(draws, minlength=10) / draws.size
        assert np.max(np.abs(freq - want) / want) < 0.01

    def test_seeded(self):
        sampler = NegativeSampler([3, 1, 4])
        np.testing.assert_array_equal(sampler.draw(100, 1), sampler.draw(100, 1))


class TestSkipGram:
    def test_planted_cooccurrence(self):
        table = train_skipgram(planted_corpus(seed=0), small_cfg(epochs=10))
        assert table.cosine("alpha", "beta") > table.cosine("alpha", "gamma")

    def test_loss_decreases(self):
        first, last = [], []
        for seed in range(3):
            table = train_skipgram(planted_corpus(seed=seed), small_cfg(seed=seed))
            first.append(table.epoch_losses[0])
            last.append(table.epoch_losses[-1])
        assert np.mean(last) < np.mean(first)

    def test_deterministic(self):
        a = train_skipgram(planted_corpus(), small_cfg())
        b = train_skipgram(planted_corpus(), small_cfg())
        np.testing.assert_array_equal(a.vectors, b.vectors)
        assert a.tokens == b.tokens

    def test_config_errors(self):
        with pytest.raises(ConfigurationError):
            small_cfg(window=0).validate()
        with pytest.raises(ConfigurationError):
            train_skipgram([["a", "b"]], small_cfg(min_count=5))
        with pytest.raises(ConfigurationError):
            train_skipgram([], small_cfg())

    def test_rows_finite(self):
        table = train_skipgram(planted_corpus(), small_cfg(epochs=2))
        assert np.all(np.isfinite(table.vectors)) and table.dim == 16


class TestSubword:
    def test_ngram_enumeration(self):
        assert set(char_ngrams("ab", 2, 2)) == {"<a", "ab", "b>"}

    def test_zero_buckets(self):
        with pytest.raises(ConfigurationError):
            train_subword(planted_corpus(), small_cfg(subword=SubwordConfig(3, 6, 0)))

    def test_needs_subword_config(self):
        with pytest.raises(ConfigurationError):
            train_subword(planted_corpus(), small_cfg())

    def test_composition_is_exact_mean(self):
        table = train_subword(planted_corpus(), small_cfg(epochs=2, subword=SubwordConfig(3, 4, 5000)))
        sw = table.subword
        for i, word in enumerate(table.tokens[:10]):
            np.testing.assert_allclose(table.vectors[i], sw.constituent_rows(word, i).mean(axis=0), rtol=1e-15, atol=0)

    def test_oov_composition(self):
        corpus = [["running", "runner", "run", "fast"], ["runs", "running", "slow"]] * 20
        table = train_subword(corpus, small_cfg(epochs=2, subword=SubwordConfig(3, 6, 5000)))
        vec = table.lookup("runninng")
        assert np.all(np.isfinite(vec)) and np.linalg.norm(vec) > 0
        np.testing.assert_array_equal(vec, table.subword.constituent_rows("runninng", None).mean(axis=0))

    def test_shared_ngrams_give_identical_vectors(self):
        # with a single bucket every n-gram collides, so all OOV words share one constituent set
        table = train_subword(planted_corpus(), small_cfg(epochs=1, subword=SubwordConfig(3, 4, 1)))
        np.testing.assert_array_equal(table.lookup("zzzq"), table.lookup("qqqz"))


class TestLookup:
    def test_rules(self):
        table = EmbeddingTable(["a"], np.array([[1.0, 2.0, 3.0]]))
        np.testing.assert_array_equal(table.lookup("<pad>"), np.zeros(3))
        np.testing.assert_array_equal(table.lookup("a"), [1.0, 2.0, 3.0])
        oov = table.lookup("never")
        np.testing.assert_array_equal(oov, table.lookup("never"))
        assert np.all(np.abs(oov) <= 0.25)
        # the fallback depends on the token only, not on the table instance
        np.testing.assert_array_equal(oov, EmbeddingTable(["b"], np.ones((1, 3))).lookup("never"))
        assert not np.array_equal(oov, table.lookup("other"))


class TestPretrained:
    def test_plain_file(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("a 1.0 2.0\nb 3.0 4.0\n", encoding="utf-8")
        table, report = load_pretrained(path)
        assert table.tokens == ["a", "b"] and table.dim == 2
        assert not report.header

    def test_header_consumed(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("2 3\na 1 2 3\nb 4 5 6\n", encoding="utf-8")
        table, report = load_pretrained(path)
        assert len(table) == 2 and report.header

    def test_wrong_arity_skipped(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("a 1 2 3\nb 1 2\nc 4 5 6\n", encoding="utf-8")
        table, report = load_pretrained(path)
        assert table.tokens == ["a", "c"] and report.skipped == 1

    def test_mostly_bad_is_format_error(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("a 1 2 3\nb 1 2\nc 4\n", encoding="utf-8")
        with pytest.raises(FormatError):
            load_pretrained(path)

    def test_text_round_trip_bitwise(self, tmp_path):
        rng = np.random.default_rng(0)
        table = EmbeddingTable(["x", "y", "z"], rng.normal(size=(3, 5)))
        table.save_text(tmp_path / "v.txt")
        back, _ = load_pretrained(tmp_path / "v.txt")
        np.testing.assert_array_equal(back.vectors, table.vectors)
        assert back.tokens == table.tokens


class TestBinary:
    def test_round_trip(self, tmp_path):
        vectors = np.random.default_rng(1).normal(size=(3, 4)).astype(np.float32).astype(np.float64)
        table = EmbeddingTable(["x", "y", "z"], vectors)
        table.save_binary(tmp_path / "t.bin")
        back = load_table(tmp_path / "t.bin")
        np.testing.assert_array_equal(back.vectors, vectors)

    def test_subword_round_trip(self, tmp_path):
        table = train_subword(planted_corpus(), small_cfg(epochs=1, subword=SubwordConfig(3, 4, 1000)))
        table.save_binary(tmp_path / "t.bin")
        back = load_table(tmp_path / "t.bin")
        assert back.subword is not None
        # rows are stored as 32-bit floats
        np.testing.assert_allclose(back.lookup("alphx"), table.lookup("alphx"), rtol=1e-6, atol=1e-8)

    def test_bad_magic_and_version(self, tmp_path):
        (tmp_path / "junk.bin").write_bytes(b"not a table")
        with pytest.raises(FormatError):
            EmbeddingTable.load_binary(tmp_path / "junk.bin")
        table = EmbeddingTable(["x"], np.ones((1, 2)))
        table.save_binary(tmp_path / "t.bin")
        data = bytearray((tmp_path / "t.bin").read_bytes())
        data[6] = 99  # version field follows the 6-byte magic
        (tmp_path / "v.bin").write_bytes(bytes(data))
        with pytest.raises(VersionError):
            EmbeddingTable.load_binary(tmp_path / "v.bin")

    def test_truncated(self, tmp_path):
        table = EmbeddingTable(["x", "y"], np.ones((2, 8)))
        table.save_binary(tmp_path / "t.bin")
        data = (tmp_path / "t.bin").read_bytes()
        (tmp_path / "cut.bin").write_bytes(data[:-9])
        with pytest.raises(FormatError):
            EmbeddingTable.load_binary(tmp_path / "cut.bin")
