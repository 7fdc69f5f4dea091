"""Shared builders: the separable fixture encoded for a small model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dupcnn.features import TfIdfModel, fit_tfidf
from dupcnn.fixtures import separable_pairs
from dupcnn.model import DuplicateModel, EncodedPair, ModelConfig, encode_pair
from dupcnn.textprep import Preprocessor, Vocabulary, build_vocabulary


@dataclass
class Fixture:
    cfg: ModelConfig
    matrix: np.ndarray
    pairs: list[EncodedPair]
    vocab: Vocabulary
    tfidf: TfIdfModel
    tokens: list[tuple[list[str], list[str]]]

    def model(self, seed: int = 0) -> DuplicateModel:
        return DuplicateModel(self.cfg, self.matrix, seed=seed)


def small_config(**kw) -> ModelConfig:
    base = dict(filter_widths=(2, 3), filters=8, dim=16, n_question=12, n_unique=12, n_keyword=6, dropout=0.0)
    base.update(kw)
    return ModelConfig(**base)


def separable_fixture(n: int = 64, seed: int = 0, **cfg_kw) -> Fixture:
    cfg = small_config(**cfg_kw)
    prep = Preprocessor(max_len=cfg.n_question)
    raw = separable_pairs(n, seed=seed)
    tokens = [prep.pair(p) for p in raw]
    docs = [t for pair in tokens for t in pair]
    vocab = build_vocabulary(docs)
    tfidf = fit_tfidf(docs)
    matrix = np.random.default_rng(seed).normal(scale=0.5, size=(len(vocab), cfg.dim))
    pairs = [encode_pair(a, b, vocab, tfidf, cfg, label=p.label) for (a, b), p in zip(tokens, raw)]
    return Fixture(cfg, matrix, pairs, vocab, tfidf, tokens)
