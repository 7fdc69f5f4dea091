"""TF-IDF scoring, keyword and unique-word extraction, TF-IDF-weighted embeddings."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .embeddings import EmbeddingTable
from .errors import ConfigurationError, FormatError
from .textprep import Vocabulary


@dataclass
class TfIdfModel:
    doc_count: int = 0
    df: dict[str, int] = field(default_factory=dict)

    def idf(self, term: str) -> float:
        # unseen terms count as df=1, i.e. maximal idf
        return math.log10(self.doc_count / self.df.get(term, 1))

    def digest(self) -> str:
        h = hashlib.sha256(f"N={self.doc_count}\n".encode())
        for term in sorted(self.df):
            h.update(f"{term}\t{self.df[term]}\n".encode())
        return h.hexdigest()

    def save(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"N={self.doc_count}\n")
            for term in sorted(self.df):
                fh.write(f"{term}\t{self.df[term]}\n")

    @classmethod
    def load(cls, path: str | Path) -> "TfIdfModel":
        with Path(path).open("r", encoding="utf-8") as fh:
            return cls.from_lines(fh)

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "TfIdfModel":
        it = iter(lines)
        header = next(it, "").strip()
        if not header.startswith("N="):
            raise FormatError("TF-IDF dump must start with 'N=<doc_count>'")
        model = cls(doc_count=int(header[2:]))
        for line in it:
            line = line.rstrip("\n")
            if line:
                term, _, df = line.partition("\t")
                model.df[term] = int(df)
        return model


def fit_tfidf(corpus: Iterable[Sequence[str]]) -> TfIdfModel:
    """Each token sequence is one document; df counts documents, not occurrences."""
    model = TfIdfModel()
    for doc in corpus:
        model.doc_count += 1
        for term in set(doc):
            model.df[term] = model.df.get(term, 0) + 1
    if model.doc_count == 0:
        raise ConfigurationError("cannot fit TF-IDF on an empty corpus")
    return model


def tfidf_score(model: TfIdfModel, doc: Sequence[str], term: str) -> float:
    tf = sum(1 for t in doc if t == term)
    if tf == 0:
        return 0.0
    return tf * model.idf(term)


def keywords(doc: Sequence[str], model: TfIdfModel, k: int = 3) -> list[str]:
    """Top-k distinct tokens by TF-IDF; ties keep first-occurrence order."""
    distinct = list(dict.fromkeys(doc))
    tf: dict[str, int] = {}
    for t in doc:
        tf[t] = tf.get(t, 0) + 1
    scored = sorted(distinct, key=lambda t: -tf[t] * model.idf(t))  # sort is stable
    return scored[:k]


def unique_words(p: Sequence[str], q: Sequence[str]) -> tuple[list[str], list[str]]:
    p_types, q_types = set(p), set(q)
    return [t for t in p if t not in q_types], [t for t in q if t not in p_types]


def corpus_scalar(model: TfIdfModel, vocab: Vocabulary, term: str) -> float:
    """Document-independent weight: total corpus count x idf."""
    return vocab.counts.get(term, 0) * model.idf(term)


def weighted_embedding_table(
    emb: EmbeddingTable, model: TfIdfModel, vocab: Vocabulary
) -> EmbeddingTable:
    """One row per vocabulary term: its vector scaled by its corpus TF-IDF weight."""
    terms = vocab.tokens()
    rows = np.empty((len(terms), emb.dim), dtype=np.float64)
    for i, term in enumerate(terms):
        vec = emb.lookup(term)
        if vec.shape != (emb.dim,):
            raise ConfigurationError(f"vector for {term!r} has shape {vec.shape}, expected ({emb.dim},)")
        rows[i] = vec * corpus_scalar(model, vocab, term)
    return EmbeddingTable(terms, rows)
