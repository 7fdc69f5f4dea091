"""Skip-gram word embeddings (optionally subword-composed) and vector file I/O."""

from __future__ import annotations

import hashlib
import json
import logging
import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _sgns
from .errors import ConfigurationError, FormatError, VersionError
from .textprep import PAD

LOGGER = logging.getLogger(__name__)

OOV_SCALE = 0.25
TABLE_MAGIC = b"DQEMB\x00"
TABLE_VERSION = 1


@dataclass
class SubwordConfig:
    n_min: int = 3
    n_max: int = 6
    bucket_count: int = 2_000_000


@dataclass
class SkipGramConfig:
    dim: int = 300
    window: int = 5
    negatives: int = 5
    epochs: int = 30
    initial_lr: float = 0.025
    min_count: int = 1
    subword: SubwordConfig | None = None
    seed: int = 0

    def validate(self) -> None:
        if self.window < 1 or self.negatives < 1 or self.epochs < 1 or self.dim < 1:
            raise ConfigurationError("window, negatives, epochs and dim must all be >= 1")
        if self.subword is not None:
            if self.subword.bucket_count <= 0:
                raise ConfigurationError("bucket_count must be positive")
            if not 1 <= self.subword.n_min <= self.subword.n_max:
                raise ConfigurationError("need 1 <= n_min <= n_max")


def fnv1a(text: str) -> int:
    h = 2166136261
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 16777619) & 0xFFFFFFFF
    return h


def char_ngrams(word: str, n_min: int, n_max: int) -> list[str]:
    """Distinct n-grams of ``<word>`` in order of appearance."""
    marked = f"<{word}>"
    seen = dict()
    for n in range(n_min, n_max + 1):
        for i in range(len(marked) - n + 1):
            seen.setdefault(marked[i : i + n], None)
    return list(seen)


@dataclass
class SubwordState:
    """Trained n-gram rows kept only for buckets the vocabulary touched."""

    config: SubwordConfig
    seed: int
    word_rows: np.ndarray  # own-word input vectors, aligned with table tokens
    bucket_ids: np.ndarray  # sorted int64
    bucket_rows: np.ndarray

    def __post_init__(self):
        self._pos = {int(b): i for i, b in enumerate(self.bucket_ids)}

    def buckets(self, word: str) -> list[int]:
        cfg = self.config
        return [fnv1a(g) % cfg.bucket_count for g in char_ngrams(word, cfg.n_min, cfg.n_max)]

    def bucket_row(self, bucket: int) -> np.ndarray:
        i = self._pos.get(bucket)
        if i is not None:
            return self.bucket_rows[i]
        # never touched by training: its deterministic initial value
        out = np.empty((1, self.word_rows.shape[1]))
        _sgns.fill_rows(self.seed, np.array([bucket], dtype=np.int64), out.shape[1], _init_scale(out.shape[1]), out)
        return out[0]

    def constituent_rows(self, word: str, word_index: int | None) -> np.ndarray:
        rows = [self.bucket_row(b) for b in self.buckets(word)]
        if word_index is not None:
            rows.insert(0, self.word_rows[word_index])
        return np.stack(rows)


def _init_scale(dim: int) -> float:
    return 0.5 / dim


class EmbeddingTable:
    """token -> d-dimensional vector, with deterministic fallbacks for unknown tokens."""

    def __init__(
        self,
        tokens: Sequence[str],
        vectors: np.ndarray,
        subword: SubwordState | None = None,
    ):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(tokens):
            raise FormatError(f"vectors shape {vectors.shape} does not match {len(tokens)} tokens")
        self.tokens = list(tokens)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise FormatError("duplicate tokens in embedding table")
        self.vectors = vectors
        self.subword = subword
        self.epoch_losses: list[float] = []
        self._oov_cache: dict[str, np.ndarray] = {}

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def lookup(self, token: str) -> np.ndarray:
        """Stored row, zero for padding, otherwise a cached deterministic fallback.

        Subword tables compose unknown words from their n-grams; plain tables
        draw uniform(-0.25, 0.25) values seeded by a hash of the token.
        """
        if token == PAD:
            return np.zeros(self.dim)
        i = self.index.get(token)
        if i is not None:
            return self.vectors[i]
        vec = self._oov_cache.get(token)
        if vec is None:
            if self.subword is not None:
                vec = self.subword.constituent_rows(token, None).mean(axis=0)
            else:
                seed = int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "little")
                vec = np.random.default_rng(seed).uniform(-OOV_SCALE, OOV_SCALE, self.dim)
            self._oov_cache[token] = vec
        return vec

    def cosine(self, a: str, b: str) -> float:
        va, vb = self.lookup(a), self.lookup(b)
        return float(va @ vb / max(np.linalg.norm(va) * np.linalg.norm(vb), 1e-12))

    # -- text format -------------------------------------------------------

    def save_text(self, path: str | Path, header: bool = True) -> None:
        with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
            if header:
                fh.write(f"{len(self.tokens)} {self.dim}\n")
            for tok, row in zip(self.tokens, self.vectors):
                fh.write(tok + " " + " ".join(map(repr, row.tolist())) + "\n")

    # -- binary format -----------------------------------------------------

    def save_binary(self, path: str | Path) -> None:
        vocab = "\n".join(self.tokens).encode("utf-8")
        with Path(path).open("wb") as fh:
            fh.write(TABLE_MAGIC)
            fh.write(struct.pack("<HIQQ", TABLE_VERSION, self.dim, len(self.tokens), len(vocab)))
            fh.write(vocab)
            fh.write(self.vectors.astype("<f4").tobytes())
            sw = self.subword
            if sw is None:
                fh.write(struct.pack("<B", 0))
                return
            meta = json.dumps(
                {"n_min": sw.config.n_min, "n_max": sw.config.n_max,
                 "bucket_count": sw.config.bucket_count, "seed": sw.seed,
                 "buckets": int(sw.bucket_ids.shape[0])}
            ).encode()
            fh.write(struct.pack("<BI", 1, len(meta)))
            fh.write(meta)
            fh.write(sw.bucket_ids.astype("<i8").tobytes())
            fh.write(sw.word_rows.astype("<f4").tobytes())
            fh.write(sw.bucket_rows.astype("<f4").tobytes())

    @classmethod
    def load_binary(cls, path: str | Path) -> "EmbeddingTable":
        data = Path(path).read_bytes()
        if not data.startswith(TABLE_MAGIC):
            raise FormatError(f"{path}: not an embedding table (bad magic)")
        off = len(TABLE_MAGIC)
        try:
            version, dim, n, vlen = struct.unpack_from("<HIQQ", data, off)
            if version != TABLE_VERSION:
                raise VersionError(f"{path}: table version {version}, reader supports {TABLE_VERSION}")
            off += struct.calcsize("<HIQQ")
            tokens = data[off : off + vlen].decode("utf-8").split("\n") if n else []
            off += vlen
            vectors, off = _read_f4(data, off, n, dim)
            (flag,) = struct.unpack_from("<B", data, off)
            off += 1
            subword = None
            if flag:
                (mlen,) = struct.unpack_from("<I", data, off)
                off += 4
                meta = json.loads(data[off : off + mlen])
                off += mlen
                k = meta["buckets"]
                bucket_ids = np.frombuffer(data, dtype="<i8", count=k, offset=off).astype(np.int64)
                off += 8 * k
                word_rows, off = _read_f4(data, off, n, dim)
                bucket_rows, off = _read_f4(data, off, k, dim)
                subword = SubwordState(
                    SubwordConfig(meta["n_min"], meta["n_max"], meta["bucket_count"]),
                    meta["seed"], word_rows, bucket_ids, bucket_rows,
                )
        except (struct.error, ValueError, UnicodeDecodeError, KeyError) as exc:
            raise FormatError(f"{path}: truncated or corrupt embedding table") from exc
        if off != len(data):
            raise FormatError(f"{path}: trailing bytes after embedding table")
        return cls(tokens, vectors, subword)


def _read_f4(data: bytes, off: int, rows: int, cols: int) -> tuple[np.ndarray, int]:
    count = rows * cols
    if off + 4 * count > len(data):
        raise ValueError("short read")
    arr = np.frombuffer(data, dtype="<f4", count=count, offset=off).astype(np.float64)
    return arr.reshape(rows, cols), off + 4 * count


# -- pretrained text vectors ----------------------------------------------


@dataclass
class VectorLoadReport:
    rows_read: int = 0
    kept: int = 0
    skipped: int = 0
    header: bool = False

    def to_text(self) -> str:
        return f"rows_read={self.rows_read}\nkept={self.kept}\nskipped={self.skipped}\nheader={self.header}\n"


def load_pretrained(path: str | Path) -> tuple[EmbeddingTable, VectorLoadReport]:
    """Parse ``token v1 ... vd`` lines; an optional ``<count> <dim>`` header is consumed."""
    report = VectorLoadReport()
    tokens: list[str] = []
    rows: list[list[float]] = []
    dim = None
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            parts = line.rstrip("\n").split(" ")
            if not line.strip():
                continue
            if lineno == 0 and len(parts) == 2 and all(p.isdigit() for p in parts):
                report.header = True
                continue
            report.rows_read += 1
            if dim is None:
                dim = len(parts) - 1
            if len(parts) - 1 != dim or dim < 1:
                report.skipped += 1
                continue
            try:
                values = [float(v) for v in parts[1:]]
            except ValueError:
                report.skipped += 1
                continue
            tokens.append(parts[0])
            rows.append(values)
            report.kept += 1
    if report.rows_read == 0 or report.skipped * 2 > report.rows_read:
        raise FormatError(f"{path}: inconsistent vector dimensions ({report.skipped}/{report.rows_read} rows bad)")
    if report.skipped:
        LOGGER.info("skipped %d rows with wrong arity in %s", report.skipped, path)
    return EmbeddingTable(tokens, np.array(rows, dtype=np.float64)), report


def load_table(path: str | Path) -> EmbeddingTable:
    """Binary table if the magic matches, text vectors otherwise."""
    with Path(path).open("rb") as fh:
        head = fh.read(len(TABLE_MAGIC))
    if head == TABLE_MAGIC:
        return EmbeddingTable.load_binary(path)
    return load_pretrained(path)[0]


# -- training ----------------------------------------------------------------


class NegativeSampler:
    """Draws ids from the unigram distribution raised to 0.75."""

    def __init__(self, counts: Sequence[int], power: float = 0.75):
        weights = np.asarray(counts, dtype=np.float64) ** power
        self.probs = weights / weights.sum()
        self.cum = np.cumsum(self.probs)
        self.cum[-1] = 1.0

    def draw(self, n: int, seed: int) -> np.ndarray:
        state = np.array([seed], dtype=np.uint64)
        return _sgns.draw_many(self.cum, n, state)


def sgns_loss_and_grads(center: np.ndarray, context: np.ndarray, negatives: np.ndarray):
    """Negative-sampling loss for one update and its gradients.

    loss = -log s(u_o . v) - sum_k log s(-u_k . v), with s the logistic
    function. Returns (loss, d_center, d_context, d_negatives).
    """
    pos = context @ center
    neg = negatives @ center
    loss = np.logaddexp(0.0, -pos) + np.logaddexp(0.0, neg).sum()
    g_pos = -1.0 / (1.0 + np.exp(pos))  # d loss / d pos
    g_neg = 1.0 / (1.0 + np.exp(-neg))  # d loss / d neg
    d_center = g_pos * context + g_neg @ negatives
    d_context = g_pos * center
    d_negatives = np.outer(g_neg, center)
    return float(loss), d_center, d_context, d_negatives


def _build_vocab(corpus: Iterable[Sequence[str]], min_count: int) -> tuple[list[str], np.ndarray]:
    counts = Counter()
    for seq in corpus:
        counts.update(seq)
    kept = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
    return kept, np.array([counts[t] for t in kept], dtype=np.int64)


def _flatten(corpus: Iterable[Sequence[str]], index: dict[str, int]) -> tuple[np.ndarray, np.ndarray]:
    flat: list[int] = []
    ptr = [0]
    for seq in corpus:
        ids = [index[t] for t in seq if t in index]
        if len(ids) >= 2:
            flat.extend(ids)
            ptr.append(len(flat))
    return np.array(flat, dtype=np.int64), np.array(ptr, dtype=np.int64)


def train_skipgram(corpus: Sequence[Sequence[str]], cfg: SkipGramConfig) -> EmbeddingTable:
    """Skip-gram with negative sampling; subword composition when ``cfg.subword`` is set.

    Deterministic for a fixed ``cfg.seed``. Per-epoch mean update losses are
    kept on the returned table as ``epoch_losses``.
    """
    cfg.validate()
    if not corpus:
        raise ConfigurationError("empty training corpus")
    tokens, counts = _build_vocab(corpus, cfg.min_count)
    if not tokens:
        raise ConfigurationError(f"no token reaches min_count={cfg.min_count}")
    index = {t: i for i, t in enumerate(tokens)}
    flat, sent_ptr = _flatten(corpus, index)
    v, d = len(tokens), cfg.dim
    scale = _init_scale(d)

    if cfg.subword is None:
        syn0 = np.empty((v, d))
        _sgns.fill_rows(cfg.seed, np.arange(v, dtype=np.int64), d, scale, syn0)
        sub_ptr = np.arange(v + 1, dtype=np.int64)
        sub_idx = np.arange(v, dtype=np.int64)
        bucket_ids = None
    else:
        sw = cfg.subword
        per_word = [
            [fnv1a(g) % sw.bucket_count for g in char_ngrams(t, sw.n_min, sw.n_max)] for t in tokens
        ]
        bucket_ids = np.array(sorted({b for bs in per_word for b in bs}), dtype=np.int64)
        pos = {int(b): v + i for i, b in enumerate(bucket_ids)}
        syn0 = np.empty((v + len(bucket_ids), d))
        # word rows and bucket rows use disjoint key spaces (buckets are < 2**32)
        _sgns.fill_rows(cfg.seed, np.arange(v, dtype=np.int64) + (1 << 40), d, scale, syn0[:v])
        _sgns.fill_rows(cfg.seed, bucket_ids, d, scale, syn0[v:])
        ptr = [0]
        idx: list[int] = []
        for w, bs in enumerate(per_word):
            idx.append(w)
            idx.extend(pos[b] for b in bs)
            ptr.append(len(idx))
        sub_ptr = np.array(ptr, dtype=np.int64)
        sub_idx = np.array(idx, dtype=np.int64)

    syn1 = np.zeros((v, d))
    cum = NegativeSampler(counts).cum
    state = np.array([cfg.seed ^ 0x5DEECE66D], dtype=np.uint64)
    losses = _sgns.train_epochs(
        syn0, syn1, flat, sent_ptr, sub_ptr, sub_idx, cum,
        cfg.window, cfg.negatives, cfg.epochs, cfg.initial_lr, state,
    )

    if cfg.subword is None:
        table = EmbeddingTable(tokens, syn0)
    else:
        composed = np.stack([syn0[sub_idx[sub_ptr[w] : sub_ptr[w + 1]]].mean(axis=0) for w in range(v)])
        state_sw = SubwordState(cfg.subword, cfg.seed, syn0[:v].copy(), bucket_ids, syn0[v:].copy())
        table = EmbeddingTable(tokens, composed, state_sw)
    table.epoch_losses = [float(x) for x in losses]
    LOGGER.info("skip-gram: %d words, %d tokens, final epoch loss %.4f", v, len(flat), losses[-1])
    return table


def train_subword(corpus: Sequence[Sequence[str]], cfg: SkipGramConfig) -> EmbeddingTable:
    if cfg.subword is None:
        raise ConfigurationError("train_subword needs cfg.subword")
    return train_skipgram(corpus, cfg)
