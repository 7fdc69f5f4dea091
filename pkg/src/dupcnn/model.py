"""Six-input CNN: embed, convolve, pool, compare with cosine + offset, classify."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .embeddings import EmbeddingTable
from .errors import ConfigurationError, ShapeError
from .features import TfIdfModel, keywords, unique_words
from .tensorcore import (
    BatchNormState,
    Parameter,
    Tensor,
    affine,
    batch_norm,
    chunked_max_pool,
    constant,
    conv1d_relu,
    cosine_lambda,
    dropout,
    embedding,
    global_max_pool,
    global_min_pool,
    softmax,
    stack_last,
    temporal_chunk_max_pool,
    xavier_init,
)
from .textprep import OOV, PAD_ID, Vocabulary, clip

INPUTS = ("question", "unique", "keyword")
FEATURES = ("max", "min", "chunk")
DIRECTIONS = ("fwd", "bwd")


@dataclass
class ModelConfig:
    filter_widths: tuple[int, ...] = (2, 3, 4, 6, 8)
    filters: int = 200
    dim: int = 300
    n_question: int = 40
    n_unique: int = 40
    n_keyword: int = 10
    keywords_k: int = 3
    chunks: int = 4
    chunk_mode: str = "filters"  # "positions" pools per filter inside positional chunks
    shared_conv: bool = False
    lambda_mode: str = "per_slot"  # "shared" uses a single offset everywhere
    dropout: float = 0.1
    bn_momentum: float = 0.7

    def __post_init__(self):
        self.filter_widths = tuple(int(w) for w in self.filter_widths)

    def validate(self) -> None:
        if not self.filter_widths:
            raise ConfigurationError("need at least one filter width")
        shortest = min(self.n_question, self.n_unique, self.n_keyword)
        if max(self.filter_widths) > shortest:
            raise ConfigurationError(
                f"widest filter {max(self.filter_widths)} exceeds shortest sequence {shortest}"
            )
        if self.chunk_mode == "filters" and self.filters % self.chunks:
            raise ConfigurationError(f"filters={self.filters} not divisible by chunks={self.chunks}")
        if self.chunk_mode not in ("filters", "positions"):
            raise ConfigurationError(f"unknown chunk_mode {self.chunk_mode!r}")
        if self.lambda_mode not in ("per_slot", "shared"):
            raise ConfigurationError(f"unknown lambda_mode {self.lambda_mode!r}")
        if self.keywords_k > self.n_keyword:
            raise ConfigurationError("keywords_k exceeds n_keyword")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError("dropout must be in [0, 1)")

    def seq_len(self, kind: str) -> int:
        return {"question": self.n_question, "unique": self.n_unique, "keyword": self.n_keyword}[kind]

    @property
    def similarity_size(self) -> int:
        return len(INPUTS) * len(self.filter_widths) * len(FEATURES) * len(DIRECTIONS)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["filter_widths"] = list(self.filter_widths)
        return d


@dataclass
class EncodedPair:
    """Fixed-length id sequences for the three input pairs (0 = padding)."""

    question: tuple[np.ndarray, np.ndarray]
    unique: tuple[np.ndarray, np.ndarray]
    keyword: tuple[np.ndarray, np.ndarray]
    label: int | None = None

    def ids(self, kind: str) -> tuple[np.ndarray, np.ndarray]:
        return getattr(self, kind)

    def mask(self, kind: str) -> tuple[np.ndarray, np.ndarray]:
        p, q = self.ids(kind)
        return p != PAD_ID, q != PAD_ID


def pad_ids(ids: Sequence[int], length: int) -> np.ndarray:
    out = np.full(length, PAD_ID, dtype=np.int64)
    ids = list(ids)[:length]
    out[: len(ids)] = ids
    return out


def encode_pair(
    tokens_p: Sequence[str],
    tokens_q: Sequence[str],
    vocab: Vocabulary,
    tfidf: TfIdfModel,
    cfg: ModelConfig | None = None,
    label: int | None = None,
) -> EncodedPair:
    cfg = cfg or ModelConfig()
    p = clip(tokens_p, cfg.n_question)
    q = clip(tokens_q, cfg.n_question)
    up, uq = unique_words(p, q)
    kp, kq = keywords(p, tfidf, cfg.keywords_k), keywords(q, tfidf, cfg.keywords_k)

    def enc(tokens, n):
        return pad_ids(vocab.ids(tokens), n)

    return EncodedPair(
        question=(enc(p, cfg.n_question), enc(q, cfg.n_question)),
        unique=(enc(up, cfg.n_unique), enc(uq, cfg.n_unique)),
        keyword=(enc(kp, cfg.n_keyword), enc(kq, cfg.n_keyword)),
        label=label,
    )


def build_embedding_matrix(table: EmbeddingTable, vocab: Vocabulary) -> np.ndarray:
    """Rows aligned with vocabulary ids: zero padding row, then table lookups."""
    matrix = np.zeros((len(vocab), table.dim))
    matrix[1] = table.lookup(OOV)
    for i, tok in enumerate(vocab.tokens(), start=2):
        matrix[i] = table.lookup(tok)
    return matrix


@dataclass
class ForwardResult:
    logits: Tensor
    similarity: Tensor

    @property
    def probs(self) -> np.ndarray:
        return softmax(self.logits.data)


@dataclass
class _Branch:
    gamma: Parameter
    beta: Parameter
    bn: BatchNormState
    conv: dict = field(default_factory=dict)  # (side, width) -> (filters, bias)


class DuplicateModel:
    def __init__(self, cfg: ModelConfig, embedding_matrix: np.ndarray, seed: int = 0):
        cfg.validate()
        embedding_matrix = np.asarray(embedding_matrix, dtype=np.float64)
        if embedding_matrix.ndim != 2 or embedding_matrix.shape[1] != cfg.dim:
            raise ConfigurationError(
                f"embedding matrix shape {embedding_matrix.shape} does not match dim={cfg.dim}"
            )
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        matrix = embedding_matrix.copy()
        matrix[PAD_ID] = 0.0
        self.embedding = Parameter(matrix, "embedding.trainable")
        self.keyword_embedding = constant(matrix.copy(), "embedding.keyword")
        sides = ("shared",) if cfg.shared_conv else ("p", "q")
        self.branches: dict[str, _Branch] = {}
        for kind in INPUTS:
            branch = _Branch(
                Parameter(np.ones(cfg.dim), f"bn.{kind}.gamma"),
                Parameter(np.zeros(cfg.dim), f"bn.{kind}.beta"),
                BatchNormState.fresh(cfg.dim, cfg.bn_momentum),
            )
            for side in sides:
                for h in cfg.filter_widths:
                    w = xavier_init((cfg.filters, h, cfg.dim), rng, fan_in=h * cfg.dim, fan_out=h * cfg.filters)
                    branch.conv[side, h] = (
                        Parameter(w, f"conv.{kind}.{side}.w{h}.filters"),
                        Parameter(np.zeros(cfg.filters), f"conv.{kind}.{side}.w{h}.bias"),
                    )
            self.branches[kind] = branch
        self.lambdas: dict[tuple, Parameter] = {}
        shared = Parameter(np.array(1.0), "lambda.shared", bounds=(0.0, 1.0))
        for slot in self.similarity_slots():
            if cfg.lambda_mode == "shared":
                self.lambdas[slot] = shared
            else:
                self.lambdas[slot] = Parameter(np.array(1.0), "lambda." + ".".join(map(str, slot)), bounds=(0.0, 1.0))
        s = cfg.similarity_size
        self.out_weight = Parameter(xavier_init((2, s), rng), "output.weight")
        self.out_bias = Parameter(np.zeros(2), "output.bias")

    def similarity_slots(self) -> Iterator[tuple]:
        """Canonical order: input pair, then width, then feature type, then direction."""
        for kind in INPUTS:
            for h in self.cfg.filter_widths:
                for feat in FEATURES:
                    for direction in DIRECTIONS:
                        yield (kind, f"w{h}", feat, direction)

    def parameters(self) -> list[Parameter]:
        params: list[Parameter] = [self.embedding]
        for kind in INPUTS:
            b = self.branches[kind]
            params += [b.gamma, b.beta]
        for kind in INPUTS:
            for key in sorted(self.branches[kind].conv, key=lambda k: (k[0], k[1])):
                params.extend(self.branches[kind].conv[key])
        seen = set()
        for slot in self.similarity_slots():
            lam = self.lambdas[slot]
            if id(lam) not in seen:
                seen.add(id(lam))
                params.append(lam)
        params += [self.out_weight, self.out_bias]
        return params

    def lambda_parameters(self) -> list[Parameter]:
        return [p for p in self.parameters() if p.bounds is not None]

    def _features(self, c: Tensor) -> tuple[Tensor, Tensor, Tensor]:
        if self.cfg.chunk_mode == "filters":
            chunk = chunked_max_pool(c, self.cfg.chunks)
        else:
            chunk = temporal_chunk_max_pool(c, self.cfg.chunks)
        return global_max_pool(c), global_min_pool(c), chunk

    def forward(
        self,
        batch: Sequence[EncodedPair],
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> ForwardResult:
        if not batch:
            raise ShapeError("forward: empty batch")
        cfg = self.cfg
        if training and cfg.dropout > 0 and rng is None:
            raise ValueError("training with dropout needs an rng")
        size = len(batch)
        scores: list[Tensor] = []
        for kind in INPUTS:
            n = cfg.seq_len(kind)
            ids = np.stack([pair.ids(kind)[0] for pair in batch] + [pair.ids(kind)[1] for pair in batch])
            if ids.shape != (2 * size, n):
                raise ShapeError(f"{kind} ids have shape {ids.shape}, expected {(2 * size, n)}")
            mask = ids != PAD_ID
            table = self.keyword_embedding if kind == "keyword" else self.embedding
            x = embedding(table, ids)
            branch = self.branches[kind]
            if mask.any() or not training:
                x = batch_norm(x, mask, branch.gamma, branch.beta, branch.bn, training)
            # a fully padded branch embeds to zeros with or without normalisation
            halves = {"p": x[:size], "q": x[size:]}
            lengths = mask.sum(axis=1)
            side_lengths = {"p": lengths[:size], "q": lengths[size:]}
            for h in cfg.filter_widths:
                feats = {}
                for side, xs in halves.items():
                    filt, bias = branch.conv["shared" if cfg.shared_conv else side, h]
                    c = conv1d_relu(xs, filt, bias, side_lengths[side])
                    c = dropout(c, cfg.dropout, training, rng)
                    feats[side] = self._features(c)
                for fi, feat in enumerate(FEATURES):
                    fp, fq = feats["p"][fi], feats["q"][fi]
                    scores.append(cosine_lambda(fp, fq, self.lambdas[kind, f"w{h}", feat, "fwd"]))
                    scores.append(cosine_lambda(fq, fp, self.lambdas[kind, f"w{h}", feat, "bwd"]))
        similarity = stack_last(scores)
        logits = affine(similarity, self.out_weight, self.out_bias)
        return ForwardResult(logits, similarity)

    def predict_proba(self, batch: Sequence[EncodedPair]) -> np.ndarray:
        return self.forward(batch, training=False).probs

    def predict(self, pair: EncodedPair) -> tuple[int, np.ndarray]:
        """Argmax class (exact ties resolve to 0) and the probability pair."""
        probs = self.predict_proba([pair])[0]
        return predicted_label(probs), probs

    # -- state ----------------------------------------------------------------

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Every array that defines the model's forward pass, by stable name."""
        out = {p.name: p.data for p in self.parameters()}
        out[self.keyword_embedding.name] = self.keyword_embedding.data
        for kind in INPUTS:
            bn = self.branches[kind].bn
            out[f"bn.{kind}.running_mean"] = bn.running_mean
            out[f"bn.{kind}.running_var"] = bn.running_var
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        current = self.state_arrays()
        missing = set(current) - set(arrays)
        if missing:
            raise ShapeError(f"state is missing arrays: {sorted(missing)[:5]}")
        for p in self.parameters():
            _assign(p.data, arrays[p.name], p.name)
        _assign(self.keyword_embedding.data, arrays[self.keyword_embedding.name], "embedding.keyword")
        for kind in INPUTS:
            bn = self.branches[kind].bn
            bn.running_mean = np.array(arrays[f"bn.{kind}.running_mean"], dtype=np.float64)
            bn.running_var = np.array(arrays[f"bn.{kind}.running_var"], dtype=np.float64)


def _assign(dst: np.ndarray, src: np.ndarray, name: str) -> None:
    if dst.shape != np.shape(src):
        raise ShapeError(f"{name}: stored shape {np.shape(src)} != model shape {dst.shape}")
    dst[...] = src


def predicted_label(probs: np.ndarray) -> int:
    return int(probs[1] > probs[0])
