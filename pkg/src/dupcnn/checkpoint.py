"""Versioned binary checkpoint container.

Layout: magic, semantic version (3 x u16), a section table
(name, offset, length) and the section payloads. Sections:

* ``config``  - JSON: model/train/preprocessing settings, TF-IDF digest, trainer meta
* ``vocab``   - ``token<TAB>count`` lines
* ``tfidf``   - the TF-IDF dump (``N=<docs>`` then ``term<TAB>df``)
* ``tensors`` - named row-major blocks; parameters, the frozen keyword table,
  batch-norm running statistics and Adam moments (``adam.m.*``/``adam.v.*``)
* ``rng``     - JSON bit-generator state
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, VersionError
from .features import TfIdfModel
from .model import DuplicateModel, ModelConfig
from .textprep import Vocabulary
from .trainer import TrainState, restore, snapshot

MAGIC = b"DQCNNCK\x00"
VERSION = (1, 0, 0)
_DTYPES = {0: "<f8", 1: "<f4", 2: "<i8"}
_CODES = {v: k for k, v in _DTYPES.items()}


@dataclass
class Bundle:
    """A model together with what it needs to encode raw text."""

    model: DuplicateModel
    vocab: Vocabulary
    tfidf: TfIdfModel
    prep: dict = field(default_factory=dict)
    train_config: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    rng_state: dict = field(default_factory=dict)


def _pack_tensors(arrays: dict[str, np.ndarray], precision: str) -> bytes:
    buf = io.BytesIO()
    buf.write(struct.pack("<I", len(arrays)))
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        if arr.dtype.kind == "i":
            dtype = "<i8"
        elif precision == "float32" and not name.startswith("adam."):
            dtype = "<f4"
        else:
            dtype = "<f8"
        raw = name.encode("utf-8")
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<BB", _CODES[dtype], arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype=dtype).tobytes())
    return buf.getvalue()


def _unpack_tensors(data: bytes) -> dict[str, np.ndarray]:
    out = {}
    (count,) = struct.unpack_from("<I", data, 0)
    off = 4
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", data, off)
        off += 2
        name = data[off : off + nlen].decode("utf-8")
        off += nlen
        code, ndim = struct.unpack_from("<BB", data, off)
        off += 2
        shape = struct.unpack_from(f"<{ndim}Q", data, off)
        off += 8 * ndim
        dtype = np.dtype(_DTYPES[code])
        size = int(np.prod(shape)) * dtype.itemsize
        if off + size > len(data):
            raise FormatError(f"tensor {name} truncated")
        arr = np.frombuffer(data, dtype=dtype, count=int(np.prod(shape)), offset=off).reshape(shape)
        out[name] = arr.astype(np.int64 if dtype.kind == "i" else np.float64)
        off += size
    if off != len(data):
        raise FormatError("trailing bytes in tensors section")
    return out


def save_checkpoint(bundle: Bundle, path: str | Path, precision: str = "float64") -> None:
    """Write ``bundle``; ``precision='float32'`` stores model arrays (not Adam moments) as 32-bit."""
    model = bundle.model
    state = snapshot(model, None)
    arrays = dict(state.arrays)
    for name, (m, v, t) in state.adam.items():
        arrays[f"adam.m.{name}"] = m
        arrays[f"adam.v.{name}"] = v
        arrays[f"adam.t.{name}"] = np.array([t], dtype=np.int64)
    vocab_buf = io.StringIO()
    for tok in bundle.vocab.tokens():
        vocab_buf.write(f"{tok}\t{bundle.vocab.counts[tok]}\n")
    tfidf_buf = io.StringIO()
    tfidf_buf.write(f"N={bundle.tfidf.doc_count}\n")
    for term in sorted(bundle.tfidf.df):
        tfidf_buf.write(f"{term}\t{bundle.tfidf.df[term]}\n")
    config = {
        "model": model.cfg.to_dict(),
        "train": bundle.train_config,
        "prep": bundle.prep,
        "meta": bundle.meta,
        "tfidf_sha256": bundle.tfidf.digest(),
        "vocab_size": len(bundle.vocab),
        "precision": precision,
    }
    sections = [
        ("config", json.dumps(config, sort_keys=True).encode("utf-8")),
        ("vocab", vocab_buf.getvalue().encode("utf-8")),
        ("tfidf", tfidf_buf.getvalue().encode("utf-8")),
        ("tensors", _pack_tensors(arrays, precision)),
        ("rng", json.dumps(bundle.rng_state, sort_keys=True).encode("utf-8")),
    ]
    header = io.BytesIO()
    header.write(MAGIC)
    header.write(struct.pack("<3H", *VERSION))
    header.write(struct.pack("<I", len(sections)))
    table_size = sum(2 + len(n.encode()) + 16 for n, _ in sections)
    offset = len(header.getvalue()) + table_size
    for name, payload in sections:
        raw = name.encode("utf-8")
        header.write(struct.pack("<H", len(raw)))
        header.write(raw)
        header.write(struct.pack("<QQ", offset, len(payload)))
        offset += len(payload)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("wb") as fh:
        fh.write(header.getvalue())
        for _, payload in sections:
            fh.write(payload)
    tmp.replace(path)


def read_sections(path: str | Path, reader_version: tuple[int, int, int] = VERSION) -> dict[str, bytes]:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise FormatError(f"{path}: not a checkpoint (bad magic)")
    try:
        off = len(MAGIC)
        version = struct.unpack_from("<3H", data, off)
        off += 6
        if version[0] != reader_version[0]:
            raise VersionError(
                f"{path}: checkpoint version {'.'.join(map(str, version))} is incompatible "
                f"with reader {'.'.join(map(str, reader_version))}"
            )
        (count,) = struct.unpack_from("<I", data, off)
        off += 4
        sections = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", data, off)
            off += 2
            name = data[off : off + nlen].decode("utf-8")
            off += nlen
            start, length = struct.unpack_from("<QQ", data, off)
            off += 16
            if start + length > len(data):
                raise FormatError(f"{path}: section {name} truncated")
            sections[name] = data[start : start + length]
    except struct.error as exc:
        raise FormatError(f"{path}: truncated checkpoint header") from exc
    missing = {"config", "vocab", "tfidf", "tensors", "rng"} - set(sections)
    if missing:
        raise FormatError(f"{path}: missing sections {sorted(missing)}")
    return sections


def load_checkpoint(path: str | Path, reader_version: tuple[int, int, int] = VERSION) -> Bundle:
    """Rebuild the bundle; any corruption raises before a model is returned."""
    sections = read_sections(path, reader_version)
    try:
        config = json.loads(sections["config"])
        arrays = _unpack_tensors(sections["tensors"])
        vocab = Vocabulary()
        for line in sections["vocab"].decode("utf-8").splitlines():
            tok, _, count = line.partition("\t")
            vocab.add(tok, int(count))
        tfidf = TfIdfModel.from_lines(sections["tfidf"].decode("utf-8").splitlines())
        rng_state = json.loads(sections["rng"])
    except (ValueError, KeyError, struct.error, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: corrupt checkpoint ({exc})") from exc
    if tfidf.digest() != config.get("tfidf_sha256"):
        raise FormatError(f"{path}: TF-IDF section does not match its recorded digest")
    cfg = ModelConfig(**config["model"])
    table = arrays.get("embedding.trainable")
    if table is None:
        raise FormatError(f"{path}: no embedding table stored")
    model = DuplicateModel(cfg, table, seed=0)
    adam = {}
    for p in model.parameters():
        if f"adam.m.{p.name}" in arrays:
            adam[p.name] = (arrays[f"adam.m.{p.name}"], arrays[f"adam.v.{p.name}"], int(arrays[f"adam.t.{p.name}"][0]))
    restore(model, TrainState(arrays=arrays, adam=adam, rng_state=rng_state))
    return Bundle(
        model=model,
        vocab=vocab,
        tfidf=tfidf,
        prep=config.get("prep", {}),
        train_config=config.get("train", {}),
        meta=config.get("meta", {}),
        rng_state=rng_state,
    )
