"""Loading, validating and partitioning the question-pair TSV."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import ConsistencyError, ConfigurationError, FormatError

LOGGER = logging.getLogger(__name__)

HEADER = ("id", "qid1", "qid2", "question1", "question2", "is_duplicate")
SPLIT_ROLES = ("train", "validation", "test")


@dataclass(frozen=True)
class QuestionPair:
    pair_id: int
    qid1: int
    qid2: int
    text1: str
    text2: str
    label: int


@dataclass
class LoadReport:
    rows_read: int = 0
    kept: int = 0
    skipped: int = 0
    duplicates: int = 0
    reasons: Counter = field(default_factory=Counter)

    @property
    def duplicate_fraction(self) -> float:
        return self.duplicates / self.kept if self.kept else 0.0

    def to_text(self) -> str:
        lines = [
            f"rows_read={self.rows_read}",
            f"kept={self.kept}",
            f"skipped={self.skipped}",
            f"duplicate_fraction={self.duplicate_fraction:.4f}",
        ]
        lines += [f"skipped[{k}]={v}" for k, v in sorted(self.reasons.items())]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class DatasetSplit:
    train: list[QuestionPair]
    validation: list[QuestionPair]
    test: list[QuestionPair]
    mode: str = "seeded"  # or "official" when partition files drove membership

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.validation), len(self.test)


def _parse_row(fields: list[str]) -> QuestionPair | str:
    """Return a pair, or a short reason string when the row is malformed."""
    if len(fields) < 6:
        return "missing_fields"
    if len(fields) > 6:
        return "extra_tabs"
    try:
        pair_id, qid1, qid2 = int(fields[0]), int(fields[1]), int(fields[2])
    except ValueError:
        return "bad_id"
    label = fields[5].strip()
    if label not in ("0", "1"):
        return "bad_label"
    text1, text2 = fields[3].strip(), fields[4].strip()
    if not text1 or not text2:
        return "empty_text"
    return QuestionPair(pair_id, qid1, qid2, text1, text2, int(label))


def load_tsv(path: str | Path) -> tuple[list[QuestionPair], LoadReport]:
    """Read a question-pair TSV, skipping (and counting) malformed rows.

    The header line is optional and recognised by a non-numeric first field.
    """
    path = Path(path)
    report = LoadReport()
    pairs: list[QuestionPair] = []
    with path.open("r", encoding="utf-8", newline="\n") as fh:
        for lineno, raw in enumerate(fh):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            fields = line.split("\t")
            if lineno == 0 and not fields[0].strip().lstrip("-").isdigit():
                continue
            report.rows_read += 1
            parsed = _parse_row(fields)
            if isinstance(parsed, str):
                report.skipped += 1
                report.reasons[parsed] += 1
                continue
            pairs.append(parsed)
            report.kept += 1
            report.duplicates += parsed.label
    if not pairs:
        raise FormatError(f"no valid question pairs in {path}")
    if report.skipped:
        LOGGER.info("skipped %d malformed rows in %s", report.skipped, path)
    return pairs, report


def write_tsv(pairs: list[QuestionPair], path: str | Path, header: bool = True) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        if header:
            fh.write("\t".join(HEADER) + "\n")
        for p in pairs:
            fh.write(f"{p.pair_id}\t{p.qid1}\t{p.qid2}\t{p.text1}\t{p.text2}\t{p.label}\n")


def read_partition_file(path: str | Path) -> list[int]:
    ids = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                try:
                    ids.append(int(line))
                except ValueError as exc:
                    raise FormatError(f"{path}: not a pair id: {line!r}") from exc
    return ids


def partition(
    pairs: list[QuestionPair],
    val_n: int,
    test_n: int,
    seed: int = 0,
    partition_files: Mapping[str, str | Path] | None = None,
) -> DatasetSplit:
    """Split pairs into train/validation/test.

    With ``partition_files`` (keys among ``train``, ``validation``, ``test``)
    membership follows the files; pairs not listed in any file fall into train
    unless a train file was given, in which case they are dropped. Otherwise a
    seeded permutation assigns ``val_n`` then ``test_n`` pairs and the rest go
    to train.
    """
    if partition_files:
        return _partition_from_files(pairs, partition_files)
    if val_n < 0 or test_n < 0 or val_n + test_n >= len(pairs):
        raise ConfigurationError(
            f"val_n + test_n must be < number of pairs ({val_n}+{test_n} vs {len(pairs)})"
        )
    order = np.random.default_rng(seed).permutation(len(pairs))
    val_idx = np.sort(order[:val_n])
    test_idx = np.sort(order[val_n : val_n + test_n])
    train_idx = np.sort(order[val_n + test_n :])
    return DatasetSplit(
        train=[pairs[i] for i in train_idx],
        validation=[pairs[i] for i in val_idx],
        test=[pairs[i] for i in test_idx],
        mode="seeded",
    )


def _partition_from_files(
    pairs: list[QuestionPair], files: Mapping[str, str | Path]
) -> DatasetSplit:
    unknown_roles = set(files) - set(SPLIT_ROLES)
    if unknown_roles:
        raise ConfigurationError(f"unknown split roles: {sorted(unknown_roles)}")
    by_id = {p.pair_id: p for p in pairs}
    members: dict[str, list[QuestionPair]] = {}
    seen: dict[int, str] = {}
    for role, path in files.items():
        chosen = []
        for pid in read_partition_file(path):
            if pid not in by_id:
                raise ConsistencyError(f"{path}: unknown pair_id {pid}")
            if pid in seen:
                raise ConsistencyError(f"pair_id {pid} listed in both {seen[pid]} and {role}")
            seen[pid] = role
            chosen.append(by_id[pid])
        members[role] = chosen
    if "train" not in members:
        members["train"] = [p for p in pairs if p.pair_id not in seen]
    return DatasetSplit(
        train=members["train"],
        validation=members.get("validation", []),
        test=members.get("test", []),
        mode="official",
    )
