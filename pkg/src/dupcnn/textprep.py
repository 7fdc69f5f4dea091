"""Text normalisation, tokenisation, spelling correction and vocabulary."""

from __future__ import annotations

import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Collection, Iterable, Mapping, Sequence

from .corpus_io import QuestionPair
from .errors import ConfigurationError, FormatError

MAX_LEN = 40
PAD = "<pad>"
OOV = "<unk>"
PAD_ID = 0
OOV_ID = 1

_NON_ALNUM = re.compile(r"[^a-z0-9]+")


def normalize(text: str) -> str:
    """Lowercase, replace every non-[a-z0-9] run with one space, trim."""
    return _NON_ALNUM.sub(" ", text.lower()).strip()


def tokenize(text: str) -> list[str]:
    return text.split()


def clip(seq: Sequence[str], max_len: int = MAX_LEN) -> list[str]:
    return list(seq[:max_len])


def levenshtein(a: str, b: str, limit: int | None = None) -> int:
    """Plain Levenshtein distance (no transpositions).

    With ``limit`` set, returns ``limit + 1`` as soon as the distance is known
    to exceed it.
    """
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if limit is not None and len(a) - len(b) > limit:
        return limit + 1
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        if limit is not None and min(cur) > limit:
            return limit + 1
        prev = cur
    return prev[-1]


def delete_variants(word: str, max_edit: int) -> set[str]:
    """All strings reachable from ``word`` by at most ``max_edit`` deletions (word included)."""
    out = {word}
    frontier = {word}
    for _ in range(max_edit):
        nxt = set()
        for w in frontier:
            for i in range(len(w)):
                nxt.add(w[:i] + w[i + 1 :])
        nxt -= out
        out |= nxt
        frontier = nxt
        if not frontier:
            break
    return out


@dataclass
class Suggestion:
    term: str
    distance: int
    frequency: int


class SpellIndex:
    """Symmetric-delete index over a term->frequency dictionary."""

    def __init__(self, dictionary: Mapping[str, int], max_edit: int = 2):
        if not dictionary:
            raise ConfigurationError("spell dictionary is empty")
        self.max_edit = max_edit
        self.dictionary = dict(dictionary)
        self.deletes: dict[str, list[str]] = defaultdict(list)
        for term in sorted(self.dictionary):
            for variant in delete_variants(term, max_edit):
                self.deletes[variant].append(term)
        self.deletes = dict(self.deletes)

    def candidates(self, query: str) -> set[str]:
        """Dictionary terms within ``max_edit`` Levenshtein edits of ``query``."""
        found = set()
        checked = set()
        for variant in delete_variants(query, self.max_edit):
            for term in self.deletes.get(variant, ()):
                if term in checked:
                    continue
                checked.add(term)
                if levenshtein(query, term, self.max_edit) <= self.max_edit:
                    found.add(term)
        return found

    def lookup(self, query: str) -> list[Suggestion]:
        """Candidates ranked by distance, then frequency (desc), then spelling."""
        sugg = [
            Suggestion(t, levenshtein(query, t), self.dictionary[t])
            for t in self.candidates(query)
        ]
        sugg.sort(key=lambda s: (s.distance, -s.frequency, s.term))
        return sugg


def build_spell_index(dictionary: Mapping[str, int], max_edit: int = 2) -> SpellIndex:
    return SpellIndex(dictionary, max_edit)


def segment(word: str, dictionary: Mapping[str, int]) -> list[str] | None:
    """Split ``word`` into >= 2 dictionary terms maximising summed log-frequency.

    Ties prefer fewer pieces, then the earliest split found. Returns ``None``
    when no split covers the whole word.
    """
    n = len(word)
    # best[i] = (score, -pieces, split_point) for prefix word[:i]
    best: list[tuple[float, int, int] | None] = [None] * (n + 1)
    best[0] = (0.0, 0, -1)
    for i in range(1, n + 1):
        for j in range(i):
            if best[j] is None:
                continue
            piece = word[j:i]
            if j == 0 and i == n:
                continue  # the whole word is not a segmentation
            freq = dictionary.get(piece)
            if not freq:
                continue
            score = best[j][0] + math.log(freq)
            pieces = best[j][1] - 1
            if best[i] is None or (score, pieces) > best[i][:2]:
                best[i] = (score, pieces, j)
    if best[n] is None:
        return None
    parts = []
    i = n
    while i > 0:
        j = best[i][2]
        parts.append(word[j:i])
        i = j
    return parts[::-1]


@dataclass
class PrepReport:
    corrected: int = 0
    segmented: int = 0
    kept_verbatim: int = 0
    rejected_pairs: int = 0
    rejected_ids: list[int] = field(default_factory=list)

    def to_text(self) -> str:
        return (
            f"corrected_tokens={self.corrected}\n"
            f"segmented_tokens={self.segmented}\n"
            f"kept_verbatim_tokens={self.kept_verbatim}\n"
            f"rejected_pairs={self.rejected_pairs}\n"
        )


def correct_token(
    token: str,
    known: Collection[str],
    index: SpellIndex,
    report: PrepReport | None = None,
) -> list[str]:
    """Known tokens pass through; others get the best correction, a segmentation, or stay as-is."""
    if token in known:
        return [token]
    suggestions = index.lookup(token)
    if suggestions:
        if report is not None:
            report.corrected += 1
        return [suggestions[0].term]
    parts = segment(token, index.dictionary)
    if parts:
        if report is not None:
            report.segmented += 1
        return parts
    if report is not None:
        report.kept_verbatim += 1
    return [token]


class Preprocessor:
    """normalize -> tokenize -> correct -> clip, with a per-token correction cache.

    Correction is skipped entirely when ``known``/``index`` are not given.
    """

    def __init__(
        self,
        known: Collection[str] | None = None,
        index: SpellIndex | None = None,
        max_len: int = MAX_LEN,
    ):
        self.known = known
        self.index = index
        self.max_len = max_len
        self.report = PrepReport()
        self._cache: dict[str, list[str]] = {}

    @property
    def spellcheck(self) -> bool:
        return self.known is not None and self.index is not None

    def _correct(self, token: str) -> list[str]:
        if token in self.known:
            return [token]
        cached = self._cache.get(token)
        if cached is None:
            cached = self._cache[token] = correct_token(token, self.known, self.index)
        # counted per occurrence, not per distinct token
        if len(cached) > 1:
            self.report.segmented += 1
        elif cached[0] != token:
            self.report.corrected += 1
        else:
            self.report.kept_verbatim += 1
        return cached

    def text(self, text: str) -> list[str]:
        tokens = tokenize(normalize(text))
        if self.spellcheck:
            tokens = [t for tok in tokens for t in self._correct(tok)]
        return clip(tokens, self.max_len)

    def pair(self, pair: QuestionPair) -> tuple[list[str], list[str]] | None:
        left, right = self.text(pair.text1), self.text(pair.text2)
        if not left or not right:
            self.report.rejected_pairs += 1
            self.report.rejected_ids.append(pair.pair_id)
            return None
        return left, right


def preprocess_pair(
    pair: QuestionPair,
    known: Collection[str] | None = None,
    index: SpellIndex | None = None,
) -> tuple[list[str], list[str]] | None:
    return Preprocessor(known, index).pair(pair)


class Vocabulary:
    """token <-> id map with counts; id 0 is padding, id 1 the OOV sentinel."""

    def __init__(self, counts: Mapping[str, int] | None = None):
        self.id_to_token: list[str] = [PAD, OOV]
        self.token_to_id: dict[str, int] = {PAD: PAD_ID, OOV: OOV_ID}
        self.counts: dict[str, int] = {}
        for tok, c in (counts or {}).items():
            self.add(tok, c)

    def add(self, token: str, count: int = 1) -> int:
        if token in (PAD, OOV):
            raise ValueError(f"{token!r} is reserved")
        idx = self.token_to_id.get(token)
        if idx is None:
            idx = len(self.id_to_token)
            self.token_to_id[token] = idx
            self.id_to_token.append(token)
            self.counts[token] = 0
        self.counts[token] += count
        return idx

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.counts

    def id(self, token: str) -> int:
        return self.token_to_id.get(token, OOV_ID)

    def ids(self, tokens: Iterable[str]) -> list[int]:
        return [self.token_to_id.get(t, OOV_ID) for t in tokens]

    def tokens(self) -> list[str]:
        """Non-reserved tokens in id order."""
        return self.id_to_token[2:]

    def save(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
            for tok in self.tokens():
                fh.write(f"{tok}\t{self.counts[tok]}\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        vocab = cls()
        with Path(path).open("r", encoding="utf-8") as fh:
            for line in fh:
                tok, _, count = line.rstrip("\n").partition("\t")
                if tok:
                    vocab.add(tok, int(count))
        return vocab


def build_vocabulary(corpus: Iterable[Sequence[str]]) -> Vocabulary:
    """Every distinct token gets an id >= 2, in first-seen order; no frequency cutoff."""
    vocab = Vocabulary()
    seen_any = False
    for seq in corpus:
        seen_any = True
        for tok in seq:
            vocab.add(tok)
    if not seen_any:
        raise ConfigurationError("cannot build a vocabulary from an empty corpus")
    return vocab


def build_correction_dictionary(
    pretrained_vocab: Iterable[str],
    corpus_counts: Mapping[str, int],
    include_absent: bool = False,
) -> dict[str, int]:
    """Pretrained terms weighted by corpus frequency.

    By default only pretrained terms seen in the corpus are kept; with
    ``include_absent`` the rest are added with frequency 1.
    """
    out = {}
    for term in pretrained_vocab:
        c = corpus_counts.get(term)
        if c:
            out[term] = c
        elif include_absent:
            out[term] = 1
    return out


def save_frequency_dictionary(dictionary: Mapping[str, int], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for term, count in sorted(dictionary.items(), key=lambda kv: (-kv[1], kv[0])):
            fh.write(f"{term} {count}\n")


def load_frequency_dictionary(path: str | Path) -> dict[str, int]:
    out = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise FormatError(f"{path}:{lineno}: expected 'term count'")
            out[parts[0]] = int(parts[1])
    return out


def corpus_counts(corpus: Iterable[Sequence[str]]) -> Counter:
    counts: Counter = Counter()
    for seq in corpus:
        counts.update(seq)
    return counts
