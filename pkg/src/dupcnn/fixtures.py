"""Small synthetic corpora used by tests, the gradient checker and smoke runs."""

from __future__ import annotations

import numpy as np

from .corpus_io import QuestionPair


def separable_pairs(n: int = 64, vocab_size: int = 120, seed: int = 0) -> list[QuestionPair]:
    """Half duplicates (identical questions), half non-duplicates with disjoint words."""
    rng = np.random.default_rng(seed)
    words = [f"w{i}" for i in range(vocab_size)]
    pairs = []
    for i in range(n):
        length = int(rng.integers(5, 11))
        q1 = list(rng.choice(words, size=length, replace=False))
        if i % 2 == 0:
            q2, label = list(q1), 1
        else:
            pool = [w for w in words if w not in set(q1)]
            q2, label = list(rng.choice(pool, size=int(rng.integers(5, 11)), replace=False)), 0
        pairs.append(QuestionPair(i + 1, 2 * i + 1, 2 * i + 2, " ".join(q1) + "?", " ".join(q2) + "?", label))
    return pairs


def planted_corpus(n_sentences: int = 400, seed: int = 0) -> list[list[str]]:
    """Sentences where "alpha" always appears next to "beta" and never with "gamma".

    Half the sentences mix alpha and beta with fillers from one pool, the other
    half put gamma among fillers from a disjoint pool.
    """
    rng = np.random.default_rng(seed)
    pool_a = [f"a{i}" for i in range(20)]
    pool_g = [f"g{i}" for i in range(20)]
    out = []
    for i in range(n_sentences):
        if i % 2 == 0:
            words = list(rng.choice(pool_a, size=4, replace=False))
            at = int(rng.integers(0, 5))
            words[at:at] = ["alpha", "beta"] if rng.random() < 0.5 else ["beta", "alpha"]
        else:
            words = list(rng.choice(pool_g, size=5, replace=False))
            words.insert(int(rng.integers(0, 6)), "gamma")
        out.append([str(w) for w in words])
    return out
