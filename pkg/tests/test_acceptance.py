"""Acceptance criteria, one test each, every test printing a PASS/FAIL line.

The lines are also collected and repeated in the pytest terminal summary.
Criterion 5 needs the full question-pair TSV (set DUPCNN_QUORA_TSV) and
criterion 6 is a long-running recipe documented in the README; both skip here.
"""

from __future__ import annotations

import os
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from dupcnn.checkpoint import Bundle, load_checkpoint, save_checkpoint
from dupcnn.corpus_io import load_tsv, write_tsv
from dupcnn.embeddings import NegativeSampler, SkipGramConfig, train_skipgram
from dupcnn.features import fit_tfidf, tfidf_score
from dupcnn.fixtures import planted_corpus
from dupcnn.gradchecks import MODEL_THRESHOLD, OP_THRESHOLD, run_checks
from dupcnn.model import ModelConfig
from dupcnn.tensorcore import chunked_max_pool, constant, global_max_pool, global_min_pool
from dupcnn.textprep import build_spell_index
from dupcnn.trainer import TrainConfig, TrainHistory, evaluate, train, train_step

from helpers import separable_fixture
from oracles import brute_force_candidates, tfidf_table

pytestmark = pytest.mark.acceptance


def report(number: int, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def skipped(number: int, reason: str) -> None:
    line = f"SKIP criterion {number}: {reason}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    pytest.skip(reason)


def test_criterion_1_gradient_integrity():
    started = time.perf_counter()
    outcomes = run_checks()
    elapsed = time.perf_counter() - started
    worst_op = max(o.result.max_rel_error for o in outcomes if o.name != "model")
    model = next(o for o in outcomes if o.name == "model")
    failed = [o.name for o in outcomes if not o.passed]
    ok = not failed and elapsed < 120.0
    report(
        1, ok,
        f"{len(outcomes)} checks, worst op err {worst_op:.2e} (< {OP_THRESHOLD:g}), "
        f"model err {model.result.max_rel_error:.2e} (< {MODEL_THRESHOLD:g}), "
        f"{elapsed:.1f}s (< 120s){', failed: ' + ','.join(failed) if failed else ''}",
    )
    assert ok


def _random_word(rng, alphabet, lo=3, hi=8):
    return "".join(rng.choice(list(alphabet), size=int(rng.integers(lo, hi + 1))))


def _mutate(word, rng, alphabet, edits):
    chars = list(word)
    for _ in range(edits):
        op = rng.integers(3) if chars else 0
        at = int(rng.integers(len(chars) + (op == 0)))
        if op == 0:
            chars.insert(at, str(rng.choice(list(alphabet))))
        elif op == 1:
            del chars[at]
        else:
            chars[at] = str(rng.choice(list(alphabet)))
    return "".join(chars)


def test_criterion_2_oracle_equivalence():
    rng = np.random.default_rng(2)
    alphabet = "abcdefgh"  # small alphabet: many near neighbours per query
    queries, mismatches, nonempty = 0, 0, 0
    for _ in range(2):
        terms = set()
        while len(terms) < 500:
            terms.add(_random_word(rng, alphabet))
        terms = sorted(terms)
        index = build_spell_index({t: int(rng.integers(1, 100)) for t in terms})
        for _ in range(500):
            base = terms[int(rng.integers(len(terms)))]
            query = _mutate(base, rng, alphabet, int(rng.integers(0, 4)))
            want = brute_force_candidates(query, terms)
            got = index.candidates(query)
            queries += 1
            mismatches += got != want
            nonempty += bool(want)
    docs = [[_random_word(rng, "abcdef", 1, 2) for _ in range(int(rng.integers(3, 12)))] for _ in range(20)]
    model = fit_tfidf(docs)
    worst = max(abs(tfidf_score(model, docs[i], t) - v) for (i, t), v in tfidf_table(docs).items())
    ok = mismatches == 0 and worst <= 1e-9
    report(
        2, ok,
        f"{queries} queries on 2x500-term dictionaries, {mismatches} candidate-set mismatches "
        f"({nonempty} non-empty); tfidf max abs err {worst:.1e} (<= 1e-9) on 20 docs",
    )
    assert ok


def test_criterion_3_pooling_identities():
    rng = np.random.default_rng(3)
    bad = 0
    for _ in range(1000):
        m, f = int(rng.integers(1, 30)), int(rng.integers(1, 30))
        c = rng.normal(size=(m, f)) * rng.choice([1e-3, 1.0, 1e3])
        bad += not np.array_equal(global_min_pool(constant(c)).data, -global_max_pool(constant(-c)).data)
        bad += chunked_max_pool(constant(c), 1).data[0] != c.max()
    ok = bad == 0
    report(3, ok, f"1000 random matrices, {bad} violations (exact)")
    assert ok


def test_criterion_4_overfit_convergence():
    fx = separable_fixture(64, filter_widths=(2, 3, 4, 6, 8), filters=200, dim=300,
                           n_question=40, n_unique=40, n_keyword=10, dropout=0.1)
    model = fx.model()
    cfg = TrainConfig()
    rng = np.random.default_rng(cfg.seed)
    started = time.perf_counter()
    acc, epoch = 0.0, 0
    for epoch in range(1, 51):
        order = rng.permutation(len(fx.pairs))
        for lo in range(0, len(order), cfg.batch_size):
            train_step(model, [fx.pairs[i] for i in order[lo : lo + cfg.batch_size]], cfg, cfg.lr, rng)
        acc = evaluate(model, fx.pairs).accuracy
        if acc == 1.0:
            break
    elapsed = time.perf_counter() - started
    ok = acc == 1.0 and elapsed < 300.0
    report(4, ok, f"64-pair fixture, default architecture: train accuracy {acc:.4f} at epoch {epoch} (<= 50), {elapsed:.1f}s (< 300s)")
    assert ok


@pytest.mark.slow
def test_criterion_5_desk_scale_learning(tmp_path):
    source = os.environ.get("DUPCNN_QUORA_TSV")
    if not source:
        skipped(5, "set DUPCNN_QUORA_TSV to the question-pair TSV to run the 50,000-pair experiment")
    from dupcnn.cli import main

    pairs, _ = load_tsv(source)
    rng = np.random.default_rng(0)
    subset = [pairs[i] for i in sorted(rng.choice(len(pairs), size=min(50_000, len(pairs)), replace=False))]
    data = tmp_path / "subset.tsv"
    write_tsv(subset, data)
    run_dir = tmp_path / "run"
    prepare = ["--run-dir", str(run_dir), "prepare", str(data), "--val-n", "5000", "--test-n", "0"]
    if os.environ.get("DUPCNN_VECTORS"):
        prepare += ["--vectors", os.environ["DUPCNN_VECTORS"]]
    assert main(prepare) == 0
    assert main(["--run-dir", str(run_dir), "embed"]) == 0
    assert main(["--run-dir", str(run_dir), "train"]) == 0
    rows = TrainHistory.read_csv(run_dir / "train" / "history.csv")
    best = max(float(r["val_acc"]) for r in rows)
    val, _ = load_tsv(run_dir / "prepare" / "validation.tsv")
    majority = max(np.mean([p.label for p in val]), 1 - np.mean([p.label for p in val]))
    floor = float(os.environ.get("DUPCNN_DESK_FLOOR", "0"))
    ok = best >= majority + 0.08 and best >= floor
    report(5, ok, f"best validation accuracy {best:.4f}, majority baseline {majority:.4f}, margin {best - majority:+.4f} (>= +0.08), floor {floor:.4f}")
    assert ok


def test_criterion_6_full_scale_stretch():
    skipped(6, "optional full-corpus reproduction; recipe in README (not gating)")


def test_criterion_7_determinism(tmp_path):
    fx = separable_fixture(48, dropout=0.2)
    csvs = []
    for run in range(2):
        model = fx.model(seed=7)
        _, history = train(model, fx.pairs[:32], fx.pairs[32:], TrainConfig(batch_size=8, lr=0.01, max_epochs=4, seed=7))
        history.write_csv(tmp_path / f"h{run}.csv")
        rows = TrainHistory.read_csv(tmp_path / f"h{run}.csv")
        csvs.append([{k: v for k, v in r.items() if k != "seconds"} for r in rows])
    same_history = csvs[0] == csvs[1]
    path = tmp_path / "m.ckpt"
    save_checkpoint(Bundle(model, fx.vocab, fx.tfidf), path)
    back = load_checkpoint(path).model
    before = model.forward(fx.pairs).logits.data
    after = back.forward(fx.pairs).logits.data
    bitwise = before.tobytes() == after.tobytes()
    ok = same_history and bitwise
    report(7, ok, f"history CSVs identical across two seeded runs: {same_history} ({len(csvs[0])} epochs, seconds column excluded); checkpoint forward bitwise identical: {bitwise}")
    assert ok


def test_criterion_8_architecture_arithmetic():
    default_size = ModelConfig().similarity_size
    fx = separable_fixture(64, filter_widths=(2, 3, 4, 6, 8), n_keyword=10)
    model = fx.model()
    sim_len = model.forward(fx.pairs[:2]).similarity.shape[1]
    n_lambda = len(model.lambda_parameters())
    frozen = model.keyword_embedding.data.copy()
    trainable = model.embedding.data.copy()
    cfg = TrainConfig(batch_size=8, lr=0.01)
    rng = np.random.default_rng(0)
    for step in range(100):
        lo = (step * 8) % len(fx.pairs)
        train_step(model, fx.pairs[lo : lo + 8], cfg, cfg.lr, rng, step)
    unchanged = model.keyword_embedding.data.tobytes() == frozen.tobytes()
    moved = not np.array_equal(model.embedding.data, trainable)
    ok = default_size == 90 and sim_len == 90 and n_lambda == 90 and unchanged and moved
    report(8, ok, f"similarity length {sim_len} (default config {default_size}), lambda count {n_lambda}; keyword table bitwise unchanged after 100 steps: {unchanged} (trainable table moved: {moved})")
    assert ok


def test_criterion_9_skipgram_sanity():
    wins = 0
    for seed in range(10):
        cfg = SkipGramConfig(dim=16, window=2, negatives=3, epochs=5, seed=seed)
        table = train_skipgram(planted_corpus(seed=seed), cfg)
        wins += table.cosine("alpha", "beta") > table.cosine("alpha", "gamma")
    counts = {}
    for sentence in planted_corpus():
        for tok in sentence:
            counts[tok] = counts.get(tok, 0) + 1
    weights = np.array(list(counts.values()), dtype=np.float64)
    sampler = NegativeSampler(weights)
    want = weights**0.75 / (weights**0.75).sum()
    draws = sampler.draw(10_000_000, seed=9)
    freq = np.bincount(draws, minlength=len(weights)) / draws.size
    worst = float(np.max(np.abs(freq - want) / want))
    ok = wins >= 9 and worst < 0.01
    report(9, ok, f"cos(alpha,beta) > cos(alpha,gamma) in {wins}/10 seeds (>= 9); sampler max relative deviation {worst:.4f} (< 0.01) over {len(weights)} words")
    assert ok
