from __future__ import annotations

import json
import subprocess
import sys

import numpy as np
import pytest

from dupcnn.cli import main, read_resolved_config
from dupcnn.corpus_io import QuestionPair, write_tsv
from dupcnn.embeddings import EmbeddingTable, load_table
from dupcnn.fixtures import separable_pairs
from dupcnn.trainer import TrainHistory

SMALL_TRAIN = [
    "--widths", "2,3", "--filters", "4", "--max-len", "12", "--n-keyword", "6",
    "--max-epochs", "2", "--batch-size", "16", "--dropout", "0",
]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """prepare -> embed -> train on the separable fixture, shared by the module."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "pairs.tsv"
    write_tsv(separable_pairs(48), data)
    run_dir = root / "run"
    assert main(["--run-dir", str(run_dir), "prepare", str(data), "--val-n", "8", "--test-n", "8"]) == 0
    assert main(["--run-dir", str(run_dir), "embed", "--dim", "8", "--epochs", "2", "--window", "2"]) == 0
    assert main(["--run-dir", str(run_dir), "train", *SMALL_TRAIN]) == 0
    return root, run_dir, data


class TestPrepare:
    def test_outputs_and_report(self, pipeline):
        _, run_dir, _ = pipeline
        prep = run_dir / "prepare"
        for name in ("pairs.tsv", "vocab.txt", "tfidf.txt", "report.txt", "resolved-config.txt", "prep.json"):
            assert (prep / name).is_file()
        report = (prep / "report.txt").read_text()
        assert "train_pairs=32" in report and "validation_pairs=8" in report
        assert "corrected_tokens=0" in report and "segmented_tokens=0" in report
        cfg = read_resolved_config(prep / "resolved-config.txt")
        assert cfg["spellcheck"] == "False" and cfg["max_edit"] == "2"
        manifest = json.loads((run_dir / "manifest.json").read_text())
        assert {"prepare", "embed", "train"} <= set(manifest["stages"])

    def test_spellcheck_with_dictionary(self, tmp_path, capsys):
        data = tmp_path / "d.tsv"
        pairs = [QuestionPair(i, 2 * i, 2 * i + 1, "helo wrld", "hello world", i % 2) for i in range(1, 7)]
        write_tsv(pairs, data)
        (tmp_path / "dict.txt").write_text("hello 10\nworld 8\n")
        code, out, _ = run(capsys, "--run-dir", tmp_path / "r", "prepare", data, "--dictionary", tmp_path / "dict.txt",
                           "--val-n", "1", "--test-n", "1")
        assert code == 0 and "corrected_tokens=12" in out  # two per pair, six pairs
        code, out, _ = run(capsys, "--run-dir", tmp_path / "r2", "prepare", data, "--dictionary", tmp_path / "dict.txt",
                           "--no-spellcheck", "--val-n", "1", "--test-n", "1")
        assert code == 0 and "corrected_tokens=0" in out

    def test_missing_input(self, tmp_path, capsys):
        code, _, err = run(capsys, "--run-dir", tmp_path / "r", "prepare", tmp_path / "nope.tsv")
        assert code != 0 and err.startswith("error: ")
        assert not (tmp_path / "r" / "prepare").exists()


class TestEmbed:
    def test_skipgram_table(self, pipeline):
        _, run_dir, _ = pipeline
        table = load_table(run_dir / "embed" / "embeddings.bin")
        assert table.dim == 8
        assert (run_dir / "embed" / "losses.txt").read_text().count("\n") == 2

    @pytest.mark.parametrize("mode", ["pretrained", "pretrained+tfidf"])
    def test_pretrained_modes(self, pipeline, tmp_path, capsys, mode):
        _, run_dir, _ = pipeline
        words = [l.split("\t")[0] for l in (run_dir / "prepare" / "vocab.txt").read_text().splitlines()]
        vectors = tmp_path / "v.txt"
        EmbeddingTable(words, np.random.default_rng(0).normal(size=(len(words), 5))).save_text(vectors)
        out_dir = tmp_path / "run"
        (out_dir).mkdir()
        (out_dir / "prepare").symlink_to(run_dir / "prepare")
        code, out, _ = run(capsys, "--run-dir", out_dir, "embed", "--mode", mode, "--vectors", vectors)
        assert code == 0 and "dim=5" in out
        assert load_table(out_dir / "embed" / "embeddings.bin").dim == 5

    def test_pretrained_needs_vectors(self, pipeline, capsys):
        _, run_dir, _ = pipeline
        code, _, err = run(capsys, "--run-dir", run_dir, "embed", "--mode", "pretrained")
        assert code == 1 and "--vectors" in err


class TestTrain:
    def test_resolved_defaults(self, pipeline):
        _, run_dir, _ = pipeline
        cfg = read_resolved_config(run_dir / "train" / "resolved-config.txt")
        assert cfg["train.batch_size"] == "16"
        assert cfg["train.lr"] == "0.001" and cfg["train.decay_factor"] == "0.1"
        assert cfg["train.decay_period_epochs"] == "2" and cfg["train.early_stop_patience_epochs"] == "3"
        assert cfg["model.bn_momentum"] == "0.7" and cfg["precision"] == "float64"

    def test_documented_defaults_in_parser(self):
        from dupcnn.cli import build_parser

        args = build_parser().parse_args(["train"])
        assert (args.batch_size, args.lr, args.decay_every, args.patience) == (64, 0.001, 2, 3)
        assert args.widths == (2, 3, 4, 6, 8) and args.filters == 200 and args.dropout == 0.1

    def test_same_seed_same_history(self, pipeline, tmp_path):
        _, run_dir, _ = pipeline
        histories = []
        for i in range(2):
            out = tmp_path / f"r{i}"
            out.mkdir()
            (out / "prepare").symlink_to(run_dir / "prepare")
            (out / "embed").symlink_to(run_dir / "embed")
            assert main(["--run-dir", str(out), "train", *SMALL_TRAIN, "--dropout", "0.2", "--seed", "7"]) == 0
            rows = TrainHistory.read_csv(out / "train" / "history.csv")
            histories.append([{k: v for k, v in r.items() if k != "seconds"} for r in rows])
            ckpt = (out / "train" / "model.ckpt").read_bytes()
            histories.append(ckpt)
        assert histories[0] == histories[2]
        assert histories[1] == histories[3]

    def test_missing_embeddings(self, pipeline, tmp_path, capsys):
        _, run_dir, _ = pipeline
        code, _, err = run(capsys, "--run-dir", run_dir, "train", "--embeddings", tmp_path / "none.bin")
        assert code == 1 and err.startswith("error: config")


class TestInference:
    def test_eval_output(self, pipeline, capsys, tmp_path):
        _, run_dir, data = pipeline
        preds = tmp_path / "preds.tsv"
        code, out, _ = run(capsys, "--run-dir", run_dir, "eval", run_dir / "prepare" / "test.tsv", "--predictions", preds)
        assert code == 0
        lines = dict(l.split("=") for l in out.splitlines())
        assert len(lines["accuracy"].split(".")[1]) == 4
        counts = [int(lines[k]) for k in ("TP", "FP", "TN", "FN")]
        assert sum(counts) == int(lines["total"]) == 8
        assert float(lines["accuracy"]) == pytest.approx((counts[0] + counts[2]) / 8, abs=5e-5)
        assert preds.read_text().count("\n") == 9

    def test_eval_missing_checkpoint(self, pipeline, tmp_path, capsys):
        _, run_dir, data = pipeline
        code, _, err = run(capsys, "--run-dir", run_dir, "eval", data, "--checkpoint", tmp_path / "x.ckpt")
        assert code != 0 and "x.ckpt" in err

    def test_predict_format(self, pipeline, capsys):
        _, run_dir, _ = pipeline
        code, out, _ = run(capsys, "--run-dir", run_dir, "predict", "w1 w2 w3?", "w1 w2 w3?")
        assert code == 0
        label, prob = out.strip().split(" ")
        assert label in ("label=0", "label=1")
        assert 0.5 <= float(prob.removeprefix("p=")) <= 1.0

    def test_predict_empty(self, pipeline, capsys):
        _, run_dir, _ = pipeline
        code, _, err = run(capsys, "--run-dir", run_dir, "predict", "", "what?")
        assert code == 2 and err.startswith("error: usage:")


class TestGradcheck:
    def test_single_op(self, tmp_path, capsys):
        code, out, _ = run(capsys, "--run-dir", tmp_path, "gradcheck", "--op", "cosine")
        assert code == 0
        lines = out.strip().splitlines()
        assert len(lines) == 1 and lines[0].startswith("PASS cosine")
        assert (tmp_path / "gradcheck" / "results.txt").read_text().strip() == lines[0]

    def test_injected_fault(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "dupcnn.cli", "--run-dir", str(tmp_path), "gradcheck",
             "--op", "concat", "--op", "affine", "--inject-fault", "affine"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 1
        assert "FAIL affine" in proc.stdout and "PASS concat" in proc.stdout
        err = proc.stderr.strip().splitlines()
        assert len(err) == 1 and err[0].startswith("error: gradcheck:") and "affine" in err[0]

    def test_unknown_op_is_usage_error(self, tmp_path, capsys):
        code, _, err = run(capsys, "--run-dir", tmp_path, "gradcheck", "--op", "nope")
        assert code == 2 and len(err.strip().splitlines()) == 1
