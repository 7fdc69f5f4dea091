"""Command-line entry point: prepare, embed, train, eval, predict, gradcheck.

Every command works inside one run directory (``--run-dir``, default taken from
``DUPCNN_RUN_DIR`` or ``./run``). Each stage writes its artifacts to a
subdirectory together with a ``resolved-config.txt`` of effective settings, and
``manifest.json`` at the run root records what every stage read and wrote.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import shutil
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .checkpoint import Bundle, load_checkpoint, save_checkpoint
from .corpus_io import DatasetSplit, load_tsv, partition, write_tsv
from .embeddings import (
    EmbeddingTable,
    SkipGramConfig,
    SubwordConfig,
    load_pretrained,
    load_table,
    train_skipgram,
    train_subword,
)
from .errors import ConfigurationError, ConsistencyError, DupCNNError
from .features import TfIdfModel, fit_tfidf, weighted_embedding_table
from .gradchecks import CHECKS, run_checks
from .model import DuplicateModel, ModelConfig, build_embedding_matrix, encode_pair, predicted_label
from .textprep import (
    MAX_LEN,
    OOV,
    Preprocessor,
    Vocabulary,
    build_correction_dictionary,
    build_spell_index,
    build_vocabulary,
    corpus_counts,
    load_frequency_dictionary,
    normalize,
    save_frequency_dictionary,
    tokenize,
)
from .trainer import TrainConfig, evaluate, restore, train

RUN_DIR_ENV = "DUPCNN_RUN_DIR"
FAULT_ENV = "DUPCNN_GRADCHECK_FAULT"
EMBED_MODES = ("skipgram", "subword", "pretrained", "pretrained+tfidf")
SPLITS = ("train", "validation", "test")

LOGGER = logging.getLogger("dupcnn")


class UsageError(DupCNNError):
    code = "usage"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # keep usage failures to one parsable line
        raise UsageError(message)


# -- run directory helpers -----------------------------------------------------


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_resolved_config(path: Path, settings: dict) -> None:
    lines = []
    for key in sorted(settings):
        value = settings[key]
        if isinstance(value, (list, tuple)):
            value = ",".join(map(str, value))
        lines.append(f"{key}={value}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_resolved_config(path: Path) -> dict[str, str]:
    out = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        key, _, value = line.partition("=")
        out[key] = value
    return out


def update_manifest(run_dir: Path, stage: str, inputs: dict, outputs: dict) -> None:
    path = run_dir / "manifest.json"
    manifest = json.loads(path.read_text(encoding="utf-8")) if path.exists() else {"version": __version__, "stages": {}}
    manifest["stages"][stage] = {
        "inputs": {k: str(v) for k, v in inputs.items()},
        "outputs": {name: sha256_file(p) for name, p in outputs.items() if Path(p).is_file()},
    }
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    tmp.replace(path)


def _staging(final: Path) -> Path:
    """Fresh sibling directory that is renamed over ``final`` once a stage succeeds."""
    tmp = final.with_name("." + final.name + ".partial")
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir(parents=True)
    return tmp


def _commit(tmp: Path, final: Path) -> None:
    if final.exists():
        shutil.rmtree(final)
    tmp.rename(final)


def _require_file(path: Path, what: str) -> Path:
    if not path.is_file():
        raise ConfigurationError(f"{what} not found: {path}")
    return path


def _csv_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


# -- prepared corpus -----------------------------------------------------------


def write_prepared(path: Path, rows: list[tuple[int, str, int, list[str], list[str]]]) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("id\tsplit\tlabel\ttokens1\ttokens2\n")
        for pair_id, split, label, t1, t2 in rows:
            fh.write(f"{pair_id}\t{split}\t{label}\t{' '.join(t1)}\t{' '.join(t2)}\n")


def read_prepared(path: Path) -> dict[str, list[tuple[int, int, list[str], list[str]]]]:
    out: dict[str, list] = {s: [] for s in SPLITS}
    with path.open("r", encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            pair_id, split, label, t1, t2 = line.rstrip("\n").split("\t")
            out[split].append((int(pair_id), int(label), t1.split(), t2.split()))
    return out


def preprocessor_from(prep: dict) -> Preprocessor:
    """Rebuild the preprocessing used at prepare time (spellcheck dictionary included)."""
    max_len = int(prep.get("max_len", MAX_LEN))
    if not prep.get("spellcheck"):
        return Preprocessor(max_len=max_len)
    path = Path(prep["dictionary"])
    if not path.is_file() or sha256_file(path) != prep.get("dictionary_sha256"):
        raise ConsistencyError(f"correction dictionary {path} is missing or differs from the one used at prepare time")
    dictionary = load_frequency_dictionary(path)
    return Preprocessor(set(dictionary), build_spell_index(dictionary), max_len)


def cmd_prepare(args) -> int:
    run_dir = Path(args.run_dir)
    data = _require_file(Path(args.data), "dataset")
    final = run_dir / "prepare"
    run_dir.mkdir(parents=True, exist_ok=True)
    pairs, load_report = load_tsv(data)
    part_files = {k: v for k, v in (("train", args.train_ids), ("validation", args.val_ids), ("test", args.test_ids)) if v}
    split: DatasetSplit = partition(pairs, args.val_n, args.test_n, args.seed, part_files or None)
    raw_tokens = [tokenize(normalize(t)) for p in pairs for t in (p.text1, p.text2)]
    counts = corpus_counts(raw_tokens)

    tmp = _staging(final)
    try:
        dictionary_path = None
        # correction needs a known-word list: pretrained vectors or an explicit dictionary
        spellcheck = not args.no_spellcheck and bool(args.vectors or args.dictionary)
        if not spellcheck:
            prep = Preprocessor(max_len=args.max_len)
            dictionary_source = "none"
        else:
            if args.dictionary:
                dictionary = load_frequency_dictionary(_require_file(Path(args.dictionary), "dictionary"))
                dictionary_source = f"file:{args.dictionary}"
            else:
                table, _ = load_pretrained(_require_file(Path(args.vectors), "vectors"))
                dictionary = build_correction_dictionary(table.tokens, counts, include_absent=True)
                dictionary_source = f"vectors:{args.vectors}"
            if not dictionary:
                raise ConfigurationError("correction dictionary is empty; pass --no-spellcheck or a dictionary")
            dictionary_path = tmp / "dictionary.txt"
            save_frequency_dictionary(dictionary, dictionary_path)
            prep = Preprocessor(set(dictionary), build_spell_index(dictionary, args.max_edit), args.max_len)

        rows = []
        for name in SPLITS:
            for p in getattr(split, name):
                done = prep.pair(p)
                if done is not None:
                    rows.append((p.pair_id, name, p.label, done[0], done[1]))
        kept = {s: sum(r[1] == s for r in rows) for s in SPLITS}
        if kept["train"] == 0:
            raise ConfigurationError("no training pairs left after preprocessing")
        corpus = [toks for r in rows for toks in (r[3], r[4])]
        vocab = build_vocabulary(corpus)
        tfidf = fit_tfidf(corpus)

        write_prepared(tmp / "pairs.tsv", rows)
        vocab.save(tmp / "vocab.txt")
        tfidf.save(tmp / "tfidf.txt")
        for name in SPLITS:
            write_tsv(getattr(split, name), tmp / f"{name}.tsv")
        report = (
            load_report.to_text()
            + prep.report.to_text()
            + "".join(f"{s}_pairs={kept[s]}\n" for s in SPLITS)
            + f"vocab_size={len(vocab)}\nsplit_mode={split.mode}\n"
        )
        (tmp / "report.txt").write_text(report, encoding="utf-8")
        settings = {
            "data": data.resolve(),
            "dictionary_source": dictionary_source,
            "max_edit": args.max_edit,
            "max_len": args.max_len,
            "seed": args.seed,
            "spellcheck": spellcheck,
            "split_mode": split.mode,
            "test_n": args.test_n,
            "val_n": args.val_n,
        }
        write_resolved_config(tmp / "resolved-config.txt", settings)
        prep_meta = {"spellcheck": spellcheck, "max_len": args.max_len}
        if dictionary_path is not None:
            prep_meta["dictionary"] = str((final / "dictionary.txt").resolve())
            prep_meta["dictionary_sha256"] = sha256_file(dictionary_path)
        (tmp / "prep.json").write_text(json.dumps(prep_meta, sort_keys=True) + "\n", encoding="utf-8")
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    _commit(tmp, final)
    update_manifest(run_dir, "prepare", {"data": data.resolve()}, {p.name: p for p in final.iterdir()})
    sys.stdout.write(report)
    return 0


# -- embeddings ----------------------------------------------------------------


def cmd_embed(args) -> int:
    run_dir = Path(args.run_dir)
    prep_dir = run_dir / "prepare"
    pairs_path = _require_file(prep_dir / "pairs.tsv", "prepared corpus (run `prepare` first)")
    vocab = Vocabulary.load(prep_dir / "vocab.txt")
    settings = {"mode": args.mode, "seed": args.seed}
    if args.mode in ("skipgram", "subword"):
        prepared = read_prepared(pairs_path)
        sentences = [toks for s in SPLITS for r in prepared[s] for toks in (r[2], r[3])]
        sub = SubwordConfig(args.min_n, args.max_n, args.buckets) if args.mode == "subword" else None
        cfg = SkipGramConfig(
            dim=args.dim, window=args.window, negatives=args.negatives, epochs=args.epochs,
            initial_lr=args.lr, subword=sub, seed=args.seed,
        )
        cfg.validate()
        table = train_subword(sentences, cfg) if sub else train_skipgram(sentences, cfg)
        settings.update(dim=args.dim, window=args.window, negatives=args.negatives, epochs=args.epochs, lr=args.lr)
        if sub:
            settings.update(min_n=args.min_n, max_n=args.max_n, buckets=args.buckets)
    else:
        if not args.vectors:
            raise ConfigurationError(f"--mode {args.mode} needs --vectors")
        table, vec_report = load_pretrained(_require_file(Path(args.vectors), "vectors"))
        settings["vectors"] = Path(args.vectors).resolve()
        settings["vectors_skipped_rows"] = vec_report.skipped
        if args.mode == "pretrained+tfidf":
            table = weighted_embedding_table(table, TfIdfModel.load(prep_dir / "tfidf.txt"), vocab)
    # restrict to the corpus vocabulary so downstream files stay small
    tokens = [OOV] + vocab.tokens()
    restricted = EmbeddingTable(tokens, np.stack([table.lookup(t) for t in tokens]))
    restricted.epoch_losses = list(getattr(table, "epoch_losses", []) or [])
    settings["dim_out"] = restricted.dim

    final = run_dir / "embed"
    tmp = _staging(final)
    try:
        restricted.save_binary(tmp / "embeddings.bin")
        if restricted.epoch_losses:
            (tmp / "losses.txt").write_text("".join(f"{i + 1}\t{v!r}\n" for i, v in enumerate(restricted.epoch_losses)))
        write_resolved_config(tmp / "resolved-config.txt", settings)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    _commit(tmp, final)
    update_manifest(run_dir, "embed", {"corpus": pairs_path.resolve()}, {p.name: p for p in final.iterdir()})
    print(f"embeddings={final / 'embeddings.bin'} rows={len(tokens)} dim={restricted.dim}")
    return 0


# -- training ------------------------------------------------------------------


def _model_config(args, dim: int) -> ModelConfig:
    return ModelConfig(
        filter_widths=args.widths, filters=args.filters, dim=dim, n_question=args.max_len,
        n_unique=args.max_len, n_keyword=args.n_keyword, chunks=args.chunks, chunk_mode=args.chunk_mode,
        shared_conv=args.shared_conv, lambda_mode=args.lambda_mode, dropout=args.dropout,
        bn_momentum=args.bn_momentum,
    )


def cmd_train(args) -> int:
    run_dir = Path(args.run_dir)
    prep_dir = run_dir / "prepare"
    pairs_path = _require_file(prep_dir / "pairs.tsv", "prepared corpus (run `prepare` first)")
    emb_path = _require_file(Path(args.embeddings) if args.embeddings else run_dir / "embed" / "embeddings.bin", "embeddings")
    vocab = Vocabulary.load(prep_dir / "vocab.txt")
    tfidf = TfIdfModel.load(prep_dir / "tfidf.txt")
    prep_meta = json.loads((prep_dir / "prep.json").read_text(encoding="utf-8"))
    table = load_table(emb_path)
    mcfg = _model_config(args, table.dim)
    tcfg = TrainConfig(
        batch_size=args.batch_size, lr=args.lr, beta1=args.beta1, beta2=args.beta2, eps=args.eps,
        decay_factor=args.decay_factor, decay_period_epochs=args.decay_every,
        early_stop_patience_epochs=args.patience, max_epochs=args.max_epochs, seed=args.seed,
    )
    tcfg.validate()
    prepared = read_prepared(pairs_path)
    encoded = {
        s: [encode_pair(t1, t2, vocab, tfidf, mcfg, label) for _, label, t1, t2 in prepared[s]] for s in SPLITS
    }
    if not encoded["validation"]:
        raise ConfigurationError("the prepared corpus has no validation pairs")
    model = DuplicateModel(mcfg, build_embedding_matrix(table, vocab), seed=args.seed)

    def report(rec):
        print(
            f"epoch={rec.epoch} train_loss={rec.train_loss:.4f} val_loss={rec.val_loss:.4f} "
            f"val_acc={rec.val_acc:.4f} lr={rec.lr:g}",
            flush=True,
        )

    best, history = train(model, encoded["train"], encoded["validation"], tcfg, on_epoch=report)
    restore(model, best)
    settings = {f"model.{k}": v for k, v in mcfg.to_dict().items()}
    settings.update({f"train.{k}": v for k, v in vars(tcfg).items()})
    settings.update(embeddings=emb_path.resolve(), precision=args.precision)

    final = run_dir / "train"
    tmp = _staging(final)
    try:
        bundle = Bundle(
            model=model, vocab=vocab, tfidf=tfidf, prep=prep_meta, train_config=vars(tcfg).copy(),
            meta={"best_epoch": best.epoch, "best_val_acc": best.val_acc, "epochs_run": len(history.epochs)},
            rng_state=best.rng_state,
        )
        save_checkpoint(bundle, tmp / "model.ckpt", precision=args.precision)
        history.write_csv(tmp / "history.csv")
        write_resolved_config(tmp / "resolved-config.txt", settings)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    _commit(tmp, final)
    update_manifest(
        run_dir, "train", {"corpus": pairs_path.resolve(), "embeddings": emb_path.resolve()},
        {p.name: p for p in final.iterdir()},
    )
    print(f"best_epoch={best.epoch} best_val_acc={best.val_acc:.4f} checkpoint={final / 'model.ckpt'}")
    return 0


# -- inference -----------------------------------------------------------------


def _load_bundle(args) -> tuple[Bundle, Path]:
    path = Path(args.checkpoint) if args.checkpoint else Path(args.run_dir) / "train" / "model.ckpt"
    return load_checkpoint(_require_file(path, "checkpoint")), path


def _stage_config(run_dir: Path, stage: str, settings: dict) -> None:
    out = run_dir / stage
    out.mkdir(parents=True, exist_ok=True)
    write_resolved_config(out / "resolved-config.txt", settings)


def cmd_eval(args) -> int:
    bundle, ckpt = _load_bundle(args)
    pairs, _ = load_tsv(_require_file(Path(args.pairs), "pairs file"))
    prep = preprocessor_from(bundle.prep)
    cfg = bundle.model.cfg
    encoded, kept = [], []
    for p in pairs:
        done = prep.pair(p)
        if done is not None:
            encoded.append(encode_pair(done[0], done[1], bundle.vocab, bundle.tfidf, cfg, p.label))
            kept.append(p)
    if not encoded:
        raise ConfigurationError("no pairs left to evaluate after preprocessing")
    result = evaluate(bundle.model, encoded)
    if args.predictions:
        with Path(args.predictions).open("w", encoding="utf-8", newline="\n") as fh:
            fh.write("id\tlabel\tpredicted\tp_duplicate\n")
            for p, pred, prob in zip(kept, result.predictions, result.probs[:, 1]):
                fh.write(f"{p.pair_id}\t{p.label}\t{int(pred)}\t{float(prob)!r}\n")
    _stage_config(Path(args.run_dir), "eval", {
        "checkpoint": ckpt.resolve(), "pairs": Path(args.pairs).resolve(),
        "predictions": args.predictions or "", "rejected_pairs": prep.report.rejected_pairs,
    })
    sys.stdout.write(result.to_text())
    return 0


def cmd_predict(args) -> int:
    if not args.q1.strip() or not args.q2.strip():
        raise UsageError("both questions must be non-empty")
    bundle, ckpt = _load_bundle(args)
    prep = preprocessor_from(bundle.prep)
    t1, t2 = prep.text(args.q1), prep.text(args.q2)
    if not t1 or not t2:
        raise UsageError("a question has no tokens after preprocessing")
    pair = encode_pair(t1, t2, bundle.vocab, bundle.tfidf, bundle.model.cfg)
    probs = bundle.model.predict_proba([pair])[0]
    label = predicted_label(probs)
    _stage_config(Path(args.run_dir), "predict", {"checkpoint": ckpt.resolve()})
    print(f"label={label} p={probs[label]:.6f}")
    return 0


def cmd_gradcheck(args) -> int:
    names = args.op or list(CHECKS)
    fault = args.inject_fault or os.environ.get(FAULT_ENV) or None
    outcomes = run_checks(names, seed=args.seed, inject_fault=fault)
    for o in outcomes:
        print(o.line(), flush=True)
    run_dir = Path(args.run_dir)
    _stage_config(run_dir, "gradcheck", {"ops": names, "seed": args.seed, "step": 1e-5})
    (run_dir / "gradcheck" / "results.txt").write_text("".join(o.line() + "\n" for o in outcomes), encoding="utf-8")
    failed = [o.name for o in outcomes if not o.passed]
    if failed:
        raise GradCheckFailed(f"gradient check failed for: {','.join(failed)}")
    return 0


class GradCheckFailed(DupCNNError):
    code = "gradcheck"


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dupcnn", description="Duplicate-question detection with a multi-input text CNN.")
    parser.add_argument("--version", action="version", version=f"dupcnn {__version__}")
    parser.add_argument("--run-dir", default=os.environ.get(RUN_DIR_ENV, "run"),
                        help=f"artifact directory (default: ${RUN_DIR_ENV} or ./run)")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    # also accepted after the subcommand name
    common = _Parser(add_help=False)
    common.add_argument("--run-dir", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prepare", parents=[common], help="load, split, clean and index a question-pair TSV")
    p.add_argument("data")
    p.add_argument("--no-spellcheck", action="store_true",
                   help="skip correction (it is also skipped when neither --vectors nor --dictionary is given)")
    p.add_argument("--vectors", help="pretrained vectors whose vocabulary forms the correction dictionary")
    p.add_argument("--dictionary", help="frequency dictionary file (term count per line)")
    p.add_argument("--max-edit", type=int, default=2)
    p.add_argument("--max-len", type=int, default=MAX_LEN)
    p.add_argument("--val-n", type=int, default=10_000)
    p.add_argument("--test-n", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-ids", help="partition file: one pair id per line")
    p.add_argument("--val-ids")
    p.add_argument("--test-ids")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("embed", parents=[common], help="build the word-embedding table")
    p.add_argument("--mode", choices=EMBED_MODES, default="skipgram")
    p.add_argument("--vectors", help="pretrained vectors (pretrained modes)")
    p.add_argument("--dim", type=int, default=300)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.025)
    p.add_argument("--min-n", type=int, default=3)
    p.add_argument("--max-n", type=int, default=6)
    p.add_argument("--buckets", type=int, default=2_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("train", parents=[common], help="train the CNN and write a checkpoint")
    p.add_argument("--embeddings", help="embedding table (default: <run-dir>/embed/embeddings.bin)")
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--beta1", type=float, default=0.9)
    p.add_argument("--beta2", type=float, default=0.999)
    p.add_argument("--eps", type=float, default=1e-8)
    p.add_argument("--decay-factor", type=float, default=0.1)
    p.add_argument("--decay-every", type=int, default=2, help="epochs between learning-rate checks")
    p.add_argument("--patience", type=int, default=3, help="early-stopping patience in epochs")
    p.add_argument("--max-epochs", type=int, default=30)
    p.add_argument("--widths", type=_csv_ints, default=(2, 3, 4, 6, 8))
    p.add_argument("--filters", type=int, default=200)
    p.add_argument("--max-len", type=int, default=MAX_LEN)
    p.add_argument("--n-keyword", type=int, default=10)
    p.add_argument("--chunks", type=int, default=4)
    p.add_argument("--chunk-mode", choices=("filters", "positions"), default="filters")
    p.add_argument("--lambda-mode", choices=("per_slot", "shared"), default="per_slot")
    p.add_argument("--shared-conv", action="store_true")
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--bn-momentum", type=float, default=0.7)
    p.add_argument("--precision", choices=("float64", "float32"), default="float64")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="accuracy and confusion counts on a labelled TSV")
    p.add_argument("pairs")
    p.add_argument("--checkpoint", help="default: <run-dir>/train/model.ckpt")
    p.add_argument("--predictions", help="write per-pair predictions here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", parents=[common], help="classify one question pair")
    p.add_argument("q1")
    p.add_argument("q2")
    p.add_argument("--checkpoint", help="default: <run-dir>/train/model.ckpt")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient checks")
    p.add_argument("--op", action="append", choices=sorted(CHECKS), help="run only this check (repeatable)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject-fault", choices=sorted(CHECKS), help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def _one_line(text: str) -> str:
    return " ".join(str(text).split())


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(f"error: usage: {_one_line(exc)}", file=sys.stderr)
        return 2
    except DupCNNError as exc:
        print(f"error: {exc.code}: {_one_line(exc)}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: io: {_one_line(exc)}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("error: interrupted: stopped by user", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
