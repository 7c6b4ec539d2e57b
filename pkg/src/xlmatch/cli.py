"""Command-line entry point wiring the file-based pipeline stages.

Stages: stats, mine, audit, train, predict, baseline, ensemble,
evaluate. Every stage reads inputs from flag-given paths, writes
artifacts only to flag-given paths, and logs to standard error. Exit
codes: 0 success, 1 validation/usage error, 2 I/O error.

A flat ``key=value`` config file can supply any option (``--config``);
explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from . import corpus as corpus_io
from . import evalkit, miner, textprep
from .corpus import Lang
from .embeddings import compute_oov_stats, load_embedding_table
from .errors import ModelIOError, UsageError, ValidationError, XlmatchError

logger = logging.getLogger("xlmatch")

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}

_MODEL_BOOL_KEYS = {"use_conv", "use_lstm", "use_bilstm", "abs_difference", "train_embeddings"}
_MODEL_TUPLE_KEYS = {"kernel_sizes", "mlp_hidden"}
_MODEL_INT_KEYS = {
    "conv_filters", "hidden_size", "max_len", "embed_dim",
    "batch_size", "epochs", "seed", "patience",
}
_MODEL_FLOAT_KEYS = {"dropout_rate", "learning_rate"}


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so main controls codes."""

    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage()}")


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in _BOOL_TRUE:
        return True
    if lowered in _BOOL_FALSE:
        return False
    raise ValidationError(f"expected a boolean, got {value!r}")


def _load_config_file(path) -> dict[str, str]:
    cfg = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValidationError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        cfg[key.strip().replace("-", "_")] = value.strip()
    return cfg


def _option(args, cfg: dict, key: str, default=None, cast=str):
    """Flag value if given, else config-file value, else default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in cfg:
        return cast(cfg[key])
    return default


def _require(args, cfg: dict, key: str, cast=str):
    value = _option(args, cfg, key, cast=cast)
    if value is None:
        raise UsageError(f"missing required option --{key.replace('_', '-')}")
    return value


def _write_json(path, data: dict) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_stopwords(args, cfg) -> textprep.StopwordList:
    base = textprep.load_stopwords(_option(args, cfg, "stopwords"))
    additions_path = _option(args, cfg, "stopword_additions")
    removals_path = _option(args, cfg, "stopword_removals")
    additions = (
        frozenset(textprep.read_word_list(additions_path)) if additions_path else None
    )
    removals = frozenset(textprep.read_word_list(removals_path)) if removals_path else None
    return textprep.consolidate_stopwords(base, additions, removals)


def _load_negations(args, cfg) -> frozenset[str]:
    return textprep.load_negations(_option(args, cfg, "negations"))


def _model_config(args, cfg: dict):
    """Assemble a ModelConfig from config-file keys plus flag overrides."""
    from .model import ModelConfig

    kwargs = {}
    for f in fields(ModelConfig):
        if f.name not in cfg:
            continue
        raw = cfg[f.name]
        if f.name in _MODEL_BOOL_KEYS:
            kwargs[f.name] = _parse_bool(raw)
        elif f.name in _MODEL_TUPLE_KEYS:
            kwargs[f.name] = tuple(int(v) for v in raw.split(",") if v.strip())
        elif f.name in _MODEL_INT_KEYS:
            kwargs[f.name] = int(raw)
        elif f.name in _MODEL_FLOAT_KEYS:
            kwargs[f.name] = float(raw)
    for flag in ("seed", "epochs", "batch_size", "learning_rate", "max_len", "embed_dim"):
        value = getattr(args, flag, None)
        if value is not None:
            kwargs[flag] = value
    return ModelConfig(**kwargs), "embed_dim" in kwargs


def _cmd_stats(args, cfg) -> int:
    corpus_path = _require(args, cfg, "corpus")
    fmt = _option(args, cfg, "format", "pair")
    skip_header = bool(args.skip_header)
    if fmt == "pair":
        lang = Lang(_option(args, cfg, "lang", "english"))
        corpus = corpus_io.parse_pair_file(corpus_path, lang, skip_header)
    elif fmt == "unlabeled":
        corpus = corpus_io.parse_unlabeled_file(corpus_path, skip_header)
    elif fmt == "minted":
        corpus = corpus_io.parse_minted_file(corpus_path, skip_header)
    else:
        raise ValidationError(f"unknown corpus format {fmt!r}")
    table = load_embedding_table(_require(args, cfg, "embeddings"))
    stats = compute_oov_stats(corpus, table)
    out = _require(args, cfg, "out")
    _write_json(out, stats.as_dict())
    logger.info("stats over %d records -> %s", len(corpus), out)
    return 0


def _cmd_mine(args, cfg) -> int:
    skip_header = bool(args.skip_header)
    english = corpus_io.parse_pair_file(
        _require(args, cfg, "english_train"), Lang.ENGLISH, skip_header
    )
    spanish = corpus_io.parse_pair_file(
        _require(args, cfg, "spanish_train"), Lang.SPANISH, skip_header
    )
    unlabeled = corpus_io.parse_unlabeled_file(_require(args, cfg, "unlabeled"), skip_header)
    stopwords = _load_stopwords(args, cfg)
    negations = _load_negations(args, cfg)

    minted = miner.build_training_set(english, spanish, unlabeled, stopwords, negations)
    corpus_io.write_minted_file(minted, _require(args, cfg, "out"))

    audit = miner.audit_relative_precision(english, stopwords, negations)
    counts = miner.count_minted(minted)
    report = miner.MiningReport(
        recovered_true=audit.recovered_true,
        recovered_false=audit.recovered_false,
        total_minted=counts.total_minted,
        minted_positive=counts.minted_positive,
        minted_negative=counts.minted_negative,
        per_provenance=counts.per_provenance,
    )
    report_path = _option(args, cfg, "report")
    if report_path:
        _write_json(report_path, report.as_dict())
    logger.info(
        "minted %d pairs (%d positive / %d negative)",
        counts.total_minted, counts.minted_positive, counts.minted_negative,
    )
    return 0


def _cmd_audit(args, cfg) -> int:
    lang = Lang(_option(args, cfg, "lang", "english"))
    labeled = corpus_io.parse_pair_file(
        _require(args, cfg, "pairs"), lang, bool(args.skip_header)
    )
    stopwords = _load_stopwords(args, cfg)
    negations = _load_negations(args, cfg)
    report = miner.audit_relative_precision(labeled, stopwords, negations)
    _write_json(_require(args, cfg, "out"), report.as_dict())
    precision = report.relative_precision
    logger.info(
        "recovered %d true / %d false matches (relative precision %s)",
        report.recovered_true,
        report.recovered_false,
        "n/a" if precision is None else f"{precision:.4f}",
    )
    return 0


def _cmd_train(args, cfg) -> int:
    from . import model as model_mod

    pairs = corpus_io.parse_minted_file(_require(args, cfg, "pairs"))
    val_path = _option(args, cfg, "val")
    val = corpus_io.parse_minted_file(val_path) if val_path else None
    table = load_embedding_table(_require(args, cfg, "embeddings"))
    fixes = textprep.load_explicit_fixes(_option(args, cfg, "fixes"))

    config, embed_dim_pinned = _model_config(args, cfg)
    if not embed_dim_pinned:
        config.embed_dim = table.dim
    model = model_mod.build_model(config, table, fixes)
    model_mod.train(model, pairs, val, config)
    out = _require(args, cfg, "out")
    model_mod.save_model(model, out)
    final = model.training_log[-1] if model.training_log else {}
    logger.info(
        "trained %d epochs (last train loss %.4f) -> %s",
        len(model.training_log), final.get("train_loss", float("nan")), out,
    )
    return 0


def _cmd_predict(args, cfg) -> int:
    from . import model as model_mod

    model = model_mod.load_model(_require(args, cfg, "model"))
    pairs = corpus_io.parse_minted_file(_require(args, cfg, "pairs"), require_label=False)
    records = model_mod.predict_batch(model, pairs)
    out = _require(args, cfg, "out")
    evalkit.write_predictions(records, out)
    logger.info("predicted %d pairs -> %s", len(records), out)
    return 0


def _cmd_baseline(args, cfg) -> int:
    from . import baseline as baseline_mod

    train_pairs = corpus_io.parse_minted_file(_require(args, cfg, "train"))
    predict_pairs = corpus_io.parse_minted_file(_require(args, cfg, "pairs"), require_label=False)
    n = _option(args, cfg, "n", 3, cast=int)
    calibration = baseline_mod.calibrate_baseline(list(train_pairs), n)
    records = baseline_mod.predict_baseline(calibration, list(predict_pairs), n)
    evalkit.write_predictions(records, _require(args, cfg, "out"))
    logger.info(
        "baseline (n=%d, slope %.3f) predicted %d pairs", n, calibration.slope, len(records)
    )
    return 0


def _cmd_ensemble(args, cfg) -> int:
    records = evalkit.ensemble_average(args.preds, args.weights)
    out = _require(args, cfg, "out")
    evalkit.write_predictions(records, out)
    logger.info("ensembled %d files -> %s", len(args.preds), out)
    return 0


def _cmd_evaluate(args, cfg) -> int:
    labeled = corpus_io.parse_minted_file(_require(args, cfg, "labels"))
    predictions = evalkit.read_predictions(_require(args, cfg, "preds"))
    if len(labeled) != len(predictions):
        raise ValidationError(
            f"labels file has {len(labeled)} rows but predictions file has {len(predictions)}"
        )
    by_id = {p.pair_id: p.probability for p in predictions}
    labels, probs = [], []
    for record in labeled:
        if record.id not in by_id:
            raise ValidationError(f"no prediction for pair {record.id}")
        labels.append(record.label)
        probs.append(by_id[record.id])
    threshold = _option(args, cfg, "threshold", 0.5, cast=float)
    report = evalkit.classification_metrics(labels, probs, threshold)
    _write_json(_require(args, cfg, "out"), report.as_dict())
    logger.info("log loss %.4f over %d pairs (row: %s)", report.log_loss, report.n,
                report.format_row())
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file; flags win")


def _add_stopword_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--stopwords", help="base stopword list (default: packaged English list)")
    parser.add_argument("--stopword-additions", dest="stopword_additions",
                        help="one-per-line additions (default: packaged delta)")
    parser.add_argument("--stopword-removals", dest="stopword_removals",
                        help="one-per-line removals (default: packaged delta)")
    parser.add_argument("--negations", help="negation keyword list (default: packaged set)")


def build_parser() -> _Parser:
    parser = _Parser(prog="xlmatch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="token-length and OOV statistics for a corpus")
    p.add_argument("--corpus")
    p.add_argument("--embeddings")
    p.add_argument("--format", choices=["pair", "unlabeled", "minted"])
    p.add_argument("--lang", choices=[l.value for l in Lang])
    p.add_argument("--skip-header", dest="skip_header", action="store_true")
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("mine", help="mint labeled Spanish pairs from the parallel data")
    p.add_argument("--english-train", dest="english_train")
    p.add_argument("--spanish-train", dest="spanish_train")
    p.add_argument("--unlabeled")
    _add_stopword_flags(p)
    p.add_argument("--skip-header", dest="skip_header", action="store_true")
    p.add_argument("--out")
    p.add_argument("--report")
    _add_common(p)
    p.set_defaults(func=_cmd_mine)

    p = sub.add_parser("audit", help="relative precision of the hash join on labeled pairs")
    p.add_argument("--pairs")
    p.add_argument("--lang", choices=[l.value for l in Lang])
    _add_stopword_flags(p)
    p.add_argument("--skip-header", dest="skip_header", action="store_true")
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=_cmd_audit)

    p = sub.add_parser("train", help="train the siamese matcher on minted pairs")
    p.add_argument("--pairs")
    p.add_argument("--val")
    p.add_argument("--embeddings")
    p.add_argument("--fixes", help="explicit spelling fixes (default: packaged table)")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--max-len", dest="max_len", type=int)
    p.add_argument("--embed-dim", dest="embed_dim", type=int)
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="write match probabilities for a pair file")
    p.add_argument("--model")
    p.add_argument("--pairs")
    p.add_argument("--seed", type=int)  # accepted for interface symmetry; prediction is deterministic
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("baseline", help="character n-gram baseline predictions")
    p.add_argument("--pairs")
    p.add_argument("--train")
    p.add_argument("--n", type=int)
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("ensemble", help="weighted average of prediction files")
    p.add_argument("--preds", nargs="+", required=True)
    p.add_argument("--weights", nargs="+", type=float)
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=_cmd_ensemble)

    p = sub.add_parser("evaluate", help="score predictions against labels")
    p.add_argument("--labels")
    p.add_argument("--preds")
    p.add_argument("--threshold", type=float)
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=_cmd_evaluate)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _load_config_file(args.config) if getattr(args, "config", None) else {}
        return args.func(args, cfg)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except ModelIOError as exc:
        logger.error("%s", exc)
        return 2
    except XlmatchError as exc:
        logger.error("%s", exc)
        return 1
    except OSError as exc:
        logger.error("%s", exc)
        return 2
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
