"""Command-line pipeline driver.

Subcommands: synth, cascades, features, train, eval, importance, stats.
Every invocation writes a run manifest (config hash, seeds, input/output
digests, tool version) next to its outputs; identical manifests mean the
outputs are byte-identical reruns. Exit codes: 0 success, 1 usage error,
2 data error. PSM_LOG sets the log level.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cascade import build_cascades, cascade_size_histogram
from .config import PipelineConfig, default_config, derive_seed, load_config
from .corpus import Corpus, SynthParams, generate_synthetic, load_corpus, write_corpus
from .errors import PsmError
from .evaluate import (
    build_fold_data,
    content_feature_ttests,
    cross_validate,
    evaluate_on_folds,
    feature_group_importance,
    make_trainer,
)
from .features import FEATURE_GROUPS, FeatureExtractor, canonical_columns
from .learn import LabeledDataset, save_model
from .topics import save_topic_model

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(
    out_dir: Path, config: PipelineConfig, inputs: dict[str, Path],
    outputs: dict[str, Path],
) -> Path:
    manifest = {
        "tool": "psmdetect",
        "version": __version__,
        "config_sha256": config.config_hash(),
        "seed": config.seed,
        "inputs": {name: _sha256_file(p) for name, p in sorted(inputs.items())},
        "outputs": {name: _sha256_file(p) for name, p in sorted(outputs.items())},
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def _corpus_paths(data_dir: str) -> dict[str, Path]:
    base = Path(data_dir)
    return {
        "tweets": base / "tweets.jsonl",
        "profiles": base / "profiles.jsonl",
        "urls": base / "urls.jsonl",
    }


def _load(args, config: PipelineConfig) -> tuple[Corpus, dict[str, Path]]:
    paths = _corpus_paths(args.data)
    corpus = load_corpus(paths["tweets"], paths["profiles"], paths["urls"], config)
    return corpus, paths


def _resolve_config(args) -> PipelineConfig:
    config = load_config(args.config) if args.config else default_config()
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "theta", None) is not None:
        config.theta = args.theta
    if getattr(args, "k_topics", None) is not None:
        config.lda.k = args.k_topics
        config.lda.alpha = 50.0 / args.k_topics
    return config.validate()


def _fmt(value: float) -> str:
    return repr(float(value))


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_synth(args) -> int:
    config = _resolve_config(args)
    params = SynthParams(
        n_users=args.users,
        psm_fraction=args.psm_fraction,
        n_cascades=args.cascades,
    )
    corpus = generate_synthetic(params, config.seed, config)
    out_dir = Path(args.out)
    paths = write_corpus(corpus, out_dir)
    _write_manifest(out_dir, config, {}, paths)
    logger.info("wrote synthetic corpus (%d users, %d tweets) to %s",
                params.n_users, len(corpus.tweets), out_dir)
    return EXIT_OK


def _cmd_cascades(args) -> int:
    config = _resolve_config(args)
    corpus, inputs = _load(args, config)
    cascades = build_cascades(corpus, config.theta)
    histogram = cascade_size_histogram(cascades, args.min_size)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "cascade_sizes.csv"
    _write_csv(out_path, ["size", "frequency"], [[s, f] for s, f in histogram])
    _write_manifest(out_dir, config, inputs, {"cascade_sizes": out_path})
    return EXIT_OK


def _cmd_features(args) -> int:
    config = _resolve_config(args)
    corpus, inputs = _load(args, config)
    extractor = FeatureExtractor(corpus, config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = {}

    if args.dump_causal:
        causal_path = out_dir / "causal_scores.csv"
        rows = []
        for uid in extractor.user_ids:
            s = extractor.causal.get(uid)
            rows.append(
                [uid, s.kandm, s.rel, s.nb, s.wnb] if s else [uid, 0.0, 0.0, 0.0, 0.0]
            )
        _write_csv(causal_path, ["user_id", "kandm", "rel", "nb", "wnb"], rows)
        outputs["causal_scores"] = causal_path

    models = extractor.fit_text_models(set(extractor.user_ids), seed_tag="all")
    matrix = extractor.matrix(models)
    feat_path = out_dir / "features.csv"
    header = ["user_id"] + canonical_columns() + ["label"]
    rows = []
    for i, uid in enumerate(extractor.user_ids):
        label = corpus.profiles[uid].label.value
        rows.append([uid] + [float(v) for v in matrix[i]] + [label])
    _write_csv(feat_path, header, rows)
    outputs["features"] = feat_path
    _write_manifest(out_dir, config, inputs, outputs)
    return EXIT_OK


def _build_dataset(extractor: FeatureExtractor) -> tuple[LabeledDataset, list[str]]:
    uids, labels = extractor.labeled_users()
    dataset = LabeledDataset(
        matrix=np.zeros((len(uids), 0)),  # rows come from per-fold matrices
        labels=labels,
        column_names=canonical_columns(),
    )
    return dataset, uids


def _cmd_train(args) -> int:
    config = _resolve_config(args)
    corpus, inputs = _load(args, config)
    extractor = FeatureExtractor(corpus, config)
    uids, labels = extractor.labeled_users()
    models = extractor.fit_text_models(set(uids), seed_tag="train")
    matrix = extractor.matrix(models, uids)
    dataset = LabeledDataset(matrix=matrix, labels=labels, column_names=canonical_columns())
    trainer = make_trainer(args.classifier, config, derive_seed(config.seed, "train", args.classifier))
    model = trainer(dataset)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    model_path = out_dir / "classifier.psmmodel"
    save_model(model, model_path)
    lda_path = out_dir / "topics.ldamodel"
    save_topic_model(models.topic_model, lda_path)
    vocab_path = out_dir / "tfidf_vocab.json"
    vocab_path.write_text(
        json.dumps(
            {
                "unigrams": models.vocab.unigrams,
                "bigrams": models.vocab.bigrams,
                "doc_frequency": models.vocab.doc_frequency,
                "n_docs": models.vocab.n_docs,
            },
            sort_keys=True,
            separators=(",", ":"),
        ),
        encoding="utf-8",
    )
    _write_manifest(
        out_dir, config, inputs,
        {"classifier": model_path, "topics": lda_path, "tfidf_vocab": vocab_path},
    )
    return EXIT_OK


def _cmd_eval(args) -> int:
    config = _resolve_config(args)
    corpus, inputs = _load(args, config)
    extractor = FeatureExtractor(corpus, config)
    dataset, uids = _build_dataset(extractor)
    report = cross_validate(
        dataset,
        args.classifier,
        config,
        k=config.cv_folds,
        extractor=extractor,
        row_users=uids,
        threads=args.threads,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "report.json"
    report_path.write_text(
        json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    folds_path = out_dir / "folds.csv"
    result = report.cv[args.classifier]
    rows = [
        [args.classifier, fold, psm, macro]
        for fold, (psm, macro) in enumerate(
            zip(result.f1_psm_folds, result.f1_macro_folds)
        )
    ]
    _write_csv(folds_path, ["classifier", "fold", "f1_psm", "f1_macro"], rows)
    _write_manifest(out_dir, config, inputs, {"report": report_path, "folds": folds_path})
    return EXIT_OK


def _cmd_importance(args) -> int:
    config = _resolve_config(args)
    corpus, inputs = _load(args, config)
    extractor = FeatureExtractor(corpus, config)
    dataset, uids = _build_dataset(extractor)
    fold_data = build_fold_data(
        dataset, config.cv_folds, derive_seed(config.seed, "cv"),
        extractor, uids, args.threads,
    )
    if args.group == "all":
        groups = feature_group_importance(dataset, config, fold_data, args.threads)
    else:
        span = FEATURE_GROUPS[args.group]
        groups = {
            args.group: evaluate_on_folds(
                dataset, fold_data, "gbdt", config, columns=span, threads=args.threads
            )
        }
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "importance.csv"
    rows = [[g, r.mean_f1_psm] for g, r in sorted(groups.items())]
    _write_csv(csv_path, ["group", "f1_psm"], rows)
    report_path = out_dir / "importance.json"
    report_path.write_text(
        json.dumps({g: r.to_dict() for g, r in sorted(groups.items())},
                   sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    _write_manifest(out_dir, config, inputs, {"importance": csv_path, "report": report_path})
    return EXIT_OK


def _cmd_stats(args) -> int:
    config = _resolve_config(args)
    corpus, inputs = _load(args, config)
    extractor = FeatureExtractor(corpus, config)
    ttests = content_feature_ttests(extractor)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "ttests.json"
    json_path.write_text(
        json.dumps([t.to_dict() for t in ttests], sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    csv_path = out_dir / "ttests.csv"
    _write_csv(
        csv_path,
        ["feature", "t", "df", "p", "tail"],
        [[t.feature, t.t, t.df, t.p, t.tail] for t in ttests],
    )
    _write_manifest(out_dir, config, inputs, {"ttests": json_path, "ttests_csv": csv_path})
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument wiring
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser, data: bool = True) -> None:
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--seed", type=int, help="master seed override")
    p.add_argument("--threads", type=int, default=1, help="worker pool size")
    p.add_argument("--theta", type=int, help="viral threshold override")
    p.add_argument("--k-topics", type=int, dest="k_topics", help="LDA topic count override")
    p.add_argument("--out", required=True, help="output directory")
    if data:
        p.add_argument("--data", required=True,
                       help="corpus directory holding tweets/profiles/urls JSONL files")


def build_parser() -> _Parser:
    parser = _Parser(prog="psm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled corpus")
    _add_common(p, data=False)
    p.add_argument("--users", type=int, default=200)
    p.add_argument("--psm-fraction", type=float, default=0.25, dest="psm_fraction")
    p.add_argument("--cascades", type=int, default=120)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("cascades", help="emit the cascade-size histogram")
    _add_common(p)
    p.add_argument("--min-size", type=int, default=1, dest="min_size")
    p.set_defaults(func=_cmd_cascades)

    p = sub.add_parser("features", help="extract the per-user feature matrix")
    _add_common(p)
    p.add_argument("--dump-causal", action="store_true", dest="dump_causal",
                   help="also write per-user causality scores")
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("train", help="train one classifier on all labeled users")
    _add_common(p)
    p.add_argument("--classifier", choices=("gbdt", "rf", "dt", "lr", "nb"),
                   default="gbdt")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="stratified cross-validation of one classifier")
    _add_common(p)
    p.add_argument("--classifier", choices=("gbdt", "rf", "dt", "lr", "nb"),
                   default="gbdt")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("importance", help="per-feature-group cross-validation")
    _add_common(p)
    p.add_argument("--group", choices=("user", "source", "content", "all"),
                   default="all")
    p.set_defaults(func=_cmd_importance)

    p = sub.add_parser("stats", help="class-difference t-tests on content features")
    _add_common(p)
    p.set_defaults(func=_cmd_stats)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("PSM_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except PsmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
