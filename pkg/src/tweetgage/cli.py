"""Command-line entry point wiring every stage of the pipeline."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import baselines, evaluation, features, ingest, postgraph, synth
from .model import ModelConfig, TrainConfig, TweetGageModel, fit_model, \
    save_model, write_history
from .pipeline import RunConfig, load_config, run_pipeline, write_analysis
from .util import derive_seed

logger = logging.getLogger(__name__)


def _read_records(path: str) -> list:
    result = ingest.parse_corpus(path)
    if not result.records:
        raise ValueError(f"no usable records in {path}")
    return result.records


def _resolve_modes(args) -> tuple[str, str]:
    phi_mode = "pca" if args.pca_phi else ("raw" if args.use_phi else "off")
    emb_mode = "pca" if args.pca_emb else ("raw" if args.use_emb else "off")
    return phi_mode, emb_mode


def _get_split(args, labels) -> evaluation.Split:
    """Load the split artifact, or create and persist one next to it."""
    path = Path(args.split)
    if path.exists():
        return evaluation.read_split(path)
    split = evaluation.make_split(labels,
                                  seed=derive_seed(args.seed, "split"))
    evaluation.write_split(path, split)
    logger.info("wrote new split to %s", path)
    return split


def _add_feature_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--use-phi", action="store_true",
                   help="include the 9 post/user features")
    p.add_argument("--use-emb", action="store_true",
                   help="include the text embedding block")
    p.add_argument("--pca-phi", action="store_true",
                   help="PCA-reduce the phi block (implies --use-phi)")
    p.add_argument("--pca-emb", action="store_true",
                   help="PCA-reduce the embedding block (implies --use-emb)")
    p.add_argument("--pca-k", type=int, default=48)
    p.add_argument("--no-standardize", action="store_true",
                   help="skip the per-column z-scoring of feature blocks")


def _add_artifact_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", required=True, help="graph.pgr path")
    p.add_argument("--phi", required=True, help="phi.csv path")
    p.add_argument("--emb", required=True, help="emb.emb1 path")
    p.add_argument("--labels", required=True, help="labels.csv path")
    p.add_argument("--split", required=True, help="split.json path "
                   "(created from --seed if missing)")


def _add_train_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--batch", type=int, default=256)
    p.add_argument("--epochs", type=int, default=80)
    p.add_argument("--plateau-patience", type=int, default=5,
                   help="epochs without val improvement before the lr drops")
    p.add_argument("--early-patience", type=int, default=10,
                   help="epochs without val improvement before training stops")
    p.add_argument("--weighted-agg", action="store_true",
                   help="scale neighbor sums by edge weights")


def cmd_ingest(args) -> int:
    result = ingest.parse_corpus(args.input)
    if not result.records:
        raise ValueError(f"no usable records in {args.input}")
    ingest.write_corpus(result.records, args.out)
    if args.labels:
        ingest.write_labels_csv(result.records, args.labels)
    if args.stats:
        stats = ingest.dataset_stats(result.records).as_dict()
        stats["skipped_malformed"] = result.skipped_malformed
        stats["dropped_language"] = result.dropped_language
        with open(args.stats, "w", encoding="utf-8") as fh:
            json.dump(stats, fh, sort_keys=True, indent=2)
            fh.write("\n")
    print(f"{len(result.records)} records kept, "
          f"{result.skipped_malformed} malformed, "
          f"{result.dropped_language} non-English dropped")
    return 0


def cmd_build_graph(args) -> int:
    records = _read_records(args.input)
    graph = postgraph.build_graph(records,
                                  delta_seconds=args.delta_minutes * 60)
    postgraph.write_pgr(graph, args.out)
    print(f"{graph.n_nodes} nodes, {graph.n_edges} edges "
          f"(delta = {args.delta_minutes} min)")
    return 0


def cmd_analyze(args) -> int:
    graph = postgraph.read_pgr(args.graph)
    labels = np.asarray(ingest.read_labels_csv(args.labels), dtype=np.int64)
    if labels.size != graph.n_nodes:
        raise ValueError(f"labels rows ({labels.size}) != graph nodes "
                         f"({graph.n_nodes})")
    phi = features.read_phi_csv(args.phi) if args.phi else None
    write_analysis(graph, labels, phi, args.out_dir)
    print(f"analysis written to {args.out_dir}")
    return 0


def cmd_embed_fallback(args) -> int:
    records = _read_records(args.input)
    emb = features.fallback_embed([r.text for r in records], dim=args.dim,
                                  seed=args.seed)
    features.write_embeddings(emb, args.out)
    print(f"wrote {emb.shape[0]} x {emb.shape[1]} embeddings to {args.out}")
    return 0


def cmd_features(args) -> int:
    records = _read_records(args.input)
    phi = features.assemble_phi(records)
    features.write_phi_csv(phi, args.out)
    print(f"wrote {phi.n_rows} x {phi.n_cols} feature rows to {args.out}")
    return 0


def cmd_train(args) -> int:
    graph = postgraph.read_pgr(args.graph)
    labels = np.asarray(ingest.read_labels_csv(args.labels), dtype=np.int64)
    split = _get_split(args, labels)
    phi_mode, emb_mode = _resolve_modes(args)
    x = features.prepare_from_files(args.phi, args.emb, phi_mode=phi_mode,
                                    emb_mode=emb_mode, pca_k=args.pca_k,
                                    fit_idx=split.train,
                                    zscore=not args.no_standardize)
    model = TweetGageModel(ModelConfig(
        n_features=x.shape[1], hidden=args.hidden, n_layers=args.layers,
        lr=args.lr, batch_size=args.batch, weighted_agg=args.weighted_agg,
        seed=args.seed))
    cfg = TrainConfig(lr=args.lr, batch_size=args.batch, epochs=args.epochs,
                      plateau_patience=args.plateau_patience,
                      early_patience=args.early_patience, seed=args.seed)
    history = fit_model(model, x, labels, split.train, split.val, cfg,
                        graph=graph)
    save_model(args.out, model, "tweetgage",
               meta={"phi_mode": phi_mode, "emb_mode": emb_mode,
                     "pca_k": args.pca_k,
                     "zscore": not args.no_standardize})
    if args.history:
        write_history(args.history, history)
    last = history[-1]
    print(f"trained {len(history)} epochs, "
          f"val loss {last.val_loss:.4f}, val acc {last.val_acc:.4f}")
    return 0


def cmd_baseline(args) -> int:
    labels = np.asarray(ingest.read_labels_csv(args.labels), dtype=np.int64)
    split = _get_split(args, labels)
    if args.lr is None:
        args.lr = {"mlp": 1e-2, "cnn1d": 0.1, "linear-probe": 1e-4}[args.kind]
    if args.kind == "mlp":
        phi_mode, emb_mode = _resolve_modes(args)
        x = features.prepare_from_files(args.phi, args.emb, phi_mode=phi_mode,
                                        emb_mode=emb_mode, pca_k=args.pca_k,
                                        fit_idx=split.train,
                                        zscore=not args.no_standardize)
        model, report, history = baselines.train_mlp(
            x, labels, split, seed=args.seed, lr=args.lr,
            batch_size=args.batch, epochs=args.epochs)
        meta = {"phi_mode": phi_mode, "emb_mode": emb_mode,
                "pca_k": args.pca_k, "zscore": not args.no_standardize}
    else:
        emb = features.load_embeddings(args.emb, expected_rows=labels.size)
        train_fn = (baselines.train_cnn1d if args.kind == "cnn1d"
                    else baselines.train_linear_probe)
        model, report, history = train_fn(emb, labels, split, seed=args.seed,
                                          lr=args.lr, batch_size=args.batch,
                                          epochs=args.epochs)
        meta = {}
    save_model(args.out, model, args.kind, meta=meta)
    if args.history:
        write_history(args.history, history)
    print(f"{args.kind}: acc {report.accuracy:.4f}, "
          f"auc_roc {report.auc_roc:.4f} on the test split")
    return 0


def cmd_evaluate(args) -> int:
    with open(str(Path(args.model)) + ".meta", encoding="utf-8") as fh:
        meta = json.load(fh)
    kind = meta.get("kind", "tweetgage")
    labels = np.asarray(ingest.read_labels_csv(args.labels), dtype=np.int64)
    split = evaluation.read_split(args.split)
    model = baselines.load_any_model(args.model)
    if kind in ("tweetgage", "mlp"):
        x = features.prepare_from_files(
            args.phi, args.emb, phi_mode=meta.get("phi_mode", "raw"),
            emb_mode=meta.get("emb_mode", "raw"),
            pca_k=meta.get("pca_k", 48), fit_idx=split.train,
            zscore=meta.get("zscore", True))
    else:
        x = features.load_embeddings(args.emb, expected_rows=labels.size)
    if kind == "tweetgage":
        graph = postgraph.read_pgr(args.graph)
        prob = model.predict(x, graph)[split.test]
    else:
        prob = model.predict(x[split.test])
    report = evaluation.evaluate_scores(prob, labels[split.test],
                                        positive_only=args.positive_class_only)
    evaluation.write_report(args.out, [(kind, report)])
    print(f"{kind}: acc {report.accuracy:.4f}, prec {report.precision:.4f}, "
          f"recall {report.recall:.4f}, auc_roc {report.auc_roc:.4f}, "
          f"auc_pr {report.auc_pr:.4f}, f1 {report.f1:.4f}")
    return 0


def cmd_ablate(args) -> int:
    graph = postgraph.read_pgr(args.graph)
    labels = np.asarray(ingest.read_labels_csv(args.labels), dtype=np.int64)
    split = _get_split(args, labels)
    phi = features.read_phi_csv(args.phi)
    emb = features.load_embeddings(args.emb, expected_rows=labels.size)
    rows = evaluation.run_ablation(
        phi, emb, graph, labels, split, seed=args.seed, pca_k=args.pca_k,
        hidden=args.hidden, n_layers=args.layers, lr=args.lr,
        batch_size=args.batch, epochs=args.epochs,
        plateau_patience=args.plateau_patience,
        early_patience=args.early_patience,
        zscore=not args.no_standardize)
    evaluation.write_report(args.out, rows)
    for name, report in rows:
        print(f"{name}: acc {report.accuracy:.4f}, "
              f"auc_roc {report.auc_roc:.4f}")
    return 0


def cmd_synth(args) -> int:
    records = synth.generate_corpus(args.n_posts, args.homophily, args.seed,
                                    n_days=args.days,
                                    delta_minutes=args.delta_minutes)
    ingest.write_corpus(records, args.out)
    _, labels = ingest.label_records(records)
    share = sum(labels) / len(labels)
    print(f"wrote {len(records)} posts to {args.out} "
          f"(label-1 share {share:.3f})")
    return 0


def cmd_pipeline(args) -> int:
    overrides = {
        "input": args.input,
        "outdir": args.outdir,
        "seed": args.seed,
        "delta_minutes": args.delta_minutes,
        "epochs": args.epochs,
    }
    if args.config:
        cfg = load_config(args.config, overrides)
    else:
        if not args.input or not args.outdir:
            raise ValueError("pipeline needs --config or both --input "
                             "and --outdir")
        kwargs = {k: v for k, v in overrides.items() if v is not None}
        cfg = RunConfig(**kwargs)
        cfg.validate()
    manifest = run_pipeline(cfg, force=args.force)
    print(f"pipeline ok: {len(manifest['artifacts'])} artifacts "
          f"in {cfg.outdir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tweetgage",
        description="Engagement prediction over hashtag co-occurrence graphs")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a corpus, write labels + stats")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--labels")
    p.add_argument("--stats")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build-graph", help="build the delta-window post graph")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--delta-minutes", type=int, default=15)
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("analyze", help="centralities, KS tests, correlations")
    p.add_argument("--graph", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--phi", help="include phi columns in the correlations")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("embed-fallback",
                       help="hashing-based embeddings (no external encoder)")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=768)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_embed_fallback)

    p = sub.add_parser("features", help="write the 9-column phi matrix")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train the graph model")
    _add_artifact_args(p)
    _add_feature_flags(p)
    _add_train_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--history")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("baseline", help="train a non-graph baseline")
    p.add_argument("--kind", required=True, choices=baselines.BASELINE_KINDS)
    _add_artifact_args(p)
    _add_feature_flags(p)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch", type=int, default=256)
    p.add_argument("--epochs", type=int, default=80)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--history")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("evaluate", help="score a trained model on the test split")
    p.add_argument("--model", required=True)
    _add_artifact_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--positive-class-only", action="store_true",
                   help="report class-1 precision/recall instead of macro")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="run the 7-row feature-set grid")
    _add_artifact_args(p)
    _add_train_args(p)
    p.add_argument("--pca-k", type=int, default=48)
    p.add_argument("--no-standardize", action="store_true",
                   help="skip the per-column z-scoring of feature blocks")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("synth", help="generate a planted-homophily corpus")
    p.add_argument("--n-posts", type=int, required=True)
    p.add_argument("--homophily", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--days", type=int, default=4)
    p.add_argument("--delta-minutes", type=int, default=15)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pipeline", help="run every stage end to end")
    p.add_argument("--config")
    p.add_argument("--input")
    p.add_argument("--outdir")
    p.add_argument("--seed", type=int)
    p.add_argument("--delta-minutes", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--force", action="store_true",
                   help="re-run stages even when outputs are fresh")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
