"""End-to-end pipeline: ingest, graph, stats, features, train, evaluate.

Stages run in dependency order and are skipped when their outputs are
newer than their inputs (unless forced). A manifest with the config echo
and a content hash per artifact is written at the end; it contains no
timestamps, so identical configs give identical manifests.
"""

from __future__ import annotations

import configparser
import dataclasses
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import evaluation, features, ingest, netstats, postgraph
from .model import ModelConfig, TrainConfig, TweetGageModel, fit_model, \
    load_tweetgage, save_model, write_history
from .util import derive_seed, sha256_file

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


@dataclass
class RunConfig:
    input: str
    outdir: str
    delta_minutes: int = 15
    emb_path: str = ""
    emb_dim: int = 768
    phi_mode: str = "raw"
    emb_mode: str = "raw"
    pca_k: int = 48
    standardize: bool = True
    hidden: int = 64
    n_layers: int = 2
    lr: float = 0.1
    batch_size: int = 256
    epochs: int = 80
    weighted_agg: bool = False
    train_frac: float = 0.70
    val_frac: float = 0.15
    test_frac: float = 0.15
    seed: int = 0

    def validate(self) -> None:
        if self.delta_minutes <= 0:
            raise ValueError("delta_minutes must be positive")
        if abs(self.train_frac + self.val_frac + self.test_frac - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")
        for mode, name in ((self.phi_mode, "phi_mode"),
                           (self.emb_mode, "emb_mode")):
            if mode not in ("off", "raw", "pca"):
                raise ValueError(f"{name} must be off, raw or pca, got {mode!r}")

    @property
    def fractions(self) -> tuple[float, float, float]:
        return (self.train_frac, self.val_frac, self.test_frac)


def load_config(path: str | Path, overrides: dict | None = None) -> RunConfig:
    """Read a sectioned key = value config file, then apply overrides.

    Section names only organize the file; keys are matched flat against
    RunConfig fields and coerced by field type.
    """
    parser = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    flat: dict[str, str] = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            flat[key] = value
    if parser.defaults():
        flat.update(parser.defaults())
    known = {f.name: f for f in dataclasses.fields(RunConfig)}
    kwargs: dict = {}
    for key, raw in flat.items():
        if key not in known:
            raise ValueError(f"unknown config key {key!r}")
        kwargs[key] = _coerce(raw, known[key].type)
    if overrides:
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
    if "input" not in kwargs or "outdir" not in kwargs:
        raise ValueError("config must set input and outdir")
    cfg = RunConfig(**kwargs)
    cfg.validate()
    return cfg


def _coerce(raw: str, ftype) -> object:
    raw = raw.strip()
    name = ftype if isinstance(ftype, str) else getattr(ftype, "__name__", "str")
    if name == "int":
        return int(raw)
    if name == "float":
        return float(raw)
    if name == "bool":
        return raw.lower() in ("1", "true", "yes", "on")
    return raw


def write_analysis(graph: postgraph.PostGraph, labels: np.ndarray,
                   phi: features.FeatureMatrix | None,
                   out_dir: str | Path) -> None:
    """Write graph stats, centralities, per-class KS table, correlation
    matrix and the weighted-degree histogram under out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    gstats = postgraph.graph_stats(graph).as_dict()
    with open(out_dir / "graph_stats.json", "w", encoding="utf-8") as fh:
        json.dump(gstats, fh, sort_keys=True, indent=2)
        fh.write("\n")
    table = netstats.centrality_table(graph)
    cent = {
        "weighted_degree": table.weighted_degree,
        "closeness": table.closeness,
        "betweenness": table.betweenness,
        "eigenvector": table.eigenvector,
    }
    with open(out_dir / "centralities.csv", "w", encoding="utf-8",
              newline="") as fh:
        fh.write("node," + ",".join(cent) + "\n")
        for i in range(graph.n_nodes):
            row = ",".join(repr(float(cent[k][i])) for k in cent)
            fh.write(f"{i},{row}\n")
    with open(out_dir / "ks.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("metric,mean_class0,std_class0,mean_class1,std_class1,"
                 "ks_statistic,ks_p_value\n")
        if np.unique(labels).size == 2:
            for name, values in cent.items():
                s = netstats.class_split_summary(values, labels)
                fh.write(f"{name},{s.mean0!r},{s.std0!r},{s.mean1!r},"
                         f"{s.std1!r},{s.ks.statistic!r},{s.ks.p_value!r}\n")
        else:
            logger.warning("analyze: single-class labels, KS table empty")
    columns: dict[str, np.ndarray] = {}
    if phi is not None:
        columns.update({name: phi.values[:, j]
                        for j, name in enumerate(phi.names)})
    columns.update(cent)
    names, corr = netstats.correlation_matrix(columns)
    with open(out_dir / "correlations.csv", "w", encoding="utf-8",
              newline="") as fh:
        fh.write("name," + ",".join(names) + "\n")
        for i, name in enumerate(names):
            row = ",".join(repr(float(v)) for v in corr[i])
            fh.write(f"{name},{row}\n")
    values, counts = netstats.loglog_histogram(table.weighted_degree)
    with open(out_dir / "loglog.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("value,count\n")
        for v, c in zip(values, counts):
            fh.write(f"{float(v)!r},{int(c)}\n")


class PipelineRun:
    """One pipeline execution over a config; artifacts cached lazily."""

    def __init__(self, cfg: RunConfig, force: bool = False):
        cfg.validate()
        self.cfg = cfg
        self.force = force
        self.out = Path(cfg.outdir)
        self._records: list | None = None
        self._graph: postgraph.PostGraph | None = None
        self._labels: np.ndarray | None = None

    def path(self, name: str) -> Path:
        return self.out / name

    # ------------------------------------------------------------------
    # lazy artifact access

    def records(self) -> list:
        if self._records is None:
            self._records = ingest.parse_corpus(self.path("posts.jsonl")).records
        return self._records

    def graph(self) -> postgraph.PostGraph:
        if self._graph is None:
            self._graph = postgraph.read_pgr(self.path("graph.pgr"))
        return self._graph

    def labels(self) -> np.ndarray:
        if self._labels is None:
            self._labels = np.asarray(
                ingest.read_labels_csv(self.path("labels.csv")), dtype=np.int64)
        return self._labels

    # ------------------------------------------------------------------

    def _fresh(self, outputs: list[Path], inputs: list[Path]) -> bool:
        if self.force:
            return False
        if not all(p.exists() for p in outputs):
            return False
        newest_in = max(p.stat().st_mtime for p in inputs)
        return all(p.stat().st_mtime >= newest_in for p in outputs)

    def run(self) -> dict:
        inp = Path(self.cfg.input)
        if not inp.exists():
            raise FileNotFoundError(f"input not found: {inp}")
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / "stats").mkdir(exist_ok=True)
        stages = (
            ("ingest", self.stage_ingest),
            ("build-graph", self.stage_graph),
            ("embed", self.stage_embed),
            ("features", self.stage_features),
            ("analyze", self.stage_analyze),
            ("split", self.stage_split),
            ("train", self.stage_train),
            ("evaluate", self.stage_evaluate),
        )
        status = "ok"
        try:
            for name, fn in stages:
                fn()
        except Exception as exc:
            status = f"failed:{name}"
            logger.error("stage %s failed: %s", name, exc)
            self.write_manifest(status)
            raise
        return self.write_manifest(status)

    # ------------------------------------------------------------------
    # stages

    def stage_ingest(self) -> None:
        inp = Path(self.cfg.input)
        outs = [self.path("posts.jsonl"), self.path("labels.csv"),
                self.path("stats.json")]
        if self._fresh(outs, [inp]):
            logger.info("ingest: up to date")
            return
        result = ingest.parse_corpus(inp)
        if not result.records:
            raise ValueError(f"no usable records in {inp}")
        ingest.write_corpus(result.records, outs[0])
        _, labels = ingest.label_records(result.records)
        ingest.write_labels_csv(result.records, outs[1])
        stats = ingest.dataset_stats(result.records).as_dict()
        stats["skipped_malformed"] = result.skipped_malformed
        stats["dropped_language"] = result.dropped_language
        with open(outs[2], "w", encoding="utf-8") as fh:
            json.dump(stats, fh, sort_keys=True, indent=2)
            fh.write("\n")
        self._records = result.records
        self._labels = np.asarray(labels, dtype=np.int64)

    def stage_graph(self) -> None:
        out = self.path("graph.pgr")
        if self._fresh([out], [self.path("posts.jsonl")]):
            logger.info("build-graph: up to date")
            return
        graph = postgraph.build_graph(self.records(),
                                      delta_seconds=self.cfg.delta_minutes * 60)
        postgraph.write_pgr(graph, out)
        self._graph = graph

    def stage_embed(self) -> None:
        out = self.path("emb.emb1")
        ins = [self.path("posts.jsonl")]
        if self.cfg.emb_path:
            ins.append(Path(self.cfg.emb_path))
        if self._fresh([out], ins):
            logger.info("embed: up to date")
            return
        n = len(self.records())
        if self.cfg.emb_path:
            emb = features.load_embeddings(self.cfg.emb_path, expected_rows=n)
        else:
            texts = [r.text for r in self.records()]
            emb = features.fallback_embed(texts, dim=self.cfg.emb_dim,
                                          seed=derive_seed(self.cfg.seed, "embed"))
        features.write_embeddings(emb, out)

    def stage_features(self) -> None:
        out = self.path("phi.csv")
        if self._fresh([out], [self.path("posts.jsonl")]):
            logger.info("features: up to date")
            return
        phi = features.assemble_phi(self.records())
        features.write_phi_csv(phi, out)

    def stage_analyze(self) -> None:
        stats_dir = self.out / "stats"
        outs = [stats_dir / "graph_stats.json", stats_dir / "centralities.csv",
                stats_dir / "ks.csv", stats_dir / "correlations.csv",
                stats_dir / "loglog.csv"]
        ins = [self.path("graph.pgr"), self.path("labels.csv"),
               self.path("phi.csv")]
        if self._fresh(outs, ins):
            logger.info("analyze: up to date")
            return
        phi = features.read_phi_csv(self.path("phi.csv"))
        write_analysis(self.graph(), self.labels(), phi, stats_dir)

    def stage_split(self) -> None:
        out = self.path("split.json")
        if self._fresh([out], [self.path("labels.csv")]):
            logger.info("split: up to date")
            return
        split = evaluation.make_split(self.labels(), self.cfg.fractions,
                                      seed=derive_seed(self.cfg.seed, "split"))
        evaluation.write_split(out, split)

    def _features_matrix(self, split: evaluation.Split) -> np.ndarray:
        return features.prepare_from_files(
            self.path("phi.csv"), self.path("emb.emb1"),
            phi_mode=self.cfg.phi_mode, emb_mode=self.cfg.emb_mode,
            pca_k=self.cfg.pca_k, fit_idx=split.train,
            zscore=self.cfg.standardize)

    def stage_train(self) -> None:
        outs = [self.path("model.tgm1"), self.path("model.tgm1.meta"),
                self.path("history.csv")]
        ins = [self.path(n) for n in
               ("graph.pgr", "phi.csv", "emb.emb1", "labels.csv", "split.json")]
        if self._fresh(outs, ins):
            logger.info("train: up to date")
            return
        split = evaluation.read_split(self.path("split.json"))
        x = self._features_matrix(split)
        seed = derive_seed(self.cfg.seed, "train")
        model = TweetGageModel(ModelConfig(
            n_features=x.shape[1], hidden=self.cfg.hidden,
            n_layers=self.cfg.n_layers, lr=self.cfg.lr,
            batch_size=self.cfg.batch_size,
            weighted_agg=self.cfg.weighted_agg, seed=seed))
        cfg = TrainConfig(lr=self.cfg.lr, batch_size=self.cfg.batch_size,
                          epochs=self.cfg.epochs, seed=seed)
        history = fit_model(model, x, self.labels(), split.train, split.val,
                            cfg, graph=self.graph())
        save_model(outs[0], model, "tweetgage",
                   meta={"phi_mode": self.cfg.phi_mode,
                         "emb_mode": self.cfg.emb_mode,
                         "pca_k": self.cfg.pca_k,
                         "zscore": self.cfg.standardize})
        write_history(outs[2], history)

    def stage_evaluate(self) -> None:
        out = self.path("report.csv")
        ins = [self.path(n) for n in
               ("model.tgm1", "split.json", "phi.csv", "emb.emb1", "labels.csv")]
        if self._fresh([out], ins):
            logger.info("evaluate: up to date")
            return
        split = evaluation.read_split(self.path("split.json"))
        x = self._features_matrix(split)
        model = load_tweetgage(self.path("model.tgm1"))
        prob = model.predict(x, self.graph())[split.test]
        report = evaluation.evaluate_scores(prob, self.labels()[split.test])
        evaluation.write_report(out, [("tweetgage", report)])

    # ------------------------------------------------------------------

    def write_manifest(self, status: str) -> dict:
        artifacts = {}
        for p in sorted(self.out.rglob("*")):
            if p.is_file() and p.name != MANIFEST_NAME:
                artifacts[p.relative_to(self.out).as_posix()] = sha256_file(p)
        doc = {
            "config": dataclasses.asdict(self.cfg),
            "artifacts": artifacts,
            "status": status,
        }
        with open(self.path(MANIFEST_NAME), "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True, indent=2)
            fh.write("\n")
        return doc


def run_pipeline(cfg: RunConfig, force: bool = False) -> dict:
    return PipelineRun(cfg, force=force).run()
