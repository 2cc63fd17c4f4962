"""End-to-end pipeline stages behind the command-line interface.

Each stage reads its predecessor's artifacts from the working directory,
validates that they came from the same configuration (a hash of the
semantic config fields is embedded in every artifact), and writes its own
outputs atomically. Reruns with unchanged config are no-ops; artifacts from
a different config are refused with a message naming the command that
rebuilds them.

Artifacts never contain absolute paths or timestamps, so a pipeline run is
byte-for-byte reproducible in any directory given the same config.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import __version__
from .detect import KnnScorer, score_all
from .embed import (
    EMBEDDER_KINDS,
    EmbedderConfig,
    SavedModel,
    ae_fit,
    encode_weeks,
    load_model,
    pca_fit,
    save_model,
    seq2seq_fit,
)
from .evaluate import Split, pr_curve, scatter_export, split_users, write_pr_curve
from .ingest import (
    Standardizer,
    UserWeek,
    WeekDataset,
    attach_labels,
    build_user_weeks,
    default_event_spec,
    default_flow_spec,
    get_schema,
    load_dataset,
    parse_records,
    save_dataset,
    sequences,
    user_profiles,
    window_vectors,
    windows,
)
from .numkernel import Rng
from .segment import cluster_users, select_k
from .synth import SynthConfig, generate, parse_labels

logger = logging.getLogger(__name__)

CLUSTER_METHODS = ("kmeans", "kmodes")


class PipelineError(RuntimeError):
    """A stage cannot run: missing/stale artifacts or bad configuration."""


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a full run needs, loadable from a flat JSON file.

    The defaults are the reference benchmark: synthetic two-archetype
    traffic, 24-hour windows, automatic k selection, and the sequence
    embedder at p=32 for 50 epochs.
    """

    workdir: str = "work"
    input_path: str | None = None  # flows CSV; defaults to the synth output
    labels_path: str | None = None
    schema: str = "netflow-v1"
    window_hours: int = 24
    utc_offset_hours: float = 0.0
    cluster_method: str = "kmeans"
    k: int | None = None  # fixed cluster count; None sweeps k_min..k_max
    k_min: int = 2
    k_max: int = 8
    standardize_clustering: bool = True
    embedder: str = "as2s"
    p: int = 32
    epochs: int = 50
    learning_rate: float = 1e-3
    batch_size: int = 32
    lstm_layers: int = 1
    teacher_forcing: bool = True
    representation: str = "final"
    snapshot_epochs: tuple[int, ...] = (1, 15, 24)
    k_nn: int = 20
    split_ratio: float = 0.15
    seed: int = 0
    n_users: int = 200
    n_weeks: int = 8
    anomaly_rate: float = 0.02
    strict: bool = False

    # Fields that do not change what is computed, only where/how verbosely.
    _NON_SEMANTIC = ("workdir", "input_path", "labels_path", "embedder", "strict")

    def __post_init__(self) -> None:
        if self.embedder not in EMBEDDER_KINDS:
            raise ValueError(f"embedder must be one of {list(EMBEDDER_KINDS)}")
        if self.cluster_method not in CLUSTER_METHODS:
            raise ValueError(f"cluster_method must be one of {list(CLUSTER_METHODS)}")
        if self.k is not None and self.k < 1:
            raise ValueError("k must be >= 1")
        if not 2 <= self.k_min <= self.k_max:
            raise ValueError("need 2 <= k_min <= k_max")
        if self.k_nn < 1:
            raise ValueError("k_nn must be >= 1")
        if not 0.0 <= self.split_ratio < 1.0:
            raise ValueError("split_ratio must be in [0, 1)")
        object.__setattr__(self, "snapshot_epochs", tuple(self.snapshot_epochs))
        # Delegate the embedder hyperparameter checks.
        self.embedder_config(0)

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValueError(f"unknown config keys {unknown}; known keys: {sorted(known)}")
        return cls(**raw)

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict[str, Any]:
        doc = dataclasses.asdict(self)
        doc["snapshot_epochs"] = list(self.snapshot_epochs)
        return doc

    @property
    def hash(self) -> str:
        """Digest of the semantic fields; stamped into every artifact."""
        doc = self.to_dict()
        for key in self._NON_SEMANTIC:
            doc.pop(key)
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

    def embedder_config(self, seed: int) -> EmbedderConfig:
        return EmbedderConfig(
            p=self.p,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            seed=seed,
            lstm_layers=self.lstm_layers,
            teacher_forcing=self.teacher_forcing,
            representation=self.representation,
            snapshot_epochs=self.snapshot_epochs,
        )

    def synth_config(self) -> SynthConfig:
        return SynthConfig(
            n_users=self.n_users,
            n_weeks=self.n_weeks,
            anomaly_rate=self.anomaly_rate,
            seed=self.seed,
        )


class Workspace:
    """Canonical artifact locations inside the working directory."""

    def __init__(self, config: PipelineConfig):
        self.root = Path(config.workdir)
        self.flows = Path(config.input_path) if config.input_path else self.root / "flows.csv"
        self.labels = Path(config.labels_path) if config.labels_path else self.root / "labels.csv"
        self.synth_meta = self.root / "flows.meta.json"
        self.dataset = self.root / "dataset.json"
        self.clusters = self.root / "clusters.json"
        self.split = self.root / "split.json"
        self.summary = self.root / "summary.csv"
        self.manifest = self.root / "manifest.json"
        self.scatter_dir = self.root / "scatter"

    def model(self, embedder: str, cluster: int) -> Path:
        return self.root / f"model_{embedder}_c{cluster}.json"

    def scores(self, embedder: str) -> Path:
        return self.root / f"scores_{embedder}.csv"

    def pr_file(self, embedder: str, cluster: int | None) -> Path:
        tag = "pooled" if cluster is None else f"c{cluster}"
        return self.root / f"pr_{embedder}_{tag}.csv"

    def eval_summary(self, embedder: str) -> Path:
        return self.root / f"eval_{embedder}.json"


# ---------------------------------------------------------------------------
# artifact plumbing
# ---------------------------------------------------------------------------

def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _atomic_json(path: Path, doc: Any) -> None:
    _atomic_write(path, json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise PipelineError(
            f"missing artifact {path.name}: run `flowemb {producer}` first"
        )
    return path


def _check_hash(found: object, config: PipelineConfig, path: Path, producer: str) -> None:
    if found != config.hash:
        raise PipelineError(
            f"{path.name} was produced by config {found}, current config is "
            f"{config.hash}; rerun `flowemb {producer}` (or fix the config)"
        )


def _json_artifact(path: Path, config: PipelineConfig, producer: str) -> dict:
    doc = json.loads(_require(path, producer).read_text(encoding="utf-8"))
    meta = doc.get("meta", doc)
    _check_hash(meta.get("config_hash"), config, path, producer)
    return doc


def _csv_comments(path: Path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition("=")
            out[key] = value
    return out


def _is_current(path: Path, config: PipelineConfig) -> bool:
    """True if an artifact exists and carries the current config hash."""
    if not path.exists():
        return False
    try:
        if path.suffix == ".json":
            doc = json.loads(path.read_text(encoding="utf-8"))
            meta = doc.get("meta", doc)
            return meta.get("config_hash") == config.hash
        return _csv_comments(path).get("config_hash") == config.hash
    except (OSError, json.JSONDecodeError):
        return False


def _update_manifest(ws: Workspace, config: PipelineConfig, stage: str, artifacts: Sequence[Path]) -> None:
    doc: dict[str, Any] = {}
    if ws.manifest.exists():
        try:
            doc = json.loads(ws.manifest.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            doc = {}
    if doc.get("config_hash") != config.hash:
        doc = {}  # stale manifest from another config: start over
    semantic = config.to_dict()
    for key in config._NON_SEMANTIC:
        semantic.pop(key)
    doc["config"] = semantic
    doc["config_hash"] = config.hash
    doc["seed"] = config.seed
    doc["version"] = __version__
    stages = doc.setdefault("stages", {})
    stages[stage] = sorted(p.name for p in artifacts)
    _atomic_json(ws.manifest, doc)


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def stage_synth(config: PipelineConfig) -> list[Path]:
    """Generate the synthetic flows and labels files."""
    ws = Workspace(config)
    targets = [ws.flows, ws.labels, ws.synth_meta]
    if all(t.exists() for t in targets) and _is_current(ws.synth_meta, config):
        logger.info("synth: artifacts up to date, skipping")
        return targets
    data = generate(config.synth_config())
    _atomic_write(ws.flows, data.flows_csv)
    _atomic_write(ws.labels, data.labels_csv)
    _atomic_json(
        ws.synth_meta,
        {
            "config_hash": config.hash,
            "seed": config.seed,
            "n_anomalous": data.n_anomalous,
            "n_users": config.n_users,
            "n_weeks": config.n_weeks,
        },
    )
    logger.info(
        "synth: wrote %s (%d anomalous user-weeks)", ws.flows.name, data.n_anomalous
    )
    _update_manifest(ws, config, "synth", targets)
    return targets


def _feature_spec(config: PipelineConfig):
    schema = get_schema(config.schema)
    spec = default_flow_spec() if schema.kind == "flow" else default_event_spec()
    return schema, spec


def stage_extract(config: PipelineConfig) -> WeekDataset:
    """Parse flows, window them, and assemble labelled weekly sequences."""
    ws = Workspace(config)
    if _is_current(ws.dataset, config):
        logger.info("extract: %s up to date, skipping", ws.dataset.name)
        return load_dataset(ws.dataset)
    if config.input_path is not None and not ws.flows.exists():
        raise PipelineError(f"input file {ws.flows} not found")
    flows = _require(ws.flows, "synth")
    if config.input_path is None:
        # workdir flows come from our own synth stage: verify provenance
        meta = json.loads(_require(ws.synth_meta, "synth").read_text(encoding="utf-8"))
        _check_hash(meta.get("config_hash"), config, ws.flows, "synth")
    schema, spec = _feature_spec(config)
    result = parse_records(flows, schema, strict=config.strict)
    if result.skipped:
        logger.warning("extract: skipped %d malformed lines", result.skipped)
    if not result.records:
        raise PipelineError(f"no parseable records in {flows}")
    vectors = window_vectors(
        result.records, spec, config.window_hours, config.utc_offset_hours
    )
    weeks, dropped = build_user_weeks(
        vectors, windows_per_day=24 // config.window_hours
    )
    if not weeks:
        raise PipelineError("no complete user-weeks survived windowing")
    if ws.labels.exists():
        weeks = attach_labels(weeks, parse_labels(ws.labels.read_text(encoding="utf-8")))
    dataset = WeekDataset(
        weeks,
        meta={
            "config_hash": config.hash,
            "seed": config.seed,
            "schema": schema.name,
            "window_hours": config.window_hours,
            "d": weeks[0].x_seq.shape[1],
            "n_windows": weeks[0].x_seq.shape[0],
            "dropped_weeks": dropped,
            "clustering_indices": [int(i) for i in spec.clustering_indices],
        },
    )
    tmp = ws.dataset.with_name(ws.dataset.name + ".tmp")
    ws.root.mkdir(parents=True, exist_ok=True)
    save_dataset(tmp, dataset)
    os.replace(tmp, ws.dataset)
    logger.info(
        "extract: %d user-weeks (%d dropped), %d features",
        len(weeks), dropped, dataset.feature_dim,
    )
    _update_manifest(ws, config, "extract", [ws.dataset])
    return dataset


def stage_cluster(config: PipelineConfig) -> dict[str, int]:
    """Group users by mean behaviour profile; returns user -> cluster."""
    ws = Workspace(config)
    if _is_current(ws.clusters, config):
        logger.info("cluster: %s up to date, skipping", ws.clusters.name)
        doc = json.loads(ws.clusters.read_text(encoding="utf-8"))
        return {u: int(c) for u, c in doc["assignments"].items()}
    dataset = load_dataset(_require(ws.dataset, "extract"))
    _check_hash(dataset.meta.get("config_hash"), config, ws.dataset, "extract")
    indices = dataset.meta.get("clustering_indices")
    users, profiles = user_profiles(dataset.weeks, indices=indices)
    if len(users) < 2:
        raise PipelineError(f"clustering needs at least 2 users, got {len(users)}")
    if config.standardize_clustering:
        profiles = Standardizer().fit(profiles).transform(profiles)
    sweep_scores: dict[int, float] = {}
    if config.k is not None:
        k = config.k
    else:
        k_max = min(config.k_max, len(users) - 1)
        if k_max < config.k_min:
            raise PipelineError(
                f"cannot sweep k in {config.k_min}..{config.k_max} with {len(users)} users"
            )
        k, sweep_scores = select_k(
            profiles,
            range(config.k_min, k_max + 1),
            method=config.cluster_method,
            seed=Rng(config.seed).derive("select_k_stage").next_u64(),
        )
        logger.info("cluster: selected k=%d from silhouette sweep", k)
    assignments, model = cluster_users(
        users,
        profiles,
        k,
        method=config.cluster_method,
        seed=Rng(config.seed).derive("cluster_stage").next_u64(),
    )
    _atomic_json(
        ws.clusters,
        {
            "config_hash": config.hash,
            "seed": config.seed,
            "method": config.cluster_method,
            "k": k,
            "cost": model.cost,
            "silhouette_by_k": {str(kk): v for kk, v in sweep_scores.items()},
            "standardized": config.standardize_clustering,
            "assignments": assignments,
        },
    )
    sizes = {c: sum(1 for v in assignments.values() if v == c) for c in range(k)}
    logger.info("cluster: %d users -> %d clusters %s", len(users), k, sizes)
    _update_manifest(ws, config, "cluster", [ws.clusters])
    return assignments


def _load_clustered_weeks(
    config: PipelineConfig, ws: Workspace
) -> tuple[WeekDataset, dict[int, list[UserWeek]], dict[int, list[str]]]:
    dataset = load_dataset(_require(ws.dataset, "extract"))
    _check_hash(dataset.meta.get("config_hash"), config, ws.dataset, "extract")
    doc = _json_artifact(ws.clusters, config, "cluster")
    assignments = {u: int(c) for u, c in doc["assignments"].items()}
    missing = {w.user_id for w in dataset.weeks} - set(assignments)
    if missing:
        raise PipelineError(
            f"{len(missing)} users missing from {ws.clusters.name}; rerun `flowemb cluster`"
        )
    weeks_by_cluster: dict[int, list[UserWeek]] = {}
    users_by_cluster: dict[int, list[str]] = {}
    for w in dataset.weeks:  # dataset order is sorted (user, week)
        cid = assignments[w.user_id]
        weeks_by_cluster.setdefault(cid, []).append(w)
    for user, cid in assignments.items():
        users_by_cluster.setdefault(cid, []).append(user)
    return dataset, weeks_by_cluster, users_by_cluster


def _split_weeks(
    weeks: Sequence[UserWeek], split: Split, cluster: int
) -> tuple[list[UserWeek], list[UserWeek]]:
    train_users = set(split.train.get(cluster, ()))
    test_users = set(split.test.get(cluster, ()))
    train = [w for w in weeks if w.user_id in train_users]
    test = [w for w in weeks if w.user_id in test_users]
    return train, test


def _fit_one_cluster(
    config: PipelineConfig,
    embedder: str,
    cluster: int,
    train_weeks: list[UserWeek],
    test_weeks: list[UserWeek],
):
    if not train_weeks:
        raise PipelineError(f"cluster {cluster} has no training weeks")
    std = Standardizer().fit(windows(train_weeks))
    train_rows = windows(std.transform_weeks(train_weeks))
    seed = Rng(config.seed).derive("train", embedder, cluster).next_u64()
    emb_config = config.embedder_config(seed)
    try:
        if embedder == "pca":
            model = pca_fit(train_rows, config.p)
        elif embedder == "ae":
            model = ae_fit(train_rows, emb_config)
        else:
            probe = (
                sequences(std.transform_weeks(test_weeks))
                if test_weeks and config.snapshot_epochs
                else None
            )
            model = seq2seq_fit(
                sequences(std.transform_weeks(train_weeks)),
                emb_config,
                snapshot_input=probe,
            )
    except (ValueError, RuntimeError) as exc:
        raise PipelineError(f"training {embedder} on cluster {cluster} failed: {exc}") from exc
    return model, std


def stage_train(config: PipelineConfig, embedder: str | None = None) -> list[Path]:
    """Split users and fit one embedder per cluster on the training side."""
    emb = embedder or config.embedder
    if emb not in EMBEDDER_KINDS:
        raise PipelineError(f"unknown embedder {emb!r}; choose from {list(EMBEDDER_KINDS)}")
    ws = Workspace(config)
    dataset, weeks_by_cluster, users_by_cluster = _load_clustered_weeks(config, ws)
    clusters = sorted(weeks_by_cluster)
    targets = [ws.model(emb, cid) for cid in clusters]
    if _is_current(ws.split, config) and all(_is_current(t, config) for t in targets):
        logger.info("train[%s]: models up to date, skipping", emb)
        return targets

    split = split_users(users_by_cluster, ratio=config.split_ratio, seed=config.seed)
    _atomic_json(
        ws.split,
        {
            "config_hash": config.hash,
            "seed": config.seed,
            "ratio": config.split_ratio,
            "train": {str(c): u for c, u in split.train.items()},
            "test": {str(c): u for c, u in split.test.items()},
        },
    )

    def job(cid: int):
        train_weeks, test_weeks = _split_weeks(weeks_by_cluster[cid], split, cid)
        model, std = _fit_one_cluster(config, emb, cid, train_weeks, test_weeks)
        meta = {
            "config_hash": config.hash,
            "seed": config.seed,
            "embedder": emb,
            "cluster": cid,
            "train_weeks": len(train_weeks),
            "test_weeks": len(test_weeks),
        }
        tmp = ws.model(emb, cid).with_name(ws.model(emb, cid).name + ".tmp")
        save_model(tmp, model, standardizer=std, meta=meta)
        os.replace(tmp, ws.model(emb, cid))
        logger.info(
            "train[%s]: cluster %d fitted on %d weeks (%d test)",
            emb, cid, len(train_weeks), len(test_weeks),
        )

    with ThreadPoolExecutor(max_workers=min(len(clusters), os.cpu_count() or 1)) as pool:
        list(pool.map(job, clusters))
    _update_manifest(ws, config, f"train_{emb}", [ws.split, *targets])
    return targets


def stage_score(config: PipelineConfig, embedder: str | None = None) -> Path:
    """Encode every test week and write its kNN anomaly score."""
    emb = embedder or config.embedder
    ws = Workspace(config)
    out = ws.scores(emb)
    if _is_current(out, config) and _csv_comments(out).get("embedder") == emb:
        logger.info("score[%s]: %s up to date, skipping", emb, out.name)
        return out
    dataset, weeks_by_cluster, _ = _load_clustered_weeks(config, ws)
    split_doc = _json_artifact(ws.split, config, "train")
    split = Split(
        train={int(c): list(u) for c, u in split_doc["train"].items()},
        test={int(c): list(u) for c, u in split_doc["test"].items()},
        ratio=float(split_doc["ratio"]),
        seed=int(split_doc["seed"]),
    )
    lines = [
        f"# config_hash={config.hash}",
        f"# seed={config.seed}",
        f"# embedder={emb}",
        f"# k_nn={config.k_nn}",
        "user_id,week_index,cluster_id,score,label",
    ]
    n_scored = 0
    for cid in sorted(weeks_by_cluster):
        path = _require(ws.model(emb, cid), f"train --embedder {emb}")
        saved: SavedModel = load_model(path)
        _check_hash(saved.meta.get("config_hash"), config, path, "train")
        if saved.kind != emb:
            raise PipelineError(f"{path.name} holds a {saved.kind} model, expected {emb}")
        std = saved.standardizer
        if std is None:
            raise PipelineError(f"{path.name} lacks its standardizer; rerun `flowemb train`")
        train_weeks, test_weeks = _split_weeks(weeks_by_cluster[cid], split, cid)
        if not test_weeks:
            logger.warning("score[%s]: cluster %d has no test weeks", emb, cid)
            continue
        train_reps = encode_weeks(saved.model, sequences(std.transform_weeks(train_weeks)))
        try:
            scorer = KnnScorer(train_reps, k_nn=config.k_nn)
        except ValueError as exc:
            raise PipelineError(f"cluster {cid}: {exc}") from exc
        test_reps = encode_weeks(saved.model, sequences(std.transform_weeks(test_weeks)))
        ids = [(w.user_id, w.week_index) for w in test_weeks]
        for week, record in zip(test_weeks, score_all(scorer, test_reps, ids)):
            label = week.label or ""
            lines.append(
                f"{record.user_id},{record.week_index},{cid},{record.score!r},{label}"
            )
            n_scored += 1
    if n_scored == 0:
        raise PipelineError("no test weeks were scored; check the split and clusters")
    _atomic_write(out, "\n".join(lines) + "\n")
    logger.info("score[%s]: wrote %d scores to %s", emb, n_scored, out.name)
    _update_manifest(ws, config, f"score_{emb}", [out])
    return out


def _read_scores(path: Path) -> list[tuple[str, str, int, float, str]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#") or line.startswith("user_id,"):
                continue
            user, week, cid, score, label = line.split(",")
            rows.append((user, week, int(cid), float(score), label))
    return rows


def stage_eval(config: PipelineConfig, embedder: str | None = None) -> dict[str, Any]:
    """Per-cluster and pooled precision-recall; exports snapshot scatters."""
    emb = embedder or config.embedder
    ws = Workspace(config)
    scores_path = _require(ws.scores(emb), f"score --embedder {emb}")
    comments = _csv_comments(scores_path)
    _check_hash(comments.get("config_hash"), config, scores_path, "score")
    if comments.get("embedder") != emb:
        raise PipelineError(
            f"{scores_path.name} was scored with embedder {comments.get('embedder')!r}"
        )
    rows = _read_scores(scores_path)
    if any(label == "" for *_fields, label in rows):
        raise PipelineError(
            "scores lack ground-truth labels; extract needs a labels CSV before eval"
        )

    artifacts: list[Path] = []
    cluster_ids = sorted({cid for _, _, cid, _, _ in rows})
    cluster_areas: dict[str, float] = {}
    skipped: list[int] = []
    for cid in cluster_ids:
        subset = [(s, l) for _, _, c, s, l in rows if c == cid]
        labels = [l for _, l in subset]
        if "anomalous" not in labels or "normal" not in labels:
            skipped.append(cid)
            logger.info("eval[%s]: cluster %d lacks both label classes, skipped", emb, cid)
            continue
        curve = pr_curve([s for s, _ in subset], labels)
        out = ws.pr_file(emb, cid)
        write_pr_curve(
            out, curve,
            comments={"config_hash": config.hash, "seed": config.seed,
                      "embedder": emb, "cluster": cid},
        )
        artifacts.append(out)
        cluster_areas[str(cid)] = curve.area
    pooled = pr_curve([s for _, _, _, s, _ in rows], [l for *_rest, l in rows])
    pooled_path = ws.pr_file(emb, None)
    write_pr_curve(
        pooled_path, pooled,
        comments={"config_hash": config.hash, "seed": config.seed,
                  "embedder": emb, "cluster": "pooled"},
    )
    artifacts.append(pooled_path)

    scatter_files = _export_snapshots(config, emb, ws)
    artifacts.extend(scatter_files)

    summary = {
        "config_hash": config.hash,
        "seed": config.seed,
        "embedder": emb,
        "pooled_area": pooled.area,
        "cluster_areas": cluster_areas,
        "skipped_clusters": skipped,
        "scatter_files": sorted(p.name for p in scatter_files),
    }
    _atomic_json(ws.eval_summary(emb), summary)
    artifacts.append(ws.eval_summary(emb))
    logger.info("eval[%s]: pooled PR-AUC %.4f", emb, pooled.area)
    _update_manifest(ws, config, f"eval_{emb}", artifacts)
    return summary


def _export_snapshots(config: PipelineConfig, emb: str, ws: Workspace) -> list[Path]:
    """Scatter CSVs of any training snapshots stored on the cluster models."""
    dataset, weeks_by_cluster, _ = _load_clustered_weeks(config, ws)
    split_doc = _json_artifact(ws.split, config, "train")
    split = Split(
        train={int(c): list(u) for c, u in split_doc["train"].items()},
        test={int(c): list(u) for c, u in split_doc["test"].items()},
        ratio=float(split_doc["ratio"]),
        seed=int(split_doc["seed"]),
    )
    written: list[Path] = []
    for cid in sorted(weeks_by_cluster):
        path = ws.model(emb, cid)
        if not path.exists():
            continue
        saved = load_model(path)
        snapshots = getattr(saved.model, "snapshots", None)
        if not snapshots:
            continue
        _, test_weeks = _split_weeks(weeks_by_cluster[cid], split, cid)
        labels = [w.label or "unlabelled" for w in test_weeks]
        written.extend(
            scatter_export(
                snapshots,
                labels,
                ws.scatter_dir,
                prefix=f"{emb}_c{cid}",
                comments={"config_hash": config.hash, "seed": config.seed,
                          "embedder": emb, "cluster": cid},
            )
        )
    return written


def stage_repro(config: PipelineConfig) -> dict[str, Any]:
    """Full run: synth, extract, cluster, then train/score/eval per embedder."""
    ws = Workspace(config)
    stage_synth(config)
    stage_extract(config)
    stage_cluster(config)
    areas: dict[str, float] = {}
    for emb in EMBEDDER_KINDS:
        stage_train(config, emb)
        stage_score(config, emb)
        areas[emb] = stage_eval(config, emb)["pooled_area"]
    lines = [
        f"# config_hash={config.hash}",
        f"# seed={config.seed}",
        "embedder,pr_auc",
    ]
    for emb in EMBEDDER_KINDS:
        lines.append(f"{emb},{areas[emb]!r}")
    _atomic_write(ws.summary, "\n".join(lines) + "\n")
    _update_manifest(ws, config, "repro", [ws.summary])
    logger.info("repro: summary written to %s", ws.summary)
    return {"summary_path": ws.summary, "areas": areas}
