"""Acceptance gate: seven end-to-end checks, one verdict line each.

Each check prints a single ``[acceptance] n/7 ...: PASS/FAIL`` line on the
real terminal (capture disabled) so a plain ``pytest -v`` run shows the
verdicts inline. The first three checks re-run the reference oracles from
the unit suite at their pinned tolerances; the last four exercise the full
pipeline on the built-in benchmark, sharing five seeded runs through a
module fixture so the whole file stays well under the ten-minute budget.
"""
from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np
import pytest

from flowemb.detect import KnnScorer
from flowemb.embed import (
    attention_weights,
    pca_encode,
    pca_fit,
    pca_reconstruct,
    seq2seq_forward,
)
from flowemb.embed.ae import _batch_loss
from flowemb.embed.seq2seq import _forward_loss
from flowemb.evaluate import pr_curve
from flowemb.numkernel import Rng
from flowemb.pipeline import PipelineConfig, stage_repro
from flowemb.segment import kmeans_fit, kmodes_fit, select_k, silhouette

from helpers import check_gradients
from test_detect import brute_force_scores
from test_embed_ae import make_model as make_ae_model
from test_embed_as2s import make_model as make_as2s_model
from test_embed_as2s import straight_line_loss
from test_embed_pca import eigh_oracle
from test_evaluate import sweep_oracle
from test_segment import gaussian_blobs

BENCHMARK_SEEDS = (0, 1, 2, 3, 4)
SNAPSHOT_EPOCHS = PipelineConfig().snapshot_epochs
N_WEEKS = PipelineConfig().n_weeks


def _verdict(capsys: pytest.CaptureFixture, label: str, ok: bool, detail: str) -> None:
    """One visible pass/fail line per check, then the actual assertion."""
    with capsys.disabled():
        print(f"[acceptance] {label}: {'PASS' if ok else 'FAIL'} — {detail}", flush=True)
    assert ok, f"{label}: {detail}"


@pytest.fixture(scope="module")
def benchmark(tmp_path_factory: pytest.TempPathFactory) -> dict:
    """Five seeded full runs of the default benchmark configuration."""
    root = tmp_path_factory.mktemp("benchmark")
    areas: dict[int, dict[str, float]] = {}
    start = time.monotonic()
    for seed in BENCHMARK_SEEDS:
        cfg = PipelineConfig(workdir=str(root / f"seed{seed}"), seed=seed)
        areas[seed] = stage_repro(cfg)["areas"]
    return {"root": root, "areas": areas, "elapsed": time.monotonic() - start}


def test_1_gradients_match_finite_differences(capsys: pytest.CaptureFixture) -> None:
    """Analytic gradients of both trained losses vs central differences."""
    start = time.monotonic()
    worst = 0.0
    for seed in range(5):
        ae = make_ae_model(seed, d=6, p=4)
        batch = Rng(seed + 100).normal_array((8, 6))
        err = check_gradients(
            ae.params(),
            lambda tape: _batch_loss(ae, tape, batch),
            tolerance=float("inf"),
        )
        worst = max(worst, err)
    for seed in range(5):
        model = make_as2s_model(seed, d=3, p=4)
        seqs = Rng(seed + 200).normal_array((2, 5, 3))
        err = check_gradients(
            model.params(),
            lambda tape: _forward_loss(model, tape, seqs, teacher_forcing=True)[0],
            tolerance=float("inf"),
        )
        worst = max(worst, err)
    elapsed = time.monotonic() - start
    _verdict(
        capsys,
        "1/7 gradient suite",
        worst < 1e-4 and elapsed < 30.0,
        f"max rel err {worst:.2e} over 2x5 seeds in {elapsed:.1f}s",
    )


def test_2_reference_oracles_agree(capsys: pytest.CaptureFixture) -> None:
    """Scoring, average precision, PCA and sequence loss vs their oracles."""
    # (a) nearest-neighbor scores against the all-pairs oracle, bitwise.
    rng = np.random.default_rng(7)
    refs = rng.normal(size=(200, 8)) * 2.0
    queries = np.concatenate([refs[:100], rng.normal(size=(100, 8))])
    scorer = KnnScorer(refs, k_nn=5)
    knn_ok = [scorer.score(q) for q in queries] == brute_force_scores(refs, queries, 5)

    # (b) the worked four-point example and a tie-heavy 1000-point sweep.
    hand = pr_curve(
        [4.0, 3.0, 2.0, 1.0], ["anomalous", "normal", "anomalous", "normal"]
    )
    big_scores = [float(v) / 4.0 for v in rng.integers(0, 40, size=1000)]
    big_labels = ["anomalous" if rng.random() < 0.08 else "normal" for _ in range(998)]
    big_labels += ["anomalous", "normal"]  # both classes, whatever the draw
    _, sweep_area = sweep_oracle(big_scores, big_labels)
    pr_ok = (
        abs(hand.area - 5.0 / 6.0) <= 1e-12
        and pr_curve(big_scores, big_labels).area == sweep_area
    )

    # (c) principal directions against numpy's eigensolver on 5-D data.
    x = rng.normal(size=(60, 5)) @ np.diag([3.0, 2.0, 1.0, 0.5, 0.2])
    model = pca_fit(x, 5)
    mean_ref, eigvals_ref, comps_ref = eigh_oracle(x, 5)
    signs = np.sign(np.sum(comps_ref * model.components, axis=0))
    pca_ok = (
        np.allclose(model.mean, mean_ref, atol=1e-10)
        and np.allclose(model.eigenvalues, eigvals_ref, atol=1e-8)
        and np.allclose(model.components, comps_ref * signs, atol=1e-8)
    )

    # (d) teacher-forced sequence loss against the from-scratch reference.
    seq_model = make_as2s_model(11, d=3, p=4)
    seq = Rng(12).normal_array((5, 3))
    ref_loss, ref_recon = straight_line_loss(seq_model, seq)
    recon, loss = seq2seq_forward(seq_model, seq, teacher_forcing=True)
    seq_ok = abs(loss - ref_loss) <= 1e-10 and bool(
        np.all(np.abs(recon - ref_recon) <= 1e-10)
    )

    _verdict(
        capsys,
        "2/7 oracle equivalence",
        knn_ok and pr_ok and pca_ok and seq_ok,
        f"knn={knn_ok} pr_auc={pr_ok} pca={pca_ok} seq_loss={seq_ok}",
    )


def test_3_exact_invariants_hold(capsys: pytest.CaptureFixture) -> None:
    """Attention normalisation, silhouette bounds, monotone costs."""
    rng = Rng(42)
    worst_gap = 0.0
    for _ in range(10_000):
        p = 1 + rng.randint(6)
        n = 1 + rng.randint(9)
        alpha = attention_weights(
            rng.normal_array((p,), sigma=2.0),
            rng.normal_array((n, p), sigma=2.0),
            rng.normal_array((p, p)),
            rng.normal_array((p, p)),
            rng.normal_array((p,)),
        )
        worst_gap = max(worst_gap, abs(float(alpha.sum()) - 1.0))
        if np.any(alpha < 0.0):
            worst_gap = float("inf")
    attn_ok = worst_gap <= 1e-12

    sil_ok = True
    np_rng = np.random.default_rng(5)
    for trial in range(20):
        pts = np_rng.normal(size=(40, 3)) * (1.0 + trial)
        marks = np_rng.integers(0, 2 + trial % 3, size=40)
        marks[0], marks[1] = 0, 1  # at least two clusters present
        result = silhouette(pts, marks)
        sil_ok = sil_ok and bool(
            np.all(result.sc >= -1.0)
            and np.all(result.sc <= 1.0)
            and -1.0 <= result.mean_sc <= 1.0
        )

    cost_ok = True
    for seed in range(5):
        blob_x, _ = gaussian_blobs([(0, 0), (6, 4), (9, 0)], 25, 2.0, seed=seed)
        inertia = np.asarray(kmeans_fit(blob_x, 3, seed=seed).cost_history)
        cost_ok = cost_ok and bool(np.all(np.diff(inertia) <= 1e-9))
        bits = (np_rng.random(size=(60, 12)) < 0.4).astype(np.int64)
        mismatches = np.asarray(kmodes_fit(bits, 4, seed=seed).cost_history)
        cost_ok = cost_ok and bool(np.all(np.diff(mismatches) <= 0.0))

    x = np_rng.normal(size=(80, 7)) @ np.diag([4.0, 3.0, 2.0, 1.5, 1.0, 0.5, 0.1])
    errors = []
    for p in range(1, 8):
        model = pca_fit(x, p)
        recon = pca_reconstruct(model, pca_encode(model, x))
        errors.append(float(np.mean((x - recon) ** 2)))
    recon_ok = bool(np.all(np.diff(errors) <= 1e-12))

    _verdict(
        capsys,
        "3/7 exact invariants",
        attn_ok and sil_ok and cost_ok and recon_ok,
        f"attention gap {worst_gap:.1e}; silhouette bounded {sil_ok}; "
        f"costs monotone {cost_ok}; reconstruction monotone {recon_ok}",
    )


def test_4_cluster_count_recovery(
    capsys: pytest.CaptureFixture, benchmark: dict
) -> None:
    """Three planted blobs give k=3; the benchmark's two archetypes give k=2."""
    hits = 0
    for seed in range(10):
        x, _ = gaussian_blobs([(0, 0), (30, 0), (0, 30)], 50, 1.0, seed=100 + seed)
        k_star, _ = select_k(x, range(2, 9), seed=seed)
        hits += int(k_star == 3)
    doc = json.loads((benchmark["root"] / "seed0" / "clusters.json").read_text())
    bench_k = int(doc["k"])
    _verdict(
        capsys,
        "4/7 cluster-count recovery",
        hits >= 9 and bench_k == 2,
        f"three-blob sweep chose k=3 on {hits}/10 seeds; benchmark chose k={bench_k}",
    )


def test_5_benchmark_ordering(capsys: pytest.CaptureFixture, benchmark: dict) -> None:
    """Sequence model reaches useful precision-recall area and beats PCA."""
    wins = sum(
        1
        for areas in benchmark["areas"].values()
        if areas["as2s"] >= 0.5 and areas["as2s"] >= areas["pca"]
    )
    by_seed = " ".join(
        f"s{seed}:{areas['as2s']:.2f}/{areas['pca']:.2f}"
        for seed, areas in sorted(benchmark["areas"].items())
    )
    _verdict(
        capsys,
        "5/7 benchmark ordering",
        wins >= 4 and benchmark["elapsed"] < 600.0,
        f"{wins}/5 seeds (as2s/pca: {by_seed}) in {benchmark['elapsed']:.0f}s",
    )


def test_6_reruns_are_byte_identical(
    capsys: pytest.CaptureFixture, benchmark: dict, tmp_path: Path
) -> None:
    """A second run of the same configuration reproduces every byte."""
    again = tmp_path / "again"
    stage_repro(PipelineConfig(workdir=str(again), seed=0))
    first = benchmark["root"] / "seed0"
    names = ["scores_pca.csv", "scores_ae.csv", "scores_as2s.csv", "summary.csv"]
    same = {n: (first / n).read_bytes() == (again / n).read_bytes() for n in names}
    _verdict(
        capsys,
        "6/7 determinism",
        all(same.values()),
        "identical: " + " ".join(f"{n}={v}" for n, v in same.items()),
    )


def test_7_snapshot_exports(capsys: pytest.CaptureFixture, benchmark: dict) -> None:
    """One 2-D CSV per snapshot epoch, one row per held-out week."""
    base = benchmark["root"] / "seed0"
    split = json.loads((base / "split.json").read_text())
    ok = True
    counts = []
    for cid, users in sorted(split["test"].items()):
        expected = len(users) * N_WEEKS
        for epoch in SNAPSHOT_EPOCHS:
            path = base / "scatter" / f"as2s_c{cid}_epoch{epoch:03d}.csv"
            lines = [
                ln
                for ln in path.read_text(encoding="utf-8").splitlines()
                if ln and not ln.startswith("#")
            ]
            header, rows = lines[0], lines[1:]
            ok = ok and header.split(",")[:2] == ["x", "y"] and len(rows) == expected
            counts.append(f"c{cid}e{epoch}:{len(rows)}/{expected}")
    _verdict(
        capsys,
        "7/7 snapshot export",
        ok and bool(counts),
        "rows/expected per file: " + " ".join(counts),
    )
