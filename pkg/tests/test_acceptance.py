"""Acceptance criteria 1-10; each test prints one PASS/FAIL line."""

import itertools
import json
import math
import shutil
import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, cm1_masks
from duskfcm.cli import main
from duskfcm.clustering import ClusterConfig, data_diameter, duskfcm_fit, fit, kfcm_fit, skfcm_fit
from duskfcm.dataio import QuantizedImage
from duskfcm.features import FeatureMatrix, cfs_select
from duskfcm.metrics import METRIC_NAMES, full_report, segmentation_accuracy
from duskfcm.phantom import disk_phantom, write_phantom_dataset
from duskfcm.pipeline import PipelineConfig, calibrate, segment_image, strip_timing
from duskfcm.texture import GlcmConfig, compute_glcm

# tolerances and budgets
METRIC_TOL = 1e-12
METRIC_BUDGET_S = 5.0
MONO_TOL = 1e-9
SUM_TOL = 1e-9
REDUCTION_TOL = 1e-9
WIDE_KERNEL_TOL = 1e-3
DICE_MIN = 0.90
DICE_MARGIN = 0.01
PIPELINE_BUDGET_S = 10.0
BENCH_BUDGET_S = 120.0
CFS_TOL = 1e-12


def record(number, ok, detail):
    ACCEPTANCE_LINES.append(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    print(ACCEPTANCE_LINES[-1])
    assert ok, detail


def naive_metrics(pred, gt):
    tp = fp = fn = tn = 0
    for p, g in zip(pred.ravel().tolist(), gt.ravel().tolist()):
        if p and g:
            tp += 1
        elif p:
            fp += 1
        elif g:
            fn += 1
        else:
            tn += 1
    sens = tp / (tp + fn)
    prec = tp / (tp + fp)
    return {
        "sa": (tp + tn) / (tp + fp + fn + tn),
        "sensitivity": sens,
        "precision": prec,
        "f1": 2 * prec * sens / (prec + sens),
        "mcc": (tp * tn - fp * fn) / math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)),
        "dice": 2 * tp / (2 * tp + fp + fn),
        "jaccard": tp / (tp + fp + fn),
        "specificity": tn / (tn + fp),
        "iou": tp / (tp + fp + fn),
    }


@pytest.fixture(scope="module")
def mask_corpus():
    rng = np.random.default_rng(2024)
    pairs = []
    for _ in range(1000):
        gt = rng.random((32, 32)) < rng.uniform(0.05, 0.95)
        pred = rng.random((32, 32)) < rng.uniform(0.05, 0.95)
        pairs.append((pred, gt))
    return pairs


def test_c01_metric_oracle(mask_corpus):
    t0 = time.monotonic()
    reports = [full_report(p, g) for p, g in mask_corpus]
    elapsed = time.monotonic() - t0
    worst = 0.0
    for (p, g), r in zip(mask_corpus, reports):
        ref = naive_metrics(p, g)
        worst = max(worst, max(abs(getattr(r, n) - ref[n]) for n in METRIC_NAMES))
        worst = max(worst, abs(segmentation_accuracy(p.astype(int), g.astype(int)) - ref["sa"]))
    record(1, worst <= METRIC_TOL and elapsed < METRIC_BUDGET_S,
           f"metric oracle: max |diff| {worst:.1e} (tol {METRIC_TOL:g}), {elapsed:.2f}s (< {METRIC_BUDGET_S:g}s)")


def test_c02_metric_identities(mask_corpus):
    worst = 0.0
    for p, g in mask_corpus:
        r = full_report(p, g)
        worst = max(worst, abs(r.f1 - r.dice), abs(r.iou - r.jaccard), abs(r.jaccard - r.dice / (2 - r.dice)))
    record(2, worst <= METRIC_TOL, f"metric identities: max |diff| {worst:.1e} (tol {METRIC_TOL:g})")


def test_c03_cm1_fixture():
    r = full_report(*cm1_masks())
    expected = {
        "sa": 0.85, "sensitivity": 8 / 9, "precision": 0.8, "f1": 16 / 19,
        "mcc": 70 / math.sqrt(9900), "dice": 16 / 19, "jaccard": 8 / 11,
        "specificity": 9 / 11, "iou": 8 / 11,
    }
    wrong = [n for n, v in expected.items() if getattr(r, n) != v]
    record(3, not wrong, f"CM1 fixture exact: mismatches {wrong or 'none'}")


def _instance(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(60, int(rng.integers(1, 4))))
    x[: int(rng.integers(10, 50))] += rng.uniform(0.5, 4)
    return x, int(rng.integers(2, 4))


def test_c04_monotonicity():
    worst_step = -np.inf
    worst_sum = 0.0
    for seed in range(100):
        x, c = _instance(seed)
        cfg = ClusterConfig(c=c, seed=seed, epsilon=1e-8)
        for method in ("fcm", "kfcm", "fkm", "gmm"):
            r = fit(method, x, cfg)
            d = np.diff(r.objective)
            step = (-d if r.trace_kind == "log_likelihood" else d).max(initial=-np.inf)
            worst_step = max(worst_step, step)
            # memberships after every iteration count, via truncated runs
            for k in range(1, min(r.iterations, 5) + 1):
                u = fit(method, x, replace(cfg, max_iter=k)).memberships
                worst_sum = max(worst_sum, np.abs(u.sum(0) - 1).max())
            worst_sum = max(worst_sum, np.abs(r.memberships.sum(0) - 1).max())
    record(4, worst_step <= MONO_TOL and worst_sum <= SUM_TOL,
           f"monotone traces: worst wrong-way step {worst_step:.1e}, worst column-sum error "
           f"{worst_sum:.1e} (tol {MONO_TOL:g})")


def test_c05_reduction_chain():
    worst_dus = worst_sk = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        dims = (8, 9)
        x = rng.normal(size=(72, 2))
        x[:36] += 2.5
        cfg = ClusterConfig(seed=seed)
        dus = duskfcm_fit(x, replace(cfg, p=1, q=0), dims)
        sk = skfcm_fit(x, cfg, dims)
        worst_dus = max(worst_dus, np.abs(dus.memberships - sk.memberships).max())
        sk0 = skfcm_fit(x, replace(cfg, alpha=0), dims)
        worst_sk = max(worst_sk, np.abs(sk0.memberships - kfcm_fit(x, cfg).memberships).max())
    pts = np.array([0.0, 0.1, 10.0, 10.1])
    cfg = ClusterConfig(epsilon=1e-10)
    f = fit("fcm", pts, cfg)
    k = kfcm_fit(pts, replace(cfg, sigma=1e3 * data_diameter(pts)))
    fu = f.memberships[np.argsort(f.centroids[:, 0])]
    ku = k.memberships[np.argsort(k.centroids[:, 0])]
    wide = np.abs(fu - ku).max()
    record(5, worst_dus <= REDUCTION_TOL and worst_sk <= REDUCTION_TOL and wide <= WIDE_KERNEL_TOL,
           f"reductions: dus(p=1,q=0)-skfcm {worst_dus:.1e}, skfcm(a=0)-kfcm {worst_sk:.1e} "
           f"(tol {REDUCTION_TOL:g}); wide-kernel kfcm-fcm {wide:.1e} (tol {WIDE_KERNEL_TOL:g})")


def test_c06_glcm_oracle():
    rng = np.random.default_rng(6)
    cfg = GlcmConfig(levels=8)
    mismatches = 0
    for _ in range(100):
        img = rng.integers(0, 8, (8, 8))
        for k, (dx, dy) in enumerate(cfg.offsets):
            ref = np.zeros((8, 8), dtype=np.int64)
            for r in range(8):
                for c in range(8):
                    if 0 <= r + dy < 8 and 0 <= c + dx < 8:
                        a, b = img[r, c], img[r + dy, c + dx]
                        ref[a, b] += 1
                        ref[b, a] += 1
            mismatches += not np.array_equal(compute_glcm(QuantizedImage(img, 8), cfg, k).counts, ref)
    classic = np.array([[0, 0, 1, 1], [0, 0, 1, 1], [0, 2, 2, 2], [2, 2, 3, 3]])
    got = compute_glcm(QuantizedImage(classic, 4), GlcmConfig(levels=4, offsets=((1, 0),))).counts
    want = np.array([[4, 2, 1, 0], [2, 4, 0, 0], [1, 0, 6, 1], [0, 0, 1, 2]])
    classic_ok = np.array_equal(got, want)
    record(6, mismatches == 0 and classic_ok,
           f"GLCM oracle: {mismatches} mismatching matrices of 400, classic example {'ok' if classic_ok else 'wrong'}")


@pytest.fixture(scope="module")
def calibrated(tmp_path_factory):
    """Feature subset chosen by CFS on a separate training phantom set."""
    root = write_phantom_dataset(tmp_path_factory.mktemp("train"), count=6, size=128, seed=777)
    selection = calibrate(PipelineConfig(dataset=str(root)), rows_per_image=2000)
    return selection.names


def _dice(a, b):
    return 2 * np.count_nonzero(a & b) / (np.count_nonzero(a) + np.count_nonzero(b))


def test_c07_noise_robustness(calibrated):
    rgb, truth = disk_phantom(size=128, radius=32, noise_sigma=20, salt_pepper=0.05, seed=0)
    cfg = PipelineConfig(selected_features=calibrated, seed=0)
    t0 = time.monotonic()
    dus = segment_image(rgb, cfg)
    elapsed = time.monotonic() - t0
    fcm = segment_image(rgb, replace(cfg, method="fcm"))
    d_dus, d_fcm = _dice(dus.mask, truth), _dice(fcm.mask, truth)
    ok = d_dus >= DICE_MIN and d_dus >= d_fcm - DICE_MARGIN and elapsed < PIPELINE_BUDGET_S
    record(7, ok, f"noisy phantom: duskfcm dice {d_dus:.4f} (>= {DICE_MIN}), fcm dice {d_fcm:.4f} "
                  f"(dus >= fcm - {DICE_MARGIN}), pipeline {elapsed:.2f}s (< {PIPELINE_BUDGET_S:g}s)")


def test_c08_determinism(tmp_path, calibrated):
    data = write_phantom_dataset(tmp_path / "data", count=3, size=64, seed=11)
    cfg_path = tmp_path / "cfg.json"
    PipelineConfig(dataset=str(data), output=str(tmp_path / "out"),
                   selected_features=calibrated, seed=4).save(cfg_path)
    snapshots = []
    for _ in range(2):
        assert main(["run", "--config", str(cfg_path)]) == 0
        out = tmp_path / "out"
        report = strip_timing(json.loads((out / "report.json").read_text()))
        masks = {p.name: p.read_bytes() for p in sorted(out.glob("*_mask.png"))}
        snapshots.append((json.dumps(report, indent=2, sort_keys=True).encode(), masks))
        shutil.rmtree(out)
    same_report = snapshots[0][0] == snapshots[1][0]
    same_masks = snapshots[0][1] == snapshots[1][1] and len(snapshots[0][1]) == 3
    record(8, same_report and same_masks,
           f"determinism: report.json identical={same_report}, mask PNGs identical={same_masks}")


def test_c09_cfs_exhaustive():
    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        y = rng.integers(0, 2, 500)
        cols = [rng.uniform(0, 2) * y + rng.normal(size=500) for _ in range(4)]
        cols += [cols[0] + 0.2 * rng.normal(size=500), rng.normal(size=500)]
        x = np.column_stack(cols)
        corr = np.corrcoef(np.column_stack([x, y]).T)
        rcf, rff = np.abs(corr[:-1, -1]), np.abs(corr[:-1, :-1])
        best = 0.0
        for k in range(1, 7):
            for s in itertools.combinations(range(6), k):
                s = list(s)
                mean_ff = (rff[np.ix_(s, s)].sum() - k) / (k * (k - 1)) if k > 1 else 0.0
                best = max(best, k * rcf[s].mean() / math.sqrt(k + k * (k - 1) * mean_ff))
        sel = cfs_select(FeatureMatrix(x, tuple(f"f{i}" for i in range(6))), y)
        worst = max(worst, abs(sel.merit - best))
    record(9, worst <= CFS_TOL, f"CFS vs 63-subset search: max |merit diff| {worst:.1e} over 10 sets (tol {CFS_TOL:g})")


def test_c10_benchmark(tmp_path, calibrated):
    data = write_phantom_dataset(tmp_path / "data", count=20, size=128, seed=0)
    cfg_path = tmp_path / "cfg.json"
    PipelineConfig(selected_features=calibrated).save(cfg_path)
    out = tmp_path / "bench"
    t0 = time.monotonic()
    code = main(["bench", "--config", str(cfg_path), "--dataset", str(data), "--output", str(out),
                 "--methods", "duskfcm,skfcm,fcm,fkm,gmm"])
    elapsed = time.monotonic() - t0
    rows = json.loads((out / "benchmark.json").read_text())
    header = (out / "benchmark.csv").read_text().splitlines()[0].split(",")
    ok = (code == 0 and [r["method"] for r in rows] == ["duskfcm", "skfcm", "fcm", "fkm", "gmm"]
          and {"sa", "precision", "iou"} <= set(header) and (out / "benchmark.png").exists()
          and elapsed < BENCH_BUDGET_S)
    summary = ", ".join(f"{r['method']} iou {r['iou']:.3f}/coarse dice {r['coarse_dice']:.3f}" for r in rows)
    record(10, ok, f"benchmark: {len(rows)} rows in {elapsed:.1f}s (< {BENCH_BUDGET_S:g}s); {summary}")
