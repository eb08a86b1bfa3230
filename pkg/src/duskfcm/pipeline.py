"""Batch orchestration: features -> clustering -> lesion pick -> refinement -> metrics."""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .clustering import METHODS, ClusterConfig, ClusterResult, defuzzify, fit, select_lesion_cluster
from .colorfeat import color_feature_map
from .dataio import index_dataset, load_mask, load_rgb, quantize, save_mask, save_rgb, to_grayscale
from .errors import BadConfig, BadMethodList, DimensionMismatch, DuskfcmError
from .features import FeatureMatrix, SelectionResult, cfs_select, fuse, zscore
from .metrics import METRIC_NAMES, MetricsReport, full_report, mean_report
from .refine import REFINERS, RefineConfig, coarse_mask
from .texture import GlcmConfig, windowed_texture_map

log = logging.getLogger(__name__)

MAGENTA = (255, 0, 255)
GREEN = (0, 255, 0)
TIMING_KEY = "timing_ms"

_CLUSTER_KEYS = ("c", "m", "max_iter", "epsilon", "alpha", "p", "q", "window", "sigma")
_GLCM_KEYS = {"levels": "levels", "offsets": "offsets", "symmetric": "symmetric", "glcm_window": "window"}
_REFINE_KEYS = ("grow_threshold", "min_area", "closing_radius", "seed_quantile")


@dataclass(frozen=True)
class PipelineConfig:
    dataset: Optional[str] = None
    output: str = "out"
    method: str = "duskfcm"
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    glcm: GlcmConfig = field(default_factory=GlcmConfig)
    color_window: int = 5
    refiner: str = "region_grow"
    refine: RefineConfig = field(default_factory=RefineConfig)
    selected_features: Optional[tuple] = None
    formats: tuple = ("csv", "json")
    seed: int = 0
    jobs: int = 1
    figures: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise BadConfig(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.refiner not in REFINERS:
            raise BadConfig(f"unknown refiner {self.refiner!r}; expected one of {tuple(REFINERS)}")
        if self.color_window < 1 or self.color_window % 2 == 0:
            raise BadConfig("color_window must be odd and >= 1")
        bad = set(self.formats) - {"csv", "json"}
        if bad or not self.formats:
            raise BadConfig(f"formats must be a non-empty subset of csv/json, got {self.formats}")
        if self.jobs < 1:
            raise BadConfig("jobs must be >= 1")
        if self.selected_features is not None:
            object.__setattr__(self, "selected_features", tuple(self.selected_features))
        object.__setattr__(self, "formats", tuple(self.formats))
        # the top-level seed drives every seeded stage
        if self.cluster.seed != self.seed:
            object.__setattr__(self, "cluster", replace(self.cluster, seed=self.seed))

    # flat key/value view used by the JSON config file and the CLI flags
    def to_dict(self) -> dict:
        out = {
            "dataset": self.dataset,
            "output": self.output,
            "method": self.method,
            "color_window": self.color_window,
            "refiner": self.refiner,
            "selected_features": list(self.selected_features) if self.selected_features else None,
            "formats": list(self.formats),
            "seed": self.seed,
            "jobs": self.jobs,
            "figures": self.figures,
        }
        for k in _CLUSTER_KEYS:
            out[k] = getattr(self.cluster, k)
        for flat, attr in _GLCM_KEYS.items():
            value = getattr(self.glcm, attr)
            out[flat] = [list(o) for o in value] if flat == "offsets" else value
        for k in _REFINE_KEYS:
            out[k] = getattr(self.refine, k)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        known = set(cls().to_dict())
        unknown = set(data) - known
        if unknown:
            raise BadConfig(f"unknown config keys: {sorted(unknown)}")
        cluster = ClusterConfig(**{k: data.pop(k) for k in _CLUSTER_KEYS if k in data})
        glcm = GlcmConfig(**{attr: data.pop(flat) for flat, attr in _GLCM_KEYS.items() if flat in data})
        refine = RefineConfig(**{k: data.pop(k) for k in _REFINE_KEYS if k in data})
        top = {f.name for f in fields(cls)}
        kwargs = {k: v for k, v in data.items() if k in top}
        if "formats" in kwargs and isinstance(kwargs["formats"], str):
            kwargs["formats"] = tuple(s.strip() for s in kwargs["formats"].split(",") if s.strip())
        return cls(cluster=cluster, glcm=glcm, refine=refine, **kwargs)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


@dataclass
class SegmentationResult:
    mask: np.ndarray
    coarse: np.ndarray
    clustering: ClusterResult
    lesion_index: int
    ambiguous: bool
    timing_ms: dict


@dataclass
class RunReport:
    samples: dict  # id -> entry
    aggregate: dict
    config: dict
    version: str = __version__

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunReport":
        return cls(**data)

    def metrics(self) -> dict:
        """Sample id -> MetricsReport for every scored sample."""
        out = {}
        for sid, entry in self.samples.items():
            if entry.get("metrics"):
                m = entry["metrics"]
                out[sid] = MetricsReport(**{n: m[n] for n in METRIC_NAMES}, flags=tuple(m.get("flags", ())))
        return out


# ---------------------------------------------------------------- per-image stages

def image_features(rgb: np.ndarray, cfg: PipelineConfig) -> FeatureMatrix:
    """Fused, standardized color+texture rows for one image (all 31 columns)."""
    gray = to_grayscale(rgb)
    texture = windowed_texture_map(quantize(gray, cfg.glcm.levels), cfg.glcm)
    color = color_feature_map(rgb, cfg.color_window)
    return zscore(fuse(color, texture))


def select_features(fm: FeatureMatrix, cfg: PipelineConfig) -> FeatureMatrix:
    return fm.select(cfg.selected_features) if cfg.selected_features else fm


def segment_image(rgb: np.ndarray, cfg: PipelineConfig, fm: Optional[FeatureMatrix] = None) -> SegmentationResult:
    """Run one image through clustering and refinement.

    ``fm`` may carry precomputed (unselected) features so several methods can
    share them; the feature time is then reported as 0.
    """
    dims = rgb.shape[:2]
    t0 = time.monotonic()
    if fm is None:
        fm = image_features(rgb, cfg)
    fm = select_features(fm, cfg)
    t1 = time.monotonic()
    result = fit(cfg.method, fm, cfg.cluster, dims)
    labels = defuzzify(result, dims)
    choice = select_lesion_cluster(result, rgb, labels)
    t2 = time.monotonic()
    coarse = coarse_mask(result, choice.index, dims)
    mask = REFINERS[cfg.refiner](result, choice.index, fm, dims, cfg.refine)
    t3 = time.monotonic()
    timing = {
        "features": (t1 - t0) * 1e3,
        "cluster": (t2 - t1) * 1e3,
        "refine": (t3 - t2) * 1e3,
    }
    return SegmentationResult(mask, coarse, result, choice.index, choice.ambiguous, timing)


def contour(mask: np.ndarray) -> np.ndarray:
    """Mask pixels with at least one 4-neighbour outside the mask (or the image)."""
    mask = np.asarray(mask, dtype=bool)
    padded = np.pad(mask, 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return mask & ~interior


def render_overlay(img: np.ndarray, pred: np.ndarray, gt: Optional[np.ndarray] = None) -> np.ndarray:
    """Draw predicted margins in magenta and reference margins in green.

    Pixels inside both masks are blended 50% towards white; the reference
    contour is drawn last and wins on shared pixels.
    """
    img = np.asarray(img, dtype=np.uint8)
    pred = np.asarray(pred, dtype=bool)
    if pred.shape != img.shape[:2]:
        raise DimensionMismatch(f"prediction {pred.shape} vs image {img.shape[:2]}")
    if gt is not None:
        gt = np.asarray(gt, dtype=bool)
        if gt.shape != img.shape[:2]:
            raise DimensionMismatch(f"ground truth {gt.shape} vs image {img.shape[:2]}")
    out = img.copy()
    if gt is not None:
        both = pred & gt
        out[both] = ((out[both].astype(np.uint16) + 255 + 1) // 2).astype(np.uint8)
    out[contour(pred)] = MAGENTA
    if gt is not None:
        out[contour(gt)] = GREEN
    return out


# ---------------------------------------------------------------- batch

def _process_sample(sample, cfg: PipelineConfig, out_dir: Optional[Path], fm=None) -> dict:
    entry = {"id": sample.id, "error": None, "metrics": None, TIMING_KEY: None}
    try:
        rgb = load_rgb(sample.image)
        gt = load_mask(sample.mask, rgb.shape) if sample.mask is not None else None
        seg = segment_image(rgb, cfg, fm)
        if gt is not None:
            entry["metrics"] = full_report(seg.mask, gt).as_dict()
            entry["coarse_dice"] = full_report(seg.coarse, gt).dice
        entry["lesion_cluster"] = seg.lesion_index
        entry["ambiguous_lesion"] = seg.ambiguous
        entry["iterations"] = seg.clustering.iterations
        entry["converged"] = seg.clustering.converged
        entry["degenerate"] = seg.clustering.degenerate
        entry["objective"] = list(seg.clustering.objective)
        entry["mask_pixels"] = int(seg.mask.sum())
        entry[TIMING_KEY] = seg.timing_ms
        if out_dir is not None:
            save_mask(seg.mask, out_dir / f"{sample.id}_mask.png")
            save_rgb(render_overlay(rgb, seg.mask, gt), out_dir / f"{sample.id}_overlay.png")
    except (DuskfcmError, OSError) as exc:
        log.warning("sample %s failed: %s", sample.id, exc)
        entry["error"] = f"{type(exc).__name__}: {exc}"
    return entry


def _aggregate(entries: dict) -> dict:
    scored = [e["metrics"] for e in entries.values() if e.get("metrics")]
    means = {n: float(np.mean([m[n] for m in scored])) for n in METRIC_NAMES} if scored else {}
    return {
        "metrics": means,
        "n_samples": len(entries),
        "n_scored": len(scored),
        "n_failed": sum(1 for e in entries.values() if e["error"]),
    }


def run_pipeline(cfg: PipelineConfig, feature_cache: Optional[dict] = None, write: bool = True) -> RunReport:
    """Segment every sample of ``cfg.dataset``; failures are recorded, not raised."""
    if cfg.dataset is None:
        raise BadConfig("no dataset configured")
    index = index_dataset(cfg.dataset)
    out_dir = Path(cfg.output) if write else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    cache = feature_cache or {}
    samples = list(index)
    if cfg.jobs > 1 and len(samples) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = [
                pool.submit(_process_sample, s, cfg, out_dir, cache.get(s.id)) for s in samples
            ]
            entries = [f.result() for f in futures]
    else:
        entries = [_process_sample(s, cfg, out_dir, cache.get(s.id)) for s in samples]
    by_id = {e["id"]: e for e in sorted(entries, key=lambda e: e["id"])}
    report = RunReport(samples=by_id, aggregate=_aggregate(by_id), config=cfg.to_dict())
    if write:
        emit_report(report, cfg.formats, out_dir)
        if cfg.figures:
            from .figures import plot_convergence
            plot_convergence(report, out_dir / "convergence.png")
    return report


def _csv_rows(report: RunReport):
    header = ["id", *METRIC_NAMES, "flags", "error"]
    rows = [header]
    for sid, entry in report.samples.items():
        m = entry.get("metrics") or {}
        rows.append(
            [sid, *(repr(m[n]) if n in m else "" for n in METRIC_NAMES),
             ";".join(m.get("flags", [])), entry.get("error") or ""]
        )
    agg = report.aggregate.get("metrics", {})
    rows.append(
        ["aggregate", *(repr(agg[n]) if n in agg else "" for n in METRIC_NAMES),
         f"failed={report.aggregate.get('n_failed', 0)}", ""]
    )
    return rows


def emit_report(report: RunReport, formats, out_dir) -> list:
    """Write ``report.csv`` and/or ``report.json``; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        path = out_dir / "report.csv"
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerows(_csv_rows(report))
        written.append(path)
    if "json" in formats:
        path = out_dir / "report.json"
        with open(path, "w") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(path)
    return written


def load_report(path) -> RunReport:
    with open(path) as fh:
        return RunReport.from_dict(json.load(fh))


def strip_timing(data):
    """Copy of a report dict without timing fields (for determinism checks)."""
    if isinstance(data, dict):
        return {k: strip_timing(v) for k, v in data.items() if k != TIMING_KEY}
    if isinstance(data, list):
        return [strip_timing(v) for v in data]
    return data


# ---------------------------------------------------------------- calibration and benchmarking

def calibrate(cfg: PipelineConfig, rows_per_image: int = 2000) -> SelectionResult:
    """Pick features by CFS on pixels pooled from every sample that has a mask."""
    index = index_dataset(cfg.dataset)
    rng = np.random.default_rng([cfg.seed, 104729])
    blocks, labels = [], []
    names = None
    for sample in index.with_masks:
        rgb = load_rgb(sample.image)
        gt = load_mask(sample.mask, rgb.shape).ravel()
        fm = image_features(rgb, cfg)
        names = fm.names
        rows = np.arange(fm.n)
        if fm.n > rows_per_image:
            rows = np.sort(rng.choice(fm.n, rows_per_image, replace=False))
        blocks.append(fm.values[rows])
        labels.append(gt[rows])
    if not blocks:
        raise BadConfig("calibration needs at least one sample with a mask")
    pooled = FeatureMatrix(np.concatenate(blocks), names)
    return cfs_select(pooled, np.concatenate(labels))


BENCH_COLUMNS = ("sa", "precision", "iou", "dice", "sensitivity", "specificity", "mcc")


def benchmark_compare(cfg: PipelineConfig, methods, write: bool = True) -> list:
    """Run the pipeline once per method with shared features and seed.

    Returns one row per method with aggregate metrics; ``sa`` is the
    accuracy panel, alongside precision and IoU.
    """
    methods = list(methods)
    if len(methods) < 2:
        raise BadMethodList("benchmarking needs at least two methods")
    for m in methods:
        if m not in METHODS:
            raise BadMethodList(f"unknown method {m!r}")
    index = index_dataset(cfg.dataset)
    cache = {}
    for sample in index:
        try:
            cache[sample.id] = image_features(load_rgb(sample.image), cfg)
        except (DuskfcmError, OSError):
            pass  # the per-method run records the failure
    out_root = Path(cfg.output)
    rows = []
    for i, method in enumerate(methods):
        # repeated methods get their own directory so outputs are not clobbered
        sub = method if methods.index(method) == i else f"{method}_{i}"
        run_cfg = replace(cfg, method=method, output=str(out_root / sub), figures=False)
        report = run_pipeline(run_cfg, feature_cache=cache, write=write)
        agg = report.aggregate["metrics"]
        coarse = [e["coarse_dice"] for e in report.samples.values() if "coarse_dice" in e]
        rows.append({"method": method, **{k: agg.get(k, float("nan")) for k in BENCH_COLUMNS},
                     "coarse_dice": float(np.mean(coarse)) if coarse else float("nan"),
                     "n_failed": report.aggregate["n_failed"]})
    if write:
        write_benchmark(rows, out_root)
        if cfg.figures:
            from .figures import plot_benchmark
            plot_benchmark(rows, out_root / "benchmark.png")
    return rows


def write_benchmark(rows, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "benchmark.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", *BENCH_COLUMNS, "coarse_dice", "n_failed"])
        for row in rows:
            writer.writerow([row["method"], *(repr(row[k]) for k in BENCH_COLUMNS),
                             repr(row["coarse_dice"]), row["n_failed"]])
    with open(out_dir / "benchmark.json", "w") as fh:
        json.dump(rows, fh, indent=2)
        fh.write("\n")
