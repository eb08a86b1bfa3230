"""Command line entry point: ``duskfcm {run,calibrate,bench,metrics,phantom}``.

Settings resolve as defaults < ``--config`` JSON < ``DUSKFCM_SEED`` < flags.
Exit status: 0 success, 1 some samples failed, 2 config or dataset error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .clustering import METHODS
from .dataio import IMAGE_SUFFIXES, load_mask
from .errors import DuskfcmError
from .metrics import METRIC_NAMES, full_report
from .phantom import write_phantom_dataset

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2
SEED_ENV = "DUSKFCM_SEED"
DEFAULT_BENCH = ("duskfcm", "skfcm", "fcm", "fkm", "gmm")

log = logging.getLogger("duskfcm")


def _csv_list(text):
    return [s.strip() for s in text.split(",") if s.strip()]


def _offsets(text):
    # "1,0;0,1;1,1;1,-1"
    return [[int(v) for v in pair.split(",")] for pair in text.split(";") if pair.strip()]


def _bool(text):
    lowered = text.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _optional_float(text):
    return None if text.lower() in ("none", "auto") else float(text)


def _optional_int(text):
    return None if text.lower() in ("none", "auto") else int(text)


# flag name -> (type, help); names match the JSON config keys
CONFIG_FLAGS = {
    "dataset": (str, "dataset root with images/ and optional masks/"),
    "output": (str, "output directory"),
    "method": (str, f"clustering method, one of {', '.join(METHODS)}"),
    "c": (int, "number of clusters"),
    "m": (float, "fuzzifier (> 1)"),
    "max_iter": (int, "iteration cap"),
    "epsilon": (float, "convergence tolerance on membership change"),
    "alpha": (float, "spatial penalty weight"),
    "p": (float, "membership exponent of the smoothing step"),
    "q": (float, "neighbourhood exponent of the smoothing step"),
    "window": (int, "spatial neighbourhood side (odd)"),
    "sigma": (_optional_float, "Gaussian kernel bandwidth, or 'auto'"),
    "seed": (int, "random seed"),
    "levels": (int, "GLCM gray levels"),
    "offsets": (_offsets, "GLCM offsets as 'dx,dy;dx,dy;...'"),
    "symmetric": (_bool, "symmetric GLCM (true/false)"),
    "glcm_window": (int, "texture window side (odd)"),
    "color_window": (int, "color statistics window side (odd)"),
    "refiner": (str, "refinement stage: region_grow or none"),
    "grow_threshold": (float, "region-growing distance threshold"),
    "min_area": (_optional_int, "smallest kept component in pixels, or 'auto'"),
    "closing_radius": (int, "morphological closing radius"),
    "seed_quantile": (float, "membership quantile for growth seeds"),
    "selected_features": (_csv_list, "comma-separated feature names"),
    "formats": (_csv_list, "report formats: csv,json"),
    "jobs": (int, "worker processes"),
    "figures": (_bool, "render PNG figures (true/false)"),
}


def _add_config_flags(parser):
    parser.add_argument("--config", type=Path, help="JSON config file")
    for name, (typ, text) in CONFIG_FLAGS.items():
        names = [f"--{name}"]
        if "_" in name:
            names.append(f"--{name.replace('_', '-')}")
        parser.add_argument(*names, dest=name, type=typ, default=None, help=text)


def resolve_config(args):
    from .pipeline import PipelineConfig

    data = {}
    if args.config is not None:
        with open(args.config) as fh:
            data.update(json.load(fh))
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        data["seed"] = int(env_seed)
    for name in CONFIG_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    return PipelineConfig.from_dict(data)


def build_parser():
    parser = argparse.ArgumentParser(prog="duskfcm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="segment a dataset and write masks, overlays and reports")
    _add_config_flags(run)

    cal = sub.add_parser("calibrate", help="select features by CFS using ground-truth masks")
    _add_config_flags(cal)
    cal.add_argument("--write-config", type=Path, help="where to save the calibrated config")
    cal.add_argument("--rows-per-image", type=int, default=2000)

    bench = sub.add_parser("bench", help="compare clustering methods on one dataset")
    _add_config_flags(bench)
    bench.add_argument("--methods", type=_csv_list, default=list(DEFAULT_BENCH))

    met = sub.add_parser("metrics", help="score predicted masks against references")
    met.add_argument("pred", type=Path, help="predicted mask file or directory")
    met.add_argument("gt", type=Path, help="reference mask file or directory")
    met.add_argument("--output", type=Path, help="write the JSON result here")

    ph = sub.add_parser("phantom", help="write a synthetic disk-phantom dataset")
    ph.add_argument("--output", type=Path, required=True)
    ph.add_argument("--count", type=int, default=20)
    ph.add_argument("--size", type=int, default=128)
    ph.add_argument("--seed", type=int, default=0)
    ph.add_argument("--noise", type=float, default=20.0)
    ph.add_argument("--salt-pepper", type=float, default=0.05)
    return parser


def _cmd_run(args):
    from .pipeline import run_pipeline

    cfg = resolve_config(args)
    report = run_pipeline(cfg)
    agg = report.aggregate
    print(f"samples={agg['n_samples']} scored={agg['n_scored']} failed={agg['n_failed']}")
    for name, value in agg["metrics"].items():
        print(f"{name:12s} {value:.4f}")
    return EXIT_PARTIAL if agg["n_failed"] else EXIT_OK


def _cmd_calibrate(args):
    from dataclasses import replace

    from .pipeline import calibrate

    cfg = resolve_config(args)
    selection = calibrate(replace(cfg, selected_features=None), rows_per_image=args.rows_per_image)
    calibrated = replace(cfg, selected_features=selection.names)
    target = args.write_config or Path(cfg.output) / "config.json"
    target.parent.mkdir(parents=True, exist_ok=True)
    calibrated.save(target)
    print(json.dumps({"selected_features": list(selection.names), "merit": selection.merit}))
    print(f"config written to {target}")
    return EXIT_OK


def _cmd_bench(args):
    from .pipeline import BENCH_COLUMNS, benchmark_compare

    cfg = resolve_config(args)
    rows = benchmark_compare(cfg, args.methods)
    print("method    " + " ".join(f"{c:>11s}" for c in BENCH_COLUMNS))
    for row in rows:
        print(f"{row['method']:9s} " + " ".join(f"{row[c]:11.4f}" for c in BENCH_COLUMNS))
    return EXIT_PARTIAL if any(r["n_failed"] for r in rows) else EXIT_OK


def _mask_pairs(pred: Path, gt: Path):
    if pred.is_file() and gt.is_file():
        return [(pred.stem, pred, gt)]
    if pred.is_dir() and gt.is_dir():
        def stems(d):
            return {p.stem.removesuffix("_mask"): p for p in sorted(d.iterdir())
                    if p.suffix.lower() in IMAGE_SUFFIXES}
        ps, gs = stems(pred), stems(gt)
        return [(k, ps[k], gs[k]) for k in sorted(set(ps) & set(gs))]
    raise DuskfcmError("pred and gt must both be files or both be directories")


def _cmd_metrics(args):
    results = {}
    for sid, p, g in _mask_pairs(args.pred, args.gt):
        gt = load_mask(g)
        results[sid] = full_report(load_mask(p, gt.shape), gt).as_dict()
    if not results:
        raise DuskfcmError("no matching mask pairs")
    text = json.dumps(results, indent=2, sort_keys=True)
    if args.output:
        args.output.write_text(text + "\n")
    print(text)
    means = {n: sum(r[n] for r in results.values()) / len(results) for n in METRIC_NAMES}
    log.info("mean dice %.4f over %d pairs", means["dice"], len(results))
    return EXIT_OK


def _cmd_phantom(args):
    root = write_phantom_dataset(args.output, args.count, args.size, args.seed,
                                 args.noise, args.salt_pepper)
    print(f"wrote {args.count} phantoms to {root}")
    return EXIT_OK


COMMANDS = {
    "run": _cmd_run,
    "calibrate": _cmd_calibrate,
    "bench": _cmd_bench,
    "metrics": _cmd_metrics,
    "phantom": _cmd_phantom,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (DuskfcmError, OSError, json.JSONDecodeError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
