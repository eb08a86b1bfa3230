import json

import numpy as np

from duskfcm.cli import main
from duskfcm.dataio import save_mask

FEATURES = "mean_R,mean_B,autocorrelation,cluster_shade,sum_average"


def test_phantom_and_run(tmp_path, capsys):
    data = tmp_path / "data"
    assert main(["phantom", "--output", str(data), "--count", "2", "--size", "40"]) == 0
    assert len(list((data / "images").iterdir())) == 2
    out = tmp_path / "out"
    code = main(["run", "--dataset", str(data), "--output", str(out), "--selected-features", FEATURES,
                 "--figures", "false"])
    assert code == 0
    assert "dice" in capsys.readouterr().out
    assert (out / "report.json").exists()


def test_flags_override_config_and_env(tmp_path, monkeypatch):
    from duskfcm.cli import build_parser, resolve_config

    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps({"seed": 1, "method": "fcm", "c": 3}))
    monkeypatch.setenv("DUSKFCM_SEED", "5")
    args = build_parser().parse_args(["run", "--config", str(cfg_path), "--method", "gmm"])
    cfg = resolve_config(args)
    assert cfg.method == "gmm" and cfg.cluster.c == 3 and cfg.seed == 5
    args = build_parser().parse_args(["run", "--config", str(cfg_path), "--seed", "9"])
    assert resolve_config(args).cluster.seed == 9


def test_config_errors_exit_2(tmp_path, capsys):
    assert main(["run", "--dataset", str(tmp_path / "missing")]) == 2
    bad = tmp_path / "c.json"
    bad.write_text("{not json")
    assert main(["run", "--config", str(bad)]) == 2
    bad.write_text(json.dumps({"unknown_key": 1}))
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["run", "--method", "nope"]) == 2
    assert "error:" in capsys.readouterr().err


def test_partial_failure_exit_1(tmp_path):
    data = tmp_path / "data"
    main(["phantom", "--output", str(data), "--count", "1", "--size", "40"])
    (data / "images" / "z_bad.png").write_bytes(b"junk")
    code = main(["run", "--dataset", str(data), "--output", str(tmp_path / "o"),
                 "--selected-features", FEATURES, "--figures", "false"])
    assert code == 1


def test_metrics_command(tmp_path, capsys):
    pred = np.zeros((4, 5), bool)
    pred.ravel()[:10] = True
    gt = np.zeros((4, 5), bool)
    gt.ravel()[:8] = True
    gt.ravel()[10] = True
    save_mask(pred, tmp_path / "p.png")
    save_mask(gt, tmp_path / "g.png")
    assert main(["metrics", str(tmp_path / "p.png"), str(tmp_path / "g.png"),
                 "--output", str(tmp_path / "m.json")]) == 0
    result = json.loads((tmp_path / "m.json").read_text())
    assert result["p"]["dice"] == 16 / 19


def test_calibrate_writes_config(tmp_path, capsys):
    data = tmp_path / "data"
    main(["phantom", "--output", str(data), "--count", "2", "--size", "40"])
    target = tmp_path / "cal.json"
    assert main(["calibrate", "--dataset", str(data), "--write-config", str(target),
                 "--rows-per-image", "500"]) == 0
    cfg = json.loads(target.read_text())
    assert cfg["selected_features"]
