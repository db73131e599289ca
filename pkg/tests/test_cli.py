import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from ckdr.cli import main
from ckdr.config import RunConfig
from ckdr.errors import ConfigError

TRAIN_CSV = """+1,0.5,1.0
+1,1.5,0.8
-1,0.4,-1.2
-1,1.2,-0.7
+1,-0.5,1.1
-1,-0.3,-0.9
"""

BASE_CFG = """seed = 7
data.labeled = train.csv
data.format = csv
kernel.1.kind = coordinate-linear
kernel.1.coords = 2
kernel.2.kind = gaussian
kernel.2.bandwidth = 2.0
constraints.r = 2
constraints.lambda_r = 0.8
constraints.nu = 10.0
constraints.delta = 0.05
train.loss = hinge
train.mode = coupled
rademacher.draws = 1500
output.dir = {out}
"""


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    (tmp_path / "train.csv").write_text(TRAIN_CSV)
    (tmp_path / "run.cfg").write_text(BASE_CFG.format(out=tmp_path / "out"))
    monkeypatch.chdir(tmp_path)
    return tmp_path


def test_config_rejects_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("seed = 1\nfrobnicate = 2\n")
    with pytest.raises(ConfigError, match="unknown config key"):
        RunConfig.parse(cfg)


def test_config_rejects_duplicate_and_bad_values(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("seed = 1\nseed = 2\n")
    with pytest.raises(ConfigError, match="duplicate"):
        RunConfig.parse(cfg)
    cfg.write_text("constraints.r = x\n")
    with pytest.raises(ConfigError, match="cannot parse"):
        RunConfig.parse(cfg)


def test_config_kernel_parsing(tmp_path):
    cfg = tmp_path / "k.cfg"
    cfg.write_text("kernel.1.kind = coordinate-linear\nkernel.1.coords = 1,3\n")
    specs = RunConfig.parse(cfg).kernels()
    assert specs[0].coords == (0, 2)  # config coords are 1-based
    cfg.write_text("kernel.2.kind = linear\n")
    with pytest.raises(ConfigError, match="contiguous"):
        RunConfig.parse(cfg).kernels()
    cfg.write_text("kernel.1.kind = linear\nkernel.1.degree = 2\n")
    with pytest.raises(ConfigError, match="does not take"):
        RunConfig.parse(cfg).kernels()


def test_train_and_predict_roundtrip(workdir):
    assert main(["train", "-c", "run.cfg"]) == 0
    assert main([
        "predict", "--model", str(workdir / "out" / "model.json"),
        "--data", "train.csv", "--labeled", "--out", "preds.csv",
    ]) == 0
    rows = (workdir / "preds.csv").read_text().strip().splitlines()
    assert rows[0] == "index,score,label"
    assert len(rows) == 7
    # scores reproduce the in-memory evaluation exactly
    from ckdr.data import load_points_csv
    from ckdr.model import evaluate, load_model
    X, _ = load_points_csv("train.csv", labeled=True)
    mdl = load_model(workdir / "out" / "model.json")
    scores = np.atleast_1d(evaluate(mdl, X))
    parsed = np.array([float(r.split(",")[1]) for r in rows[1:]])
    assert np.array_equal(scores, parsed)


def test_reports_are_byte_identical_across_reruns(workdir):
    assert main(["train", "-c", "run.cfg"]) == 0
    assert main(["bounds", "-c", "run.cfg"]) == 0
    assert main(["rademacher", "-c", "run.cfg"]) == 0
    first = {
        name: (workdir / "out" / name).read_bytes()
        for name in ("model.json", "trace.csv", "bounds.json", "bounds.csv",
                     "rademacher.json", "rademacher.csv", "train_summary.json")
    }
    assert main(["train", "-c", "run.cfg"]) == 0
    assert main(["bounds", "-c", "run.cfg"]) == 0
    assert main(["rademacher", "-c", "run.cfg"]) == 0
    for name, blob in first.items():
        assert (workdir / "out" / name).read_bytes() == blob, name


def test_bounds_with_model_adds_margin_terms(workdir):
    assert main(["train", "-c", "run.cfg"]) == 0
    assert main(["bounds", "-c", "run.cfg", "--model", str(workdir / "out" / "model.json")]) == 0
    payload = json.loads((workdir / "out" / "bounds.json").read_text())
    assert payload["bounds"]["margin_loss"] is not None
    assert payload["bounds"]["generalization_total"] is not None
    assert payload["bounds"]["lower_bound_value"] is not None


def test_figures_written(workdir):
    assert main(["train", "-c", "run.cfg"]) == 0
    assert (workdir / "out" / "trace.png").exists()
    assert main(["bounds", "-c", "run.cfg"]) == 0
    assert (workdir / "out" / "bounds.png").exists()


def test_demo_command(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["demo", "--out", "demo_out"]) == 0
    payload = json.loads((tmp_path / "demo_out" / "comparison.json").read_text())
    assert payload["plain_training_error"] >= 0.5
    assert payload["coupled_training_error"] == 0.0
    for name in ("demo_data.csv", "comparison.csv", "demo.png", "demo_model.json"):
        assert (tmp_path / "demo_out" / name).exists()


def test_exit_codes(workdir):
    bad = workdir / "bad.cfg"
    bad.write_text("frobnicate = 1\n")
    assert main(["train", "-c", str(bad)]) == 1  # config error
    (workdir / "broken.csv").write_text("2,0.5\n")
    cfg = workdir / "broken.cfg"
    cfg.write_text(BASE_CFG.format(out=workdir / "out2").replace("train.csv", "broken.csv"))
    assert main(["train", "-c", str(cfg)]) == 2  # data error
    infeasible = workdir / "infeasible.cfg"
    infeasible.write_text(BASE_CFG.format(out=workdir / "out3").replace("constraints.nu = 10.0", "constraints.nu = 1.0"))
    assert main(["train", "-c", str(infeasible)]) == 3  # infeasibility


def test_usage_error_exits_one():
    proc = subprocess.run(
        [sys.executable, "-m", "ckdr.cli", "train"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 1


def test_verify_shipped_config(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = tmp_path / "verify.cfg"
    cfg.write_text("seed = 20240615\nverify.draws = 4000\nverify.trials = 60\noutput.dir = vout\n")
    assert main(["verify", "-c", str(cfg)]) == 0
    payload = json.loads((tmp_path / "vout" / "verify.json").read_text())
    assert all(c["ok"] for c in payload["checks"])
    assert (tmp_path / "vout" / "concentration.png").exists()
    assert (tmp_path / "vout" / "concentration.csv").exists()
