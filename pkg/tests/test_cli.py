import csv
import json
from pathlib import Path

import numpy as np
import pytest

from spline_radon.cli import main
from spline_radon.radon import Sinogram, read_image

ROOT = Path(__file__).resolve().parents[1]


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_forward_small_disk(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["forward", "--preset", "disk", "--p", "4", "--q", "4", "--out", str(out)]) == 0
    s = Sinogram.from_csv(out)
    assert s.data.shape == (4, 9)


def test_forward_missing_phantom(tmp_path):
    assert main(["forward", "--phantom", str(tmp_path / "nope.json"), "--out", str(tmp_path / "s.csv")]) == 2


def test_usage_errors(tmp_path, capsys):
    assert main([]) == 2
    assert main(["forward", "--out", str(tmp_path / "s.csv")]) == 2
    assert main(["bogus"]) == 2
    assert "error" in capsys.readouterr().err


def test_forward_noise_is_deterministic(tmp_path):
    args = ["forward", "--phantom", str(ROOT / "phantoms" / "shepp_logan.json"), "--q", "8",
            "--noise", "0.01", "--seed", "3"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a), "--report", str(tmp_path / "a.json")]) == 0
    assert main(args + ["--out", str(b), "--report", str(tmp_path / "b.json")]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert json.loads((tmp_path / "a.json").read_text())["p"] == 25


@pytest.fixture(scope="module")
def disk_sinogram(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "disk.csv"
    assert main(["forward", "--preset", "disk", "--q", "64", "--out", str(path)]) == 0
    return path


def test_reconstruct_fbp_metrics(disk_sinogram, tmp_path):
    metrics = tmp_path / "m.json"
    code = main(["reconstruct", "--sinogram", str(disk_sinogram), "--method", "fbp",
                 "--truth-preset", "disk", "--out", str(tmp_path / "f.pgm"), "--metrics", str(metrics)])
    assert code == 0
    m = json.loads(metrics.read_text())["metrics"]
    # frozen from the calibration run (0.00645 at the default interior radius 0.9)
    assert m["rmse"] <= 0.0070
    assert (tmp_path / "f.pgm.json").exists()


def test_reconstruct_unknown_method(disk_sinogram, tmp_path):
    assert main(["reconstruct", "--sinogram", str(disk_sinogram), "--method", "magic",
                 "--out", str(tmp_path / "x.pgm")]) == 2


def test_reconstruct_zero_sinogram(tmp_path):
    sino = tmp_path / "z.csv"
    Sinogram(13, 4, np.zeros((13, 9))).to_csv(sino)
    metrics = tmp_path / "m.json"
    code = main(["reconstruct", "--sinogram", str(sino), "--out", str(tmp_path / "z.pgm"),
                 "--metrics", str(metrics)])
    assert code == 0
    assert np.all(read_image(tmp_path / "z.pgm") == 0)
    assert "metrics" not in json.loads(metrics.read_text())


def test_reconstruct_is_deterministic(tmp_path, monkeypatch):
    sino = tmp_path / "s.csv"
    assert main(["forward", "--preset", "shepp-logan", "--q", "16", "--out", str(sino)]) == 0
    outputs = []
    for tag in "ab":
        # same file names in separate directories: the metrics JSON echoes the paths
        d = tmp_path / tag
        d.mkdir()
        monkeypatch.chdir(d)
        assert main(["reconstruct", "--sinogram", str(sino), "--out", "r.pgm", "--metrics", "m.json",
                     "--truth-preset", "shepp-logan"]) == 0
        outputs.append([(d / name).read_bytes() for name in ("r.pgm", "r.pgm.json", "m.json")])
    assert outputs[0] == outputs[1]


def test_config_overrides_flags(tmp_path):
    sino = tmp_path / "s.csv"
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"q": 6, "p": 5}))
    assert main(["--config", str(cfg), "forward", "--preset", "disk", "--q", "32", "--out", str(sino)]) == 0
    assert Sinogram.from_csv(sino).data.shape == (5, 13)
    cfg.write_text(json.dumps({"nonsense": 1}))
    assert main(["--config", str(cfg), "forward", "--preset", "disk", "--out", str(sino)]) == 2
    cfg.write_text("{broken")
    assert main(["--config", str(cfg), "forward", "--preset", "disk", "--out", str(sino)]) == 2


def test_malformed_sinogram(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("p,q,h\n1,2,0.5\n1,2,3\n")
    assert main(["reconstruct", "--sinogram", str(bad), "--out", str(tmp_path / "x.pgm")]) == 2


def test_phantom_raster(tmp_path):
    code = main(["phantom-raster", "--preset", "shepp-logan", "--q", "16", "--out", str(tmp_path / "p.pgm"),
                 "--write-json", str(tmp_path / "p.json")])
    assert code == 0
    img = read_image(tmp_path / "p.pgm")
    assert img.shape == (31, 31) and img.max() > 0
    assert "ellipses" in json.loads((tmp_path / "p.json").read_text())


def test_experiment_sinc_limit(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["experiment", "sinc_limit", "--out", str(out)]) == 0
    err = [float(r["sup_error"]) for r in _rows(out)]
    assert len(err) == 3 and err[0] > err[1] > err[2]


def test_experiment_convergence(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["experiment", "convergence_l", "--out", str(out)]) == 0
    err = [float(r["error"]) for r in _rows(out)]
    assert err[0] > err[1] > err[2]


def test_experiment_complexity(tmp_path):
    out = tmp_path / "x.csv"
    assert main(["experiment", "complexity", "--out", str(out)]) == 0
    ratios = [float(r["ratio"]) for r in _rows(out)[1:]]
    assert all(abs(x - 4.0) <= 0.6 for x in ratios)
    again = tmp_path / "y.csv"
    assert main(["experiment", "complexity", "--qs", "16", "32", "--out", str(again)]) == 0
    assert again.read_text().splitlines()[:3] == out.read_text().splitlines()[:3]


def test_experiment_jitter_sweep(tmp_path):
    out = tmp_path / "j.csv"
    assert main(["experiment", "jitter_sweep", "--jitters", "0.0", "0.3", "--out", str(out)]) == 0
    rows = _rows(out)
    assert len(rows) == 6 and max(float(r["error"]) for r in rows) < 5e-3


def test_unknown_experiment(tmp_path):
    assert main(["experiment", "nope", "--out", str(tmp_path / "x.csv")]) == 2
