import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from hyperplap.cli import main, parse_args
from hyperplap.inpaint import gradient_edge_image, read_pgm, save_mask_csv, write_pgm

pytestmark = pytest.mark.filterwarnings("ignore::UserWarning")


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_interp1d_all_labelled(tmp_path):
    rng = np.random.default_rng(0)
    vals = rng.random(20)
    (tmp_path / "lab.csv").write_text("".join(f"{i},{v!r}\n" for i, v in enumerate(vals.tolist())))
    code = main(["interp1d", "--n", "20", "--labels", str(tmp_path / "lab.csv"),
                 "--graph", "knn:4", "--out-dir", str(tmp_path)])
    assert code == 0
    rows = read_csv(tmp_path / "interp1d.csv")
    assert rows[0] == ["x", "u_gpl", "u_hpl"]
    u = np.array(rows[1:], dtype=float)
    np.testing.assert_array_equal(u[:, 1], vals)
    np.testing.assert_array_equal(u[:, 2], vals)
    spikes = json.loads((tmp_path / "interp1d.json").read_text())["spike_index"]
    assert spikes["gpl"] == spikes["hpl"]


@pytest.mark.invariant
def test_interp1d_deterministic_and_config_round_trip(tmp_path):
    args = ["interp1d", "--n", "200", "--graph", "eps:0.05", "--epochs", "20", "--seed", "3"]
    assert main(args + ["--out-dir", str(tmp_path / "a"), "--dump-config",
                        str(tmp_path / "cfg.json")]) == 0
    assert main(args + ["--out-dir", str(tmp_path / "b")]) == 0
    cfg = json.loads((tmp_path / "cfg.json").read_text())
    cfg["out_dir"] = str(tmp_path / "c")
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    assert main(["interp1d", "--config", str(tmp_path / "cfg.json")]) == 0
    a = (tmp_path / "a" / "interp1d.csv").read_bytes()
    assert a == (tmp_path / "b" / "interp1d.csv").read_bytes()
    assert a == (tmp_path / "c" / "interp1d.csv").read_bytes()


def test_config_flags_override(tmp_path):
    (tmp_path / "cfg.json").write_text(json.dumps({"n": 99, "p": 3.0}))
    args = parse_args(["interp1d", "--config", str(tmp_path / "cfg.json"), "--n", "50"])
    assert args.n == 50 and args.p == 3.0
    (tmp_path / "cfg.json").write_text(json.dumps({"bogus": 1}))
    assert main(["interp1d", "--config", str(tmp_path / "cfg.json")]) == 2


def test_gamma_check(tmp_path):
    assert main(["gamma-check", "--point", "200:0.1", "--point", "400:0.08",
                 "--point", "800:0.06", "--out-dir", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "gamma.csv")
    assert len(rows) == 4
    assert main(["gamma-check", "--function", "const", "--point", "300:0.1",
                 "--out", "c.csv", "--out-dir", str(tmp_path)]) == 0
    row = dict(zip(*read_csv(tmp_path / "c.csv")))
    assert float(row["discrete"]) == 0.0


def test_ssl_two_clusters(tmp_path):
    pts = [0.0, 0.01, 0.02, 1.0, 1.01, 1.02]
    (tmp_path / "p.csv").write_text("".join(f"{x}\n" for x in pts))
    (tmp_path / "l.csv").write_text("0,0\n4,1\n")
    (tmp_path / "t.csv").write_text("".join(f"{i},{i // 3}\n" for i in range(6)))
    for method in ("hpl", "gpl"):
        code = main(["ssl", "--points", str(tmp_path / "p.csv"), "--labels",
                     str(tmp_path / "l.csv"), "--truth", str(tmp_path / "t.csv"),
                     "--graph", "knn:3", "--method", method, "--out-dir", str(tmp_path)])
        assert code == 0
        assert json.loads((tmp_path / "ssl.json").read_text())["accuracy"] == 1.0
        assert read_csv(tmp_path / "predictions.csv")[3] == ["3", "1"]


def test_inpaint_full_mask(tmp_path):
    img = gradient_edge_image(16)
    write_pgm(tmp_path / "in.pgm", img)
    save_mask_csv(tmp_path / "m.csv", np.ones((16, 16), bool))
    assert main(["inpaint", "--image", str(tmp_path / "in.pgm"), "--mask",
                 str(tmp_path / "m.csv"), "--s1", "3", "--s2", "3",
                 "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / "inpainted.pgm").read_bytes() == (tmp_path / "in.pgm").read_bytes()
    metrics = json.loads((tmp_path / "inpaint.json").read_text())
    assert metrics["psnr_restored"] is None and metrics["psnr_restored_table"] == 99.0


def test_inpaint_sampled(tmp_path):
    write_pgm(tmp_path / "in.pgm", gradient_edge_image(16))
    assert main(["inpaint", "--image", str(tmp_path / "in.pgm"), "--sample-rate", "0.3",
                 "--method", "gpl", "--K", "1", "--s1", "3", "--s2", "3", "--epochs", "50",
                 "--out-dir", str(tmp_path)]) == 0
    m = json.loads((tmp_path / "inpaint.json").read_text())
    assert m["psnr_restored"] > m["psnr_mean_fill"]
    assert read_pgm(tmp_path / "inpainted.pgm").shape == (16, 16)


def test_prox_test(tmp_path):
    assert main(["prox-test", "--instances", "100", "--out-dir", str(tmp_path)]) == 0
    out = json.loads((tmp_path / "prox_test.json").read_text())
    assert out["instances"] == 100 and out["failures"] == 0
    assert out["max_residual"] <= 1e-9


@pytest.mark.parametrize("argv", [
    ["interp1d", "--n", "1"],
    ["interp1d", "--graph", "eps:-1"],
    ["interp1d", "--p", "0.5"],
    ["gamma-check"],
    ["ssl", "--points", "x.csv"],
    ["inpaint", "--image", "x.pgm"],
    ["inpaint", "--image", "x.pgm", "--sample-rate", "0.2", "--s1", "4"],
    ["prox-test", "--instances", "0"],
    ["interp1d", "--threads", "0"],
])
def test_usage_errors_exit_2(argv, tmp_path, capsys):
    assert main(argv + ["--out-dir", str(tmp_path)]) == 2
    err = capsys.readouterr().err.strip()
    assert err and len(err.splitlines()) == 1
    assert not any(tmp_path.iterdir())


def test_missing_file_and_bad_graph(tmp_path, capsys):
    assert main(["ssl", "--points", str(tmp_path / "nope.csv"), "--labels", "x"]) == 2
    assert main(["interp1d", "--graph", "ball:3"]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "hyperplap.cli", "prox-test", "--instances",
                           "5", "--out-dir", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    proc = subprocess.run([sys.executable, "-m", "hyperplap.cli", "inpaint"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
