import json
import os
import subprocess
import sys

import numpy as np
import pytest

from charflow import netpbm

CLI = [sys.executable, "-m", "charflow.cli"]


def run(args, cwd, env_extra=None, timeout=600):
    env = dict(os.environ)
    env.update(env_extra or {})
    return subprocess.run(CLI + args, cwd=cwd, env=env, timeout=timeout,
                          capture_output=True, text=True)


def test_solve_writes_grid_and_report(tmp_path):
    r = run(["solve", "--grid", "32", "--out", "sol", "--trace-from", "0.25,0"], tmp_path)
    assert r.returncode == 0, r.stderr
    report = json.loads((tmp_path / "sol.json").read_text())
    assert report["linf"] <= 1.0
    assert report["beta_est"] == pytest.approx(1.0, abs=1e-9)
    assert (tmp_path / "sol.bin").exists()
    assert (tmp_path / "sol.pgm").exists()
    lines = (tmp_path / "sol.trace.csv").read_text().splitlines()
    assert lines[0] == "tau,x,y,T0"
    assert float(lines[-1].split(",")[3]) == pytest.approx(0.0, abs=1e-9)


def test_solve_declared_beta_lie_fails(tmp_path):
    r = run(["solve", "--grid", "32", "--field", "spiral", "--beta", "0.99",
             "--out", "sol"], tmp_path)
    assert r.returncode == 1
    assert "FAIL causality" in r.stdout


def test_solve_reports_are_deterministic_across_threads(tmp_path):
    (tmp_path / "one").mkdir()
    (tmp_path / "two").mkdir()
    r1 = run(["solve", "--grid", "24", "--out", "s"], tmp_path / "one", {"CHARFLOW_THREADS": "1"})
    r2 = run(["solve", "--grid", "24", "--out", "s"], tmp_path / "two", {"CHARFLOW_THREADS": "3"})
    assert r1.returncode == 0 and r2.returncode == 0
    for name in ("s.json", "s.bin", "s.pgm", "s.mask.bin"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


def test_nonunique_command(tmp_path):
    r = run(["nonunique", "--grid", "48", "--out", "nu.csv"], tmp_path)
    assert r.returncode == 0, r.stderr
    rows = (tmp_path / "nu.csv").read_text().splitlines()
    assert rows[0] == "seed,alpha,residual,n_iters"
    alphas = [float(line.split(",")[1]) for line in rows[1:]]
    assert np.allclose(sorted(alphas), [-1.0, 0.0, 0.5, 1.0], atol=1e-9)


def test_inpaint_command_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    img = np.full((40, 40), 77, dtype=np.uint8)
    mask = np.zeros((40, 40), dtype=np.uint8)
    jj, ii = np.meshgrid(np.arange(40), np.arange(40))
    mask[(ii - 20) ** 2 + (jj - 20) ** 2 < 81] = 255
    netpbm.write_image(str(tmp_path / "img.pgm"), img)
    netpbm.write_image(str(tmp_path / "mask.pgm"), mask)
    r = run(["inpaint", "--image", "img.pgm", "--mask", "mask.pgm", "--out", "out.pgm"],
            tmp_path)
    assert r.returncode == 0, r.stderr
    out, _ = netpbm.read_image(str(tmp_path / "out.pgm"))
    assert np.array_equal(out, img)  # constants transport exactly
    report = json.loads((tmp_path / "out.pgm.json").read_text())
    assert report["beta_est"] >= 0.2


def test_inpaint_mask_mismatch_fails(tmp_path):
    netpbm.write_image(str(tmp_path / "img.pgm"), np.zeros((20, 20), dtype=np.uint8))
    netpbm.write_image(str(tmp_path / "mask.pgm"), np.zeros((30, 30), dtype=np.uint8))
    r = run(["inpaint", "--image", "img.pgm", "--mask", "mask.pgm", "--out", "o.pgm"],
            tmp_path)
    assert r.returncode == 2
    assert "MaskMismatch" in r.stderr


def test_bench_command(tmp_path):
    r = run(["bench", "--size", "48", "--repeat", "1", "--out", "bench.json"], tmp_path)
    assert r.returncode == 0, r.stderr
    rep = json.loads((tmp_path / "bench.json").read_text())
    assert "numpy" in rep["timings"]
    if "compiled" in rep["timings"]:
        assert rep["max_endpoint_diff"] <= 1e-12


def test_stability_csv_format(tmp_path):
    r = run(["stability", "--grid", "48", "--out", "st.csv"], tmp_path, timeout=900)
    assert r.returncode == 0, r.stderr
    lines = (tmp_path / "st.csv").read_text().splitlines()
    assert lines[0] == "n,theta,l1_err,tv"
    assert len(lines) == 7
    errs = [float(l.split(",")[2]) for l in lines[1:]]
    assert all(a > b for a, b in zip(errs, errs[1:]))
