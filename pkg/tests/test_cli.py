import json
import subprocess
import sys

import numpy as np
import pytest

from emglab.cli import run_cli
from emglab.io import read_matrix_csv, read_report_json
from emglab.spectro import SpectraGenConfig, background_errors, gen_spectra


def test_bench_regression_contract(tmp_path, capsys):
    out = tmp_path / "t.json"
    code = run_cli(["bench-regression", "--contamination", "exp", "--sizes", "256,1024",
                    "--reps", "8", "--seed", "7", "--out", str(out)])
    assert code == 0
    printed = capsys.readouterr().out
    assert "resolved_config" in printed
    d = read_report_json(out)
    assert d["kind"] == "regression_trials" and d["sizes"] == [256, 1024]
    assert len(d["records"]) == 2 * 8 * 5
    assert {s["method"] for s in d["stats"]} == {"l2", "huber:0.2", "l1", "pinball:0.2", "emgm"}


def test_usage_errors(tmp_path, capsys):
    assert run_cli(["gen-spectra", "--out", str(tmp_path / "s.csv")]) == 2
    assert "--seed" in capsys.readouterr().err
    assert run_cli(["gen-regression", "--seed", "1", "--out", "x", "--bogus"]) == 2
    assert run_cli([]) == 2
    assert run_cli(["gen-spectra", "--seed", "1", "--out", "x", "--peaks", "1,2,3"]) == 2


def test_runtime_errors(tmp_path, capsys):
    assert run_cli(["fit-regression", "--in", str(tmp_path / "none.csv"),
                    "--out", str(tmp_path / "o.json")]) == 1
    assert run_cli(["gen-regression", "--seed", "1", "--n", "1", "--out", str(tmp_path / "r.csv")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema": "emg-lab/1", "kind": "nothing"}')
    assert run_cli(["plot", "--in", str(bad), "--out", str(tmp_path / "p.svg")]) == 1


def test_regression_round_trip_and_plot(tmp_path):
    data = tmp_path / "r.csv"
    assert run_cli(["gen-regression", "--n", "300", "--seed", "4", "--out", str(data)]) == 0
    ds = read_matrix_csv(data)
    assert ds.S.shape == (300, 2)
    svg = tmp_path / "f.svg"
    methods = "l2,l1,emgm"
    assert run_cli(["fit-regression", "--in", str(data), "--methods", methods,
                    "--out", str(tmp_path / "f.json"), "--plot", str(svg)]) == 0
    text = svg.read_text()
    # one scatter series for the data plus one line per method
    assert text.count('class="scatter"') == 1
    assert text.count("<polyline") == 3
    rep = read_report_json(tmp_path / "f.json")
    assert [f["method"] for f in rep["fits"]] == methods.split(",")
    assert "mixture" in rep["fits"][2]


def test_outputs_reproducible(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["bench-regression", "--sizes", "128", "--reps", "3", "--seed", "11", "--methods",
            "l1,emgm"]
    assert run_cli(args + ["--out", str(a), "--plot", str(tmp_path / "a.svg")]) == 0
    assert run_cli(args + ["--out", str(b), "--plot", str(tmp_path / "b.svg")]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
    s1, s2 = tmp_path / "s1.csv", tmp_path / "s2.csv"
    for p in (s1, s2):
        assert run_cli(["gen-spectra", "--n", "64", "--m", "4", "--seed", "3",
                        "--out", str(p)]) == 0
    assert s1.read_bytes() == s2.read_bytes()


def test_fit_background_end_to_end(tmp_path):
    """fit-background on generated files reproduces the EMGM < L1 < L2 ordering."""
    s, t = tmp_path / "s.csv", tmp_path / "b.csv"
    assert run_cli(["gen-spectra", "--n", "256", "--m", "16", "--peaks", "10,20", "--seed", "9",
                    "--out", str(s), "--truth", str(t)]) == 0
    err = {}
    for obj in ("emgm", "l1", "l2"):
        out = tmp_path / f"{obj}.json"
        bg = tmp_path / f"{obj}_bg.csv"
        assert run_cli(["fit-background", "--in", str(s), "--truth", str(t), "--k", "2",
                        "--objective", obj, "--seed", "9", "--out", str(out),
                        "--background-out", str(bg)]) == 0
        rep = read_report_json(out)
        err[obj] = rep["errors"]["mean_l2"]
        # the exported background reproduces the reported error
        truth = read_matrix_csv(t).S
        assert background_errors(read_matrix_csv(bg).S, truth)[0] == pytest.approx(err[obj])
    assert err["emgm"] < err["l1"] < err["l2"]


def test_bench_pmf_and_plot(tmp_path):
    out = tmp_path / "p.json"
    assert run_cli(["bench-pmf", "--n", "128", "--m", "6", "--peaks", "4,8", "--datasets", "2",
                    "--objectives", "l2,emgm", "--seed", "1", "--out", str(out)]) == 0
    d = read_report_json(out)
    assert set(d["stats"]) == {"l2", "emgm"} and len(d["records"]) == 4
    assert run_cli(["plot", "--in", str(out), "--out", str(tmp_path / "p.svg")]) == 0


def test_imodpoly_command(tmp_path):
    ds = gen_spectra(SpectraGenConfig(n=200, m=3, peaks_min=5, peaks_max=8, seed=2))
    src = tmp_path / "s.csv"
    from emglab.io import write_dataset_csv
    write_dataset_csv(src, ds)
    out = tmp_path / "i.csv"
    assert run_cli(["imodpoly", "--in", str(src), "--degree", "4", "--out", str(out)]) == 0
    base = read_matrix_csv(out)
    assert base.S.shape == ds.S.shape and np.all(np.isfinite(base.S))


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "emglab.cli", "gen-regression", "--n", "10",
                          "--seed", "1", "--out", str(tmp_path / "r.csv")],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout.splitlines()[0])["resolved_config"]["seed"] == 1
    res = subprocess.run([sys.executable, "-m", "emglab.cli", "--nope"], capture_output=True,
                         text=True)
    assert res.returncode == 2 and "usage" in res.stderr
