import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from emglab.io import (SCHEMA, FormatError, Series, emit_plot_svg, read_matrix_csv,
                       read_report_json, write_matrix_csv, write_report_json)
from emglab.regression import RegressionConfig, run_trials


def test_read_simple(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("0,1.0\n1,2.0\n2,3.0\n")
    ds = read_matrix_csv(p)
    assert ds.grid.tolist() == [0, 1, 2]
    assert ds.S.shape == (3, 1) and ds.S[:, 0].tolist() == [1, 2, 3]
    assert ds.mask.all()


def test_read_header_and_empty_cell(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("grid,a,b\n0,1.0,\n1,2.0,5\n")
    ds = read_matrix_csv(p)
    assert ds.mask.tolist() == [[True, False], [True, True]]
    assert ds.S[1, 1] == 5


def test_read_errors(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("0,1\n1,2,3\n")
    with pytest.raises(FormatError, match="row 2"):
        read_matrix_csv(p)
    p.write_text("0\n1\n")
    with pytest.raises(FormatError):
        read_matrix_csv(p)
    p.write_text("")
    with pytest.raises(FormatError):
        read_matrix_csv(p)


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(finite, min_size=3, max_size=3), min_size=1, max_size=8))
def test_csv_round_trip_bit_exact(tmp_path_factory, rows):
    M = np.array(rows)
    grid = np.arange(M.shape[0], dtype=float) * 0.1
    mask = np.ones_like(M, dtype=bool)
    mask[0, -1] = False
    p = tmp_path_factory.mktemp("rt") / "m.csv"
    write_matrix_csv(p, grid, M, mask=mask, header=["g", "a", "b", "c"])
    ds = read_matrix_csv(p)
    assert np.array_equal(ds.grid, grid)
    assert np.array_equal(ds.mask, mask)
    assert np.array_equal(ds.S[mask], M[mask])


def test_report_json(tmp_path):
    p = tmp_path / "r.json"
    d = write_report_json({"a": np.float64(1 / 3), "v": np.arange(3), "x": 1e-300}, p)
    back = read_report_json(p)
    assert back["schema"] == SCHEMA and d["schema"] == SCHEMA
    assert back["records"] == []
    assert back["a"] == 1 / 3 and back["v"] == [0, 1, 2] and back["x"] == 1e-300
    bad = tmp_path / "b.json"
    bad.write_text(json.dumps({"schema": "other"}))
    with pytest.raises(FormatError):
        read_report_json(bad)
    with pytest.raises(OSError):
        write_report_json({}, tmp_path / "missing" / "r.json")


def test_trial_report_round_trip(tmp_path):
    table = run_trials(RegressionConfig(), ["l2", "emgm"], reps=2, sizes=[64], master_seed=1)
    p = tmp_path / "t.json"
    d = write_report_json(table, p)
    back = read_report_json(p)
    for s, t in zip(d["stats"], back["stats"]):
        for k, v in s.items():
            if isinstance(v, float):
                assert abs(v - t[k]) <= 1e-15 * max(1.0, abs(v))
    assert back["config"]["x_distribution"] == "uniform(0.0, 1.0)"


def test_svg_single_polyline_and_determinism(tmp_path):
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    emit_plot_svg([Series("s", [0, 1], [0, 1])], a, title="t")
    emit_plot_svg([Series("s", [0, 1], [0, 1])], b, title="t")
    text = a.read_text()
    assert text.count("<polyline") == 1
    assert text.startswith("<svg") and "</svg>" in text
    assert a.read_bytes() == b.read_bytes()
    with pytest.raises(ValueError):
        emit_plot_svg([], tmp_path / "c.svg")


def test_svg_log_axes(tmp_path):
    p = tmp_path / "l.svg"
    emit_plot_svg([Series("m", [256, 1024, 4096], [0.1, 0.05, 0.025]),
                   Series("pts", [256, 4096], [0.2, 0.01], "scatter")], p, logx=True, logy=True)
    t = p.read_text()
    assert t.count("<polyline") == 1 and t.count('class="scatter"') == 1
