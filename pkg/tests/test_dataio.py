import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdarl.config import ConfigError, read_config, spec_from_mapping, write_config
from sdarl.dataio import (DataFormatError, read_results_csv, read_sparse_text, write_results_csv,
                          write_sparse_text)
from sdarl.metrics import EvalRecord


def _write(tmp_path, text, name="d.txt"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_parse_example(tmp_path):
    d = read_sparse_text(_write(tmp_path, "+1 1:0.5 3:2\n-1 2:1\n"), normalize=False)
    np.testing.assert_array_equal(d.X, [[0.5, 0, 2], [0, 1, 0]])
    np.testing.assert_array_equal(d.y, [1, 0])
    assert d.binary


def test_vacant_rows_dropped_and_counted(tmp_path):
    d = read_sparse_text(_write(tmp_path, "1 1:1 2:1\n0\n1 2:3\n0 1:2\n"))
    assert d.n == 3 and d.dropped_rows == [2]
    assert d.metadata()["dropped_vacant_rows"] == 1
    np.testing.assert_allclose(np.linalg.norm(d.X, axis=0), math.sqrt(3), rtol=1e-14)


def test_zero_columns_ineligible(tmp_path):
    d = read_sparse_text(_write(tmp_path, "1 1:1 3:1\n0 1:2 3:0.5\n"))
    assert d.eligible.tolist() == [True, False, True]
    assert not d.X[:, 1].any()


@pytest.mark.parametrize("text,needle", [
    ("1 1:1\n1 3:1 2:4\n", ":2:"),
    ("1 1:1\n1 x:1\n", ":2:"),
    ("1 1:1\nfoo 1:1\n", ":2:"),
    ("1 0:1\n", ":1:"),
    ("1 1:1,5\n", ":1:"),
])
def test_parse_errors_carry_line_numbers(tmp_path, text, needle):
    with pytest.raises(DataFormatError, match=needle):
        read_sparse_text(_write(tmp_path, text))


def test_real_valued_labels_kept(tmp_path):
    d = read_sparse_text(_write(tmp_path, "2.5 1:1\n-0.5 2:1\n"), normalize=False)
    assert not d.binary and d.y.tolist() == [2.5, -0.5]


def test_row_order_preserved(tmp_path):
    d = read_sparse_text(_write(tmp_path, "0 1:3\n1 1:1\n0 1:2\n"), normalize=False)
    assert d.X[:, 0].tolist() == [3, 1, 2]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_sparse_text_round_trip(tmp_path_factory, seed):
    rng = np.random.default_rng(seed)
    n, p = rng.integers(1, 8), rng.integers(1, 8)
    X = rng.normal(size=(n, p)) * (rng.random((n, p)) < 0.5)
    X[:, -1] = rng.normal(size=n)  # every row nonempty, p fixed by the last column
    y = (rng.random(n) < 0.5).astype(float)
    path = tmp_path_factory.mktemp("rt") / "x.txt"
    write_sparse_text(path, X, y)
    d = read_sparse_text(path, normalize=False)
    np.testing.assert_array_equal(d.X, X)
    np.testing.assert_array_equal(d.y, y)


def test_results_csv_round_trip(tmp_path):
    recs = [EvalRecord("sdarl", 0, 0, 50, 100, 5, 5, 0.2, 100.0, 1 / 3, 1.0, 0.0, 2.0, None, 3, 0.0),
            EvalRecord("fixed_step", 0, 1, 50, 100, 5, 5, 0.2, 100.0, math.pi, 0.8, 0.2, 1.6, 0.9123, 4, 0.25),
            EvalRecord.failed("asdarl", 0, 2, 50, 100, 5, 5, 0.2, 100.0, "asdarl:ValueError")]
    path = tmp_path / "r.csv"
    write_results_csv(recs, path)
    back = read_results_csv(path)
    assert path.read_text().splitlines()[0] == (
        "method,seed,rep,n,p,K,T,rho,R,are,pdr,fdr,cdr,car,iters,time_s,error")
    for a, b in zip(recs, back):
        for k in EvalRecord.columns():
            x, y = getattr(a, k), getattr(b, k)
            assert (x == y) or (isinstance(x, float) and math.isnan(x) and math.isnan(y))


def test_config_minimal_defaults(tmp_path):
    p = _write(tmp_path, "# toy\nmodel = linear\nn = 50\np = 80\nK = 4\n", "c.cfg")
    spec = read_config(p)
    assert spec.solver.nu == 0.9 and spec.solver.sigma == 0.1 and spec.replications == 100
    meta = spec.metadata()
    assert meta["rho"] == 0.2 and meta["m_max"] == 200 and meta["criterion"] == "hbic"


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="nu"):
        spec_from_mapping({"model": "linear", "n": "50", "p": "80", "K": "4", "nu": "1.5"})
    with pytest.raises(ConfigError, match="bogus, zzz"):
        spec_from_mapping({"model": "linear", "n": "50", "p": "80", "K": "4", "zzz": 1, "bogus": 2})
    with pytest.raises(ConfigError, match="K"):
        spec_from_mapping({"model": "linear", "n": "50", "p": "80"})
    with pytest.raises(ConfigError):
        spec_from_mapping({"model": "linear", "n": "50", "p": "80", "K": "4", "rho": "0,5"})


def test_config_write_read(tmp_path):
    vals = {"model": "logistic", "n": 120, "p": 300, "K": 6, "rho": 0.35, "sweep_K": [5.0, 10.0],
            "methods": ["sdarl", "fixed_step"]}
    path = tmp_path / "w.cfg"
    write_config(vals, path)
    spec = read_config(path)
    assert spec.gen.rho == 0.35 and spec.methods == ("sdarl", "fixed_step")
    assert [g.K for g in spec.cells()] == [5, 10]


def test_sweep_grid_syntax():
    spec = spec_from_mapping({"model": "linear", "n": "50", "p": "80", "K": "4",
                              "sweep_K": "5:5:20", "sweep_rho": "0.2,0.8"})
    cells = spec.cells()
    assert [(g.K, g.rho) for g in cells] == [(5, 0.2), (5, 0.8), (10, 0.2), (10, 0.8),
                                             (15, 0.2), (15, 0.8), (20, 0.2), (20, 0.8)]
