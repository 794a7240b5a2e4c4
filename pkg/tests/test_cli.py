from __future__ import annotations

import json

import numpy as np
import pytest

from quantgranger.cli import AdlSpec, Dataset, build_adl, build_parser, ingest_csv, main, read_config
from quantgranger.errors import DatasetError, DomainError, SingularityError


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_ingest_three_rows(tmp_path):
    ds = ingest_csv(write(tmp_path, "y,z\n1,2\n3,4\n5,6\n"))
    assert ds.n == 3 and ds.names == ["y", "z"] and ds.labels is None
    np.testing.assert_array_equal(ds.column("z"), [2, 4, 6])


def test_ingest_missing_cell_drops_row(tmp_path, caplog):
    ds = ingest_csv(write(tmp_path, "date,y,z\n2001,1,2\n2002,,4\n2003,5,NA\n2004,7,8\n"))
    assert ds.n == 2 and ds.dropped == 2
    assert ds.labels == ["2001", "2004"]
    assert "dropped 2" in caplog.text
    ds = ingest_csv(write(tmp_path, "y,z\n1,2\n3,\n5,6\n"))
    assert ds.n == 2 and ds.dropped == 1


@pytest.mark.parametrize("text, msg", [
    ("y,z\n", "no data rows"),
    ("", "empty file"),
    ("y,z\n1,abc\n", "row 2, column 'z'"),
    ("y,z\n1,2,3\n", "has 3 cells"),
])
def test_ingest_errors(tmp_path, text, msg):
    with pytest.raises(DatasetError, match=msg):
        ingest_csv(write(tmp_path, text))


def test_dataset_unknown_column():
    ds = Dataset(["a"], np.zeros((2, 1)))
    with pytest.raises(DatasetError):
        ds.column("b")


def make_ds(n=10, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset(["y", "x", "c", "k"], np.column_stack([rng.standard_normal((n, 3)), np.ones(n)]))


def test_build_adl_one_lag():
    ds = make_ds()
    y, X, _ = build_adl(ds, AdlSpec("y", ("x",)))
    assert X.shape == (9, 3)
    np.testing.assert_array_equal(y, ds.column("y")[1:])
    np.testing.assert_array_equal(X[:, 0], ds.column("x")[:-1])
    np.testing.assert_array_equal(X[:, 2], ds.column("y")[:-1])


def test_build_adl_three_lags_rows():
    y, X, _ = build_adl(make_ds(), AdlSpec("y", ("x",), lags_dep=1, lags_causal=3))
    assert y.shape == (7,) and X.shape == (7, 5)


def test_build_adl_layout():
    ds = make_ds(30)
    spec = AdlSpec("y", ("x",), ("c",), 3, 3, trend_terms=2)
    y, X, _ = build_adl(ds, spec)
    assert y.shape == (27,) and spec.p == 3
    assert X.shape == (27, 3 + 1 + 3 + 1 + 2)
    np.testing.assert_array_equal(X[:, 2], ds.column("x")[:27])
    np.testing.assert_array_equal(X[:, 7], ds.column("c")[3:])
    np.testing.assert_allclose(X[-1, -2:], [1.0, 1.0])


def test_build_adl_contemporaneous():
    ds = make_ds()
    y, X, _ = build_adl(ds, AdlSpec("y", ("x",), contemporaneous=True))
    np.testing.assert_array_equal(X[:, 0], ds.column("x")[1:])


def test_build_adl_constant_causal_is_rank_deficient():
    with pytest.raises(SingularityError):
        build_adl(make_ds(), AdlSpec("y", ("k",)))


def test_adl_spec_validation():
    with pytest.raises(DomainError):
        AdlSpec("y", ("x",), lags_dep=0)
    with pytest.raises(DomainError):
        AdlSpec("y", ())


def simulated(tmp_path, n=300, scenario="C", gamma=0.0):
    path = tmp_path / "sim.csv"
    assert main(["simulate", "--n", str(n), "--scenario", scenario, "--gamma", str(gamma),
                 "--file", str(path), "--seed", "4"]) == 0
    return path


def test_tau_and_tau_range_conflict(capsys):
    with pytest.raises(SystemExit) as exc:
        build_parser().parse_args(["test", "--tau", "0.5", "--tau-range", "0.1:0.9:0.1"])
    assert exc.value.code == 2


def test_unknown_flag_rejected():
    with pytest.raises(SystemExit) as exc:
        main(["test", "--bogus"])
    assert exc.value.code == 2


def test_test_command_writes_consistent_json(tmp_path, capsys):
    data = simulated(tmp_path)
    out = tmp_path / "res.json"
    code = main(["test", "--data", str(data), "--dependent", "y", "--causal", "z", "--stat", "exp",
                 "--method", "boot", "--B", "99", "--tau-range", "0.1:0.9:0.1", "--out", str(out)])
    assert code == 0
    res = json.loads(out.read_text())
    assert "p_value" in res and res["reject"] == (res["p_value"] <= res["level"])
    assert "p-value" in capsys.readouterr().out


def test_seed_determines_output(tmp_path):
    data = simulated(tmp_path)
    outs = []
    for i in range(2):
        out = tmp_path / f"r{i}.json"
        main(["test", "--data", str(data), "--dependent", "y", "--causal", "z", "--stat", "sup",
              "--B", "99", "--tau-range", "0.1:0.9:0.1", "--seed", "9", "--out", str(out)])
        outs.append(out.read_text())
    assert outs[0] == outs[1]


def test_missing_file_exit_code(tmp_path, capsys):
    code = main(["test", "--data", str(tmp_path / "nope.csv"), "--dependent", "y", "--causal", "z"])
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_config_file_sets_defaults(tmp_path):
    data = simulated(tmp_path)
    out = tmp_path / "cfg.json"
    cfg = write(tmp_path, f"# defaults\ndata = {data}\ndependent = y\ncausal = z\nstat = lm\n"
                          f"tau = 0.5\nmethod = asy\nreps = 999\n", "run.cfg")
    assert read_config(cfg)["tau"] == "0.5"
    assert main(["--config", str(cfg), "test", "--out", str(out)]) == 0
    res = json.loads(out.read_text())
    assert res["family"] == "LM_fixed" and res["method"] == "asymptotic"
    bad = write(tmp_path, "nonsense = 1\n", "bad.cfg")
    assert main(["--config", str(bad), "test"]) == 1


def test_cv_command_caches_table(tmp_path, capsys):
    cache = tmp_path / "t.txt"
    code = main(["cv", "--family", "LM_fixed", "--tau", "0.5", "--reps", "999", "--lambda-steps", "200",
                 "--cache", str(cache)])
    assert code == 0 and cache.exists()
    assert "0.95-quantile" in capsys.readouterr().out


def test_regimes_command_round_trip(tmp_path, capsys):
    data = simulated(tmp_path, n=1000, scenario="0,0,1", gamma=0.5)
    out = tmp_path / "rep.json"
    code = main(["regimes", "--data", str(data), "--dependent", "y", "--causal", "z", "--contemporaneous",
                 "--method", "asy", "--reps", "199", "--out", str(out)])
    assert code == 0
    from quantgranger.regimes import RegimeReport

    rep = RegimeReport.from_dict(json.loads(out.read_text()))
    assert [s.label for s in rep.segments] == ["noGC", "GC"]
    assert json.dumps(rep.to_dict(), indent=2) + "\n" == out.read_text()
