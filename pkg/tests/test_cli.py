import json
import subprocess
import sys

import numpy as np
import pytest

from dpcp import io
from dpcp.cli import cmd_compare, load_spec, main
from dpcp.errors import ValidationError

SMALL = {"N": 6, "T": 30, "r": 2, "p_obs": 0.8, "d_c": 0.6}


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    (d / "cfg.json").write_text(json.dumps({**SMALL, "seed": 7}))
    assert main(["synth", "--config", str(d / "cfg.json"), "--out", str(d)]) == 0
    return d


def test_synth_outputs(data_dir):
    for name in ("X.csv", "O.csv", "Y.csv", "graph.json", "meta.json"):
        assert (data_dir / name).exists()
    obs = io.read_observations(data_dir / "Y.csv")
    assert obs.shape == (6, 30)
    assert io.read_graph(data_dir / "graph.json").n_nodes == 6


def test_central_and_impute(data_dir, tmp_path):
    out = tmp_path / "c"
    rc = main(["central", "--data", str(data_dir / "Y.csv"), "--lambda1", "0.1",
               "--lambdastar", "0.4", "--truth", str(data_dir), "--out", str(out)])
    assert rc == 0
    header = (out / "trace.csv").read_text().splitlines()[0]
    assert header == "iter,objective,spectral_gap,inf_gap"
    summary = json.loads((out / "summary.json").read_text())
    assert summary["converged"] and "e_X" in summary["errors"]
    assert main(["impute", "--data", str(data_dir / "Y.csv"), "--solution", str(out),
                 "--out", str(tmp_path / "filled.csv")]) == 0
    filled, mask = io.read_matrix(tmp_path / "filled.csv")
    Y, m = io.read_matrix(data_dir / "Y.csv")
    assert np.all(mask == 1)
    assert np.array_equal(filled[m > 0], Y[m > 0])


def test_central_not_converged_exit(data_dir, tmp_path):
    rc = main(["central", "--data", str(data_dir / "Y.csv"), "--lambda1", "0.1",
               "--lambdastar", "0.4", "--max-iters", "2", "--out", str(tmp_path)])
    assert rc == 4


def test_dpcp_command(data_dir, tmp_path):
    args = ["dpcp", "--data", str(data_dir / "Y.csv"), "--graph", str(data_dir / "graph.json"),
            "--rho", "4", "--lambda1", "0.1", "--lambdastar", "0.4", "--rounds", "40",
            "--truth", str(data_dir)]
    assert main(args + ["--out", str(tmp_path / "a")]) == 4  # not converged in 40 rounds
    assert main(args + ["--out", str(tmp_path / "b"), "--workers", "6"]) == 4
    header = (tmp_path / "a" / "trace.csv").read_text().splitlines()[0].split(",")
    assert header[:5] == ["k", "e_X", "e_O", "consensus_max", "objective"]
    assert header[5:] == [f"consensus_node{i}" for i in range(6)]
    for f in ("trace.csv", "X_hat.csv", "O_hat.csv", "summary.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_exit_codes(tmp_path, data_dir):
    bad = tmp_path / "bad.csv"
    bad.write_text("2,2\n1,2\n")
    assert main(["central", "--data", str(bad), "--lambda1", "1", "--lambdastar", "1",
                 "--out", str(tmp_path)]) == 2
    assert main(["central", "--data", str(data_dir / "Y.csv"), "--lambda1", "-1",
                 "--lambdastar", "1", "--out", str(tmp_path)]) == 3
    g = tmp_path / "g.json"
    g.write_text('{"n":6,"edges":[[0,1]]}')
    assert main(["dpcp", "--data", str(data_dir / "Y.csv"), "--graph", str(g), "--rho", "2",
                 "--lambda1", "1", "--lambdastar", "1", "--out", str(tmp_path)]) == 3
    assert main(["central", "--data", str(tmp_path / "missing.csv"), "--lambda1", "1",
                 "--lambdastar", "1", "--out", str(tmp_path)]) == 3


def test_ingest(tmp_path, rng):
    A = rng.standard_normal((3, 10))
    io.write_matrix(tmp_path / "raw.csv", A)
    assert main(["ingest", "--raw", str(tmp_path / "raw.csv"), "--downsample", "4",
                 "--out", str(tmp_path / "d.csv")]) == 0
    assert np.array_equal(io.read_matrix(tmp_path / "d.csv")[0], A[:, [0, 4]])
    io.write_matrix(tmp_path / "rawT.csv", A.T)
    assert main(["ingest", "--raw", str(tmp_path / "rawT.csv"), "--downsample", "4",
                 "--transpose", "--out", str(tmp_path / "dT.csv")]) == 0
    assert (tmp_path / "dT.csv").read_bytes() == (tmp_path / "d.csv").read_bytes()


def spec_doc(out, **kw):
    doc = {"mode": "compare", "seed": 3, "out": str(out), "lambda_1": 0.1, "lambda_star": 0.4,
           "data": {"synth": SMALL}, "dpcp": {"rho": 4, "max_rounds": 60}}
    doc.update(kw)
    return doc


def test_compare_is_reproducible(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(spec_doc("run1")))
    rep = cmd_compare(spec)
    assert {"discrepancy_X", "objective_gap_rel", "central", "dpcp", "flags"} <= set(rep)
    assert not rep["flags"]["dpcp_converged"]
    assert main(["compare", "--spec", str(spec), "--out", str(tmp_path / "run2")]) == 0
    spec.write_text(json.dumps(spec_doc("run3", workers=6)))
    cmd_compare(spec)
    a, b, c = (tree_bytes(tmp_path / r) for r in ("run1", "run2", "run3"))
    assert a.keys() == b.keys()
    for name in a:
        if name != "spec.json":
            assert a[name] == b[name], name
    assert a["dpcp/trace.csv"] == c["dpcp/trace.csv"]


def test_compare_single_node(tmp_path):
    rep = cmd_compare(spec_doc(tmp_path, data={"synth": {"N": 1, "T": 20, "r": 1}},
                               dpcp={"rho": 2, "max_rounds": 30}))
    assert np.isfinite(rep["discrepancy_X"])


def test_compare_from_files(tmp_path, data_dir):
    doc = spec_doc(tmp_path / "o", data={"Y": str(data_dir / "Y.csv"),
                                         "graph": str(data_dir / "graph.json"),
                                         "truth": str(data_dir)})
    rep = cmd_compare(doc)
    assert "errors" in rep["central"]


def test_spec_validation(tmp_path):
    with pytest.raises(ValidationError):
        load_spec(spec_doc(tmp_path, dpcp={"rho": 2, "bogus": 1}))
    with pytest.raises(ValidationError):
        load_spec(spec_doc(tmp_path, dpcp={}))
    with pytest.raises(ValidationError):
        load_spec(spec_doc(tmp_path, data={"Y": "nope.csv", "graph": "g.json"}))
    with pytest.raises(ValidationError):
        load_spec(spec_doc(tmp_path, mode="other"))


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "dpcp", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "dpcp" in r.stdout
