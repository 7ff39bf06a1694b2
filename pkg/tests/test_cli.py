import json
import subprocess
import sys

import numpy as np
import pytest

from precipgen.cli import main
from precipgen.data import load_panel


def run(*argv):
    """Run the CLI in a fresh interpreter; returns (code, stdout, stderr)."""
    p = subprocess.run([sys.executable, "-m", "precipgen.cli", *map(str, argv)], capture_output=True, text=True)
    return p.returncode, p.stdout, p.stderr


def cli(*argv):
    return main([str(a) for a in argv])


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_synth_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert cli(*["synth", "--nu", "20", "--alpha", "0", "--seed", "7", "--T", "500",
                     "--out", str(tmp_path / d)]) == 0
    a, b = tree_bytes(tmp_path / "a"), tree_bytes(tmp_path / "b")
    assert set(a) == {"panel.csv", "cutoffs.csv", "network.csv", "truth.json"}
    assert a == b
    c = tmp_path / "c"
    cli(*["synth", "--nu", "20", "--alpha", "0", "--seed", "8", "--T", "500", "--out", str(c)])
    assert tree_bytes(c)["panel.csv"] != a["panel.csv"]


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipe")
    syn, fit, sim, cond, ev, pred = (root / n for n in ("syn", "fit", "sim", "cond", "ev", "pred"))
    assert cli(*["synth", "--nu", "3", "--alpha", "5", "--seed", "1", "--T", "600", "--out", str(syn)]) == 0
    assert cli(*["fit", "--data", syn / "panel.csv", "--network", syn / "network.csv",
                 "--cutoffs", syn / "cutoffs.csv", "--u-r", "1.2", "--seed", "2",
                 "--nu-grid", "3,20", "--n-starts", "1", "--out", fit]) == 0
    common = ["--fit", fit / "fit.json", "--network", syn / "network.csv", "--cutoffs", syn / "cutoffs.csv",
              "--u-r", "1.2", "--seed", "3", "-K", "4"]
    assert cli(*["simulate", *common, "--out", sim]) == 0
    assert cli(*["simulate", *common, "--mode", "conditional", "--data", syn / "panel.csv", "--out", cond]) == 0
    assert cli(*["evaluate", "--data", syn / "panel.csv", "--ensemble", sim, "--fit", fit / "fit.json",
                 "--cutoffs", syn / "cutoffs.csv", "--network", syn / "network.csv", "--u-r", "1.2",
                 "--out", ev]) == 0
    assert cli(*["predict", "--ensemble", cond, "--levels", "0.9,0.5", "--out", pred]) == 0
    return root


def test_pipeline_outputs(pipeline):
    fit = json.loads((pipeline / "fit" / "fit.json").read_text())
    assert fit["schema"] == "precipgen.fit/1"
    assert {e["nu"] for e in fit["nu_profile"]} >= {3.0, 20.0}
    man = json.loads((pipeline / "sim" / "manifest.json").read_text())
    assert man["K"] == 4 and man["mode"] == "unconditional"
    ev = pipeline / "ev"
    for name in ("report.json", "qq_all.csv", "qq_positive.csv", "concurrence.csv", "transitions.csv",
                 "dry_probability.csv"):
        assert (ev / name).stat().st_size > 0, name
    rep = json.loads((ev / "report.json").read_text())
    assert rep["mrmse_percent"] > 0
    lines = (ev / "qq_all.csv").read_text().splitlines()
    assert lines[0].split(",")[0] == "prob" and len(lines) == 202
    pred = json.loads((pipeline / "pred" / "prediction.json").read_text())
    assert pred["levels"] == [0.9, 0.5]
    lo = load_panel(pipeline / "pred" / "band_0.9_lower.csv").values
    hi = load_panel(pipeline / "pred" / "band_0.9_upper.csv").values
    assert np.all(lo <= hi)


def test_evaluate_observed_as_ensemble(pipeline, tmp_path):
    # an ensemble whose only replicates are the observations themselves
    syn = pipeline / "syn"
    ens = tmp_path / "ens"
    ens.mkdir()
    man = json.loads((pipeline / "sim" / "manifest.json").read_text())
    for name in man["files"][:2]:
        (ens / name).write_bytes((syn / "panel.csv").read_bytes())
    man.update(files=man["files"][:2], streams=man["streams"][:2], K=2)
    (ens / "manifest.json").write_text(json.dumps(man))
    assert cli(*["evaluate", "--data", syn / "panel.csv", "--ensemble", ens, "--out", tmp_path / "ev"]) == 0
    rep = json.loads((tmp_path / "ev" / "report.json").read_text())
    assert rep["mrmse_percent"] == 0.0


def test_missing_u_r_and_seed_exit_2(pipeline):
    syn = pipeline / "syn"
    code, _, err = run("fit", "--data", syn / "panel.csv", "--network", syn / "network.csv", "--seed", "1",
                       "--out", pipeline / "x")
    assert code == 2
    doc = json.loads(err.strip().splitlines()[-1])
    assert doc["error"] == "config" and "--u-r" in doc["message"]
    code, _, err = run("synth", "--nu", "3", "--alpha", "5", "--out", pipeline / "y")
    assert code == 2 and "--seed" in json.loads(err.strip().splitlines()[-1])["message"]
    code, _, err = run("fit", "--bogus")
    assert code == 2 and json.loads(err.strip().splitlines()[-1])["error"] == "config"


def test_bad_data_exit_3(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("timestamp,a\n2016-04-04T00:00:00,0\n2016-04-04T00:00:30,-1\n")
    net = tmp_path / "net.csv"
    net.write_text("site,x_m,y_m\na,0,0\n")
    code, _, err = run("fit", "--data", bad, "--network", net, "--u-r", "1.2", "--seed", "0",
                       "--out", tmp_path / "o")
    assert code == 3
    assert json.loads(err.strip().splitlines()[-1])["error"] == "data"
