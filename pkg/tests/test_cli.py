import csv
import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from liqsurf.cli import main
from liqsurf.ingest import read_surface_csv
from liqsurf.schemas import JSON_SCHEMAS, validate_csv


def _manifest(path):
    m = json.loads(path.read_text())
    jsonschema.validate(m, JSON_SCHEMAS["manifest"])
    return m


@pytest.fixture(scope="module")
def surface_csv(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    out = d / "s.csv"
    assert main(["synth", "--T", "130", "--M", "21", "--K", "3", "--seed", "7", "--out", str(out),
                 "--snapshots", str(d / "snaps.json"), "--truth", str(d / "truth.csv")]) == 0
    return out


def test_synth_deterministic(tmp_path, surface_csv):
    out = tmp_path / "again.csv"
    assert main(["synth", "--T", "130", "--M", "21", "--K", "3", "--seed", "7", "--out", str(out)]) == 0
    assert out.read_bytes() == surface_csv.read_bytes()
    assert validate_csv(out, "surface") == 130
    m = _manifest(tmp_path / "again.csv.manifest.json")
    assert m["command"] == "synth" and m["seed"] == 7
    assert m["outputs"] == [str(out)]


def test_ingest_reproduces_synth(tmp_path, surface_csv):
    out = tmp_path / "ingested.csv"
    snaps = surface_csv.parent / "snaps.json"
    assert main(["ingest", "--in", str(snaps), "--block-spacing", "2400", "--M", "21", "--out", str(out)]) == 0
    a, b = read_surface_csv(out), read_surface_csv(surface_csv)
    np.testing.assert_allclose(a.values, b.values, rtol=1e-12)
    m = _manifest(tmp_path / "ingested.csv.manifest.json")
    assert m["inputs"][0]["path"] == str(snaps)


def test_ingest_multiple_M(tmp_path, surface_csv):
    snaps = surface_csv.parent / "snaps.json"
    assert main(["ingest", "--in", str(snaps), "--block-spacing", "2400", "--M", "11,21",
                 "--out", str(tmp_path / "s.csv")]) == 0
    assert read_surface_csv(tmp_path / "s_M11.csv").M == 11
    assert read_surface_csv(tmp_path / "s_M21.csv").M == 21


def test_decompose_pca_and_legendre(tmp_path, surface_csv):
    out = tmp_path / "pca"
    assert main(["decompose", "--in", str(surface_csv), "--K", "4", "--out", str(out)]) == 0
    dec = json.loads((out / "decomposition.json").read_text())
    jsonschema.validate(dec, JSON_SCHEMAS["decomposition"])
    assert validate_csv(out / "eigenvalues.csv", "eigenvalues") == 21
    assert validate_csv(out / "scores.csv", "coefficients") == 130
    assert validate_csv(out / "basis.csv", "basis") == 21
    m = _manifest(out / "manifest.json")
    assert set(m["outputs"]) == {str(out / n) for n in ("decomposition.json", "eigenvalues.csv", "scores.csv", "basis.csv")}

    leg = tmp_path / "leg"
    assert main(["decompose", "--in", str(surface_csv), "--basis", "legendre", "--K", "3",
                 "--quadrature", "simpson-sum", "--out", str(leg)]) == 0
    assert validate_csv(leg / "scores.csv", "coefficients") == 130
    with open(leg / "basis.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "mean", "u_1", "u_2", "u_3"]
    assert all(float(r[1]) == 0 for r in rows[1:])


def test_roll_window_count(tmp_path):
    src = tmp_path / "s420.csv"
    assert main(["synth", "--T", "420", "--M", "11", "--K", "3", "--out", str(src)]) == 0
    out = tmp_path / "roll"
    assert main(["roll", "--in", str(src), "--window", "400", "--step", "10", "--M", "11",
                 "--K", "3,5", "--out", str(out)]) == 0
    with open(out / "drift.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6
    assert sorted({r["window_start_block"] for r in rows}, key=int) == ["0", "24000", "48000"]
    assert all(float(r["d_to_inception"]) == 0 for r in rows if r["window_start_block"] == "0")
    assert validate_csv(out / "rolling_eigenvalues.csv", "rolling_eigenvalues") == 3
    assert validate_csv(out / "cpve.csv", "cpve") == 6
    _manifest(out / "manifest.json")


def test_roll_multiple_configs(tmp_path, surface_csv):
    out = tmp_path / "roll"
    assert main(["roll", "--in", str(surface_csv), "--window", "100,120", "--step", "10",
                 "--M", "11,21", "--K", "3", "--out", str(out)]) == 0
    for M in (11, 21):
        for W in (100, 120):
            assert validate_csv(out / f"drift_M{M}_T{W}.csv", "drift") == (130 - W) // 10 + 1


def test_fit_sweep_shock_forecast(tmp_path, surface_csv):
    d = tmp_path / "pca"
    assert main(["decompose", "--in", str(surface_csv), "--K", "3", "--out", str(d)]) == 0
    scores, basis = d / "scores.csv", d / "basis.csv"

    fit = tmp_path / "fit.json"
    assert main(["fit", "--in", str(scores), "--factor", "2", "--vol", "ARCH(1)", "--dist", "t",
                 "--out", str(fit)]) == 0
    rec = json.loads(fit.read_text())
    jsonschema.validate(rec, JSON_SCHEMAS["fit"])
    assert rec["series_mean"] == 0.0
    _manifest(tmp_path / "fit.json.manifest.json")

    sw = tmp_path / "sweep.csv"
    assert main(["sweep", "--in", str(scores), "--factors", "1", "--vol", "Constant", "GARCH(1,1)",
                 "--dist", "normal", "t", "--out", str(sw)]) == 0
    assert validate_csv(sw, "sweep") == 4
    with open(sw) as fh:
        assert sum(r["label"] == "—" for r in csv.DictReader(fh)) == 1

    sh = tmp_path / "shock.csv"
    assert main(["shock", "--scores", str(scores), "--basis", str(basis), "--out", str(sh)]) == 0
    assert validate_csv(sh, "shock") == 21
    with open(sh) as fh:
        header = next(csv.reader(fh))
    assert header == ["x", "baseline", "shock_1", "shock_2", "shock_3"]

    fc = tmp_path / "fc"
    assert main(["forecast", "--scores", str(scores), "--basis", str(basis), "--horizon", "4",
                 "--paths", "500", "--seed", "3", "--out", str(fc)]) == 0
    assert validate_csv(fc / "ar1_forecast.csv", "forecast") == 5 * 21
    assert validate_csv(fc / "quantiles.csv", "quantiles") == 4 * 21
    jsonschema.validate(json.loads((fc / "var_garch.json").read_text()), JSON_SCHEMAS["var_garch"])
    first = (fc / "quantiles.csv").read_bytes()
    fc2 = tmp_path / "fc2"
    assert main(["forecast", "--scores", str(scores), "--basis", str(basis), "--horizon", "4",
                 "--paths", "500", "--seed", "3", "--out", str(fc2)]) == 0
    assert (fc2 / "quantiles.csv").read_bytes() == first

    rep = tmp_path / "rep"
    assert main(["report", "--in", str(d), str(sw), str(sh), str(fc), "--out", str(rep)]) == 0
    svgs = sorted(p.name for p in rep.glob("*.svg"))
    assert "sweep.svg" in svgs and "quantiles.svg" in svgs and "eigenvalues.svg" in svgs
    summary = json.loads((rep / "summary.json").read_text())
    assert summary[str(sw)]["kind"] == "sweep"
    rep2 = tmp_path / "rep2"
    assert main(["report", "--in", str(d), str(sw), str(sh), str(fc), "--out", str(rep2)]) == 0
    for p in rep.glob("*.svg"):
        assert (rep2 / p.name).read_bytes() == p.read_bytes()


def test_missing_input_exit_1(tmp_path, capsys):
    out = tmp_path / "never"
    assert main(["decompose", "--in", str(tmp_path / "missing.csv"), "--out", str(out)]) == 1
    assert "missing.csv" in capsys.readouterr().err
    assert not out.exists()


def test_bad_data_leaves_no_partial_outputs(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("block,-1.000000,0.000000,1.000000\n0,1,2,oops\n")
    out = tmp_path / "dec"
    assert main(["decompose", "--in", str(bad), "--out", str(out)]) == 1
    assert not out.exists()
    assert list(tmp_path.iterdir()) == [bad]


def test_usage_errors_exit_2(tmp_path, surface_csv):
    for argv in (
        ["synth", "--M", "200", "--out", str(tmp_path / "x.csv")],
        ["synth", "--K", "0", "--out", str(tmp_path / "x.csv")],
        ["roll", "--in", str(surface_csv), "--K", "30", "--M", "21", "--out", str(tmp_path / "r")],
        ["sweep", "--in", str(surface_csv), "--vol", "FIGARCH", "--out", str(tmp_path / "s.csv")],
        ["frobnicate"],
    ):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2
    assert list(tmp_path.iterdir()) == []


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "liqsurf", "synth", "--T", "20", "--M", "5", "--K", "2",
                          "--out", str(tmp_path / "s.csv")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "s.csv.manifest.json").exists()
    res = subprocess.run([sys.executable, "-m", "liqsurf", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "forecast" in res.stdout
