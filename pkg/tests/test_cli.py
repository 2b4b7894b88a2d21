import json
import subprocess
import sys

import numpy as np
import pytest

from spemix.cli import main


@pytest.fixture(scope="module")
def design3_csv(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim") / "d3.csv"
    assert main(["simulate", "--design", "3", "--seed", "2", "--out", str(out)]) == 0
    return out


def test_simulate_writes_labelled_csv(design3_csv):
    lines = design3_csv.read_text().splitlines()
    assert lines[0] == "x1,x2,label"
    assert len(lines) == 451


def test_fit_and_evaluate(tmp_path, design3_csv, capsys):
    out = tmp_path / "fit"
    rc = main(["fit", "--data", str(design3_csv), "--label-col", "label", "--models", "EIIV",
               "--g-min", "1", "--g-max", "2", "--seed", "1", "--out", str(out)])
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    assert report["best"]["G"] == 2
    truth = tmp_path / "truth.csv"
    labels = np.loadtxt(design3_csv, delimiter=",", skiprows=1)[:, -1].astype(int)
    truth.write_text("label\n" + "\n".join(map(str, labels)) + "\n")
    capsys.readouterr()
    assert main(["evaluate", "--pred", str(out / "predictions.csv"), "--truth", str(truth)]) == 0
    value = float(capsys.readouterr().out)
    assert value == pytest.approx(report["best"]["ari"], abs=1e-12)


def test_semi_supervised_fit(tmp_path, design3_csv):
    out = tmp_path / "semi"
    rc = main(["fit", "--data", str(design3_csv), "--label-col", "label", "--models", "EIIV",
               "--g-min", "2", "--g-max", "2", "--seed", "1", "--semi-supervised",
               "--split-fraction", "0.5", "--split-seed", "3", "--out", str(out)])
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    assert report["split"] == {"fraction": 0.5, "seed": 3, "labelled": 225}


@pytest.mark.parametrize("argv", [
    [],
    ["fit", "--data", "x.csv"],
    ["fit", "--data", "x.csv", "--models", "XYZW", "--g-min", "1", "--g-max", "2",
     "--seed", "0", "--out", "o"],
    ["simulate", "--design", "4", "--seed", "0", "--out", "o.csv"],
    ["replicate", "--design", "3", "--replicates", "0", "--seed", "0", "--models", "all",
     "--g-min", "1", "--g-max", "2", "--out", "o"],
])
def test_usage_errors_exit_one(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    with pytest.raises(SystemExit) as info:
        rc = main(argv)
        raise SystemExit(rc)
    assert info.value.code == 1


def test_grid_bounds_and_split_flags(tmp_path, design3_csv):
    base = ["fit", "--data", str(design3_csv), "--models", "EIIV", "--seed", "0",
            "--out", str(tmp_path / "o")]
    assert main(base + ["--g-min", "3", "--g-max", "2"]) == 1
    assert main(base + ["--g-min", "1", "--g-max", "1", "--split-fraction", "0.3"]) == 1


def test_data_errors_exit_two(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,oops\n")
    common = ["--models", "EIIV", "--g-min", "1", "--g-max", "1", "--seed", "0",
              "--out", str(tmp_path / "o")]
    assert main(["fit", "--data", str(bad)] + common) == 2
    assert main(["fit", "--data", str(tmp_path / "missing.csv")] + common) == 2
    cfg = tmp_path / "c.json"
    cfg.write_text("{")
    assert main(["simulate", "--config", str(cfg), "--seed", "0", "--out", "x.csv"]) == 2


def test_no_converged_fit_exits_three(tmp_path, design3_csv):
    out = tmp_path / "nc"
    rc = main(["fit", "--data", str(design3_csv), "--models", "VVVV", "--g-min", "2",
               "--g-max", "2", "--seed", "0", "--max-iter", "2", "--out", str(out)])
    assert rc == 3
    assert json.loads((out / "report.json").read_text())["best"] is None


def test_bad_thread_setting_exits_one(tmp_path, design3_csv, monkeypatch):
    monkeypatch.setenv("SPE_MIX_THREADS", "zero")
    rc = main(["fit", "--data", str(design3_csv), "--models", "EIIV", "--g-min", "1",
               "--g-max", "1", "--seed", "0", "--out", str(tmp_path / "t")])
    assert rc == 1


def test_replicate_reports_are_byte_identical(tmp_path):
    args = ["replicate", "--design", "3", "--replicates", "2", "--seed", "7",
            "--models", "EIIV", "--g-min", "1", "--g-max", "2"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "report.json").read_bytes()
    assert a == (tmp_path / "b" / "report.json").read_bytes()
    assert (tmp_path / "a" / "summary.txt").read_text().startswith("design 3")


def test_console_script_entry_point(tmp_path):
    out = tmp_path / "s.csv"
    proc = subprocess.run([sys.executable, "-m", "spemix.cli", "simulate", "--design", "3",
                           "--seed", "0", "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0 and out.exists()
