import csv
import os

import numpy as np
import pytest

from ibcochlea.cli import main
from ibcochlea.modelio import read_model
from ibcochlea.snapshots import list_snapshots

from conftest import tiny_spec


CONFIG = """
# coarse channel for CLI smoke tests
dims = 16, 8, 8
h = 0.2
mu = 0.05
length = 2.8
width = 1.0
height = 1.0
w_base = 0.28
w_apex = 0.56
window_radius = 0.13
membrane_k0 = 50
membrane_anchor_k0 = 150
window_k = 200
window_anchor_k = 400
wall_k = 800
heli_gap = 0.4
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "channel.cfg"
    cfg.write_text(CONFIG)
    model = root / "channel.ibm"
    assert main(["build", "--config", str(cfg), "-o", str(model)]) == 0
    return root


@pytest.fixture(scope="module")
def rundir(workdir):
    out = workdir / "run_a"
    code = main([
        "run", "--model", str(workdir / "channel.ibm"), "--dt", "1e-4", "--steps", "40",
        "--snapshot-every", "5", "--out", str(out),
        "--frequency", "50", "--amplitude", "2.0", "--threads", "2",
    ])
    assert code == 0
    return out


class TestBuild:
    def test_model_matches_library_builder(self, workdir):
        from ibcochlea.builder import build_channel

        cli_model = read_model(workdir / "channel.ibm")
        lib_model = build_channel(tiny_spec())
        assert [g.id for g in cli_model.grids] == [g.id for g in lib_model.grids]
        for a, b in zip(cli_model.grids, lib_model.grids):
            np.testing.assert_array_equal(a.X_rest, b.X_rest)

    def test_build_rejects_bad_config(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("nonsense_key = 4\n")
        with pytest.raises(ValueError, match="unknown key"):
            main(["build", "--config", str(cfg), "-o", str(tmp_path / "x.ibm")])


class TestRun:
    def test_snapshots_written(self, rundir):
        steps = [s for s, _ in list_snapshots(rundir)]
        assert steps == [0, 5, 10, 15, 20, 25, 30, 35, 40]
        assert (rundir / "checkpoint.ckpt").exists()

    def test_resume_matches_straight(self, workdir, tmp_path):
        model = str(workdir / "channel.ibm")
        straight = tmp_path / "straight"
        assert main(["run", "--model", model, "--dt", "1e-4", "--steps", "20",
                     "--snapshot-every", "10", "--out", str(straight),
                     "--frequency", "50", "--amplitude", "2.0"]) == 0
        part = tmp_path / "part"
        assert main(["run", "--model", model, "--dt", "1e-4", "--steps", "10",
                     "--snapshot-every", "10", "--out", str(part),
                     "--frequency", "50", "--amplitude", "2.0"]) == 0
        rest = tmp_path / "rest"
        assert main(["run", "--resume", str(part / "checkpoint.ckpt"), "--steps", "10",
                     "--snapshot-every", "10", "--out", str(rest)]) == 0
        from ibcochlea.snapshots import read_snapshot

        a = read_snapshot(straight / "snapshot_00000020.snap")
        b = read_snapshot(rest / "snapshot_00000020.snap")
        for name in a.positions:
            np.testing.assert_array_equal(a.positions[name], b.positions[name])

    def test_dt_conflict_on_resume(self, rundir, capsys):
        code = main(["run", "--resume", str(rundir / "checkpoint.ckpt"), "--steps", "1",
                     "--dt", "9e-9", "--out", str(rundir)])
        assert code == 2
        assert "conflicts" in capsys.readouterr().err

    def test_missing_model_is_error(self, tmp_path, capsys):
        assert main(["run", "--steps", "1", "--out", str(tmp_path)]) == 2


class TestAnalysisCommands:
    def test_centerline(self, workdir, rundir, tmp_path):
        out = tmp_path / "prof.csv"
        svg = tmp_path / "prof.svg"
        assert main(["centerline", "--snapshots", str(rundir), "--model",
                     str(workdir / "channel.ibm"), "--grid", "membrane",
                     "--out", str(out), "--svg", str(svg)]) == 0
        rows = list(csv.reader(open(out)))
        assert rows[0] == ["station_cm", "displacement_cm"] and len(rows) > 10
        assert svg.exists() and svg.stat().st_size > 0

    def test_envelope_and_peak(self, workdir, rundir, tmp_path):
        out = tmp_path / "env.csv"
        assert main(["envelope", "--snapshots", str(rundir), "--model",
                     str(workdir / "channel.ibm"), "--window", "20", "40",
                     "--out", str(out)]) == 0
        rows = list(csv.reader(open(out)))
        vals = [float(v) for _, v in rows[1:]]
        assert max(vals) > 0

        pk = tmp_path / "peak.csv"
        assert main(["peak", "--snapshots", str(rundir), "--model",
                     str(workdir / "channel.ibm"), "--window", "20", "40",
                     "--out", str(pk)]) == 0
        rows = list(csv.reader(open(pk)))
        assert rows[0] == ["peak_station_cm"]
        float(rows[1][0])

    def test_linearity(self, workdir, rundir, tmp_path):
        model = str(workdir / "channel.ibm")
        double = tmp_path / "run_b"
        assert main(["run", "--model", model, "--dt", "1e-4", "--steps", "40",
                     "--snapshot-every", "5", "--out", str(double),
                     "--frequency", "50", "--amplitude", "4.0"]) == 0
        out = tmp_path / "lin.csv"
        assert main(["linearity", "--snapshots-a", str(rundir), "--snapshots-b", str(double),
                     "--model", model, "--window", "20", "40", "--scale", "2",
                     "--out", str(out)]) == 0
        rows = list(csv.reader(open(out)))
        assert rows[0][-1] == "ratio"

    def test_sweep(self, workdir, rundir, tmp_path):
        model = str(workdir / "channel.ibm")
        other = tmp_path / "run_hi"
        assert main(["run", "--model", model, "--dt", "1e-4", "--steps", "40",
                     "--snapshot-every", "5", "--out", str(other),
                     "--frequency", "100", "--amplitude", "2.0"]) == 0
        out = tmp_path / "sweep.csv"
        svg = tmp_path / "sweep.svg"
        assert main(["sweep", "--model", model, "--window", "20", "40",
                     "--run", f"50={rundir}", "--run", f"100={other}",
                     "--out", str(out), "--svg", str(svg)]) == 0
        rows = list(csv.reader(open(out)))
        assert len(rows) == 3 and svg.exists()


class TestBenchCommand:
    def test_bench_csv(self, workdir, tmp_path):
        out = tmp_path / "bench.csv"
        assert main(["bench", "--model", str(workdir / "channel.ibm"), "--dt", "1e-4",
                     "--steps", "2", "--threads", "1,2", "--repeats", "1",
                     "--warmup", "1", "--out", str(out)]) == 0
        rows = list(csv.reader(open(out)))
        assert rows[0] == ["threads", "seconds_per_step"]
        assert [r[0] for r in rows[1:]] == ["1", "2"]


class TestThreadsEnv:
    def test_env_var_honored_flag_wins(self, monkeypatch):
        from ibcochlea.parallel import resolve_threads

        monkeypatch.setenv("IBCOCHLEA_THREADS", "6")
        assert resolve_threads(None) == 6
        assert resolve_threads(2) == 2
        monkeypatch.delenv("IBCOCHLEA_THREADS")
        assert resolve_threads(None) == 1
