import io
import subprocess
import sys

import pytest

from kwtopk.cli import METRIC_COLUMNS, RunConfig, main, run_continual, snapshot_lines
from kwtopk.engine import MaintenancePolicy

EXAMPLE = ["--query", "james p2p", "--k", "3", "--delta-k", "0", "--cn-max", "5", "--kmean", "0",
           "--delta-df", "0.2", "--delta-avdl", "0.1", "--df-max", "0.3"]


@pytest.fixture
def fixture_dir(tmp_path):
    assert main(["fixture", "--out", str(tmp_path / "db")]) == 0
    log = tmp_path / "db" / "updates.log"
    log.write_text("D\tAuthors\ta3\nI\tWrites\tw9\taid=a5\tpid=p2\nD\tPapers\tp2\n", encoding="utf-8")
    return tmp_path / "db"


def run_args(d, *extra):
    return ["run", "--schema", str(d / "schema.txt"), "--data", str(d / "data"), "--log", str(d / "updates.log"),
            *EXAMPLE, *extra]


class TestRun:
    def test_snapshots_and_metrics(self, fixture_dir, tmp_path):
        snaps, mets = tmp_path / "s.tsv", tmp_path / "m.tsv"
        rc = main(run_args(fixture_dir, "--snapshots", str(snaps), "--metrics", str(mets), "--oracle-check"))
        assert rc == 0
        lines = snaps.read_text().splitlines()
        assert lines[0].split("\t")[:4] == ["0", "1", "7.036547", "C2"]
        assert {ln.split("\t")[0] for ln in lines} >= {"0", "3"}
        rows = [r.split("\t") for r in mets.read_text().splitlines()]
        assert tuple(rows[0]) == METRIC_COLUMNS
        assert [r[1] for r in rows[1:]] == ["eval", "D", "I", "D"]

    def test_deterministic_bytes(self, fixture_dir, tmp_path):
        outs = []
        for i in range(2):
            s, m = tmp_path / f"s{i}", tmp_path / f"m{i}"
            assert main(run_args(fixture_dir, "--snapshots", str(s), "--metrics", str(m), "--deterministic")) == 0
            outs.append((s.read_bytes(), m.read_bytes()))
        assert outs[0] == outs[1]

    def test_cadence(self, fixture_dir, tmp_path):
        s = tmp_path / "s"
        main(run_args(fixture_dir, "--snapshots", str(s), "--cadence", "1"))
        assert {ln.split("\t")[0] for ln in s.read_text().splitlines()} == {"0", "1", "2", "3"}

    def test_lattice_dump(self, fixture_dir, tmp_path):
        dump = tmp_path / "lat.txt"
        main(run_args(fixture_dir, "--snapshots", str(tmp_path / "s"), "--lattice-dump", str(dump)))
        assert dump.read_text().startswith("node 0 ")

    def test_bad_schema(self, tmp_path):
        (tmp_path / "schema.txt").write_text("fk A.x -> B\n")
        err = io.StringIO()
        cfg = RunConfig(schema=tmp_path / "schema.txt", data=None, query="x")
        assert run_continual(cfg, io.StringIO(), err) == 2
        assert "unknown relation" in err.getvalue()

    def test_bad_log_line(self, fixture_dir):
        (fixture_dir / "updates.log").write_text("Z\tPapers\tp1\n")
        err = io.StringIO()
        cfg = RunConfig(schema=fixture_dir / "schema.txt", data=fixture_dir / "data", query="p2p",
                        log=fixture_dir / "updates.log")
        assert run_continual(cfg, io.StringIO(), err) == 2
        assert "line 1" in err.getvalue()

    def test_trace_corruption(self, fixture_dir):
        (fixture_dir / "updates.log").write_text("D\tPapers\tnope\n")
        cfg = RunConfig(schema=fixture_dir / "schema.txt", data=fixture_dir / "data", query="p2p",
                        log=fixture_dir / "updates.log")
        assert run_continual(cfg, io.StringIO(), io.StringIO()) == 2

    def test_no_matches_warns(self, fixture_dir):
        out, err = io.StringIO(), io.StringIO()
        cfg = RunConfig(schema=fixture_dir / "schema.txt", data=fixture_dir / "data", query="zebra")
        assert run_continual(cfg, out, err) == 0
        assert "no candidate networks" in err.getvalue()
        assert out.getvalue() == "0\t0\t\t\t\n"


def test_snapshot_lines_empty():
    assert snapshot_lines(4, []) == ["4\t0\t\t\t"]


class TestGenerateAndBench:
    def test_generate_then_bench(self, tmp_path, capsys):
        d = tmp_path / "w"
        rc = main(["generate", "--out", str(d), "--size", "Papers=60", "--size", "Authors=60",
                   "--size", "Writes=120", "--keyword", "james=0.1", "--keyword", "p2p=0.1", "--ops", "40"])
        assert rc == 0
        assert sum(1 for _ in (d / "updates.log").open()) == 40
        rc = main(["bench", "--schema", str(d / "schema.txt"), "--data", str(d / "data"), "--log",
                   str(d / "updates.log"), "--query", "james p2p", "--k", "5", "--cn-max", "3"])
        assert rc == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0].startswith("mode\t") and len(out) == 6

    def test_generate_bad_ratio(self, tmp_path):
        assert main(["generate", "--out", str(tmp_path), "--size", "Papers=5", "--keyword", "x=3"]) == 2

    def test_generate_bad_pair(self, tmp_path):
        assert main(["generate", "--out", str(tmp_path), "--size", "Papers", "--keyword", "x=0.5"]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "kwtopk", "fixture", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert (tmp_path / "data" / "Papers.tsv").exists()
