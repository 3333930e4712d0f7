import csv
import hashlib
import json
import math

import pytest

from lorenz96.cli import main, parse_range, UsageError
from lorenz96.spectral import HopfHopfPoint, enumerate_bifurcations


def run(tmp_path, *argv):
    return main([argv[0], "--out", str(tmp_path), *argv[1:]])


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestParseRange:
    def test_forms(self):
        assert parse_range("1..2.5") == (1.0, 2.5)
        assert parse_range("3", int) == (3, 3)
        assert parse_range(-0.25) == (-0.25, -0.25)
        with pytest.raises(UsageError):
            parse_range("a..b")


class TestHopfTable:
    def test_n4(self, tmp_path):
        assert run(tmp_path, "hopf-table", "--n", "4") == 0
        r = rows(tmp_path / "hopf_table.csv")
        assert len(r) == 1
        assert r[0]["l"] == "1" and float(r[0]["F_H"]) == 1.0
        assert r[0]["criticality"] == "supercritical" and r[0]["first"] == "1"
        assert float(r[0]["ell1"]) == pytest.approx(-8 / 13, abs=1e-15)

    def test_n12_hopf_hopf_first(self, tmp_path):
        assert run(tmp_path, "hopf-table", "--n", "12") == 0
        r = rows(tmp_path / "hopf_table.csv")
        hh = [x for x in r if x["criticality"] == "hopf-hopf"]
        assert len(hh) == 1 and hh[0]["l"] == "2;3" and hh[0]["first"] == "1"
        assert float(hh[0]["F_H"]) == pytest.approx(1.0, abs=1e-12)
        assert sum(x["first"] == "1" for x in r) == 1

    def test_range_row_count(self, tmp_path):
        assert run(tmp_path, "hopf-table", "--n", "4..100") == 0
        r = rows(tmp_path / "hopf_table.csv")
        slots = sum(math.ceil(n / 2 - 1) - (n % 3 == 0) for n in range(4, 101))
        merges = sum(isinstance(b, HopfHopfPoint) for n in range(4, 101) for b in enumerate_bifurcations(n))
        assert merges > 0 and len(r) == slots - merges
        assert sum(x["criticality"] == "hopf-hopf" for x in r) == merges

    def test_small_n(self, tmp_path, capsys):
        assert run(tmp_path, "hopf-table", "--n", "3") == 2
        assert "n >= 4" in capsys.readouterr().err


class TestExitCodes:
    def test_missing_F(self, tmp_path):
        assert run(tmp_path, "simulate", "--n", "4") == 2

    def test_unknown_command(self, tmp_path):
        assert main(["bogus"]) == 2

    def test_bad_flag_value(self, tmp_path):
        assert run(tmp_path, "simulate", "--n", "4", "--F", "1.2", "--dt", "-1") == 2
        assert run(tmp_path, "simulate", "--n", "4", "--F", "1.2", "--init", "nonsense") == 2
        assert run(tmp_path, "simulate", "--n", "4", "--F", "1..2") == 2

    def test_divergence(self, tmp_path):
        assert run(tmp_path, "simulate", "--n", "8", "--F", "8", "--dt", "0.5", "--t-end", "100",
                   "--transient", "0") == 3

    def test_no_cycle(self, tmp_path):
        assert run(tmp_path, "periodic-orbit", "--n", "4", "--F", "0.5..0.6", "--transient", "50") == 4


class TestOutputs:
    def test_simulate(self, tmp_path):
        assert run(tmp_path, "simulate", "--n", "4", "--F", "1.2", "--t-end", "700") == 0
        diag = json.loads((tmp_path / "diagnostics.json").read_text())
        assert diag["l"] == 1 and 5.5 < diag["T"] < 7.5 and diag["drift"] == "DecreasingJ"
        lines = (tmp_path / "trajectory.csv").read_text().splitlines()
        assert lines[0] == "t,x1,x2,x3,x4" and len(lines) == 1 + 200 * 64 + 1

    def test_manifest(self, tmp_path):
        assert run(tmp_path, "simulate", "--n", "4", "--F", "1.2", "--t-end", "510", "--seed", "7") == 0
        text = (tmp_path / "manifest.json").read_text()
        m = json.loads(text)
        assert m["command"] == "simulate" and m["parameters"]["seed"] == 7
        assert list(m) == sorted(m)
        for name, digest in m["outputs"].items():
            assert hashlib.sha256((tmp_path / name).read_bytes()).hexdigest() == digest
        assert set(m["outputs"]) == {"trajectory.csv", "diagnostics.json"}

    def test_idempotent(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        argv = ["--n", "6", "--F", "3", "--t-end", "520", "--init", "random", "--seed", "3"]
        assert run(a, "simulate", *argv) == 0 and run(b, "simulate", *argv) == 0
        assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()

    def test_config_precedence(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"n": 5, "F": 2.0, "t-end": 505.0, "transient": 500.0, "seed": 11}))
        assert run(tmp_path, "simulate", "--config", str(cfg), "--F", "1.5") == 0
        p = json.loads((tmp_path / "manifest.json").read_text())["parameters"]
        assert (p["n"], p["F"], p["t_end"], p["seed"], p["dt"]) == (5, "1.5", 505.0, 11, 1 / 64)

    def test_bad_config(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text("[1, 2]")
        assert run(tmp_path, "simulate", "--config", str(cfg), "--n", "4", "--F", "1") == 2

    def test_hovmoller(self, tmp_path):
        assert run(tmp_path, "hovmoller", "--n", "5", "--F", "0.5", "--t-end", "501", "--interp", "2") == 0
        r = rows(tmp_path / "hovmoller.csv")
        assert list(r[0]) == ["t", "j", "x"] and len(r) == 65 * 10
        assert all(abs(float(x["x"]) - 0.5) < 1e-6 for x in r)

    def test_hovmoller_two_attractors(self, tmp_path):
        out = {}
        for l in (2, 3):
            d = tmp_path / f"w{l}"
            assert run(d, "hovmoller", "--n", "12", "--F", "1.5", "--init", f"wave:{l}", "--t-end", "1000",
                       "--transient", "800") == 0
            out[l] = json.loads((d / "diagnostics.json").read_text())
        assert out[2]["l"] == 2 and out[3]["l"] == 3
        assert abs(out[2]["T"] - out[3]["T"]) > 1.0

    def test_lyapunov(self, tmp_path):
        assert run(tmp_path, "lyapunov", "--n", "4", "--F", "1.2", "--k", "2", "--horizon", "2000") == 0
        d = json.loads((tmp_path / "lyapunov.json").read_text())
        assert d["class"] == "P" and len(d["exponents"]) == 2 and abs(d["exponents"][0]) < 1e-3

    def test_scan_F(self, tmp_path):
        assert run(tmp_path, "scan", "--n", "4", "--F", "0.5..1.2", "--steps", "3", "--horizon", "500",
                   "--transient", "200") == 0
        r = rows(tmp_path / "scan.csv")
        assert [x["class"] for x in r] == ["E", "E", "P"]
        assert json.loads((tmp_path / "onset.json").read_text()) == {"onset_of_chaos": {"n=4": None}}

    def test_scan_several_n(self, tmp_path):
        assert run(tmp_path, "scan", "--n", "4..5", "--F", "0.5..0.6", "--steps", "2", "--horizon", "100",
                   "--transient", "50", "--threads", "2") == 0
        assert (tmp_path / "scan_n4.csv").exists() and (tmp_path / "scan_n5.csv").exists()

    def test_scan_FG_both(self, tmp_path):
        assert run(tmp_path, "scan", "--n", "6", "--F", "2..4", "--G", "-0.1..0.1", "--grid", "2x3",
                   "--direction", "both", "--horizon", "100", "--transient", "50") == 0
        for d in ("up", "down"):
            r = rows(tmp_path / f"scan_{d}.csv")
            assert len(r) == 6 and list(r[0]) == ["F", "G", "class", "lambda1", "lambda2", "lambda3", "wave"]
        assert run(tmp_path, "scan", "--n", "6", "--F", "2..4", "--G", "-0.1..0.1", "--grid", "2by3") == 2

    def test_periodic_orbit(self, tmp_path):
        assert run(tmp_path, "periodic-orbit", "--n", "5", "--F", "3.5..4.0", "--step", "0.02") == 0
        ev = json.loads((tmp_path / "events.json").read_text())
        assert ev[0]["kind"] == "PeriodDoubling" and ev[0]["F"] == pytest.approx(3.938, abs=0.005)
        assert rows(tmp_path / "branch.csv")[0]["stable"] == "1"

    def test_periodic_orbit_section_flags(self, tmp_path):
        assert run(tmp_path, "periodic-orbit", "--n", "4", "--F", "1.5..1.6", "--step", "0.05",
                   "--section-k", "2", "--section-c", "1.5") == 0
        assert run(tmp_path, "periodic-orbit", "--n", "4", "--F", "1.5..1.6", "--section-k", "9",
                   "--section-c", "1.5") == 2
