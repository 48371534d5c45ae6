#!/usr/bin/env python
"""
Tests for the command-line surface
"""
import json

import pytest

from main import EXIT_FAILED, EXIT_OK, EXIT_USAGE, build_parser, main, run_config
from src.claims import ledger
from src.config import OutputFormat


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


class TestVerify:
    def test_million(self, capsys):
        code, out = run(capsys, "verify", "--limit", "1000000")
        report = json.loads(out)
        assert code == EXIT_OK
        claims = {c["claim"]: c for c in report["claims"]}
        assert claims["ANDRICA"]["violations"] == 0
        assert claims["AVG_MONOTONE"]["violations"] > 0
        assert report["unexpected_failures"] == []
        assert report["records"]["max_h"]["n"] == 4

    def test_single_claim(self, capsys):
        code, out = run(capsys, "verify", "--limit", "100", "--claims", "AVG_MONOTONE")
        assert code == EXIT_OK
        (outcome,) = json.loads(out)["claims"]
        assert outcome["first_violation"]["n"] == 2
        assert 4 in outcome["violation_head"]

    def test_band_violation_fails_run(self, capsys):
        code, out = run(capsys, "verify", "--limit", "100000", "--claims", "AVG_ASYMPTOTIC",
                        "--band-lo", "1.1", "--band-hi", "1.2")
        assert code == EXIT_FAILED
        assert json.loads(out)["unexpected_failures"] == ["AVG_ASYMPTOTIC"]

    def test_limit_too_small(self, capsys):
        assert run(capsys, "verify", "--limit", "2")[0] == EXIT_USAGE

    def test_inverted_band(self, capsys):
        assert run(capsys, "verify", "--limit", "100", "--band-lo", "1.2", "--band-hi", "0.9")[0] == EXIT_USAGE

    def test_unknown_claim(self, capsys):
        assert run(capsys, "verify", "--limit", "100", "--claims", "NOPE")[0] == EXIT_USAGE

    def test_unknown_flag(self):
        with pytest.raises(SystemExit) as err:
            main(["verify", "--frobnicate"])
        assert err.value.code == 2

    def test_thread_count_does_not_change_output(self, capsys):
        _, single = run(capsys, "verify", "--limit", "100000", "--threads", "1", "--segment-size", "4096")
        _, pooled = run(capsys, "verify", "--limit", "100000", "--threads", "4", "--segment-size", "4096")
        assert single == pooled

    def test_checkpoint_and_resume(self, capsys, tmp_path):
        ck = tmp_path / "ck.json"
        assert run(capsys, "verify", "--limit", "100000", "--checkpoint", str(ck))[0] == EXIT_OK
        assert ck.exists()
        _, resumed = run(capsys, "verify", "--resume", str(ck), "--limit", "200000")
        _, direct = run(capsys, "verify", "--limit", "200000")
        resumed, direct = json.loads(resumed), json.loads(direct)
        assert resumed["checked_n"] == direct["checked_n"]
        for a, b in zip(resumed["claims"], direct["claims"]):
            assert (a["claim"], a["checked_n"], a["violations"]) == (b["claim"], b["checked_n"], b["violations"])

    def test_interrupted_run_leaves_a_checkpoint(self, capsys, tmp_path, monkeypatch):
        ck = tmp_path / "ck.json"
        real = ledger.gap_chunks

        def interrupted(*args, **kwargs):
            for i, chunk in enumerate(real(*args, **kwargs)):
                if i == 3:
                    raise KeyboardInterrupt
                yield chunk

        monkeypatch.setattr(ledger, "gap_chunks", interrupted)
        code, out = run(capsys, "verify", "--limit", "1000000", "--segment-size", "65536", "--checkpoint", str(ck))
        monkeypatch.undo()
        assert code == EXIT_FAILED
        assert out == ""
        assert ck.exists()

        _, resumed = run(capsys, "verify", "--resume", str(ck), "--limit", "1000000")
        _, direct = run(capsys, "verify", "--limit", "1000000")
        resumed, direct = json.loads(resumed), json.loads(direct)
        assert resumed["checked_n"] == direct["checked_n"] == 78497
        for a, b in zip(resumed["claims"], direct["claims"]):
            assert (a["claim"], a["checked_n"], a["violations"], a["violation_head"]) == \
                (b["claim"], b["checked_n"], b["violations"], b["violation_head"])

    def test_checkpoint_every(self, capsys, tmp_path):
        ck = tmp_path / "ck.json"
        code = main(["verify", "--limit", "100000", "--segment-size", "4096",
                     "--checkpoint", str(ck), "--checkpoint-every", "4"])
        err = capsys.readouterr().err
        assert code == EXIT_OK
        # 13 segments: writes after 4, 8 and 12, plus the final one
        assert err.count("Checkpoint at n=") == 4

    def test_checkpoint_every_needs_a_path(self, capsys):
        assert run(capsys, "verify", "--limit", "1000", "--checkpoint-every", "2")[0] == EXIT_USAGE

    def test_corrupt_checkpoint(self, capsys, tmp_path):
        ck = tmp_path / "ck.json"
        ck.write_text("{}")
        assert run(capsys, "verify", "--resume", str(ck), "--limit", "1000")[0] == EXIT_FAILED

    def test_out_file(self, capsys, tmp_path):
        target = tmp_path / "reports" / "verify.json"
        code, out = run(capsys, "verify", "--limit", "1000", "--out", str(target))
        assert code == EXIT_OK
        assert out == ""
        assert json.loads(target.read_text())["limit"] == 1000


class TestStats:
    def test_twelve(self, capsys):
        code, out = run(capsys, "stats", "--limit", "12", "--stride", "1")
        assert code == EXIT_OK
        lines = out.splitlines()
        assert lines[0] == "n,p_n,p_next,g,h,g_bar,h_bar"
        assert len(lines) == 5
        fields = lines[-1].split(",")
        assert fields[:4] == ["4", "7", "11", "4"]
        assert float(fields[4]) == pytest.approx(0.670873479290809, abs=1e-14)
        assert fields[5] == "2.25"
        assert float(fields[6]) == pytest.approx(0.475602807, abs=1e-9)

    def test_stride(self, capsys):
        _, out = run(capsys, "stats", "--limit", "12", "--stride", "4")
        lines = out.splitlines()
        assert len(lines) == 2
        assert lines[1].startswith("4,7,11,4,")

    def test_smallest_limit(self, capsys):
        _, out = run(capsys, "stats", "--limit", "3")
        assert out.splitlines()[1].startswith("1,2,3,1,")

    def test_json_lines(self, capsys):
        _, out = run(capsys, "stats", "--limit", "12", "--format", "json")
        rows = [json.loads(line) for line in out.splitlines()]
        assert [r["n"] for r in rows] == [1, 2, 3, 4]
        assert rows[-1]["g_bar"] == 2.25

    def test_save_to_outputs(self, capsys, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        code, out = run(capsys, "stats", "--limit", "12", "--save")
        assert code == EXIT_OK
        assert out == ""
        assert (tmp_path / "outputs" / "stats.csv").read_text().startswith("n,p_n,p_next")

    def test_bad_stride(self, capsys):
        assert run(capsys, "stats", "--limit", "12", "--stride", "0")[0] == EXIT_USAGE

    def test_invariant_failure_prints_diagnostics(self, capsys, monkeypatch):
        monkeypatch.setenv("ANDRICA_LAB_H_TOLERANCE", "1e-300")
        code = main(["stats", "--limit", "100000"])
        err = capsys.readouterr().err
        assert code == EXIT_FAILED
        assert "Andrica sum drifted" in err
        assert "'relative_deviation'" in err


class TestOtherCommands:
    def test_bounds(self, capsys):
        code, out = run(capsys, "bounds", "--k-max", "100000")
        assert code == EXIT_OK
        assert json.loads(out)["violations"] == []

    def test_bounds_square_from_one(self, capsys):
        code, out = run(capsys, "bounds", "--k-max", "100", "--square-from", "1")
        assert code == EXIT_FAILED
        (violation,) = json.loads(out)["violations"]
        assert (violation["bound_id"], violation["k"]) == ("square", 1)

    def test_general(self, capsys):
        code, out = run(capsys, "general", "--x", "0.5", "--x", "0.9")
        assert code == EXIT_OK
        report = json.loads(out)
        half, ninety = report["exponents"]
        assert half["always_holds"] and half["n0"] == 1
        assert ninety["n0"] > 10 ** 12
        assert "checks" not in report

    def test_general_with_check(self, capsys):
        _, out = run(capsys, "general", "--x", "0.5", "--limit", "10000")
        (check,) = json.loads(out)["checks"]
        assert check["violations"] == 0

    def test_general_domain(self, capsys):
        assert run(capsys, "general", "--x", "1.5")[0] == EXIT_USAGE

    def test_records(self, capsys):
        code, out = run(capsys, "records", "--limit", "10000", "--decay", "1000")
        assert code == EXIT_OK
        report = json.loads(out)
        assert report["records"]["max_h"]["n"] == 4
        assert report["records"]["fraction_below_one"] == 1.0
        assert report["h_decay"][0]["decays"] is True

    def test_catalog(self, capsys):
        code, out = run(capsys, "catalog")
        assert code == EXIT_OK
        entries = json.loads(out)
        assert len(entries) == 10
        assert {e["claim"]: e["expected"] for e in entries}["AVG_MONOTONE"] == "fails-with-counterexamples"


class TestRunConfig:
    def test_environment_fallback(self, monkeypatch):
        monkeypatch.setenv("ANDRICA_LAB_THREADS", "3")
        config = run_config(build_parser().parse_args(["verify", "--limit", "100"]))
        assert config.threads == 3
        assert config.limit == 100

    def test_flag_beats_environment(self, monkeypatch):
        monkeypatch.setenv("ANDRICA_LAB_THREADS", "3")
        config = run_config(build_parser().parse_args(["verify", "--limit", "100", "--threads", "2"]))
        assert config.threads == 2

    def test_stats_defaults_to_csv(self):
        config = run_config(build_parser().parse_args(["stats", "--limit", "100"]))
        assert config.output_format is OutputFormat.CSV
