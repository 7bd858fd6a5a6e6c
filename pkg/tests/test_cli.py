from __future__ import annotations

import json

import pytest

from bdcsp import cli


def _run(tmp_path, *argv):
    out = tmp_path / argv[0]
    code = cli.main([*argv, "--out", str(out)])
    report = json.loads((out / "report.json").read_text()) if (out / "report.json").exists() else None
    return code, out, report


def test_decay_certify_small(tmp_path):
    code, out, report = _run(tmp_path, "decay-certify", "--check", "addition,serial,product-rule,noisy-chain",
                             "--trials", "200")
    assert code == 0 and report["ok"]
    assert {c["name"] for c in report["result"]["checks"]} == {"addition", "serial", "product-rule", "noisy-chain"}
    assert (out / "tables" / "checks.csv").exists()
    assert report["spec"]["recipe"] == "decay-certify"
    assert len(report["spec_hash"]) == 16


def test_unknown_check_exits_with_error(tmp_path):
    code, _, report = _run(tmp_path, "decay-certify", "--check", "nonsense")
    assert code == 2 and report is None


def test_unknown_recipe_is_rejected():
    with pytest.raises(SystemExit):
        cli.main(["no-such-recipe"])


def test_game_sweep_writes_table_and_is_reproducible(tmp_path):
    args = ["game-sweep", "--n", "300", "--trials", "10", "--predicate", "3-EQU", "--budgets", "sqrt(n);4*sqrt(n)"]
    code, out, report = _run(tmp_path, *args)
    assert code == 0
    first = (out / "tables" / "advantage.csv").read_text()
    assert first.count("\n") == 3
    cli.main([*args, "--out", str(out), "--workers", "2"])
    assert (out / "tables" / "advantage.csv").read_text() == first


def test_farness_audit_pass_and_fail(tmp_path):
    code, _, report = _run(tmp_path, "farness-audit", "--n", "9", "--d", "6", "--trials", "3",
                           "--window", "0,1", "--min-pass", "1")
    assert code == 0 and report["result"]["in_window_fraction"] == 1
    code, _, report = _run(tmp_path, "farness-audit", "--n", "9", "--d", "6", "--trials", "3",
                           "--window", "0,0.01")
    assert code == 1 and not report["ok"]


def test_kequ_bench_small(tmp_path):
    code, _, report = _run(tmp_path, "kequ-bench", "--n-grid", "501", "--trials", "3")
    assert report["result"]["false_rejects"] == 0
    assert report["result"]["empty_witnesses"] == 0


def test_kequ_test_emits_witness(tmp_path):
    code, _, report = _run(tmp_path, "kequ-test", "--n", "501", "--mode", "far", "--emit-witness", "--seed", "1")
    verdict = report["result"]["verdict"]
    assert code == 0
    if not verdict["accept"]:
        assert verdict["witness"]


def test_hamming_rank_small(tmp_path):
    code, _, report = _run(tmp_path, "hamming-rank", "--trials", "2", "--subsets", "50", "--uniform-checks", "5")
    assert code == 0
    assert all(r["rank_violations"] == 0 for r in report["result"]["rows"])


def test_expander_audit_small(tmp_path):
    code, _, report = _run(tmp_path, "expander-audit", "--trials", "5", "--gamma", "0.15", "--simple",
                           "--min-pass", "0.2")
    assert code == 0 and 0 <= report["result"]["pass_rate"] <= 1


def test_history_stats_small(tmp_path):
    # at n=1e5 a repeated vertex inside one edge shows up in roughly 1 trial in 500, so use n=1e6
    code, _, report = _run(tmp_path, "history-stats", "--n", "1000000", "--trials", "5")
    assert code == 0 and report["result"]["mean_cyclomatic"] == 0


def test_dump_spec(capsys):
    assert cli.main(["kequ-test", "--n", "501", "--dump-spec"]) == 0
    spec = json.loads(capsys.readouterr().out)
    assert spec["n"] == 501 and spec["recipe"] == "kequ-test"


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env_out"))
    assert cli.main(["decay-certify", "--check", "addition", "--trials", "10"]) == 0
    assert (tmp_path / "env_out" / "report.json").exists()
