import json

import pytest

from main import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_full_info_geometric(capsys):
    code, out, _ = run(capsys, "solve", "--dist", "geo-n:0.25", "--regime", "full")
    payload = json.loads(out)
    assert code == 0
    assert payload["dist"] == "geo-n:0.25"
    assert payload["p_unconditional"] == pytest.approx(2 / 3, abs=1e-9)
    assert payload["p_bar"] == pytest.approx(1 / 3, abs=1e-9)


def test_solve_no_info(capsys):
    _, out, _ = run(capsys, "solve", "--dist", "pmf:0,0.2,0.3,0.5", "--regime", "none")
    assert json.loads(out)["p_unconditional"] == pytest.approx(0.4, abs=1e-10)
    _, out, _ = run(capsys, "solve", "--dist", "poisson:3")
    assert json.loads(out)["p_unconditional"] == pytest.approx(0.316765, abs=1e-5)


def test_solve_csv(capsys):
    code, out, _ = run(capsys, "solve", "--dist", "poisson:3", "--format", "csv")
    lines = out.splitlines()
    assert code == 0
    assert lines[0] == "# Regime solution"
    assert "regime,p_conditional,p_unconditional,p_bar,case,residual,q,note" in lines


def test_output_file(capsys, tmp_path):
    target = tmp_path / "solution.json"
    code, out, _ = run(capsys, "solve", "--dist", "geo-n:0.25", "--regime", "full",
                       "--out", str(target))
    assert code == 0
    assert out == ""
    assert json.loads(target.read_text())["case"] == "Interior"


def test_scan_shows_the_jump(capsys):
    code, out, _ = run(capsys, "scan", "--dist", "geo-n0", "--param", "0:1:101", "--regime", "full")
    rows = json.loads(out)
    assert code == 0
    assert len(rows) == 100
    below = [r for r in rows if r["param"] <= 0.19 + 1e-9]
    above = [r for r in rows if r["param"] >= 0.21 - 1e-9]
    assert all(r["p"] < 0.8 for r in below)
    assert all(r["p"] == 1.0 for r in above)


def test_scan_continuous_rise(capsys):
    _, out, _ = run(capsys, "scan", "--dist", "poisson", "--param", "2:5:13", "--regime", "none")
    ps = [r["p"] for r in json.loads(out)]
    assert ps[0] == 1.0
    assert all(a >= b for a, b in zip(ps, ps[1:]))
    assert ps[1] > 0.5


def test_scan_csv_and_verify(capsys):
    code, out, _ = run(capsys, "scan", "--dist", "geo-n", "--param", "0.05:0.45:9",
                       "--regime", "none", "--verify", "--format", "csv")
    assert code == 0
    assert out.startswith("# Parameter scan")
    assert "param,p,p_bar,q,case" in out.splitlines()


def test_scan_size_info_binomial(capsys):
    _, out, _ = run(capsys, "scan", "--dist", "binomial:3", "--param", "0:1:101",
                    "--regime", "size")
    rows = json.loads(out)
    assert all(r["p"] == 1.0 for r in rows if r["param"] <= 0.66)
    assert all(r["p"] < 1.0 for r in rows if r["param"] >= 0.7)


def test_critical(capsys):
    code, out, _ = run(capsys, "critical", "--dist", "poisson", "--regime", "full",
                       "--param", "3:4")
    assert code == 0
    assert json.loads(out)["param_c"] == pytest.approx(3.3509188715, abs=1e-7)


def test_bounds(capsys):
    _, out, _ = run(capsys, "bounds", "--dist", "binomial:13,0.25")
    payload = json.loads(out)
    lo, hi = payload["coupling"]["p_interval"]
    assert lo == pytest.approx(0.1367, abs=1e-3)
    assert hi == pytest.approx(0.2482, abs=1e-3)
    assert payload["dekking"]["maker_has_chance"] in ("Yes", "No", "Inconclusive")
    _, out, _ = run(capsys, "bounds", "--dist", "geo-n", "--condition", "breaker",
                    "--param", "0.25:0.35")
    assert json.loads(out)["threshold"] == pytest.approx(8 / 27, abs=5e-6)


def test_walk_quantities(capsys):
    code, out, _ = run(capsys, "walk-quantities", "--dist", "geo-n0:0.25")
    assert code == 0
    assert json.loads(out)["rho"] == pytest.approx(0.767592, abs=1e-6)


def test_walk_quantities_with_enumeration(capsys):
    _, out, _ = run(capsys, "walk-quantities", "--dist", "poisson:3", "--enumerate", "12")
    payload = json.loads(out)
    lo, hi = payload["enumerated"]["rho"]
    assert lo <= payload["rho"] <= hi


def test_simulate_is_reproducible(capsys):
    argv = ["simulate", "--dist", "poisson:3", "--trials", "2000", "--seed", "42"]
    _, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    assert first == second
    assert json.loads(first)["seed"] == 42


def test_simulate_full_needs_depth(capsys):
    with pytest.raises(SystemExit) as info:
        main(["simulate", "--dist", "poisson:3", "--regime", "full"])
    assert info.value.code == 2
    assert "--depth" in capsys.readouterr().err
    code, out, _ = run(capsys, "simulate", "--dist", "poisson:3", "--regime", "full",
                       "--depth", "2", "--trials", "1000")
    assert code == 0
    assert "oracle" in json.loads(out)


def test_oracle(capsys):
    code, out, err = run(capsys, "oracle", "--max-depth", "2", "--max-branching", "2",
                         "--reach", "2")
    assert code == 0
    assert json.loads(out)["counterexamples"] == 0
    assert "0 counterexamples" in err


def test_oracle_tree_listing(capsys):
    _, out, _ = run(capsys, "oracle", "--max-depth", "1", "--max-branching", "2", "--list-trees")
    assert json.loads(out) == ["()", "(())", "(()())"]


def test_compare(capsys):
    _, out, _ = run(capsys, "compare", "--dist", "poisson:3")
    payload = json.loads(out)
    assert [row["regime"] for row in payload["rows"]] == ["FullInfo", "NoInfo", "SizeInfo"]


@pytest.mark.parametrize("argv", [
    ["solve"],
    ["scan", "--dist", "poisson", "--param", "2:5"],
    ["critical", "--dist", "poisson", "--param", "4:3"],
    ["solve", "--dist", "poisson:3", "--regime", "partial"],
    ["solve", "--dist", "poisson:3", "--bogus"],
    ["simulate", "--dist", "poisson:3", "--seed", "-1"],
])
def test_parse_errors_exit_two(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 2


def test_invalid_distribution_exits_two(capsys):
    code, _, err = run(capsys, "solve", "--dist", "foo:1")
    assert code == 2
    assert "Invalid distribution" in err


def test_numeric_failure_exits_three(capsys):
    code, _, err = run(capsys, "critical", "--dist", "poisson", "--regime", "full",
                       "--param", "1:2")
    assert code == 3
    assert "No phase transition" in err
