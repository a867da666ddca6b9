import json
import math
import subprocess
import sys

import pytest

from indicator_tails.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv)
    return code, json.loads(out)


# bound ----------------------------------------------------------------------------


def test_bound_zero_deviation(capsys):
    code, rec = run_json(capsys, "bound", "--dist", "binomial", "--n", "2", "--p", "0.4",
                         "--side", "upper", "--a", "0", "--bound", "1.4a")
    assert code == 0 and rec["value"] == 1.0 and rec["in_validity_domain"]


def test_bound_bennett_on_moments(capsys):
    code, rec = run_json(capsys, "bound", "--dist", "moments", "--lambda", "4", "--sigma2", "2",
                         "--side", "upper", "--a", "2", "--bound", "1.13")
    assert code == 0
    assert math.isclose(rec["value"], math.exp(-2 * (2 * math.log(2) - 1)), rel_tol=1e-14)


def test_bound_outside_domain(capsys):
    code, rec = run_json(capsys, "bound", "--dist", "binomial", "--n", "10", "--p", "0.3",
                         "--side", "upper", "--a", "8", "--bound", "1.2")
    assert code == 0
    assert rec["value"] == 0 and rec["log_value"] == "-inf" and not rec["in_validity_domain"]


def test_bound_clamp_flag(capsys):
    args = ["bound", "--dist", "binomial", "--n", "10", "--p", "0.1", "--a", "6", "--bound", "1.6b"]
    _, raw = run_json(capsys, *args)
    _, clamped = run_json(capsys, *args, "--clamp")
    assert raw["value"] > 1 and clamped["value"] == 1.0


@pytest.mark.parametrize("bound_id", ["1.1", "3.6-chernoff", "3.7-chernoff"])
def test_bound_numeric_routes(capsys, bound_id):
    code, rec = run_json(capsys, "bound", "--dist", "heterogeneous", "--ps", "0.1,0.5,0.3,0.7",
                         "--side", "lower", "--a", "0.8", "--bound", bound_id)
    assert code == 0 and rec["log_value"] < 0


def test_bound_feller_needs_window(capsys):
    code, _, err = run(capsys, "bound", "--dist", "binomial", "--n", "100", "--p", "0.5",
                       "--a", "5", "--bound", "1.20")
    assert code == 2 and "window" in err


# compare -------------------------------------------------------------------------------


def test_compare_binomial_grid(capsys):
    code, rep = run_json(capsys, "compare", "--dist", "binomial", "--n", "20", "--p", "0.1", "--a", "1..18")
    assert code == 0 and rep["violation_count"] == 0
    assert len(rep["rows"]) == 18
    assert all(r["tightest_bound_id"] for r in rep["rows"][:-1])


def test_compare_reference_tails(capsys):
    code, rep = run_json(capsys, "compare", "--dist", "heterogeneous", "--ps", "1/5,3/5", "--a", "1/5")
    assert code == 0 and rep["rows"][0]["exact_tail"] == "17/25"
    code, rep = run_json(capsys, "compare", "--dist", "binomial", "--n", "2", "--p", "2/5", "--a", "1/5")
    assert rep["rows"][0]["exact_tail"] == "16/25"


def test_compare_occupancy_with_exact_moments(capsys):
    code, rep = run_json(capsys, "compare", "--model", "occupancy", "--n", "3", "--m", "2",
                         "--exact-moments", "--side", "both")
    assert code == 0 and rep["violation_count"] == 0
    row = rep["rows"][0]
    assert row["spec"]["lambda"] == "4/3" and row["spec"]["sigma2"] == "2/9"
    assert "1.13" in row["bounds"]


def test_compare_without_flag_skips_variance_bounds_for_models(capsys):
    _, rep = run_json(capsys, "compare", "--model", "occupancy", "--n", "3", "--m", "2")
    assert all("1.13" not in r["bounds"] for r in rep["rows"])


def test_compare_flag_rejected_for_other_models(capsys):
    code, _, _ = run(capsys, "compare", "--model", "barbour", "--exact-moments")
    assert code == 2


def test_compare_csv_and_workers(capsys):
    args = ["compare", "--dist", "binomial", "--n", "15", "--p", "0.3", "--side", "both"]
    _, single = run_json(capsys, *args)
    _, threaded = run_json(capsys, *args, "--workers", "4")
    assert single == threaded
    code, out, _ = run(capsys, *args, "--csv")
    lines = out.strip().splitlines()
    assert code == 0 and lines[0].startswith("spec,side,a,exact_tail")
    assert len(lines) == 1 + len(single["rows"])


def test_compare_flags_violations(capsys, monkeypatch):
    # bounds computed from moments that do not belong to the exact law
    from indicator_tails import cli
    from indicator_tails.bounds import IndicatorSumSpec
    from indicator_tails.exact import binomial_distribution

    subject = cli.Subject(IndicatorSumSpec.moments(5, "1/10"), dist=binomial_distribution(10, "1/2"))
    assert "1.13" in cli._compare_row(subject, "upper", 2, True)["violations"]
    monkeypatch.setattr(cli, "_subject", lambda args: subject)
    code, rep = run_json(capsys, "compare", "--dist", "moments", "--a", "2")
    assert code == 1 and rep["violation_count"] > 0


# oracle / decompose ----------------------------------------------------------------------


def test_oracle(capsys):
    code, rep = run_json(capsys, "oracle", "--dist", "binomial", "--n", "10", "--p", "3/10",
                         "--side", "upper", "--a", "3")
    assert code == 0 and math.isclose(float(rep["log_tail"]), math.log(0.0473489874), rel_tol=1e-9)
    code, rep = run_json(capsys, "oracle", "--dist", "poisson", "--lambda", "1", "--a", "1")
    assert math.isclose(float(rep["tail"]), 1 - 2 / math.e, rel_tol=1e-13)


def test_decompose_examples(capsys):
    code, rep = run_json(capsys, "decompose", "--model", "barbour")
    assert code == 0 and rep["real_rooted"] is False
    assert rep["certificate"]["discriminant"] == "-39"
    code, rep = run_json(capsys, "decompose", "--model", "occupancy", "--n", "3", "--m", "2")
    assert rep["real_rooted"] and rep["decomposition"]["sum_p"].startswith("1.333333333333")
    assert rep["decomposition"]["moment_reconciliation"]["ok"]
    code, rep = run_json(capsys, "decompose", "--model", "binomial", "--n", "2", "--p", "0.5")
    assert [float(p) for p in rep["decomposition"]["probabilities"]] == [0.5, 0.5]


# simulate ----------------------------------------------------------------------------------


def test_simulate_hypergeometric_reference(capsys):
    code, rep = run_json(capsys, "simulate", "--model", "hypergeometric", "--N", "50", "--m", "20",
                         "--n", "10", "--trials", "1000000", "--seed", "42")
    assert code == 0 and rep["violation_count"] == 0


def test_simulate_occupancy_mean(capsys):
    code, rep = run_json(capsys, "simulate", "--model", "occupancy", "--n", "20", "--m", "30",
                         "--seed", "7", "--trials", "200000")
    res = rep["results"][0]
    assert code == 0 and res["violations"] == 0
    expected = 20 * (19 / 20) ** 30
    assert abs(res["empirical_mean"] - expected) < 3 * res["standard_error"]
    top = res["upper_tails"][1]
    assert top["ci95"][0] <= top["empirical"] <= top["ci95"][1]


def test_simulate_is_deterministic(capsys):
    args = ["simulate", "--model", "occupancy", "--n", "6", "--m", "9", "--seed", "3",
            "--trials", "30000", "--chunk", "7000"]
    assert run(capsys, *args)[1] == run(capsys, *args)[1]


def test_simulate_manifest(capsys, tmp_path):
    path = tmp_path / "seeds.json"
    path.write_text(json.dumps([
        {"model": {"name": "hypergeometric", "N": 4, "m": 2, "n": 2}, "j": 1, "seed": 1, "trials": 5000},
        {"model": {"name": "occupancy", "n": 3, "m": 2}, "j": 2, "seed": 2, "trials": 5000},
    ]))
    code, rep = run_json(capsys, "simulate", "--manifest", str(path))
    assert code == 0 and len(rep["results"]) == 2 and rep["violation_count"] == 0


def test_simulate_witness(capsys):
    code, rep = run_json(capsys, "simulate", "--model", "conditioned-binomial",
                         "--alpha", "4", "--c", str(1 / (2 * math.e)), "--A", "10")
    assert code == 0 and rep["tail_exceeds_target"] and rep["variance_float"] > 10


# usage errors --------------------------------------------------------------------------------


@pytest.mark.parametrize("argv", [
    ["bound", "--dist", "binomial", "--n", "10"],
    ["bound", "--dist", "moments", "--lambda", "2", "--sigma2", "3", "--a", "1", "--bound", "1.13"],
    ["bound", "--dist", "binomial", "--n", "10", "--p", "0.7", "--side", "lower", "--a", "1", "--bound", "1.10"],
    ["compare", "--dist", "binomial", "--model", "occupancy", "--n", "3", "--p", "0.5", "--m", "2"],
    ["compare", "--dist", "binomial", "--n", "3", "--p", "0.5", "--a", "1..x"],
    ["simulate", "--model", "barbour", "--seed", "1"],
])
def test_usage_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and "error" in err


def test_malformed_flag_exit_2():
    proc = subprocess.run([sys.executable, "-m", "indicator_tails", "bound", "--bogus"],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and "usage" in proc.stderr
