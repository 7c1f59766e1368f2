"""
End-to-end tests for the command-line front end and the reproduction runner.
"""
import json

import pandas as pd
import pytest

import main
from run_pipeline import reproduce


def _write(path, payload):
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


@pytest.fixture
def sec4_file(tmp_path):
    out = tmp_path / "sec4.json"
    assert main.main(["example-sec4", "--out", str(out)]) == 0
    return str(out)


@pytest.fixture
def identical_file(tmp_path):
    rows = [[0.3, 0.7], [0.6, 0.4]]
    return _write(tmp_path / "same.json", {"W": rows, "Wbar": rows})


def _report(path):
    return json.loads(open(path, encoding="utf-8").read())


def test_example_sec4_summary(sec4_file):
    report = _report(sec4_file)
    summary = report["summary"]
    assert summary["divergences"][0] == pytest.approx(0.0362009, abs=1e-6)
    assert summary["divergences"][1] == pytest.approx(0.329352, abs=1e-6)
    assert -1.0 < summary["phi_switch_s"] < 0.0
    assert summary["hk_channel"] < min(summary["hk_rows"]) - 1e-3
    assert report["W"][0] == [0.01, 0.99]


def test_bounds_report(sec4_file, tmp_path):
    out = tmp_path / "bounds.json"
    assert main.main(["bounds", "--input", sec4_file, "--r", "0.1", "--out", str(out)]) == 0
    report = _report(out)
    assert report["stein"] == pytest.approx(0.329352, abs=1e-6)
    assert report["attaining_inputs"]["stein"] == 1
    assert report["r0_env"] == pytest.approx(9.21034037198, abs=1e-9)
    assert "regular" in report["regularity"]
    assert report["hk"] == 0.0
    assert "hk_best_pair" in report


def test_bounds_identical_pair_all_zero(identical_file, tmp_path):
    out = tmp_path / "bounds.json"
    assert main.main(["bounds", "--input", identical_file, "--r", "0.0", "--out", str(out)]) == 0
    report = _report(out)
    for key in ("stein", "chernoff", "hoeffding", "hk"):
        assert report[key] == 0.0


def test_exit_codes(tmp_path):
    assert main.main(["bounds", "--input", str(tmp_path / "missing.json")]) == 2
    bad = _write(tmp_path / "bad.json", {"W": [[0.5, 0.6]], "Wbar": [[0.5, 0.5]]})
    assert main.main(["bounds", "--input", bad]) == 3
    assert main.main(["simulate", "--n", "13"]) == 4
    qutrit = [[[1 / 3, 0], [0, 0], [0, 0]], [[0, 0], [1 / 3, 0], [0, 0]], [[0, 0], [0, 0], [1 / 3, 0]]]
    states = _write(tmp_path / "qutrit.json", {"dim": 3, "rho": qutrit, "sigma": qutrit})
    assert main.main(["quantum", "--input", states, "--restarts", "4"]) == 5


def test_phi_curve_shape_and_sign_change(tmp_path):
    out = tmp_path / "phi.csv"
    assert main.main(["curve", "--kind", "phi", "--s-lo", "-1", "--s-hi", "0", "--s-count", "201",
                      "--out", str(out)]) == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["s", "phi_row0", "phi_row1", "phi_envelope"]
    assert len(frame) == 201
    diff = frame["phi_row0"] - frame["phi_row1"]
    assert diff.iloc[0] > 0 > diff.iloc[-2]


def test_exponent_curve_envelope_below_rows(sec4_file, tmp_path):
    out = tmp_path / "exp.csv"
    assert main.main(["curve", "--kind", "exponent", "--input", sec4_file, "--r-lo", "0.3",
                      "--r-hi", "1.0", "--r-count", "8", "--out", str(out)]) == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["r", "Be_row0", "Be_row1", "BeStar_row0", "BeStar_row1", "hk_channel"]
    assert len(frame) == 8
    assert (frame["hk_channel"] <= frame[["BeStar_row0", "BeStar_row1"]].min(axis=1) + 1e-9).all()


def test_exponent_curve_identical_pair(identical_file, tmp_path):
    """Hoeffding columns vanish; the strong-converse exponent of W = Wbar is r itself."""
    out = tmp_path / "exp.csv"
    assert main.main(["curve", "--kind", "exponent", "--input", identical_file, "--r-hi", "0.5",
                      "--r-count", "5", "--out", str(out)]) == 0
    frame = pd.read_csv(out)
    assert (frame[["Be_row0", "Be_row1"]] == 0.0).all().all()
    for column in ("BeStar_row0", "BeStar_row1", "hk_channel"):
        assert (frame[column] - frame["r"]).abs().max() <= 1e-12


def test_curve_rejects_bad_grid():
    assert main.main(["curve", "--s-lo", "0", "--s-hi", "-1"]) == 3


def test_simulate_identical_pair(identical_file, tmp_path):
    out = tmp_path / "sim.json"
    assert main.main(["simulate", "--input", identical_file, "--n", "2", "--out", str(out)]) == 0
    report = _report(out)
    assert report["adaptive_bayes_error"] == pytest.approx(0.5)


def test_simulate_is_byte_identical(sec4_file, tmp_path, monkeypatch):
    argv = ["simulate", "--input", sec4_file, "--n", "4", "--trials", "5000", "--seed", "9"]
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    assert main.main(argv + ["--out", str(first)]) == 0
    monkeypatch.setenv("EXPLAB_THREADS", "8")
    assert main.main(argv + ["--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    report = _report(first)
    assert report["monte_carlo"]["trials"] == 5000
    assert "exact" in report


def test_simulate_fixed_mode_and_mc_requirements(sec4_file, tmp_path):
    out = tmp_path / "fixed.json"
    assert main.main(["simulate", "--input", sec4_file, "--n", "3", "--mode", "fixed", "--out", str(out)]) == 0
    report = _report(out)
    assert report["exact"]["n"] == 3
    assert main.main(["simulate", "--input", sec4_file, "--n", "3", "--mode", "mc"]) == 3


def test_config_defaults_and_flag_override(sec4_file, tmp_path):
    config = _write(tmp_path / "config.json", {"r": 0.5, "input": sec4_file})
    out = tmp_path / "bounds.json"
    assert main.main(["bounds", "--config", config, "--out", str(out)]) == 0
    assert _report(out)["r"] == 0.5
    assert main.main(["bounds", "--config", config, "--r", "0.2", "--out", str(out)]) == 0
    assert _report(out)["r"] == 0.2


def test_quantum_report_to_stdout(tmp_path, capsys):
    states = _write(tmp_path / "s.json", {"bloch_rho": [0, 0, 0.5], "bloch_sigma": [0, 0, -0.3]})
    assert main.main(["quantum", "--input", states, "--r", "0.05", "--restarts", "4"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["commuting"] is True
    assert report["gap"] == pytest.approx(0.0, abs=1e-5)
    assert set(report) >= {"measured_stein", "measured_chernoff", "measured_hoeffding", "measured_hk",
                           "quantum_relative_entropy", "best_measurement"}


@pytest.mark.slow
def test_reproduce_writes_every_stage(tmp_path):
    out = reproduce(tmp_path / "reports", n=4, trials=2000, seed=1, restarts=4)
    names = {p.name for p in out.iterdir()}
    assert {"sec4_pair.json", "phi_curve.csv", "exponent_curve.csv", "bounds.json",
            "adaptive_policy.json", "simulate.json", "quantum.json"} <= names


def test_simulate_past_the_enumeration_cap_uses_monte_carlo(tmp_path):
    out = tmp_path / "big.json"
    assert main.main(["simulate", "--n", "13", "--mode", "mc", "--trials", "100", "--seed", "1",
                      "--out", str(out)]) == 0
    report = _report(out)
    assert report["monte_carlo"]["n"] == 13
    assert "exact" not in report
    assert "adaptive_bayes_error" not in report
    assert main.main(["simulate", "--n", "13", "--mode", "fixed", "--trials", "100", "--out", str(out)]) == 0
    assert _report(out)["monte_carlo"]["trials"] == 100
    assert main.main(["simulate", "--n", "13", "--mode", "fixed"]) == 4
    assert main.main(["simulate", "--n", "13", "--mode", "dp", "--trials", "100"]) == 4


@pytest.mark.parametrize("payload", [
    {"W": [[0.5, 0.5], [1.0]], "Wbar": [[0.5, 0.5], [0.5, 0.5]]},
    {"W": [["a", "b"]], "Wbar": [[0.5, 0.5]]},
    {"W": [0.5, 0.5], "Wbar": [0.5, 0.5]},
])
def test_malformed_channel_tables_exit_with_input_error(tmp_path, payload):
    path = _write(tmp_path / "pair.json", payload)
    assert main.main(["bounds", "--input", path]) == 2


def test_malformed_policy_files_exit_with_input_error(sec4_file, tmp_path):
    argv = ["simulate", "--input", sec4_file, "--n", "1", "--policy"]
    unknown = _write(tmp_path / "unknown.json", {"policy": {"": {"7": 1.0}}})
    assert main.main(argv + [unknown]) == 2
    text = _write(tmp_path / "text.json", {"policy": {"": {"0": "half", "1": 0.5}}})
    assert main.main(argv + [text]) == 2
    listed = _write(tmp_path / "listed.json", {"policy": [0]})
    assert main.main(argv + [listed]) == 2
    unnormalised = _write(tmp_path / "sum.json", {"policy": {"": {"0": 0.2, "1": 0.2}}})
    assert main.main(argv + [unnormalised]) == 2
