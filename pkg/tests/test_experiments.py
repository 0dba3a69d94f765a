"""Tests for scenario execution, CSV emission, and the CLI."""

import filecmp
import json

import numpy as np
import pytest

from shadowbench.cli import main
from shadowbench.core import expectation
from shadowbench.experiments import (
    AGGREGATE_TRIAL,
    CSV_HEADER,
    ResultRow,
    Scenario,
    canonical_state_and_observables,
    default_scenario,
    emit_csv,
    run_scenario,
)


def tiny_scenario(kind, **overrides):
    defaults = dict(kind=kind, qubits=2, trials=3, m_grid=(2, 4), seed=77)
    defaults.update(overrides)
    return Scenario(**defaults)


class TestCanonicalStateAndObservables:
    @pytest.mark.parametrize("qubits", [1, 2, 3, 5])
    def test_ground_truth_values(self, qubits):
        state, observables = canonical_state_and_observables(qubits)
        values = [expectation(obs, state) for obs in observables]
        assert values[0] == pytest.approx(1.0, abs=1e-12)
        assert values[1] == pytest.approx(0.5, abs=1e-12)
        assert values[2] == pytest.approx(0.0, abs=1e-12)

    def test_balanced_probe_is_normalized(self):
        _, observables = canonical_state_and_observables(5)
        assert np.linalg.norm(observables[1].vector) == pytest.approx(1.0, abs=1e-12)

    def test_single_qubit_edge_case(self):
        _, observables = canonical_state_and_observables(1)
        expected = np.array([1.0, 1.0]) / np.sqrt(2.0)
        assert np.allclose(observables[1].vector, expected, atol=1e-12)

    def test_invalid_qubits(self):
        with pytest.raises(ValueError, match=">= 1"):
            canonical_state_and_observables(0)


class TestScenarioValidation:
    def test_defaults_are_valid(self):
        for kind in (
            "double-descent",
            "mu-sweep",
            "rls-vs-cs",
            "random-obs",
            "mismatch",
            "multishot",
            "theorem1",
        ):
            default_scenario(kind).validate()

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown scenario kind"):
            Scenario(kind="nope").validate()

    def test_empty_grid(self):
        with pytest.raises(ValueError, match="m-grid"):
            tiny_scenario("rls-vs-cs", m_grid=()).validate()

    def test_bad_eta(self):
        with pytest.raises(ValueError, match="eta"):
            tiny_scenario("mismatch", eta_grid=(0.0, 2.0)).validate()

    def test_resource_guard(self):
        with pytest.raises(ValueError, match="resource-guard"):
            run_scenario(tiny_scenario("rls-vs-cs", qubits=8))

    def test_config_round_trip(self):
        scenario = default_scenario("mismatch")
        assert Scenario.from_dict(scenario.to_dict()) == scenario

    def test_unknown_config_key(self):
        with pytest.raises(ValueError, match="unknown scenario config"):
            Scenario.from_dict({"kind": "mismatch", "bogus": 1})


class TestRunScenario:
    def test_row_structure(self):
        rows = run_scenario(tiny_scenario("rls-vs-cs"))
        assert all(isinstance(row, ResultRow) for row in rows)
        methods = {row.method for row in rows}
        assert methods == {"RLS", "CS"}
        metrics = {row.metric for row in rows}
        for expected in (
            "frobenius-error",
            "eig-pos",
            "eig-neg",
            "trace",
            "loglik",
            "lambda-hat-0",
            "mse-0",
            "mse-0-se",
        ):
            assert expected in metrics
        trials = {row.trial for row in rows if row.trial != AGGREGATE_TRIAL}
        assert trials == {0, 1, 2}

    def test_cs_trace_rows_are_one(self):
        rows = run_scenario(tiny_scenario("rls-vs-cs"))
        cs_traces = [r.value for r in rows if r.method == "CS" and r.metric == "trace"]
        assert cs_traces
        assert np.abs(np.array(cs_traces) - 1.0).max() < 1e-10

    def test_double_descent_uses_ls(self):
        rows = run_scenario(tiny_scenario("double-descent"))
        assert {row.method for row in rows} == {"LS"}

    def test_mu_sweep_covers_grid(self):
        rows = run_scenario(tiny_scenario("mu-sweep", mu_grid=(0.05, 0.5)))
        assert {row.mu for row in rows} == {0.05, 0.5}

    def test_random_obs_metric(self):
        rows = run_scenario(tiny_scenario("random-obs", random_observables=10))
        per_trial = [r for r in rows if r.metric == "mse-rand" and r.trial >= 0]
        assert len(per_trial) == 3 * 2 * 2  # trials x grid x methods
        assert all(row.value >= 0.0 for row in per_trial)

    def test_multishot_budget_semantics(self):
        scenario = tiny_scenario("multishot", m_grid=(8, 16), l_grid=(1, 4))
        rows = run_scenario(scenario)
        budgets = {(row.settings * row.shots) for row in rows}
        assert budgets == {8, 16}
        # L = 4 grid points exist with M = budget / 4.
        assert {row.settings for row in rows if row.shots == 4} == {2, 4}

    def test_multishot_rejects_indivisible_grid(self):
        scenario = tiny_scenario("multishot", m_grid=(7,), l_grid=(4,))
        with pytest.raises(ValueError, match="divisible"):
            run_scenario(scenario)

    def test_theorem1_rows(self):
        scenario = tiny_scenario(
            "theorem1", trials=50, m_grid=(4,), l_grid=(1, 2), ensemble_samples=200
        )
        rows = run_scenario(scenario)
        aggregate_metrics = {row.metric for row in rows if row.trial == AGGREGATE_TRIAL}
        assert aggregate_metrics == {"mse", "mse-se", "mse-theory", "mse-theory-se"}
        for shots in (1, 2):
            shot_rows = [r for r in rows if r.shots == shots and r.trial == AGGREGATE_TRIAL]
            assert {r.metric for r in shot_rows} == aggregate_metrics

    def test_mismatch_eta_zero_reproduces_global_rows(self):
        base = tiny_scenario("rls-vs-cs", m_grid=(4,), trials=2)
        mismatch = tiny_scenario("mismatch", m_grid=(4,), trials=2, eta_grid=(0.0, 0.5))
        reference = {
            (r.trial, r.settings, r.method, r.metric): r.value
            for r in run_scenario(base)
        }
        for row in run_scenario(mismatch):
            if row.eta != 0.0:
                continue
            key = (row.trial, row.settings, row.method, row.metric)
            if key in reference:
                assert abs(row.value - reference[key]) < 1e-12

    def test_workers_do_not_change_rows(self):
        scenario = tiny_scenario("mismatch", trials=4, m_grid=(8,), eta_grid=(0.0, 0.25))
        serial = run_scenario(scenario, workers=1)
        threaded = run_scenario(scenario, workers=3)
        assert len(serial) == len(threaded)
        for a, b in zip(serial, threaded):
            assert a == b


class TestEmitCsv:
    def test_empty_rows_write_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        emit_csv([], path)
        assert path.read_text() == CSV_HEADER + "\n"

    def test_single_row(self, tmp_path):
        row = ResultRow("rls-vs-cs", 0, 4, 1, 0.1, 0.0, "RLS", "trace", 1.0)
        path = tmp_path / "one.csv"
        emit_csv([row], path)
        lines = path.read_text().splitlines()
        assert len(lines) == 2
        # Floats carry 17 significant digits, so they round-trip exactly.
        assert lines[1] == "rls-vs-cs,0,4,1,0.10000000000000001,0,RLS,trace,1"
        assert float(lines[1].split(",")[4]) == 0.1

    def test_sorted_output(self, tmp_path):
        rows = [
            ResultRow("x", 1, 4, 1, 0.0, 0.0, "CS", "trace", 1.0),
            ResultRow("x", 0, 4, 1, 0.0, 0.0, "CS", "trace", 1.0),
            ResultRow("x", 0, 2, 1, 0.0, 0.0, "CS", "trace", 1.0),
        ]
        path = tmp_path / "sorted.csv"
        emit_csv(rows, path)
        lines = path.read_text().splitlines()[1:]
        trials_then_settings = [tuple(line.split(",")[1:3]) for line in lines]
        assert trials_then_settings == [("0", "2"), ("0", "4"), ("1", "4")]

    def test_rerun_is_byte_identical(self, tmp_path):
        scenario = tiny_scenario("double-descent", trials=2)
        first = tmp_path / "a.csv"
        second = tmp_path / "b.csv"
        emit_csv(run_scenario(scenario), first)
        emit_csv(run_scenario(scenario), second)
        assert filecmp.cmp(first, second, shallow=False)

    def test_unwritable_path_raises_with_context(self, tmp_path):
        with pytest.raises(RuntimeError, match="no/such"):
            emit_csv([], tmp_path / "no" / "such" / "dir.csv")

    def test_nonfinite_value_rejected_at_construction(self):
        with pytest.raises(ValueError, match="non-finite"):
            ResultRow("x", 0, 1, 1, 0.0, 0.0, "CS", "trace", float("nan"))


class TestRecordFlags:
    def test_dump_then_load_reproduces_rows(self, tmp_path):
        scenario = tiny_scenario("rls-vs-cs", trials=1)
        path = tmp_path / "records.txt"
        direct = run_scenario(scenario, dump_records_path=path)
        loaded = run_scenario(scenario, load_records_path=path)
        assert direct == loaded

    def test_load_requires_single_trial(self, tmp_path):
        scenario = tiny_scenario("rls-vs-cs", trials=1)
        path = tmp_path / "records.txt"
        run_scenario(scenario, dump_records_path=path)
        with pytest.raises(ValueError, match="one trial"):
            run_scenario(tiny_scenario("rls-vs-cs", trials=2), load_records_path=path)

    def test_load_rejected_for_multishot(self, tmp_path):
        scenario = tiny_scenario("rls-vs-cs", trials=1)
        path = tmp_path / "records.txt"
        run_scenario(scenario, dump_records_path=path)
        bad = tiny_scenario("multishot", trials=1, m_grid=(4,), l_grid=(1,))
        with pytest.raises(ValueError, match="not supported"):
            run_scenario(bad, load_records_path=path)


class TestCli:
    def test_scenario_run_writes_csv(self, tmp_path, capsys):
        out = tmp_path / "out.csv"
        code = main(
            [
                "mismatch",
                "--qubits", "2",
                "--trials", "2",
                "--m-grid", "4",
                "--eta-grid", "0,0.5",
                "--seed", "3",
                "--out", str(out),
            ]
        )
        assert code == 0
        assert out.read_text().startswith(CSV_HEADER)
        assert "wrote" in capsys.readouterr().out

    def test_config_file_with_flag_override(self, tmp_path):
        config = tmp_path / "scenario.json"
        config.write_text(
            json.dumps({"qubits": 2, "trials": 2, "m_grid": [2, 4], "seed": 5})
        )
        out = tmp_path / "out.csv"
        code = main(
            [
                "double-descent",
                "--config", str(config),
                "--trials", "1",
                "--out", str(out),
            ]
        )
        assert code == 0
        body = out.read_text().splitlines()[1:]
        trials = {line.split(",")[1] for line in body}
        # Flag overrode the config's two trials down to one; single-trial
        # runs have no trial-aggregated MSE rows.
        assert trials == {"0"}
        settings = {line.split(",")[2] for line in body}
        assert settings == {"2", "4"}

    def test_invalid_configuration_exits_two(self, tmp_path, capsys):
        code = main(["rls-vs-cs", "--qubits", "0", "--out", str(tmp_path / "x.csv")])
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_resource_guard_exits_two_without_force(self, tmp_path, capsys):
        code = main(["rls-vs-cs", "--qubits", "9", "--trials", "1",
                     "--m-grid", "2", "--out", str(tmp_path / "x.csv")])
        assert code == 2
        assert "resource-guard" in capsys.readouterr().err

    def test_validate_passes(self, capsys):
        assert main(["validate"]) == 0
        output = capsys.readouterr().out
        assert "10/10 checks passed" in output

    def test_dump_and_load_records_flags(self, tmp_path):
        records = tmp_path / "records.txt"
        args = [
            "rls-vs-cs",
            "--qubits", "2",
            "--trials", "1",
            "--m-grid", "2,4",
            "--seed", "21",
        ]
        first = tmp_path / "direct.csv"
        second = tmp_path / "replayed.csv"
        code = main(args + ["--dump-records", str(records), "--out", str(first)])
        assert code == 0
        assert records.exists()
        code = main(args + ["--load-records", str(records), "--out", str(second)])
        assert code == 0
        assert filecmp.cmp(first, second, shallow=False)

    def test_observables_subset_via_config(self, tmp_path):
        config = tmp_path / "scenario.json"
        config.write_text(
            json.dumps(
                {"qubits": 2, "trials": 2, "m_grid": [4], "seed": 5, "observables": [0, 2]}
            )
        )
        out = tmp_path / "out.csv"
        assert main(["mismatch", "--config", str(config), "--out", str(out)]) == 0
        metrics = {line.split(",")[7] for line in out.read_text().splitlines()[1:]}
        assert "lambda-hat-0" in metrics and "lambda-hat-2" in metrics
        assert "lambda-hat-1" not in metrics

    def test_workers_flag_byte_identical(self, tmp_path):
        args = [
            "mismatch",
            "--qubits", "2",
            "--trials", "3",
            "--m-grid", "8",
            "--eta-grid", "0,0.25",
            "--seed", "11",
        ]
        first = tmp_path / "w1.csv"
        second = tmp_path / "w4.csv"
        assert main(args + ["--workers", "1", "--out", str(first)]) == 0
        assert main(args + ["--workers", "4", "--out", str(second)]) == 0
        assert filecmp.cmp(first, second, shallow=False)
