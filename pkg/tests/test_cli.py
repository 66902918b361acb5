import json
import os
from dataclasses import replace

import numpy as np
import pytest

from rigidsim.cli import check_command, main, run_command, sweep_command
from rigidsim.engine import run
from rigidsim.io import (
    read_events_json,
    read_trace_csv,
    write_events_json,
    write_trace_csv,
)
from rigidsim.rigidity import FormationState
from rigidsim.scenario import ScenarioError, parse_scenario


@pytest.fixture()
def quick_scenario():
    s = parse_scenario("paper-centralized")
    return replace(s, duration=1.0)


class TestRunCommand:
    def test_writes_three_files_and_reports_monotone(self, quick_scenario, tmp_path):
        out = tmp_path / "run"
        assert run_command(quick_scenario, str(out)) == 0
        assert sorted(p.name for p in out.iterdir()) == [
            "events.json",
            "report.json",
            "trace.csv",
        ]
        report = json.loads((out / "report.json").read_text())
        assert report["lyapunov"]["monotone"] is True

    def test_single_step_run_is_valid(self, tmp_path):
        s = parse_scenario("paper-centralized")
        tiny = replace(s, duration=1e-3, step=1e-3, sample_every=1)
        out = tmp_path / "tiny"
        assert run_command(tiny, str(out)) == 0
        trace = read_trace_csv(out / "trace.csv")
        assert trace.times.size == 2

    def test_divergence_gives_nonzero_exit(self, tmp_path, capsys):
        s = parse_scenario("paper-centralized")
        far = replace(
            s,
            initial=FormationState(100.0 * s.initial.positions, time=0.0),
            bisection=False,
        )
        code = run_command(far, str(tmp_path / "far"))
        assert code != 0
        captured = capsys.readouterr()
        assert "diverged at step" in captured.err

    def test_plot_flag_writes_plot_artifacts(self, quick_scenario, tmp_path):
        out = tmp_path / "plots"
        assert run_command(quick_scenario, str(out), plot=True) == 0
        names = {p.name for p in out.iterdir()}
        assert {"plot_data.csv", "errors.svg", "deltas.svg", "events.svg"} <= names
        header = (out / "plot_data.csv").read_text().splitlines()[0]
        assert header == "series,time,value"


class TestFileFormats:
    def test_trace_round_trip(self, quick_scenario, tmp_path):
        trace, log = run(quick_scenario)
        path = tmp_path / "trace.csv"
        write_trace_csv(trace, path)
        back = read_trace_csv(path, controller=quick_scenario.controller)
        assert np.array_equal(back.times, trace.times)
        assert np.array_equal(back.positions, trace.positions)
        assert np.array_equal(back.errors, trace.errors)
        assert np.array_equal(back.delta_norms, trace.delta_norms)

    def test_events_round_trip(self, quick_scenario, tmp_path):
        _, log = run(quick_scenario)
        path = tmp_path / "events.json"
        write_events_json(log, path)
        assert read_events_json(path) == log

    def test_event_json_schema(self, quick_scenario, tmp_path):
        _, log = run(quick_scenario)
        path = tmp_path / "events.json"
        write_events_json(log, path)
        payload = json.loads(path.read_text())
        assert isinstance(payload, list)
        assert set(payload[0]) == {"scope", "time", "value", "delta_norm"}
        assert payload[0]["scope"] == "global"

    def test_distributed_scopes_are_one_based_ints(self, tmp_path):
        s = replace(parse_scenario("paper-distributed"), duration=0.5)
        _, log = run(s)
        path = tmp_path / "events.json"
        write_events_json(log, path)
        payload = json.loads(path.read_text())
        scopes = {item["scope"] for item in payload}
        assert scopes == {1, 2, 3, 4, 5}

    def test_trace_column_order(self, quick_scenario, tmp_path):
        trace, _ = run(quick_scenario)
        path = tmp_path / "trace.csv"
        write_trace_csv(trace, path)
        header = path.read_text().splitlines()[0].split(",")
        assert header[0] == "time"
        assert header[1:16] == [
            f"p{i}_{ax}" for i in range(1, 6) for ax in ("x", "y", "z")
        ]
        assert header[16:25] == [f"e{k}" for k in range(1, 10)]
        assert header[25] == "V"
        assert header[26:29] == ["centroid_x", "centroid_y", "centroid_z"]
        assert header[29:34] == [f"block{i}" for i in range(1, 6)]
        assert header[34:] == ["delta"]


class TestDeterministicOutput:
    def test_byte_identical_files(self, quick_scenario, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run_command(quick_scenario, str(a)) == 0
        assert run_command(quick_scenario, str(b)) == 0
        for name in ("trace.csv", "events.json", "report.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()


class TestSweep:
    def test_three_gamma_cells(self, tmp_path):
        base = replace(parse_scenario("paper-centralized"), duration=0.5)
        rows = sweep_command(
            base, {"gamma": [0.2, 0.6, 0.9]}, str(tmp_path / "sweep"), workers=1
        )
        assert len(rows) == 3
        assert [r["gamma"] for r in rows] == [0.2, 0.6, 0.9]
        assert all(r["status"] == "ok" for r in rows)
        assert all(r["min_gap"] > 0 for r in rows)
        summary = (tmp_path / "sweep" / "summary.csv").read_text().splitlines()
        assert summary[0].startswith("cell,gamma,status")
        assert len(summary) == 4
        for idx in range(3):
            assert (tmp_path / "sweep" / f"cell_{idx:03d}" / "trace.csv").exists()

    def test_single_cell_matches_run(self, tmp_path):
        base = replace(parse_scenario("paper-centralized"), duration=0.5)
        rows = sweep_command(base, {"gamma": [0.6]}, str(tmp_path / "one"), workers=1)
        trace, log = run(base)
        assert rows[0]["event_count"] == len(log)
        assert rows[0]["final_error_norm"] == pytest.approx(
            float(trace.error_norms[-1])
        )

    def test_workers_do_not_change_results(self, tmp_path):
        base = replace(parse_scenario("paper-centralized"), duration=0.5)
        rows1 = sweep_command(base, {"gamma": [0.3, 0.7]}, str(tmp_path / "w1"), workers=1)
        rows2 = sweep_command(base, {"gamma": [0.3, 0.7]}, str(tmp_path / "w2"), workers=2)
        assert rows1 == rows2
        assert (tmp_path / "w1" / "summary.csv").read_bytes() == (
            tmp_path / "w2" / "summary.csv"
        ).read_bytes()

    def test_gamma_one_rejected_before_running(self, tmp_path):
        base = replace(parse_scenario("paper-centralized"), duration=0.5)
        with pytest.raises(ScenarioError, match=r"\(0, 1\)"):
            sweep_command(base, {"gamma": [0.5, 1.0]}, str(tmp_path / "bad"), workers=1)
        assert not (tmp_path / "bad" / "summary.csv").exists()

    def test_empty_grid_rejected(self, tmp_path):
        base = replace(parse_scenario("paper-centralized"), duration=0.5)
        with pytest.raises(ScenarioError):
            sweep_command(base, {}, str(tmp_path / "empty"), workers=1)

    def test_cartesian_grid_ordering(self, tmp_path):
        base = replace(parse_scenario("paper-centralized"), duration=0.2)
        rows = sweep_command(
            base,
            {"gamma": [0.3, 0.7], "step": [1e-3, 2e-3]},
            str(tmp_path / "cart"),
            workers=1,
        )
        assert [(r["gamma"], r["step"]) for r in rows] == [
            (0.3, 1e-3),
            (0.3, 2e-3),
            (0.7, 1e-3),
            (0.7, 2e-3),
        ]


class TestCheckCommand:
    def test_check_passes_on_fresh_run(self, quick_scenario, tmp_path, capsys):
        out = tmp_path / "chk"
        run_command(quick_scenario, str(out))
        assert check_command(str(out), quick_scenario) == 0
        assert "all checks passed" in capsys.readouterr().out

    def test_check_without_scenario(self, quick_scenario, tmp_path):
        out = tmp_path / "chk2"
        run_command(quick_scenario, str(out))
        assert check_command(str(out)) == 0

    def test_check_flags_tampered_trace(self, quick_scenario, tmp_path):
        out = tmp_path / "chk3"
        run_command(quick_scenario, str(out))
        trace = read_trace_csv(out / "trace.csv", controller="centralized-event")
        doctored = trace.lyapunov.copy()
        doctored[len(doctored) // 2] = doctored[0] * 10  # inject a V bump
        import dataclasses

        bad = dataclasses.replace(trace, lyapunov=doctored)
        write_trace_csv(bad, out / "trace.csv")
        assert check_command(str(out), quick_scenario) != 0


class TestMainEntry:
    def test_run_verb(self, tmp_path):
        out = tmp_path / "cli_run"
        code = main(
            [
                "run",
                "--scenario",
                "paper-centralized",
                "--duration",
                "0.5",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        assert (out / "trace.csv").exists()

    def test_presets_verb_lists_names(self, capsys):
        assert main(["presets"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert "paper-centralized" in out

    def test_presets_verb_exports_scenario(self, tmp_path):
        path = tmp_path / "bench.ini"
        assert main(["presets", "paper-distributed", "--out", str(path)]) == 0
        assert parse_scenario(path) == parse_scenario("paper-distributed")

    def test_bad_scenario_is_reported(self, tmp_path, capsys):
        code = main(["run", "--scenario", "missing.ini", "--out", str(tmp_path)])
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_unwritable_output_dir_reported(self, tmp_path, capsys):
        blocker = tmp_path / "blocker"
        blocker.write_text("not a directory")
        code = main(
            [
                "run",
                "--scenario",
                "paper-centralized",
                "--duration",
                "0.1",
                "--out",
                str(blocker / "nested"),
            ]
        )
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_sweep_verb(self, tmp_path):
        out = tmp_path / "cli_sweep"
        code = main(
            [
                "sweep",
                "--scenario",
                "paper-centralized",
                "--duration",
                "0.5",
                "--param",
                "gamma=0.4,0.8",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        assert (out / "summary.csv").exists()

    def test_no_bisection_flag(self, tmp_path):
        out = tmp_path / "cli_nb"
        code = main(
            [
                "run",
                "--scenario",
                "paper-centralized",
                "--duration",
                "0.2",
                "--no-bisection",
                "--out",
                str(out),
            ]
        )
        assert code == 0

    def test_check_verb(self, tmp_path):
        out = tmp_path / "cli_check"
        assert (
            main(
                [
                    "run",
                    "--scenario",
                    "paper-centralized",
                    "--duration",
                    "0.5",
                    "--out",
                    str(out),
                ]
            )
            == 0
        )
        code = main(
            [
                "check",
                "--out",
                str(out),
                "--scenario",
                "paper-centralized",
            ]
        )
        assert code == 0

    def test_workers_env_default(self, tmp_path, monkeypatch):
        monkeypatch.setenv("RIGIDSIM_WORKERS", "2")
        out = tmp_path / "cli_env"
        code = main(
            [
                "sweep",
                "--scenario",
                "paper-centralized",
                "--duration",
                "0.2",
                "--param",
                "gamma=0.4,0.8",
                "--out",
                str(out),
            ]
        )
        assert code == 0
