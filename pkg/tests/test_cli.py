"""End-to-end command-line tests driving main() in-process."""

from __future__ import annotations

import json

import pytest

from autoscalesim.cli import EXIT_INVALID, EXIT_IO, EXIT_OK, EXIT_RUNTIME, main
from autoscalesim.workload import load_trace

TINY = {
    "trace": {
        "generator": "burst",
        "params": {"tasks": 6, "runtime_min_s": 1.0, "runtime_max_s": 1.0, "window_s": 0.0},
    },
    "clusters": 1,
    "vms_per_cluster": 3,
    "interval_s": 0.5,
    "autoscaler": "react",
}


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


class TestPipeline:
    def test_gen_validate_size_run_round_trip(self, tmp_path, capsys):
        trace_path = tmp_path / "burst.json"
        code = main(
            [
                "gen", "burst",
                "--tasks", "8",
                "--runtime-min", "1.0",
                "--runtime-max", "2.0",
                "--window", "4.0",
                "--out", str(trace_path),
            ]
        )
        assert code == EXIT_OK
        assert "burst-8" in capsys.readouterr().out
        assert load_trace(trace_path).workflow_count == 8

        assert main(["validate", "--trace", str(trace_path)]) == EXIT_OK
        assert "8 workflows" in capsys.readouterr().out

        assert main(
            ["size", "--trace", str(trace_path), "--utilization", "0.5", "--vms-per-cluster", "2"]
        ) == EXIT_OK
        assert int(capsys.readouterr().out.strip()) >= 1

        cfg = write_json(
            tmp_path / "cfg.json",
            {"trace": {"file": str(trace_path)}, "clusters": 2, "vms_per_cluster": 4,
             "interval_s": 1.0},
        )
        out = tmp_path / "out"
        assert main(["run", "--config", cfg, "--out", str(out), "--no-plots"]) == EXIT_OK
        assert (out / "report.csv").exists()
        assert (out / "report.json").exists()
        assert not (out / "timeline.png").exists()

    def test_run_renders_figures_by_default(self, tmp_path):
        cfg = write_json(tmp_path / "cfg.json", TINY)
        out = tmp_path / "out"
        assert main(["run", "--config", cfg, "--out", str(out)]) == EXIT_OK
        assert (out / "timeline.png").exists()
        assert (out / "makespans.png").exists()

    def test_run_policy_overrides(self, tmp_path):
        cfg = write_json(tmp_path / "cfg.json", TINY)
        out = tmp_path / "out"
        code = main(
            ["run", "--config", cfg, "--out", str(out), "--no-plots",
             "--autoscaler", "plan", "--allocator", "bestfit"]
        )
        assert code == EXIT_OK
        row = (out / "report.csv").read_text().splitlines()[1].split(",")
        assert row[1] == "plan"
        assert row[2] == "bestfit"

    def test_run_supply_samples_flag(self, tmp_path):
        cfg = write_json(tmp_path / "cfg.json", TINY)
        out = tmp_path / "out"
        code = main(
            ["run", "--config", cfg, "--out", str(out), "--no-plots", "--supply-samples"]
        )
        assert code == EXIT_OK
        assert (out / "supply_samples.csv").exists()

    def test_gen_duplicate(self, tmp_path):
        trace_path = tmp_path / "t.json"
        code = main(
            ["gen", "burst", "--tasks", "3", "--duplicate", "2", "--out", str(trace_path)]
        )
        assert code == EXIT_OK
        assert load_trace(trace_path).workflow_count == 6

    def test_gen_chronos(self, tmp_path, capsys):
        trace_path = tmp_path / "c.json"
        assert main(["gen", "chronos", "--out", str(trace_path)]) == EXIT_OK
        assert "1024 workflows, 3072 tasks" in capsys.readouterr().out


class TestSweeps:
    def test_spec_file(self, tmp_path):
        spec = write_json(
            tmp_path / "spec.json",
            {"base": TINY, "axes": {"autoscalers": ["react", "adapt"]}},
        )
        out = tmp_path / "out"
        code = main(["sweep", "--spec", spec, "--out", str(out), "--no-plots"])
        assert code == EXIT_OK
        assert len((out / "report.csv").read_text().splitlines()) == 3

    def test_failed_cells_exit_runtime(self, tmp_path, capsys):
        spec = write_json(
            tmp_path / "spec.json",
            {"base": TINY, "axes": {"autoscalers": ["react", "nosuch"]}},
        )
        out = tmp_path / "out"
        code = main(["sweep", "--spec", spec, "--out", str(out), "--no-plots"])
        assert code == EXIT_RUNTIME
        captured = capsys.readouterr()
        assert "FAILED" in captured.err
        assert len((out / "report.csv").read_text().splitlines()) == 2

    def test_out_dir_falls_back_to_the_spec(self, tmp_path):
        out = tmp_path / "from-spec"
        spec = write_json(tmp_path / "spec.json", {"base": TINY, "out_dir": str(out)})
        assert main(["sweep", "--spec", spec, "--no-plots"]) == EXIT_OK
        assert (out / "report.csv").exists()

    def test_preset_utilization(self, tmp_path):
        out = tmp_path / "out"
        code = main(
            ["sweep", "--preset", "utilization", "--out", str(out), "--no-plots"]
        )
        assert code == EXIT_OK
        assert len((out / "report.csv").read_text().splitlines()) == 64

    def test_spec_and_preset_are_mutually_exclusive(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["sweep", "--spec", "x.json", "--preset", "domain"])
        with pytest.raises(SystemExit):
            main(["sweep"])


class TestExitCodes:
    def test_unknown_config_key(self, tmp_path):
        cfg = write_json(tmp_path / "cfg.json", dict(TINY, cluster_count=5))
        assert main(["run", "--config", cfg, "--no-plots"]) == EXIT_INVALID

    def test_malformed_config_json(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("{not json")
        assert main(["run", "--config", str(path), "--no-plots"]) == EXIT_INVALID

    def test_missing_trace_file_is_an_io_error(self, tmp_path):
        missing = str(tmp_path / "nope.json")
        assert main(["validate", "--trace", missing]) == EXIT_IO

    def test_invalid_trace_schema(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"name": "x", "workflows": [{"id": 1, "tasks": []}]}))
        assert main(["validate", "--trace", str(path)]) == EXIT_INVALID

    def test_bad_sizing_parameters(self, tmp_path):
        trace_path = tmp_path / "t.json"
        main(["gen", "burst", "--tasks", "2", "--out", str(trace_path)])
        assert main(["size", "--trace", str(trace_path), "--utilization", "0"]) == EXIT_INVALID

    def test_bad_generator_parameters(self, tmp_path):
        code = main(
            ["gen", "burst", "--runtime-min", "5.0", "--runtime-max", "1.0",
             "--out", str(tmp_path / "t.json")]
        )
        assert code == EXIT_INVALID
