import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from balanced_transport import small_example, small_example_solution
from balanced_transport.cli import main
from balanced_transport.fileio import read_matrix_csv, read_problem, read_trace_csv, write_matrix_csv, write_problem

SRC = str(Path(__file__).resolve().parents[1] / "src")


@pytest.fixture
def problem_file(tmp_path):
    path = tmp_path / "small.json"
    write_problem(small_example(), path)
    return path


class TestGenerate:
    def test_small_example_preset(self, tmp_path):
        out = tmp_path / "small.json"
        assert main(["generate", "--preset", "small-example", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["weights"] == [0.0, 1.0, 0.5, 0.7, 0.5, 0.3, 0.6, 0.3, 0.0]
        prob = read_problem(out)
        assert np.array_equal(prob.weights, small_example().weights)

    def test_grid_preset_size_two(self, tmp_path):
        out = tmp_path / "grid.json"
        assert main(["generate", "--preset", "paper-grid", "--size", "2", "--out", str(out)]) == 0
        prob = read_problem(out)
        assert np.allclose(prob.weights, 1.0)
        assert np.allclose(prob.row_marginals, [0.5, 0.5])

    def test_odd_grid_rejected(self, tmp_path, capsys):
        out = tmp_path / "grid.json"
        assert main(["generate", "--preset", "paper-grid", "--size", "3", "--out", str(out)]) == 1
        assert "marginal" in capsys.readouterr().err

    def test_missing_size(self, tmp_path):
        assert main(["generate", "--preset", "paper-grid", "--out", str(tmp_path / "g.json")]) == 1


class TestSolve:
    def test_schedule_run_recovers_the_known_plan(self, problem_file, tmp_path):
        plan_path = tmp_path / "plan.csv"
        trace_path = tmp_path / "trace.csv"
        report_path = tmp_path / "report.json"
        code = main([
            "solve", str(problem_file),
            "--schedule", "stages=12,factor=1.5,final=1e-4",
            "--out-plan", str(plan_path),
            "--out-trace", str(trace_path),
            "--report", str(report_path),
        ])
        assert code == 0
        plan = read_matrix_csv(plan_path)
        assert np.max(np.abs(plan - small_example_solution())) < 0.01
        report = json.loads(report_path.read_text())
        assert report["converged"] is True
        assert len(report["iterations_per_stage"]) == 12
        assert report["final_criterion"] < 0.01
        assert report["objective_value"] >= 0.54
        assert report["duality_gap"] is not None
        rows = read_trace_csv(trace_path)
        assert len(rows) == report["iterations_total"]
        # the running minimum of the criterion column never increases
        criteria = [c for _, _, c in rows]
        running = np.minimum.accumulate(criteria)
        assert np.all(np.diff(running) <= 0.0 + 1e-18)

    def test_zero_eta_names_the_floor(self, problem_file, capsys):
        assert main(["solve", str(problem_file), "--eta", "0"]) == 1
        err = capsys.readouterr().err
        assert "floor" in err and "1e-08" in err

    def test_scalar_problem_plan_file(self, tmp_path):
        from balanced_transport import OTProblem

        path = tmp_path / "one.json"
        write_problem(OTProblem([[0.25]], [3.0], [3.0]), path)
        plan_path = tmp_path / "plan.csv"
        assert main(["solve", str(path), "--eta", "0.05", "--out-plan", str(plan_path)]) == 0
        plan = read_matrix_csv(plan_path)
        assert plan.shape == (1, 1)
        assert plan[0, 0] == pytest.approx(3.0, rel=1e-12)

    def test_budget_exhaustion_exits_two(self, problem_file):
        assert main(["solve", str(problem_file), "--eta", "1e-3", "--max-iters", "3"]) == 2

    def test_debug_z_dump(self, problem_file, tmp_path):
        z_path = tmp_path / "z.csv"
        plan_path = tmp_path / "plan.csv"
        eta = 1e-3
        code = main(["solve", str(problem_file), "--eta", str(eta),
                     "--out-plan", str(plan_path), "--debug-z", str(z_path)])
        assert code == 0
        z = read_matrix_csv(z_path)
        plan = read_matrix_csv(plan_path)
        assert np.allclose(z ** (1.0 / eta), plan, rtol=1e-12)

    def test_eta_and_schedule_conflict(self, problem_file):
        assert main(["solve", str(problem_file), "--eta", "1e-2",
                     "--schedule", "stages=2,factor=2,final=1e-3"]) == 1

    def test_missing_problem_file(self, tmp_path):
        assert main(["solve", str(tmp_path / "absent.json"), "--eta", "1e-2"]) == 1

    def test_malformed_schedule_flag(self, problem_file):
        assert main(["solve", str(problem_file), "--schedule", "stages=2;factor=2"]) == 1


class TestVerify:
    def test_known_plan_passes(self, problem_file, tmp_path, capsys):
        plan_path = tmp_path / "plan.csv"
        write_matrix_csv(small_example_solution(), plan_path)
        assert main(["verify", str(problem_file), str(plan_path)]) == 0
        out = capsys.readouterr().out
        assert "is_balanced: True" in out

    def test_perturbed_plan_exits_three(self, problem_file, tmp_path, capsys):
        perturbed = np.array([[0.05, 0.2, 0.0], [0.0, 0.05, 0.2], [0.15, 0.35, 0.0]])
        plan_path = tmp_path / "plan.csv"
        write_matrix_csv(perturbed, plan_path)
        assert main(["verify", str(problem_file), str(plan_path)]) == 3
        assert "is_balanced: False" in capsys.readouterr().out

    def test_wrong_dimensions_exit_one(self, problem_file, tmp_path):
        plan_path = tmp_path / "plan.csv"
        write_matrix_csv(np.ones((2, 2)), plan_path)
        assert main(["verify", str(problem_file), str(plan_path)]) == 1


class TestHeatmap:
    def test_renders_plan(self, tmp_path):
        plan_path = tmp_path / "plan.csv"
        write_matrix_csv(np.array([[0.0, 1.0], [1.0, 0.0]]), plan_path)
        out = tmp_path / "plan.pgm"
        assert main(["heatmap", str(plan_path), "--out", str(out)]) == 0
        raw = out.read_bytes()
        assert raw.startswith(b"P5\n2 2\n255\n")
        assert list(raw[-4:]) == [0, 255, 255, 0]

    def test_grid_weights_header(self, tmp_path):
        code = main(["generate", "--preset", "paper-grid", "--size", "16", "--out", str(tmp_path / "g.json")])
        assert code == 0
        prob = read_problem(tmp_path / "g.json")
        weights_path = tmp_path / "weights.csv"
        write_matrix_csv(prob.weights, weights_path)
        out = tmp_path / "weights.pgm"
        assert main(["heatmap", str(weights_path), "--out", str(out)]) == 0
        assert out.read_bytes().startswith(b"P5\n16 16\n255\n")

    def test_empty_input_exits_one(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        assert main(["heatmap", str(empty), "--out", str(tmp_path / "x.pgm")]) == 1


class TestEntryPoint:
    def test_module_invocation(self, tmp_path):
        env = dict(os.environ, PYTHONPATH=SRC)
        out = tmp_path / "gen.json"
        proc = subprocess.run(
            [sys.executable, "-m", "balanced_transport", "generate",
             "--preset", "small-example", "--out", str(out)],
            capture_output=True, text=True, env=env,
        )
        assert proc.returncode == 0
        assert out.exists()

    def test_usage_error_exits_one(self):
        assert main(["frobnicate"]) == 1
