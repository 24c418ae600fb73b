"""Command-line interface: exit codes, outputs, idempotence."""

import json
import math

import numpy as np
import pytest

from conftest import low_rip_frame_20x40
from qenvelope import InstanceSpec, VectorProblem, fourier_identity_matrix, gen_instance
from qenvelope.cli import main
from qenvelope.io import write_problem, write_vector

MAG = 2.0 * math.sqrt(2.0)


@pytest.fixture
def demo(tmp_path):
    """Noise-free seeded demo instance written to disk."""
    spec = InstanceSpec(
        kind="gaussian_normalized", m=40, n=80, card_min=5, card_max=5,
        mag_min=MAG, noise_level=0.0, seed=7,
    )
    problem, truth, _ = gen_instance(spec)
    paths = {
        "problem": tmp_path / "problem.txt",
        "truth": tmp_path / "truth.txt",
        "config": tmp_path / "solver.json",
        "out": tmp_path / "result.json",
    }
    write_problem(paths["problem"], problem)
    write_vector(paths["truth"], truth)
    paths["config"].write_text(json.dumps({"max_iter": 3000, "x_tol": 1e-12}))
    return paths


def run(*argv):
    return main([str(a) for a in argv])


class TestSolve:
    def test_demo_solve_recovers(self, demo):
        code = run(
            "solve", "--problem", demo["problem"], "--penalty", "capped:2.0:10",
            "--config", demo["config"], "--truth", demo["truth"], "--out", demo["out"],
        )
        assert code == 0
        result = json.loads(demo["out"].read_text())
        assert result["converged"]
        assert result["rel_err"] <= 1e-4

    def test_missing_file(self, demo):
        code = run(
            "solve", "--problem", demo["problem"].with_suffix(".nope"),
            "--penalty", "const:1", "--config", demo["config"], "--out", demo["out"],
        )
        assert code == 1

    def test_max_iter_exhaustion_exits_2(self, demo, tmp_path):
        cfg = tmp_path / "tiny.json"
        cfg.write_text(json.dumps({"max_iter": 1, "x_tol": 1e-14}))
        code = run(
            "solve", "--problem", demo["problem"], "--penalty", "capped:2.0:10",
            "--config", cfg, "--out", demo["out"],
        )
        assert code == 2

    def test_idempotent_rerun(self, demo, tmp_path):
        trace = tmp_path / "trace.csv"
        args = (
            "solve", "--problem", demo["problem"], "--penalty", "capped:2.0:10",
            "--config", demo["config"], "--out", demo["out"], "--trace-out", trace,
        )
        assert run(*args) == 0
        first = demo["out"].read_bytes(), trace.read_bytes()
        assert run(*args) == 0
        assert (demo["out"].read_bytes(), trace.read_bytes()) == first

    def test_malformed_penalty_spec(self, demo):
        code = run(
            "solve", "--problem", demo["problem"], "--penalty", "garbage",
            "--config", demo["config"], "--out", demo["out"],
        )
        assert code == 1


class TestCertify:
    def test_theorem1_noise_free_holds(self, demo, capsys):
        code = run(
            "certify", "--problem", demo["problem"], "--point", demo["truth"],
            "--penalty", "capped:2.0:10", "--theorem", "1",
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "holds: yes" in out and "noise_bound" in out

    def test_theorem3_delta_out_of_range(self, demo):
        code = run(
            "certify", "--problem", demo["problem"], "--point", demo["truth"],
            "--penalty", "capped:2.0:10", "--theorem", "3",
            "--delta-k", "0.1", "--delta-2k", "0.6",
        )
        assert code == 1

    def test_theorem2_requires_delta_or_bruteforce(self, demo):
        code = run(
            "certify", "--problem", demo["problem"], "--point", demo["truth"],
            "--penalty", "capped:2.0:10", "--theorem", "2",
        )
        assert code == 1

    def test_theorem2_bruteforce_on_low_rip_frame(self, tmp_path):
        A = low_rip_frame_20x40()
        y = np.zeros(40)
        y[5], y[29] = 4.0, -3.5
        problem_path = tmp_path / "frame.txt"
        point_path = tmp_path / "point.txt"
        out_path = tmp_path / "cert.json"
        write_problem(problem_path, VectorProblem(A=A, b=A @ y))
        write_vector(point_path, y)
        code = run(
            "certify", "--problem", problem_path, "--point", point_path,
            "--penalty", "capped:2.0:4", "--theorem", "2",
            "--rip-bruteforce", "--rip-budget", "100000", "--out", out_path,
        )
        assert code == 0
        cert = json.loads(out_path.read_text())
        assert cert["holds"] and cert["theorem"] == "T2"

    def test_certificate_failure_exits_2(self, demo, tmp_path):
        # noise far beyond the bound: certificate evaluates but does not hold
        spec = InstanceSpec(
            kind="gaussian_normalized", m=40, n=80, card_min=5, card_max=5,
            mag_min=MAG, noise_level=0.8, seed=7,
        )
        problem, truth, _ = gen_instance(spec)
        ppath = tmp_path / "noisy.txt"
        tpath = tmp_path / "noisy_truth.txt"
        write_problem(ppath, problem)
        write_vector(tpath, truth)
        code = run(
            "certify", "--problem", ppath, "--point", tpath,
            "--penalty", "capped:0.5:10", "--theorem", "1",
        )
        assert code == 2


class TestRipAndCoherence:
    def test_rip_exact(self, tmp_path, capsys):
        write_problem(tmp_path / "p.txt", VectorProblem(A=np.eye(5), b=np.zeros(5)))
        code = run("rip", "--problem", tmp_path / "p.txt", "--r", "2", "--budget", "100")
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["exact"] and payload["delta"] == pytest.approx(0.0, abs=1e-12)

    def test_rip_budget_exceeded_exits_3(self, tmp_path):
        write_problem(tmp_path / "p.txt", VectorProblem(A=np.eye(30), b=np.zeros(30)))
        code = run(
            "rip", "--problem", tmp_path / "p.txt", "--r", "6", "--budget", "10",
            "--mode", "exact",
        )
        assert code == 3

    def test_coherence_fourier(self, tmp_path, capsys):
        A = fourier_identity_matrix(100)
        write_problem(
            tmp_path / "fi.txt", VectorProblem(A=A, b=np.zeros(200), realified=True)
        )
        code = run("coherence", "--problem", tmp_path / "fi.txt")
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["mutual_coherence"] == pytest.approx(0.1, abs=1e-12)


class TestBench:
    def test_localmin_counts(self, tmp_path):
        config = {
            "seed": 101,
            "n_points": 4,
            "instance": {
                "kind": "gaussian_normalized", "m": 100, "n": 200, "card_min": 9,
                "card_max": 14, "mag_min": MAG, "noise_level": 0.15,
            },
            "methods": [
                {"name": "envelope_const", "kind": "envelope", "family": "constant",
                 "mu": 2.0},
                {"name": "envelope_capped", "kind": "envelope", "family": "capped",
                 "mu": 2.0, "kmax": 16},
            ],
            "solver": {"max_iter": 300},
            "out": str(tmp_path / "localmin.csv"),
        }
        cfg_path = tmp_path / "localmin.json"
        cfg_path.write_text(json.dumps(config))
        assert run("bench", "--experiment", "localmin", "--config", cfg_path) == 0
        lines = (tmp_path / "localmin.csv").read_text().splitlines()
        assert lines[0] == "method,detected,trials"
        counts = {row.split(",")[0]: int(row.split(",")[1]) for row in lines[1:]}
        assert counts["envelope_const"] == 4
        assert counts["envelope_capped"] == 0

    def test_robustness_row_count(self, tmp_path):
        config = {
            "seed": 5,
            "trials": 1,
            "levels": [0.0, 0.05, 0.1],
            "instance": {
                "kind": "gaussian_normalized", "m": 30, "n": 60, "card_min": 4,
                "card_max": 4, "mag_min": MAG,
            },
            "methods": [
                {"name": "envelope_capped", "kind": "envelope", "family": "capped",
                 "mu": 2.0, "kmax": 8},
                {"name": "lasso", "kind": "l1", "grid": [0.1, 0.5]},
            ],
            "solver": {"max_iter": 1500},
            "out": str(tmp_path / "rob.csv"),
        }
        cfg_path = tmp_path / "rob.json"
        cfg_path.write_text(json.dumps(config))
        assert run("bench", "--experiment", "robustness", "--config", cfg_path) == 0
        lines = (tmp_path / "rob.csv").read_text().splitlines()
        assert len(lines) == 1 + 3 * 2  # header + levels x methods

    def test_unknown_experiment_exits_1(self, tmp_path):
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text("{}")
        with pytest.raises(SystemExit) as exc:
            run("bench", "--experiment", "nope", "--config", cfg_path)
        assert exc.value.code == 1

    def test_config_missing_out_exits_1(self, tmp_path):
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(json.dumps({"seed": 1}))
        assert run("bench", "--experiment", "matrix", "--config", cfg_path) == 1


class TestHelp:
    @pytest.mark.parametrize(
        "cmd", [[], ["solve"], ["certify"], ["rip"], ["coherence"], ["bench"]]
    )
    def test_help_exits_zero(self, cmd):
        with pytest.raises(SystemExit) as exc:
            run(*cmd, "--help")
        assert exc.value.code == 0


class TestCertifyExplicitDeltas:
    def test_theorem3_noise_free_holds(self, demo):
        code = run(
            "certify", "--problem", demo["problem"], "--point", demo["truth"],
            "--penalty", "capped:2.0:10", "--theorem", "3",
            "--delta-k", "0.1", "--delta-2k", "0.1",
        )
        assert code == 0

    def test_theorem2_explicit_delta(self, tmp_path):
        A = low_rip_frame_20x40()
        y = np.zeros(40)
        y[3], y[21] = 4.2, -3.6
        write_problem(tmp_path / "p.txt", VectorProblem(A=A, b=A @ y))
        write_vector(tmp_path / "y.txt", y)
        code = run(
            "certify", "--problem", tmp_path / "p.txt", "--point", tmp_path / "y.txt",
            "--penalty", "capped:2.0:4", "--theorem", "2",
            "--delta-r", "0.4472135954999579",
        )
        assert code == 0


class TestRipSampleMode:
    def test_sampled_lower_bound(self, tmp_path, capsys):
        rng = np.random.default_rng(1)
        A = rng.standard_normal((10, 30))
        A /= np.linalg.norm(A, axis=0)
        write_problem(tmp_path / "p.txt", VectorProblem(A=A, b=np.zeros(10)))
        code = run(
            "rip", "--problem", tmp_path / "p.txt", "--r", "3", "--budget", "50",
            "--mode", "sample", "--seed", "4",
        )
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert not payload["exact"]
        assert payload["delta"] >= 0.0
