"""Forward-backward solver, objectives, stationarity and file round trips."""

import math

import numpy as np
import pytest

from qenvelope import (
    InstanceSpec,
    L1Penalty,
    MatrixProblem,
    PenaltySequence,
    QuadraticEnvelope,
    SolverConfig,
    VectorProblem,
    fbs_solve,
    fbs_solve_matrix,
    gen_instance,
    objective_value,
    operator_norm,
    relative_error,
    stationarity_residual,
)
from qenvelope.errors import DimensionMismatchError, StepTooLargeError
from qenvelope.io import read_problem, read_vector, write_problem, write_vector

MAG = 2.0 * math.sqrt(2.0)


class TestObjective:
    def test_zero_point_gives_data_energy(self):
        problem = VectorProblem(A=np.eye(2), b=np.array([1.0, 2.0]))
        reg = QuadraticEnvelope(PenaltySequence.constant(1.0, 2))
        assert objective_value(problem, reg, np.zeros(2)) == pytest.approx(5.0)

    def test_envelope_plus_residual(self):
        problem = VectorProblem(A=0.5 * np.eye(2), b=np.zeros(2))
        reg = QuadraticEnvelope(PenaltySequence.constant(1.0, 2))
        assert objective_value(problem, reg, np.array([2.0, 0.0])) == pytest.approx(2.0)

    def test_baseline_zero_residual(self):
        x = np.array([1.5, -2.0, 0.0])
        problem = VectorProblem(A=np.eye(3), b=x)
        assert objective_value(problem, L1Penalty(1.0), x) == pytest.approx(3.5)

    def test_dimension_mismatch(self):
        problem = VectorProblem(A=np.eye(2), b=np.zeros(2))
        with pytest.raises(DimensionMismatchError):
            objective_value(problem, L1Penalty(1.0), np.zeros(3))


class TestFbsSolve:
    def test_zero_data_converges_immediately(self):
        problem = VectorProblem(A=np.eye(3), b=np.zeros(3))
        reg = QuadraticEnvelope(PenaltySequence.constant(1.0, 3))
        res = fbs_solve(problem, reg)
        assert res.iterations == 1 and res.converged
        assert np.array_equal(res.x, np.zeros(3))

    def test_one_dimensional_subthreshold_goes_to_zero(self):
        problem = VectorProblem(A=np.array([[0.5]]), b=np.array([0.3]))
        reg = QuadraticEnvelope(PenaltySequence(np.array([1.0])))
        res = fbs_solve(problem, reg)
        assert res.converged
        assert res.x[0] == pytest.approx(0.0, abs=1e-12)

    def test_noise_free_recovery_small(self):
        spec = InstanceSpec(
            kind="gaussian_normalized", m=40, n=80, card_min=5, card_max=5,
            mag_min=MAG, noise_level=0.0, seed=7,
        )
        problem, truth, _ = gen_instance(spec)
        reg = QuadraticEnvelope(PenaltySequence.capped(2.0, 10, 80))
        res = fbs_solve(problem, reg, SolverConfig(max_iter=3000, x_tol=1e-12))
        assert res.converged
        assert relative_error(res.x, truth) <= 1e-4

    def test_step_too_large(self):
        problem = VectorProblem(A=2.0 * np.eye(2), b=np.ones(2))
        reg = QuadraticEnvelope(PenaltySequence.constant(1.0, 2))
        with pytest.raises(StepTooLargeError):
            fbs_solve(problem, reg, SolverConfig(step=0.5))

    def test_envelope_step_cap(self):
        problem = VectorProblem(A=0.5 * np.eye(2), b=np.ones(2))
        reg = QuadraticEnvelope(PenaltySequence.constant(1.0, 2))
        with pytest.raises(StepTooLargeError):
            fbs_solve(problem, reg, SolverConfig(step=0.75))

    def test_baseline_allows_larger_steps(self):
        problem = VectorProblem(A=0.5 * np.eye(2), b=np.ones(2))
        res = fbs_solve(problem, L1Penalty(0.1), SolverConfig(step=1.5))
        assert res.converged

    def test_dimension_checks(self):
        problem = VectorProblem(A=np.eye(3), b=np.zeros(3))
        with pytest.raises(DimensionMismatchError):
            fbs_solve(problem, QuadraticEnvelope(PenaltySequence.constant(1.0, 2)))
        with pytest.raises(DimensionMismatchError):
            fbs_solve(
                problem,
                QuadraticEnvelope(PenaltySequence.constant(1.0, 3)),
                x0=np.zeros(2),
            )

    def test_prox_failure_is_wrapped(self):
        from qenvelope import Regularizer
        from qenvelope.errors import GapNotClosedError, ProxFailureError

        class FailingProx(Regularizer):
            def value(self, x):
                return 0.0

            def prox(self, z, rho=1.0, tol=1e-9):
                raise GapNotClosedError("forced", x=np.zeros_like(z), gap=1.0)

        problem = VectorProblem(A=np.eye(2), b=np.ones(2))
        with pytest.raises(ProxFailureError):
            fbs_solve(problem, FailingProx(), SolverConfig(max_iter=3))

    def test_max_iter_exhaustion_reported(self):
        spec = InstanceSpec(
            kind="gaussian_normalized", m=20, n=40, card_min=3, card_max=3,
            mag_min=MAG, noise_level=0.1, seed=5,
        )
        problem, _, _ = gen_instance(spec)
        reg = QuadraticEnvelope(PenaltySequence.capped(2.0, 6, 40))
        res = fbs_solve(problem, reg, SolverConfig(max_iter=1, x_tol=1e-14))
        assert not res.converged and res.iterations == 1

    @pytest.mark.parametrize("regname", ["envelope", "l1", "scad", "lp"])
    def test_descent_trace(self, rng, regname):
        from qenvelope import ScadPenalty, LpPenalty

        for seed in (11, 12):
            spec = InstanceSpec(
                kind="gaussian_normalized", m=30, n=60, card_min=4, card_max=6,
                mag_min=MAG, noise_level=0.1, seed=seed,
            )
            problem, _, _ = gen_instance(spec)
            if regname == "envelope":
                reg = QuadraticEnvelope(PenaltySequence.capped(2.0, 10, 60))
            elif regname == "l1":
                reg = L1Penalty(0.5)
            elif regname == "scad":
                reg = ScadPenalty(0.5)
            else:
                reg = LpPenalty(0.5, 0.5)
            res = fbs_solve(problem, reg, SolverConfig(max_iter=400))
            ascent = float(np.max(np.diff(res.objective_trace), initial=0.0))
            assert ascent <= 1e-12

    def test_fixed_point_implies_stationarity(self, rng):
        for seed in (21, 22, 23):
            spec = InstanceSpec(
                kind="gaussian_normalized", m=30, n=60, card_min=4, card_max=4,
                mag_min=MAG, noise_level=0.05, seed=seed,
            )
            problem, _, _ = gen_instance(spec)
            seq = PenaltySequence.capped(2.0, 8, 60)
            res = fbs_solve(
                problem, QuadraticEnvelope(seq), SolverConfig(max_iter=6000, x_tol=1e-12)
            )
            assert res.converged
            assert res.stationarity_residual <= 1e-8

    def test_capped_support_respects_cap(self, rng):
        from qenvelope import cardinality

        for seed in (31, 32):
            spec = InstanceSpec(
                kind="gaussian_normalized", m=25, n=50, card_min=3, card_max=5,
                mag_min=MAG, noise_level=0.2, seed=seed,
            )
            problem, _, _ = gen_instance(spec)
            kmax = 7
            seq = PenaltySequence.capped(2.0, kmax, 50)
            res = fbs_solve(
                problem, QuadraticEnvelope(seq), SolverConfig(max_iter=6000, x_tol=1e-12)
            )
            assert res.converged
            assert cardinality(res.x, 1e-8) <= kmax


class TestStationarityResidual:
    def test_zero_point_inside_box(self):
        problem = VectorProblem(A=np.array([[0.5]]), b=np.array([0.0]))
        seq = PenaltySequence(np.array([1.0]))
        assert stationarity_residual(problem, seq, np.zeros(1)) == 0.0

    def test_noise_free_truth_is_stationary(self):
        spec = InstanceSpec(
            kind="gaussian_normalized", m=40, n=80, card_min=5, card_max=5,
            mag_min=MAG, noise_level=0.0, seed=7,
        )
        problem, truth, _ = gen_instance(spec)
        seq = PenaltySequence.capped(2.0, 10, 80)
        assert stationarity_residual(problem, seq, truth) <= 1e-9

    def test_dense_point_not_tight(self):
        spec = InstanceSpec(
            kind="gaussian_normalized", m=20, n=40, card_min=3, card_max=3,
            mag_min=MAG, noise_level=0.0, seed=9,
        )
        problem, _, _ = gen_instance(spec)
        seq = PenaltySequence.capped(2.0, 5, 40)
        x_ls = np.linalg.lstsq(problem.A, problem.b, rcond=None)[0]
        assert stationarity_residual(problem, seq, x_ls) == math.inf


class TestMatrixSolve:
    def test_zero_data(self):
        problem = MatrixProblem(op=np.eye(9), b=np.zeros(9), rows=3, cols=3)
        reg = QuadraticEnvelope(PenaltySequence.fixed_cardinality(1, 3))
        res = fbs_solve_matrix(problem, reg)
        assert np.array_equal(res.x, np.zeros((3, 3)))

    def test_identity_operator_truncates_singular_values(self):
        target = np.diag([3.0, 2.0, 0.5])
        problem = MatrixProblem(op=np.eye(9), b=target.reshape(-1), rows=3, cols=3)
        reg = QuadraticEnvelope(PenaltySequence.fixed_cardinality(1, 3))
        res = fbs_solve_matrix(problem, reg, SolverConfig(step=0.5))
        assert np.allclose(res.x, np.diag([3.0, 0.0, 0.0]), atol=1e-10)

    def test_matrix_vector_consistency_on_diagonal_data(self):
        diag = np.array([3.0, 2.0, 0.5])
        mat = MatrixProblem(op=np.eye(9), b=np.diag(diag).reshape(-1), rows=3, cols=3)
        vec = VectorProblem(A=np.eye(3), b=diag)
        seq = PenaltySequence.capped(1.5, 2, 3)
        cfg = SolverConfig(step=0.5, max_iter=500, x_tol=1e-13)
        res_m = fbs_solve_matrix(mat, QuadraticEnvelope(seq), cfg)
        res_v = fbs_solve(vec, QuadraticEnvelope(seq), cfg)
        sv = np.linalg.svd(res_m.x, compute_uv=False)
        assert np.allclose(sv, np.sort(np.abs(res_v.x))[::-1], atol=1e-9)

    @pytest.mark.parametrize("family", ["fixed_cardinality", "capped"])
    def test_rank2_recovery(self, family):
        spec = InstanceSpec(
            kind="matrix_gaussian_op", rows=10, cols=10, p=120, card_min=2,
            card_max=2, mag_min=MAG, noise_level=0.0, seed=13,
        )
        problem, truth, _ = gen_instance(spec)
        if family == "fixed_cardinality":
            seq = PenaltySequence.fixed_cardinality(2, 10)
        else:
            seq = PenaltySequence.capped(2.0, 2, 10)
        res = fbs_solve_matrix(
            problem, QuadraticEnvelope(seq), SolverConfig(max_iter=4000, x_tol=1e-12)
        )
        assert res.converged
        err = np.linalg.norm(res.x - truth) / np.linalg.norm(truth)
        assert err <= 1e-3

    def test_svd_reconstruction_accuracy(self, rng):
        # the singular-value prox relies on a dense SVD good to 1e-10 at 100x100
        for _ in range(3):
            M = rng.standard_normal((100, 100))
            U, s, Vt = np.linalg.svd(M, full_matrices=False)
            err = np.max(np.abs((U * s) @ Vt - M)) / np.max(np.abs(M))
            assert err <= 1e-10
            assert np.max(np.abs(U.T @ U - np.eye(100))) <= 1e-12

    def test_capped_rank_respects_cap(self):
        spec = InstanceSpec(
            kind="matrix_gaussian_op", rows=8, cols=8, p=70, card_min=2,
            card_max=2, mag_min=MAG, noise_level=0.05, seed=17,
        )
        problem, _, _ = gen_instance(spec)
        reg = QuadraticEnvelope(PenaltySequence.capped(1.0, 3, 8))
        res = fbs_solve_matrix(problem, reg, SolverConfig(max_iter=4000, x_tol=1e-12))
        sv = np.linalg.svd(res.x, compute_uv=False)
        assert int(np.sum(sv > 1e-8)) <= 3


class TestOperatorNorm:
    def test_identity(self):
        assert operator_norm(np.eye(3)) == pytest.approx(1.0)

    def test_diagonal(self):
        assert operator_norm(np.diag([2.0, 1.0])) == pytest.approx(2.0)

    def test_all_ones(self):
        assert operator_norm(np.ones((2, 2))) == pytest.approx(2.0)

    def test_against_svd(self, rng):
        for _ in range(20):
            A = rng.standard_normal((int(rng.integers(2, 30)), int(rng.integers(2, 30))))
            top = float(np.linalg.svd(A, compute_uv=False)[0])
            assert operator_norm(A) == pytest.approx(top, rel=1e-8)


class TestProblemFiles:
    def test_roundtrip(self, tmp_path):
        problem = VectorProblem(
            A=np.array([[1.0, 2.5], [-0.25, 4.0], [0.0, 1e-17]]),
            b=np.array([1.0, -2.0, 3.5]),
        )
        path = tmp_path / "problem.txt"
        write_problem(path, problem)
        back = read_problem(path)
        assert np.array_equal(back.A, problem.A)
        assert np.array_equal(back.b, problem.b)
        assert back.realified == problem.realified

    def test_vector_roundtrip(self, tmp_path):
        v = np.array([1.0, -2.0, 1e-300])
        path = tmp_path / "v.txt"
        write_vector(path, v)
        assert np.array_equal(read_vector(path), v)

    def test_malformed_counts(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text('{"m": 2, "n": 2, "realified": false}\n1 2 3\n')
        with pytest.raises(ValueError):
            read_problem(path)
