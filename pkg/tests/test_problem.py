import json
import math

import numpy as np
import pytest
import scipy.linalg

import nmesolve as nme
from helpers import match_distance, scalar_x_plus
from nmesolve.exceptions import (
    DimensionMismatch,
    NotPositiveDefinite,
    NotSymmetric,
    OddDimension,
    ProblemFileError,
    ZeroLambda,
)


class TestNewProblem:
    def test_zero_a(self):
        p = nme.new_problem([[0.0]], [[1.0]])
        assert p.n == 1
        assert p.A[0, 0] == 0.0

    def test_critical_scalar(self):
        p = nme.new_problem([[1.0]], [[2.0]])
        assert p.Q[0, 0] == 2.0

    def test_negative_q_rejected(self):
        with pytest.raises(NotPositiveDefinite):
            nme.new_problem([[1.0]], [[-1.0]])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            nme.new_problem(np.eye(2), np.eye(3))
        with pytest.raises(DimensionMismatch):
            nme.new_problem(np.ones((2, 3)), np.eye(2))

    def test_gross_asymmetry_rejected(self):
        Q = np.array([[2.0, 0.5], [0.0, 2.0]])
        with pytest.raises(NotSymmetric):
            nme.new_problem(np.zeros((2, 2)), Q)

    def test_tiny_asymmetry_symmetrized(self):
        Q = np.array([[2.0, 1e-14], [0.0, 2.0]])
        p = nme.new_problem(np.zeros((2, 2)), Q)
        assert np.array_equal(p.Q, p.Q.T)


class TestResidual:
    def test_zero_a_solution(self):
        p = nme.new_problem(np.zeros((2, 2)), np.eye(2))
        r = nme.residual(p, np.eye(2))
        assert r.fro_norm == 0.0
        assert r.rel_norm == 0.0

    def test_critical_solution(self):
        p = nme.new_problem([[1.0]], [[2.0]])
        r = nme.residual(p, [[1.0]])
        assert abs(r.fro_norm) <= 1e-15

    def test_scalar_value(self):
        # q - x - a^2/x = 2 - 2 - 0.5 = -0.5
        p = nme.new_problem([[1.0]], [[2.0]])
        r = nme.residual(p, [[2.0]])
        assert r.matrix[0, 0] == pytest.approx(-0.5, abs=1e-15)
        assert r.fro_norm == pytest.approx(0.5, abs=1e-15)
        assert r.rel_norm == pytest.approx(0.25, abs=1e-15)

    def test_requires_spd(self):
        p = nme.new_problem([[1.0]], [[2.0]])
        with pytest.raises(NotPositiveDefinite):
            nme.residual(p, [[-1.0]])


class TestBuildPencil:
    def test_scalar_blocks(self):
        pen = nme.build_pencil(nme.new_problem([[1.0]], [[2.0]]))
        assert np.array_equal(pen.M.real, [[1.0, 0.0], [2.0, -1.0]])
        assert np.array_equal(pen.L.real, [[0.0, 1.0], [1.0, 0.0]])
        assert pen.form is nme.PencilForm.SSF2

    def test_zero_a_blocks(self):
        pen = nme.build_pencil(nme.new_problem([[0.0]], [[1.0]]))
        assert np.array_equal(pen.M.real, [[0.0, 0.0], [1.0, -1.0]])
        assert np.array_equal(pen.L.real, [[0.0, 1.0], [0.0, 0.0]])

    @pytest.mark.parametrize("seed,n,rho", [(0, 2, 0.4), (1, 5, 0.9), (2, 8, 1.0)])
    def test_always_symplectic(self, seed, n, rho):
        rec = nme.generate_problem(nme.GeneratorSpec(n=n, rho_target=rho, seed=seed))
        pen = nme.build_pencil(rec.problem)
        assert nme.is_symplectic_pencil(pen, tol=1e-13)

    def test_ssf2_blocks_roundtrip(self):
        rec = nme.generate_problem(nme.GeneratorSpec(n=3, rho_target=0.5, seed=11))
        A, Q, P = nme.ssf2_blocks(nme.build_pencil(rec.problem))
        assert np.allclose(A, rec.problem.A)
        assert np.allclose(Q, rec.problem.Q)
        assert np.allclose(P, 0.0)


class TestIsSymplecticPencil:
    def test_scalar_pencil_true(self):
        assert nme.is_symplectic_pencil(nme.build_pencil(nme.new_problem([[1.0]], [[2.0]])))

    def test_mismatched_factors_false(self):
        pen = nme.SymplecticPencil(M=np.eye(2, dtype=complex),
                                   L=np.diag([1.0, 2.0]).astype(complex))
        assert not nme.is_symplectic_pencil(pen, tol=1e-13)

    def test_identity_pair_true(self):
        pen = nme.SymplecticPencil(M=np.eye(2, dtype=complex), L=np.eye(2, dtype=complex))
        assert nme.is_symplectic_pencil(pen)

    def test_odd_dimension(self):
        pen = nme.SymplecticPencil(M=np.eye(3, dtype=complex), L=np.eye(3, dtype=complex))
        with pytest.raises(OddDimension):
            nme.is_symplectic_pencil(pen)


class TestPsi:
    def test_scalar_on_circle(self):
        p = nme.new_problem([[1.0]], [[2.0]])
        for theta in np.linspace(0.0, 2 * math.pi, 17):
            lam = complex(math.cos(theta), math.sin(theta))
            val = nme.psi(p, lam)[0, 0]
            assert val == pytest.approx(2 * math.cos(theta) + 2.0, abs=1e-14)

    def test_zero_a(self):
        p = nme.new_problem(np.zeros((2, 2)), np.diag([1.0, 3.0]))
        assert np.allclose(nme.psi(p, 0.7 + 0.2j), p.Q)

    def test_boundary_value(self):
        p = nme.new_problem([[1.0]], [[2.0]])
        assert abs(nme.psi(p, -1.0)[0, 0]) <= 1e-15

    def test_zero_lambda(self):
        with pytest.raises(ZeroLambda):
            nme.psi(nme.new_problem([[1.0]], [[2.0]]), 0.0)

    def test_hermitian_on_circle(self):
        rec = nme.generate_problem(nme.GeneratorSpec(n=4, rho_target=0.7, seed=3))
        for theta in (0.3, 1.1, 2.9):
            H = nme.psi(rec.problem, complex(math.cos(theta), math.sin(theta)))
            asym = np.linalg.norm(H - H.conj().T)
            assert asym <= 1e-13 * np.linalg.norm(H)


class TestSolvabilityCheck:
    def test_critical_case_solvable(self):
        v = nme.solvability_check(nme.new_problem([[1.0]], [[2.0]]), samples=512)
        assert v.verdict is nme.Verdict.SOLVABLE
        assert v.min_eig_on_circle == pytest.approx(0.0, abs=1e-14)
        assert v.regular

    def test_unsolvable(self):
        v = nme.solvability_check(nme.new_problem([[1.0]], [[1.0]]))
        assert v.verdict is nme.Verdict.NOT_SOLVABLE
        assert v.min_eig_on_circle == pytest.approx(-1.0, abs=1e-12)

    def test_zero_a_solvable(self):
        v = nme.solvability_check(nme.new_problem(np.zeros((2, 2)), np.eye(2)))
        assert v.verdict is nme.Verdict.SOLVABLE

    def test_sample_floor(self):
        with pytest.raises(ValueError):
            nme.solvability_check(nme.new_problem([[1.0]], [[2.0]]), samples=4)

    @pytest.mark.parametrize("seed,rho", [(4, 0.3), (5, 1.0)])
    def test_generated_problems_solvable(self, seed, rho):
        rec = nme.generate_problem(nme.GeneratorSpec(n=4, rho_target=rho, seed=seed))
        assert nme.solvability_check(rec.problem).verdict is nme.Verdict.SOLVABLE


class TestSpectralRadiusRatio:
    def test_critical(self):
        p = nme.new_problem([[1.0]], [[2.0]])
        assert nme.spectral_radius_ratio(p, [[1.0]]) == pytest.approx(1.0, abs=1e-14)

    def test_zero_a(self):
        p = nme.new_problem(np.zeros((3, 3)), np.eye(3))
        assert nme.spectral_radius_ratio(p, 2 * np.eye(3)) == 0.0

    def test_shifted_scalar(self):
        r = 0.9
        p = nme.new_problem([[1.0]], [[r + 1.0 / r]])
        assert nme.spectral_radius_ratio(p, [[1.0 / r]]) == pytest.approx(r, abs=1e-13)


class TestInvariantSubspaceDefect:
    def test_critical_solution(self):
        p = nme.new_problem([[1.0]], [[2.0]])
        assert nme.invariant_subspace_defect(p, [[1.0]]) <= 1e-14

    def test_zero_a(self):
        Q = np.diag([2.0, 5.0])
        p = nme.new_problem(np.zeros((2, 2)), Q)
        assert nme.invariant_subspace_defect(p, Q) <= 1e-14

    def test_scalar_nonsolution(self):
        # block expansion leaves exactly |q - x - a^2/x| = 0.5
        p = nme.new_problem([[1.0]], [[2.0]])
        assert nme.invariant_subspace_defect(p, [[2.0]]) == pytest.approx(0.5, abs=1e-14)

    def test_matches_residual_vanishing(self):
        rng = np.random.default_rng(9)
        rec = nme.generate_problem(nme.GeneratorSpec(n=4, rho_target=0.6, seed=9))
        p = rec.problem
        tol = 1e-12 * np.linalg.norm(p.Q)
        # the planted solution zeroes both diagnostics
        assert nme.residual(p, rec.known_solution).fro_norm <= tol
        assert nme.invariant_subspace_defect(p, rec.known_solution) <= tol
        # random SPD non-solutions zero neither
        for _ in range(5):
            W = rng.standard_normal((4, 4))
            X = W @ W.T + np.eye(4)
            assert nme.residual(p, X).fro_norm > tol
            assert nme.invariant_subspace_defect(p, X) > tol


class TestReciprocalSpectrum:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_pairing(self, seed):
        rec = nme.generate_problem(nme.GeneratorSpec(n=3, rho_target=0.6, seed=seed))
        pen = nme.build_pencil(rec.problem)
        eigs = scipy.linalg.eigvals(pen.M, pen.L)
        finite = np.array([w for w in eigs if np.isfinite(w) and 1e-6 < abs(w) < 1e6])
        # lambda and 1/lambda both occur, matched as multisets
        recip = 1.0 / finite
        assert match_distance(finite, recip) <= 1e-8 * max(1.0, np.max(np.abs(finite)))


class TestProblemFiles:
    def test_round_trip(self, tmp_path):
        rec = nme.generate_problem(nme.GeneratorSpec(n=3, rho_target=0.4, seed=2))
        path = tmp_path / "p.json"
        nme.save_problem(rec.problem, path)
        loaded = nme.load_problem(path)
        assert np.array_equal(loaded.A, rec.problem.A)
        assert np.array_equal(loaded.Q, rec.problem.Q)

    def test_rejects_nan(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"n": 1, "A": [float("nan")], "Q": [1.0]}))
        with pytest.raises(ProblemFileError):
            nme.load_problem(path)

    def test_rejects_bad_shape(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"n": 2, "A": [1.0, 2.0], "Q": [1.0, 0.0, 0.0, 1.0]}))
        with pytest.raises(ProblemFileError):
            nme.load_problem(path)

    def test_rejects_missing_key(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"n": 1, "A": [0.0]}))
        with pytest.raises(ProblemFileError):
            nme.load_problem(path)

    def test_oracle_solution_survives_round_trip(self, tmp_path):
        a, q = 0.5, 2.0
        path = tmp_path / "p.json"
        nme.save_problem(nme.new_problem([[a]], [[q]]), path)
        p = nme.load_problem(path)
        x = scalar_x_plus(a, q)
        assert nme.residual(p, [[x]]).rel_norm <= 1e-15
