import math

import numpy as np
import pytest

from coreg import _kernels
from coreg.backend import kernel_source
from coreg.linalg import (DimensionError, NumericalError,
                          SingularEquationError, eigenvalues,
                          exp_convolution, format_matrix, kron, mat_exp,
                          max_abs, parse_matrix, sigma_max,
                          solve_discrete_sylvester, solve_sylvester,
                          spectral_radius)
from helpers import (kron_index_oracle, match_complex, match_moduli,
                     power_iteration_sigma, simpson_convolution, taylor_expm)

A41 = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-1.0, 2.0, 3.0]])
B41 = np.array([[0.0], [0.0], [1.0]])
P41 = np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 1.0]])
S41 = np.array([[0.0, -2.0], [2.0, 0.0]])
H41 = np.array([[2.0, -1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0],
                [0.0, -1.0, 1.0, 0.0],
                [-1.0, -1.0, -1.0, 3.0]])


class TestMatExp:
    def test_zero_matrix(self):
        assert np.allclose(mat_exp(np.zeros((3, 3)), 7.3), np.eye(3),
                           atol=1e-14)

    def test_rotation_closed_form(self):
        e = mat_exp(S41, 0.1)
        th = 0.2
        expected = np.array([[math.cos(th), -math.sin(th)],
                             [math.sin(th), math.cos(th)]])
        assert np.abs(e - expected).max() < 1e-13

    def test_against_taylor_series(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            a = rng.standard_normal((3, 3))
            a *= 2.0 / max(1.0, np.abs(a).sum(axis=0).max())
            assert np.abs(mat_exp(a, 1.0) - taylor_expm(a, 1.0, 40)).max() \
                < 1e-10

    def test_semigroup(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            a = rng.standard_normal((4, 4))
            a *= 2.0 / max(1.0, np.abs(a).sum(axis=0).max())
            s, t = rng.uniform(0.0, 1.0, size=2)
            lhs = mat_exp(a, s + t)
            rhs = mat_exp(a, s) @ mat_exp(a, t)
            assert np.abs(lhs - rhs).max() < 1e-9

    def test_large_norm_scaling(self):
        rng = np.random.default_rng(9)
        a = rng.standard_normal((5, 5))
        a *= 40.0 / np.abs(a).sum(axis=0).max()
        half = mat_exp(a, 0.5)
        assert np.abs(mat_exp(a, 1.0) - half @ half).max() \
            < 1e-9 * max_abs(mat_exp(a, 1.0))

    def test_rejects_non_square(self):
        with pytest.raises(DimensionError):
            mat_exp(np.zeros((2, 3)), 1.0)

    def test_rejects_negative_time(self):
        with pytest.raises(ValueError):
            mat_exp(np.eye(2), -0.5)

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            mat_exp(np.array([[np.nan, 0.0], [0.0, 1.0]]), 1.0)


class TestExpConvolution:
    def test_constant_integrand(self):
        out = exp_convolution(np.zeros((2, 2)), np.eye(2), np.zeros((2, 2)),
                              0.5)
        assert np.allclose(out, 0.5 * np.eye(2), atol=1e-14)

    def test_exosystem_coupling_vs_quadrature(self):
        out = exp_convolution(A41, P41, S41, 0.1)
        oracle = simpson_convolution(A41, P41, S41, 0.1, panels=10_000)
        assert np.abs(out - oracle).max() < 1e-8

    def test_input_matrix_vs_quadrature(self):
        out = exp_convolution(A41, B41, np.zeros((1, 1)), 0.1)
        oracle = simpson_convolution(A41, B41, np.zeros((1, 1)), 0.1,
                                     panels=10_000)
        assert np.abs(out - oracle).max() < 1e-8

    def test_random_triples_vs_quadrature(self):
        rng = np.random.default_rng(10)
        for _ in range(8):
            n = int(rng.integers(1, 4))
            s_dim = int(rng.integers(1, 3))
            f = rng.standard_normal((n, n))
            f *= 2.0 / max(1.0, np.abs(f).sum(axis=0).max())
            s = rng.standard_normal((s_dim, s_dim))
            s *= 2.0 / max(1.0, np.abs(s).sum(axis=0).max())
            g = rng.standard_normal((n, s_dim))
            h = float(rng.uniform(0.1, 1.0))
            out = exp_convolution(f, g, s, h)
            oracle = simpson_convolution(f, g, s, h, panels=2000)
            assert np.abs(out - oracle).max() < 1e-8

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            exp_convolution(np.eye(2), np.eye(3), np.eye(3), 0.1)

    def test_rejects_nonpositive_h(self):
        with pytest.raises(ValueError):
            exp_convolution(np.eye(2), np.eye(2), np.eye(2), 0.0)


class TestEigenvalues:
    def test_skew_symmetric_pair(self):
        spec = eigenvalues(np.array([[0.0, -2.0], [2.0, 0.0]]))
        assert match_complex(spec.values, [2j, -2j]) < 1e-12

    def test_h_matrix_spectrum(self):
        # characteristic polynomial factors as (3-l)(2-l)(1-l)^2
        spec = eigenvalues(H41)
        assert match_complex(spec.values, [3.0, 2.0, 1.0, 1.0]) < 1e-8

    def test_kron_spectrum_is_pairwise_products(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            a = rng.standard_normal((2, 2))
            b = rng.standard_normal((2, 2))
            ea = eigenvalues(a).values
            eb = eigenvalues(b).values
            products = [la * lb for la in ea for lb in eb]
            assert match_moduli(eigenvalues(kron(a, b)).values, products) \
                < 1e-8

    def test_against_lapack(self):
        rng = np.random.default_rng(12)
        for _ in range(60):
            n = int(rng.integers(1, 9))
            a = rng.standard_normal((n, n))
            mine = eigenvalues(a).values
            ref = np.linalg.eigvals(a)
            assert match_complex(mine, ref) < 1e-7

    def test_moduli_consistent(self):
        spec = eigenvalues(H41)
        assert np.array_equal(spec.moduli, np.abs(spec.values))
        assert spec.moduli[0] == spec.radius

    def test_sorted_by_descending_modulus(self):
        spec = eigenvalues(H41)
        assert list(spec.moduli) == sorted(spec.moduli, reverse=True)

    def test_iteration_cap_reports_residual(self):
        rng = np.random.default_rng(13)
        a = rng.standard_normal((6, 6))
        re, im, ok, resid = _kernels.eig_qr(a, 1, 1e-15)
        assert ok == 0 and resid > 0.0

    def test_nonconvergence_raises(self, monkeypatch):
        import coreg.linalg as la
        monkeypatch.setattr(la, "EIG_MAX_ITER_FACTOR", 0)
        rng = np.random.default_rng(14)
        with pytest.raises(NumericalError):
            la.eigenvalues(rng.standard_normal((6, 6)))


class TestSpectralRadius:
    def test_identity(self):
        assert spectral_radius(np.eye(4)) == 1.0

    def test_consensus_block(self):
        m = kron(np.eye(4) - 0.1 * H41, mat_exp(S41, 0.1))
        assert abs(spectral_radius(m) - 0.9) < 1e-6

    def test_kron_scaled_rotation(self):
        rot = mat_exp(np.array([[0.0, -1.0], [1.0, 0.0]]), 0.7)
        assert abs(spectral_radius(kron(0.5 * np.eye(2), rot)) - 0.5) < 1e-9

    def test_multiplicative_under_kron(self):
        rng = np.random.default_rng(15)
        for _ in range(10):
            a = rng.standard_normal((3, 3))
            b = rng.standard_normal((2, 2))
            lhs = spectral_radius(kron(a, b))
            rhs = spectral_radius(a) * spectral_radius(b)
            assert abs(lhs - rhs) < 1e-9 * max(1.0, rhs)


class TestSigmaMax:
    def test_identity(self):
        assert abs(sigma_max(np.eye(3)) - 1.0) < 1e-12

    def test_diagonal(self):
        assert abs(sigma_max(np.diag([1.0, -4.0])) - 4.0) < 1e-12

    def test_h_matrix_vs_power_iteration(self):
        assert abs(sigma_max(H41) - power_iteration_sigma(H41)) < 1e-8

    def test_rectangular(self):
        rng = np.random.default_rng(16)
        a = rng.standard_normal((4, 2))
        assert abs(sigma_max(a) - power_iteration_sigma(a)) < 1e-8


class TestKron:
    def test_identity_left(self):
        rng = np.random.default_rng(17)
        b = rng.standard_normal((2, 3))
        out = kron(np.eye(2), b)
        expected = np.zeros((4, 6))
        expected[:2, :3] = b
        expected[2:, 3:] = b
        assert np.array_equal(out, expected)

    def test_identity_scalar_right(self):
        rng = np.random.default_rng(18)
        a = rng.standard_normal((3, 2))
        assert np.array_equal(kron(a, np.eye(1)), a)

    def test_index_formula(self):
        rng = np.random.default_rng(19)
        a = rng.standard_normal((2, 2))
        b = rng.standard_normal((2, 2))
        assert np.array_equal(kron(a, b), kron_index_oracle(a, b))


class TestSolveSylvester:
    def test_zero_s_reduces_to_linear_solve(self):
        rng = np.random.default_rng(20)
        a = rng.standard_normal((3, 3)) - 3.0 * np.eye(3)  # comfortably Hurwitz
        p = rng.standard_normal((3, 2))
        pi = solve_sylvester(a, np.zeros((2, 2)), p)
        assert np.abs(pi - (-np.linalg.solve(a, p))).max() < 1e-10

    def test_tracking_example_closed_form(self):
        # hand elimination of Pi S = A Pi + P for the bundled example gives
        # Pi = [[12, 13], [26, -24], [-48, -52]] / 313
        pi = solve_sylvester(A41, S41, P41)
        expected = np.array([[12.0, 13.0], [26.0, -24.0],
                             [-48.0, -52.0]]) / 313.0
        assert np.abs(pi - expected).max() < 1e-12

    def test_residual_bound_random(self):
        rng = np.random.default_rng(21)
        for _ in range(10):
            a = rng.standard_normal((3, 3)) - 2.0 * np.eye(3)
            s = np.array([[0.0, -1.3], [1.3, 0.0]])
            p = rng.standard_normal((3, 2))
            pi = solve_sylvester(a, s, p)
            resid = max_abs(pi @ s - a @ pi - p)
            assert resid <= 1e-10 * (1.0 + max_abs(p))

    def test_uniqueness_perturbation_raises_residual(self):
        rng = np.random.default_rng(22)
        a = rng.standard_normal((3, 3)) - 2.0 * np.eye(3)
        s = np.array([[0.0, -1.3], [1.3, 0.0]])
        p = rng.standard_normal((3, 2))
        pi = solve_sylvester(a, s, p)
        bound = 1e-10 * (1.0 + max_abs(p))
        for i in range(3):
            for j in range(2):
                bad = pi.copy()
                bad[i, j] += 1e-3
                assert max_abs(bad @ s - a @ bad - p) > bound

    def test_shared_eigenvalue_rejected(self):
        with pytest.raises(SingularEquationError):
            solve_sylvester(np.diag([1.0, 2.0]), np.array([[1.0]]),
                            np.ones((2, 1)))


class TestSolveDiscreteSylvester:
    def test_zero_m_identity_j(self):
        rng = np.random.default_rng(23)
        n = rng.standard_normal((2, 2))
        x = solve_discrete_sylvester(np.zeros((2, 2)), np.eye(2), n)
        assert np.abs(x - n).max() < 1e-12

    def test_scalar_equation(self):
        x = solve_discrete_sylvester(0.5 * np.eye(2), 2.0 * np.eye(2),
                                     np.eye(2))
        assert np.abs(x - (2.0 / 3.0) * np.eye(2)).max() < 1e-12

    def test_residual_with_rotation_block(self):
        rng = np.random.default_rng(24)
        for _ in range(10):
            m = rng.standard_normal((3, 3))
            m *= 0.8 / spectral_radius(m)  # Schur-stable
            j = mat_exp(S41, 0.1)  # unit-modulus spectrum
            n = rng.standard_normal((3, 2))
            x = solve_discrete_sylvester(m, j, n)
            assert max_abs(m @ x - x @ j + n) <= 1e-10 * (1.0 + max_abs(n))

    def test_overlap_names_pair(self):
        with pytest.raises(SingularEquationError) as exc:
            solve_discrete_sylvester(np.eye(2), np.eye(2), np.ones((2, 2)))
        assert "eigenvalue pair" in str(exc.value)


class TestMatrixText:
    def test_parse_example(self):
        a = parse_matrix("0,1,0; 0,0,1; -1,2,3")
        assert np.array_equal(a, A41)

    def test_round_trip_exact(self):
        rng = np.random.default_rng(25)
        a = rng.standard_normal((3, 4)) * np.pi
        assert np.array_equal(parse_matrix(format_matrix(a)), a)

    def test_ragged_rows_rejected(self):
        with pytest.raises(ValueError):
            parse_matrix("1,2; 3")

    def test_non_numeric_rejected(self):
        with pytest.raises(ValueError):
            parse_matrix("1,x; 2,3")

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            parse_matrix("   ")


class TestBackendParity:
    def test_compiled_matches_source(self):
        rng = np.random.default_rng(26)
        a = rng.standard_normal((5, 5))
        b = rng.standard_normal((5, 2))
        src = kernel_source(_kernels.expm)
        assert np.abs(_kernels.expm(a) - src(a)).max() < 1e-12
        x_c, _ = _kernels.lu_solve(a, b)
        x_p, _ = kernel_source(_kernels.lu_solve)(a, b)
        assert np.abs(x_c - x_p).max() < 1e-12
        re_c, im_c, ok_c, _ = _kernels.eig_qr(a, 500, 1e-15)
        re_p, im_p, ok_p, _ = kernel_source(_kernels.eig_qr)(a, 500, 1e-15)
        assert ok_c == ok_p == 1
        assert match_complex(re_c + 1j * im_c, re_p + 1j * im_p) < 1e-10
