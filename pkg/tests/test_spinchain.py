import cmath
import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate

from sovchain.cgamma import abs_gamma_sq, gamma
from sovchain.errors import DomainError
from sovchain.measures import ChainConfig
from sovchain.quad import QuadSpec, cauchy_derivatives
from sovchain.spinchain import (EigenfunctionQuery, eigen_residual, lambda_factor, monodromy_apply,
                                monodromy_operator, norm_const, overlap_AA_closed, overlap_AA_direct,
                                overlap_B_AxA_closed, overlap_B_AxA_direct, overlap_BA_closed, overlap_BA_direct,
                                overlap_BB_closed, overlap_BB_direct, overlap_UpsilonPhi_closed,
                                overlap_UpsilonPhi_direct, phi_eval, phi_values, propagator_D, psi_eval,
                                psi_momentum_kernel, psi_values, reproduce_direct, reproducing_kernel, upsilon_values)

C2 = ChainConfig([1.0, 0.8], [0.1, -0.2])
C3 = ChainConfig([1.0, 0.8, 1.2], [0.1, -0.2, 0.05])


def rel(a, b):
    return abs(a - b) / abs(b)


def random_upper(rng, shape, lo=0.5, hi=1.5):
    return rng.uniform(-1, 1, shape) + 1j * rng.uniform(lo, hi, shape)


class TestPropagator:
    def test_value(self):
        assert propagator_D(2, 1j, 1j) == pytest.approx(0.25, abs=1e-15)

    def test_fourier_representation(self):
        alpha, z, w = 1 + 1j, 2j, 1j
        zeta = z - np.conj(w)

        def part(f):
            return sp_integrate.quad(lambda p: f(cmath.exp(1j * p * zeta) * p ** (alpha - 1)), 0, 60,
                                     limit=400, epsabs=1e-13)[0]

        oracle = (part(lambda v: v.real) + 1j * part(lambda v: v.imag)) / complex(gamma(alpha))
        assert abs(propagator_D(alpha, z, w) - oracle) <= 1e-8 * abs(oracle)

    def test_branch_base_in_right_half_plane(self):
        rng = np.random.default_rng(1)
        z = rng.uniform(-5, 5, 10_000) + 1j * rng.uniform(1e-6, 3, 10_000)
        w = rng.uniform(-5, 5, 10_000) + 1j * rng.uniform(1e-6, 3, 10_000)
        base = 1j / (z - np.conj(w))
        assert np.all(base.real > 0)
        # principal powers then agree with the exponential of alpha * log
        vals = propagator_D(0.5, z, w)
        assert np.allclose(vals * vals, base, rtol=1e-12)

    def test_near_real_axis(self):
        rng = np.random.default_rng(2)
        w = random_upper(rng, 1000)
        z = rng.uniform(-3, 3, 1000) + 1e-9j
        assert np.all((1j / (z - np.conj(w))).real > 0)

    def test_lower_half_plane_rejected(self):
        with pytest.raises(DomainError):
            propagator_D(1.0, -1j, 1j)


class TestReproducingKernel:
    def test_diagonal_value(self):
        cfg = ChainConfig([1.0, 1.5])
        val = reproducing_kernel(cfg, [1j, 1j], [1j, 1j])
        assert val == pytest.approx(0.5 ** 2 * 0.5 ** 3, rel=1e-14)

    def test_hermiticity(self):
        z, zp = [0.3 + 1j, -0.2 + 0.7j], [0.5 + 0.4j, 0.1 + 2j]
        assert rel(reproducing_kernel(C2, z, zp).conjugate(), reproducing_kernel(C2, zp, z)) < 1e-14

    def test_reproduces_plane_wave(self):
        assert abs(reproduce_direct(1.0, 1.0, 1j) - math.exp(-1.0)) <= 1e-6 * math.exp(-1.0)

    def test_wrong_arity(self):
        with pytest.raises(DomainError):
            reproducing_kernel(C2, [1j], [1j, 1j])


class TestFactors:
    def test_lambda_trivial(self):
        assert lambda_factor([1, 1], 0.0) == pytest.approx(1.0, abs=1e-14)
        assert lambda_factor([], 0.3) == 1.0

    @pytest.mark.parametrize("x", [0.3, -1.7, 4.0])
    def test_lambda_modulus(self, x):
        expected = 1.0 / float(abs_gamma_sq(1, -x)) ** 2
        assert rel(abs(lambda_factor([1, 1], x)) ** 2, expected) < 1e-12

    def test_norm_constants(self):
        assert norm_const(ChainConfig([1.0])) == pytest.approx(1.0, abs=1e-14)
        assert norm_const(ChainConfig([1.0, 1.0])) == pytest.approx(1.0, abs=1e-14)
        assert norm_const(ChainConfig([1.0, 1.0]), "open") == pytest.approx(1.0, abs=1e-13)

    def test_open_to_closed_ratio(self):
        cfg = C3
        ratio = norm_const(cfg, "open") / norm_const(cfg, "closed")
        s = cfg.s
        expected = 1.0
        for i in range(3):
            for j in range(i + 1, 3):
                expected /= complex(gamma(s[i] + s[j]))
        assert rel(ratio, expected) < 1e-13


class TestPsi:
    def test_two_site_kernel_plug_in(self):
        # one layer and no loop momenta: a product of two powers
        p, x, q = 1.7, 0.3, np.array([0.5, 1.2])
        s, sb = C2.s, C2.sbar
        a, b = s[0] - 1j * x, sb[1] + 1j * x
        lam = complex(np.exp(np.log(complex(gamma(a + b))) - np.log(complex(gamma(a))) - np.log(complex(gamma(b)))))
        expected = (norm_const(C2) * p ** (C2.total_spin - 0.5) * lam
                    * (q[0] / p) ** (a - 1) * (q[1] / p) ** (b - 1) / p)
        assert rel(psi_momentum_kernel(C2, p, [x], q), expected) < 1e-14

    def test_kernel_domain(self):
        with pytest.raises(DomainError):
            psi_momentum_kernel(C2, 1.0, [0.3], np.array([-0.2, 1.2]))
        with pytest.raises(DomainError):
            psi_momentum_kernel(C2, 1.0, [0.3], np.array([0.2, 0.5]))

    def test_three_site_kernel_symmetry(self):
        q = np.array([0.3, 0.45, 0.25])
        a = psi_momentum_kernel(C3, 1.0, [0.2, -0.35], q)
        b = psi_momentum_kernel(C3, 1.0, [-0.35, 0.2], q)
        assert rel(a, b) <= 1e-6

    def test_one_site_plane_wave(self):
        cfg = ChainConfig([1.3], [0.4])
        p, z = 0.8, 0.2 + 0.7j
        expected = norm_const(cfg) * p ** (1.3 - 0.5) * cmath.exp(1j * p * z)
        assert rel(psi_eval(cfg, p, [], [z]), expected) < 1e-14

    def test_two_site_resolution(self):
        z = np.array([[0.3 + 1.0j, -0.2 + 0.8j]])
        a = psi_values(C2, 1.0, [0.2], z, points=200)[0]
        b = psi_values(C2, 1.0, [0.2], z, points=400)[0]
        assert rel(a, b) <= 1e-8

    def test_three_site_symmetry_random_points(self):
        z = random_upper(np.random.default_rng(4), (10, 3))
        a = psi_values(C3, 1.0, [0.2, -0.35], z)
        b = psi_values(C3, 1.0, [-0.35, 0.2], z)
        assert np.max(np.abs(a - b) / np.abs(a)) <= 1e-5

    def test_rejects_large_chain(self):
        with pytest.raises(DomainError):
            psi_values(ChainConfig([1] * 4), 1.0, [0.1, 0.2, 0.3], np.ones((1, 4)) * 1j)


class TestPhiUpsilon:
    def test_one_site_value(self):
        assert phi_eval(ChainConfig([1.0]), [0.0], [1j], 1j) == pytest.approx(0.5, abs=1e-14)

    def test_one_site_is_a_propagator(self):
        cfg = ChainConfig([1.2], [0.3])
        x, z, sigma = 0.4, 0.1 + 0.9j, -0.3 + 0.5j
        expected = norm_const(cfg) * propagator_D(cfg.s[0] - 1j * x, z, sigma)
        assert rel(phi_eval(cfg, [x], [z], sigma), expected) < 1e-13

    def test_two_site_symmetry_random_points(self):
        z = random_upper(np.random.default_rng(6), (10, 2))
        a = phi_values(C2, [0.2, -0.3], z, 0.5 + 1j)
        b = phi_values(C2, [-0.3, 0.2], z, 0.5 + 1j)
        assert np.max(np.abs(a - b) / np.abs(a)) <= 1e-5

    def test_sigma_outside_half_plane(self):
        with pytest.raises(DomainError):
            phi_values(C2, [0.2, -0.3], np.array([[1j, 1j]]), 0.5 - 1j)

    def test_upsilon_even(self):
        z = random_upper(np.random.default_rng(8), (10, 2))
        a = upsilon_values(C2, 1.0, [0.2], z)
        b = upsilon_values(C2, 1.0, [-0.2], z)
        assert np.max(np.abs(a - b) / np.abs(a)) <= 1e-5

    def test_upsilon_resolution(self):
        z = np.array([[0.3 + 1.0j, -0.2 + 0.8j]])
        a = upsilon_values(C2, 1.0, [0.2], z, points=200)[0]
        b = upsilon_values(C2, 1.0, [0.2], z, points=400)[0]
        assert rel(a, b) <= 1e-6


class TestMonodromy:
    def test_cauchy_polynomial(self):
        d = cauchy_derivatives(lambda z: z * z, 1j, 0.1, order=1)
        assert abs(d[1] - 2j) <= 1e-12

    @pytest.mark.parametrize("u", [0.0, 0.37, 2.0 - 1.0j])
    def test_one_site_B_on_plane_wave(self, u):
        cfg, p = ChainConfig([1.0]), 0.7
        f = lambda z: np.exp(1j * p * z[:, 0])
        z = np.array([0.2 + 1j])
        out = monodromy_apply(cfg, "B", u, f, z)
        expected = p * cmath.exp(1j * p * z[0])
        assert abs(out - expected) <= 1e-12 * abs(expected)

    def test_B_family_commutes_symbolically(self):
        bu, bv = monodromy_operator(C3, "B", 0.3 + 0.1j), monodromy_operator(C3, "B", -1.2)
        # exact cancellation up to rounding of the complex coefficients
        assert (bu @ bv - bv @ bu).norm() <= 1e-14 * (bu @ bv).norm()

    def test_B_family_commutes_numerically(self):
        u, v = 0.41, -0.77
        bu, bv = monodromy_operator(C2, "B", u), monodromy_operator(C2, "B", v)
        p = (0.6, 1.1)
        f = lambda z: np.exp(1j * (p[0] * z[:, 0] + p[1] * z[:, 1]))
        z = np.array([0.1 + 1j, -0.3 + 0.8j])
        comm = monodromy_apply(C2, None, u, f, z, op=bu @ bv - bv @ bu)
        scale = abs(monodromy_apply(C2, None, u, f, z, op=bu @ bv))
        assert abs(comm) <= 1e-10 * scale

    def test_circle_must_stay_in_half_plane(self):
        with pytest.raises(DomainError):
            monodromy_apply(C2, "B", 0.3, lambda z: z[:, 0], np.array([1j, 1j]), radius=2.0)


class TestEigenResidual:
    Z = (0.3 + 1.0j, -0.2 + 0.8j)

    def test_B(self):
        q = EigenfunctionQuery(C2, "Psi-B", (0.2,), self.Z, p=1.0)
        assert eigen_residual(q, 0.37) <= 1e-6

    def test_A(self):
        q = EigenfunctionQuery(C2, "Phi-A", (0.2, -0.3), self.Z, sigma=1e-3j)
        assert eigen_residual(q, 0.37) <= 1e-5

    def test_Bhat_and_parity(self):
        q = EigenfunctionQuery(C2, "Upsilon-BB", (0.2,), self.Z, p=1.0)
        assert eigen_residual(q, 0.37) <= 1e-4
        f = q.evaluator()
        z = np.asarray(q.z)
        plus = monodromy_apply(C2, None, 0.37, f, z, op=q.operator(0.37))
        minus = monodromy_apply(C2, None, -0.37, f, z, op=q.operator(-0.37))
        assert abs(plus - minus) <= 1e-10 * abs(plus)

    def test_three_site_B(self):
        q = EigenfunctionQuery(C3, "Psi-B", (0.2, -0.35), (0.3 + 1.0j, -0.2 + 0.8j, 0.1 + 1.2j), p=1.0)
        # a 16-point circle is plenty for the low derivative orders of B
        assert eigen_residual(q, 0.37, QuadSpec(points_per_dim=120), points=16) <= 1e-6

    def test_query_validation(self):
        with pytest.raises(DomainError):
            EigenfunctionQuery(C2, "Psi-B", (0.2, 0.1), self.Z, p=1.0)
        with pytest.raises(DomainError):
            EigenfunctionQuery(C2, "Phi-A", (0.2, 0.1), self.Z, p=1.0)
        with pytest.raises(DomainError):
            EigenfunctionQuery(C2, "Upsilon-BB", (0.2,), self.Z)


class TestClosedB:
    E = [0.05, 0.05]

    def test_two_site_direct(self):
        cfg = ChainConfig([1.0, 1.0])
        closed = overlap_BB_closed(cfg, 1.0, [0.3], [-0.2], self.E, self.E)
        direct = overlap_BB_direct(cfg, 1.0, [0.3], [-0.2], self.E, self.E)
        assert rel(direct, closed) <= 1e-5

    def test_inhomogeneous_direct(self):
        e, ep = [0.05, 0.04], [0.02, 0.03]
        closed = overlap_BB_closed(C2, 1.3, [0.3], [-0.2], e, ep)
        direct = overlap_BB_direct(C2, 1.3, [0.3], [-0.2], e, ep)
        assert rel(direct, closed) <= 1e-5

    def test_hermiticity(self):
        e, ep = [0.05, 0.04], [0.02, 0.03]
        a = overlap_BB_closed(C2, 1.0, [0.3], [-0.2], e, ep)
        b = overlap_BB_closed(C2, 1.0, [-0.2], [0.3], ep, e)
        assert rel(a.conjugate(), b) < 1e-13

    def test_finite_off_diagonal(self):
        vals = [abs(overlap_BB_closed(C2, 1.0, [0.3], [-0.2], [e, e], [e, e])) for e in (1e-2, 1e-4, 1e-6)]
        # no pole: the value stays bounded (it even goes to zero with the regulators)
        assert np.all(np.isfinite(vals)) and vals[0] >= vals[1] >= vals[2]


class TestCrossOverlaps:
    def test_AA_direct(self):
        c1 = ChainConfig([1.0])
        x = [0.5 + 0.1j]
        assert rel(overlap_AA_direct(c1, 1j, 1j, x, x), overlap_AA_closed(c1, 1j, 1j, x, x)) <= 1e-6

    def test_AA_hermiticity(self):
        c1 = ChainConfig([1.0])
        a = overlap_AA_closed(c1, 1j, 0.5 + 2j, [0.3], [-0.4])
        b = overlap_AA_closed(c1, 0.5 + 2j, 1j, [-0.4], [0.3])
        assert rel(a.conjugate(), b) < 1e-13

    def test_AA_pole_rate(self):
        c1 = ChainConfig([1.0])
        vals = [abs(overlap_AA_closed(c1, 1j, 1j, [0.5], [0.5 + 1j * d])) for d in (1e-3, 1e-4)]
        assert vals[1] / vals[0] == pytest.approx(10.0, rel=1e-2)

    def test_BA_direct(self):
        c1 = ChainConfig([1.0])
        closed = overlap_BA_closed(c1, 1.0, [], 1j, [0.2], [0.05])
        direct = overlap_BA_direct(c1, 1.0, [], 1j, [0.2], [0.05])
        assert rel(direct, closed) <= 1e-6

    def test_BA_factorisation(self):
        cfg = ChainConfig([1.3], [0.4])
        p, sigma, x, e = 1.4, 0.3 + 0.8j, 0.2, 0.05
        expo = -0.5 - 1j * 0.4 - 1j * x + e
        expected = p ** expo * cmath.exp(-1j * p * sigma.conjugate()) / complex(gamma(cfg.s[0] - 1j * x + e))
        assert rel(overlap_BA_closed(cfg, p, [], sigma, [x], [e]), expected) <= 1e-12

    def test_BA_decay_in_sigma(self):
        c1 = ChainConfig([1.0])
        a = overlap_BA_closed(c1, 2.0, [], 0.2 + 1j, [0.2], [0.05])
        b = overlap_BA_closed(c1, 2.0, [], 0.2 + 2j, [0.2], [0.05])
        assert abs(b) / abs(a) == pytest.approx(math.exp(-2.0), rel=1e-13)

    def test_upsilon_phi_even_in_y(self):
        a = overlap_UpsilonPhi_closed(C2, 1.0, [0.3], 0.2 + 1j, [0.2, -0.4], [0.05, 0.05])
        b = overlap_UpsilonPhi_closed(C2, 1.0, [-0.3], 0.2 + 1j, [0.2, -0.4], [0.05, 0.05])
        assert rel(a, b) < 1e-13

    def test_upsilon_phi_vanishes_near_opposite_pair(self):
        vals = [abs(overlap_UpsilonPhi_closed(C2, 1.0, [0.3], 0.2 + 1j, [0.2, -0.2 + d], [1e-4, 1e-4]))
                for d in (1e-2, 1e-3)]
        assert vals[1] < vals[0]

    def test_upsilon_phi_direct(self):
        closed = overlap_UpsilonPhi_closed(C2, 1.0, [0.3], 0.2 + 1j, [0.2, -0.4], [0.05, 0.05])
        direct = overlap_UpsilonPhi_direct(C2, 1.0, [0.3], 0.2 + 1j, [0.2, -0.4], [0.05, 0.05])
        assert rel(direct, closed) <= 1e-4

    def test_psi_phi_phi_homogeneous_prefactor(self):
        cfg = ChainConfig([1.0, 1.0])
        args = (1.0, [0.3], 0.3 + 1j, [0.2 + 0.05j], -0.4 + 0.05j)
        a = overlap_B_AxA_closed(cfg, *args)
        b = overlap_B_AxA_closed(cfg, *args, prefactor="printed")
        assert rel(a, b) < 1e-13

    def test_psi_phi_phi_two_site_direct(self):
        cfg = ChainConfig([0.8, 1.2], [0.2, -0.1])
        args = (1.0, [0.3], 0.3 + 1j, [0.2 + 0.05j], -0.4 + 0.05j)
        assert rel(overlap_B_AxA_direct(cfg, *args), overlap_B_AxA_closed(cfg, *args)) <= 1e-5

    def test_psi_phi_phi_three_site_direct(self):
        cfg = ChainConfig([1.0, 0.8, 1.1], [0.1, -0.2, 0.15])
        args = (1.0, [0.3, -0.5], 0.3 + 1j, [0.2 + 0.3j, -0.1 + 0.3j], 0.4 + 0.3j)
        direct = overlap_B_AxA_direct(cfg, *args, spec=QuadSpec(points_per_dim=200))
        assert rel(direct, overlap_B_AxA_closed(cfg, *args)) <= 1e-4
