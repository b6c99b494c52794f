import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate
from scipy.special import gammaln

from sovchain.cgamma import gamma
from sovchain.deltafam import (RegulatorSchedule, TestFunction, convergence_study, cosh_mass, diagonal_limit,
                               kernel_Ctilde, kernel_cosh, kernel_S, sokhotsky_check, weak_pairing, weight_W)
from sovchain.errors import DegeneratePointError, DomainError, UsageError
from sovchain.quad import QuadSpec, integrate_line

GAUSS = TestFunction("gaussian", (0.0,), 1.0)
BUMP = TestFunction("bump", (0.2,), 1.5)
HERMITE = TestFunction("hermite", (0.1,), 0.8)


def zero(x):
    return np.zeros(np.atleast_2d(x).shape[0])


class TestTestFunctions:
    def test_bump_support(self):
        x = np.array([[-1.31], [-1.29], [0.2], [1.69], [1.71]])
        v = BUMP(x)
        assert v[0] == 0 and v[-1] == 0 and np.all(v[1:4] > 0)
        assert v[2] == pytest.approx(1.0)

    def test_validation(self):
        with pytest.raises(DomainError):
            TestFunction("box")
        with pytest.raises(DomainError):
            TestFunction("gaussian", (0.0,), 0.0)

    def test_schedule_validation(self):
        with pytest.raises(UsageError):
            RegulatorSchedule(eps_values=(1e-2, 1e-1))
        with pytest.raises(UsageError):
            RegulatorSchedule(L_values=(100.0, 10.0))


class TestWeight:
    def test_one_dimensional(self):
        assert weight_W([0.4]) == pytest.approx(2 * math.pi, rel=1e-15)

    def test_two_dimensional(self):
        expected = 8 * math.pi * math.sinh(math.pi)
        assert weight_W([0.0, 1.0]) == pytest.approx(expected, rel=1e-13)
        assert expected == pytest.approx(290.25, abs=0.01)

    def test_permutation(self):
        assert weight_W([0.3, -1.2, 0.8]) == pytest.approx(weight_W([0.8, 0.3, -1.2]), rel=1e-13)

    def test_degenerate(self):
        with pytest.raises(DegeneratePointError):
            weight_W([0.5, 0.5])


class TestKernels:
    def test_ctilde_off_diagonal_finite(self):
        v = kernel_Ctilde([0.3], [-0.2], [0.01, 0.01], [0.01, 0.01])
        assert np.isfinite(abs(v))

    @pytest.mark.parametrize("x, xp, e, ep", [
        ([0.3], [-0.2], [0.01, 0.01], [0.02, 0.03]),
        ([0.3, 0.5], [-0.2, 0.1], [0.01, 0.01, 0.02], [0.02, 0.03, 0.01]),
    ])
    def test_ctilde_conjugation(self, x, xp, e, ep):
        a = kernel_Ctilde(x, xp, e, ep)
        b = kernel_Ctilde(xp, x, ep, e)
        assert abs(a.conjugate() - b) <= 1e-13 * abs(a)

    def test_s_phase_is_unimodular(self):
        mags = [abs(kernel_S([0.3], [0.7], L, 0.05)) for L in (1.0, 10.0, 1e3, 1e6)]
        assert np.allclose(mags, mags[0], rtol=1e-13)

    def test_s_diagonal_pole(self):
        for e in (1e-2, 1e-3):
            assert kernel_S([0.3], [0.3], 100.0, e) == pytest.approx(complex(gamma(e)), rel=1e-12)
        assert abs(kernel_S([0.3], [0.3], 10.0, 1e-4)) == pytest.approx(1e4, rel=1e-3)

    def test_s_rejects_bad_regulators(self):
        with pytest.raises(DomainError):
            kernel_S([0.3], [0.3], 0.0, 0.1)

    def test_cosh_peak(self):
        for L in (1.0, 10.0, 1e4):
            assert kernel_cosh(0.0, L) == pytest.approx(math.sqrt(L / (4 * math.pi)), rel=1e-14)

    def test_cosh_mass_closed_form(self):
        # Beta-function oracle for int sech^{2L}(u/2) du, independent of cosh_mass
        L = 10.0
        beta = 2 * math.sqrt(math.pi) * math.exp(gammaln(L) - gammaln(L + 0.5))
        assert cosh_mass(L) == pytest.approx(math.sqrt(L / (4 * math.pi)) * beta, rel=1e-13)
        assert cosh_mass(L) == pytest.approx(1.0126, abs=1e-3)
        numeric = integrate_line(lambda u: kernel_cosh(u, L), QuadSpec(points_per_dim=400, map_scale=1 / math.sqrt(L)))
        assert abs(numeric.value - cosh_mass(L)) <= 1e-3

    def test_cosh_mass_monotone(self):
        masses = [cosh_mass(L) for L in (10.0, 20.0, 40.0, 80.0)]
        gaps = [m - 1 for m in masses]
        assert all(g > 0 for g in gaps)
        assert all(a > b for a, b in zip(gaps, gaps[1:]))


class TestPairing:
    K = staticmethod(lambda x, xp: kernel_Ctilde(x, xp, [0.05, 0.05], [0.05, 0.05]))

    def test_zero_function(self):
        assert weak_pairing(self.K, zero, GAUSS, width=0.05) == 0
        assert weak_pairing(lambda u: kernel_cosh(u, 10.0), zero) == 0

    def test_sesquilinear(self):
        a, c = 0.7 - 0.2j, 1.3 + 0.5j
        comb = lambda x: a * GAUSS(x) + c * HERMITE(x)
        kw = dict(width=0.05, halfwidth=4.0)
        right = weak_pairing(self.K, BUMP, comb, **kw)
        expected = np.conj(a) * weak_pairing(self.K, BUMP, GAUSS, **kw) + np.conj(c) * weak_pairing(self.K, BUMP, HERMITE, **kw)
        assert abs(right - expected) <= 1e-12 * abs(expected)
        left = weak_pairing(self.K, comb, BUMP, **kw)
        expected = a * weak_pairing(self.K, GAUSS, BUMP, **kw) + c * weak_pairing(self.K, HERMITE, BUMP, **kw)
        assert abs(left - expected) <= 1e-12 * abs(expected)

    def test_diagonal_target(self):
        # 2 pi int exp(-x^2) = 2 pi sqrt(pi)
        assert diagonal_limit(GAUSS) == pytest.approx(2 * math.pi * math.sqrt(math.pi), rel=1e-12)
        oracle, _ = sp_integrate.quad(lambda t: BUMP(np.array([[t]]))[0] ** 2, -1.3, 1.7, epsabs=1e-14)
        assert diagonal_limit(BUMP) == pytest.approx(2 * math.pi * oracle, rel=1e-9)

    @pytest.mark.parametrize("phi", [GAUSS, BUMP], ids=["gaussian", "bump"])
    def test_ctilde_limit(self, phi):
        rep = convergence_study("ctilde", phi)
        assert abs(rep.limit - rep.target) <= 1e-2 * abs(rep.target)
        # diagonal positivity
        assert rep.limit.real > 0 and abs(rep.limit.imag) <= 1e-6 * rep.limit.real
        assert 0.5 <= rep.order <= 2.0

    @pytest.mark.parametrize("phi", [GAUSS, BUMP], ids=["gaussian", "bump"])
    def test_s_limit(self, phi):
        rep = convergence_study("S", phi, RegulatorSchedule(L_values=(1000.0,)))
        assert abs(rep.limit - rep.target) <= 5e-2 * abs(rep.target)
        assert abs(rep.limit.imag) <= 1e-6 * rep.limit.real

    def test_s_order_in_inverse_log(self):
        rep = convergence_study("S", GAUSS)
        assert 0.5 <= rep.order <= 2.0

    @pytest.mark.parametrize("phi", [GAUSS, BUMP], ids=["gaussian", "bump"])
    def test_cosh_limit_and_order(self, phi):
        rep = convergence_study("cosh", phi, RegulatorSchedule(L_values=(10.0, 20.0, 40.0, 80.0)))
        assert abs(rep.values[-1] - rep.target) <= 2e-2 * abs(rep.target)
        assert 0.5 <= rep.order <= 2.0

    def test_cosh_large_L(self):
        rep = convergence_study("cosh", GAUSS, RegulatorSchedule(L_values=(1e4,)))
        assert abs(rep.values[0] - 1.0) <= 1e-3

    def test_unknown_family(self):
        with pytest.raises(UsageError):
            convergence_study("sinc", GAUSS)


class TestSokhotsky:
    def test_gaussian_limit(self):
        v = sokhotsky_check(GAUSS, math.exp(10))
        assert abs(v - 2j * math.pi) <= 0.1 * 2 * math.pi

    def test_zero_function(self):
        assert sokhotsky_check(zero, math.exp(10)) == 0

    def test_rate_in_inverse_log(self):
        target = 2j * math.pi * BUMP(np.zeros((1, 1)))[0]
        e1 = abs(sokhotsky_check(BUMP, math.exp(10)) - target)
        e2 = abs(sokhotsky_check(BUMP, math.exp(20)) - target)
        assert e1 / e2 == pytest.approx(2.0, rel=0.3)

    def test_domain(self):
        with pytest.raises(DomainError):
            sokhotsky_check(GAUSS, 0.5)
