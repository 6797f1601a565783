"""Oracles and structural checks for the energy: nonlinearity catalogue,
finite-difference gradient verification, penalized variants and the recorded
coercivity/convexity constants."""

import numpy as np
import pytest

from risopt import EnergyModel, Nonlinearity, build_spaces, unit_spaces
from risopt.energy import (DF, D2F_diag, F_eval, coercivity_constants,
                           complete_continuity_bound, convexity_threshold,
                           energy_I, energy_penalized, grad_I, grad_penalized,
                           hessian_E, reduced_E)


class TestNonlinearity:
    def test_doublewell_values(self):
        nl = Nonlinearity("doublewell", a=2.25)
        assert nl.f(0.0) == pytest.approx(1.0)
        assert nl.f_prime(0.0) == pytest.approx(0.0)
        assert nl.f_second(0.0) == pytest.approx(-2.0)
        assert nl.f(1.0) == pytest.approx(1.0)
        assert nl.f_prime(1.0) == pytest.approx(2.0)
        assert nl.f_second(1.0) == pytest.approx(10.0)
        # wells at +-1/sqrt(2)
        r = 1.0 / np.sqrt(2.0)
        assert nl.f_prime(r) == pytest.approx(0.0, abs=1e-14)
        assert nl.f(r) == pytest.approx(0.75)

    @pytest.mark.parametrize("a", [2.1, 2.25, 2.4])
    def test_doublewell_c2_patching(self, a):
        nl = Nonlinearity("doublewell", a=a)
        c1, c2, c3 = nl._outer
        for sgn in (1.0, -1.0):
            r = sgn
            inner = (r ** 4 - r ** 2 + 1.0, 4 * r ** 3 - 2 * r, 12 * r ** 2 - 2)
            outer = (c1 * abs(r) ** a + c2 * r ** 2 + c3,
                     c1 * a * abs(r) ** (a - 1) * sgn + 2 * c2 * r,
                     c1 * a * (a - 1) * abs(r) ** (a - 2) + 2 * c2)
            for u, v in zip(inner, outer):
                assert u == pytest.approx(v, abs=1e-12)

    def test_doublewell_even_and_growth(self):
        nl = Nonlinearity("doublewell", a=2.25)
        r = np.linspace(-20.0, 20.0, 4001)
        np.testing.assert_allclose(nl.f(r), nl.f(-r), atol=1e-12)
        assert np.all(nl.f(r) >= 0.0)
        # |f''| <= gamma (1 + |r|^q) by construction of gamma
        assert np.all(np.abs(nl.f_second(r))
                      <= nl.gamma * (1.0 + np.abs(r) ** nl.q) + 1e-10)
        assert nl.q == pytest.approx(0.25)
        assert nl.s == 2.0

    def test_sine_values(self):
        nl = Nonlinearity("sine")
        assert nl.f(0.0) == pytest.approx(1.0)
        assert nl.f_prime(0.0) == pytest.approx(1.0)
        assert nl.f_second(0.0) == pytest.approx(0.0)
        assert nl.gamma == 1.0 and nl.q == 0.0 and nl.s == 1.0
        assert np.all(nl.f(np.linspace(-9, 9, 100)) >= 0.0)

    def test_none_is_zero(self):
        nl = Nonlinearity("none")
        r = np.linspace(-3, 3, 7)
        assert np.all(nl.f(r) == 0.0)
        assert np.all(nl.f_prime(r) == 0.0)
        assert nl.gamma == 0.0

    def test_derivative_consistency_fd(self):
        # centered differences agree with the analytic derivatives
        for nl in (Nonlinearity("doublewell", a=2.25), Nonlinearity("sine")):
            r = np.linspace(-3.0, 3.0, 61)
            t = 1e-6
            fd1 = (nl.f(r + t) - nl.f(r - t)) / (2 * t)
            fd2 = (nl.f_prime(r + t) - nl.f_prime(r - t)) / (2 * t)
            np.testing.assert_allclose(fd1, nl.f_prime(r), atol=1e-6)
            np.testing.assert_allclose(fd2, nl.f_second(r), atol=1e-5)

    def test_invalid_kinds(self):
        with pytest.raises(ValueError):
            Nonlinearity("cubic")
        with pytest.raises(ValueError):
            Nonlinearity("doublewell", a=2.0)
        with pytest.raises(ValueError):
            Nonlinearity("doublewell", a=2.5)
        with pytest.raises(ValueError):
            Nonlinearity("doublewell")


class TestEnergyFunctionals:
    def test_F_oracle(self, fem3):
        model = EnergyModel(fem3, Nonlinearity("doublewell", a=2.25))
        # f(0) = 1 at three nodes with weight 0.25
        assert F_eval(model, np.zeros(3)) == pytest.approx(0.75)
        model0 = EnergyModel(fem3, Nonlinearity("none"))
        assert F_eval(model0, np.ones(3)) == 0.0

    def test_energy_I_oracle(self, fem3):
        model = EnergyModel(fem3, Nonlinearity("none"))
        z = np.array([1.0, 0.0, 0.0])
        ell = np.array([0.5, 0.0, 0.0])
        # 1/2 * 8 * 1 - 0.5 = 3.5
        assert energy_I(model, ell, z) == pytest.approx(3.5)
        assert reduced_E(model, z) == pytest.approx(4.0)

    @pytest.mark.parametrize("kind,a,n", [("none", None, 3),
                                          ("sine", None, 1),
                                          ("sine", None, 8),
                                          ("doublewell", 2.25, 3),
                                          ("doublewell", 2.4, 8)])
    def test_grad_I_finite_difference(self, kind, a, n):
        model = EnergyModel(build_spaces(n), Nonlinearity(kind, a=a))
        rng = np.random.default_rng(7)
        t = 1e-5
        for _ in range(25):
            z = 2.0 * rng.standard_normal(n)
            ell = rng.standard_normal(n)
            v = rng.standard_normal(n)
            fd = (energy_I(model, ell, z + t * v)
                  - energy_I(model, ell, z - t * v)) / (2 * t)
            assert fd == pytest.approx(float(grad_I(model, ell, z) @ v),
                                       rel=1e-6, abs=1e-8)

    def test_hessian_matches_D2F(self, fem3):
        model = EnergyModel(fem3, Nonlinearity("doublewell", a=2.25))
        z = np.array([0.2, -1.4, 0.9])
        h = hessian_E(model, z)
        np.testing.assert_allclose(h - np.diag(D2F_diag(model, z)),
                                   fem3.stiffness)
        # symmetric by construction
        np.testing.assert_allclose(h, h.T)

    def test_hessian_fd(self, fem3):
        model = EnergyModel(fem3, Nonlinearity("sine"))
        rng = np.random.default_rng(8)
        z = rng.standard_normal(3)
        v = rng.standard_normal(3)
        t = 1e-6
        fd = (grad_I(model, np.zeros(3), z + t * v)
              - grad_I(model, np.zeros(3), z - t * v)) / (2 * t)
        np.testing.assert_allclose(fd, hessian_E(model, z) @ v, atol=1e-6)


class TestPenalizedEnergy:
    def test_reduces_to_plain_energy(self, fem3):
        model = EnergyModel(fem3, Nonlinearity("sine"))
        rng = np.random.default_rng(9)
        z = rng.standard_normal(3)
        ell = rng.standard_normal(3)
        zt = rng.standard_normal((2, 3))
        assert energy_penalized(model, 0.0, 0, zt, ell, z) == \
            pytest.approx(energy_I(model, ell, z))
        assert energy_penalized(model, 3.0, 1, zt, ell, zt[1]) == \
            pytest.approx(energy_I(model, ell, zt[1]))

    def test_gradient_is_shifted_load(self, fem3):
        # grad of the penalized energy equals grad_I with load shifted by
        # eta * M * (z - ztilde)
        model = EnergyModel(fem3, Nonlinearity("doublewell", a=2.25))
        rng = np.random.default_rng(10)
        eta = 2.5
        for _ in range(20):
            z = rng.standard_normal(3)
            ell = rng.standard_normal(3)
            zt = rng.standard_normal((1, 3))
            shifted = ell - eta * fem3.mass * (z - zt[0])
            np.testing.assert_allclose(grad_penalized(model, eta, 0, zt, ell, z),
                                       grad_I(model, shifted, z), atol=1e-13)

    def test_gradient_fd(self, fem3):
        model = EnergyModel(fem3, Nonlinearity("sine"))
        rng = np.random.default_rng(11)
        z = rng.standard_normal(3)
        ell = rng.standard_normal(3)
        zt = rng.standard_normal((1, 3))
        v = rng.standard_normal(3)
        t = 1e-6
        fd = (energy_penalized(model, 1.7, 0, zt, ell, z + t * v)
              - energy_penalized(model, 1.7, 0, zt, ell, z - t * v)) / (2 * t)
        assert fd == pytest.approx(float(grad_penalized(model, 1.7, 0, zt, ell, z) @ v),
                                   rel=1e-6)

    def test_rejects_bad_input(self, fem3):
        model = EnergyModel(fem3, Nonlinearity("none"))
        z = np.zeros(3)
        with pytest.raises(ValueError):
            energy_penalized(model, -1.0, 0, np.zeros((1, 3)), z, z)
        with pytest.raises(ValueError):
            energy_penalized(model, 1.0, 5, np.zeros((1, 3)), z, z)


class TestConstants:
    def test_lambda_mu(self, fem3):
        model = EnergyModel(fem3, Nonlinearity("doublewell", a=2.25))
        lam, mu, nu = coercivity_constants(model)
        assert lam == pytest.approx(4.0)
        assert mu == pytest.approx(4.0 * fem3.embedding_constant ** 2)
        assert nu > 0.0

    def test_quadratic_growth_bound_sampled(self, fem3):
        # ||z||_Z^2 <= lam * I(l, z) + mu * ||l||_{V*}^2 whenever F >= 0
        model = EnergyModel(fem3, Nonlinearity("doublewell", a=2.25))
        lam, mu, _ = coercivity_constants(model)
        rng = np.random.default_rng(12)
        for _ in range(1000):
            z = 3.0 * rng.standard_normal(3)
            ell = 3.0 * rng.standard_normal(3)
            lhs = fem3.norm_z(z) ** 2
            rhs = lam * energy_I(model, ell, z) + mu * fem3.dual_norm_vstar(ell) ** 2
            assert lhs <= rhs + 1e-9

    @pytest.mark.parametrize("kind,a,r", [("sine", None, 1.0),
                                          ("sine", None, 3.0),
                                          ("doublewell", 2.25, 2.0)])
    def test_convexity_threshold(self, kind, a, r):
        # adding the eta_bar pivot penalty makes the Hessian >= (alpha/2) A
        model = EnergyModel(unit_spaces(1), Nonlinearity(kind, a=a))
        sp = model.spaces
        eta = convexity_threshold(model, r)
        rng = np.random.default_rng(13)
        for _ in range(500):
            z = rng.uniform(-r, r, 1)
            if sp.norm_z(z) > r:
                continue
            v = rng.standard_normal(1)
            quad = float(v @ (hessian_E(model, z) @ v)) + eta * float(v @ (sp.mass * v))
            assert quad >= 0.5 * sp.alpha * sp.norm_z(v) ** 2 - 1e-10

    def test_convexity_threshold_values(self):
        model = EnergyModel(unit_spaces(1), Nonlinearity("sine"))
        assert convexity_threshold(model, 1.0) == pytest.approx(2.0)
        model0 = EnergyModel(unit_spaces(1), Nonlinearity("none"))
        assert convexity_threshold(model0, 1.0) == 0.0
        with pytest.raises(ValueError):
            convexity_threshold(model, 0.0)

    @pytest.mark.parametrize("kind,a", [("sine", None), ("doublewell", 2.25)])
    def test_complete_continuity_bound(self, kind, a):
        # |F(z1) - F(z2)| <= K(r) ||z1 - z2||_V on the Z-ball of radius r
        model = EnergyModel(build_spaces(5), Nonlinearity(kind, a=a))
        sp = model.spaces
        r = 2.0
        big_k = complete_continuity_bound(model, r)
        rng = np.random.default_rng(14)
        checked = 0
        while checked < 200:
            z1 = rng.standard_normal(5)
            z2 = rng.standard_normal(5)
            z1 *= r * rng.uniform(0, 1) / max(sp.norm_z(z1), 1e-12)
            z2 *= r * rng.uniform(0, 1) / max(sp.norm_z(z2), 1e-12)
            gap = abs(F_eval(model, z1) - F_eval(model, z2))
            assert gap <= big_k * sp.norm_v(z1 - z2) + 1e-10
            checked += 1
