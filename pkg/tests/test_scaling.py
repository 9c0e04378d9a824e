"""Regime algebra, physical conversion, assumption validation."""

import math

import numpy as np
import pytest

from pxspk import (
    MediumSpec,
    PhysicalScenario,
    RegimeKind,
    ScalingRegime,
    physical_to_dimensionless,
    regime_from_theta,
    validate_assumptions,
)
from pxspk.errors import InvalidParameter


class TestRegimeFromTheta:
    def test_diffusive_eta_formula(self):
        reg = regime_from_theta(1e-4, 1.0, RegimeKind.DIFFUSIVE)
        assert reg.epsilon == pytest.approx(1e-4)
        assert reg.eta == pytest.approx(1.0 / math.log(math.log(1e4)), rel=1e-12)

    def test_kinetic_eta_is_one(self):
        reg = regime_from_theta(0.01, 1.0, RegimeKind.KINETIC)
        assert reg.eta == 1.0
        assert reg.kind == RegimeKind.KINETIC

    def test_boundary_epsilon_accepted(self):
        reg = regime_from_theta(0.25, 2.0, RegimeKind.KINETIC)
        assert reg.epsilon == pytest.approx(0.5)

    def test_epsilon_out_of_range_rejected(self):
        with pytest.raises(InvalidParameter):
            regime_from_theta(0.4, 4.0, RegimeKind.KINETIC)  # eps = 0.4^{1/4} > 1/2

    def test_theta_domain(self):
        with pytest.raises(InvalidParameter):
            regime_from_theta(0.0, 1.0, RegimeKind.KINETIC)
        with pytest.raises(InvalidParameter):
            regime_from_theta(0.7, 1.0, RegimeKind.KINETIC)

    def test_diffusive_eta_monotone_in_theta(self):
        thetas = [1e-3, 1e-4, 1e-5, 1e-6]
        etas = [regime_from_theta(t, 1.0, RegimeKind.DIFFUSIVE).eta for t in thetas]
        assert all(b <= a for a, b in zip(etas, etas[1:]))

    def test_coupling_saturated(self):
        reg = regime_from_theta(0.03, 1.7, RegimeKind.KINETIC)
        assert reg.theta == pytest.approx(reg.epsilon ** reg.gamma)

    def test_diffusive_needs_small_epsilon(self):
        # eps = 0.3: log|log eps| < 0 so no valid eta
        with pytest.raises(InvalidParameter):
            regime_from_theta(0.3, 1.0, RegimeKind.DIFFUSIVE)


class TestScalingRegimeInvariants:
    def test_kinetic_requires_unit_eta(self):
        with pytest.raises(InvalidParameter):
            ScalingRegime(theta=0.01, epsilon=0.1, eta=0.9, kind=RegimeKind.KINETIC)

    def test_diffusive_eta_pinned(self):
        eps = 1e-4
        eta = 1.0 / math.log(abs(math.log(eps)))
        ScalingRegime(theta=1e-4, epsilon=eps, eta=eta, kind=RegimeKind.DIFFUSIVE)
        with pytest.raises(InvalidParameter):
            ScalingRegime(theta=1e-4, epsilon=eps, eta=eta + 1e-6,
                          kind=RegimeKind.DIFFUSIVE)

    def test_coupling_enforced_outside_custom(self):
        with pytest.raises(InvalidParameter):
            ScalingRegime(theta=0.2, epsilon=0.1, eta=1.0, gamma=2.0,
                          kind=RegimeKind.KINETIC)  # theta > eps^2
        ScalingRegime(theta=0.2, epsilon=0.1, eta=0.5, gamma=2.0,
                      kind=RegimeKind.CUSTOM)

    def test_beta_domain(self):
        with pytest.raises(InvalidParameter):
            ScalingRegime(theta=0.1, epsilon=0.1, eta=1.0, beta=0.5)


class TestPhysicalScenario:
    def scenario(self):
        # lab numbers: k0 = 1e7 1/m, l0 = 2 mm, 500 m propagation, eta = 1
        return PhysicalScenario(k0=1e7, l0=2e-3, w0=2.5e-2, Z=2.5e5, sigma=1e-7)

    def test_theta_value(self):
        theta, _, _, _ = physical_to_dimensionless(self.scenario())
        assert theta == pytest.approx(5e-5, rel=1e-12)

    def test_epsilon_value(self):
        _, eps, eta, _ = physical_to_dimensionless(self.scenario())
        assert eps == pytest.approx(0.08, rel=1e-12)
        assert eta == pytest.approx(1.0, rel=1e-12)
        # eta k0 l0 / Z reproduces epsilon
        s = self.scenario()
        assert eps == pytest.approx(eta * s.k0 * s.l0 / s.Z, rel=1e-12)

    def test_consistency_residual(self):
        _, _, _, res = physical_to_dimensionless(self.scenario())
        assert res == pytest.approx(0.0, abs=1e-9)

    def test_degenerate_width_flags(self):
        s = PhysicalScenario(k0=1e7, l0=2e-3, w0=2e-3, Z=2.5e5, sigma=1e-7)
        _, eps, _, res = physical_to_dimensionless(s)
        assert eps == pytest.approx(1.0)
        assert res > 0.1

    def test_positivity(self):
        with pytest.raises(InvalidParameter):
            PhysicalScenario(k0=0.0, l0=1.0, w0=1.0, Z=1.0, sigma=1.0)

    def test_rescaling_identity(self):
        # common factor c on l0 and w0, Z fixed: theta -> theta/c, eps fixed,
        # eta -> eta/c, exactly per the defining formulas
        s = self.scenario()
        c = 3.0
        s2 = PhysicalScenario(k0=s.k0, l0=c * s.l0, w0=c * s.w0, Z=s.Z,
                              sigma=s.sigma)
        t1, e1, n1, _ = physical_to_dimensionless(s)
        t2, e2, n2, _ = physical_to_dimensionless(s2)
        assert t2 == pytest.approx(t1 / c)
        assert e2 == pytest.approx(e1)
        assert n2 == pytest.approx(n1 / c)


class TestValidateAssumptions:
    def test_gaussian_family_passes(self, unit_spec, kinetic_regime):
        report = validate_assumptions(unit_spec, kinetic_regime)
        assert report.passed, report.failures()
        assert report.metrics["resolved"]["eta"] == 1.0

    def test_zero_amplitude_rejected_before_validation(self):
        with pytest.raises(InvalidParameter):
            MediumSpec(sigma_c=0.0, ell_z=1.0, ell_x=1.0, d=1)

    def test_custom_coupling_violation_reported(self, unit_spec):
        reg = ScalingRegime(theta=0.3, epsilon=0.1, eta=1.0, gamma=2.0,
                            kind=RegimeKind.CUSTOM)
        report = validate_assumptions(unit_spec, reg)
        assert not report.passed
        assert any(name == "regime_coupling" for name, _ in report.failures())

    def test_metric_exposed(self, unit_spec, kinetic_regime):
        report = validate_assumptions(unit_spec, kinetic_regime, alpha=2.0,
                                      c_const=0.5)
        metric = kinetic_regime.theta ** 2 * np.exp(0.5 / kinetic_regime.eta ** 2)
        assert report.metrics["theta_alpha_exp_c_over_eta2"] == pytest.approx(metric)

    def test_2d_family_passes(self, kinetic_regime):
        spec = MediumSpec(sigma_c=1.0, ell_z=1.0, ell_x=2.0, d=2)
        report = validate_assumptions(spec, kinetic_regime)
        assert report.passed, report.failures()
