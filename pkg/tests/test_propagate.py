"""Split-step solvers: unitarity, oracles, sampling."""

import numpy as np
import pytest

from pxspk import (
    Field,
    Grid,
    MediumSpec,
    PhaseScreen,
    Profile,
    RegimeKind,
    ScalingRegime,
    ScreenKind,
    SeedPath,
    SourceSpec,
    covariance_R,
    diffraction_step,
    field_spectrum,
    free_space,
    free_space_field,
    ito_max_dz,
    make_source,
    phase_compensate,
    phase_screen_step,
    propagate_ito,
    propagate_paraxial,
    sample_macroscopic,
)
from pxspk.errors import (
    DomainTooSmall,
    GridMismatch,
    InvalidParameter,
    PointOutsideDomain,
    StepTooCoarse,
)


def wide_regime(eps=0.1, eta=1.0, theta=None, beta=1.0):
    return ScalingRegime(theta=theta if theta is not None else eps,
                         epsilon=eps, eta=eta, beta=beta, kind=RegimeKind.CUSTOM)


class TestMakeSource:
    def test_gaussian_samples_scaled_profile(self):
        reg = wide_regime(eps=0.1)
        grid = Grid(d=1, n=512, length=160.0, dz=0.01)
        f = make_source(SourceSpec(width=1.0), reg, grid)
        x = grid.axis()
        np.testing.assert_allclose(f.values, np.exp(-(0.1 * x) ** 2 / 2.0))
        assert np.max(np.abs(f.values)) == 1.0
        assert f.z == 0.0

    def test_plane_wave_limit_large_beta(self):
        # u0(eps^beta x) -> u0(0) on any fixed window as beta grows
        reg = wide_regime(eps=0.1, beta=8.0)
        grid = Grid(d=1, n=256, length=100.0, dz=0.01)
        f = make_source(SourceSpec(width=1.0), reg, grid)
        window = np.abs(grid.axis()) < 10
        np.testing.assert_allclose(f.values[window], 1.0, atol=1e-10)

    def test_identity_scaling(self):
        # eps^beta = 1 reproduces u0 itself (scale-identity of the sampler)
        from pxspk.propagate import _sampled_profile
        grid = Grid(d=1, n=256, length=40.0, dz=0.01)
        src = SourceSpec(width=2.0)
        vals = _sampled_profile(src, 1.0, grid)
        np.testing.assert_allclose(vals, np.exp(-grid.axis() ** 2 / 8.0))

    def test_domain_too_small(self):
        reg = wide_regime(eps=0.1)
        grid = Grid(d=1, n=64, length=20.0, dz=0.01)  # w_eff = 10, needs 40
        with pytest.raises(DomainTooSmall):
            make_source(SourceSpec(width=1.0), reg, grid)


class TestDiffractionStep:
    def setup_method(self):
        self.reg = wide_regime()
        self.grid = Grid(d=1, n=512, length=160.0, dz=0.01)
        self.f = make_source(SourceSpec(width=1.0), self.reg, self.grid)

    def test_zero_step_identity(self):
        out = diffraction_step(self.f, 0.0)
        np.testing.assert_allclose(out.values, self.f.values, atol=1e-15)

    def test_norm_preserved(self):
        out = diffraction_step(self.f, 0.37)
        assert out.l2_norm() == pytest.approx(self.f.l2_norm(), rel=1e-12)

    def test_matches_free_space_oracle(self):
        f = self.f
        for _ in range(50):
            f = diffraction_step(f, 0.01)
        oracle = free_space_field(SourceSpec(width=1.0), self.reg, self.grid, 0.5)
        err = (np.linalg.norm(f.values - oracle.values)
               / np.linalg.norm(oracle.values))
        assert err < 1e-8


class TestFreeSpace:
    def test_z_zero_is_source(self):
        reg = wide_regime()
        x = np.linspace(-3, 3, 11)
        vals = free_space(SourceSpec(width=1.0), reg, 0.0, x)
        np.testing.assert_allclose(vals, np.exp(-(0.1 * x) ** 2 / 2.0), rtol=1e-14)

    def test_norm_independent_of_z(self):
        from scipy import integrate
        reg = wide_regime()
        src = SourceSpec(width=1.0)
        def mass(z):
            val, _ = integrate.quad(
                lambda x: np.abs(free_space(src, reg, z, x)) ** 2, -np.inf, np.inf)
            return val
        assert mass(0.7) == pytest.approx(mass(0.0), rel=1e-10)

    def test_custom_profile_unsupported(self):
        reg = wide_regime()
        src = SourceSpec(profile=Profile.CUSTOM, width=1.0,
                         custom=lambda x: np.exp(-x ** 4))
        with pytest.raises(Exception):
            free_space(src, reg, 0.1, 0.0)


class TestPhaseScreenStep:
    def setup_method(self):
        self.reg = wide_regime()
        self.grid = Grid(d=1, n=256, length=160.0, dz=0.01)
        self.f = make_source(SourceSpec(width=1.0), self.reg, self.grid)

    def screen(self, values):
        return PhaseScreen(values=values, delta_z=0.01, kind=ScreenKind.ITO_BROWNIAN)

    def test_zero_screen_identity(self):
        out = phase_screen_step(self.f, self.screen(np.zeros(256)))
        np.testing.assert_array_equal(out.values, self.f.values)

    def test_modulus_preserved_exactly(self, rng):
        # unit-modulus multiplier: equality at machine precision
        scr = self.screen(rng.normal(size=256))
        out = phase_screen_step(self.f, scr)
        np.testing.assert_allclose(np.abs(out.values), np.abs(self.f.values),
                                   rtol=1e-15, atol=0)

    def test_constant_screen_is_global_phase(self, rng):
        scr = rng.normal(size=256)
        base = phase_screen_step(self.f, self.screen(scr))
        shifted = phase_screen_step(self.f, self.screen(scr + 0.7))
        np.testing.assert_allclose(shifted.values, np.exp(0.7j) * base.values,
                                   rtol=1e-13)
        # all (p, p) intensity moments are unchanged at machine precision
        np.testing.assert_allclose(np.abs(shifted.values) ** 2,
                                   np.abs(base.values) ** 2, rtol=1e-13)

    def test_grid_mismatch(self):
        with pytest.raises(GridMismatch):
            phase_screen_step(self.f, self.screen(np.zeros(128)))


class TestPropagateIto:
    def test_free_space_without_medium(self):
        reg = wide_regime()
        grid = Grid(d=1, n=512, length=160.0, dz=0.005)
        u0 = make_source(SourceSpec(width=1.0), reg, grid)
        res = propagate_ito(u0, None, reg, 0.5, SeedPath(1, 0, 0))
        oracle = free_space_field(SourceSpec(width=1.0), reg, grid, 0.5)
        err = (np.linalg.norm(res.field.values - oracle.values)
               / np.linalg.norm(oracle.values))
        assert err < 1e-8

    def test_norm_conserved_with_medium(self, unit_spec):
        reg = wide_regime()
        grid = Grid(d=1, n=256, length=120.0, dz=0.01)
        u0 = make_source(SourceSpec(width=1.0), reg, grid)
        res = propagate_ito(u0, unit_spec, reg, 1.0, SeedPath(3, 0, 0),
                            snapshot_at=(0.5, 1.0))
        assert res.max_norm_drift < 1e-10
        assert len(res.snapshots) == 2
        assert res.snapshots[0].z == pytest.approx(0.5)

    def test_mean_field_decay(self, unit_spec):
        # ensemble mean approaches damped free-space field, 3 SE at probes
        reg = wide_regime()
        grid = Grid(d=1, n=256, length=120.0, dz=0.02)
        u0 = make_source(SourceSpec(width=1.0), reg, grid)
        n_real, z = 1500, 0.4
        acc = np.zeros(grid.shape, dtype=complex)
        sq = np.zeros(grid.shape)
        for r in range(n_real):
            out = propagate_ito(u0.copy(), unit_spec, reg, z, SeedPath(7, r, 0))
            acc += out.field.values
            sq += np.abs(out.field.values) ** 2
        mean = acc / n_real
        se = np.sqrt(np.maximum(sq / n_real - np.abs(mean) ** 2, 0.0) / n_real)
        damping = np.exp(-covariance_R(unit_spec, 0.0) * z / 2.0)
        expected = damping * free_space_field(SourceSpec(width=1.0), reg, grid,
                                              z).values
        probe_idx = [128 + k for k in (-40, -20, -10, -4, 0, 3, 11, 19, 33, 47)]
        for i in probe_idx:
            assert abs(mean[i] - expected[i]) < 3.5 * se[i] + 1e-12

    def test_step_bound_helper(self):
        reg = wide_regime()
        grid = Grid(d=1, n=256, length=120.0, dz=0.01)
        full = ito_max_dz(grid, reg)
        loose = ito_max_dz(grid, reg, xi_max=1.0)
        assert 0 < full < loose


class TestPropagateParaxial:
    def regime(self, theta=0.1):
        return wide_regime(eps=0.1, theta=theta)

    def test_free_space_without_medium(self):
        reg = self.regime()
        grid = Grid(d=1, n=512, length=160.0, dz=0.005)
        u0 = make_source(SourceSpec(width=1.0), reg, grid)
        res = propagate_paraxial(u0, None, reg, 0.5, SeedPath(1, 0, 0))
        oracle = free_space_field(SourceSpec(width=1.0), reg, grid, 0.5)
        err = (np.linalg.norm(res.field.values - oracle.values)
               / np.linalg.norm(oracle.values))
        assert err < 1e-8

    def test_step_too_coarse(self, unit_spec):
        reg = self.regime()
        # bound: ell_z eps theta / (4 eta) = 2.5e-3
        grid = Grid(d=1, n=256, length=120.0, dz=0.01)
        u0 = make_source(SourceSpec(width=1.0), reg, grid)
        with pytest.raises(StepTooCoarse):
            propagate_paraxial(u0, unit_spec, reg, 0.1, SeedPath(0, 0, 0))

    def test_norm_conserved(self, unit_spec):
        reg = self.regime()
        grid = Grid(d=1, n=256, length=120.0, dz=2.5e-3)
        u0 = make_source(SourceSpec(width=1.0), reg, grid)
        res = propagate_paraxial(u0, unit_spec, reg, 0.1, SeedPath(5, 0, 0))
        assert res.max_norm_drift < 1e-10

    def test_deterministic(self, unit_spec):
        reg = self.regime()
        grid = Grid(d=1, n=256, length=120.0, dz=2.5e-3)
        u0 = make_source(SourceSpec(width=1.0), reg, grid)
        a = propagate_paraxial(u0.copy(), unit_spec, reg, 0.05, SeedPath(9, 4, 0))
        b = propagate_paraxial(u0.copy(), unit_spec, reg, 0.05, SeedPath(9, 4, 0))
        np.testing.assert_array_equal(a.field.values, b.field.values)


class TestPhaseCompensate:
    def test_identity_at_z_zero(self):
        reg = wide_regime()
        grid = Grid(d=1, n=256, length=160.0, dz=0.01)
        f = make_source(SourceSpec(width=1.0), reg, grid)
        np.testing.assert_allclose(phase_compensate(f), field_spectrum(f))

    def test_undoes_free_propagation(self):
        reg = wide_regime()
        grid = Grid(d=1, n=512, length=160.0, dz=0.01)
        f0 = make_source(SourceSpec(width=1.0), reg, grid)
        moved = diffraction_step(f0, 0.8)
        comp = phase_compensate(moved)
        ref = field_spectrum(f0)
        np.testing.assert_allclose(comp, ref, atol=1e-12 * np.max(np.abs(ref)))

    def test_modulus_unchanged(self, rng):
        reg = wide_regime()
        grid = Grid(d=1, n=128, length=160.0, dz=0.01)
        vals = rng.normal(size=128) + 1j * rng.normal(size=128)
        f = Field(vals, 0.63, grid, reg)
        np.testing.assert_allclose(np.abs(phase_compensate(f)),
                                   np.abs(field_spectrum(f)), rtol=1e-13)


class TestSampleMacroscopic:
    def setup_method(self):
        self.reg = wide_regime(eps=0.1)
        self.grid = Grid(d=1, n=256, length=160.0, dz=0.01)
        self.f = make_source(SourceSpec(width=1.0), self.reg, self.grid)

    def test_grid_aligned_matches_stored(self):
        dx = self.grid.dx
        offs = [[dx * k] for k in (-8, -1, 0, 3, 17)]
        got = sample_macroscopic(self.f, self.reg, [0.0], offs)
        idx = [128 + k for k in (-8, -1, 0, 3, 17)]
        np.testing.assert_allclose(got, self.f.values[idx], atol=1e-12)

    def test_source_center_value(self):
        got = sample_macroscopic(self.f, self.reg, [0.0], [[0.0]])
        assert got[0] == pytest.approx(1.0, abs=1e-12)

    def test_periodic_alias(self):
        period = self.grid.length / self.reg.eta
        a = sample_macroscopic(self.f, self.reg, [0.0], [[3.7]])
        b = sample_macroscopic(self.f, self.reg, [0.0], [[3.7 + period]])
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)

    def test_margin_violation(self):
        with pytest.raises(PointOutsideDomain):
            sample_macroscopic(self.f, self.reg, [0.0], [[79.0]], margin=2.0)

    def test_off_grid_interpolation_accuracy(self):
        # band-limited interpolation of a smooth beam matches the profile
        got = sample_macroscopic(self.f, self.reg, [0.0], [[0.37], [1.91]])
        expected = np.exp(-(0.1 * np.array([0.37, 1.91])) ** 2 / 2.0)
        np.testing.assert_allclose(got, expected, atol=1e-9)


class TestEnsembleBatchConsistency:
    def test_single_matches_batch_row(self, unit_spec):
        from pxspk import EnsembleConfig, Probe, SolverKind, run_ensemble
        reg = wide_regime()
        grid = Grid(d=1, n=256, length=120.0, dz=0.01)
        src = SourceSpec(width=1.0)
        probes = (Probe.make([0.0], [[0.0], [0.5]]),)
        cfg = EnsembleConfig(n_realizations=5, seed=33, solver=SolverKind.ITO,
                             probes=probes, checkpoints=(0.1,), batch_size=3)
        res = run_ensemble(cfg, unit_spec, reg, src, grid)
        u0 = make_source(src, reg, grid)
        single = propagate_ito(u0, unit_spec, reg, 0.1, SeedPath(33, 4, 0))
        direct = sample_macroscopic(single.field, reg, [0.0], [[0.0], [0.5]])
        np.testing.assert_allclose(res.samples[4, 0], direct, rtol=1e-12, atol=1e-14)
