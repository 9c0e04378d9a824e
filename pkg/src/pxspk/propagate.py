"""Split-step spectral solvers for the paraxial and Ito-Schrodinger models.

Both solvers advance the transverse field with Strang splitting: a half
step of exact Fourier-space diffraction exp(-i (eta/eps) |xi|^2 dz/2), a
pointwise phase kick from the medium, and another half step. Every factor
has unit modulus, so the discrete L2 norm is conserved per realization to
rounding error. The Ito solver draws white-in-z Brownian screens; the
paraxial solver integrates z-correlated medium blocks over each mapped
step. With the medium switched off, both reduce to exact free-space
propagation, for which the closed-form Gaussian-beam solution serves as
oracle.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft

from .errors import (
    DomainTooSmall,
    GridMismatch,
    InvalidParameter,
    PointOutsideDomain,
    StepTooCoarse,
    UnsupportedProfile,
)
from .grid import Grid
from .medium import (
    MediumSpec,
    PhaseScreen,
    _full_spectrum,
    _screen_spectrum_amplitudes,
)
from .rng import PURPOSE_BLOCK, PURPOSE_SCREEN, SeedPath, generator
from .scaling import ScalingRegime

_FFT_WORKERS: int | None = None


def set_fft_workers(n: int | None):
    """Set the worker count used by batched transforms (CLI --threads)."""
    global _FFT_WORKERS
    _FFT_WORKERS = n if (n is None or n > 0) else None


def _fftn(a, d):
    return sfft.fftn(a, axes=tuple(range(-d, 0)), workers=_FFT_WORKERS)


def _ifftn(a, d):
    return sfft.ifftn(a, axes=tuple(range(-d, 0)), workers=_FFT_WORKERS)


@dataclass
class Field:
    """Complex transverse wavefield sampled on a periodic grid at depth z."""

    values: np.ndarray
    z: float
    grid: Grid
    regime: ScalingRegime

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise GridMismatch(
                f"field shape {self.values.shape} != grid shape {self.grid.shape}")

    def l2_norm(self) -> float:
        """Riemann-sum L2 norm with cell weight (length/n)^d."""
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.cell_volume))

    def copy(self) -> "Field":
        return Field(self.values.copy(), self.z, self.grid, self.regime)


class Profile(str, enum.Enum):
    GAUSSIAN = "gaussian"
    CUSTOM = "custom"


@dataclass(frozen=True)
class SourceSpec:
    """Incident beam profile u0; the solver samples u0(eps^beta x).

    Gaussian profiles have unit peak amplitude unless overridden; custom
    profiles supply a callable on unscaled coordinates and use ``width``
    as their support scale for the domain-margin check.
    """

    profile: Profile = Profile.GAUSSIAN
    width: float = 1.0
    amplitude: float = 1.0
    custom: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if not (self.width > 0):
            raise InvalidParameter(f"width must be positive, got {self.width}")
        if self.profile == Profile.CUSTOM and self.custom is None:
            raise InvalidParameter("custom profile requires a callable")


def source_profile(source: SourceSpec, x, d: int = 1) -> np.ndarray:
    """Evaluate the unscaled profile u0.

    For d = 1, x is a scalar or array of coordinates; for d = 2, x has
    shape (..., 2).
    """
    x = np.asarray(x, dtype=float)
    if source.profile != Profile.GAUSSIAN:
        return source.custom(x)
    if d == 1:
        if x.ndim >= 1 and x.shape[-1] == 1:
            x = x[..., 0]
        sq = x ** 2
    else:
        sq = np.sum(x ** 2, axis=-1)
    return source.amplitude * np.exp(-sq / (2.0 * source.width ** 2))


def _sampled_profile(source: SourceSpec, scale: float, grid: Grid) -> np.ndarray:
    """Sample u0(scale * x) on the grid."""
    pts = grid.points() * scale
    if source.profile == Profile.GAUSSIAN:
        sq = np.sum(pts ** 2, axis=-1)
        return (source.amplitude * np.exp(-sq / (2.0 * source.width ** 2))
                ).astype(np.complex128)
    return np.asarray(source.custom(pts), dtype=np.complex128)


def make_source(source: SourceSpec, regime: ScalingRegime, grid: Grid) -> Field:
    """Sample the incident beam u0(eps^beta x) at z = 0.

    The effective support scale width * eps^-beta must fit the periodic
    domain with a 4x margin; the plane-wave limit (support far exceeding
    the domain, where the sampled field is essentially constant) is also
    accepted.
    """
    scale = regime.epsilon ** regime.beta
    w_eff = source.width / scale
    if not (grid.length >= 4.0 * w_eff or w_eff >= 4.0 * grid.length):
        raise DomainTooSmall(
            f"effective source scale {w_eff:.3g} needs length >= {4 * w_eff:.3g}, "
            f"got {grid.length:.3g}")
    return Field(_sampled_profile(source, scale, grid), 0.0, grid, regime)


def free_space(source: SourceSpec, regime: ScalingRegime, z: float, x,
               d: int = 1) -> np.ndarray:
    """Closed-form Gaussian-beam solution of d_z u = i (eta/eps) Lap u.

    Evaluates the complex-beam-parameter formula at depth z and transverse
    points x (scalar/array for d = 1, shape (..., 2) for d = 2) for the
    scaled source u0(eps^beta x); raises UnsupportedProfile for custom
    profiles.
    """
    if source.profile != Profile.GAUSSIAN:
        raise UnsupportedProfile("free-space oracle requires a Gaussian profile")
    x = np.asarray(x, dtype=float)
    sq = x ** 2 if d == 1 else np.sum(x ** 2, axis=-1)
    w_eff = source.width / regime.epsilon ** regime.beta
    a = regime.eta / regime.epsilon
    denom = w_eff ** 2 + 2.0j * a * z
    return source.amplitude * (w_eff ** 2 / denom) ** (d / 2.0) * np.exp(-sq / (2.0 * denom))


def free_space_field(source: SourceSpec, regime: ScalingRegime, grid: Grid,
                     z: float) -> Field:
    """free_space sampled on a grid, as a Field."""
    pts = grid.points()[..., 0] if grid.d == 1 else grid.points()
    vals = free_space(source, regime, z, pts, d=grid.d)
    return Field(np.asarray(vals, dtype=np.complex128), z, grid, regime)


def diffraction_step(f: Field, dz: float) -> Field:
    """Exact Fourier-space free propagation over dz; norm preserving."""
    mult = np.exp(-1j * (f.regime.eta / f.regime.epsilon) * f.grid.wavenumber_sq() * dz)
    vals = _ifftn(_fftn(f.values, f.grid.d) * mult, f.grid.d)
    return Field(vals, f.z + dz, f.grid, f.regime)


def phase_screen_step(f: Field, screen: PhaseScreen) -> Field:
    """Pointwise multiplication by exp(i * screen); modulus preserving."""
    if screen.values.shape != f.values.shape:
        raise GridMismatch(
            f"screen shape {screen.values.shape} != field shape {f.values.shape}")
    return Field(f.values * np.exp(1j * screen.values), f.z, f.grid, f.regime)


def field_spectrum(f: Field) -> np.ndarray:
    """Continuum-normalized spectrum u_hat(xi_j) on the FFT-ordered grid.

    Centered coordinates: u_hat(xi) = dx^d * sum_x u(x) e^{-i xi.x}.
    """
    shifted = np.fft.ifftshift(f.values)
    return _fftn(shifted, f.grid.d) * f.grid.cell_volume


def phase_compensate(f: Field) -> np.ndarray:
    """Spectrum with the free-propagation phase removed:
    u_tilde(z, xi) = u_hat(z, xi) * exp(i eta z |xi|^2 / eps)."""
    phase = np.exp(1j * (f.regime.eta / f.regime.epsilon) * f.z * f.grid.wavenumber_sq())
    return field_spectrum(f) * phase


def _wrap_points(pts: np.ndarray, length: float) -> np.ndarray:
    return (pts + 0.5 * length) % length - 0.5 * length


def sample_macroscopic(f: Field, regime: ScalingRegime, r, offsets,
                       margin: float = 0.0) -> np.ndarray:
    """Band-limited samples of the macroscopic process Phi(z, r, X).

    Maps each offset x to the physical point eps^-beta r + eta x, wraps it
    onto the periodic domain, and evaluates the field by spectral
    interpolation (exact at grid points). With margin > 0, wrapped points
    closer than ``margin`` to the domain boundary raise PointOutsideDomain.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    offs = np.asarray(offsets, dtype=float)
    if offs.ndim == 1:
        offs = offs[:, None]
    pts = r[None, :] / regime.epsilon ** regime.beta + regime.eta * offs
    pts = _wrap_points(pts, f.grid.length)
    if margin > 0 and np.any(np.abs(pts) > 0.5 * f.grid.length - margin):
        raise PointOutsideDomain(
            f"points {pts} violate margin {margin} on length {f.grid.length}")
    return _interpolate(f.values[None, ...], f.grid, pts)[0]


def _interpolate(values_batch: np.ndarray, grid: Grid, pts: np.ndarray) -> np.ndarray:
    """Spectral interpolation of batched fields at points (P, d)."""
    d = grid.d
    coeffs = _fftn(np.fft.ifftshift(values_batch, axes=tuple(range(-d, 0))), d)
    k = grid.wavenumber_axis()
    if d == 1:
        phases = np.exp(1j * np.outer(k, pts[:, 0]))          # (n, P)
        return coeffs @ phases / grid.n
    p1 = np.exp(1j * np.outer(k, pts[:, 0]))                  # (n, P)
    p2 = np.exp(1j * np.outer(k, pts[:, 1]))
    return np.einsum("bij,ip,jp->bp", coeffs, p1, p2) / grid.n ** 2


@dataclass
class PropagationResult:
    """Final field plus trajectory bookkeeping from one realization."""

    field: Field
    snapshots: list = dc_field(default_factory=list)
    norm_log: list = dc_field(default_factory=list)      # (z, norm/norm0 - 1)
    boundary_mass: float = 0.0                           # max |u|^2 mass near boundary

    @property
    def max_norm_drift(self) -> float:
        return max((abs(r) for _, r in self.norm_log), default=0.0)


def _boundary_fraction(values: np.ndarray, grid: Grid) -> float:
    """|u|^2 mass in the outer 1/8 band of the domain (wraparound monitor)."""
    x = np.abs(grid.axis())
    band = x > 0.375 * grid.length
    inten = np.abs(values) ** 2
    if grid.d == 1:
        edge = float(np.sum(inten[band]))
    else:
        mask = band[:, None] | band[None, :]
        edge = float(np.sum(inten[mask]))
    total = float(np.sum(inten))
    return edge / total if total > 0 else 0.0


def _split_step(values: np.ndarray, grid: Grid, regime: ScalingRegime, dz: float,
                n_steps: int, screens: Callable[[int], np.ndarray],
                checkpoint_steps: Sequence[int] = (),
                record: Callable[[int, np.ndarray], None] | None = None) -> np.ndarray:
    """Strang loop over batched fields (B, *shape); returns final values.

    ``screens(step)`` supplies the phase kick for step index ``step``;
    ``record`` receives physical-space values after each checkpoint step.
    Consecutive half kicks are merged into full kicks away from
    checkpoints.
    """
    d = grid.d
    half = np.exp(-0.5j * (regime.eta / regime.epsilon) * grid.wavenumber_sq() * dz)
    full = half * half
    checkpoints = set(checkpoint_steps)
    spec = _fftn(values, d)
    spec *= half
    for step in range(n_steps):
        vals = _ifftn(spec, d)
        vals *= np.exp(1j * screens(step))
        spec = _fftn(vals, d)
        done = step + 1
        if done == n_steps or done in checkpoints:
            spec *= half
            if done in checkpoints and record is not None:
                record(done, _ifftn(spec, d))
            if done < n_steps:
                spec *= half
        else:
            spec *= full
    return _ifftn(spec, d)


class _ItoScreenSource:
    """Per-realization Brownian screens, one sequential stream each.

    Noise is prefetched in fixed-size step chunks whose size depends only
    on the grid, so the stream layout (and hence every screen) is
    independent of batch composition.
    """

    def __init__(self, spec: MediumSpec, grid: Grid, regime: ScalingRegime,
                 dz: float, seed: int, realizations: Sequence[int]):
        self.amps = _screen_spectrum_amplitudes(spec, grid)
        self.scale = np.sqrt(dz) / regime.eta
        self.d = grid.d
        self.gens = [generator(SeedPath(seed, r, 0), PURPOSE_SCREEN)
                     for r in realizations]
        self.chunk = max(1, min(16, 2 ** 18 // int(np.prod(grid.shape))))
        self._chunk_idx = -1
        self._noise = None

    def _prefetch(self, chunk_idx: int):
        shape = (self.chunk,) + self.amps.shape
        noise = np.empty((len(self.gens),) + shape, dtype=np.complex128)
        for b, gen in enumerate(self.gens):
            parts = gen.standard_normal(size=(2,) + shape)
            noise[b] = (parts[0] + 1j * parts[1]) / np.sqrt(2.0)
        self._noise = noise
        self._chunk_idx = chunk_idx

    def __call__(self, step: int) -> np.ndarray:
        chunk_idx, j = divmod(step, self.chunk)
        if chunk_idx != self._chunk_idx:
            self._prefetch(chunk_idx)
        coef = self.amps * self._noise[:, j]
        fields = np.real(_ifftn(coef, self.d) * self.amps.size)
        return self.scale * fields


class _ParaxialScreenSource:
    """Integrated screens from lazily synthesized z-correlated blocks.

    One solver step spans exactly one slab interval, so the trapezoidal
    integral over step j uses slabs j and j+1 (periodic wrap at the block
    end); successive blocks are independent.
    """

    def __init__(self, spec: MediumSpec, grid: Grid, regime: ScalingRegime,
                 dz: float, seed: int, realizations: Sequence[int]):
        self.spec = spec
        self.grid = grid
        self.regime = regime
        self.delta_t = dz * regime.eta / (regime.epsilon * regime.theta)
        self.slabs_per_block = max(int(np.ceil(8.0 * spec.ell_z / self.delta_t)), 2)
        self.z_extent = self.slabs_per_block * self.delta_t
        self.seed = seed
        self.realizations = list(realizations)
        self.prefactor = np.sqrt(regime.epsilon * regime.theta) / regime.eta ** 1.5
        self._block_idx = -1
        self._samples = None

    def _synthesize(self, block_idx: int):
        m = self.slabs_per_block
        shape = (m,) + self.grid.shape
        batch = np.empty((len(self.realizations),) + shape, dtype=np.complex128)
        kappa = 2.0 * np.pi * np.fft.fftfreq(m, d=self.delta_t)
        k = self.grid.wavenumber_axis()
        mesh = np.meshgrid(kappa, *([k] * self.grid.d), indexing="ij")
        spectrum = _full_spectrum(self.spec, mesh[0], np.stack(mesh[1:], axis=-1))
        amps = np.sqrt(2.0 * spectrum / (self.z_extent * self.grid.length ** self.grid.d))
        for b, r in enumerate(self.realizations):
            gen = generator(SeedPath(self.seed, r, block_idx), PURPOSE_BLOCK)
            parts = gen.standard_normal(size=(2,) + shape)
            batch[b] = (parts[0] + 1j * parts[1]) / np.sqrt(2.0)
        batch *= amps
        self._samples = np.real(
            sfft.ifftn(batch, axes=tuple(range(1, 2 + self.grid.d)),
                       workers=_FFT_WORKERS) * amps.size)
        self._block_idx = block_idx

    def __call__(self, step: int) -> np.ndarray:
        m = self.slabs_per_block
        block_idx, j = divmod(step, m)
        if block_idx != self._block_idx:
            self._synthesize(block_idx)
        nu = self._samples
        right = nu[:, (j + 1) % m]
        integral = 0.5 * self.delta_t * (nu[:, j] + right)
        return self.prefactor * integral


def _steps_for(z_final: float, dz: float) -> int:
    n = int(round(z_final / dz))
    if n < 1 or abs(n * dz - z_final) > 1e-9 * max(z_final, dz):
        raise InvalidParameter(f"z_final = {z_final} is not a multiple of dz = {dz}")
    return n


def ito_max_dz(grid: Grid, regime: ScalingRegime, xi_max: float | None = None) -> float:
    """Step bound keeping the per-step diffraction phase below pi/4.

    xi_max defaults to the grid Nyquist wavevector; for beams whose
    spectrum stays well below Nyquist a smaller effective bandwidth gives
    a less conservative bound.
    """
    if xi_max is None:
        xi_max = np.pi / grid.dx
    return (np.pi / 4.0) * regime.epsilon / (regime.eta * xi_max ** 2)


def _run_solver(u0: Field, screens, z_final: float, snapshot_at: Sequence[float],
                dz: float) -> PropagationResult:
    grid, regime = u0.grid, u0.regime
    n_steps = _steps_for(z_final, dz)
    snap_steps = {}
    for zq in snapshot_at:
        s = int(round(zq / dz))
        if abs(s * dz - zq) > 1e-9 * max(zq, dz) or not (0 < s <= n_steps):
            raise InvalidParameter(f"snapshot depth {zq} not on the step grid")
        snap_steps[s] = zq
    norm0 = u0.l2_norm()
    result = PropagationResult(field=u0)
    boundary = [0.0]

    def record(done: int, vals_batch: np.ndarray):
        f = Field(vals_batch[0].copy(), u0.z + done * dz, grid, regime)
        result.snapshots.append(f)
        result.norm_log.append((f.z, f.l2_norm() / norm0 - 1.0))
        boundary[0] = max(boundary[0], _boundary_fraction(f.values, grid))

    final = _split_step(u0.values[None, ...].astype(np.complex128), grid, regime,
                        dz, n_steps, screens,
                        checkpoint_steps=sorted(snap_steps), record=record)
    f_final = Field(final[0], u0.z + n_steps * dz, grid, regime)
    result.field = f_final
    result.norm_log.append((f_final.z, f_final.l2_norm() / norm0 - 1.0))
    result.boundary_mass = max(boundary[0], _boundary_fraction(f_final.values, grid))
    return result


def propagate_ito(u0: Field, spec: MediumSpec | None, regime: ScalingRegime,
                  z_final: float, seed_path: SeedPath,
                  snapshot_at: Sequence[float] = ()) -> PropagationResult:
    """Propagate one realization of the Ito-Schrodinger model.

    Strang splitting with Brownian screens of variance dz*R(0)/eta^2 per
    step; per-path evolution is unitary and the Ito damping of the mean
    field emerges in expectation. With spec=None (or sigma_c = 0 handled
    by the caller) this is exact free-space propagation.
    """
    dz = u0.grid.dz
    if spec is None:
        screens = lambda step: np.zeros((1,) + u0.grid.shape)
    else:
        screens = _ItoScreenSource(spec, u0.grid, regime, dz,
                                   seed_path.seed, [seed_path.realization])
    return _run_solver(u0, screens, z_final, snapshot_at, dz)


def propagate_paraxial(u0: Field, spec: MediumSpec | None, regime: ScalingRegime,
                       z_final: float, seed_path: SeedPath,
                       snapshot_at: Sequence[float] = ()) -> PropagationResult:
    """Propagate one realization of the paraxial model with z-correlated
    medium blocks.

    Requires dz <= ell_z * eps * theta / (4 eta) so each mapped step
    resolves the longitudinal correlation length (StepTooCoarse
    otherwise).
    """
    dz = u0.grid.dz
    if spec is not None:
        bound = spec.ell_z * regime.epsilon * regime.theta / (4.0 * regime.eta)
        if dz > bound * (1 + 1e-12):
            raise StepTooCoarse(f"dz = {dz} exceeds ell_z*eps*theta/(4 eta) = {bound}")
        screens = _ParaxialScreenSource(spec, u0.grid, regime, dz,
                                        seed_path.seed, [seed_path.realization])
    else:
        screens = lambda step: np.zeros((1,) + u0.grid.shape)
    return _run_solver(u0, screens, z_final, snapshot_at, dz)
