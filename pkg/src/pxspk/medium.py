"""Gaussian random medium: covariance model, spectra, and discrete synthesis.

The shipped family is a separable Gaussian covariance in the longitudinal
and transverse lags,

    C(s, x) = sigma_c^2 * exp(-s^2 / (2 ell_z^2)) * exp(-|x|^2 / (2 ell_x^2)),

which has closed forms for every derived quantity: the lateral covariance
R(x) = integral of C over s, its transverse spectrum Rhat(k) >= 0, and the
Hessian Xi = grad^2 R(0) (negative definite). Realizations are synthesized
spectrally on periodic grids, so stationarity is exact on the torus and the
target covariance is the periodization of C.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import (
    GridTooCoarse,
    InvalidParameter,
    QuadratureNotConverged,
    StepOutsideBlock,
)
from .grid import Grid
from .rng import PURPOSE_BLOCK, PURPOSE_SCREEN, SeedPath, generator


class MediumFamily(str, enum.Enum):
    GAUSSIAN_GAUSSIAN = "gaussian"


class ScreenKind(str, enum.Enum):
    PARAXIAL_INTEGRATED = "paraxial_integrated"
    ITO_BROWNIAN = "ito_brownian"


@dataclass(frozen=True)
class MediumSpec:
    """Parameters of the random medium covariance.

    sigma_c is the pointwise RMS of the fluctuations, ell_z / ell_x the
    longitudinal / transverse correlation lengths, d the transverse
    dimension.
    """

    sigma_c: float
    ell_z: float
    ell_x: float
    d: int = 1
    family: MediumFamily = MediumFamily.GAUSSIAN_GAUSSIAN

    def __post_init__(self):
        if not (self.sigma_c > 0):
            raise InvalidParameter(f"sigma_c must be positive, got {self.sigma_c}")
        if not (self.ell_z > 0):
            raise InvalidParameter(f"ell_z must be positive, got {self.ell_z}")
        if not (self.ell_x > 0):
            raise InvalidParameter(f"ell_x must be positive, got {self.ell_x}")
        if self.d not in (1, 2):
            raise InvalidParameter(f"d must be 1 or 2, got {self.d}")


@dataclass(frozen=True)
class FieldBlock:
    """One periodic realization slab of the medium.

    samples[j] holds the fluctuation field on the transverse grid at
    longitudinal offset j*delta_s from t0 (medium coordinates). The block
    is periodic in z with period z_extent = n_slabs * delta_s.
    """

    samples: np.ndarray
    z_extent: float
    delta_s: float
    t0: float
    grid: Grid
    seed_path: SeedPath

    @property
    def n_slabs(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class PhaseScreen:
    """Multiplicative phase (radians) on the transverse grid for one step."""

    values: np.ndarray
    delta_z: float
    kind: ScreenKind


def _lag_sq(spec: MediumSpec, x) -> np.ndarray:
    """Squared norm of transverse lags; accepts scalars, (...,) for d=1,
    or (..., d) arrays."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        if spec.d != 1:
            raise InvalidParameter("scalar lag only valid for d=1")
        return x ** 2
    if x.shape[-1] == spec.d:
        return np.sum(x ** 2, axis=-1)
    if spec.d == 1:
        return x ** 2
    raise InvalidParameter(f"lag shape {x.shape} incompatible with d={spec.d}")


def covariance_profile(spec: MediumSpec, s, x) -> np.ndarray:
    """Full covariance C(s, x) of the fluctuation field."""
    s = np.asarray(s, dtype=float)
    return spec.sigma_c ** 2 * np.exp(-s ** 2 / (2.0 * spec.ell_z ** 2)) * np.exp(
        -_lag_sq(spec, x) / (2.0 * spec.ell_x ** 2)
    )


def covariance_R(spec: MediumSpec, x) -> np.ndarray:
    """Lateral covariance R(x) = integral of C(s, x) over s.

    R is even, maximal at 0, and R(0) = sqrt(2*pi) * ell_z * sigma_c^2.
    """
    r0 = np.sqrt(2.0 * np.pi) * spec.ell_z * spec.sigma_c ** 2
    return r0 * np.exp(-_lag_sq(spec, x) / (2.0 * spec.ell_x ** 2))


def spectrum_Rhat(spec: MediumSpec, k) -> np.ndarray:
    """Power spectral density Rhat(k) = FT[R](k), nonnegative by Bochner.

    Fourier convention: forward e^{-ik.x}, so (2*pi)^{-d} * integral of
    Rhat equals R(0).
    """
    r0 = np.sqrt(2.0 * np.pi) * spec.ell_z * spec.sigma_c ** 2
    amp = r0 * (2.0 * np.pi) ** (spec.d / 2.0) * spec.ell_x ** spec.d
    return amp * np.exp(-_lag_sq(spec, k) * spec.ell_x ** 2 / 2.0)


def hessian_Xi(spec: MediumSpec) -> np.ndarray:
    """Hessian of R at the origin; strictly negative definite."""
    r0 = float(covariance_R(spec, np.zeros(spec.d)))
    return -(r0 / spec.ell_x ** 2) * np.eye(spec.d)


def _transverse_density(spec: MediumSpec, s, k) -> np.ndarray:
    """Symmetric-convention transverse spectral density of C(s, .).

    Normalized so that the (0,0) weighted integral equals
    sigma_c^2 * sqrt(2*pi) * ell_z * (2*pi)^{d/2}.
    """
    s = np.asarray(s, dtype=float)
    amp = spec.sigma_c ** 2 * spec.ell_x ** spec.d
    return amp * np.exp(-s ** 2 / (2.0 * spec.ell_z ** 2)) * np.exp(
        -_lag_sq(spec, k) * spec.ell_x ** 2 / 2.0
    )


_QUAD_ATOL = 1e-10


def _quad(f, a, b, atol=_QUAD_ATOL):
    val, err = integrate.quad(f, a, b, epsabs=atol, epsrel=1e-12, limit=200)
    if not np.isfinite(val) or err > max(atol, 1e-8 * abs(val)):
        raise QuadratureNotConverged(f"quadrature error {err:.2e} for value {val:.6e}")
    return val


def spectral_moment(spec: MediumSpec, n_k: float, n_s: float) -> float:
    """Weighted integrability functional of the medium spectrum.

    Returns the integral of <k>^n_k <s>^n_s |C_hat(s, k)| over s and k,
    where <u> = sqrt(1 + |u|^2) and C_hat is the transverse spectral
    density of the covariance. Finite for every order in the Gaussian
    family; real exponents are accepted.
    """
    if n_k < 0 or n_s < 0:
        raise InvalidParameter("moment orders must be nonnegative")
    lz, lx = spec.ell_z, spec.ell_x

    s_int = _quad(lambda s: (1.0 + s * s) ** (n_s / 2.0) * np.exp(-s * s / (2 * lz * lz)),
                  0.0, np.inf) * 2.0
    if spec.d == 1:
        k_int = _quad(lambda k: (1.0 + k * k) ** (n_k / 2.0) * np.exp(-k * k * lx * lx / 2),
                      0.0, np.inf) * 2.0
    else:
        k_int = 2.0 * np.pi * _quad(
            lambda rho: (1.0 + rho * rho) ** (n_k / 2.0)
            * np.exp(-rho * rho * lx * lx / 2) * rho,
            0.0, np.inf)
    return spec.sigma_c ** 2 * lx ** spec.d * s_int * k_int


def _full_spectrum(spec: MediumSpec, kappa, k) -> np.ndarray:
    """(d+1)-dimensional power spectrum of C (forward e^{-i.}, plain measure)."""
    kappa = np.asarray(kappa, dtype=float)
    amp = (
        spec.sigma_c ** 2
        * np.sqrt(2.0 * np.pi) * spec.ell_z
        * (2.0 * np.pi) ** (spec.d / 2.0) * spec.ell_x ** spec.d
    )
    return amp * np.exp(-kappa ** 2 * spec.ell_z ** 2 / 2.0) * np.exp(
        -_lag_sq(spec, k) * spec.ell_x ** 2 / 2.0
    )


def _check_transverse_grid(spec: MediumSpec, grid: Grid):
    if grid.d != spec.d:
        raise InvalidParameter(f"grid d={grid.d} does not match medium d={spec.d}")
    if grid.length < 8.0 * spec.ell_x:
        raise GridTooCoarse(
            f"transverse length {grid.length} < 8*ell_x = {8 * spec.ell_x}")


def _screen_spectrum_amplitudes(spec: MediumSpec, grid: Grid) -> np.ndarray:
    """sqrt(2 * Rhat(k) / L^d) on the FFT wavevector grid."""
    k = grid.wavenumber_axis()
    mesh = np.meshgrid(*([k] * grid.d), indexing="ij")
    rhat = spectrum_Rhat(spec, np.stack(mesh, axis=-1))
    return np.sqrt(2.0 * rhat / grid.length ** grid.d)


def _real_stationary_field(amps: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """Real Gaussian field with spectral amplitudes ``amps`` from circular
    complex noise; exact periodized covariance on the torus."""
    coef = amps * noise
    return np.real(np.fft.ifftn(coef) * coef.size)


def synthesize_block(
    spec: MediumSpec,
    grid: Grid,
    z_extent: float,
    n_slabs: int,
    seed_path: SeedPath,
    rng: np.random.Generator | None = None,
) -> FieldBlock:
    """Synthesize one periodic (d+1)-dimensional realization block.

    The block is stationary on the torus [0, z_extent) x [0, L)^d with
    covariance equal to the periodized C. Deterministic in seed_path;
    the block with index b starts at t0 = b * z_extent.

    Raises GridTooCoarse unless the transverse length is >= 8 ell_x, the
    slab spacing <= ell_z/4, and z_extent >= 8 ell_z.
    """
    _check_transverse_grid(spec, grid)
    if n_slabs < 2 or not (z_extent > 0):
        raise InvalidParameter("need n_slabs >= 2 and positive z_extent")
    delta_s = z_extent / n_slabs
    if delta_s > spec.ell_z / 4.0:
        raise GridTooCoarse(f"slab spacing {delta_s} > ell_z/4 = {spec.ell_z / 4}")
    if z_extent < 8.0 * spec.ell_z:
        raise GridTooCoarse(f"z_extent {z_extent} < 8*ell_z = {8 * spec.ell_z}")

    kappa = 2.0 * np.pi * np.fft.fftfreq(n_slabs, d=delta_s)
    k = grid.wavenumber_axis()
    mesh = np.meshgrid(kappa, *([k] * grid.d), indexing="ij")
    spectrum = _full_spectrum(spec, mesh[0], np.stack(mesh[1:], axis=-1))
    amps = np.sqrt(2.0 * spectrum / (z_extent * grid.length ** grid.d))

    gen = rng if rng is not None else generator(seed_path, PURPOSE_BLOCK)
    parts = gen.standard_normal(size=(2,) + amps.shape)
    noise = (parts[0] + 1j * parts[1]) / np.sqrt(2.0)
    samples = _real_stationary_field(amps, noise)
    return FieldBlock(
        samples=samples,
        z_extent=z_extent,
        delta_s=delta_s,
        t0=seed_path.block * z_extent,
        grid=grid,
        seed_path=seed_path,
    )


def brownian_screen(
    spec: MediumSpec,
    grid: Grid,
    delta_z: float,
    eta: float,
    seed_path: SeedPath,
    rng: np.random.Generator | None = None,
) -> PhaseScreen:
    """Brownian increment screen for the Ito solver.

    Values are mean-zero Gaussian with covariance (delta_z / eta^2) *
    R(x - y) periodized on the grid; screens with distinct block indices
    are independent.
    """
    _check_transverse_grid(spec, grid)
    if not (delta_z > 0) or not (eta > 0):
        raise InvalidParameter("delta_z and eta must be positive")
    amps = _screen_spectrum_amplitudes(spec, grid)
    gen = rng if rng is not None else generator(seed_path, PURPOSE_SCREEN)
    parts = gen.standard_normal(size=(2,) + amps.shape)
    noise = (parts[0] + 1j * parts[1]) / np.sqrt(2.0)
    values = (np.sqrt(delta_z) / eta) * _real_stationary_field(amps, noise)
    return PhaseScreen(values=values, delta_z=delta_z, kind=ScreenKind.ITO_BROWNIAN)


def _piecewise_linear_integral(samples: np.ndarray, delta_s: float,
                               a: float, b: float) -> np.ndarray:
    """Integrate the periodic piecewise-linear interpolant of ``samples``
    (slab-major) over [a, b], with 0 <= a <= b <= period."""
    m = samples.shape[0]

    def value_at(t):
        j = int(np.floor(t / delta_s))
        frac = t / delta_s - j
        return (1.0 - frac) * samples[j % m] + frac * samples[(j + 1) % m]

    ja = int(np.ceil(a / delta_s - 1e-12))
    jb = int(np.floor(b / delta_s + 1e-12))
    total = np.zeros_like(samples[0])
    if ja > jb:
        # interval inside a single segment
        return 0.5 * (value_at(a) + value_at(b)) * (b - a)
    # partial leading segment
    ta = ja * delta_s
    if ta - a > 1e-12 * delta_s:
        total = total + 0.5 * (value_at(a) + samples[ja % m]) * (ta - a)
    # whole segments: composite trapezoid; only the right edge can wrap
    if jb > ja:
        interior = samples[ja + 1:jb].sum(axis=0)
        total = total + delta_s * (
            0.5 * samples[ja % m] + interior + 0.5 * samples[jb % m])
    # partial trailing segment
    tb = jb * delta_s
    if b - tb > 1e-12 * delta_s:
        total = total + 0.5 * (samples[jb % m] + value_at(b)) * (b - tb)
    return total


def integrated_screen(block: FieldBlock, regime, z: float, dz: float) -> PhaseScreen:
    """Phase screen from the z-integral of the block over one solver step.

    The solver interval [z, z+dz] maps to medium coordinates
    [eta z/(eps theta), eta (z+dz)/(eps theta)], which must lie inside the
    block; the screen is (eps theta)^{1/2} eta^{-3/2} times the trapezoidal
    integral of the fluctuation field over the mapped interval.
    """
    eta, eps, theta = regime.eta, regime.epsilon, regime.theta
    scale = eta / (eps * theta)
    a = z * scale - block.t0
    b = (z + dz) * scale - block.t0
    tol = 1e-9 * block.z_extent
    if a < -tol or b > block.z_extent + tol or b < a:
        raise StepOutsideBlock(
            f"mapped interval [{a:.6g}, {b:.6g}] outside block [0, {block.z_extent:.6g}]")
    a = min(max(a, 0.0), block.z_extent)
    b = min(max(b, 0.0), block.z_extent)
    integral = _piecewise_linear_integral(block.samples, block.delta_s, a, b)
    prefactor = np.sqrt(eps * theta) / eta ** 1.5
    return PhaseScreen(values=prefactor * integral, delta_z=dz,
                       kind=ScreenKind.PARAXIAL_INTEGRATED)
