"""Closed-form and quadrature moment formulas for the scattered field.

Implements the second-moment kernels of the limit theory (kinetic and
diffusive mutual coherence, damped mean field, anomalous-diffusion Green's
function), the finite-epsilon two-point moment of the Ito model evaluated
by tensor quadrature, the Gaussian pairing predictor for arbitrary (p, q)
moments, and the remainder-scale functional. All Fourier conventions are
forward e^{-i xi.x} with (2 pi)^{-d} on the inverse.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidParameter, QuadratureNotConverged, TooLarge, UnsupportedProfile
from .medium import MediumSpec, covariance_R, hessian_Xi, spectral_moment
from .propagate import Profile, SourceSpec, source_profile
from .scaling import RegimeKind, ScalingRegime


class MomentFormula(str, enum.Enum):
    KINETIC_M11 = "kinetic_m11"
    DIFFUSIVE_M11 = "diffusive_m11"
    PRELIMIT_M11 = "prelimit_m11"
    MEAN_FIELD = "mean_field"
    WICK_PREDICTED = "wick_predicted"


@dataclass(frozen=True)
class MomentSpec:
    """Addressing data for one (p, q) moment request."""

    p: int
    q: int
    z: float
    r: tuple = (0.0,)
    r_prime: tuple | None = None
    offsets_x: tuple = ((0.0,),)
    offsets_y: tuple = ((0.0,),)

    def __post_init__(self):
        if self.p < 0 or self.q < 0 or self.p + self.q < 1:
            raise InvalidParameter("need p, q >= 0 with p + q >= 1")


@dataclass(frozen=True)
class AnalyticMoment:
    """Evaluated analytic moment with formula provenance."""

    value: complex
    formula: MomentFormula
    quadrature_error: float = 0.0

    def __post_init__(self):
        if self.quadrature_error < 0:
            raise InvalidParameter("quadrature_error must be nonnegative")


@dataclass(frozen=True)
class CovarianceModel:
    """Mean and second moments of a complex Gaussian vector.

    gamma[j, l] = E[Z_j Z_l*] for the centered vector; pseudo[j, l] =
    E[Z_j Z_l], which must vanish (within tolerance) for the circular
    models the predictor supports.
    """

    mean: np.ndarray
    gamma: np.ndarray
    pseudo: np.ndarray | None = None

    def __post_init__(self):
        gamma = np.asarray(self.gamma)
        scale = max(float(np.max(np.abs(gamma))), 1e-300)
        if gamma.ndim != 2 or gamma.shape[0] != gamma.shape[1]:
            raise InvalidParameter("gamma must be square")
        if np.max(np.abs(gamma - gamma.conj().T)) > 1e-9 * scale:
            raise InvalidParameter("gamma must be Hermitian")
        eigs = np.linalg.eigvalsh(gamma)
        if np.min(eigs) < -1e-9 * scale:
            raise InvalidParameter(f"gamma must be PSD; min eigenvalue {np.min(eigs)}")

    @property
    def size(self) -> int:
        return np.asarray(self.gamma).shape[0]

    def circularity_defect(self) -> float:
        if self.pseudo is None:
            return 0.0
        scale = max(float(np.max(np.abs(self.gamma))), 1e-300)
        return float(np.max(np.abs(self.pseudo))) / scale


@lru_cache(maxsize=8)
def _gl_nodes(n: int):
    """Gauss-Legendre nodes/weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def g_phase(xi, k) -> np.ndarray:
    """Diffraction phase mismatch g(xi, k) = |xi|^2 - |xi - k|^2 = -|k|^2 + 2 k.xi."""
    xi = np.asarray(xi, dtype=float)
    k = np.asarray(k, dtype=float)
    if xi.ndim and k.ndim and xi.shape[-1] == k.shape[-1] and xi.ndim + k.ndim > 2:
        return -np.sum(k ** 2, axis=-1) + 2.0 * np.sum(k * xi, axis=-1)
    return -(k ** 2) + 2.0 * k * xi


def _q_exponent(spec: MediumSpec, eta: float, z: float, tau, zeta,
                n_nodes: int = 32) -> np.ndarray:
    """(z/eta^2) * integral_0^1 [R(tau + 2 s z zeta) - R(0)] ds by fixed GL."""
    s, w = _gl_nodes(n_nodes)
    tau = np.asarray(tau, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    r0 = float(covariance_R(spec, np.zeros(spec.d)))
    arg = tau[None, ...] + 2.0 * z * s.reshape((-1,) + (1,) * tau.ndim) * zeta[None, ...]
    rvals = covariance_R(spec, arg)
    integral = np.tensordot(w, rvals - r0, axes=(0, 0))
    return (z / eta ** 2) * integral


def q_kernel(spec: MediumSpec, regime: ScalingRegime, z: float, tau, zeta) -> float:
    """Coherence kernel Q(tau, zeta) = exp((z/eta^2) int_0^1 [R(tau+2sz zeta)-R(0)] ds).

    Always in (0, 1]; equals 1 at tau = zeta = 0 and decays to
    exp(-z R(0)/eta^2) for large lags.
    """
    if not (z > 0):
        raise InvalidParameter("q_kernel needs z > 0")
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    return float(np.exp(_q_exponent(spec, regime.eta, z, tau, zeta)))


def mean_field(spec: MediumSpec, regime: ScalingRegime, source: SourceSpec,
               z: float, r) -> complex:
    """Limit mean field M_{1,0}(z, r).

    Kinetic/custom regimes: exp(-R(0) z / (2 eta^2)) u0(r). Diffusive
    regime: the asymptotic value 0 (the damped pre-limit value is
    available from mean_field_prelimit).
    """
    if regime.kind == RegimeKind.DIFFUSIVE:
        return 0.0 + 0.0j
    return mean_field_prelimit(spec, regime, source, z, r)


def mean_field_prelimit(spec: MediumSpec, regime: ScalingRegime, source: SourceSpec,
                        z: float, r) -> complex:
    """Damped mean field exp(-R(0) z/(2 eta^2)) u0(r) at finite parameters."""
    r0 = float(covariance_R(spec, np.zeros(spec.d)))
    u0r = complex(np.asarray(source_profile(source, r, d=spec.d)).reshape(()))
    return np.exp(-r0 * z / (2.0 * regime.eta ** 2)) * u0r


def _as_vec(v, d: int) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.shape != (d,):
        raise InvalidParameter(f"expected a point of dimension {d}, got shape {v.shape}")
    return v


def _source_sq_transform(source: SourceSpec, d: int, n: int, domain_widths: float,
                         pad: int = 2):
    """FFT of |u0|^2 on a centered grid; returns (xi_mesh (..., d), ghat, dxi^d).

    The profile is truncated at ``domain_widths`` source widths and
    zero-padded (x ``pad``) to refine the xi resolution.
    """
    w = source.width
    n_core = n // pad
    length = domain_widths * w * pad
    dx = domain_widths * w / n_core
    axis = (np.arange(n) - n // 2) * dx
    if d == 1:
        pts = axis
        mesh_sq = axis ** 2
    else:
        mx, my = np.meshgrid(axis, axis, indexing="ij")
        pts = np.stack([mx, my], axis=-1)
        mesh_sq = mx ** 2 + my ** 2
    g = np.abs(source_profile(source, pts, d=d)) ** 2
    g = np.where(mesh_sq <= (domain_widths * w / 2.0) ** 2, g, 0.0)
    ghat = np.fft.fftn(np.fft.ifftshift(g)) * dx ** d
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=dx)
    if d == 1:
        xi = k
    else:
        k1, k2 = np.meshgrid(k, k, indexing="ij")
        xi = np.stack([k1, k2], axis=-1)
    dxi = 2.0 * np.pi / (n * dx)
    return xi, ghat, dxi ** d


def m11_kinetic(spec: MediumSpec, regime: ScalingRegime, source: SourceSpec,
                z: float, r, x, y, n_grid: int = 2048) -> complex:
    """Kinetic-regime mutual coherence M_{1,1}(z, r, x, y).

    beta > 1: |u0(r)|^2 Q(y - x, 0). beta = 1: the xi-integral of
    FT[|u0|^2](xi) Q(y - x, xi) e^{i xi.r} / (2 pi)^d, evaluated on an
    FFT grid matched to the source bandwidth. Hermitian in (x, y).
    """
    if regime.kind == RegimeKind.DIFFUSIVE or regime.eta != 1.0:
        raise InvalidParameter("m11_kinetic requires a regime with eta = 1")
    if not (z > 0):
        raise InvalidParameter("m11_kinetic needs z > 0")
    d = spec.d
    rv = _as_vec(r, d)
    tau = _as_vec(y, d) - _as_vec(x, d)
    if regime.beta > 1.0:
        u0r = abs(complex(np.asarray(source_profile(source, rv, d=d)).reshape(()))) ** 2
        return u0r * q_kernel(spec, regime, z, tau, np.zeros(d))

    n = n_grid if d == 1 else 256
    xi, ghat, cell = _source_sq_transform(source, d, n, 12.0)
    xi_pts = xi.reshape(-1, d) if d == 2 else xi.reshape(-1, 1)
    expo = _q_exponent(spec, regime.eta, z,
                       np.broadcast_to(tau, xi_pts.shape).copy(), xi_pts)
    qvals = np.exp(expo)
    phase = np.exp(1j * xi_pts @ rv)
    total = np.sum(ghat.reshape(-1) * qvals * phase) * cell / (2.0 * np.pi) ** d
    return complex(total)


def diffusion_kernel_G(spec: MediumSpec, t: float, r) -> np.ndarray:
    """Anisotropic heat kernel of d_t G + (2/3) div(Xi grad) G = 0.

    Diffusivity matrix D = (2/3)(-Xi) is positive definite, so
    G(t, r) = det(4 pi D t)^{-1/2} exp(-r^T (D t)^{-1} r / 4) with unit
    mass for every t > 0.
    """
    if not (t > 0):
        raise InvalidParameter("diffusion_kernel_G needs t > 0")
    d = spec.d
    dmat = (2.0 / 3.0) * (-hessian_Xi(spec))
    dinv = np.linalg.inv(dmat)
    det = np.linalg.det(4.0 * np.pi * dmat * t)
    r = np.asarray(r, dtype=float)
    if d == 1:
        sq = dinv[0, 0] * r ** 2
    else:
        sq = np.einsum("...i,ij,...j->...", r, dinv, r)
    return det ** -0.5 * np.exp(-sq / (4.0 * t))


def m11_diffusive(spec: MediumSpec, regime: ScalingRegime, source: SourceSpec,
                  z: float, r, x, y, n_grid: int = 4096) -> complex:
    """Diffusive-regime mutual coherence M_{1,1}(z, r, x, y).

    beta > 1: |u0(r)|^2 exp((z/2) (y-x)^T Xi (y-x)). beta = 1: the
    quadratic Xi factor at z/8 times the Green's-function convolution of
    |u0|^2 with the +/- 3 i (y-x).r / (4 z) oscillatory prefactors applied
    literally.
    """
    if not (z > 0):
        raise InvalidParameter("m11_diffusive needs z > 0")
    d = spec.d
    rv = _as_vec(r, d)
    tau = _as_vec(y, d) - _as_vec(x, d)
    xi_mat = hessian_Xi(spec)
    quad = float(tau @ xi_mat @ tau)
    if regime.beta > 1.0:
        u0r = abs(complex(np.asarray(source_profile(source, rv, d=d)).reshape(()))) ** 2
        return u0r * np.exp(0.5 * z * quad)

    # beta = 1: e^{z quad / 8} e^{-i phi.r} (G(z^3) * [e^{i phi.r'} |u0|^2])(r)
    phi = 3.0 * tau / (4.0 * z)
    w = source.width
    dmat = (2.0 / 3.0) * (-xi_mat)
    spread = np.sqrt(2.0 * float(np.max(np.linalg.eigvalsh(dmat))) * z ** 3)
    half = 6.0 * w + 8.0 * spread + float(np.max(np.abs(rv)))
    n = n_grid if d == 1 else 256
    axis = (np.arange(n) - n // 2) * (2.0 * half / n)
    cell = (2.0 * half / n) ** d
    if d == 1:
        pts = axis[:, None]
    else:
        mx, my = np.meshgrid(axis, axis, indexing="ij")
        pts = np.stack([mx, my], axis=-1).reshape(-1, 2)
    h = np.abs(source_profile(source, pts if d == 2 else pts[:, 0], d=d)) ** 2
    h = h * np.exp(1j * pts @ phi)
    gvals = diffusion_kernel_G(spec, z ** 3, rv[None, :] - pts if d == 2
                               else (rv[0] - pts[:, 0]))
    conv = np.sum(gvals * h) * cell
    return complex(np.exp(z * quad / 8.0) * np.exp(-1j * phi @ rv) * conv)


def _gl_interval(n: int, halfwidth: float):
    x, w = np.polynomial.legendre.leggauss(n)
    return halfwidth * x, halfwidth * w


def _u0_hat_gaussian(source: SourceSpec, d: int, xi_sq: np.ndarray) -> np.ndarray:
    w = source.width
    return source.amplitude * (2.0 * np.pi) ** (d / 2.0) * w ** d * np.exp(
        -w ** 2 * xi_sq / 2.0)


def _prelimit_value(spec: MediumSpec, regime: ScalingRegime, source: SourceSpec,
                    z: float, rv, rpv, xv, ypv, n_nodes: int) -> complex:
    d = spec.d
    eta, eps, beta = regime.eta, regime.epsilon, regime.beta
    k_half = 8.0 / source.width
    nodes, weights = _gl_interval(n_nodes, k_half)
    if d == 1:
        xi = nodes[:, None]
        wts = weights
    else:
        g1, g2 = np.meshgrid(nodes, nodes, indexing="ij")
        xi = np.stack([g1.ravel(), g2.ravel()], axis=-1)
        wts = np.outer(weights, weights).ravel()
    xi_sq = np.sum(xi ** 2, axis=-1)
    u0h = _u0_hat_gaussian(source, d, xi_sq)

    # factorized one-sided amplitudes; the medium kernel couples xi - zeta
    f = (u0h * np.exp(1j * (xi @ rv + eta * eps ** beta * (xi @ xv)))
         * np.exp(-1j * eta * eps ** (2 * beta - 1) * z * xi_sq)) * wts
    g = (u0h * np.exp(1j * (xi @ rpv + eta * eps ** beta * (xi @ ypv)))
         * np.exp(-1j * eta * eps ** (2 * beta - 1) * z * xi_sq)) * wts

    c = (rv - rpv) / eps ** beta + eta * (xv - ypv)
    s, sw = _gl_nodes(32)
    r0 = float(covariance_R(spec, np.zeros(d)))
    scale = 2.0 * eta * eps ** (beta - 1.0) * z

    n_pts = xi.shape[0]
    kernel = np.empty((n_pts, n_pts))
    chunk = max(1, int(2.0e6 // max(n_pts, 1)))
    for start in range(0, n_pts, chunk):
        stop = min(start + chunk, n_pts)
        diff = xi[start:stop, None, :] - xi[None, :, :]          # (c, n, d)
        arg = c[None, None, None, :] - scale * s[:, None, None, None] * diff[None]
        rvals = covariance_R(spec, arg)                          # (32, c, n)
        expo = (z / eta ** 2) * (np.tensordot(sw, rvals, axes=(0, 0)) - r0)
        kernel[start:stop] = np.exp(expo)
    total = f @ kernel @ np.conj(g)
    return complex(total / (2.0 * np.pi) ** (2 * d))


def m11_prelimit(spec: MediumSpec, regime: ScalingRegime, source: SourceSpec,
                 z: float, r, r_prime, x, y_prime,
                 n_nodes: int = 96, tol: float = 1e-5) -> AnalyticMoment:
    """Finite-parameter two-point moment E[phi(z,r,x) phi*(z,r',y')] of the
    Ito model, by tensor Gauss-Legendre quadrature over the (xi, zeta)
    double integral with a 32-node inner s-quadrature.

    Exact (up to quadrature) for the Ito solver at the mapped physical
    points; reduces to the kinetic formula as eps -> 0 with r = r', and
    its magnitude is bounded by the free-space value since the medium
    kernel lies in (0, 1].
    """
    if not (z > 0):
        raise InvalidParameter("m11_prelimit needs z > 0")
    if source.profile != Profile.GAUSSIAN:
        raise UnsupportedProfile("m11_prelimit supports Gaussian sources")
    d = spec.d
    rv, rpv = _as_vec(r, d), _as_vec(r_prime, d)
    xv, ypv = _as_vec(x, d), _as_vec(y_prime, d)
    if d == 2:
        n_nodes = min(n_nodes, 40)
    coarse = _prelimit_value(spec, regime, source, z, rv, rpv, xv, ypv,
                             max(n_nodes * 2 // 3, 8))
    fine = _prelimit_value(spec, regime, source, z, rv, rpv, xv, ypv, n_nodes)
    err = abs(fine - coarse)
    if err > max(tol, tol * abs(fine)):
        raise QuadratureNotConverged(
            f"prelimit quadrature error {err:.3e} above tolerance {tol:.1e}")
    return AnalyticMoment(value=fine, formula=MomentFormula.PRELIMIT_M11,
                          quadrature_error=err)


def ryser_permanent(a: np.ndarray) -> complex:
    """Permanent by Ryser's inclusion-exclusion with Gray-code updates."""
    a = np.asarray(a)
    p = a.shape[0]
    if p == 0:
        return 1.0 + 0.0j
    if a.shape != (p, p):
        raise InvalidParameter("permanent needs a square matrix")
    row_sums = np.zeros(p, dtype=complex)
    total = 0.0 + 0.0j
    prev_gray = 0
    sign = -1.0 if p % 2 else 1.0
    for i in range(1, 1 << p):
        gray = i ^ (i >> 1)
        changed = gray ^ prev_gray
        j = changed.bit_length() - 1
        if gray & changed:
            row_sums += a[:, j]
        else:
            row_sums -= a[:, j]
        parity = -1.0 if bin(gray).count("1") % 2 else 1.0
        total += parity * np.prod(row_sums)
        prev_gray = gray
    return complex(sign * total)


def wick_predict(model: CovarianceModel, p: int, q: int,
                 circularity_tol: float = 1e-8) -> complex:
    """Gaussian moment E[prod_{j<=p} phi_j prod_{l<=q} phi_l*] from pairings.

    For mean-zero circular models the moment vanishes unless p = q and
    otherwise equals the permanent of gamma[:p, :q]. With a nonzero mean,
    the sum runs over all partial pairings, unpaired factors contributing
    their means. Guarded at p + q <= 16.
    """
    if p < 0 or q < 0 or p + q < 1:
        raise InvalidParameter("need p, q >= 0 with p + q >= 1")
    if p + q > 16:
        raise TooLarge(f"p + q = {p + q} exceeds the permanent cost guard (16)")
    if model.size < max(p, q):
        raise InvalidParameter(f"model has {model.size} components, need {max(p, q)}")
    if model.circularity_defect() > circularity_tol:
        raise InvalidParameter(
            f"pseudo-covariance defect {model.circularity_defect():.2e} "
            "violates circularity")
    mean = np.asarray(model.mean, dtype=complex)
    gamma = np.asarray(model.gamma, dtype=complex)

    if np.all(mean[:max(p, q)] == 0):
        if p != q:
            return 0.0 + 0.0j
        return ryser_permanent(gamma[:p, :p])

    total = 0.0 + 0.0j
    for m in range(0, min(p, q) + 1):
        for rows in itertools.combinations(range(p), m):
            mean_rows = np.prod([mean[j] for j in range(p) if j not in rows],
                                initial=1.0 + 0.0j)
            for cols in itertools.combinations(range(q), m):
                mean_cols = np.prod([np.conj(mean[l]) for l in range(q)
                                     if l not in cols], initial=1.0 + 0.0j)
                sub = gamma[np.ix_(rows, cols)]
                total += ryser_permanent(sub) * mean_rows * mean_cols
    return complex(total)


def remainder_lambda(spec: MediumSpec, p: int, q: int, z: float,
                     alpha: float = 0.0, c_const: float = 1.0) -> float:
    """Remainder-scale functional
    (1/2) C^{p+q} (p+q)^2 z * integral <s><k>^{2+(p+q)alpha} |C_hat|.

    alpha must lie in [0, (d0+1)/(p+q)] with d0 = d; C is caller-supplied
    (the underlying bound fixes it only up to a constant).
    """
    if p + q < 1:
        raise InvalidParameter("need p + q >= 1")
    if not (0.0 <= alpha <= (spec.d + 1) / (p + q)):
        raise InvalidParameter(
            f"alpha = {alpha} outside [0, (d0+1)/(p+q)] with d0 = {spec.d}")
    if not (c_const > 0):
        raise InvalidParameter("C must be positive")
    if z < 0:
        raise InvalidParameter("z must be nonnegative")
    if z == 0:
        return 0.0
    weight = spectral_moment(spec, 2.0 + (p + q) * alpha, 1.0)
    return 0.5 * c_const ** (p + q) * (p + q) ** 2 * z * weight
