"""Dimensionless regime algebra and assumption validation.

The propagation model is controlled by three small parameters: theta (the
inverse of carrier wavenumber times correlation length), epsilon (beam
width ratio), and eta (order parameter distinguishing the kinetic regime,
eta = 1, from the diffusive regime, eta = 1/log|log epsilon|). The
canonical coupling saturates theta = epsilon^gamma; the Custom kind
decouples all three for desk experiments.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameter
from .medium import MediumSpec, covariance_R, hessian_Xi, spectral_moment, spectrum_Rhat


class RegimeKind(str, enum.Enum):
    KINETIC = "kinetic"
    DIFFUSIVE = "diffusive"
    CUSTOM = "custom"


def _diffusive_eta(epsilon: float) -> float:
    return 1.0 / math.log(abs(math.log(epsilon)))


@dataclass(frozen=True)
class ScalingRegime:
    """Resolved (theta, epsilon, eta, beta, gamma) tuple with its kind."""

    theta: float
    epsilon: float
    eta: float
    beta: float = 1.0
    gamma: float = 1.0
    kind: RegimeKind = RegimeKind.CUSTOM

    def __post_init__(self):
        if not (0 < self.theta <= 0.5):
            raise InvalidParameter(f"theta must be in (0, 1/2], got {self.theta}")
        if not (0 < self.epsilon <= 0.5):
            raise InvalidParameter(f"epsilon must be in (0, 1/2], got {self.epsilon}")
        if not (0 < self.eta <= 1.0):
            raise InvalidParameter(f"eta must be in (0, 1], got {self.eta}")
        if self.beta < 1.0:
            raise InvalidParameter(f"beta must be >= 1, got {self.beta}")
        if not (self.gamma > 0):
            raise InvalidParameter(f"gamma must be positive, got {self.gamma}")
        if self.kind == RegimeKind.KINETIC and self.eta != 1.0:
            raise InvalidParameter("kinetic regime requires eta = 1")
        if self.kind == RegimeKind.DIFFUSIVE:
            target = _diffusive_eta(self.epsilon)
            if abs(self.eta - target) > 1e-12:
                raise InvalidParameter(
                    f"diffusive regime requires eta = 1/log|log eps| = {target}")
        if self.kind != RegimeKind.CUSTOM and self.theta > self.epsilon ** self.gamma * (1 + 1e-12):
            raise InvalidParameter(
                f"coupling violated: theta={self.theta} > epsilon^gamma="
                f"{self.epsilon ** self.gamma}")


@dataclass(frozen=True)
class PhysicalScenario:
    """Laboratory-scale description of one propagation scenario.

    k0: carrier wavenumber (1/m); l0: smallest turbulence scale (m);
    w0: beam width (m); Z: dimensionless propagation count (physical
    distance = l0 * Z); sigma: RMS of the refractive-index fluctuations.
    """

    k0: float
    l0: float
    w0: float
    Z: float
    sigma: float

    def __post_init__(self):
        for name in ("k0", "l0", "w0", "Z", "sigma"):
            if not (getattr(self, name) > 0):
                raise InvalidParameter(f"{name} must be positive")


def regime_from_theta(theta: float, gamma: float, kind: RegimeKind,
                      beta: float = 1.0) -> ScalingRegime:
    """Resolve a regime from theta with the canonical coupling
    epsilon = theta^(1/gamma) (saturating theta <= epsilon^gamma)."""
    if not (0 < theta <= 0.5):
        raise InvalidParameter(f"theta must be in (0, 1/2], got {theta}")
    if not (gamma > 0):
        raise InvalidParameter(f"gamma must be positive, got {gamma}")
    epsilon = theta ** (1.0 / gamma)
    if not (0 < epsilon <= 0.5):
        raise InvalidParameter(f"epsilon = theta^(1/gamma) = {epsilon} outside (0, 1/2]")
    if kind == RegimeKind.KINETIC:
        eta = 1.0
    elif kind == RegimeKind.DIFFUSIVE:
        eta = _diffusive_eta(epsilon)
        if not (0 < eta <= 1.0):
            raise InvalidParameter(
                f"diffusive eta = {eta} outside (0, 1]; epsilon too large")
    else:
        raise InvalidParameter("regime_from_theta resolves kinetic or diffusive kinds")
    return ScalingRegime(theta=theta, epsilon=epsilon, eta=eta, beta=beta,
                         gamma=gamma, kind=kind)


def physical_to_dimensionless(s: PhysicalScenario):
    """Map a physical scenario to (theta, epsilon, eta, consistency_residual).

    theta = 1/(k0 l0), epsilon = l0/w0, eta = Z/(k0 w0). The residual
    |sigma^2 Z^3 l0^2 / w0^2 - 1| measures how far the scenario sits from
    the exact correspondence with the dimensionless model; epsilon >= 1
    means the wide-beam premise fails.
    """
    theta = 1.0 / (s.k0 * s.l0)
    epsilon = s.l0 / s.w0
    eta = s.Z / (s.k0 * s.w0)
    residual = abs(s.sigma ** 2 * s.Z ** 3 * s.l0 ** 2 / s.w0 ** 2 - 1.0)
    return theta, epsilon, eta, residual


@dataclass
class ValidationReport:
    """Outcome of the medium/regime assumption checks."""

    checks: list = field(default_factory=list)   # (name, passed, detail)
    metrics: dict = field(default_factory=dict)

    def add(self, name: str, passed: bool, detail: str = ""):
        self.checks.append((name, bool(passed), detail))

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def failures(self):
        return [(n, d) for n, ok, d in self.checks if not ok]


def validate_assumptions(spec: MediumSpec, regime: ScalingRegime,
                         alpha: float = 1.0, c_const: float = 1.0) -> ValidationReport:
    """Check the standing assumptions on the medium and the regime.

    Probes Bochner positivity of Rhat, finiteness of the (d+3, 1) spectral
    moment, negative definiteness of Xi, maximality of R at 0, and the
    regime coupling. The unenforceable smallness condition
    theta^alpha * exp(c/eta^2) is reported as a metric only, with alpha
    and c supplied by the caller.
    """
    report = ValidationReport()

    k_probe = np.linspace(-12.0 / spec.ell_x, 12.0 / spec.ell_x, 97)
    if spec.d == 1:
        kk = k_probe
    else:
        kk = np.stack(np.meshgrid(k_probe, k_probe, indexing="ij"), axis=-1)
    rhat = spectrum_Rhat(spec, kk)
    report.add("bochner_nonnegative", bool(np.all(rhat >= 0)),
               f"min Rhat on probe grid = {float(np.min(rhat)):.3e}")

    try:
        lam = spectral_moment(spec, spec.d + 3, 1)
        report.add("spectral_moment_finite", np.isfinite(lam),
                   f"moment(d+3, 1) = {lam:.6e}")
    except Exception as exc:  # pragma: no cover - Gaussian family always converges
        report.add("spectral_moment_finite", False, str(exc))

    xi = hessian_Xi(spec)
    eigs = np.linalg.eigvalsh(xi)
    report.add("xi_negative_definite", bool(np.all(eigs < 0)),
               f"eigenvalues = {eigs}")

    x_probe = np.linspace(0.0, 10.0 * spec.ell_x, 64)[1:]
    if spec.d == 2:
        x_probe = np.stack([x_probe, 0.3 * x_probe], axis=-1)
    r0 = float(covariance_R(spec, np.zeros(spec.d)))
    report.add("R_maximal_at_zero",
               bool(np.all(covariance_R(spec, x_probe) <= r0 + 1e-15)),
               f"R(0) = {r0:.6e}")

    coupling_ok = regime.kind == RegimeKind.CUSTOM or (
        regime.theta <= regime.epsilon ** regime.gamma * (1 + 1e-12))
    if regime.kind == RegimeKind.CUSTOM:
        coupling_ok = regime.theta <= regime.epsilon ** regime.gamma * (1 + 1e-12)
        report.add("regime_coupling", coupling_ok,
                   f"theta = {regime.theta}, epsilon^gamma = {regime.epsilon ** regime.gamma}")
    else:
        report.add("regime_coupling", True, "enforced by construction")

    report.metrics["theta_alpha_exp_c_over_eta2"] = (
        regime.theta ** alpha * math.exp(c_const / regime.eta ** 2))
    report.metrics["resolved"] = {
        "theta": regime.theta, "epsilon": regime.epsilon, "eta": regime.eta,
        "beta": regime.beta, "kind": regime.kind.value,
    }
    return report
