"""Monte Carlo orchestration and statistical estimators.

run_ensemble propagates independent realizations (batched internally for
speed, but every realization's noise stream is keyed by its global index,
so results are identical across batch splits) and records the macroscopic
field at the configured probes and depth checkpoints. Estimators work on
the recorded sample arrays: empirical (p, q) moments with jackknife
errors, the scintillation index, a KS test against the exponential
intensity law, circularity and cross-center independence tests, and a
diagnostic Hoelder-increment probe.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np
from scipy import special

from .errors import (
    DegenerateIntensity,
    InsufficientSamples,
    InvalidParameter,
)
from .grid import Grid
from .medium import MediumSpec
from .propagate import (
    Field,
    SourceSpec,
    _boundary_fraction,
    _interpolate,
    _ItoScreenSource,
    _ParaxialScreenSource,
    _split_step,
    _steps_for,
    _wrap_points,
    make_source,
)
from .scaling import ScalingRegime


class SolverKind(str, enum.Enum):
    ITO = "ito"
    PARAXIAL = "paraxial"


@dataclass(frozen=True)
class Probe:
    """One macroscopic center r with a list of offsets X."""

    r: tuple
    offsets: tuple

    @staticmethod
    def make(r, offsets) -> "Probe":
        r = tuple(np.atleast_1d(np.asarray(r, dtype=float)).tolist())
        offs = tuple(tuple(np.atleast_1d(np.asarray(o, dtype=float)).tolist())
                     for o in offsets)
        return Probe(r=r, offsets=offs)


@dataclass(frozen=True)
class EnsembleConfig:
    n_realizations: int
    seed: int
    solver: SolverKind = SolverKind.ITO
    probes: tuple = ()
    checkpoints: tuple = ()
    batch_size: int = 64

    def __post_init__(self):
        if self.n_realizations < 1:
            raise InvalidParameter("n_realizations must be >= 1")
        if not self.probes:
            raise InvalidParameter("probe set must be nonempty")
        if not self.checkpoints:
            raise InvalidParameter("need at least one z checkpoint")
        if list(self.checkpoints) != sorted(self.checkpoints) or self.checkpoints[0] <= 0:
            raise InvalidParameter("checkpoints must be positive and ascending")


@dataclass
class MomentEstimate:
    value: complex
    stderr: float
    n_samples: int

    def __post_init__(self):
        if self.stderr < 0:
            raise InvalidParameter("stderr must be nonnegative")


@dataclass
class TestResult:
    statistic: float
    p_value: float
    n: int
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 <= self.p_value <= 1.0):
            raise InvalidParameter(f"p_value {self.p_value} outside [0, 1]")


@dataclass
class EnsembleResult:
    """Recorded macroscopic samples, the mergeable ensemble accumulator.

    samples[i, c, k] is phi for realization offset+i at checkpoint c and
    flattened probe point k; point_index maps (probe index, offset index)
    to k. Merging concatenates along realizations in index order, so any
    shard split reproduces the monolithic run bit for bit.
    """

    samples: np.ndarray
    checkpoints: tuple
    probes: tuple
    seed: int
    solver: SolverKind
    realization_offset: int = 0
    max_norm_drift: float = 0.0
    max_boundary_mass: float = 0.0

    def point_index(self, probe_i: int, offset_j: int) -> int:
        return sum(len(p.offsets) for p in self.probes[:probe_i]) + offset_j

    def at(self, checkpoint_i: int) -> np.ndarray:
        """(n_realizations, n_points) view at one checkpoint."""
        return self.samples[:, checkpoint_i, :]

    @property
    def n_realizations(self) -> int:
        return self.samples.shape[0]


def merge_ensembles(first: EnsembleResult, second: EnsembleResult) -> EnsembleResult:
    """Concatenate two shards with contiguous realization ranges."""
    if (first.seed != second.seed or first.solver != second.solver
            or first.checkpoints != second.checkpoints or first.probes != second.probes):
        raise InvalidParameter("shards come from different configurations")
    if second.realization_offset != first.realization_offset + first.n_realizations:
        raise InvalidParameter("shards are not contiguous in realization index")
    return EnsembleResult(
        samples=np.concatenate([first.samples, second.samples], axis=0),
        checkpoints=first.checkpoints,
        probes=first.probes,
        seed=first.seed,
        solver=first.solver,
        realization_offset=first.realization_offset,
        max_norm_drift=max(first.max_norm_drift, second.max_norm_drift),
        max_boundary_mass=max(first.max_boundary_mass, second.max_boundary_mass),
    )


def _probe_points(probes: Sequence[Probe], regime: ScalingRegime,
                  grid: Grid) -> np.ndarray:
    pts = []
    for p in probes:
        r = np.asarray(p.r, dtype=float)
        for off in p.offsets:
            x = np.asarray(off, dtype=float)
            pts.append(r / regime.epsilon ** regime.beta + regime.eta * x)
    return _wrap_points(np.asarray(pts), grid.length)


def run_ensemble(cfg: EnsembleConfig, spec: MediumSpec | None, regime: ScalingRegime,
                 source: SourceSpec, grid: Grid,
                 realization_offset: int = 0) -> EnsembleResult:
    """Propagate the configured ensemble and record probe samples.

    Realization i uses noise streams keyed by (seed, offset + i), so a
    sharded run over contiguous offset ranges merges to the monolithic
    result exactly.
    """
    u0 = make_source(source, regime, grid)
    dz = grid.dz
    z_max = cfg.checkpoints[-1]
    n_steps = _steps_for(z_max, dz)
    check_steps = []
    for zq in cfg.checkpoints:
        s = int(round(zq / dz))
        if abs(s * dz - zq) > 1e-9 * max(zq, dz):
            raise InvalidParameter(f"checkpoint {zq} not on the dz grid")
        check_steps.append(s)
    step_to_ci = {s: i for i, s in enumerate(check_steps)}

    pts = _probe_points(cfg.probes, regime, grid)
    n_points = pts.shape[0]
    n_checks = len(cfg.checkpoints)
    samples = np.empty((cfg.n_realizations, n_checks, n_points), dtype=np.complex128)
    norm0 = u0.l2_norm()
    max_drift = 0.0
    max_edge = 0.0

    for start in range(0, cfg.n_realizations, cfg.batch_size):
        stop = min(start + cfg.batch_size, cfg.n_realizations)
        realizations = [realization_offset + i for i in range(start, stop)]
        batch = np.broadcast_to(u0.values, (len(realizations),) + grid.shape).astype(
            np.complex128)
        if spec is None:
            screens = lambda step: np.zeros((len(realizations),) + grid.shape)
        elif cfg.solver == SolverKind.ITO:
            screens = _ItoScreenSource(spec, grid, regime, dz, cfg.seed, realizations)
        else:
            screens = _ParaxialScreenSource(spec, grid, regime, dz, cfg.seed,
                                            realizations)

        def record(done, vals, start=start, stop=stop):
            ci = step_to_ci[done]
            samples[start:stop, ci, :] = _interpolate(vals, grid, pts)
            norms = np.sqrt(np.sum(np.abs(vals) ** 2, axis=tuple(range(1, 1 + grid.d)))
                            * grid.cell_volume)
            nonlocal max_drift, max_edge
            max_drift = max(max_drift, float(np.max(np.abs(norms / norm0 - 1.0))))
            max_edge = max(max_edge, max(_boundary_fraction(v, grid) for v in vals))

        _split_step(batch, grid, regime, dz, n_steps, screens,
                    checkpoint_steps=check_steps, record=record)

    return EnsembleResult(samples=samples, checkpoints=tuple(cfg.checkpoints),
                          probes=tuple(cfg.probes), seed=cfg.seed, solver=cfg.solver,
                          realization_offset=realization_offset,
                          max_norm_drift=max_drift, max_boundary_mass=max_edge)


def moment_products(samples: np.ndarray, p_idx: Sequence[int],
                    q_idx: Sequence[int]) -> np.ndarray:
    """Per-sample products prod_j phi[idx_j] * prod_l conj(phi[idy_l])."""
    out = np.ones(samples.shape[0], dtype=np.complex128)
    for j in p_idx:
        out = out * samples[:, j]
    for l in q_idx:
        out = out * np.conj(samples[:, l])
    return out


def estimate_moment(samples: np.ndarray, p: int, q: int,
                    point_indices: Sequence[Sequence[int]]) -> MomentEstimate:
    """Empirical (p, q) moment with jackknife standard error.

    ``samples`` is (n, n_points) complex; point_indices = (X indices,
    Y indices) with len p and q. For the sample mean the jackknife error
    coincides with the usual s/sqrt(n).
    """
    p_idx, q_idx = point_indices
    if len(p_idx) != p or len(q_idx) != q:
        raise InvalidParameter("index lists must have lengths p and q")
    samples = np.atleast_2d(np.asarray(samples))
    n = samples.shape[0]
    if n < 2:
        raise InsufficientSamples("need at least 2 samples")
    prods = moment_products(samples, p_idx, q_idx)
    value = complex(np.mean(prods))
    stderr = float(np.sqrt(np.sum(np.abs(prods - value) ** 2) / (n * (n - 1))))
    return MomentEstimate(value=value, stderr=stderr, n_samples=n)


def scintillation_index(intensity: np.ndarray) -> MomentEstimate:
    """S = (E[I^2] - E[I]^2) / E[I]^2 with jackknife standard error."""
    inten = np.asarray(intensity, dtype=float)
    n = inten.size
    if n < 2:
        raise InsufficientSamples("need at least 2 samples")
    s1, s2 = float(np.sum(inten)), float(np.sum(inten ** 2))
    m1, m2 = s1 / n, s2 / n
    if m1 <= 0:
        raise DegenerateIntensity(f"mean intensity {m1} is not positive")
    s_hat = m2 / m1 ** 2 - 1.0
    if np.allclose(inten, inten[0]):
        return MomentEstimate(value=0.0, stderr=0.0, n_samples=n)
    m1_loo = (s1 - inten) / (n - 1)
    m2_loo = (s2 - inten ** 2) / (n - 1)
    s_loo = m2_loo / m1_loo ** 2 - 1.0
    var_jack = (n - 1) / n * float(np.sum((s_loo - np.mean(s_loo)) ** 2))
    return MomentEstimate(value=s_hat, stderr=math.sqrt(var_jack), n_samples=n)


def ks_exponential(intensity: np.ndarray) -> TestResult:
    """One-sample KS against Exp(mean = sample mean), asymptotic p-value.

    The mean is estimated from the data, so the asymptotic Kolmogorov
    null is approximate (Lilliefors caveat; recorded in meta). The
    ``calibrate-ks`` CLI subcommand simulates the exact null when needed.
    """
    inten = np.sort(np.asarray(intensity, dtype=float))
    n = inten.size
    if n < 50:
        raise InsufficientSamples("KS test needs n >= 50")
    mean = float(np.mean(inten))
    if mean <= 0:
        raise DegenerateIntensity("mean intensity must be positive")
    cdf = 1.0 - np.exp(-inten / mean)
    upper = np.arange(1, n + 1) / n - cdf
    lower = cdf - np.arange(0, n) / n
    d_stat = float(max(np.max(upper), np.max(lower)))
    p = float(special.kolmogorov(math.sqrt(n) * d_stat))
    return TestResult(statistic=d_stat, p_value=min(max(p, 0.0), 1.0), n=n,
                      meta={"estimated_mean": mean,
                            "null": "asymptotic Kolmogorov; mean estimated from "
                                    "sample (Lilliefors caveat)"})


def circularity_test(field_samples: np.ndarray) -> TestResult:
    """|E[phi^2]| / E[|phi|^2] against the circular Gaussian null."""
    phi = np.asarray(field_samples).ravel()
    n = phi.size
    if n < 100:
        raise InsufficientSamples("circularity test needs n >= 100")
    m_sq = np.mean(phi ** 2)
    m_abs = float(np.mean(np.abs(phi) ** 2))
    if m_abs == 0:
        raise DegenerateIntensity("field samples are identically zero")
    stat = float(np.abs(m_sq) / m_abs)
    var_hat = float(np.mean(np.abs(phi ** 2 - m_sq) ** 2)) / n
    if var_hat == 0:
        p = 1.0 if stat == 0 else 0.0
    else:
        p = float(np.exp(-np.abs(m_sq) ** 2 / var_hat))
    return TestResult(statistic=stat, p_value=min(max(p, 0.0), 1.0), n=n,
                      meta={"mean_sq": complex(m_sq), "mean_abs_sq": m_abs})


def independence_test(samples_a: np.ndarray, samples_b: np.ndarray) -> TestResult:
    """Intensity correlation across two centers with a Fisher-z p-value."""
    a = np.asarray(samples_a).ravel()
    b = np.asarray(samples_b).ravel()
    if a.size != b.size:
        raise InvalidParameter("sample streams must have equal length")
    n = a.size
    if n < 100:
        raise InsufficientSamples("independence test needs n >= 100")
    ia = np.abs(a) ** 2 if np.iscomplexobj(a) else a.astype(float)
    ib = np.abs(b) ** 2 if np.iscomplexobj(b) else b.astype(float)
    sa, sb = np.std(ia), np.std(ib)
    if sa == 0 or sb == 0:
        corr = 0.0 if not np.array_equal(ia, ib) else 1.0
    else:
        corr = float(np.mean((ia - np.mean(ia)) * (ib - np.mean(ib))) / (sa * sb))
    corr = min(max(corr, -1.0), 1.0)
    if abs(corr) >= 1.0 - 1e-15:
        p = 0.0
    else:
        zstat = abs(math.atanh(corr)) * math.sqrt(max(n - 3, 1))
        p = float(special.erfc(zstat / math.sqrt(2.0)))
    return TestResult(statistic=corr, p_value=min(max(p, 0.0), 1.0), n=n,
                      meta={"fisher_z": None if abs(corr) >= 1 else
                            math.atanh(corr) * math.sqrt(max(n - 3, 1))})


def holder_increment_probe(field_samples: np.ndarray, h_values: Sequence[float],
                           order: int) -> dict:
    """Diagnostic table of E|phi(x+h) - phi(x)|^{2n} versus |h|.

    ``field_samples`` has shape (n_samples, 1 + len(h_values)): column 0
    holds phi(x), column 1+j holds phi(x + h_j). Emits a log-log slope
    over the nonzero increments for qualitative comparison with 2 n alpha;
    no pass/fail.
    """
    arr = np.atleast_2d(np.asarray(field_samples))
    hs = np.asarray(h_values, dtype=float)
    if arr.shape[1] != hs.size + 1:
        raise InvalidParameter("need one sample column per h value plus the base")
    incr = np.abs(arr[:, 1:] - arr[:, [0]]) ** (2 * order)
    means = np.mean(incr, axis=0)
    rows = [{"h": float(h), "mean_increment": float(m)} for h, m in zip(hs, means)]
    mask = (hs > 0) & (means > 0)
    slope = None
    if np.count_nonzero(mask) >= 2:
        slope = float(np.polyfit(np.log(hs[mask]), np.log(means[mask]), 1)[0])
    return {"order": order, "rows": rows, "loglog_slope": slope}
