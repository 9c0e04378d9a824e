"""Monte Carlo simulation and analytic moments for beam propagation
through random media under the paraxial and Ito-Schrodinger models."""

__version__ = "0.1.0"

from .errors import PxspkError
from .grid import Grid
from .medium import (
    FieldBlock,
    MediumFamily,
    MediumSpec,
    PhaseScreen,
    ScreenKind,
    brownian_screen,
    covariance_R,
    covariance_profile,
    hessian_Xi,
    integrated_screen,
    spectral_moment,
    spectrum_Rhat,
    synthesize_block,
)
from .moments import (
    AnalyticMoment,
    CovarianceModel,
    MomentFormula,
    MomentSpec,
    diffusion_kernel_G,
    g_phase,
    m11_diffusive,
    m11_kinetic,
    m11_prelimit,
    mean_field,
    mean_field_prelimit,
    q_kernel,
    remainder_lambda,
    ryser_permanent,
    wick_predict,
)
from .propagate import (
    Field,
    Profile,
    PropagationResult,
    SourceSpec,
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
    set_fft_workers,
    source_profile,
)
from .rng import SeedPath, generator
from .scaling import (
    PhysicalScenario,
    RegimeKind,
    ScalingRegime,
    ValidationReport,
    physical_to_dimensionless,
    regime_from_theta,
    validate_assumptions,
)
from .stats import (
    EnsembleConfig,
    EnsembleResult,
    MomentEstimate,
    Probe,
    SolverKind,
    TestResult,
    circularity_test,
    estimate_moment,
    holder_increment_probe,
    independence_test,
    ks_exponential,
    merge_ensembles,
    moment_products,
    run_ensemble,
    scintillation_index,
)
