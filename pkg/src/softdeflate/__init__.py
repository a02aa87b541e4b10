"""Condition-number-free matrix completion and its benchmark harness."""

from .altls import AltLsReport, AltLsStep, ls_solve_block, smaltls
from .baselines import RankOneSum, frank_wolfe, naive_svd_complete
from .deflate import (
    DeflateConfig,
    EpochRecord,
    EpochTrace,
    default_schedule,
    find_gap,
    soft_deflate,
    theoretical_sample_rate,
)
from .linalg import (
    Factors,
    QrResult,
    coherence,
    entrywise_median,
    extend_orthonormal,
    principal_angle_sin,
    qr_orthonormalize,
    random_orthonormal,
    sym_eig_small,
)
from .observations import (
    ImplicitOperator,
    ObservationSet,
    make_residual_operator,
    read_observations,
    sample_observations,
    split_observations,
    truncate_observations,
    write_observations,
)
from .smoothqr import SmoothResult, smooth_qr
from .spectral import SpectralEstimate, spectral_norm, subspace_iteration
from .synth import (
    PlantedInstance,
    SpectrumSpec,
    fro_error_factored,
    gen_planted,
    spectrum_gaps,
    subspace_errors,
)

__all__ = [name for name in dir() if not name.startswith("_")]
