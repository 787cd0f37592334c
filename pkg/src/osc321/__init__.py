"""Single and coupled nonlinear quantum oscillators with one-photon loss,
two-photon gain and three-photon loss."""

from .errors import *  # noqa: F401,F403
from .generator import (
    GeneratorBlock,
    TwoModeLiouvillian,
    build_diagonal_generator,
    build_offdiagonal_generator,
    build_two_mode_liouvillian,
)
from .meanfield import (
    MeanFieldSolution,
    PseudoPotential,
    coupled_mf_rhs,
    mf_fixed_points,
    mf_flow,
    pseudo_potential,
)
from .model import (
    GAIN,
    LOSS,
    Channel,
    ChannelSet,
    FockTruncation,
    NumberDistribution,
    suggest_truncation,
    validate_channels,
)
from .steady import (
    SteadyStateReport,
    WignerGrid,
    classify,
    moments,
    solve_steady_state,
    steady_state_report,
    wigner_from_diagonal,
)

__version__ = "0.1.0"

from .coupled import (  # noqa: E402
    PhaseDistribution,
    TwoModeBlockFamily,
    fourier_coefficients,
    low_occupation_analytic,
    oracle_phase_distribution,
    perturbative_blocks,
    phase_distribution,
)
from .spectral import (  # noqa: E402
    MetastabilityReport,
    SpectralReport,
    metastability_ratio,
    phase_diffusion_constant,
    slowest_timescales,
)
from .trajectories import (  # noqa: E402
    IntermittencyStats,
    JumpRecord,
    intermittency_stats,
    run_ensemble,
    run_trajectory,
)
