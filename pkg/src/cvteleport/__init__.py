"""Continuous-variable teleportation channel: closed-form capacity and fidelity
with brute-force truncated-Fock-space verification."""

from .analytic import (
    CapacityPoint,
    analytic_output_state,
    average_entropy,
    capacity,
    capacity_point,
    channel_fidelity,
    g_entropy,
    holevo_quantity,
    output_entropy,
)
from .channel import (
    ChannelParams,
    Ensemble,
    IntegrationScheme,
    apply_channel,
    discretized_gaussian_ensemble,
    ensemble_average_state,
    gaussian_weight,
    monte_carlo_channel,
    noise_variance,
)
from .errors import (
    ConvergenceFailure,
    DimMismatch,
    DomainError,
    NotHermitian,
    TailMassExceeded,
)
from .fock import (
    DensityMatrix,
    FockState,
    OperatorMatrix,
    TruncationConfig,
    coherent_state,
    displacement_matrix,
    ladder_operators,
    mean_photon,
    overlap,
    thermal_state,
    von_neumann_entropy,
)

__version__ = "0.1.0"
