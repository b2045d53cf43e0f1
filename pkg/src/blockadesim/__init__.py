"""Blockade and biased spin-freezing dynamics in driven, coupled spin-1/2 registers."""

from .qops import (
    kron,
    spin_op,
    expm_hermitian,
    partial_trace,
    validate_state,
    basis_label,
    basis_labels,
)
from .model import (
    RydbergParams,
    SpinSystem,
    DriveConfig,
    vdw_interaction,
    build_rydberg_hamiltonian,
    rydberg_to_spin,
    build_nmr_hamiltonian,
)
from .states import (
    ground_state,
    basis_state,
    plus_minus_states,
    w_basis,
    pseudopure,
    thermal_state,
)
from .dynamics import (
    RfiDistribution,
    EvolutionConfig,
    Trajectory,
    evolve_closed,
    evolve_open,
    lindblad_rhs,
    ensemble_average,
    dephase_pfg,
    dominant_frequency,
)
from .discord import (
    Partition,
    MeasurementBasis,
    DiscordResult,
    von_neumann_entropy,
    mutual_information,
    conditional_mutual_information,
    discord,
    discord_normalized,
)

__version__ = "0.1.0"
