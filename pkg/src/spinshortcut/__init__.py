"""Counter-diabatic pulse synthesis and two-level propagation for a
two-electron double quantum dot with spin-orbit coupling.

Internal units: meV, ns, rad/ns, V/m.
"""

from .params import (
    HBAR,
    MU_B,
    PhysicalParams,
    UnitSystem,
    field_conversion_constants,
    load_config,
    parse_config,
    reduction_validity,
    zeeman_splitting,
)
from .drive import (
    DriveTrace,
    FieldTrace,
    PulseAnsatz,
    PulseSamples,
    build_drive,
    couplings,
    mixing_angle,
    adiabaticity_metric,
    counterdiabatic_term,
    field_traces,
    reference_pulses,
)
from .rotation import (
    RotatedDrive,
    polar_offdiagonal,
    rotated_hamiltonian,
    invert_to_x_drives,
    build_rotated,
)
from .propagator import (
    QuantumState,
    HamiltonianTrace,
    EvolutionResult,
    propagate,
    instantaneous_eigenstates,
    adiabatic_reference,
    transfer_fidelity,
)

__version__ = "0.1.0"
