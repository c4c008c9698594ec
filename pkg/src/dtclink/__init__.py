"""dtclink: simulator and calibration toolkit for remote CZ gates between
fixed-frequency transmons linked by double-transmon couplers and a cable."""

__version__ = "0.1.0"

from dtclink.operators import (
    ModeSpec,
    OperatorSet,
    build_ladder,
    build_mode_operators,
    mode_hamiltonian,
    embed,
    transmon_charge_spectrum,
)
from dtclink.circuit import (
    CouplingEdge,
    LoopJunction,
    CircuitSpec,
    FluxSeparableHamiltonian,
    assemble,
    assemble_direct,
    evaluate,
    subsystem,
)
from dtclink.spectrum import (
    BareBasis,
    LabeledSpectrum,
    ZZResult,
    eigendecompose,
    label_states,
    zz_strength,
    computational_labels,
    sweep_1d,
    sweep_2d,
    locate_zero,
    locate_extremum,
)
from dtclink.pulse import PulseParams, waveform, normalize, sample
from dtclink.dynamics import (
    PropagationConfig,
    Trajectory,
    propagate,
    leakage,
    population_traces,
    reduce_to_idle_basis,
)
from dtclink.gate import (
    GateResult,
    CalibrationReport,
    extract_unitary,
    remove_single_qubit_phases,
    conditional_phase_error,
    average_fidelity,
    evaluate_gate,
    calibrate,
)
