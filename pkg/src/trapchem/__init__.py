"""Classical simulator for trapped-ion quantum chemistry protocols.

Hybrid qubit (x) boson state vectors, ion-native gates, Jordan-Wigner
Hamiltonians, Trotterized evolution, single-qubit measurement protocols,
unitary coupled cluster and vibronic spectra, each checked against dense
linear algebra.
"""

from .errors import *  # noqa: F401,F403
from .hilbert import (
    HilbertLayout,
    HybridState,
    PauliTermSum,
    basis_state,
    exact_unitary,
    expectation,
    fidelity,
    random_state,
)
from .ionops import Circuit, LaserPulse, MsGate, apply_ms, apply_pulse, exp_pauli_boson, exp_pauli_string
from .fermion import (
    MolecularIntegrals,
    build_electronic_hamiltonian,
    hartree_fock_state,
    jordan_wigner,
    load_h2,
    load_integrals,
    term_census,
)
from .trotter import TrotterPlan, digital_error_curve, energy_trace, estimate_resources, trotter_evolve
from .measure import (
    extract_spectrum,
    measure_nonlocal,
    measure_pauli_boson,
    phase_estimation_scan,
    weak_transition_element,
)
from .ucc import ClusterAmplitudes, OptimizerConfig, prepare_ucc_state, quantum_assisted_optimize, ucc_energy
from .vibronic import (
    VibronicModel,
    absorption_spectrum,
    build_hamiltonian,
    dipole_correlation,
    harmonic_fit,
    ion_protocol_evolve,
)

__version__ = "0.1.0"
