"""Two-cavity cat states: simulation, joint Wigner tomography, MLE reconstruction.

The package models two microwave cavities dispersively coupled to a
three-level ancilla, compiles and simulates the pulse protocols that generate
two-mode cat states and measure joint photon-number parity, produces exact
and shot-noise-sampled joint Wigner data, and reconstructs density matrices
from such data by constrained maximum-likelihood optimization.
"""

__version__ = "0.1.0"

from .hilbert import (
    SystemDims,
    QOperator,
    StateVector,
    DensityMatrix,
    TruncationWarning,
    fock_state,
    coherent_state,
    two_mode_cat,
    annihilation,
    creation,
    number,
    parity,
    identity,
    displacement,
    displaced_parity_matrix,
    embed,
    tensor,
    partial_trace,
    apply,
    expectation,
    fidelity,
    purity,
    joint_parity_operator,
)
from .dynamics import (
    DeviceParams,
    NoiseConfig,
    dispersive_hamiltonian,
    conditional_phase_unitary,
    kerr_unitary,
    amplitude_damping_channel,
    parity_error_operator,
    prep_error_mixture,
)
from .protocols import (
    Displace,
    AncillaRotation,
    Wait,
    ProjectAncilla,
    GateSequence,
    WaitTimeSolution,
    solve_wait_times,
    estimate_protocol_phases,
    build_cat_generation,
    build_joint_parity,
    simulate_sequence,
    measure_joint_parity,
    sequence_to_text,
    sequence_from_text,
)
from .tomography import (
    SamplePoint,
    TomographyPlan,
    MeasurementRecord,
    TomographyDataset,
    joint_wigner,
    joint_wigner_grid,
    single_wigner,
    plane_cut,
    sprinkle_4d,
    sample_dataset,
    dataset_to_wigner_estimates,
)
from .reconstruction import (
    MLEConfig,
    MLEResult,
    MLEReconstructor,
    log_likelihood,
    likelihood_gradient,
    reconstruct,
    best_fit_cat,
)
from .analysis import (
    BellSpec,
    LogicalCode,
    bell_signal,
    pauli_tomography,
    direct_fidelity_estimate,
    make_product_cat,
    parity_decay_analytic,
    parity_decay_simulated,
    fit_exponential_decay,
    total_photon_distribution,
    cat_size,
)
