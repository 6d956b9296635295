"""Photon-pair generation from an atomic-ensemble quantum memory.

A write pulse Raman-scatters a Stokes photon while storing a collective
spin-wave excitation; after a controllable delay a read pulse converts
the stored excitation into an anti-Stokes photon.  This package
integrates the mean-field dynamics of that sequence, evaluates the
photon statistics (auto/cross correlations, Cauchy-Schwarz ratio,
conditional third-order correlation), and verifies every analytic result
against a brute-force truncated-Fock-space master-equation oracle.
"""

from .params import (
    ParameterError,
    PulseEnvelope,
    RateSchedule,
    RawPhysicalParams,
    SignalToNoise,
    Timeline,
    coupling_from_dipole,
    derive_rates,
    signal_to_noise,
)
from .dynamics import (
    ClosedFormSolution,
    IntegrationError,
    IntegratorConfig,
    Trajectory,
    closed_forms_rectangular,
    evolve_meanfield,
    evolve_with_cavity,
    nsp_quadrature,
    stokes_spin_correspondence,
)
from .correlations import (
    CorrelationReport,
    PhiFunctions,
    UndefinedCorrelation,
    cauchy_schwarz_from_gs,
    cauchy_schwarz_ratio,
    closed_report,
    drive_for_target_g3,
    g12_closed,
    g22_closed,
    g3_conditional,
    g3_from_phi,
    g_auto,
    g_cross,
    phi_report,
    propagate_phi,
)
from .fockoracle import (
    DensityMatrix,
    DiffTable,
    OracleConfig,
    OracleReport,
    OracleRun,
    TruncationError,
    compare_report,
    evolve_fock,
    ladder_operators,
    liouvillian_step,
    minimum_dim_contract,
    moment,
    oracle_report,
    regression_correlator,
    required_dim,
    thermal_state,
    vacuum_state,
)

__version__ = "0.1.0"
