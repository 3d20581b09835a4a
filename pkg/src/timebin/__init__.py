"""Time-bin tomography of single photons and photon pairs from a cascaded
three-level emitter.

The package simulates the whole measurement chain: emitter dynamics (or
ideal wavepacket sources), multi-time correlation functions, the unbalanced
interferometer's delay-term expansion, peak-window integrals, two-time
coincidence histograms, and the density-matrix reconstruction with its
visibility and concurrence figures of merit.  Natural units throughout:
the exciton decay rate is 1 and times are in units of its inverse.
"""
from .config import (
    ConfigError,
    ScenarioConfig,
    load_config,
    parse_config,
    resolved_toml,
)
from .correlations import (
    CorrelationEvent,
    CorrelationRequest,
    evaluate,
    g1_grid,
)
from .emitter import (
    EmitterModel,
    ModelContext,
    Pulse,
    TimeBinConfig,
    cascade_populations,
)
from .histogram import (
    ProjectedHistogram,
    TwoTimeHistogram,
    build_histogram,
    project_antidiagonal,
    project_diagonal,
)
from .interferometer import (
    DelayTerm,
    PhaseSetting,
    expand_pair,
    expand_single,
    supported_terms,
    term_support,
)
from .linalg import DataError, DimensionError, NumericalError, TimeGrid
from .oracles import heisenberg_correlator
from .tomography_pair import (
    DensityMatrix2Q,
    GbarEntries,
    center_peak,
    center_scan,
    center_visibility,
    compute_gbar,
    concurrence,
    concurrence_approx,
    fidelity,
    fit_center_scan,
    pair_peak_table,
    peak_table_from_entries,
    reconstruct_pair,
    rho_from_stokes,
    side_peak,
    stokes_pair,
    two_pulse_pair,
)
from .tomography_single import (
    DensityMatrix1Q,
    PeakTable1,
    integrate_peaks,
    reconstruct,
    reconstruct_from_peaks,
    rho_from_stokes_single,
    single_gbar,
    stokes_single,
    triggered_signal,
    two_pulse_single_photon,
    visibility,
    visibility_fit,
)
from .verify import CheckResult, run_checks
from .wavepacket import SinglePhotonState, WavepacketMixture, WavepacketState

__version__ = "0.1.0"

__all__ = [
    "CheckResult",
    "ConfigError",
    "CorrelationEvent",
    "CorrelationRequest",
    "DataError",
    "DelayTerm",
    "DensityMatrix1Q",
    "DensityMatrix2Q",
    "DimensionError",
    "EmitterModel",
    "GbarEntries",
    "ModelContext",
    "NumericalError",
    "PeakTable1",
    "PhaseSetting",
    "ProjectedHistogram",
    "Pulse",
    "ScenarioConfig",
    "SinglePhotonState",
    "TimeBinConfig",
    "TimeGrid",
    "TwoTimeHistogram",
    "WavepacketMixture",
    "WavepacketState",
    "build_histogram",
    "cascade_populations",
    "center_peak",
    "center_scan",
    "center_visibility",
    "compute_gbar",
    "concurrence",
    "concurrence_approx",
    "evaluate",
    "expand_pair",
    "expand_single",
    "fidelity",
    "fit_center_scan",
    "g1_grid",
    "heisenberg_correlator",
    "integrate_peaks",
    "load_config",
    "pair_peak_table",
    "parse_config",
    "peak_table_from_entries",
    "project_antidiagonal",
    "project_diagonal",
    "reconstruct",
    "reconstruct_from_peaks",
    "reconstruct_pair",
    "resolved_toml",
    "rho_from_stokes",
    "rho_from_stokes_single",
    "run_checks",
    "side_peak",
    "single_gbar",
    "stokes_pair",
    "stokes_single",
    "supported_terms",
    "term_support",
    "triggered_signal",
    "two_pulse_pair",
    "two_pulse_single_photon",
    "visibility",
    "visibility_fit",
]
