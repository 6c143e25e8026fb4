"""Simulation of dual-polarization FTN-QPSK links with blind carrier recovery.

The package compares two blind-phase-search carrier recovery schemes on a
time-packed (faster-than-Nyquist) QPSK link: plain BPS on the received
symbols, and BPS on the polybinary-transformed stream against a calibrated
16-point grid. The hot loops (BPS, Viterbi, CMA) are compiled with numba;
set ``FTNCPR_BACKEND=numpy`` for the pure-numpy reference path.
"""
from .cpr import (
    FIXED_LEVELS,
    BpsParams,
    CarrierRecovery,
    DecisionGrid,
    PhaseTrace,
    apply_phase,
    bps_estimate,
    calibrate_levels,
    conventional_grid,
    corrected_grid,
    polybinary_transform,
    recover_carrier,
    unwrap_phase,
)
from .dsp import RealTaps, RngStream, combined_isi_taps, design_rrc, fir_filter, raised_cosine, rrc_response
from .equalize import CmaParams, MlseParams, cma_equalize, estimate_isi_taps, mlse_equalize, mlse_oracle
from .errors import CalibrationError, ConfigError, EqualizerDivergedError, NotMeasurableError, ParameterError
from .harness import (
    BerRecord,
    SweepConfig,
    compute_osnr_gain,
    emit_results,
    read_results,
    resolve_ambiguity,
    run_sweep,
    run_trial,
)
from .kernels import BACKEND
from .link import (
    DualPolSignal,
    GroundTruth,
    LinkConfig,
    apply_awgn_osnr,
    apply_phase_noise,
    apply_pol_mix,
    demap_qpsk,
    ftn_shape,
    map_qpsk,
    matched_filter,
    transmit,
)

__version__ = "0.1.0"
