//! TDoA self-localization of a UAV over a hexagonal grid of ground nodes.
//!
//! The crate models the full measurement-to-estimate pipeline:
//!
//! * [`channel`] — air-to-ground statistical channel: LOS probability, mean
//!   path-loss exponent η̄(d₂D, h) with closed-form distance derivatives, and
//!   a precomputed η̄ lookup table.
//! * [`topology`] — hexagonal node lattice, UAV placement, and the sorted
//!   node-distance profile d₂D(N) with its empirical increment statistics.
//! * [`selection`] — the localization-variance objective F_θ(N) = Φ²(N)/N³,
//!   its Euler–Maclaurin T₂ factor, and the RSSI-based optimum finder that
//!   picks how many reference nodes to use.
//! * [`measurement`] — RSSI synthesis with Rician fading, RSSI-to-distance
//!   inversion, and TDoA range-difference synthesis with CRB-scaled noise.
//! * [`solver`] — gradient-descent TDoA position estimator with fixed
//!   (altimeter-supplied) altitude and GPS-prior initialization.
//! * [`harness`] — seeded, reproducibly parallel Monte Carlo experiments and
//!   CSV emission for the fixed-N sweep and the LOS-perturbation study.

pub mod channel;
pub mod error;
pub mod harness;
pub mod measurement;
pub mod selection;
pub mod solver;
pub mod topology;

pub use channel::{
    breakpoint_params, build_eta_table, eta_derivatives, eta_los, eta_nlos,
    free_space_pathloss_1m_db, los_probability, mean_path_loss_db, mean_path_loss_exponent,
    ChannelParams, EtaTable, Geometry2D, MAX_MODEL_ALTITUDE_M, MIN_MODEL_ALTITUDE_M,
    SPEED_OF_LIGHT_M_S,
};
pub use error::{Error, Result};
pub use harness::{
    emit_results, empirical_n, load_config, parse_config, print_config, run_cells,
    run_los_study, run_sweep, run_trial, CellResult, CellSpec, ObservationRecord, RunOutput,
    ScenarioConfig, SelectionMode, SummaryStats, TrialRecord, UavOffset,
};
pub use measurement::{
    calibration_kappa, draw_los_state, estimate_distance_from_rssi, rician_power_gain,
    synthesize_rssi, synthesize_tdoa, tdoa_noise_std, LinkGeometry, LinkObservation,
    MeasurementConfig, SyncModel, TdoaMeasurement,
};
pub use selection::{
    nopt_from_t2, phi, phi_double_prime_analytic, phi_prime_analytic, rssi_optimum_finder,
    rssi_optimum_finder_with_mode, CandidateLink, CandidateProfile, DistanceSlope, NoptDecision,
    PhiPrimeMode, SelectionResult, N_OPT_MAX, N_OPT_MIN,
};
pub use solver::{
    initialize_from_gps, localize, localize_traced, loss_and_gradient, measure_altitude,
    PositionEstimate, SolverConfig,
};
pub use topology::{
    cumulative_node_count, empirical_distance_increments, generate_hex_grid, layer_of_index,
    place_uav, sorted_node_distances, Deployment, IncrementStats, NodeSite, SortedDistance,
    UavPlacement,
};
