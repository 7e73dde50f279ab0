//! Seeded Monte Carlo experiment runner, statistics, and CSV emission.
//!
//! Every trial owns a private RNG stream derived from `(seed, trial_id)`,
//! so the worker count never changes a single drawn number and parallel
//! runs are bit-identical to serial ones.

pub mod config;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{
    build_eta_table, EtaTable, Geometry2D, MAX_MODEL_ALTITUDE_M, MIN_MODEL_ALTITUDE_M,
};
use crate::error::{Error, Result};
use crate::measurement::{
    calibration_kappa, draw_los_state, synthesize_rssi, synthesize_tdoa, LinkObservation,
    LinkGeometry,
};
use crate::selection::{
    rssi_optimum_finder_with_mode, CandidateProfile, DistanceSlope, N_OPT_MAX, N_OPT_MIN,
};
use crate::solver::{initialize_from_gps, localize, measure_altitude};
use crate::topology::{empirical_distance_increments, generate_hex_grid, place_uav};

pub use config::{
    load_config, parse_config, print_config, ScenarioConfig, SelectionMode, UavOffset,
};

/// RNG stream reserved for deriving the empirical-N profile; trial streams
/// use their own trial id and can never collide with it.
const EMPIRICAL_PROFILE_STREAM: u64 = u64::MAX;

/// Placements averaged when deriving the empirical optimum N.
const EMPIRICAL_PROFILE_PLACEMENTS: usize = 2000;

/// Outcome of a single Monte Carlo trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_id: u64,
    pub true_xy: (f64, f64),
    pub true_h: f64,
    pub est_xy: (f64, f64),
    pub est_z: f64,
    /// ‖est_xy − true_xy‖, meters.
    pub horizontal_error_m: f64,
    pub n_selected: usize,
    pub selection_mode: SelectionMode,
    pub converged: bool,
    pub iterations: usize,
    pub residual_m: f64,
    pub rng_stream_id: u64,
}

/// One per-link RSSI observation row (emitted only on request — large).
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRecord {
    pub trial_id: u64,
    pub node_id: usize,
    pub los: bool,
    pub rssi_dbm: f64,
    pub d_est_m: f64,
    pub true_d3d_m: f64,
    pub selected: bool,
}

/// Aggregates of one experiment point, mirroring a `summary.csv` row.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub mode: SelectionMode,
    /// The fixed N, or the policy name when N is chosen per trial.
    pub n_or_policy: String,
    pub coverage_radius: f64,
    pub uav_altitude: f64,
    pub delta_los: f64,
    pub trials: u64,
    pub rmse_m: f64,
    pub mean_err_m: f64,
    pub p90_err_m: f64,
    pub mean_n_selected: f64,
    /// Non-converged solves (included, not censored, in the error stats).
    pub failed_trials: u64,
    pub seed: u64,
    pub kappa: f64,
}

/// One experiment point: a (mode, N policy, R, h_u, δ_LOS) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSpec {
    pub mode: SelectionMode,
    /// Fixed N for `fixed_n`/`empirical` cells; `None` for `alg1`.
    pub n_policy: Option<usize>,
    pub coverage_radius: f64,
    pub uav_altitude: f64,
    pub delta_los: f64,
}

impl CellSpec {
    pub fn n_or_policy(&self) -> String {
        match self.n_policy {
            Some(n) => n.to_string(),
            None => self.mode.to_string(),
        }
    }
}

/// All trial outcomes of one cell plus their summary.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: CellSpec,
    pub summary: SummaryStats,
    pub records: Vec<TrialRecord>,
    pub observations: Vec<ObservationRecord>,
}

/// A full experiment: one `CellResult` per point, in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub cells: Vec<CellResult>,
}

impl RunOutput {
    pub fn summaries(&self) -> Vec<&SummaryStats> {
        self.cells.iter().map(|c| &c.summary).collect()
    }
}

/// Shared read-only state for every trial of one cell.
struct CellContext<'a> {
    cfg: &'a ScenarioConfig,
    table: &'a EtaTable,
    cell: &'a CellSpec,
}

/// Indices of the `n` smallest estimated distances, nearest first (ties by
/// index), matching the optimum finder's ranking.
fn nearest_ids(d_est: &[f64], n: usize) -> Result<Vec<usize>> {
    if n > d_est.len() {
        return Err(Error::config(format!(
            "cannot select {n} of {} candidate nodes",
            d_est.len()
        )));
    }
    let mut order: Vec<usize> = (0..d_est.len()).collect();
    order.sort_by(|&a, &b| {
        d_est[a]
            .partial_cmp(&d_est[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(n);
    Ok(order)
}

fn run_trial_in_cell(
    ctx: &CellContext<'_>,
    trial_id: u64,
) -> Result<(TrialRecord, Vec<ObservationRecord>)> {
    let cfg = ctx.cfg;
    let cell = ctx.cell;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(trial_id);

    // Scene: grid with random node altitudes, then the UAV placement.
    let dep = generate_hex_grid(
        cell.coverage_radius,
        cfg.layers,
        cfg.node_altitude_max,
        &mut rng,
    )?;
    let offset = match cfg.uav_offset {
        UavOffset::Random => rng.random_range(0.0..cell.coverage_radius / 2.0),
        UavOffset::Fixed(v) => v,
    };
    let dep = place_uav(dep, offset, cell.uav_altitude, &mut rng)?;
    let uav = dep.uav.expect("UAV placed above");

    // On-board priors: altimeter and GPS fix.
    let measured_h = measure_altitude(uav.h, &cfg.solver, &mut rng).max(1.0);
    let init_xy = initialize_from_gps(uav.xy, &cfg.solver, &mut rng);

    // LOS state of every link, in node-id order.
    let los: Vec<bool> = dep
        .nodes
        .iter()
        .map(|node| {
            let d2d = (uav.xy.0 - node.x).hypot(uav.xy.1 - node.y);
            let g = Geometry2D::clamped(d2d, uav.h - node.z);
            draw_los_state(g, cell.delta_los, &mut rng)
        })
        .collect();

    // Faded RSSI and inverted distance estimate per link, node-id order.
    let observations: Vec<LinkObservation> = dep
        .nodes
        .iter()
        .zip(&los)
        .map(|(node, &los_n)| {
            let geom = LinkGeometry {
                node_id: node.id,
                d2d: (uav.xy.0 - node.x).hypot(uav.xy.1 - node.y),
                delta_h: uav.h - node.z,
            };
            synthesize_rssi(&geom, los_n, measured_h, ctx.table, &cfg.measurement, &mut rng)
        })
        .collect::<Result<_>>()?;
    let d_est: Vec<f64> = observations.iter().map(|o| o.d_est).collect();

    // Node selection.
    let selected_ids = match (cell.mode, cell.n_policy) {
        (SelectionMode::Alg1, _) => {
            rssi_optimum_finder_with_mode(
                &d_est,
                measured_h,
                ctx.table,
                cfg.n_max,
                cfg.t2_phi_prime,
            )?
            .selected_ids
        }
        (SelectionMode::FixedN, n) => nearest_ids(&d_est, n.unwrap_or(cfg.n_fixed))?,
        (SelectionMode::Empirical, Some(n)) => nearest_ids(&d_est, n)?,
        (SelectionMode::Empirical, None) => {
            return Err(Error::config(
                "empirical cells need their N resolved before trials run",
            ))
        }
    };
    let selected_obs: Vec<LinkObservation> = selected_ids
        .iter()
        .map(|&id| observations[id].clone())
        .collect();

    // TDoA synthesis against the nearest selected node, then the solve.
    let measurements = synthesize_tdoa(&dep, &selected_obs, &cfg.measurement, &mut rng)?;
    let est = localize(&measurements, &dep.nodes, init_xy, measured_h, &cfg.solver)?;

    let record = TrialRecord {
        trial_id,
        true_xy: uav.xy,
        true_h: uav.h,
        est_xy: est.xy,
        est_z: est.z,
        horizontal_error_m: (est.xy.0 - uav.xy.0).hypot(est.xy.1 - uav.xy.1),
        n_selected: selected_ids.len(),
        selection_mode: cell.mode,
        converged: est.converged,
        iterations: est.iterations,
        residual_m: est.residual_m,
        rng_stream_id: trial_id,
    };
    let dump = if cfg.dump_observations {
        observations
            .iter()
            .map(|o| ObservationRecord {
                trial_id,
                node_id: o.node_id,
                los: o.los,
                rssi_dbm: o.rssi_dbm,
                d_est_m: o.d_est,
                true_d3d_m: o.true_d3d,
                selected: selected_ids.contains(&o.node_id),
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok((record, dump))
}

/// The error each trial contributes to the summary statistics: horizontal
/// by default, full 3D when `include_z` is set.
fn error_metric(cfg: &ScenarioConfig, rec: &TrialRecord) -> f64 {
    if cfg.include_z {
        rec.horizontal_error_m.hypot(rec.est_z - rec.true_h)
    } else {
        rec.horizontal_error_m
    }
}

/// Nearest-rank percentile of an unsorted sample.
fn percentile(values: &[f64], fraction: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let rank = (fraction * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn summarize(cfg: &ScenarioConfig, cell: &CellSpec, records: &[TrialRecord]) -> SummaryStats {
    let errors: Vec<f64> = records.iter().map(|r| error_metric(cfg, r)).collect();
    let n = errors.len().max(1) as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    SummaryStats {
        mode: cell.mode,
        n_or_policy: cell.n_or_policy(),
        coverage_radius: cell.coverage_radius,
        uav_altitude: cell.uav_altitude,
        delta_los: cell.delta_los,
        trials: records.len() as u64,
        rmse_m: rmse,
        mean_err_m: mean,
        p90_err_m: percentile(&errors, 0.9),
        mean_n_selected: records.iter().map(|r| r.n_selected as f64).sum::<f64>() / n,
        failed_trials: records.iter().filter(|r| !r.converged).count() as u64,
        seed: cfg.seed,
        kappa: calibration_kappa(&cfg.measurement),
    }
}

/// Builds the path-loss-exponent lookup table used at coverage radius `r`:
/// the d2d domain spans everything a UAV inside the grid can see, with
/// margin.
pub fn table_for_radius(cfg: &ScenarioConfig, r: f64) -> Result<EtaTable> {
    build_eta_table(
        (1.0, (10.0 * r).max(2.0)),
        (MIN_MODEL_ALTITUDE_M, MAX_MODEL_ALTITUDE_M),
        (cfg.table_d2d_points, cfg.table_h_points),
    )
}

/// The fixed N the `empirical` policy uses at (R, h_u): the theoretical
/// optimum evaluated on a placement-averaged unperturbed distance profile.
pub fn empirical_n(
    cfg: &ScenarioConfig,
    coverage_radius: f64,
    uav_altitude: f64,
    table: &EtaTable,
) -> Result<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(EMPIRICAL_PROFILE_STREAM);
    let stats = empirical_distance_increments(
        coverage_radius,
        cfg.layers,
        EMPIRICAL_PROFILE_PLACEMENTS,
        &mut rng,
    )?;
    let n_max = cfg.n_max.min(stats.mean_profile.len());
    let slope = DistanceSlope::LayerProxy {
        delta_hat: stats.mean_profile[0],
    };
    let profile =
        CandidateProfile::from_d2d_profile(&stats.mean_profile[..n_max], uav_altitude, table, slope)?;
    let n = profile.theoretical_n_opt()?;
    Ok(n.clamp(N_OPT_MIN, N_OPT_MAX.min(n_max)))
}

/// Runs every cell with per-trial RNG streams on a worker pool of
/// `cfg.workers` threads (0 = library default). Trial order within a cell
/// is normalized by trial id regardless of scheduling.
pub fn run_cells(cfg: &ScenarioConfig, cells: &[CellSpec]) -> Result<RunOutput> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::config(format!("cannot build worker pool: {e}")))?;

    let mut tables: HashMap<u64, EtaTable> = HashMap::new();
    for cell in cells {
        if let std::collections::hash_map::Entry::Vacant(slot) =
            tables.entry(cell.coverage_radius.to_bits())
        {
            slot.insert(table_for_radius(cfg, cell.coverage_radius)?);
        }
    }

    let mut results = Vec::with_capacity(cells.len());
    for cell in cells {
        let table = &tables[&cell.coverage_radius.to_bits()];
        let ctx = CellContext { cfg, table, cell };
        let trials: Vec<(TrialRecord, Vec<ObservationRecord>)> = pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|t| run_trial_in_cell(&ctx, t))
                .collect::<Result<_>>()
        })?;
        let mut records = Vec::with_capacity(trials.len());
        let mut observations = Vec::new();
        for (record, dump) in trials {
            records.push(record);
            observations.extend(dump);
        }
        let summary = summarize(cfg, cell, &records);
        results.push(CellResult {
            cell: cell.clone(),
            summary,
            records,
            observations,
        });
    }
    Ok(RunOutput { cells: results })
}

/// Runs one trial under the configured selection mode (resolving the
/// empirical N first if needed).
pub fn run_trial(cfg: &ScenarioConfig, trial_index: u64) -> Result<TrialRecord> {
    cfg.validate()?;
    let table = table_for_radius(cfg, cfg.coverage_radius)?;
    let n_policy = match cfg.selection_mode {
        SelectionMode::FixedN => Some(cfg.n_fixed),
        SelectionMode::Alg1 => None,
        SelectionMode::Empirical => {
            Some(empirical_n(cfg, cfg.coverage_radius, cfg.uav_altitude, &table)?)
        }
    };
    let cell = CellSpec {
        mode: cfg.selection_mode,
        n_policy,
        coverage_radius: cfg.coverage_radius,
        uav_altitude: cfg.uav_altitude,
        delta_los: cfg.delta_los,
    };
    let ctx = CellContext {
        cfg,
        table: &table,
        cell: &cell,
    };
    run_trial_in_cell(&ctx, trial_index).map(|(record, _)| record)
}

/// The fixed-N grid plus the optimum finder, at every (R, h_u) pair.
pub fn sweep_cells(cfg: &ScenarioConfig) -> Vec<CellSpec> {
    let mut cells = Vec::new();
    for &r in &cfg.sweep_radii {
        for &h in &cfg.sweep_altitudes {
            for &n in &cfg.n_fixed_sweep {
                cells.push(CellSpec {
                    mode: SelectionMode::FixedN,
                    n_policy: Some(n),
                    coverage_radius: r,
                    uav_altitude: h,
                    delta_los: cfg.delta_los,
                });
            }
            cells.push(CellSpec {
                mode: SelectionMode::Alg1,
                n_policy: None,
                coverage_radius: r,
                uav_altitude: h,
                delta_los: cfg.delta_los,
            });
        }
    }
    cells
}

/// Fixed-N sweep plus the optimum finder over every (R, h_u) cell.
pub fn run_sweep(cfg: &ScenarioConfig) -> Result<RunOutput> {
    run_cells(cfg, &sweep_cells(cfg))
}

/// Optimum finder vs. the empirical fixed N across the Δ_LOS grid, at the
/// configured (R, h_u).
pub fn run_los_study(cfg: &ScenarioConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let table = table_for_radius(cfg, cfg.coverage_radius)?;
    let n_emp = empirical_n(cfg, cfg.coverage_radius, cfg.uav_altitude, &table)?;
    let mut cells = Vec::new();
    for &delta in &cfg.delta_los_grid {
        cells.push(CellSpec {
            mode: SelectionMode::Alg1,
            n_policy: None,
            coverage_radius: cfg.coverage_radius,
            uav_altitude: cfg.uav_altitude,
            delta_los: delta,
        });
        cells.push(CellSpec {
            mode: SelectionMode::Empirical,
            n_policy: Some(n_emp),
            coverage_radius: cfg.coverage_radius,
            uav_altitude: cfg.uav_altitude,
            delta_los: delta,
        });
    }
    run_cells(cfg, &cells)
}

pub const SUMMARY_HEADER: &str =
    "mode,n_or_policy,R,h_u,delta_los,trials,rmse_m,mean_err_m,p90_err_m,mean_n_selected,seed,kappa";

pub const TRIALS_HEADER: &str = "mode,n_or_policy,R,h_u,delta_los,trial_id,true_x,true_y,true_h,\
     est_x,est_y,est_z,horizontal_error_m,n_selected,converged,iterations,residual_m,rng_stream_id";

pub const OBSERVATIONS_HEADER: &str =
    "mode,n_or_policy,R,h_u,delta_los,trial_id,node_id,los,rssi_dbm,d_est_m,true_d3d_m,selected";

/// Renders `summary.csv`.
pub fn summary_csv(summaries: &[&SummaryStats]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for s in summaries {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            s.mode,
            s.n_or_policy,
            s.coverage_radius,
            s.uav_altitude,
            s.delta_los,
            s.trials,
            s.rmse_m,
            s.mean_err_m,
            s.p90_err_m,
            s.mean_n_selected,
            s.seed,
            s.kappa
        );
    }
    out
}

/// Renders `trials.csv`, one row per trial in (cell, trial id) order.
pub fn trials_csv(output: &RunOutput) -> String {
    let mut out = String::from(TRIALS_HEADER);
    out.push('\n');
    for cell in &output.cells {
        let prefix = format!(
            "{},{},{},{},{}",
            cell.cell.mode,
            cell.cell.n_or_policy(),
            cell.cell.coverage_radius,
            cell.cell.uav_altitude,
            cell.cell.delta_los
        );
        for r in &cell.records {
            let _ = writeln!(
                out,
                "{prefix},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.trial_id,
                r.true_xy.0,
                r.true_xy.1,
                r.true_h,
                r.est_xy.0,
                r.est_xy.1,
                r.est_z,
                r.horizontal_error_m,
                r.n_selected,
                r.converged,
                r.iterations,
                r.residual_m,
                r.rng_stream_id
            );
        }
    }
    out
}

/// Renders `observations.csv` (empty string when nothing was dumped).
pub fn observations_csv(output: &RunOutput) -> String {
    if output.cells.iter().all(|c| c.observations.is_empty()) {
        return String::new();
    }
    let mut out = String::from(OBSERVATIONS_HEADER);
    out.push('\n');
    for cell in &output.cells {
        let prefix = format!(
            "{},{},{},{},{}",
            cell.cell.mode,
            cell.cell.n_or_policy(),
            cell.cell.coverage_radius,
            cell.cell.uav_altitude,
            cell.cell.delta_los
        );
        for o in &cell.observations {
            let _ = writeln!(
                out,
                "{prefix},{},{},{},{},{},{},{}",
                o.trial_id, o.node_id, o.los, o.rssi_dbm, o.d_est_m, o.true_d3d_m, o.selected
            );
        }
    }
    out
}

/// Writes `summary.csv`, `trials.csv`, and (when observations were dumped)
/// `observations.csv` under `dir`, returning the written paths.
pub fn emit_results(output: &RunOutput, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let summary_path = dir.join("summary.csv");
    std::fs::write(&summary_path, summary_csv(&output.summaries()))?;
    written.push(summary_path);
    let trials_path = dir.join("trials.csv");
    std::fs::write(&trials_path, trials_csv(output))?;
    written.push(trials_path);
    let obs = observations_csv(output);
    if !obs.is_empty() {
        let obs_path = dir.join("observations.csv");
        std::fs::write(&obs_path, obs)?;
        written.push(obs_path);
    }
    Ok(written)
}
