//! Flat key=value scenario configuration.
//!
//! Every tunable of the simulation is a key with a default; `print_config`
//! emits all of them (with section comments) and `parse_config` accepts the
//! same format back, so `parse_config(&print_config(&cfg)) == cfg`.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::measurement::{MeasurementConfig, SyncModel};
use crate::selection::{PhiPrimeMode, N_OPT_MAX, N_OPT_MIN};
use crate::solver::SolverConfig;

/// How the UAV's horizontal offset from the grid center is chosen per trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UavOffset {
    /// Δ ~ U(0, R/2), redrawn every trial.
    Random,
    /// A fixed offset in meters.
    Fixed(f64),
}

/// Which node-selection policy a run (or a sweep point) uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelectionMode {
    /// The nearest `n_fixed` nodes by estimated distance.
    FixedN,
    /// The RSSI-only optimum finder.
    Alg1,
    /// A fixed N computed once from the averaged distance profile.
    Empirical,
}

impl fmt::Display for SelectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionMode::FixedN => "fixed_n",
            SelectionMode::Alg1 => "alg1",
            SelectionMode::Empirical => "empirical",
        })
    }
}

/// Full description of a simulation scenario. All fields have defaults
/// matching the reference experiment setup.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Grid coverage radius R, meters.
    pub coverage_radius: f64,
    /// Number of hexagonal layers around the center node.
    pub layers: u32,
    /// True UAV altitude h_u, meters.
    pub uav_altitude: f64,
    /// UAV horizontal offset policy.
    pub uav_offset: UavOffset,
    /// Node altitudes are drawn from U(0, this), meters.
    pub node_altitude_max: f64,
    /// Radio, fading, and TDoA noise parameters.
    pub measurement: MeasurementConfig,
    /// Gradient-descent solver parameters.
    pub solver: SolverConfig,
    /// Report 3D error instead of horizontal error (only meaningful with
    /// `solve_3d`).
    pub include_z: bool,
    /// Selection policy for single runs.
    pub selection_mode: SelectionMode,
    /// N used by `fixed_n` mode outside sweeps.
    pub n_fixed: usize,
    /// Fixed-N grid swept alongside alg1 by `run_sweep`.
    pub n_fixed_sweep: Vec<usize>,
    /// Candidate-set size cap fed to the optimum finder.
    pub n_max: usize,
    /// How the T₂ statistic approximates the distance slope.
    pub t2_phi_prime: PhiPrimeMode,
    /// Monte Carlo trials per experiment point.
    pub trials: u64,
    /// Master seed; trial t uses stream (seed, t).
    pub seed: u64,
    /// Worker threads (0 = rayon default).
    pub workers: usize,
    /// LOS probability offset Δ_LOS for single runs.
    pub delta_los: f64,
    /// Δ_LOS grid for the LOS study.
    pub delta_los_grid: Vec<f64>,
    /// Coverage radii swept by `run_sweep`.
    pub sweep_radii: Vec<f64>,
    /// UAV altitudes swept by `run_sweep`.
    pub sweep_altitudes: Vec<f64>,
    /// Exponent-table resolution along d2d.
    pub table_d2d_points: usize,
    /// Exponent-table resolution along h.
    pub table_h_points: usize,
    /// Also emit per-link observations (large).
    pub dump_observations: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            coverage_radius: 120.0,
            layers: 5,
            uav_altitude: 20.0,
            uav_offset: UavOffset::Random,
            node_altitude_max: 5.0,
            measurement: MeasurementConfig::default(),
            solver: SolverConfig::default(),
            include_z: false,
            selection_mode: SelectionMode::Alg1,
            n_fixed: 8,
            n_fixed_sweep: (3..=20).collect(),
            n_max: 20,
            t2_phi_prime: PhiPrimeMode::Proxy,
            trials: 1000,
            seed: 1,
            workers: 0,
            delta_los: 0.0,
            delta_los_grid: vec![-0.4, -0.3, -0.2, -0.1, 0.0, 0.1],
            sweep_radii: vec![60.0, 90.0, 120.0],
            sweep_altitudes: vec![20.0, 30.0],
            table_d2d_points: 200,
            table_h_points: 50,
            dump_observations: false,
        }
    }
}

impl ScenarioConfig {
    /// Cross-field sanity checks; called by every runner entry point.
    pub fn validate(&self) -> Result<()> {
        if !(self.coverage_radius > 0.0 && self.coverage_radius.is_finite()) {
            return Err(Error::config("coverage_radius must be positive"));
        }
        if self.layers < 1 {
            return Err(Error::config("layers must be at least 1"));
        }
        if !(self.uav_altitude > 0.0 && self.uav_altitude.is_finite()) {
            return Err(Error::config("uav_altitude must be positive"));
        }
        if let UavOffset::Fixed(v) = self.uav_offset {
            if !(v.is_finite() && v >= 0.0 && v <= self.coverage_radius / 2.0) {
                return Err(Error::config(format!(
                    "uav_offset must lie in [0, R/2] = [0, {}]",
                    self.coverage_radius / 2.0
                )));
            }
        }
        if self.node_altitude_max < 0.0 {
            return Err(Error::config("node_altitude_max must be non-negative"));
        }
        self.measurement.validate()?;
        self.solver.validate()?;
        let node_count = crate::topology::cumulative_node_count(self.layers);
        if self.n_max < N_OPT_MIN || self.n_max > node_count {
            return Err(Error::config(format!(
                "n_max must lie in [{N_OPT_MIN}, {node_count}] for {} layers",
                self.layers
            )));
        }
        if self.n_fixed < N_OPT_MIN || self.n_fixed > self.n_max {
            return Err(Error::config(format!(
                "n_fixed must lie in [{N_OPT_MIN}, n_max = {}]",
                self.n_max
            )));
        }
        if self.n_fixed_sweep.is_empty() {
            return Err(Error::config("n_fixed_sweep must not be empty"));
        }
        if let Some(&n) = self
            .n_fixed_sweep
            .iter()
            .find(|&&n| n < N_OPT_MIN || n > N_OPT_MAX)
        {
            return Err(Error::config(format!(
                "n_fixed_sweep entry {n} outside [{N_OPT_MIN}, {N_OPT_MAX}]"
            )));
        }
        if self.trials < 1 {
            return Err(Error::config("trials must be at least 1"));
        }
        if !(-1.0..=1.0).contains(&self.delta_los) || self.delta_los.is_nan() {
            return Err(Error::config("delta_los must lie in [-1, 1]"));
        }
        if self.delta_los_grid.is_empty()
            || self.delta_los_grid.iter().any(|d| !(-1.0..=1.0).contains(d))
        {
            return Err(Error::config("delta_los_grid entries must lie in [-1, 1]"));
        }
        if self.sweep_radii.is_empty() || self.sweep_radii.iter().any(|r| *r <= 0.0) {
            return Err(Error::config("sweep_radii must be positive"));
        }
        if self.sweep_altitudes.is_empty() || self.sweep_altitudes.iter().any(|h| *h <= 0.0) {
            return Err(Error::config("sweep_altitudes must be positive"));
        }
        if self.table_d2d_points < 2 || self.table_h_points < 2 {
            return Err(Error::config("exponent table needs at least 2×2 points"));
        }
        Ok(())
    }
}

/// Every accepted config key in print order, with a section marker where a
/// comment block starts.
const KEYS: &[(&str, &str)] = &[
    ("coverage_radius", "deployment"),
    ("layers", ""),
    ("uav_altitude", ""),
    ("uav_offset", ""),
    ("node_altitude_max", ""),
    ("carrier_freq_hz", "channel"),
    ("tx_power_dbm", ""),
    ("noise_floor_dbm", ""),
    ("bandwidth_hz", ""),
    ("k_los", ""),
    ("k_nlos", ""),
    ("num_paths", ""),
    ("max_delay_spread_s", ""),
    ("ref_pathloss_1m_db", ""),
    ("sinr_interference_factor", "measurement"),
    ("nuisance_loss", ""),
    ("sync_model", ""),
    ("sync_residual_std_s", ""),
    ("sync_common_std_s", ""),
    ("tdoa_noise_scale", ""),
    ("selection_mode", "selection"),
    ("n_fixed", ""),
    ("n_fixed_sweep", ""),
    ("n_max", ""),
    ("t2_phi_prime", ""),
    ("solver_step_size", "solver"),
    ("solver_max_iterations", ""),
    ("solver_grad_tolerance", ""),
    ("gps_prior_std", ""),
    ("altitude_noise_std", ""),
    ("solver_weighted", ""),
    ("solve_3d", ""),
    ("include_z", ""),
    ("trials", "experiment"),
    ("seed", ""),
    ("workers", ""),
    ("delta_los", ""),
    ("delta_los_grid", ""),
    ("sweep_radii", ""),
    ("sweep_altitudes", ""),
    ("table_d2d_points", ""),
    ("table_h_points", ""),
    ("dump_observations", ""),
];

fn join<T: fmt::Display>(values: &[T]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn value_of(cfg: &ScenarioConfig, key: &str) -> String {
    let ch = &cfg.measurement.channel;
    let m = &cfg.measurement;
    let s = &cfg.solver;
    match key {
        "coverage_radius" => cfg.coverage_radius.to_string(),
        "layers" => cfg.layers.to_string(),
        "uav_altitude" => cfg.uav_altitude.to_string(),
        "uav_offset" => match cfg.uav_offset {
            UavOffset::Random => "random".to_string(),
            UavOffset::Fixed(v) => v.to_string(),
        },
        "node_altitude_max" => cfg.node_altitude_max.to_string(),
        "carrier_freq_hz" => ch.carrier_freq_hz.to_string(),
        "tx_power_dbm" => ch.tx_power_dbm.to_string(),
        "noise_floor_dbm" => ch.noise_floor_dbm.to_string(),
        "bandwidth_hz" => ch.bandwidth_hz.to_string(),
        "k_los" => ch.k_los.to_string(),
        "k_nlos" => ch.k_nlos.to_string(),
        "num_paths" => ch.num_paths.to_string(),
        "max_delay_spread_s" => ch.max_delay_spread_s.to_string(),
        "ref_pathloss_1m_db" => ch.ref_pathloss_1m_db.to_string(),
        "sinr_interference_factor" => m.sinr_interference_factor.to_string(),
        "nuisance_loss" => m.nuisance_loss.to_string(),
        "sync_model" => match m.sync_model {
            SyncModel::CommonCancel => "common_cancel".to_string(),
            SyncModel::PerNodeFull => "per_node_full".to_string(),
        },
        "sync_residual_std_s" => m.sync_residual_std_s.to_string(),
        "sync_common_std_s" => m.sync_common_std_s.to_string(),
        "tdoa_noise_scale" => m.tdoa_noise_scale.to_string(),
        "selection_mode" => cfg.selection_mode.to_string(),
        "n_fixed" => cfg.n_fixed.to_string(),
        "n_fixed_sweep" => join(&cfg.n_fixed_sweep),
        "n_max" => cfg.n_max.to_string(),
        "t2_phi_prime" => match cfg.t2_phi_prime {
            PhiPrimeMode::Proxy => "proxy".to_string(),
            PhiPrimeMode::Zero => "zero".to_string(),
        },
        "solver_step_size" => s.step_size.to_string(),
        "solver_max_iterations" => s.max_iterations.to_string(),
        "solver_grad_tolerance" => s.grad_tolerance.to_string(),
        "gps_prior_std" => s.gps_prior_std.to_string(),
        "altitude_noise_std" => s.altitude_noise_std.to_string(),
        "solver_weighted" => s.weighted.to_string(),
        "solve_3d" => s.solve_3d.to_string(),
        "include_z" => cfg.include_z.to_string(),
        "trials" => cfg.trials.to_string(),
        "seed" => cfg.seed.to_string(),
        "workers" => cfg.workers.to_string(),
        "delta_los" => cfg.delta_los.to_string(),
        "delta_los_grid" => join(&cfg.delta_los_grid),
        "sweep_radii" => join(&cfg.sweep_radii),
        "sweep_altitudes" => join(&cfg.sweep_altitudes),
        "table_d2d_points" => cfg.table_d2d_points.to_string(),
        "table_h_points" => cfg.table_h_points.to_string(),
        "dump_observations" => cfg.dump_observations.to_string(),
        _ => unreachable!("key list and printer out of sync: {key}"),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("invalid value `{value}` for key `{key}`")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::config(format!(
            "invalid value `{value}` for key `{key}` (expected true/false)"
        ))),
    }
}

fn apply(cfg: &mut ScenarioConfig, key: &str, value: &str) -> Result<()> {
    let ch = &mut cfg.measurement.channel;
    match key {
        "coverage_radius" => cfg.coverage_radius = parse_num(key, value)?,
        "layers" => cfg.layers = parse_num(key, value)?,
        "uav_altitude" => cfg.uav_altitude = parse_num(key, value)?,
        "uav_offset" => {
            cfg.uav_offset = if value == "random" {
                UavOffset::Random
            } else {
                UavOffset::Fixed(parse_num(key, value)?)
            }
        }
        "node_altitude_max" => cfg.node_altitude_max = parse_num(key, value)?,
        "carrier_freq_hz" => ch.carrier_freq_hz = parse_num(key, value)?,
        "tx_power_dbm" => ch.tx_power_dbm = parse_num(key, value)?,
        "noise_floor_dbm" => ch.noise_floor_dbm = parse_num(key, value)?,
        "bandwidth_hz" => ch.bandwidth_hz = parse_num(key, value)?,
        "k_los" => ch.k_los = parse_num(key, value)?,
        "k_nlos" => ch.k_nlos = parse_num(key, value)?,
        "num_paths" => ch.num_paths = parse_num(key, value)?,
        "max_delay_spread_s" => ch.max_delay_spread_s = parse_num(key, value)?,
        "ref_pathloss_1m_db" => ch.ref_pathloss_1m_db = parse_num(key, value)?,
        "sinr_interference_factor" => {
            cfg.measurement.sinr_interference_factor = parse_num(key, value)?
        }
        "nuisance_loss" => cfg.measurement.nuisance_loss = parse_num(key, value)?,
        "sync_model" => {
            cfg.measurement.sync_model = match value {
                "common_cancel" => SyncModel::CommonCancel,
                "per_node_full" => SyncModel::PerNodeFull,
                _ => {
                    return Err(Error::config(format!(
                        "invalid value `{value}` for key `sync_model` \
                         (expected common_cancel|per_node_full)"
                    )))
                }
            }
        }
        "sync_residual_std_s" => cfg.measurement.sync_residual_std_s = parse_num(key, value)?,
        "sync_common_std_s" => cfg.measurement.sync_common_std_s = parse_num(key, value)?,
        "tdoa_noise_scale" => cfg.measurement.tdoa_noise_scale = parse_num(key, value)?,
        "selection_mode" => {
            cfg.selection_mode = match value {
                "fixed_n" => SelectionMode::FixedN,
                "alg1" => SelectionMode::Alg1,
                "empirical" => SelectionMode::Empirical,
                _ => {
                    return Err(Error::config(format!(
                        "invalid value `{value}` for key `selection_mode` \
                         (expected fixed_n|alg1|empirical)"
                    )))
                }
            }
        }
        "n_fixed" => cfg.n_fixed = parse_num(key, value)?,
        "n_fixed_sweep" => cfg.n_fixed_sweep = parse_list(key, value)?,
        "n_max" => cfg.n_max = parse_num(key, value)?,
        "t2_phi_prime" => {
            cfg.t2_phi_prime = match value {
                "proxy" => PhiPrimeMode::Proxy,
                "zero" => PhiPrimeMode::Zero,
                _ => {
                    return Err(Error::config(format!(
                        "invalid value `{value}` for key `t2_phi_prime` (expected proxy|zero)"
                    )))
                }
            }
        }
        "solver_step_size" => cfg.solver.step_size = parse_num(key, value)?,
        "solver_max_iterations" => cfg.solver.max_iterations = parse_num(key, value)?,
        "solver_grad_tolerance" => cfg.solver.grad_tolerance = parse_num(key, value)?,
        "gps_prior_std" => cfg.solver.gps_prior_std = parse_num(key, value)?,
        "altitude_noise_std" => cfg.solver.altitude_noise_std = parse_num(key, value)?,
        "solver_weighted" => cfg.solver.weighted = parse_bool(key, value)?,
        "solve_3d" => cfg.solver.solve_3d = parse_bool(key, value)?,
        "include_z" => cfg.include_z = parse_bool(key, value)?,
        "trials" => cfg.trials = parse_num(key, value)?,
        "seed" => cfg.seed = parse_num(key, value)?,
        "workers" => cfg.workers = parse_num(key, value)?,
        "delta_los" => cfg.delta_los = parse_num(key, value)?,
        "delta_los_grid" => cfg.delta_los_grid = parse_list(key, value)?,
        "sweep_radii" => cfg.sweep_radii = parse_list(key, value)?,
        "sweep_altitudes" => cfg.sweep_altitudes = parse_list(key, value)?,
        "table_d2d_points" => cfg.table_d2d_points = parse_num(key, value)?,
        "table_h_points" => cfg.table_h_points = parse_num(key, value)?,
        "dump_observations" => cfg.dump_observations = parse_bool(key, value)?,
        _ => {
            let valid = KEYS.iter().map(|(k, _)| *k).collect::<Vec<_>>().join(", ");
            return Err(Error::config(format!(
                "unknown config key `{key}`; valid keys: {valid}"
            )));
        }
    }
    Ok(())
}

/// Renders every key (all defaulted fields included) in `key = value` form.
pub fn print_config(cfg: &ScenarioConfig) -> String {
    let mut out = String::from("# Scenario configuration; every key is optional and defaults\n");
    out.push_str("# to the value shown here.\n");
    for (key, section) in KEYS {
        if !section.is_empty() {
            out.push_str(&format!("\n# {section}\n"));
        }
        out.push_str(&format!("{key} = {}\n", value_of(cfg, key)));
    }
    out
}

/// Parses config text: one `key = value` per line, `#` starts a comment,
/// blank lines ignored, unknown keys rejected. Unset keys keep defaults.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(format!(
                "line {}: expected `key = value`, got `{line}`",
                lineno + 1
            ))
        })?;
        apply(&mut cfg, key.trim(), value.trim())?;
    }
    Ok(cfg)
}

/// Reads and parses a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::config(format!("cannot read config file {}: {e}", path.display()))
    })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let cfg = ScenarioConfig::default();
        cfg.validate().unwrap();
        let text = print_config(&cfg);
        let parsed = parse_config(&text).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn non_default_values_round_trip() {
        let mut cfg = ScenarioConfig::default();
        cfg.coverage_radius = 90.0;
        cfg.uav_offset = UavOffset::Fixed(12.5);
        cfg.measurement.sync_model = SyncModel::PerNodeFull;
        cfg.measurement.channel.k_los = 7.25;
        cfg.selection_mode = SelectionMode::Empirical;
        cfg.t2_phi_prime = PhiPrimeMode::Zero;
        cfg.n_fixed_sweep = vec![3, 5, 9];
        cfg.delta_los_grid = vec![-0.25, 0.05];
        cfg.solver.weighted = true;
        cfg.solver.grad_tolerance = 1e-8;
        cfg.trials = 37;
        cfg.workers = 3;
        cfg.dump_observations = true;
        let parsed = parse_config(&print_config(&cfg)).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn every_printed_line_is_parseable_alone() {
        let text = print_config(&ScenarioConfig::default());
        for line in text.lines() {
            let stripped = line.split('#').next().unwrap().trim();
            if stripped.is_empty() {
                continue;
            }
            parse_config(line).unwrap();
        }
    }

    #[test]
    fn unknown_key_lists_valid_keys() {
        let err = parse_config("no_such_knob = 3").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown config key `no_such_knob`"), "{msg}");
        assert!(msg.contains("coverage_radius"), "{msg}");
        assert!(msg.contains("dump_observations"), "{msg}");
    }

    #[test]
    fn comments_blanks_and_overrides() {
        let cfg = parse_config(
            "# full-line comment\n\
             \n\
             seed = 11   # trailing comment\n\
             seed = 12\n\
             trials = 5\n\
             uav_offset = 30\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 12);
        assert_eq!(cfg.trials, 5);
        assert_eq!(cfg.uav_offset, UavOffset::Fixed(30.0));
    }

    #[test]
    fn malformed_lines_and_values_error() {
        assert!(parse_config("coverage_radius").is_err());
        assert!(parse_config("trials = many").is_err());
        assert!(parse_config("solve_3d = yes").is_err());
        assert!(parse_config("sync_model = sometimes").is_err());
        assert!(parse_config("n_fixed_sweep = 3,4,x").is_err());
    }

    #[test]
    fn validation_rejects_out_of_range_fields() {
        let bad = |text: &str| parse_config(text).unwrap().validate().unwrap_err();
        bad("n_fixed_sweep = 2,3");
        bad("n_fixed_sweep = 19,21");
        bad("layers = 0");
        bad("trials = 0");
        bad("uav_offset = 100"); // beyond R/2 for the default R = 120
        bad("n_fixed = 25");
        bad("delta_los = 1.5");
        bad("table_d2d_points = 1");
        bad("k_los = 0.01"); // below k_nlos
    }

    #[test]
    fn missing_file_errors() {
        let err = load_config("/definitely/not/here.cfg").unwrap_err();
        assert!(err.to_string().contains("cannot read config file"));
    }
}
