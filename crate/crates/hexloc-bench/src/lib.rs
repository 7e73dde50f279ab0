//! Shared scenario builders for the hexloc benchmarks.

use hexloc_core::harness::{CellSpec, ScenarioConfig, SelectionMode};

/// The reference scenario trimmed to benchmark scale: full 91-node grid,
/// deterministic worker layout, no CSV side effects.
pub fn bench_config(trials: u64) -> ScenarioConfig {
    ScenarioConfig {
        trials,
        workers: 1,
        ..ScenarioConfig::default()
    }
}

/// One optimum-finder cell at the reference radius and altitude.
pub fn alg1_cell() -> CellSpec {
    CellSpec {
        mode: SelectionMode::Alg1,
        n_policy: None,
        coverage_radius: 120.0,
        uav_altitude: 20.0,
        delta_los: 0.0,
    }
}

/// An ascending distance profile resembling an R = 120 deployment seen from
/// a quarter-radius offset (layered growth, slight jitter for realism).
pub fn sample_distances(count: usize) -> Vec<f64> {
    (1..=count)
        .map(|n| {
            let n = n as f64;
            30.0 + 72.0 * (n / 3.0).sqrt() + 1.5 * (n * 0.7).sin()
        })
        .collect()
}
