//! Gradient-descent TDoA position estimator.
//!
//! The estimator minimizes the range-difference least-squares loss over the
//! horizontal position with altitude pinned to the altimeter reading (the
//! reference nodes' altitude spread is far too small to resolve z from
//! TDoA), using plain gradient descent with a backtracking line search.

use crate::error::{Error, Result};
use crate::measurement::TdoaMeasurement;
use crate::topology::NodeSite;
use rand::Rng;
use rand_distr::StandardNormal;

/// Maximum step halvings the line search tries before declaring a stall.
const MAX_BACKTRACKS: u32 = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Initial gradient step before backtracking.
    pub step_size: f64,
    pub max_iterations: usize,
    /// Convergence threshold on the gradient norm.
    pub grad_tolerance: f64,
    /// σ_GPS of the initial horizontal fix, meters.
    pub gps_prior_std: f64,
    /// σ_h of the altimeter reading, meters.
    pub altitude_noise_std: f64,
    /// Weight residuals by 1/σ² instead of uniformly.
    pub weighted: bool,
    /// Estimate z as a third coordinate instead of pinning it.
    pub solve_3d: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step_size: 0.5,
            max_iterations: 500,
            grad_tolerance: 1e-6,
            gps_prior_std: 5.0,
            altitude_noise_std: 1.0,
            weighted: false,
            solve_3d: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::config("step_size must be positive"));
        }
        if self.max_iterations < 1 {
            return Err(Error::config("max_iterations must be at least 1"));
        }
        if !(self.grad_tolerance > 0.0) {
            return Err(Error::config("grad_tolerance must be positive"));
        }
        if self.gps_prior_std < 0.0 || self.altitude_noise_std < 0.0 {
            return Err(Error::config("prior noise stds must be non-negative"));
        }
        Ok(())
    }
}

/// Result of one localization solve.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionEstimate {
    pub xy: (f64, f64),
    pub z: f64,
    pub iterations: usize,
    pub converged: bool,
    /// RMS of the unweighted range-difference residuals, meters.
    pub residual_m: f64,
}

/// GPS-prior initialization: truth plus N(0, σ_GPS²) per axis.
pub fn initialize_from_gps<R: Rng + ?Sized>(
    true_xy: (f64, f64),
    cfg: &SolverConfig,
    rng: &mut R,
) -> (f64, f64) {
    (
        true_xy.0 + cfg.gps_prior_std * rng.sample::<f64, _>(StandardNormal),
        true_xy.1 + cfg.gps_prior_std * rng.sample::<f64, _>(StandardNormal),
    )
}

/// Altimeter reading: truth plus N(0, σ_h²).
pub fn measure_altitude<R: Rng + ?Sized>(true_h: f64, cfg: &SolverConfig, rng: &mut R) -> f64 {
    true_h + cfg.altitude_noise_std * rng.sample::<f64, _>(StandardNormal)
}

struct Pair {
    node: [f64; 3],
    reference: [f64; 3],
    range_diff: f64,
    weight: f64,
}

fn resolve_pairs(
    measurements: &[TdoaMeasurement],
    nodes: &[NodeSite],
    cfg: &SolverConfig,
) -> Result<Vec<Pair>> {
    let position = |id: usize| -> Result<[f64; 3]> {
        nodes
            .get(id)
            .filter(|n| n.id == id)
            .or_else(|| nodes.iter().find(|n| n.id == id))
            .map(|n| [n.x, n.y, n.z])
            .ok_or_else(|| Error::domain(format!("unknown node id {id}")))
    };
    measurements
        .iter()
        .map(|m| {
            if !m.range_diff_m.is_finite() {
                return Err(Error::domain("non-finite range difference"));
            }
            let weight = if cfg.weighted {
                1.0 / m.noise_std_m.max(1e-6).powi(2)
            } else {
                1.0
            };
            Ok(Pair {
                node: position(m.node_id)?,
                reference: position(m.reference_id)?,
                range_diff: m.range_diff_m,
                weight,
            })
        })
        .collect()
}

fn distance(p: [f64; 3], q: [f64; 3]) -> f64 {
    let d = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt().max(1e-9)
}

fn loss_grad(pairs: &[Pair], p: [f64; 3], solve_3d: bool) -> (f64, [f64; 3]) {
    let mut loss = 0.0;
    let mut grad = [0.0; 3];
    for pair in pairs {
        let dn = distance(p, pair.node);
        let dr = distance(p, pair.reference);
        let err = (dn - dr) - pair.range_diff;
        loss += pair.weight * err * err;
        let scale = 2.0 * pair.weight * err;
        for axis in 0..3 {
            let un = (p[axis] - pair.node[axis]) / dn;
            let ur = (p[axis] - pair.reference[axis]) / dr;
            grad[axis] += scale * (un - ur);
        }
    }
    if !solve_3d {
        grad[2] = 0.0;
    }
    (loss, grad)
}

/// The weighted least-squares loss and its analytic gradient at a trial
/// position (z component zeroed unless solving 3D). Exposed for numeric
/// verification against finite differences.
pub fn loss_and_gradient(
    measurements: &[TdoaMeasurement],
    nodes: &[NodeSite],
    position: [f64; 3],
    cfg: &SolverConfig,
) -> Result<(f64, [f64; 3])> {
    let pairs = resolve_pairs(measurements, nodes, cfg)?;
    Ok(loss_grad(&pairs, position, cfg.solve_3d))
}

fn collinear_with(pairs: &[Pair], init: (f64, f64)) -> bool {
    // Gather the distinct ground positions involved, plus the initial point.
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(pairs.len() + 2);
    for pair in pairs {
        for q in [pair.node, pair.reference] {
            if !pts.iter().any(|p| (p.0 - q[0]).abs() < 1e-9 && (p.1 - q[1]).abs() < 1e-9) {
                pts.push((q[0], q[1]));
            }
        }
    }
    pts.push(init);
    if pts.len() < 3 {
        return true;
    }
    let n = pts.len() as f64;
    let (cx, cy) = pts
        .iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0 / n, acc.1 + p.1 / n));
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in &pts {
        let (dx, dy) = (p.0 - cx, p.1 - cy);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    // Smaller eigenvalue of the 2×2 scatter matrix: zero iff collinear.
    let trace = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let lambda_min = trace / 2.0 - ((trace / 2.0).powi(2) - det).max(0.0).sqrt();
    lambda_min <= 1e-9 * trace.max(1e-12)
}

/// Minimizes Σ w·(range_diff − (‖p − x_n‖ − ‖p − x_ref‖))² by gradient
/// descent with a backtracking line search, starting from the GPS prior
/// with z pinned to `fixed_z` (unless configured to solve 3D).
pub fn localize(
    measurements: &[TdoaMeasurement],
    nodes: &[NodeSite],
    init_xy: (f64, f64),
    fixed_z: f64,
    cfg: &SolverConfig,
) -> Result<PositionEstimate> {
    localize_traced(measurements, nodes, init_xy, fixed_z, cfg).map(|(est, _)| est)
}

/// [`localize`] returning the loss value after every accepted step (the
/// first entry is the loss at the initial point).
pub fn localize_traced(
    measurements: &[TdoaMeasurement],
    nodes: &[NodeSite],
    init_xy: (f64, f64),
    fixed_z: f64,
    cfg: &SolverConfig,
) -> Result<(PositionEstimate, Vec<f64>)> {
    cfg.validate()?;
    if measurements.len() < 2 {
        return Err(Error::domain(format!(
            "{} range differences cannot fix a horizontal position",
            measurements.len()
        )));
    }
    if !(init_xy.0.is_finite() && init_xy.1.is_finite() && fixed_z.is_finite()) {
        return Err(Error::domain("non-finite initialization"));
    }
    let pairs = resolve_pairs(measurements, nodes, cfg)?;
    let degenerate = collinear_with(&pairs, init_xy);

    let mut p = [init_xy.0, init_xy.1, fixed_z];
    let (mut loss, mut grad) = loss_grad(&pairs, p, cfg.solve_3d);
    let mut trace = vec![loss];
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..cfg.max_iterations {
        let gnorm = (grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2]).sqrt();
        if gnorm <= cfg.grad_tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let mut step = cfg.step_size;
        let mut accepted = false;
        for _ in 0..=MAX_BACKTRACKS {
            let candidate = [p[0] - step * grad[0], p[1] - step * grad[1], p[2] - step * grad[2]];
            let (cand_loss, cand_grad) = loss_grad(&pairs, candidate, cfg.solve_3d);
            if cand_loss < loss {
                p = candidate;
                loss = cand_loss;
                grad = cand_grad;
                trace.push(loss);
                accepted = true;
                break;
            }
            step /= 2.0;
        }
        if !accepted {
            // Line search stalled: no descent direction at float precision.
            let gnorm = (grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2]).sqrt();
            converged = gnorm <= cfg.grad_tolerance;
            break;
        }
    }
    if !converged {
        let gnorm = (grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2]).sqrt();
        converged = gnorm <= cfg.grad_tolerance;
    }

    // Unweighted RMS residual in meters for diagnostics.
    let rms = (pairs
        .iter()
        .map(|pair| {
            let err = (distance(p, pair.node) - distance(p, pair.reference)) - pair.range_diff;
            err * err
        })
        .sum::<f64>()
        / pairs.len() as f64)
        .sqrt();

    Ok((
        PositionEstimate {
            xy: (p[0], p[1]),
            z: p[2],
            iterations,
            converged: converged && !degenerate,
            residual_m: rms,
        },
        trace,
    ))
}
