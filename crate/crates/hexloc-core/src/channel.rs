//! Air-to-ground statistical channel model.
//!
//! The model combines an altitude-dependent LOS probability with LOS/NLOS
//! path-loss exponent branches into a mean exponent η̄(d₂D, h). The mean
//! exponent, its first two distance derivatives, and a precomputed lookup
//! table of η̄ drive both measurement synthesis and node selection.

use crate::error::{Error, Result};
use std::io::{BufRead, Write};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// Lower altitude bound (meters) of the model validity region.
pub const MIN_MODEL_ALTITUDE_M: f64 = 20.0;
/// Upper altitude bound (meters) of the model validity region.
pub const MAX_MODEL_ALTITUDE_M: f64 = 120.0;

/// Horizontal distance / relative altitude pair describing one air-to-ground
/// link. Altitude is the UAV height above the ground node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry2D {
    d2d: f64,
    h: f64,
}

impl Geometry2D {
    /// Validating constructor: requires `d2d ≥ 0` and
    /// `h ∈ [20, 120]` (model validity).
    pub fn new(d2d: f64, h: f64) -> Result<Self> {
        if !d2d.is_finite() || d2d < 0.0 {
            return Err(Error::domain(format!(
                "horizontal distance must be finite and non-negative, got {d2d}"
            )));
        }
        if !h.is_finite() || !(MIN_MODEL_ALTITUDE_M..=MAX_MODEL_ALTITUDE_M).contains(&h) {
            return Err(Error::domain(format!(
                "altitude {h} m outside model validity [{MIN_MODEL_ALTITUDE_M}, {MAX_MODEL_ALTITUDE_M}]"
            )));
        }
        Ok(Self { d2d, h })
    }

    /// Clamping constructor for measurement paths where geometry comes from
    /// noisy data: altitude is clamped into the validity range and the
    /// distance floored at zero instead of failing.
    pub fn clamped(d2d: f64, h: f64) -> Self {
        Self {
            d2d: d2d.max(0.0),
            h: h.clamp(MIN_MODEL_ALTITUDE_M, MAX_MODEL_ALTITUDE_M),
        }
    }

    /// Horizontal distance, meters.
    pub fn d2d(&self) -> f64 {
        self.d2d
    }

    /// UAV altitude above the node, meters.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Slant (3D) distance, meters.
    pub fn d3d(&self) -> f64 {
        self.d2d.hypot(self.h)
    }
}

/// Radio parameters of the reference broadcast links.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    /// Carrier frequency f_c, Hz.
    pub carrier_freq_hz: f64,
    /// Transmit power P_t, dBm.
    pub tx_power_dbm: f64,
    /// Total noise floor over the signal bandwidth, dBm.
    pub noise_floor_dbm: f64,
    /// Signal bandwidth β, Hz.
    pub bandwidth_hz: f64,
    /// Rician K factor on LOS links.
    pub k_los: f64,
    /// Rician K factor on NLOS links.
    pub k_nlos: f64,
    /// Number of multipath components N_p.
    pub num_paths: u32,
    /// Maximum delay spread τ_max, seconds.
    pub max_delay_spread_s: f64,
    /// Path loss at the 1 m reference distance, dB.
    pub ref_pathloss_1m_db: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        let carrier_freq_hz = 3.5e9;
        Self {
            carrier_freq_hz,
            tx_power_dbm: 15.0,
            noise_floor_dbm: -91.0,
            bandwidth_hz: 1.0e7,
            k_los: 3.0,
            k_nlos: 0.1,
            num_paths: 4,
            max_delay_spread_s: 2.0e-7,
            ref_pathloss_1m_db: free_space_pathloss_1m_db(carrier_freq_hz),
        }
    }
}

impl ChannelParams {
    /// Checks the structural invariants of the parameter set.
    pub fn validate(&self) -> Result<()> {
        if self.bandwidth_hz <= 0.0 {
            return Err(Error::config("bandwidth must be positive"));
        }
        if !(self.k_los >= self.k_nlos && self.k_nlos >= 0.0) {
            return Err(Error::config("Rician factors must satisfy k_los ≥ k_nlos ≥ 0"));
        }
        if self.num_paths < 1 {
            return Err(Error::config("num_paths must be at least 1"));
        }
        Ok(())
    }
}

/// Free-space path loss at a 1 m reference distance, dB.
pub fn free_space_pathloss_1m_db(carrier_freq_hz: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * carrier_freq_hz / SPEED_OF_LIGHT_M_S).log10()
}

/// Altitude-dependent LOS breakpoint distance d1 and decay scale p1, meters.
///
/// `d1 = max(294.05·log10(h) − 432.94, 18)`, `p1 = 233.98·log10(h) − 0.95`.
pub fn breakpoint_params(h: f64) -> Result<(f64, f64)> {
    if !h.is_finite() || h <= 1.0 {
        return Err(Error::domain(format!(
            "altitude must exceed 1 m for breakpoint evaluation, got {h}"
        )));
    }
    let log_h = h.log10();
    let d1 = (294.05 * log_h - 432.94).max(18.0);
    let p1 = 233.98 * log_h - 0.95;
    Ok((d1, p1))
}

/// LOS probability of an air-to-ground link.
///
/// Returns 1 inside the breakpoint region (`d2d ≤ d1`), otherwise
/// `(1 − d1/d2d)·exp(−d2d/p1) + d1/d2d`, which is continuous at `d2d = d1`.
pub fn los_probability(g: Geometry2D) -> f64 {
    let (d1, p1) = breakpoint_params(g.h()).expect("validated geometry has h > 1");
    let d = g.d2d();
    if d <= d1 {
        1.0
    } else {
        (1.0 - d1 / d) * (-d / p1).exp() + d1 / d
    }
}

/// Path-loss exponent of a pure-LOS link at altitude `h`.
pub fn eta_los(h: f64) -> f64 {
    2.225 - 0.05 * h.log10()
}

/// Path-loss exponent of a pure-NLOS link at altitude `h`.
pub fn eta_nlos(h: f64) -> f64 {
    4.32 - 0.76 * h.log10()
}

/// Mean path-loss exponent η̄ = η_NLOS·(1 − P_los) + η_LOS·P_los.
pub fn mean_path_loss_exponent(g: Geometry2D) -> f64 {
    let p = los_probability(g);
    eta_nlos(g.h()) * (1.0 - p) + eta_los(g.h()) * p
}

/// First and second derivatives of η̄ with respect to horizontal distance.
///
/// Inside the breakpoint region both derivatives are zero (η̄ is constant
/// there); beyond it, with `h ∈ [20, 120]`, η̄ is monotonically increasing
/// with diminishing rate: `η′ ≥ 0` and `η″ ≤ 0`.
pub fn eta_derivatives(g: Geometry2D) -> Result<(f64, f64)> {
    let d = g.d2d();
    if d == 0.0 {
        return Err(Error::domain("eta derivatives undefined at d2d = 0"));
    }
    let (d1, p1) = breakpoint_params(g.h())?;
    if d <= d1 {
        return Ok((0.0, 0.0));
    }
    // η̄ = η_N + (η_L − η_N)·P_los, so η̄⁽ⁿ⁾ = (η_L − η_N)·P_los⁽ⁿ⁾.
    let coeff_gap = eta_los(g.h()) - eta_nlos(g.h());
    let decay = (-d / p1).exp();
    let p_prime = (d1 / (d * d) - (1.0 - d1 / d) / p1) * decay - d1 / (d * d);
    let p_second = (-2.0 * d1 / (d * d * d) - 2.0 * d1 / (p1 * d * d)
        + (1.0 - d1 / d) / (p1 * p1))
        * decay
        + 2.0 * d1 / (d * d * d);
    Ok((coeff_gap * p_prime, coeff_gap * p_second))
}

/// Mean path loss in dB under the log-distance model
/// `PL = PL_ref(1 m) + 10·η̄·log10(d3d)`.
pub fn mean_path_loss_db(g: Geometry2D, params: &ChannelParams) -> Result<f64> {
    let d3d = g.d3d();
    if d3d < 1.0 {
        return Err(Error::domain(format!(
            "slant distance {d3d:.3} m below the 1 m reference"
        )));
    }
    Ok(params.ref_pathloss_1m_db + 10.0 * mean_path_loss_exponent(g) * d3d.log10())
}

/// Precomputed η̄ lookup table over a (d₂D, h) grid with bilinear
/// interpolation and edge clamping.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaTable {
    d2d_grid: Vec<f64>,
    h_grid: Vec<f64>,
    /// Row-major values: `values[i * h_grid.len() + j]` is η̄ at
    /// `(d2d_grid[i], h_grid[j])`.
    values: Vec<f64>,
}

impl EtaTable {
    /// Assembles a table from raw parts, checking shape and ordering.
    pub fn from_parts(d2d_grid: Vec<f64>, h_grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if d2d_grid.len() < 2 || h_grid.len() < 2 {
            return Err(Error::config("eta table needs at least a 2x2 grid"));
        }
        if values.len() != d2d_grid.len() * h_grid.len() {
            return Err(Error::config(format!(
                "eta table shape mismatch: {}x{} grid with {} values",
                d2d_grid.len(),
                h_grid.len(),
                values.len()
            )));
        }
        if !d2d_grid.windows(2).all(|w| w[0] < w[1]) || !h_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::config("eta table grids must be strictly ascending"));
        }
        Ok(Self { d2d_grid, h_grid, values })
    }

    /// Distance grid, meters.
    pub fn d2d_grid(&self) -> &[f64] {
        &self.d2d_grid
    }

    /// Altitude grid, meters.
    pub fn h_grid(&self) -> &[f64] {
        &self.h_grid
    }

    /// Bilinear lookup of η̄ with clamping to the grid edges; out-of-range
    /// queries (RSSI-estimated distances can exceed the tabulated span) take
    /// the nearest edge value.
    pub fn lookup(&self, d2d: f64, h: f64) -> f64 {
        let (i, tx) = bracket(&self.d2d_grid, d2d);
        let (j, ty) = bracket(&self.h_grid, h);
        let nh = self.h_grid.len();
        let v00 = self.values[i * nh + j];
        let v10 = self.values[(i + 1) * nh + j];
        let v01 = self.values[i * nh + j + 1];
        let v11 = self.values[(i + 1) * nh + j + 1];
        let lo = v00 + (v10 - v00) * tx;
        let hi = v01 + (v11 - v01) * tx;
        lo + (hi - lo) * ty
    }

    /// Writes the table as CSV: header row carries the altitude grid, first
    /// column the distance grid, body the η̄ values at 6 decimal places.
    pub fn to_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = self.h_grid.iter().map(|h| format!("{h}")).collect();
        writeln!(out, "d2d_m,{}", header.join(","))?;
        let nh = self.h_grid.len();
        for (i, d) in self.d2d_grid.iter().enumerate() {
            let row: Vec<String> = (0..nh)
                .map(|j| format!("{:.6}", self.values[i * nh + j]))
                .collect();
            writeln!(out, "{d},{}", row.join(","))?;
        }
        Ok(())
    }

    /// Parses a table previously written by [`EtaTable::to_csv`].
    pub fn from_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse("empty eta table CSV"))??;
        let mut h_grid = Vec::new();
        for field in header.split(',').skip(1) {
            h_grid.push(parse_float(field)?);
        }
        let mut d2d_grid = Vec::new();
        let mut values = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let d = fields
                .next()
                .ok_or_else(|| Error::parse("eta table row missing distance column"))?;
            d2d_grid.push(parse_float(d)?);
            let mut row = 0usize;
            for field in fields {
                values.push(parse_float(field)?);
                row += 1;
            }
            if row != h_grid.len() {
                return Err(Error::parse(format!(
                    "eta table row has {row} values, expected {}",
                    h_grid.len()
                )));
            }
        }
        Self::from_parts(d2d_grid, h_grid, values)
    }
}

fn parse_float(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::parse(format!("bad float {s:?}: {e}")))
}

/// Finds the bracketing interval index and interpolation weight for `x` in an
/// ascending grid, clamping beyond the edges.
fn bracket(grid: &[f64], x: f64) -> (usize, f64) {
    let n = grid.len();
    if x <= grid[0] {
        return (0, 0.0);
    }
    if x >= grid[n - 1] {
        return (n - 2, 1.0);
    }
    let i = grid.partition_point(|&g| g <= x) - 1;
    let i = i.min(n - 2);
    let t = (x - grid[i]) / (grid[i + 1] - grid[i]);
    (i, t)
}

/// Evaluates `mean_path_loss_exponent` over a uniform grid and returns the
/// interpolation table used by the selection algorithm.
pub fn build_eta_table(
    d2d_range: (f64, f64),
    h_range: (f64, f64),
    resolution: (usize, usize),
) -> Result<EtaTable> {
    let (d_lo, d_hi) = d2d_range;
    let (h_lo, h_hi) = h_range;
    let (nd, nh) = resolution;
    if nd < 2 || nh < 2 {
        return Err(Error::config("eta table resolution must be at least 2 per axis"));
    }
    if !(d_lo < d_hi) || !(h_lo < h_hi) {
        return Err(Error::config("eta table ranges must be non-degenerate"));
    }
    if d_lo < 0.0 || h_lo < MIN_MODEL_ALTITUDE_M || h_hi > MAX_MODEL_ALTITUDE_M {
        return Err(Error::config(format!(
            "eta table range outside model validity: d2d [{d_lo}, {d_hi}], h [{h_lo}, {h_hi}]"
        )));
    }
    let d2d_grid: Vec<f64> = (0..nd)
        .map(|i| d_lo + (d_hi - d_lo) * i as f64 / (nd - 1) as f64)
        .collect();
    let h_grid: Vec<f64> = (0..nh)
        .map(|j| h_lo + (h_hi - h_lo) * j as f64 / (nh - 1) as f64)
        .collect();
    let mut values = Vec::with_capacity(nd * nh);
    for &d in &d2d_grid {
        for &h in &h_grid {
            values.push(mean_path_loss_exponent(Geometry2D::new(d, h)?));
        }
    }
    EtaTable::from_parts(d2d_grid, h_grid, values)
}
