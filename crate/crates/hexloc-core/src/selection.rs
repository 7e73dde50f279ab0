//! Node-count selection: the localization-variance objective F_θ(N) and the
//! RSSI-based optimum finder.
//!
//! The variance of a TDoA position estimate over the N nearest nodes scales
//! with F_θ(N) = Φ²(N)/N³, where Φ(N) sums per-link costs
//! φ = (d₂D² + h²)^(η̄/4). Differentiating via an Euler–Maclaurin expansion
//! factors F′_θ into a positive term times
//!
//! ```text
//! T₂(N) = φ(N) − (3 / 2N)·Φ(N) + φ′(N)/2,
//! ```
//!
//! so the negative-to-positive crossing of T₂ marks the optimal node count.
//! The optimum finder evaluates T₂ from RSSI-estimated distances alone and
//! compensates for η mismatch by re-counting after recentring T₂ on its mean.

use crate::channel::{eta_derivatives, EtaTable, Geometry2D};
use crate::error::{Error, Result};
use crate::topology::layer_of_index;

/// Hard bounds on the selected node count ("limit the reference numbers").
pub const N_OPT_MIN: usize = 3;
/// Upper selection bound.
pub const N_OPT_MAX: usize = 20;

/// One ranked candidate node as seen through RSSI.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateLink {
    /// Index of the node in the caller's distance vector.
    pub node_id: usize,
    /// RSSI-estimated 3D distance, meters.
    pub d_est: f64,
    /// Horizontal distance implied by `d_est` and the known altitude, meters.
    pub d2d_est: f64,
    /// Mean path-loss exponent looked up at (`d2d_est`, h).
    pub eta_bar: f64,
    /// Link cost φ = (d2d_est² + h²)^(η̄/4).
    pub phi: f64,
}

/// How the per-index horizontal-distance slope d′₂D(N) is supplied to φ′.
#[derive(Debug, Clone, PartialEq)]
pub enum DistanceSlope {
    /// Layer proxy Δ̂/(3k): `delta_hat` over three times the hex layer of N
    /// (Δ̂ itself for the central layer k = 0). This is all an RSSI-only
    /// observer can infer, using its nearest estimated distance as Δ̂.
    LayerProxy { delta_hat: f64 },
    /// Explicit per-index increments; entry N−1 holds d′₂D(N), with the
    /// N = 1 entry holding the nearest distance itself.
    PerIndex(Vec<f64>),
    /// Drop the φ′/2 term entirely (φ ≫ φ′ on the modeled domain).
    Zero,
}

/// Outcome of the mismatch-compensated negative count of a T₂ sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoptDecision {
    /// Negative count of the raw T₂ sequence.
    pub raw: usize,
    /// Negative count after recentring T₂ on its mean.
    pub compensated: usize,
    /// Final clamped selection ∈ [3, 20].
    pub n_opt: usize,
}

/// Final output of the RSSI-based optimum finder.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// Candidates sorted ascending by estimated distance (first `n_max`).
    pub candidates: Vec<CandidateLink>,
    /// T₂(N) for N = 1..=n_max over the sorted candidates.
    pub t2_sequence: Vec<f64>,
    /// Negative count before mismatch compensation.
    pub n_opt_raw: usize,
    /// Negative count after mismatch compensation.
    pub n_opt_compensated: usize,
    /// Final selection, clamped to [3, 20].
    pub n_opt: usize,
    /// Ids of the `n_opt` nearest candidates by estimated distance.
    pub selected_ids: Vec<usize>,
}

/// Link cost φ = (d2d² + h²)^(η/4).
pub fn phi(d2d: f64, h: f64, eta: f64) -> f64 {
    (d2d * d2d + h * h).powf(eta / 4.0)
}

/// Closed-form φ′(N) = ∂φ/∂d₂D · d′₂D(N).
///
/// With S = d₂D² + h², ∂φ/∂d₂D = φ·[(η′/4)·ln S + η·d₂D/(2S)], using the
/// analytic channel derivatives at (d₂D, h).
pub fn phi_prime_analytic(d2d: f64, h: f64, d2d_prime: f64) -> Result<f64> {
    let g = Geometry2D::new(d2d, h)?;
    let (eta_p, _) = eta_derivatives(g)?;
    let eta = crate::channel::mean_path_loss_exponent(g);
    Ok(phi_prime_from_parts(d2d, h, eta, eta_p, d2d_prime))
}

/// Closed-form φ″(N) along the profile, dropping the d″₂D summand (the
/// profile's second distance differences are ≈ 0 away from layer edges).
pub fn phi_double_prime_analytic(d2d: f64, h: f64, d2d_prime: f64) -> Result<f64> {
    let g = Geometry2D::new(d2d, h)?;
    let (eta_p, eta_pp) = eta_derivatives(g)?;
    let eta = crate::channel::mean_path_loss_exponent(g);
    let s = d2d * d2d + h * h;
    let v = (eta_p / 4.0) * s.ln() + eta * d2d / (2.0 * s);
    let v_prime =
        (eta_pp / 4.0) * s.ln() + eta_p * d2d / s + (eta / 2.0) * (s - 2.0 * d2d * d2d) / (s * s);
    Ok(phi(d2d, h, eta) * (v * v + v_prime) * d2d_prime * d2d_prime)
}

fn phi_prime_from_parts(d2d: f64, h: f64, eta: f64, eta_prime: f64, d2d_prime: f64) -> f64 {
    let s = d2d * d2d + h * h;
    let v = (eta_prime / 4.0) * s.ln() + eta * d2d / (2.0 * s);
    phi(d2d, h, eta) * v * d2d_prime
}

/// Negative-count decision rule with η-mismatch compensation:
/// count negatives, recentre T₂ on its mean, re-count, average the two
/// counts (rounding half away from zero), and clamp to [3, 20].
pub fn nopt_from_t2(t2: &[f64]) -> NoptDecision {
    let raw = t2.iter().filter(|v| **v < 0.0).count();
    let mean = t2.iter().sum::<f64>() / t2.len().max(1) as f64;
    // Recentre toward zero from whichever side the mean sits on.
    let shift = if mean > 0.0 { -mean } else { mean.abs() };
    let compensated = t2.iter().filter(|v| **v + shift < 0.0).count();
    let n = ((raw + compensated) as f64 / 2.0).round() as usize;
    NoptDecision {
        raw,
        compensated,
        n_opt: n.clamp(N_OPT_MIN, N_OPT_MAX),
    }
}

/// A ranked candidate set with everything needed to evaluate Φ, F_θ and T₂.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateProfile {
    links: Vec<CandidateLink>,
    h: f64,
    slope: DistanceSlope,
}

impl CandidateProfile {
    /// Builds a profile from RSSI-estimated 3D distances: sorts ascending
    /// (ties by index), derives d₂D = √(d_est² − h²) clamped to ≥ 1 m, and
    /// looks up η̄ per candidate.
    ///
    /// Estimates shorter than the altitude (a geometric impossibility caused
    /// by fading) are kept with d₂D clamped to 1 m rather than rejected:
    /// they are the strongest links, and discarding them for measurement
    /// noise would penalize exactly the best candidates.
    pub fn from_distances(
        d_est: &[f64],
        h: f64,
        table: &EtaTable,
        slope: DistanceSlope,
    ) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::domain(format!("altitude {h} must be finite and positive")));
        }
        if d_est.is_empty() {
            return Err(Error::domain("candidate distance list is empty"));
        }
        if let Some(bad) = d_est.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(Error::domain(format!("estimated distance {bad} is not finite-positive")));
        }
        let mut order: Vec<usize> = (0..d_est.len()).collect();
        order.sort_by(|&a, &b| d_est[a].partial_cmp(&d_est[b]).unwrap().then(a.cmp(&b)));
        let links = order
            .into_iter()
            .map(|id| {
                let d = d_est[id];
                let d2d = (d * d - h * h).max(0.0).sqrt().max(1.0);
                let eta_bar = table.lookup(d2d, h);
                CandidateLink {
                    node_id: id,
                    d_est: d,
                    d2d_est: d2d,
                    eta_bar,
                    phi: phi(d2d, h, eta_bar),
                }
            })
            .collect();
        Self::from_links(links, h, slope)
    }

    /// Builds a profile directly from an ascending horizontal-distance
    /// profile (e.g. a Monte Carlo-averaged d₂D(N) sequence).
    pub fn from_d2d_profile(
        d2d: &[f64],
        h: f64,
        table: &EtaTable,
        slope: DistanceSlope,
    ) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::domain(format!("altitude {h} must be finite and positive")));
        }
        if d2d.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::domain("d2d profile must be ascending"));
        }
        let links = d2d
            .iter()
            .enumerate()
            .map(|(id, &d)| {
                if !(d.is_finite() && d >= 0.0) {
                    return Err(Error::domain(format!("d2d {d} is not finite-nonnegative")));
                }
                let d = d.max(1.0);
                let eta_bar = table.lookup(d, h);
                Ok(CandidateLink {
                    node_id: id,
                    d_est: d.hypot(h),
                    d2d_est: d,
                    eta_bar,
                    phi: phi(d, h, eta_bar),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_links(links, h, slope)
    }

    fn from_links(links: Vec<CandidateLink>, h: f64, slope: DistanceSlope) -> Result<Self> {
        if let DistanceSlope::PerIndex(incs) = &slope {
            if incs.len() < links.len() {
                return Err(Error::domain(format!(
                    "per-index slope has {} entries for {} candidates",
                    incs.len(),
                    links.len()
                )));
            }
        }
        Ok(Self { links, h, slope })
    }

    pub fn links(&self) -> &[CandidateLink] {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    fn check_n(&self, n: usize) -> Result<()> {
        if n < 1 || n > self.links.len() {
            return Err(Error::domain(format!(
                "N = {n} outside candidate range 1..={}",
                self.links.len()
            )));
        }
        Ok(())
    }

    /// Partial cost sum Φ(N) over the N nearest candidates.
    pub fn capital_phi(&self, n: usize) -> Result<f64> {
        self.check_n(n)?;
        Ok(self.links[..n].iter().map(|l| l.phi).sum())
    }

    /// Localization-variance objective F_θ(N) = Φ²(N)/N³.
    pub fn objective_f(&self, n: usize) -> Result<f64> {
        let sum = self.capital_phi(n)?;
        Ok(sum * sum / (n as f64).powi(3))
    }

    /// The distance slope d′₂D(N) used by φ′.
    pub fn d2d_prime(&self, n: usize) -> Result<f64> {
        self.check_n(n)?;
        Ok(match &self.slope {
            DistanceSlope::LayerProxy { delta_hat } => {
                let k = layer_of_index(n);
                if k == 0 {
                    *delta_hat
                } else {
                    delta_hat / (3.0 * k as f64)
                }
            }
            DistanceSlope::PerIndex(incs) => incs[n - 1],
            DistanceSlope::Zero => 0.0,
        })
    }

    /// φ′(N) along the profile at candidate N.
    pub fn phi_prime(&self, n: usize) -> Result<f64> {
        self.check_n(n)?;
        let link = &self.links[n - 1];
        // η̄ comes from the table like everything else visible to the
        // selector; η′ has no tabulated form and uses the closed-form
        // derivative at the clamped model geometry.
        let g = Geometry2D::clamped(link.d2d_est, self.h);
        let (eta_p, _) = eta_derivatives(g)?;
        Ok(phi_prime_from_parts(
            link.d2d_est,
            self.h,
            link.eta_bar,
            eta_p,
            self.d2d_prime(n)?,
        ))
    }

    /// T₂(N) = φ(N) − (3/2N)·Φ(N) + φ′(N)/2.
    pub fn t2(&self, n: usize) -> Result<f64> {
        self.check_n(n)?;
        let link = &self.links[n - 1];
        Ok(link.phi - 1.5 * self.capital_phi(n)? / n as f64 + self.phi_prime(n)? / 2.0)
    }

    /// T₂ over every candidate count N = 1..=len.
    pub fn t2_sequence(&self) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.links.len());
        let mut sum = 0.0;
        for (i, link) in self.links.iter().enumerate() {
            let n = i + 1;
            sum += link.phi;
            out.push(link.phi - 1.5 * sum / n as f64 + self.phi_prime(n)? / 2.0);
        }
        Ok(out)
    }

    /// Smallest N with T₂(N) ≥ 0; the full candidate count if T₂ never
    /// crosses (the optimum lies beyond the list).
    pub fn theoretical_n_opt(&self) -> Result<usize> {
        if self.links.len() < 2 {
            return Err(Error::domain("need at least two candidates for an optimum"));
        }
        let t2 = self.t2_sequence()?;
        Ok(t2.iter().position(|v| *v >= 0.0).map_or(t2.len(), |i| i + 1))
    }

    /// Exhaustive argmin of F_θ(N) over N = 1..=len (smallest N on ties).
    pub fn brute_force_argmin(&self) -> Result<usize> {
        if self.is_empty() {
            return Err(Error::domain("empty candidate profile"));
        }
        let mut best = (1usize, f64::INFINITY);
        let mut sum = 0.0;
        for (i, link) in self.links.iter().enumerate() {
            let n = i + 1;
            sum += link.phi;
            let f = sum * sum / (n as f64).powi(3);
            if f < best.1 {
                best = (n, f);
            }
        }
        Ok(best.0)
    }
}

/// Which φ′ surrogate the optimum finder feeds into T₂.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiPrimeMode {
    /// Layer proxy d′₂D = Δ̂/(3k) with Δ̂ the nearest estimated distance.
    Proxy,
    /// Treat φ′ as zero (φ dominates φ′ on the modeled domain).
    Zero,
}

/// The RSSI-based optimum finder: ranks candidates by estimated distance,
/// evaluates T₂ over the first `n_max`, counts negatives with η-mismatch
/// compensation, and returns the clamped selection.
pub fn rssi_optimum_finder(
    d_est: &[f64],
    h: f64,
    table: &EtaTable,
    n_max: usize,
) -> Result<SelectionResult> {
    rssi_optimum_finder_with_mode(d_est, h, table, n_max, PhiPrimeMode::Proxy)
}

/// [`rssi_optimum_finder`] with an explicit φ′ surrogate choice.
pub fn rssi_optimum_finder_with_mode(
    d_est: &[f64],
    h: f64,
    table: &EtaTable,
    n_max: usize,
    mode: PhiPrimeMode,
) -> Result<SelectionResult> {
    if n_max < N_OPT_MIN {
        return Err(Error::domain(format!("n_max {n_max} below the minimum selection {N_OPT_MIN}")));
    }
    if d_est.len() < n_max {
        return Err(Error::domain(format!(
            "{} candidates cannot fill the n_max = {n_max} horizon",
            d_est.len()
        )));
    }
    let full = CandidateProfile::from_distances(d_est, h, table, DistanceSlope::Zero)?;
    let slope = match mode {
        PhiPrimeMode::Proxy => DistanceSlope::LayerProxy {
            delta_hat: full.links[0].d_est,
        },
        PhiPrimeMode::Zero => DistanceSlope::Zero,
    };
    let links: Vec<CandidateLink> = full.links[..n_max].to_vec();
    let profile = CandidateProfile::from_links(links, h, slope)?;
    let t2 = profile.t2_sequence()?;
    let decision = nopt_from_t2(&t2);
    let selected_ids = profile.links[..decision.n_opt]
        .iter()
        .map(|l| l.node_id)
        .collect();
    Ok(SelectionResult {
        candidates: profile.links,
        t2_sequence: t2,
        n_opt_raw: decision.raw,
        n_opt_compensated: decision.compensated,
        n_opt: decision.n_opt,
        selected_ids,
    })
}
