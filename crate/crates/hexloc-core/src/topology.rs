//! Hexagonal node deployment and UAV placement.
//!
//! Ground nodes sit on a triangular lattice with inter-node spacing `R`
//! (layer `k` is the k-th hexagonal ring of `6k` nodes around the center
//! node). The UAV hovers at offset `Δ ∈ [0, R/2]` from the central node, so
//! the N-th nearest node falls in a predictable distance band per layer.

use crate::error::{Error, Result};
use rand::Rng;
use std::io::{BufRead, Write};

/// One ground reference node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeSite {
    /// Stable identifier (generation order).
    pub id: usize,
    /// Ground-plane position, meters.
    pub x: f64,
    /// Ground-plane position, meters.
    pub y: f64,
    /// Node altitude, meters.
    pub z: f64,
}

/// UAV placement inside a deployment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavPlacement {
    /// Horizontal offset Δ from the central node, meters.
    pub offset: f64,
    /// Ground-plane position, meters.
    pub xy: (f64, f64),
    /// Flight altitude h_u, meters.
    pub h: f64,
}

/// A generated node field, optionally with a placed UAV.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    /// Inter-node spacing R (also called node coverage), meters.
    pub coverage_radius: f64,
    /// Number of hexagonal rings around the center node.
    pub layers: u32,
    /// All nodes, ids in generation order.
    pub nodes: Vec<NodeSite>,
    /// UAV state once placed.
    pub uav: Option<UavPlacement>,
}

/// One row of the sorted distance profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SortedDistance {
    pub node_id: usize,
    /// Horizontal distance to the UAV ground projection, meters.
    pub d2d: f64,
    /// Slant distance using the per-node altitude difference, meters.
    pub d3d: f64,
}

/// Cumulative node count of a hex lattice with `k` rings: 3k² + 3k + 1.
pub fn cumulative_node_count(k: u32) -> usize {
    let k = k as usize;
    3 * k * k + 3 * k + 1
}

/// Ring index of the `n`-th nearest node (1-based): 0 for the central node,
/// otherwise the smallest `k` with `n ≤ 3k² + 3k + 1`.
pub fn layer_of_index(n: usize) -> u32 {
    assert!(n >= 1, "sorted index is 1-based");
    let mut k = 0u32;
    while n > cumulative_node_count(k) {
        k += 1;
    }
    k
}

/// Generates the hexagonal node field with spacing `R` and `layers` rings,
/// drawing node altitudes from U(0, `node_altitude_max`).
pub fn generate_hex_grid<R: Rng + ?Sized>(
    coverage_radius: f64,
    layers: u32,
    node_altitude_max: f64,
    rng: &mut R,
) -> Result<Deployment> {
    if !(coverage_radius > 0.0) {
        return Err(Error::domain("coverage radius must be positive"));
    }
    if layers < 1 {
        return Err(Error::domain("at least one hex layer is required"));
    }
    let r = coverage_radius;
    let layers_i = layers as i64;
    let mut positions = Vec::with_capacity(cumulative_node_count(layers));
    // Axial lattice coordinates (q, r): basis vectors (R, 0) and
    // (R/2, R·√3/2); hex ring index is (|q| + |r| + |q + r|) / 2.
    for q in -layers_i..=layers_i {
        for s in -layers_i..=layers_i {
            let ring = (q.abs() + s.abs() + (q + s).abs()) / 2;
            if ring <= layers_i {
                positions.push((
                    r * (q as f64 + s as f64 / 2.0),
                    r * (s as f64 * 3.0_f64.sqrt() / 2.0),
                ));
            }
        }
    }
    let nodes = positions
        .into_iter()
        .enumerate()
        .map(|(id, (x, y))| NodeSite {
            id,
            x,
            y,
            z: rng.random_range(0.0..node_altitude_max.max(f64::MIN_POSITIVE)),
        })
        .collect();
    Ok(Deployment {
        coverage_radius,
        layers,
        nodes,
        uav: None,
    })
}

/// Places the UAV at horizontal offset `delta` from the central node in a
/// uniformly random direction, flying at altitude `h`.
pub fn place_uav<R: Rng + ?Sized>(
    mut dep: Deployment,
    delta: f64,
    h: f64,
    rng: &mut R,
) -> Result<Deployment> {
    if !(0.0..=dep.coverage_radius / 2.0).contains(&delta) {
        return Err(Error::domain(format!(
            "UAV offset {delta} outside [0, R/2] = [0, {}]",
            dep.coverage_radius / 2.0
        )));
    }
    let bearing = rng.random_range(0.0..std::f64::consts::TAU);
    dep.uav = Some(UavPlacement {
        offset: delta,
        xy: (delta * bearing.cos(), delta * bearing.sin()),
        h,
    });
    Ok(dep)
}

/// Sorted (ascending by horizontal distance, ties by id) distance profile
/// from the UAV to every node.
pub fn sorted_node_distances(dep: &Deployment) -> Result<Vec<SortedDistance>> {
    let uav = dep
        .uav
        .as_ref()
        .ok_or_else(|| Error::domain("UAV not placed in deployment"))?;
    let mut rows: Vec<SortedDistance> = dep
        .nodes
        .iter()
        .map(|n| {
            let d2d = (n.x - uav.xy.0).hypot(n.y - uav.xy.1);
            SortedDistance {
                node_id: n.id,
                d2d,
                d3d: d2d.hypot(uav.h - n.z),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        a.d2d
            .partial_cmp(&b.d2d)
            .unwrap()
            .then(a.node_id.cmp(&b.node_id))
    });
    Ok(rows)
}

/// Monte Carlo statistics of the sorted-distance profile over random UAV
/// placements (Δ ~ U(0, R/2], uniform bearing).
#[derive(Debug, Clone)]
pub struct IncrementStats {
    /// Per-index mean of the sorted d2d profile (index N−1 holds d̄₂D(N)).
    pub mean_profile: Vec<f64>,
    /// Mean first difference d′₂D(N) = d₂D(N) − d₂D(N−1); entry for N = 1
    /// holds the mean nearest distance itself.
    pub mean_first_diff: Vec<f64>,
    /// Signed mean second difference d″₂D(N), defined for 2 ≤ N ≤ count−1
    /// (zero-padded at both ends).
    pub mean_second_diff: Vec<f64>,
    /// Mean of |d″₂D(N)| over placements (same padding).
    pub mean_abs_second_diff: Vec<f64>,
    /// Mean UAV offset Δ̄ over the sampled placements.
    pub mean_offset: f64,
    /// Number of placements sampled.
    pub trials: usize,
}

/// Averages the sorted-distance profile and its finite differences over
/// `trials` random placements on a fresh grid of the given geometry.
pub fn empirical_distance_increments<R: Rng + ?Sized>(
    coverage_radius: f64,
    layers: u32,
    trials: usize,
    rng: &mut R,
) -> Result<IncrementStats> {
    if trials < 1 {
        return Err(Error::domain("at least one placement is required"));
    }
    // Node altitudes do not matter for d2d statistics; use a degenerate
    // altitude draw to keep the profile purely geometric.
    let dep = generate_hex_grid(coverage_radius, layers, f64::MIN_POSITIVE, rng)?;
    let n = dep.nodes.len();
    let mut mean_profile = vec![0.0; n];
    let mut first = vec![0.0; n];
    let mut second = vec![0.0; n];
    let mut abs_second = vec![0.0; n];
    let mut offset_sum = 0.0;
    let mut profile = vec![0.0; n];
    for _ in 0..trials {
        let delta = rng.random_range(0.0..coverage_radius / 2.0);
        let placed = place_uav(dep.clone(), delta, 20.0, rng)?;
        offset_sum += delta;
        for (slot, row) in profile.iter_mut().zip(sorted_node_distances(&placed)?) {
            *slot = row.d2d;
        }
        for i in 0..n {
            mean_profile[i] += profile[i];
            let d_prev = if i == 0 { 0.0 } else { profile[i - 1] };
            first[i] += profile[i] - d_prev;
            if i >= 1 && i + 1 < n {
                let dd = profile[i + 1] - 2.0 * profile[i] + profile[i - 1];
                second[i] += dd;
                abs_second[i] += dd.abs();
            }
        }
    }
    let t = trials as f64;
    for v in [&mut mean_profile, &mut first, &mut second, &mut abs_second] {
        for x in v.iter_mut() {
            *x /= t;
        }
    }
    Ok(IncrementStats {
        mean_profile,
        mean_first_diff: first,
        mean_second_diff: second,
        mean_abs_second_diff: abs_second,
        mean_offset: offset_sum / t,
        trials,
    })
}

/// Writes a deployment's nodes as CSV (`id,x,y,z`).
pub fn deployment_to_csv<W: Write>(dep: &Deployment, mut out: W) -> Result<()> {
    writeln!(out, "id,x,y,z")?;
    for n in &dep.nodes {
        writeln!(out, "{},{},{},{}", n.id, n.x, n.y, n.z)?;
    }
    Ok(())
}

/// Reads nodes written by [`deployment_to_csv`] into a deployment with the
/// stated coverage radius and layer count (unchecked against the node set).
pub fn deployment_from_csv<R: BufRead>(
    input: R,
    coverage_radius: f64,
    layers: u32,
) -> Result<Deployment> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse("empty deployment CSV"))??;
    if header.trim() != "id,x,y,z" {
        return Err(Error::parse(format!("unexpected deployment header {header:?}")));
    }
    let mut nodes = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::parse(format!("deployment row {line:?} needs 4 fields")));
        }
        nodes.push(NodeSite {
            id: fields[0]
                .trim()
                .parse()
                .map_err(|e| Error::parse(format!("bad id {:?}: {e}", fields[0])))?,
            x: parse_float(fields[1])?,
            y: parse_float(fields[2])?,
            z: parse_float(fields[3])?,
        });
    }
    Ok(Deployment {
        coverage_radius,
        layers,
        nodes,
        uav: None,
    })
}

fn parse_float(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::parse(format!("bad float {s:?}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn node_count_formula() {
        for layers in 1..=6 {
            let dep = generate_hex_grid(100.0, layers, 5.0, &mut rng(1)).unwrap();
            assert_eq!(dep.nodes.len(), cumulative_node_count(layers));
        }
        assert_eq!(cumulative_node_count(1), 7);
        assert_eq!(cumulative_node_count(2), 19);
        assert_eq!(cumulative_node_count(5), 91);
    }

    #[test]
    fn layer_index_boundaries() {
        assert_eq!(layer_of_index(1), 0);
        assert_eq!(layer_of_index(2), 1);
        assert_eq!(layer_of_index(7), 1);
        assert_eq!(layer_of_index(8), 2);
        assert_eq!(layer_of_index(19), 2);
        assert_eq!(layer_of_index(20), 3);
        assert_eq!(layer_of_index(37), 3);
        assert_eq!(layer_of_index(38), 4);
    }

    #[test]
    fn ring_radii_within_layer_bands() {
        let r = 120.0;
        let dep = generate_hex_grid(r, 5, 5.0, &mut rng(2)).unwrap();
        // Center node at origin; ring k spans [k·R·√3/2, k·R] from center.
        let mut ring_counts = vec![0usize; 6];
        for n in &dep.nodes {
            let dist = n.x.hypot(n.y);
            let k = (dist / r).round();
            // Determine ring by distance bands; verify the geometric span.
            let mut found = false;
            for ring in 0..=5u32 {
                let lo = ring as f64 * r * 3.0_f64.sqrt() / 2.0 - 1e-9;
                let hi = ring as f64 * r + 1e-9;
                if dist >= lo && dist <= hi {
                    found = true;
                    break;
                }
            }
            assert!(found, "node at distance {dist} not inside any ring band (k≈{k})");
            if dist < 1e-9 {
                ring_counts[0] += 1;
            }
        }
        assert_eq!(ring_counts[0], 1, "exactly one center node");
        // Layer-1 ring: exactly six nodes all at distance R.
        let at_r = dep
            .nodes
            .iter()
            .filter(|n| (n.x.hypot(n.y) - r).abs() < 1e-9)
            .count();
        assert!(at_r >= 6);
    }

    #[test]
    fn layer_one_has_six_nodes_at_exactly_r() {
        let dep = generate_hex_grid(60.0, 1, 5.0, &mut rng(3)).unwrap();
        assert_eq!(dep.nodes.len(), 7);
        let ring: Vec<&NodeSite> = dep
            .nodes
            .iter()
            .filter(|n| n.x.hypot(n.y) > 1e-9)
            .collect();
        assert_eq!(ring.len(), 6);
        for n in ring {
            assert_abs_diff_eq!(n.x.hypot(n.y), 60.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn node_altitudes_in_range() {
        let dep = generate_hex_grid(90.0, 4, 5.0, &mut rng(4)).unwrap();
        assert!(dep.nodes.iter().all(|n| (0.0..5.0).contains(&n.z)));
        // Not all equal (sampled, not constant).
        let first = dep.nodes[0].z;
        assert!(dep.nodes.iter().any(|n| (n.z - first).abs() > 1e-6));
    }

    #[test]
    fn place_uav_validations_and_offset() {
        let dep = generate_hex_grid(100.0, 2, 5.0, &mut rng(5)).unwrap();
        assert!(place_uav(dep.clone(), -1.0, 20.0, &mut rng(6)).is_err());
        assert!(place_uav(dep.clone(), 50.1, 20.0, &mut rng(6)).is_err());
        let placed = place_uav(dep, 35.0, 25.0, &mut rng(6)).unwrap();
        let uav = placed.uav.unwrap();
        assert_abs_diff_eq!(uav.xy.0.hypot(uav.xy.1), 35.0, epsilon = 1e-9);
        assert_eq!(uav.h, 25.0);
    }

    #[test]
    fn nearest_distance_equals_offset() {
        for seed in 0..20 {
            let dep = generate_hex_grid(120.0, 3, 5.0, &mut rng(seed)).unwrap();
            let delta = 7.0 + seed as f64;
            let placed = place_uav(dep, delta, 20.0, &mut rng(seed + 100)).unwrap();
            let sorted = sorted_node_distances(&placed).unwrap();
            assert_abs_diff_eq!(sorted[0].d2d, delta, epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_offset_puts_uav_over_center() {
        let dep = generate_hex_grid(80.0, 2, 5.0, &mut rng(7)).unwrap();
        let placed = place_uav(dep, 0.0, 30.0, &mut rng(8)).unwrap();
        let sorted = sorted_node_distances(&placed).unwrap();
        assert_abs_diff_eq!(sorted[0].d2d, 0.0, epsilon = 1e-12);
        // Next six nodes all at distance R.
        for row in &sorted[1..7] {
            assert_abs_diff_eq!(row.d2d, 80.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn sorted_profile_layer_bands() {
        // Lattice-exact bands: layer k spans [k·R·√3/2 − Δ, k·R + Δ].
        let r = 90.0;
        for seed in 0..30u64 {
            let dep = generate_hex_grid(r, 4, 5.0, &mut rng(seed)).unwrap();
            let delta = (seed as f64 / 30.0) * r / 2.0;
            let placed = place_uav(dep, delta, 20.0, &mut rng(seed ^ 0xabc)).unwrap();
            let sorted = sorted_node_distances(&placed).unwrap();
            assert_abs_diff_eq!(sorted[0].d2d, delta, epsilon = 1e-9);
            for (idx, row) in sorted.iter().enumerate().skip(1) {
                let n = idx + 1;
                let k = layer_of_index(n) as f64;
                let lo = k * r * 3.0_f64.sqrt() / 2.0 - delta - 1e-9;
                let hi = k * r + delta + 1e-9;
                assert!(
                    row.d2d >= lo && row.d2d <= hi,
                    "N={n} d2d={:.3} outside layer band [{lo:.3}, {hi:.3}]",
                    row.d2d
                );
            }
        }
    }

    #[test]
    fn sorting_is_ascending_and_a_permutation() {
        let dep = generate_hex_grid(70.0, 3, 5.0, &mut rng(9)).unwrap();
        let placed = place_uav(dep, 20.0, 22.0, &mut rng(10)).unwrap();
        let sorted = sorted_node_distances(&placed).unwrap();
        assert!(sorted.windows(2).all(|w| w[0].d2d <= w[1].d2d));
        let mut ids: Vec<usize> = sorted.iter().map(|r| r.node_id).collect();
        ids.sort_unstable();
        let expected: Vec<usize> = (0..placed.nodes.len()).collect();
        assert_eq!(ids, expected);
    }

    #[test]
    fn d3d_uses_per_node_altitude() {
        let mut dep = generate_hex_grid(60.0, 1, 5.0, &mut rng(11)).unwrap();
        for n in dep.nodes.iter_mut() {
            n.z = 4.0;
        }
        let placed = place_uav(dep, 10.0, 24.0, &mut rng(12)).unwrap();
        let sorted = sorted_node_distances(&placed).unwrap();
        for row in &sorted {
            assert_abs_diff_eq!(row.d3d, row.d2d.hypot(20.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn deterministic_generation() {
        let a = generate_hex_grid(120.0, 5, 5.0, &mut rng(42)).unwrap();
        let b = generate_hex_grid(120.0, 5, 5.0, &mut rng(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn increment_stats_basic_shape() {
        let stats = empirical_distance_increments(120.0, 5, 400, &mut rng(13)).unwrap();
        let n = cumulative_node_count(5);
        assert_eq!(stats.mean_profile.len(), n);
        assert_eq!(stats.trials, 400);
        // d′ > 0 for every N.
        assert!(stats.mean_first_diff.iter().all(|&d| d > 0.0));
        // Mean offset ≈ R/4 for Δ ~ U(0, R/2).
        assert_abs_diff_eq!(stats.mean_offset, 30.0, epsilon = 2.0);
        // Profile is increasing.
        assert!(stats.mean_profile.windows(2).all(|w| w[0] < w[1]));
        // First entry is the mean nearest distance = mean offset.
        assert_abs_diff_eq!(stats.mean_profile[0], stats.mean_offset, epsilon = 1e-9);
    }

    #[test]
    fn deployment_csv_round_trip() {
        let dep = generate_hex_grid(100.0, 2, 5.0, &mut rng(14)).unwrap();
        let mut buf = Vec::new();
        deployment_to_csv(&dep, &mut buf).unwrap();
        let parsed = deployment_from_csv(buf.as_slice(), 100.0, 2).unwrap();
        assert_eq!(parsed.nodes.len(), dep.nodes.len());
        for (a, b) in parsed.nodes.iter().zip(&dep.nodes) {
            assert_eq!(a.id, b.id);
            assert_abs_diff_eq!(a.x, b.x, epsilon = 0.0);
            assert_abs_diff_eq!(a.y, b.y, epsilon = 0.0);
            assert_abs_diff_eq!(a.z, b.z, epsilon = 0.0);
        }
    }
}
