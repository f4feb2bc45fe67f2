//! Hop-distance error between a reference spike signal and a recovered
//! signal, computed zone by zone.
//!
//! Every active (spike) node of the reference owns an influence zone: the
//! nodes closer to it in hops than to any other active node. The error adds,
//! over zones, the `|y|`-weighted mean hop distance from the zone's source.
//! The sum is not divided by the number of sources.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{hop_distances, Graph, HopMatrix};

/// Magnitudes at or below this count as zero mass.
pub const MACHINE_ZERO: f64 = f64::MIN_POSITIVE;

/// Partition of the reachable nodes among the active nodes.
#[derive(Debug, Clone)]
pub struct InfluenceZones {
    active: Vec<usize>,
    /// Index into `active` per node; `None` when no active node reaches it.
    owner: Vec<Option<usize>>,
    hops: HopMatrix,
}

impl InfluenceZones {
    /// Active nodes, ascending.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// Active node owning `node`, if any.
    pub fn owner_of(&self, node: usize) -> Option<usize> {
        self.owner[node].map(|k| self.active[k])
    }

    /// Members of the zone of the `k`-th active node, ascending.
    pub fn zone(&self, k: usize) -> Vec<usize> {
        (0..self.owner.len())
            .filter(|&j| self.owner[j] == Some(k))
            .collect()
    }

    /// Nodes not reachable from any active node.
    pub fn unreachable(&self) -> Vec<usize> {
        (0..self.owner.len())
            .filter(|&j| self.owner[j].is_none())
            .collect()
    }

    /// Hops from the `k`-th active node to `node`.
    pub fn hops(&self, k: usize, node: usize) -> Option<u32> {
        self.hops.get(k, node)
    }
}

/// Assigns every node to its hop-nearest active node, ties going to the
/// lowest active index.
pub fn influence_zones(g: &Graph, active: &[usize]) -> Result<InfluenceZones> {
    if active.is_empty() {
        return Err(Error::InvalidInput("active set is empty".into()));
    }
    let mut active = active.to_vec();
    active.sort_unstable();
    active.dedup();
    let hops = hop_distances(g, Some(&active))?;

    let owner = (0..g.n())
        .map(|j| {
            let mut best: Option<(usize, u32)> = None;
            for k in 0..active.len() {
                if let Some(h) = hops.get(k, j) {
                    if best.is_none_or(|(_, bh)| h < bh) {
                        best = Some((k, h));
                    }
                }
            }
            best.map(|(k, _)| k)
        })
        .collect();

    Ok(InfluenceZones {
        active,
        owner,
        hops,
    })
}

/// Contribution of one influence zone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZoneTerm {
    pub source: usize,
    pub zone_size: usize,
    /// `sum |y(j)|` over the zone.
    pub mass: f64,
    /// Mass-weighted mean hop distance to `source`; 0 for an empty zone.
    pub center_of_mass: f64,
    /// The zone holds no `y` mass and contributes nothing.
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HopErrorReport {
    /// Sum of the zone terms, or `+inf` when `y` is identically zero.
    pub total: f64,
    pub per_source: Vec<ZoneTerm>,
    pub active_set: Vec<usize>,
    /// Nodes outside every zone.
    pub unreachable: Vec<usize>,
    /// Share of the `y` mass sitting on unreachable nodes.
    pub excluded_mass_fraction: f64,
}

impl HopErrorReport {
    pub fn empty_zones(&self) -> usize {
        self.per_source.iter().filter(|z| z.empty).count()
    }
}

/// Active set of a reference signal: `|x(i)| > spike_tol * max |x|`.
pub fn active_set(x_ref: &[f64], spike_tol: f64) -> Vec<usize> {
    let peak = x_ref.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Vec::new();
    }
    let cut = spike_tol * peak;
    (0..x_ref.len()).filter(|&i| x_ref[i].abs() > cut).collect()
}

/// Hop error of `y` against the spikes of `x_ref` on `g`.
pub fn hop_error(x_ref: &[f64], y: &[f64], g: &Graph, spike_tol: f64) -> Result<HopErrorReport> {
    let n = g.n();
    if x_ref.len() != n || y.len() != n {
        return Err(Error::InvalidInput(format!(
            "signals have lengths {} and {} for a graph of {n} nodes",
            x_ref.len(),
            y.len()
        )));
    }
    if x_ref.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("signals must be finite".into()));
    }
    if spike_tol.is_nan() || spike_tol < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "spike tolerance must be non-negative, got {spike_tol}"
        )));
    }
    let active = active_set(x_ref, spike_tol);
    if active.is_empty() {
        return Err(Error::InvalidReference(
            "reference signal has no spikes".into(),
        ));
    }
    let zones = influence_zones(g, &active)?;

    let mut mass = vec![0.0; active.len()];
    let mut moment = vec![0.0; active.len()];
    let mut sizes = vec![0usize; active.len()];
    let mut excluded = 0.0;
    let mut total_mass = 0.0;
    for j in 0..n {
        let m = if y[j].abs() > MACHINE_ZERO { y[j].abs() } else { 0.0 };
        total_mass += m;
        match zones.owner[j] {
            Some(k) => {
                sizes[k] += 1;
                mass[k] += m;
                // owned nodes are reachable from their owner
                moment[k] += m * f64::from(zones.hops(k, j).unwrap_or(0));
            }
            None => excluded += m,
        }
    }

    let per_source: Vec<ZoneTerm> = active
        .iter()
        .enumerate()
        .map(|(k, &source)| {
            let empty = mass[k] == 0.0;
            ZoneTerm {
                source,
                zone_size: sizes[k],
                mass: mass[k],
                center_of_mass: if empty { 0.0 } else { moment[k] / mass[k] },
                empty,
            }
        })
        .collect();

    let total = if total_mass == 0.0 {
        f64::INFINITY
    } else {
        per_source.iter().map(|z| z.center_of_mass).sum()
    };
    let excluded_mass_fraction = if total_mass > 0.0 {
        excluded / total_mass
    } else {
        0.0
    };

    Ok(HopErrorReport {
        total,
        per_source,
        active_set: zones.active.clone(),
        unreachable: zones.unreachable(),
        excluded_mass_fraction,
    })
}
