//! Synthetic data and reproducible experiment harnesses.
//!
//! All randomness flows from one 64-bit master seed. Every random draw uses
//! its own ChaCha stream keyed by a tag path such as
//! `(GRAPH, h, trial, attempt)`, so any cell or trial can be rerun on its own
//! and the execution order never matters.

mod grid;
mod ksweep;

pub use grid::{
    run_distance_theta_grid, run_snr_theta_grid, summarize, CellSummary, ExperimentGrid,
    GridOutput, GridSetup, TrialRecord, TrialStatus,
};
pub use ksweep::{run_k_sweep, KSweepOptions, KSweepOutput, KSweepRecord, OutlierSelection};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data_io::{Dataset, FlaggedSignal};
use crate::diffusion::apply_diffusion;
use crate::error::{Error, Result};
use crate::graph::{
    build_knn_graph, normalized_laplacian, spectral_decomposition, Graph, HopMatrix, KnnInput,
    Sigma2,
};

/// Stream tags; distinct purposes never share a stream.
pub(crate) mod tag {
    pub const GRAPH: u64 = 1;
    pub const SPIKES: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const PLANTED: u64 = 4;
}

const CONNECT_ATTEMPTS: u64 = 100;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a tag path.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

/// Generator for the stream identified by `(seed, tags)`.
pub fn substream(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tags))
}

fn uniform_points(n: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((n, 2), |_| rng.random::<f64>())
}

/// Random sensor graph: `n` uniform points in the unit square joined by a
/// k-NN graph with Gaussian weights.
///
/// Disconnected draws are discarded and redrawn from the next stream, up to
/// 100 times.
pub fn generate_sensor_graph(n: usize, k: usize, sigma2: Sigma2, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "sensor graphs need at least 2 nodes, got {n}"
        )));
    }
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "k = {k} must lie in [1, {n})"
        )));
    }
    for attempt in 0..CONNECT_ATTEMPTS {
        let mut rng = substream(seed, &[tag::GRAPH, attempt]);
        let points = uniform_points(n, &mut rng);
        let g = build_knn_graph(KnnInput::Points(points.view()), k, sigma2)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::GenerationFailure(format!(
        "no connected {k}-NN graph on {n} points after {CONNECT_ATTEMPTS} attempts"
    )))
}

/// Ordered node pairs at exactly `h` hops.
pub fn pairs_at_distance(hops: &HopMatrix, h: usize) -> Vec<(usize, usize)> {
    let raw = hops.raw();
    let mut pairs = Vec::new();
    for (r, &i) in hops.sources().iter().enumerate() {
        for j in 0..raw.ncols() {
            if raw[[r, j]] as usize == h && raw[[r, j]] != HopMatrix::UNREACHABLE {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Two unit spikes `h` hops apart, drawn uniformly among all ordered pairs
/// at that distance. `hops` must hold all rows.
pub fn sample_spike_pair(
    hops: &HopMatrix,
    h: usize,
    rng: &mut impl Rng,
) -> Result<(Array1<f64>, (usize, usize))> {
    if h == 0 {
        return Err(Error::InvalidParameter("spike distance must be positive".into()));
    }
    let pairs = pairs_at_distance(hops, h);
    if pairs.is_empty() {
        return Err(Error::InfeasibleDistance { hops: h });
    }
    let (i, j) = pairs[rng.random_range(0..pairs.len())];
    let mut x = Array1::zeros(hops.raw().ncols());
    x[i] = 1.0;
    x[j] = 1.0;
    Ok((x, (i, j)))
}

/// `b + w`, `w` i.i.d. normal with standard deviation
/// `||b|| / (sqrt(n) * 10^(snr_db / 20))`, so that the expected signal to
/// noise energy ratio is `snr_db` decibels.
pub fn add_noise_snr(b: &Array1<f64>, snr_db: f64, rng: &mut impl Rng) -> Result<Array1<f64>> {
    let energy = b.dot(b);
    if energy == 0.0 {
        return Err(Error::InvalidInput("cannot set an SNR for a zero signal".into()));
    }
    if !snr_db.is_finite() {
        return Err(Error::InvalidParameter(format!("SNR must be finite, got {snr_db}")));
    }
    let n = b.len() as f64;
    let std = energy.sqrt() / (n.sqrt() * 10f64.powf(snr_db / 20.0));
    Ok(b.mapv(|v| {
        let w: f64 = StandardNormal.sample(rng);
        v + std * w
    }))
}

/// Settings for [`generate_planted_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSpec {
    pub n: usize,
    pub k: usize,
    pub sigma2: Sigma2,
    pub theta: f64,
    pub sources: usize,
    /// Share of non-source nodes whose sample is reported missing.
    pub missing_fraction: f64,
    pub snr_db: Option<f64>,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            n: 200,
            k: 10,
            sigma2: Sigma2::Auto,
            theta: 1.0,
            sources: 1,
            missing_fraction: 0.0,
            snr_db: None,
            seed: 0,
        }
    }
}

/// A synthetic dataset with known sources.
#[derive(Debug, Clone)]
pub struct PlantedDataset {
    pub dataset: Dataset,
    /// Source node indices, ascending.
    pub sources: Vec<usize>,
}

impl PlantedDataset {
    pub fn source_ids(&self) -> Vec<String> {
        self.sources
            .iter()
            .map(|&i| self.dataset.ids[i].clone())
            .collect()
    }
}

/// Stand-in for a real dataset: sensor points, unit sources and their
/// heat-diffused snapshot on the k-NN graph of the points.
pub fn generate_planted_dataset(spec: &PlantedSpec) -> Result<PlantedDataset> {
    if spec.sources == 0 || spec.sources > spec.n {
        return Err(Error::InvalidParameter(format!(
            "source count {} must lie in [1, {}]",
            spec.sources, spec.n
        )));
    }
    if !(0.0..1.0).contains(&spec.missing_fraction) {
        return Err(Error::InvalidParameter(format!(
            "missing fraction {} must lie in [0, 1)",
            spec.missing_fraction
        )));
    }
    let g = generate_sensor_graph(spec.n, spec.k, spec.sigma2, spec.seed)?;
    let decomp = spectral_decomposition(normalized_laplacian(&g)?.view())?;
    let mut rng = substream(spec.seed, &[tag::PLANTED]);

    let mut sources = rand::seq::index::sample(&mut rng, spec.n, spec.sources).into_vec();
    sources.sort_unstable();
    let mut x = Array1::zeros(spec.n);
    for &s in &sources {
        x[s] = 1.0;
    }
    let mut b = apply_diffusion(&decomp, spec.theta, x.view())?;
    if let Some(snr) = spec.snr_db {
        b = add_noise_snr(&b, snr, &mut substream(spec.seed, &[tag::NOISE]))?;
    }

    let mut valid = vec![true; spec.n];
    let candidates: Vec<usize> = (0..spec.n).filter(|i| !sources.contains(i)).collect();
    let missing = (spec.missing_fraction * candidates.len() as f64).round() as usize;
    for pick in rand::seq::index::sample(&mut rng, candidates.len(), missing) {
        valid[candidates[pick]] = false;
    }
    let values = b
        .iter()
        .zip(&valid)
        .map(|(&v, &ok)| if ok { v } else { f64::NAN })
        .collect();

    let width = spec.n.to_string().len();
    let ids = (0..spec.n).map(|i| format!("n{i:0width$}")).collect();
    let coords = g.coords().map(|c| c.to_owned());
    Ok(PlantedDataset {
        dataset: Dataset {
            ids,
            coords,
            distances: None,
            signal: FlaggedSignal::new(values, valid)?,
        },
        sources,
    })
}
