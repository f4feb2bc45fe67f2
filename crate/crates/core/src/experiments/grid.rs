//! Monte-Carlo grids over spike distance, diffusion time and noise level on
//! random sensor graphs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::Array1;
use rayon::prelude::*;

use super::{add_noise_snr, derive_seed, generate_sensor_graph, sample_spike_pair, substream, tag};
use crate::data_io::{write_results, Format, Table, Value};
use crate::diffusion::apply_diffusion;
use crate::error::{Error, Result};
use crate::graph::{
    hop_distances, normalized_laplacian, spectral_decomposition, Graph, HopMatrix, Sigma2,
    SpectralDecomposition,
};
use crate::metrics::hop_error;
use crate::solver::{alternating_solve, Observation, SolverConfig};

/// Axes and repetition of an experiment grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub h_values: Vec<usize>,
    pub theta_values: Vec<f64>,
    pub snr_db: Vec<f64>,
    pub k_values: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        ExperimentGrid {
            h_values: (1..=10).collect(),
            theta_values: vec![0.5, 1.0, 2.0, 4.0, 8.0, 16.0],
            snr_db: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            k_values: (5..=25).collect(),
            trials: 32,
            seed: 0,
        }
    }
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if let Some(v) = self
            .theta_values
            .iter()
            .chain(&self.snr_db)
            .find(|v| !v.is_finite())
        {
            return Err(Error::InvalidParameter(format!("grid value {v} is not finite")));
        }
        if let Some(t) = self.theta_values.iter().find(|&&t| t <= 0.0) {
            return Err(Error::InvalidParameter(format!("theta {t} must be positive")));
        }
        if self.h_values.contains(&0) {
            return Err(Error::InvalidParameter("spike distance must be positive".into()));
        }
        Ok(())
    }
}

/// Graph and solver settings shared by all cells of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSetup {
    pub n: usize,
    pub k: usize,
    pub sigma2: Sigma2,
    /// With `cfg.fix_theta` the true theta is used; otherwise it is learned
    /// starting from `theta * theta_init_factor`.
    pub cfg: SolverConfig,
    pub theta_init_factor: f64,
    /// Fresh graphs drawn per trial when no node pair sits at the requested
    /// hop distance.
    pub placement_attempts: u64,
}

impl Default for GridSetup {
    fn default() -> Self {
        GridSetup {
            n: 250,
            k: 10,
            sigma2: Sigma2::Auto,
            cfg: SolverConfig {
                fix_theta: true,
                ..SolverConfig::default()
            },
            theta_init_factor: 1.0,
            placement_attempts: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrialStatus {
    Ok,
    /// The trial could not be set up (e.g. no pair at the hop distance).
    Skipped(String),
    /// The solve or scoring failed.
    Failed(String),
}

impl TrialStatus {
    pub fn label(&self) -> String {
        match self {
            TrialStatus::Ok => "ok".into(),
            TrialStatus::Skipped(r) => format!("skipped:{r}"),
            TrialStatus::Failed(r) => format!("failed:{r}"),
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, TrialStatus::Ok)
    }
}

/// Outcome of one trial in one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub theta: f64,
    pub h: usize,
    pub snr_db: Option<f64>,
    pub trial: usize,
    /// NaN when the trial did not produce a result.
    pub hop_error: f64,
    pub status: TrialStatus,
    pub outer_iterations: usize,
    pub converged: bool,
    pub final_energy: f64,
    pub theta_estimate: f64,
}

impl TrialRecord {
    fn unavailable(theta: f64, h: usize, snr_db: Option<f64>, trial: usize, status: TrialStatus) -> Self {
        TrialRecord {
            theta,
            h,
            snr_db,
            trial,
            hop_error: f64::NAN,
            status,
            outer_iterations: 0,
            converged: false,
            final_energy: f64::NAN,
            theta_estimate: f64::NAN,
        }
    }
}

/// Per-cell aggregate of hop errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSummary {
    pub trials: usize,
    pub finite: usize,
    /// Trials whose recovery was identically zero.
    pub infinite: usize,
    /// Skipped or failed trials.
    pub unavailable: usize,
    /// Mean over the finite errors (NaN when there are none).
    pub mean: f64,
    /// Sample standard deviation over the finite errors.
    pub std: f64,
}

/// Aggregates hop errors; infinite values are counted, never averaged, and
/// NaN marks an unavailable trial.
pub fn summarize(errors: &[f64]) -> CellSummary {
    let finite: Vec<f64> = errors.iter().copied().filter(|v| v.is_finite()).collect();
    let infinite = errors.iter().filter(|v| v.is_infinite()).count();
    let unavailable = errors.iter().filter(|v| v.is_nan()).count();
    let count = finite.len();
    let mean = if count == 0 {
        f64::NAN
    } else {
        finite.iter().sum::<f64>() / count as f64
    };
    let std = match count {
        0 => f64::NAN,
        1 => 0.0,
        _ => {
            let ss: f64 = finite.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (count - 1) as f64).sqrt()
        }
    };
    CellSummary {
        trials: errors.len(),
        finite: count,
        infinite,
        unavailable,
        mean,
        std,
    }
}

/// Raw trial records plus per-cell summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOutput {
    pub records: Vec<TrialRecord>,
    with_snr: bool,
}

type CellKey = (u64, usize, Option<u64>);

impl GridOutput {
    fn cell_key(r: &TrialRecord) -> CellKey {
        (r.theta.to_bits(), r.h, r.snr_db.map(f64::to_bits))
    }

    /// Summary for the cell `(theta, h, snr_db)`, if present.
    pub fn cell(&self, theta: f64, h: usize, snr_db: Option<f64>) -> Option<CellSummary> {
        let errors: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.theta == theta && r.h == h && r.snr_db == snr_db)
            .map(|r| r.hop_error)
            .collect();
        (!errors.is_empty()).then(|| summarize(&errors))
    }

    /// Cells in record order with their summaries.
    pub fn summaries(&self) -> Vec<(f64, usize, Option<f64>, CellSummary)> {
        let mut order: Vec<CellKey> = Vec::new();
        let mut groups: BTreeMap<CellKey, Vec<f64>> = BTreeMap::new();
        let mut labels: BTreeMap<CellKey, (f64, usize, Option<f64>)> = BTreeMap::new();
        for r in &self.records {
            let key = Self::cell_key(r);
            if !groups.contains_key(&key) {
                order.push(key);
                labels.insert(key, (r.theta, r.h, r.snr_db));
            }
            groups.entry(key).or_default().push(r.hop_error);
        }
        order
            .into_iter()
            .map(|key| {
                let (theta, h, snr) = labels[&key];
                (theta, h, snr, summarize(&groups[&key]))
            })
            .collect()
    }

    fn prefix(&self) -> Vec<&'static str> {
        if self.with_snr {
            vec!["snr_db", "theta", "h"]
        } else {
            vec!["theta", "h"]
        }
    }

    fn prefix_values(&self, theta: f64, h: usize, snr: Option<f64>) -> Vec<Value> {
        let mut v = Vec::with_capacity(3);
        if self.with_snr {
            v.push(snr.unwrap_or(f64::NAN).into());
        }
        v.push(theta.into());
        v.push(h.into());
        v
    }

    pub fn records_table(&self) -> Table {
        let mut cols = self.prefix();
        cols.extend([
            "trial",
            "hop_error",
            "status",
            "outer_iterations",
            "converged",
            "final_energy",
            "theta_estimate",
        ]);
        let mut t = Table::new(cols);
        for r in &self.records {
            let mut row = self.prefix_values(r.theta, r.h, r.snr_db);
            row.extend([
                r.trial.into(),
                r.hop_error.into(),
                r.status.label().into(),
                r.outer_iterations.into(),
                r.converged.into(),
                r.final_energy.into(),
                r.theta_estimate.into(),
            ]);
            t.push(row);
        }
        t
    }

    pub fn summary_table(&self) -> Table {
        let mut cols = self.prefix();
        cols.extend([
            "trials",
            "finite",
            "infinite",
            "unavailable",
            "mean_hop_error",
            "std_hop_error",
        ]);
        let mut t = Table::new(cols);
        for (theta, h, snr, s) in self.summaries() {
            let mut row = self.prefix_values(theta, h, snr);
            row.extend([
                s.trials.into(),
                s.finite.into(),
                s.infinite.into(),
                s.unavailable.into(),
                s.mean.into(),
                s.std.into(),
            ]);
            t.push(row);
        }
        t
    }

    /// Writes the raw records to `path` and the summaries next to it with a
    /// `_summary` suffix; returns both paths.
    pub fn write(&self, path: &Path, format: Format) -> Result<(PathBuf, PathBuf)> {
        let summary = summary_path(path);
        write_results(&self.records_table(), path, format)?;
        write_results(&self.summary_table(), &summary, format)?;
        Ok((path.to_path_buf(), summary))
    }
}

/// `dir/name.ext` -> `dir/name_summary.ext`.
pub(crate) fn summary_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map_or_else(|| "results".into(), |s| s.to_string_lossy().into_owned());
    let name = match path.extension() {
        Some(ext) => format!("{stem}_summary.{}", ext.to_string_lossy()),
        None => format!("{stem}_summary"),
    };
    path.with_file_name(name)
}

struct Instance {
    graph: Graph,
    decomp: SpectralDecomposition,
    hops: HopMatrix,
}

fn build_instance(setup: &GridSetup, seed: u64, trial: usize, attempt: u64) -> Result<Instance> {
    let graph_seed = derive_seed(seed, &[tag::GRAPH, trial as u64, attempt]);
    let graph = generate_sensor_graph(setup.n, setup.k, setup.sigma2, graph_seed)?;
    let decomp = spectral_decomposition(normalized_laplacian(&graph)?.view())?;
    let hops = hop_distances(&graph, None)?;
    Ok(Instance {
        graph,
        decomp,
        hops,
    })
}

/// One cell evaluation: observe `x` diffused by `theta`, optionally noised,
/// then solve and score.
#[allow(clippy::too_many_arguments)]
fn run_cell(
    inst: &Instance,
    x: &Array1<f64>,
    theta: f64,
    h: usize,
    snr_db: Option<f64>,
    trial: usize,
    setup: &GridSetup,
    seed: u64,
) -> TrialRecord {
    let attempt = || -> Result<TrialRecord> {
        let mut b = apply_diffusion(&inst.decomp, theta, x.view())?;
        if let Some(snr) = snr_db {
            let mut rng = substream(
                seed,
                &[tag::NOISE, h as u64, trial as u64, snr.to_bits(), theta.to_bits()],
            );
            b = add_noise_snr(&b, snr, &mut rng)?;
        }
        let obs = Observation::new(b)?;
        let cfg = &setup.cfg;
        let theta_init = if cfg.fix_theta {
            theta
        } else {
            (theta * setup.theta_init_factor).clamp(cfg.theta_min, cfg.theta_max)
        };
        let res = alternating_solve(&obs, cfg, &inst.decomp, None, theta_init)?;
        let report = hop_error(
            x.as_slice().expect("contiguous"),
            res.x.as_slice().expect("contiguous"),
            &inst.graph,
            0.0,
        )?;
        Ok(TrialRecord {
            theta,
            h,
            snr_db,
            trial,
            hop_error: report.total,
            status: TrialStatus::Ok,
            outer_iterations: res.outer_iterations,
            converged: res.converged,
            final_energy: res.final_energy(),
            theta_estimate: res.theta,
        })
    };
    attempt().unwrap_or_else(|e| {
        log::warn!("trial {trial} (theta {theta}, h {h}) failed: {e}");
        TrialRecord::unavailable(theta, h, snr_db, trial, TrialStatus::Failed(e.category().into()))
    })
}

fn run_grid(
    h_values: &[usize],
    theta_values: &[f64],
    snr_values: &[Option<f64>],
    trials: usize,
    seed: u64,
    setup: &GridSetup,
) -> Vec<TrialRecord> {
    let per_trial: Vec<Vec<TrialRecord>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut cache: Vec<std::result::Result<Instance, String>> = Vec::new();
            let mut out = Vec::new();
            for &h in h_values {
                // first graph of this trial with a pair at distance h
                let mut placed = None;
                let mut reason = format!("infeasible-distance:{h}");
                for attempt in 0..setup.placement_attempts {
                    let a = attempt as usize;
                    if cache.len() <= a {
                        cache.push(
                            build_instance(setup, seed, trial, attempt)
                                .map_err(|e| e.category().to_string()),
                        );
                    }
                    match &cache[a] {
                        Ok(inst) => {
                            let mut rng = substream(
                                seed,
                                &[tag::SPIKES, h as u64, trial as u64, attempt],
                            );
                            if let Ok((x, _)) = sample_spike_pair(&inst.hops, h, &mut rng) {
                                placed = Some((a, x));
                                break;
                            }
                        }
                        Err(cat) => {
                            reason = cat.clone();
                            break;
                        }
                    }
                }
                for &theta in theta_values {
                    for &snr in snr_values {
                        out.push(match &placed {
                            Some((a, x)) => {
                                let inst = cache[*a].as_ref().expect("placed on a built instance");
                                run_cell(inst, x, theta, h, snr, trial, setup, seed)
                            }
                            None => TrialRecord::unavailable(
                                theta,
                                h,
                                snr,
                                trial,
                                TrialStatus::Skipped(reason.clone()),
                            ),
                        });
                    }
                }
            }
            out
        })
        .collect();

    let theta_pos = |t: f64| theta_values.iter().position(|&v| v == t);
    let h_pos = |h: usize| h_values.iter().position(|&v| v == h);
    let snr_pos = |s: Option<f64>| snr_values.iter().position(|&v| v == s);
    let mut records: Vec<TrialRecord> = per_trial.into_iter().flatten().collect();
    records.sort_by_key(|r| (theta_pos(r.theta), h_pos(r.h), snr_pos(r.snr_db), r.trial));
    records
}

/// Hop error over a grid of spike distances `h` and diffusion times `theta`
/// on fresh noiseless sensor graphs.
pub fn run_distance_theta_grid(grid: &ExperimentGrid, setup: &GridSetup) -> Result<GridOutput> {
    grid.validate()?;
    setup.cfg.validate()?;
    let records = run_grid(
        &grid.h_values,
        &grid.theta_values,
        &[None],
        grid.trials,
        grid.seed,
        setup,
    );
    Ok(GridOutput {
        records,
        with_snr: false,
    })
}

/// Hop error over a grid of SNR levels and diffusion times at the spike
/// distances in `grid.h_values` (typically a single value).
pub fn run_snr_theta_grid(grid: &ExperimentGrid, setup: &GridSetup) -> Result<GridOutput> {
    grid.validate()?;
    setup.cfg.validate()?;
    let snrs: Vec<Option<f64>> = grid.snr_db.iter().copied().map(Some).collect();
    let records = run_grid(
        &grid.h_values,
        &grid.theta_values,
        &snrs,
        grid.trials,
        grid.seed,
        setup,
    );
    Ok(GridOutput {
        records,
        with_snr: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_setup() -> GridSetup {
        GridSetup {
            n: 40,
            k: 5,
            ..GridSetup::default()
        }
    }

    #[test]
    fn summary_statistics() {
        let s = summarize(&[1.0, 2.0, 3.0, f64::INFINITY, f64::NAN]);
        assert_eq!(s.trials, 5);
        assert_eq!(s.finite, 3);
        assert_eq!(s.infinite, 1);
        assert_eq!(s.unavailable, 1);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 1.0);
        assert!(summarize(&[]).mean.is_nan());
    }

    #[test]
    fn summary_path_suffix() {
        assert_eq!(summary_path(Path::new("out/g.csv")), PathBuf::from("out/g_summary.csv"));
        assert_eq!(summary_path(Path::new("g")), PathBuf::from("g_summary"));
    }

    #[test]
    fn empty_grid_is_header_only() {
        let grid = ExperimentGrid {
            h_values: vec![],
            theta_values: vec![0.5],
            trials: 2,
            ..ExperimentGrid::default()
        };
        let out = run_distance_theta_grid(&grid, &small_setup()).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(
            out.records_table().to_csv_string(),
            "theta,h,trial,hop_error,status,outer_iterations,converged,final_energy,theta_estimate\n"
        );
    }

    #[test]
    fn small_grid_is_deterministic_and_ordered() {
        let grid = ExperimentGrid {
            h_values: vec![1, 3],
            theta_values: vec![0.5, 2.0],
            trials: 3,
            seed: 17,
            ..ExperimentGrid::default()
        };
        let a = run_distance_theta_grid(&grid, &small_setup()).unwrap();
        let b = run_distance_theta_grid(&grid, &small_setup()).unwrap();
        assert_eq!(a.records_table().to_csv_string(), b.records_table().to_csv_string());
        assert_eq!(a.records.len(), 12);
        assert_eq!((a.records[0].theta, a.records[0].h, a.records[0].trial), (0.5, 1, 0));
        assert_eq!((a.records[3].theta, a.records[3].h, a.records[3].trial), (0.5, 3, 0));
        assert!(a.records.iter().all(|r| r.status.is_ok()));
        assert_eq!(a.summaries().len(), 4);
    }

    #[test]
    fn infeasible_distance_is_skipped() {
        let grid = ExperimentGrid {
            h_values: vec![200],
            theta_values: vec![1.0],
            trials: 1,
            ..ExperimentGrid::default()
        };
        let setup = GridSetup {
            placement_attempts: 2,
            ..small_setup()
        };
        let out = run_distance_theta_grid(&grid, &setup).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].status.label(), "skipped:infeasible-distance:200");
        assert!(out.records[0].hop_error.is_nan());
        assert_eq!(out.cell(1.0, 200, None).unwrap().unavailable, 1);
    }

    #[test]
    fn rejects_bad_grid() {
        let grid = ExperimentGrid {
            trials: 0,
            ..ExperimentGrid::default()
        };
        assert!(run_distance_theta_grid(&grid, &small_setup()).is_err());
        let grid = ExperimentGrid {
            snr_db: vec![f64::INFINITY],
            ..ExperimentGrid::default()
        };
        assert!(run_snr_theta_grid(&grid, &small_setup()).is_err());
    }
}
