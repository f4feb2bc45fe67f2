//! Localization quality on a fixed dataset as the k-NN graph degree varies.

use std::path::Path;

use ndarray::Array1;
use rayon::prelude::*;

use super::TrialStatus;
use crate::data_io::{
    argmax_node, interpolate_invalid, remove_outlier, write_results, Dataset, Format,
    OutlierMode, Table, Value,
};
use crate::error::{Error, Result};
use crate::graph::{
    build_knn_graph, normalized_laplacian, spectral_decomposition, KnnInput, Sigma2,
};
use crate::metrics::hop_error;
use crate::solver::{alternating_solve, Observation, SolverConfig};

/// Which node an outlier policy is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutlierSelection {
    /// The node with the largest observed value.
    Max,
    Node(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSweepOptions {
    pub k_values: Vec<usize>,
    pub sigma2: Sigma2,
    /// Diffusion time; kept fixed when `cfg.fix_theta`, else the start value.
    pub theta: f64,
    pub cfg: SolverConfig,
    pub outlier: Option<OutlierMode>,
    pub selection: OutlierSelection,
}

impl Default for KSweepOptions {
    fn default() -> Self {
        KSweepOptions {
            k_values: (5..=25).collect(),
            sigma2: Sigma2::Auto,
            theta: 1.0,
            cfg: SolverConfig {
                fix_theta: true,
                ..SolverConfig::default()
            },
            outlier: None,
            selection: OutlierSelection::Max,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSweepRecord {
    pub k: usize,
    /// NaN when the cell did not produce a result.
    pub hop_error: f64,
    pub status: TrialStatus,
    pub removed: Option<usize>,
    pub converged: bool,
    pub outer_iterations: usize,
    pub final_energy: f64,
    pub theta_estimate: f64,
    /// Node carrying the largest recovered magnitude.
    pub peak: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSweepOutput {
    pub records: Vec<KSweepRecord>,
    pub outlier: Option<OutlierMode>,
    pub ids: Vec<String>,
}

impl KSweepOutput {
    pub fn record(&self, k: usize) -> Option<&KSweepRecord> {
        self.records.iter().find(|r| r.k == k)
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new([
            "k",
            "outlier_mode",
            "removed_node",
            "hop_error",
            "status",
            "converged",
            "outer_iterations",
            "final_energy",
            "theta_estimate",
            "peak_node",
        ]);
        let mode = self.outlier.map_or_else(|| "none".to_string(), |m| m.to_string());
        let id = |i: Option<usize>| -> Value {
            i.map_or_else(String::new, |i| self.ids[i].clone()).into()
        };
        for r in &self.records {
            t.push(vec![
                r.k.into(),
                mode.as_str().into(),
                id(r.removed),
                r.hop_error.into(),
                r.status.label().into(),
                r.converged.into(),
                r.outer_iterations.into(),
                r.final_energy.into(),
                r.theta_estimate.into(),
                id(r.peak),
            ]);
        }
        t
    }

    pub fn write(&self, path: &Path, format: Format) -> Result<()> {
        write_results(&self.table(), path, format)
    }
}

fn peak_node(x: &Array1<f64>) -> Option<usize> {
    x.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .fold(None, |best: Option<(usize, f64)>, (i, v)| match best {
            Some((_, m)) if m >= v.abs() => best,
            _ => Some((i, v.abs())),
        })
        .map(|(i, _)| i)
}

fn run_one(
    data: &Dataset,
    x_ref: &[f64],
    k: usize,
    opts: &KSweepOptions,
) -> Result<KSweepRecord> {
    let input = match (&data.distances, &data.coords) {
        (Some(d), _) => KnnInput::Distances(d.view()),
        (None, Some(c)) => KnnInput::Points(c.view()),
        (None, None) => unreachable!("checked by run_k_sweep"),
    };
    let g = build_knn_graph(input, k, opts.sigma2)?;
    let decomp = spectral_decomposition(normalized_laplacian(&g)?.view())?;
    let b = interpolate_invalid(&data.signal, &g)?;
    let mut obs = Observation::new(b)?;
    let mut removed = None;
    if let Some(mode) = opts.outlier {
        let node = match opts.selection {
            OutlierSelection::Max => argmax_node(&obs),
            OutlierSelection::Node(i) => i,
        };
        obs = remove_outlier(&obs, node, mode, &g)?;
        removed = Some(node);
    }
    let res = alternating_solve(&obs, &opts.cfg, &decomp, None, opts.theta)?;
    let report = hop_error(x_ref, res.x.as_slice().expect("contiguous"), &g, 0.0)?;
    Ok(KSweepRecord {
        k,
        hop_error: report.total,
        status: TrialStatus::Ok,
        removed,
        converged: res.converged,
        outer_iterations: res.outer_iterations,
        final_energy: res.final_energy(),
        theta_estimate: res.theta,
        peak: peak_node(&res.x),
    })
}

/// Localizes the sources of `data` on the k-NN graph for every `k` and scores
/// each recovery against the known `sources`.
///
/// Invalid samples are interpolated on each graph before solving. Values of
/// `k` that the node count cannot support are reported as skipped.
pub fn run_k_sweep(data: &Dataset, sources: &[usize], opts: &KSweepOptions) -> Result<KSweepOutput> {
    let n = data.n();
    if data.distances.is_none() && data.coords.is_none() {
        return Err(Error::InvalidInput(
            "the dataset needs coordinates or a distance matrix".into(),
        ));
    }
    if sources.is_empty() {
        return Err(Error::InvalidReference("no reference sources given".into()));
    }
    if let Some(&s) = sources.iter().find(|&&s| s >= n) {
        return Err(Error::InvalidReference(format!(
            "source index {s} out of range for {n} nodes"
        )));
    }
    if let OutlierSelection::Node(i) = opts.selection {
        if opts.outlier.is_some() && i >= n {
            return Err(Error::InvalidInput(format!(
                "outlier node {i} out of range for {n} nodes"
            )));
        }
    }
    opts.cfg.validate()?;
    opts.cfg.check_theta(opts.theta)?;

    let mut x_ref = vec![0.0; n];
    for &s in sources {
        x_ref[s] = 1.0;
    }
    let records = opts
        .k_values
        .par_iter()
        .map(|&k| {
            if k == 0 || k >= n {
                return KSweepRecord {
                    k,
                    hop_error: f64::NAN,
                    status: TrialStatus::Skipped(format!("k-out-of-range:{n}")),
                    removed: None,
                    converged: false,
                    outer_iterations: 0,
                    final_energy: f64::NAN,
                    theta_estimate: f64::NAN,
                    peak: None,
                };
            }
            run_one(data, &x_ref, k, opts).unwrap_or_else(|e| {
                log::warn!("k = {k} failed: {e}");
                KSweepRecord {
                    k,
                    hop_error: f64::NAN,
                    status: TrialStatus::Failed(e.category().into()),
                    removed: None,
                    converged: false,
                    outer_iterations: 0,
                    final_energy: f64::NAN,
                    theta_estimate: f64::NAN,
                    peak: None,
                }
            })
        })
        .collect();
    Ok(KSweepOutput {
        records,
        outlier: opts.outlier,
        ids: data.ids.clone(),
    })
}
