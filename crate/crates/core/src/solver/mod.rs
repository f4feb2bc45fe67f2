//! Joint recovery of sparse sources and the heat-kernel diffusion time.
//!
//! The energy being minimized is
//!
//! ```text
//! E(x, theta) = gamma * ||x||_1 + alpha / 2 * ||M (A_theta x - b)||_2^2
//! ```
//!
//! with `M = diag(mask)`. It is minimized by alternating an accelerated
//! proximal-gradient solve in `x` ([`fista_solve_x`]) with a proximally
//! smoothed Newton step in `theta` ([`newton_theta_step`]).

mod fista;
mod newton;

pub use fista::{fista_solve_x, lipschitz_constant, soft_threshold, FistaOutput};
pub use newton::{newton_theta_step, ThetaFidelity};

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::diffusion::apply_diffusion;
use crate::error::{Error, Result};
use crate::graph::SpectralDecomposition;

/// An observed snapshot `b` together with a binary observation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    b: Array1<f64>,
    mask: Array1<f64>,
}

impl Observation {
    /// Fully observed snapshot.
    pub fn new(b: Array1<f64>) -> Result<Self> {
        let n = b.len();
        Self::with_mask(b, vec![true; n])
    }

    pub fn with_mask(b: Array1<f64>, mask: Vec<bool>) -> Result<Self> {
        if b.len() != mask.len() {
            return Err(Error::InvalidInput(format!(
                "observation has {} values but mask has {} entries",
                b.len(),
                mask.len()
            )));
        }
        if let Some(i) = b.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "observation entry {i} is not finite"
            )));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::InvalidInput(
                "observation mask must keep at least one node".into(),
            ));
        }
        let mask = mask.into_iter().map(|m| if m { 1.0 } else { 0.0 }).collect();
        Ok(Observation { b, mask })
    }

    pub fn n(&self) -> usize {
        self.b.len()
    }

    pub fn b(&self) -> ArrayView1<'_, f64> {
        self.b.view()
    }

    /// Mask as 0/1 weights.
    pub fn mask(&self) -> ArrayView1<'_, f64> {
        self.mask.view()
    }

    pub fn is_observed(&self, i: usize) -> bool {
        self.mask[i] != 0.0
    }

    pub fn is_fully_observed(&self) -> bool {
        self.mask.iter().all(|&m| m != 0.0)
    }

    /// `M (v - b)`.
    pub fn masked_residual(&self, v: ArrayView1<'_, f64>) -> Array1<f64> {
        let mut r = &v - &self.b;
        r *= &self.mask;
        r
    }

    pub(crate) fn set_value(&mut self, i: usize, value: f64) {
        self.b[i] = value;
    }

    pub(crate) fn set_masked(&mut self, i: usize) {
        self.mask[i] = 0.0;
    }

    fn check_dim(&self, decomp: &SpectralDecomposition) -> Result<()> {
        if self.n() == decomp.n() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "observation has {} entries but the graph has {} nodes",
                self.n(),
                decomp.n()
            )))
        }
    }
}

/// Solver tunables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Weight of the l1 term.
    pub gamma: f64,
    /// Weight of the fidelity term.
    pub alpha: f64,
    /// Outer stopping tolerance on the energy change.
    pub epsilon: f64,
    pub max_outer_iter: usize,
    pub fista_max_iter: usize,
    /// Relative objective change that stops the inner FISTA loop.
    pub fista_tol: f64,
    /// Weight of the proximal term anchoring theta to its previous value.
    pub mu: f64,
    pub newton_max_iter: usize,
    pub theta_min: f64,
    pub theta_max: f64,
    /// Skip the theta step and solve only for `x`.
    pub fix_theta: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let alpha = 1.0;
        SolverConfig {
            gamma: 1e-3,
            alpha,
            epsilon: 1e-8,
            max_outer_iter: 50,
            fista_max_iter: 1000,
            fista_tol: 1e-8,
            mu: 1e-2 * alpha,
            newton_max_iter: 20,
            theta_min: 1e-4,
            theta_max: 50.0,
            fix_theta: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma", self.gamma),
            ("alpha", self.alpha),
            ("epsilon", self.epsilon),
            ("fista_tol", self.fista_tol),
            ("theta_min", self.theta_min),
            ("theta_max", self.theta_max),
        ];
        for (name, v) in positive {
            // gamma = 0 is allowed: plain least squares
            let ok = if name == "gamma" { v >= 0.0 } else { v > 0.0 };
            if !(v.is_finite() && ok) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be a finite positive number, got {v}"
                )));
            }
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mu must be non-negative, got {}",
                self.mu
            )));
        }
        if self.theta_min >= self.theta_max {
            return Err(Error::InvalidParameter(format!(
                "theta_min ({}) must be below theta_max ({})",
                self.theta_min, self.theta_max
            )));
        }
        for (name, v) in [
            ("max_outer_iter", self.max_outer_iter),
            ("fista_max_iter", self.fista_max_iter),
            ("newton_max_iter", self.newton_max_iter),
        ] {
            if v == 0 {
                return Err(Error::InvalidParameter(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn check_theta(&self, theta: f64) -> Result<()> {
        if theta >= self.theta_min && theta <= self.theta_max {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "theta = {theta} outside [{}, {}]",
                self.theta_min, self.theta_max
            )))
        }
    }
}

/// Output of [`alternating_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub x: Array1<f64>,
    pub theta: f64,
    /// `(outer iteration, energy)`; entry 0 is the initial point.
    pub energy_trace: Vec<(usize, f64)>,
    pub converged: bool,
    pub outer_iterations: usize,
}

impl SolveResult {
    pub fn final_energy(&self) -> f64 {
        self.energy_trace.last().map_or(f64::NAN, |&(_, e)| e)
    }
}

/// The masked energy `E(x, theta)`.
pub fn objective(
    x: ArrayView1<'_, f64>,
    theta: f64,
    obs: &Observation,
    cfg: &SolverConfig,
    decomp: &SpectralDecomposition,
) -> Result<f64> {
    obs.check_dim(decomp)?;
    let ax = apply_diffusion(decomp, theta, x)?;
    Ok(energy_from_parts(x, &obs.masked_residual(ax.view()), cfg))
}

fn energy_from_parts(x: ArrayView1<'_, f64>, residual: &Array1<f64>, cfg: &SolverConfig) -> f64 {
    let l1: f64 = x.iter().map(|v| v.abs()).sum();
    let fid: f64 = residual.iter().map(|r| r * r).sum();
    cfg.gamma * l1 + 0.5 * cfg.alpha * fid
}

/// Alternating minimization of `E(x, theta)`: an x-step by FISTA, then a
/// theta-step by smoothed Newton, until the energy change drops below
/// `cfg.epsilon` or `cfg.max_outer_iter` is reached.
///
/// Either step is rejected when it would raise the energy, so the recorded
/// trace is non-increasing. With `fix_theta` the problem is convex and a
/// single x-step solves it.
pub fn alternating_solve(
    obs: &Observation,
    cfg: &SolverConfig,
    decomp: &SpectralDecomposition,
    x_init: Option<ArrayView1<'_, f64>>,
    theta_init: f64,
) -> Result<SolveResult> {
    cfg.validate()?;
    cfg.check_theta(theta_init)?;
    obs.check_dim(decomp)?;
    let mut x = match x_init {
        Some(x0) if x0.len() != obs.n() => {
            return Err(Error::InvalidInput(format!(
                "initial x has length {} for {} nodes",
                x0.len(),
                obs.n()
            )))
        }
        Some(x0) => x0.to_owned(),
        None => Array1::zeros(obs.n()),
    };
    let mut theta = theta_init;
    let mut energy = objective(x.view(), theta, obs, cfg, decomp)?;
    let mut trace = vec![(0, energy)];

    if cfg.fix_theta {
        let out = fista_solve_x(theta, obs, cfg, decomp, x.view())?;
        trace.push((1, out.objective));
        return Ok(SolveResult {
            x: out.x,
            theta,
            energy_trace: trace,
            converged: out.converged,
            outer_iterations: 1,
        });
    }

    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=cfg.max_outer_iter {
        iterations = k;
        let previous = energy;

        let out = fista_solve_x(theta, obs, cfg, decomp, x.view())?;
        if out.objective <= energy {
            x = out.x;
            energy = out.objective;
        }

        let candidate = newton_theta_step(x.view(), theta, obs, cfg, decomp)?;
        if candidate != theta {
            let e = objective(x.view(), candidate, obs, cfg, decomp)?;
            if e <= energy {
                theta = candidate;
                energy = e;
            } else {
                log::debug!("rejected theta step {theta} -> {candidate}: energy {energy} -> {e}");
            }
        }

        trace.push((k, energy));
        log::trace!("outer {k}: theta = {theta}, E = {energy}");
        if (previous - energy).abs() < cfg.epsilon {
            converged = true;
            break;
        }
    }

    Ok(SolveResult {
        x,
        theta,
        energy_trace: trace,
        converged,
        outer_iterations: iterations,
    })
}
