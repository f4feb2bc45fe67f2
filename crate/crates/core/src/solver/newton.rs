//! Proximally smoothed Newton step for the diffusion time.

use ndarray::{Array1, ArrayView1};

use super::{Observation, SolverConfig};
use crate::diffusion::{filter_coefficients, HeatKernel};
use crate::error::{Error, Result};
use crate::graph::SpectralDecomposition;

const MAX_HALVINGS: usize = 40;

/// The fidelity `f(theta) = alpha / 2 * ||M (A_theta x - b)||^2` for a fixed
/// `x`, with its first two derivatives.
///
/// `U^T x` is computed once, so each evaluation costs a few `O(n^2)`
/// synthesis products.
#[derive(Debug, Clone)]
pub struct ThetaFidelity<'a> {
    decomp: &'a SpectralDecomposition,
    coeffs: Array1<f64>,
    obs: &'a Observation,
    alpha: f64,
}

impl<'a> ThetaFidelity<'a> {
    pub fn new(
        decomp: &'a SpectralDecomposition,
        x: ArrayView1<'_, f64>,
        obs: &'a Observation,
        alpha: f64,
    ) -> Result<Self> {
        obs.check_dim(decomp)?;
        if x.len() != decomp.n() {
            return Err(Error::InvalidInput(format!(
                "x has length {} for {} nodes",
                x.len(),
                decomp.n()
            )));
        }
        Ok(ThetaFidelity {
            decomp,
            coeffs: decomp.analyze(x),
            obs,
            alpha,
        })
    }

    fn residual(&self, theta: f64) -> Array1<f64> {
        let ax = filter_coefficients(self.decomp, &HeatKernel, theta, self.coeffs.view(), 0);
        self.obs.masked_residual(ax.view())
    }

    pub fn value(&self, theta: f64) -> f64 {
        let r = self.residual(theta);
        0.5 * self.alpha * r.dot(&r)
    }

    /// `(f, f', f'')` at `theta`.
    pub fn evaluate(&self, theta: f64) -> (f64, f64, f64) {
        let r = self.residual(theta);
        let mask = self.obs.mask();
        let mut d1 = filter_coefficients(self.decomp, &HeatKernel, theta, self.coeffs.view(), 1);
        d1 *= &mask;
        let d2 = filter_coefficients(self.decomp, &HeatKernel, theta, self.coeffs.view(), 2);
        let f = 0.5 * self.alpha * r.dot(&r);
        let f1 = self.alpha * r.dot(&d1);
        // r is already masked, so M d2 need not be formed
        let f2 = self.alpha * (d1.dot(&d1) + r.dot(&d2));
        (f, f1, f2)
    }
}

/// One theta update: minimizes `f(theta) + mu / 2 * (theta - theta_k)^2` by
/// damped Newton iterations projected onto `[theta_min, theta_max]`.
///
/// Returns `theta_k` unchanged unless the proximal objective strictly
/// decreases.
pub fn newton_theta_step(
    x: ArrayView1<'_, f64>,
    theta_k: f64,
    obs: &Observation,
    cfg: &SolverConfig,
    decomp: &SpectralDecomposition,
) -> Result<f64> {
    cfg.check_theta(theta_k)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("x contains non-finite entries".into()));
    }
    let fid = ThetaFidelity::new(decomp, x, obs, cfg.alpha)?;
    let prox = |theta: f64, f: f64| f + 0.5 * cfg.mu * (theta - theta_k).powi(2);
    let clamp = |theta: f64| theta.clamp(cfg.theta_min, cfg.theta_max);

    let start = prox(theta_k, fid.value(theta_k));
    let mut theta = theta_k;
    let mut current = start;

    for _ in 0..cfg.newton_max_iter {
        let (_, f1, f2) = fid.evaluate(theta);
        let grad = f1 + cfg.mu * (theta - theta_k);
        let curv = f2 + cfg.mu;
        if grad == 0.0 || !grad.is_finite() {
            break;
        }
        let direction = if curv > 0.0 && curv.is_finite() {
            -grad / curv
        } else {
            // non-convex region: plain descent move of half the current value
            -grad.signum() * 0.5 * theta
        };

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand = clamp(theta + scale * direction);
            if cand != theta {
                let value = prox(cand, fid.value(cand));
                if value < current {
                    accepted = Some((cand, value));
                    break;
                }
            }
            scale *= 0.5;
        }
        let Some((cand, value)) = accepted else {
            break;
        };
        let moved = (cand - theta).abs();
        theta = cand;
        current = value;
        if moved <= 1e-12 * theta.max(1.0) {
            break;
        }
    }

    if current < start {
        Ok(theta)
    } else {
        Ok(theta_k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::apply_diffusion;
    use crate::graph::{normalized_laplacian, spectral_decomposition, Graph};
    use ndarray::array;

    fn two_node() -> SpectralDecomposition {
        let g = Graph::from_weights(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        spectral_decomposition(normalized_laplacian(&g).unwrap().view()).unwrap()
    }

    /// Scan oracle for the 1-D objective.
    fn scan_minimizer(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        let steps = 200_000;
        (0..=steps)
            .map(|i| lo + (hi - lo) * i as f64 / steps as f64)
            .min_by(|a, b| f(*a).total_cmp(&f(*b)))
            .unwrap()
    }

    #[test]
    fn exact_data_is_stationary() {
        let d = two_node();
        let x = array![1.0, 0.0];
        let obs = Observation::new(apply_diffusion(&d, 1.7, x.view()).unwrap()).unwrap();
        let cfg = SolverConfig::default();
        assert_eq!(newton_theta_step(x.view(), 1.7, &obs, &cfg, &d).unwrap(), 1.7);
    }

    #[test]
    fn recovers_two_node_theta() {
        let d = two_node();
        let x = array![1.0, 0.0];
        let obs = Observation::new(apply_diffusion(&d, 1.0, x.view()).unwrap()).unwrap();
        let cfg = SolverConfig {
            mu: 0.0,
            ..SolverConfig::default()
        };
        let fid = ThetaFidelity::new(&d, x.view(), &obs, cfg.alpha).unwrap();
        let oracle = scan_minimizer(|t| fid.value(t), 0.5, 1.5);
        assert!((oracle - 1.0).abs() < 1e-4);
        let theta = newton_theta_step(x.view(), 0.8, &obs, &cfg, &d).unwrap();
        assert!((theta - 1.0).abs() < 1e-4, "theta = {theta}");
    }

    #[test]
    fn huge_proximal_weight_keeps_theta() {
        let d = two_node();
        let x = array![1.0, 0.0];
        let obs = Observation::new(apply_diffusion(&d, 1.0, x.view()).unwrap()).unwrap();
        let cfg = SolverConfig {
            mu: 1e300,
            ..SolverConfig::default()
        };
        let theta = newton_theta_step(x.view(), 0.8, &obs, &cfg, &d).unwrap();
        assert!((theta - 0.8).abs() < 1e-12);
    }

    #[test]
    fn respects_bounds() {
        let d = two_node();
        let x = array![1.0, 0.0];
        let obs = Observation::new(apply_diffusion(&d, 3.0, x.view()).unwrap()).unwrap();
        let cfg = SolverConfig {
            mu: 0.0,
            theta_max: 2.0,
            ..SolverConfig::default()
        };
        let theta = newton_theta_step(x.view(), 1.0, &obs, &cfg, &d).unwrap();
        assert!(theta <= 2.0);
        assert!(theta > 1.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let d = two_node();
        let x = array![0.7, -0.2];
        let obs = Observation::new(array![0.1, 0.4]).unwrap();
        let fid = ThetaFidelity::new(&d, x.view(), &obs, 1.3).unwrap();
        let h = 1e-4;
        for theta in [0.2, 0.9, 2.0] {
            let (_, f1, f2) = fid.evaluate(theta);
            let fd1 = (fid.value(theta + h) - fid.value(theta - h)) / (2.0 * h);
            let fd2 = (fid.evaluate(theta + h).1 - fid.evaluate(theta - h).1) / (2.0 * h);
            assert!((f1 - fd1).abs() <= 1e-6 * f1.abs().max(fd1.abs()));
            assert!((f2 - fd2).abs() <= 1e-6 * f2.abs().max(fd2.abs()));
        }
    }
}
