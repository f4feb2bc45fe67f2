//! Parametric spectral diffusion kernels and the operators they induce.
//!
//! A kernel `g_theta(lambda)` acts on a graph signal through the Laplacian
//! eigenbasis: `A_theta x = U g_theta(Lambda) U^T x`. Operators are applied
//! matrix-free (two dense mat-vecs through `U`), so changing `theta` costs
//! `O(n^2)`; [`diffusion_matrix`] materializes `A_theta` for small problems.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::graph::SpectralDecomposition;

/// A diffusion kernel parametrized by a positive scalar `theta`.
///
/// Implementors provide the kernel and its first two derivatives with
/// respect to `theta`, which is everything the solver needs.
pub trait DiffusionKernel: Send + Sync {
    fn value(&self, theta: f64, lambda: f64) -> f64;
    fn d_theta(&self, theta: f64, lambda: f64) -> f64;
    fn d2_theta(&self, theta: f64, lambda: f64) -> f64;

    /// Evaluates the requested derivative order (0, 1 or 2).
    fn eval(&self, theta: f64, lambda: f64, order: u8) -> f64 {
        match order {
            0 => self.value(theta, lambda),
            1 => self.d_theta(theta, lambda),
            _ => self.d2_theta(theta, lambda),
        }
    }
}

/// Heat kernel `exp(-theta * lambda)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HeatKernel;

impl DiffusionKernel for HeatKernel {
    fn value(&self, theta: f64, lambda: f64) -> f64 {
        (-theta * lambda).exp()
    }

    fn d_theta(&self, theta: f64, lambda: f64) -> f64 {
        -lambda * (-theta * lambda).exp()
    }

    fn d2_theta(&self, theta: f64, lambda: f64) -> f64 {
        lambda * lambda * (-theta * lambda).exp()
    }
}

/// Diffusion time of the heat kernel.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct HeatKernelParam(f64);

impl HeatKernelParam {
    pub fn new(theta: f64) -> Result<Self> {
        check_theta(theta)?;
        Ok(HeatKernelParam(theta))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta.is_finite() && theta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "theta must be a finite positive number, got {theta}"
        )))
    }
}

fn check_dim(decomp: &SpectralDecomposition, x: ArrayView1<'_, f64>) -> Result<()> {
    if x.len() == decomp.n() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "signal has length {} but the graph has {} nodes",
            x.len(),
            decomp.n()
        )))
    }
}

/// Heat kernel value `exp(-theta * lambda)`.
pub fn kernel_eval(theta: f64, lambda: f64) -> Result<f64> {
    check_theta(theta)?;
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "lambda must be non-negative, got {lambda}"
        )));
    }
    Ok(HeatKernel.value(theta, lambda))
}

/// Scales precomputed spectral coefficients by a kernel derivative and maps
/// back to the vertex domain.
pub fn filter_coefficients<K: DiffusionKernel>(
    decomp: &SpectralDecomposition,
    kernel: &K,
    theta: f64,
    coeffs: ArrayView1<'_, f64>,
    order: u8,
) -> Array1<f64> {
    let scaled: Array1<f64> = decomp
        .eigenvalues()
        .iter()
        .zip(coeffs)
        .map(|(&l, &c)| kernel.eval(theta, l, order) * c)
        .collect();
    decomp.synthesize(scaled.view())
}

/// `A_theta x` for the heat kernel.
pub fn apply_diffusion(
    decomp: &SpectralDecomposition,
    theta: f64,
    x: ArrayView1<'_, f64>,
) -> Result<Array1<f64>> {
    check_theta(theta)?;
    check_dim(decomp, x)?;
    let coeffs = decomp.analyze(x);
    Ok(filter_coefficients(decomp, &HeatKernel, theta, coeffs.view(), 0))
}

/// `d^order A_theta / d theta^order x` for the heat kernel, `order` in {1, 2}.
pub fn apply_theta_derivative(
    decomp: &SpectralDecomposition,
    theta: f64,
    x: ArrayView1<'_, f64>,
    order: u8,
) -> Result<Array1<f64>> {
    if !(order == 1 || order == 2) {
        return Err(Error::InvalidParameter(format!(
            "derivative order must be 1 or 2, got {order}"
        )));
    }
    check_theta(theta)?;
    check_dim(decomp, x)?;
    let coeffs = decomp.analyze(x);
    Ok(filter_coefficients(decomp, &HeatKernel, theta, coeffs.view(), order))
}

/// Dense `A_theta = U exp(-theta Lambda) U^T`.
pub fn diffusion_matrix(decomp: &SpectralDecomposition, theta: f64) -> Result<Array2<f64>> {
    check_theta(theta)?;
    let g = decomp.eigenvalues().mapv(|l| HeatKernel.value(theta, l));
    let u = decomp.eigenvectors();
    let scaled = &u * &g.view().insert_axis(Axis(0));
    let mut a = scaled.dot(&u.t());
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[[i, j]] + a[[j, i]]);
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
    Ok(a)
}

/// The heat diffusion operator at a fixed `theta`, bound to a decomposition.
#[derive(Debug, Clone, Copy)]
pub struct DiffusionOperator<'a> {
    decomp: &'a SpectralDecomposition,
    theta: HeatKernelParam,
}

impl<'a> DiffusionOperator<'a> {
    pub fn new(decomp: &'a SpectralDecomposition, theta: f64) -> Result<Self> {
        Ok(DiffusionOperator {
            decomp,
            theta: HeatKernelParam::new(theta)?,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta.get()
    }

    /// Spectral norm `exp(-theta * lambda_min)`.
    pub fn norm(&self) -> f64 {
        HeatKernel.value(self.theta(), self.decomp.lambda_min())
    }

    pub fn apply(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let coeffs = self.decomp.analyze(x);
        filter_coefficients(self.decomp, &HeatKernel, self.theta(), coeffs.view(), 0)
    }
}
