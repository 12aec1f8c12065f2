use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::matrix::KernelMatrix;
use super::spectral::dirichlet_form;
use crate::{Error, Result};

const MAX_CONDITION: f64 = 1e8;
const RESIDUAL_TOL: f64 = 1e-10;

/// Inverse of `I − P + 1πᵀ`, factorized once and reused across test
/// functions.
#[derive(Debug, Clone)]
pub struct Fundamental {
    z: DMatrix<f64>,
    p: DMatrix<f64>,
    pi: DVector<f64>,
}

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max)
}

impl Fundamental {
    pub fn new(kernel: &KernelMatrix, pi: &DVector<f64>) -> Result<Self> {
        let n = kernel.len();
        let p = kernel.p().clone();
        let a = DMatrix::identity(n, n) - &p + DVector::from_element(n, 1.0) * pi.transpose();
        let z = a
            .clone()
            .try_inverse()
            .ok_or(Error::Singular(f64::INFINITY))?;
        let cond = norm1(&a) * norm1(&z);
        if !cond.is_finite() || cond > MAX_CONDITION {
            return Err(Error::Singular(cond));
        }
        Ok(Self {
            z,
            p,
            pi: pi.clone(),
        })
    }

    pub fn pi(&self) -> &DVector<f64> {
        &self.pi
    }

    /// `φ − π(φ)`.
    pub fn center(&self, phi: &DVector<f64>) -> DVector<f64> {
        let mean = self.pi.dot(phi);
        phi.map(|v| v - mean)
    }

    /// Solution `g` of `(I − P) g = φ − π(φ)` with `π(g) = 0`.
    pub fn solve(&self, phi: &DVector<f64>) -> Result<DVector<f64>> {
        let bar = self.center(phi);
        let g = &self.z * &bar;
        let residual = (&g - &self.p * &g - &bar).amax();
        let scale = bar.amax().max(1.0);
        if residual > RESIDUAL_TOL * scale {
            return Err(Error::Singular(residual));
        }
        Ok(g)
    }

    /// `2 Σ π φ̄ g`.
    pub fn cont_var(&self, phi: &DVector<f64>) -> Result<f64> {
        let bar = self.center(phi);
        let g = self.solve(phi)?;
        Ok(2.0 * self.pi.component_mul(&bar).dot(&g))
    }

    /// `2 Σ π φ̄ g − π(φ̄²)`.
    pub fn asym_var(&self, phi: &DVector<f64>) -> Result<f64> {
        let bar = self.center(phi);
        let g = self.solve(phi)?;
        let var_pi = self.pi.dot(&bar.component_mul(&bar));
        Ok(2.0 * self.pi.component_mul(&bar).dot(&g) - var_pi)
    }

    pub fn var_pi(&self, phi: &DVector<f64>) -> f64 {
        let bar = self.center(phi);
        self.pi.dot(&bar.component_mul(&bar))
    }
}

pub fn solve_poisson(
    kernel: &KernelMatrix,
    pi: &DVector<f64>,
    phi: &DVector<f64>,
) -> Result<DVector<f64>> {
    Fundamental::new(kernel, pi)?.solve(phi)
}

/// Asymptotic variance `var(φ, P)` of the ergodic average.
pub fn asym_var_exact(kernel: &KernelMatrix, pi: &DVector<f64>, phi: &DVector<f64>) -> Result<f64> {
    Fundamental::new(kernel, pi)?.asym_var(phi)
}

/// Time-average variance of the unit-rate Poissonized chain.
pub fn cont_var_exact(kernel: &KernelMatrix, pi: &DVector<f64>, phi: &DVector<f64>) -> Result<f64> {
    Fundamental::new(kernel, pi)?.cont_var(phi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub label: String,
    pub mean: f64,
    pub var_pi: f64,
    pub asym_var: f64,
    pub cont_var: f64,
    pub dirichlet: f64,
}

pub fn variance_report(
    kernel: &KernelMatrix,
    label: &str,
    phi: &DVector<f64>,
) -> Result<VarianceReport> {
    let pi = kernel.pi()?;
    let f = Fundamental::new(kernel, &pi)?;
    Ok(VarianceReport {
        label: label.to_string(),
        mean: pi.dot(phi),
        var_pi: f.var_pi(phi),
        asym_var: f.asym_var(phi)?,
        cont_var: f.cont_var(phi)?,
        dirichlet: dirichlet_form(kernel, &pi, phi),
    })
}
