use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::matrix::KernelMatrix;
use crate::{Error, Result};

const REVERSIBILITY_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-10;

/// `½ Σ π(x) P(x, x') {φ(x') − φ(x)}²`.
pub fn dirichlet_form(kernel: &KernelMatrix, pi: &DVector<f64>, phi: &DVector<f64>) -> f64 {
    let p = kernel.p();
    let n = kernel.len();
    let mut total = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            let d = phi[j] - phi[i];
            row += p[(i, j)] * d * d;
        }
        total += pi[i] * row;
    }
    0.5 * total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub positive: bool,
    pub min_eigenvalue: f64,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
}

/// `D^{1/2} P D^{-1/2}` with `D = diag(π)`, symmetrized to remove rounding.
fn symmetrize(kernel: &KernelMatrix, pi: &DVector<f64>) -> Result<DMatrix<f64>> {
    let defect = kernel.detailed_balance_defect(pi);
    if defect > REVERSIBILITY_TOL {
        return Err(Error::NotReversible(defect));
    }
    let sq = pi.map(f64::sqrt);
    let p = kernel.p();
    let n = kernel.len();
    let s = DMatrix::from_fn(n, n, |i, j| sq[i] * p[(i, j)] / sq[j]);
    Ok((&s + s.transpose()) * 0.5)
}

/// Spectrum of a π-reversible kernel; positive when every eigenvalue is at
/// least `−1e−10`.
pub fn is_positive(kernel: &KernelMatrix, pi: &DVector<f64>) -> Result<Spectrum> {
    let s = symmetrize(kernel, pi)?;
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let min_eigenvalue = eigenvalues[0];
    Ok(Spectrum {
        positive: min_eigenvalue >= -POSITIVITY_TOL,
        min_eigenvalue,
        eigenvalues,
    })
}

/// `Σ_{λ<1} c_λ² (1 + λ)/(1 − λ)`, the asymptotic variance from the
/// eigen-expansion of a reversible kernel.
pub fn asym_var_spectral(
    kernel: &KernelMatrix,
    pi: &DVector<f64>,
    phi: &DVector<f64>,
) -> Result<f64> {
    let s = symmetrize(kernel, pi)?;
    let eig = SymmetricEigen::new(s);
    let mean = pi.dot(phi);
    let f = DVector::from_iterator(
        kernel.len(),
        pi.iter()
            .zip(phi.iter())
            .map(|(p, v)| p.sqrt() * (v - mean)),
    );
    let mut total = 0.0;
    for (k, lambda) in eig.eigenvalues.iter().enumerate() {
        let c = eig.eigenvectors.column(k).dot(&f);
        if c * c < 1e-28 {
            continue;
        }
        if *lambda > 1.0 - 1e-12 {
            return Err(Error::Singular(1.0 / (1.0 - lambda).abs()));
        }
        total += c * c * (1.0 + lambda) / (1.0 - lambda);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_swap() {
        let id = KernelMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let pi = DVector::from_vec(vec![0.5, 0.5]);
        assert!(is_positive(&id, &pi).unwrap().positive);
        let swap = KernelMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let sp = is_positive(&swap, &pi).unwrap();
        assert!(!sp.positive);
        assert!((sp.min_eigenvalue + 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_state_closed_form() {
        // Eigenvalues of a 2-state chain are 1 and 1 − a − b.
        let k = KernelMatrix::from_rows(&[vec![0.75, 0.25], vec![0.5, 0.5]]).unwrap();
        let pi = k.pi().unwrap();
        let sp = is_positive(&k, &pi).unwrap();
        assert!((sp.eigenvalues[0] - 0.25).abs() < 1e-14);
        assert!((sp.eigenvalues[1] - 1.0).abs() < 1e-14);
        assert!(sp.positive);
    }

    #[test]
    fn non_reversible_is_rejected() {
        let k = KernelMatrix::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        let pi = DVector::from_element(3, 1.0 / 3.0);
        assert!(matches!(is_positive(&k, &pi), Err(Error::NotReversible(_))));
    }

    #[test]
    fn dirichlet_of_constant_is_zero() {
        let k = KernelMatrix::from_rows(&[vec![0.75, 0.25], vec![0.5, 0.5]]).unwrap();
        let pi = k.pi().unwrap();
        assert_eq!(dirichlet_form(&k, &pi, &DVector::from_element(2, 7.0)), 0.0);
    }

    #[test]
    fn spectral_variance_matches_closed_form() {
        let k = KernelMatrix::from_rows(&[vec![0.75, 0.25], vec![0.5, 0.5]]).unwrap();
        let pi = k.pi().unwrap();
        let v = asym_var_spectral(&k, &pi, &DVector::from_vec(vec![-0.5, 1.0])).unwrap();
        assert!((v - 5.0 / 6.0).abs() < 1e-12);
    }
}
