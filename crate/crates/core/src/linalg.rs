//! Small dense symmetric-matrix helpers on top of nalgebra.

use nalgebra::{DVector, SymmetricEigen};

use crate::fields::SymMatrix;

/// Relative threshold separating zero from non-zero eigenvalues.
pub const EIGEN_ZERO_RELATIVE: f64 = 1e-8;

/// Spectral data of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
    pub spectral_radius: f64,
}

impl Spectrum {
    pub fn of(m: &SymMatrix) -> Self {
        let mut eigenvalues: Vec<f64> = SymmetricEigen::new(m.to_dmatrix()).eigenvalues.iter().copied().collect();
        eigenvalues.sort_by(f64::total_cmp);
        let spectral_radius = eigenvalues.iter().fold(0.0f64, |r, v| r.max(v.abs()));
        Self {
            eigenvalues,
            spectral_radius,
        }
    }

    /// Spectrum of D^{−1/2}·M·D^{−1/2} with D = diag(|Mᵢᵢ|) (zero diagonal
    /// entries left unscaled). The congruence keeps the inertia, and the
    /// unit diagonal keeps eigenvalues of very different scales resolvable.
    pub fn of_scaled(m: &SymMatrix) -> Self {
        let n = m.dim();
        let s: Vec<f64> = (0..n)
            .map(|i| {
                let d = m.get(i, i).abs();
                if d > 0.0 { d.sqrt().recip() } else { 1.0 }
            })
            .collect();
        let mut scaled = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                scaled.set(i, j, m.get(i, j) * s[i] * s[j]);
            }
        }
        Self::of(&scaled)
    }

    /// `relative · max(ρ, floor)`; a positive floor lets tiny 1×1 or
    /// uniformly small Hessians register as degenerate.
    pub fn zero_threshold(&self, relative: f64, floor: f64) -> f64 {
        relative * self.spectral_radius.max(floor)
    }

    /// Positive minus negative eigenvalue count, ignoring |λ| ≤ `thr`.
    pub fn signature(&self, thr: f64) -> i32 {
        self.eigenvalues
            .iter()
            .map(|&l| {
                if l > thr {
                    1
                } else if l < -thr {
                    -1
                } else {
                    0
                }
            })
            .sum()
    }

    /// Number of eigenvalues with |λ| ≤ `thr`.
    pub fn zero_count(&self, thr: f64) -> usize {
        self.eigenvalues.iter().filter(|l| l.abs() <= thr).count()
    }
}

/// Determinant by LU with partial pivoting.
pub fn determinant(m: &SymMatrix) -> f64 {
    m.to_dmatrix().lu().determinant()
}

/// Newton direction −H⁻¹g through the eigen-decomposition, with
/// eigenvalues of magnitude below `floor_rel·ρ(H)` lifted to that floor
/// (sign kept). The result is always finite for finite input.
pub fn regularized_newton_step(h: &SymMatrix, g: &[f64], floor_rel: f64) -> Vec<f64> {
    let n = g.len();
    let eig = SymmetricEigen::new(h.to_dmatrix());
    let rho = eig.eigenvalues.iter().fold(0.0f64, |r, v| r.max(v.abs()));
    let floor = (floor_rel * rho).max(f64::MIN_POSITIVE);
    let gv = DVector::from_column_slice(g);
    let mut d = DVector::<f64>::zeros(n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let lam = if lambda.abs() < floor {
            if lambda < 0.0 {
                -floor
            } else {
                floor
            }
        } else {
            lambda
        };
        d -= v * (v.dot(&gv) / lam);
    }
    d.iter().copied().collect()
}
