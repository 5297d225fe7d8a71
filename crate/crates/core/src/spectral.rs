//! Spectra of discrete operators: eigenvalues sorted by magnitude, the
//! `lambda = 1 - mu` correspondence, simplicity detection, and the
//! variational quantities attached to the first eigenvalue.

use crate::error::SpectralError;
use crate::linalg::{self, jacobi_eigen, SymMatrix, JACOBI_MAX_SWEEPS, JACOBI_TOL_FACTOR};
use crate::operator::DiscreteOperator;

/// Default nearest-neighbor gap threshold, as a multiple of the spectral
/// radius, below which an eigenvalue is not flagged simple.
pub const GAP_TOL_FACTOR: f64 = 1e-6;

/// Full spectrum of a discrete convolution operator.
///
/// `mus` are sorted by decreasing magnitude with a signed-descending
/// tiebreak; `lambdas[i] = 1 - mus[i]` in the same order. Eigenvectors are
/// orthonormal in the discrete L2 inner product with weight `cell_weight`
/// and signed so the entry of largest magnitude is positive.
#[derive(Debug, Clone)]
pub struct Spectrum {
    mus: Vec<f64>,
    lambdas: Vec<f64>,
    vectors: Vec<f64>,
    gaps: Vec<f64>,
    simple: Vec<bool>,
    gap_tol: f64,
    n: usize,
    cell_weight: f64,
    sweeps: usize,
    off_norm: f64,
}

/// Eigendecomposition with the default gap tolerance.
pub fn eigendecompose(op: &DiscreteOperator) -> Result<Spectrum, SpectralError> {
    spectrum_from_matrix(op.matrix(), op.grid().cell_weight(), None)
}

/// Eigendecomposition with an explicit gap tolerance for simplicity flags.
pub fn eigendecompose_with(
    op: &DiscreteOperator,
    gap_tol: Option<f64>,
) -> Result<Spectrum, SpectralError> {
    spectrum_from_matrix(op.matrix(), op.grid().cell_weight(), gap_tol)
}

/// Spectrum of an arbitrary symmetric matrix interpreted against the given
/// quadrature weight. This also serves the pull-back operator, whose
/// similarity-transformed matrix is not assembled from a domain.
pub fn spectrum_from_matrix(
    m: &SymMatrix,
    cell_weight: f64,
    gap_tol: Option<f64>,
) -> Result<Spectrum, SpectralError> {
    let n = m.n();
    let dec = jacobi_eigen(m, JACOBI_MAX_SWEEPS, JACOBI_TOL_FACTOR)?;
    let mus = dec.values;
    let lambdas: Vec<f64> = mus.iter().map(|mu| 1.0 - mu).collect();

    // Normalize to the weighted inner product and fix the sign convention.
    let mut vectors = dec.vectors;
    let scale = 1.0 / cell_weight.sqrt();
    for r in 0..n {
        let row = &mut vectors[r * n..(r + 1) * n];
        let mut max_abs = 0.0;
        let mut max_val = 0.0;
        for &v in row.iter() {
            if v.abs() > max_abs {
                max_abs = v.abs();
                max_val = v;
            }
        }
        let sign = if max_val < 0.0 { -1.0 } else { 1.0 };
        for v in row.iter_mut() {
            *v *= sign * scale;
        }
    }

    let gaps = nearest_gaps(&mus);
    let radius = mus.first().map(|m| m.abs()).unwrap_or(0.0);
    let gap_tol = gap_tol.unwrap_or(GAP_TOL_FACTOR * radius);
    let simple = gaps.iter().map(|&g| g > gap_tol).collect();
    Ok(Spectrum {
        mus,
        lambdas,
        vectors,
        gaps,
        simple,
        gap_tol,
        n,
        cell_weight,
        sweeps: dec.sweeps,
        off_norm: dec.off_norm,
    })
}

fn nearest_gaps(mus: &[f64]) -> Vec<f64> {
    let n = mus.len();
    if n <= 1 {
        return vec![f64::INFINITY; n];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| mus[a].partial_cmp(&mus[b]).unwrap());
    let mut gaps = vec![f64::INFINITY; n];
    for w in 0..n {
        let idx = order[w];
        let mut g = f64::INFINITY;
        if w > 0 {
            g = g.min((mus[idx] - mus[order[w - 1]]).abs());
        }
        if w + 1 < n {
            g = g.min((mus[order[w + 1]] - mus[idx]).abs());
        }
        gaps[idx] = g;
    }
    gaps
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn mus(&self) -> &[f64] {
        &self.mus
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn mu(&self, i: usize) -> f64 {
        self.mus[i]
    }

    pub fn lambda(&self, i: usize) -> f64 {
        self.lambdas[i]
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    pub fn gap_tol(&self) -> f64 {
        self.gap_tol
    }

    pub fn is_simple(&self, i: usize) -> bool {
        self.simple[i]
    }

    /// Eigenvector for eigenvalue `i`, normalized in the weighted inner
    /// product.
    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.n..(i + 1) * self.n]
    }

    pub fn cell_weight(&self) -> f64 {
        self.cell_weight
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn off_norm(&self) -> f64 {
        self.off_norm
    }

    /// Sum of all eigenvalues; equals the matrix trace up to solver error.
    pub fn trace_sum(&self) -> f64 {
        self.mus.iter().sum()
    }

    /// Weighted inner product of two node vectors.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.cell_weight * linalg::dot(a, b)
    }

    /// True when the first eigenvector is strictly positive on every active
    /// node (after the sign convention).
    pub fn perron_vector_positive(&self) -> bool {
        self.n > 0 && self.vector(0).iter().all(|&v| v > 0.0)
    }

    /// Largest off-diagonal entry of the weighted Gram matrix of the leading
    /// `count` eigenvectors, a direct orthonormality diagnostic.
    pub fn max_gram_offdiag(&self, count: usize) -> f64 {
        let count = count.min(self.n);
        let mut worst: f64 = 0.0;
        for i in 0..count {
            for j in (i + 1)..count {
                worst = worst.max(self.inner(self.vector(i), self.vector(j)).abs());
            }
        }
        worst
    }
}

/// The Rayleigh functional whose infimum over nonzero vectors supported in
/// the domain is the first eigenvalue of `I - K`. Computed as
/// `1 - <u, K u> / <u, u>`; the quadrature weight cancels in the quotient.
pub fn rayleigh_lambda1(op: &DiscreteOperator, u: &[f64]) -> Result<f64, SpectralError> {
    let n = op.n_active();
    if u.len() != n {
        return Err(SpectralError::LengthMismatch {
            expected: n,
            got: u.len(),
        });
    }
    let uu = linalg::dot(u, u);
    if uu == 0.0 {
        return Err(SpectralError::ZeroVector);
    }
    let mut ku = vec![0.0; n];
    op.matrix().apply(u, &mut ku);
    Ok(1.0 - linalg::dot(u, &ku) / uu)
}

/// Flags the leading `count` eigenvalues as simple or not by their nearest
/// neighbor gap; the result drives eigenvalue tracking under perturbation.
pub fn detect_simple_systems(s: &Spectrum, count: usize) -> Vec<(usize, bool)> {
    (0..count.min(s.len()))
        .map(|i| (i, s.is_simple(i)))
        .collect()
}
