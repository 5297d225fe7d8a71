//! Dense symmetric linear algebra: storage, the cyclic Jacobi eigensolver,
//! and seeded subspace iteration for leading eigenvalues of large operators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::SpectralError;

/// Dense symmetric matrix in full row-major storage. Both triangles are kept
/// so row access stays contiguous in the hot loops.
#[derive(Debug, Clone)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n);
        SymMatrix { n, data }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute deviation from exact symmetry, for diagnostics.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// `y = A x`, rows in parallel.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.par_chunks_mut(1)
            .enumerate()
            .for_each(|(i, out)| {
                out[0] = dot(self.row(i), x);
            });
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Output of the dense eigensolver: eigenvalues sorted by decreasing
/// magnitude (ties broken by signed value, descending) and the matching
/// orthonormal eigenvectors stored as rows.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    /// Row-major `n x n`; row `k` is the eigenvector of `values[k]`.
    pub vectors: Vec<f64>,
    pub sweeps: usize,
    pub off_norm: f64,
}

/// Relative off-diagonal Frobenius target for the Jacobi iteration.
pub const JACOBI_TOL_FACTOR: f64 = 1e-12;
/// Sweep budget before the solver reports failure.
pub const JACOBI_MAX_SWEEPS: usize = 30;

/// Below this size a sweep applies plane rotations one pair at a time; above
/// it, rotations are accumulated per block stage and applied as panel
/// products, which turns the per-rotation strided column fix-up into one
/// strided pass per stage.
const POINTWISE_LIMIT: usize = 128;

/// Block edge of the accumulated-rotation stages.
const JACOBI_BLOCK: usize = 32;

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Sweeps run until the off-diagonal Frobenius norm drops below
/// `tol_factor * ||A||_F`. Pairs are visited in a fixed block order and the
/// rotations of a stage are accumulated before being applied, which changes
/// nothing mathematically but keeps the memory traffic panel-shaped.
pub fn jacobi_eigen(
    a: &SymMatrix,
    max_sweeps: usize,
    tol_factor: f64,
) -> Result<EigenDecomposition, SpectralError> {
    let n = a.n;
    let mut m = a.data.clone();
    let mut vt = vec![0.0; n * n];
    for i in 0..n {
        vt[i * n + i] = 1.0;
    }
    let frob = a.frobenius_norm();
    let target = tol_factor * frob;
    if n <= 1 || frob == 0.0 {
        return Ok(finish(n, m, vt, 0, 0.0));
    }
    // Skipping pairs below target/n still lands the sweep-level criterion:
    // n(n-1)/2 entries of size target/n have Frobenius mass below target.
    let skip = target / n as f64;

    let mut sweeps = 0;
    loop {
        let off = off_diag_norm(&m, n);
        if off <= target {
            return Ok(finish(n, m, vt, sweeps, off));
        }
        if sweeps >= max_sweeps {
            return Err(SpectralError::NoConvergence {
                sweeps,
                off_norm: off,
                target,
            });
        }
        if n <= POINTWISE_LIMIT {
            sweep_pointwise(&mut m, &mut vt, n, skip);
        } else {
            sweep_accumulated(&mut m, &mut vt, n, target)?;
        }
        sweeps += 1;
    }
}

fn off_diag_norm(m: &[f64], n: usize) -> f64 {
    let mut total = 0.0;
    for i in 0..n {
        let row = &m[i * n..(i + 1) * n];
        for (j, &v) in row.iter().enumerate() {
            if j != i {
                total += v * v;
            }
        }
    }
    total.sqrt()
}

fn sweep_pointwise(m: &mut [f64], vt: &mut [f64], n: usize, skip: f64) {
    for p in 0..n {
        for q in (p + 1)..n {
            rotate(m, vt, n, p, q, skip);
        }
    }
}

/// One cyclic pass over all block pairs. For each stage the pivot submatrix
/// is diagonalized by the pointwise solver and the resulting orthogonal
/// factor is applied to the row, column, and eigenvector panels as small
/// matrix products.
fn sweep_accumulated(
    m: &mut [f64],
    vt: &mut [f64],
    n: usize,
    target: f64,
) -> Result<(), SpectralError> {
    let nb = n.div_ceil(JACOBI_BLOCK);
    let block = |b: usize| (b * JACOBI_BLOCK, ((b + 1) * JACOBI_BLOCK).min(n));
    // Allowing each stage to keep off-mass target/num_stages preserves the
    // sweep-level criterion.
    let stages = (nb * (nb + 1) / 2) as f64;
    let stage_skip = target / stages;
    let mut scratch = StageScratch::new(n);
    for bi in 0..nb {
        for bj in bi..nb {
            let (is, ie) = block(bi);
            let (js, je) = block(bj);
            let idx: Vec<usize> = if bi == bj {
                (is..ie).collect()
            } else {
                (is..ie).chain(js..je).collect()
            };
            process_stage(m, vt, n, &idx, stage_skip, &mut scratch)?;
        }
    }
    Ok(())
}

struct StageScratch {
    panel: Vec<f64>,
    new_panel: Vec<f64>,
}

impl StageScratch {
    fn new(n: usize) -> Self {
        StageScratch {
            panel: vec![0.0; 2 * JACOBI_BLOCK * n],
            new_panel: vec![0.0; 2 * JACOBI_BLOCK * n],
        }
    }
}

fn process_stage(
    m: &mut [f64],
    vt: &mut [f64],
    n: usize,
    idx: &[usize],
    stage_skip: f64,
    scratch: &mut StageScratch,
) -> Result<(), SpectralError> {
    let k = idx.len();
    // Gather the pivot submatrix and test whether the stage has enough
    // off-diagonal mass to be worth rotating.
    let mut s = vec![0.0; k * k];
    let mut off2 = 0.0;
    for (r, &i) in idx.iter().enumerate() {
        let row = &m[i * n..(i + 1) * n];
        for (c, &j) in idx.iter().enumerate() {
            let v = row[j];
            s[r * k + c] = v;
            if r != c {
                off2 += v * v;
            }
        }
    }
    if off2.sqrt() <= stage_skip {
        return Ok(());
    }
    let inner = jacobi_eigen(&SymMatrix::from_rows(k, s), JACOBI_MAX_SWEEPS, 1e-14)?;
    // inner.vectors rows are eigenvectors; as a matrix this is U^T.
    let ut = &inner.vectors;

    // Row panel: P <- U^T P.
    let panel = &mut scratch.panel[..k * n];
    let new_panel = &mut scratch.new_panel[..k * n];
    for (r, &i) in idx.iter().enumerate() {
        panel[r * n..(r + 1) * n].copy_from_slice(&m[i * n..(i + 1) * n]);
    }
    panel_product(ut, panel, new_panel, k, n);
    // The pivot block becomes exactly diagonal with the inner eigenvalues.
    for r in 0..k {
        for (c, &j) in idx.iter().enumerate() {
            new_panel[r * n + j] = if r == c { inner.values[r] } else { 0.0 };
        }
    }
    // Scatter rows, then mirror the panel into the columns in one pass.
    for (r, &i) in idx.iter().enumerate() {
        m[i * n..(i + 1) * n].copy_from_slice(&new_panel[r * n..(r + 1) * n]);
    }
    for row in 0..n {
        if idx.binary_search(&row).is_ok() {
            continue;
        }
        let base = row * n;
        for (r, &col) in idx.iter().enumerate() {
            m[base + col] = new_panel[r * n + row];
        }
    }

    // Eigenvector panel: Vt[idx, :] <- U^T Vt[idx, :].
    for (r, &i) in idx.iter().enumerate() {
        panel[r * n..(r + 1) * n].copy_from_slice(&vt[i * n..(i + 1) * n]);
    }
    panel_product(ut, panel, new_panel, k, n);
    for (r, &i) in idx.iter().enumerate() {
        vt[i * n..(i + 1) * n].copy_from_slice(&new_panel[r * n..(r + 1) * n]);
    }
    Ok(())
}

/// `out = U^T * panel` with `U^T` given row-major `k x k` and the panels
/// `k x n`. Sources are consumed four rows at a time so each pass over the
/// destination row does four fused multiply-adds per element.
fn panel_product(ut: &[f64], panel: &[f64], out: &mut [f64], k: usize, n: usize) {
    out[..k * n].fill(0.0);
    for r in 0..k {
        let coeffs = &ut[r * k..(r + 1) * k];
        let dst = &mut out[r * n..(r + 1) * n];
        let mut i = 0;
        while i + 4 <= k {
            let (c0, c1, c2, c3) = (coeffs[i], coeffs[i + 1], coeffs[i + 2], coeffs[i + 3]);
            let s0 = &panel[i * n..(i + 1) * n];
            let s1 = &panel[(i + 1) * n..(i + 2) * n];
            let s2 = &panel[(i + 2) * n..(i + 3) * n];
            let s3 = &panel[(i + 3) * n..(i + 4) * n];
            for (j, o) in dst.iter_mut().enumerate() {
                *o += c0 * s0[j] + c1 * s1[j] + c2 * s2[j] + c3 * s3[j];
            }
            i += 4;
        }
        while i < k {
            let coef = coeffs[i];
            let src = &panel[i * n..(i + 1) * n];
            for (o, &v) in dst.iter_mut().zip(src) {
                *o += coef * v;
            }
            i += 1;
        }
    }
}

#[inline]
fn rotate(m: &mut [f64], vt: &mut [f64], n: usize, p: usize, q: usize, skip: f64) {
    let apq = m[p * n + q];
    if apq.abs() <= skip {
        return;
    }
    let app = m[p * n + p];
    let aqq = m[q * n + q];
    let theta = 0.5 * (aqq - app) / apq;
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
        sign / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    rotate_rows(m, n, p, q, c, s);
    // Exact updates for the 2x2 pivot block.
    m[p * n + p] = app - t * apq;
    m[q * n + q] = aqq + t * apq;
    m[p * n + q] = 0.0;
    m[q * n + p] = 0.0;
    // Mirror the rotated rows back into the columns to keep full symmetric
    // storage consistent.
    for k in 0..n {
        if k != p && k != q {
            m[k * n + p] = m[p * n + k];
            m[k * n + q] = m[q * n + k];
        }
    }
    rotate_rows(vt, n, p, q, c, s);
}

#[inline]
fn rotate_rows(m: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = m.split_at_mut(q * n);
    let rp = &mut head[p * n..p * n + n];
    let rq = &mut tail[..n];
    for (xp, xq) in rp.iter_mut().zip(rq.iter_mut()) {
        let a = *xp;
        let b = *xq;
        *xp = c * a - s * b;
        *xq = s * a + c * b;
    }
}

fn finish(
    n: usize,
    m: Vec<f64>,
    vt: Vec<f64>,
    sweeps: usize,
    off_norm: f64,
) -> EigenDecomposition {
    let mut order: Vec<usize> = (0..n).collect();
    let values_raw: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    order.sort_by(|&i, &j| {
        values_raw[j]
            .abs()
            .partial_cmp(&values_raw[i].abs())
            .unwrap()
            .then(values_raw[j].partial_cmp(&values_raw[i]).unwrap())
    });
    let mut values = Vec::with_capacity(n);
    let mut vectors = vec![0.0; n * n];
    for (rank, &idx) in order.iter().enumerate() {
        values.push(values_raw[idx]);
        vectors[rank * n..(rank + 1) * n].copy_from_slice(&vt[idx * n..(idx + 1) * n]);
    }
    EigenDecomposition {
        values,
        vectors,
        sweeps,
        off_norm,
    }
}

/// Leading eigenpairs (largest magnitude) of a symmetric operator given only
/// through matrix-vector products. Seeded simultaneous iteration with
/// Rayleigh-Ritz extraction; fully deterministic for a fixed seed.
pub struct SubspaceResult {
    pub values: Vec<f64>,
    /// Row-major `k x n` Ritz vectors.
    pub vectors: Vec<f64>,
    pub iterations: usize,
}

pub fn top_eigenpairs(
    apply: &(dyn Fn(&[f64], &mut [f64]) + Sync),
    n: usize,
    k: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> SubspaceResult {
    let k = k.min(n);
    let m = (k + 3).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; m * n];
    for v in x.iter_mut() {
        *v = rng.gen::<f64>() * 2.0 - 1.0;
    }
    orthonormalize_rows(&mut x, m, n);

    let mut y = vec![0.0; m * n];
    let mut prev: Vec<f64> = vec![f64::INFINITY; k];
    let mut iterations = 0;
    let mut ritz = vec![0.0; m];
    let mut small_vecs = vec![0.0; m * m];

    while iterations < max_iter {
        iterations += 1;
        for r in 0..m {
            apply(&x[r * n..(r + 1) * n], &mut y[r * n..(r + 1) * n]);
        }
        // H = X A X^T in the current orthonormal basis.
        let mut h = SymMatrix::zeros(m);
        for i in 0..m {
            for j in i..m {
                let v = dot(&x[i * n..(i + 1) * n], &y[j * n..(j + 1) * n]);
                h.set_sym(i, j, v);
            }
        }
        let dec = jacobi_eigen(&h, JACOBI_MAX_SWEEPS, 1e-14)
            .expect("small Rayleigh-Ritz matrix always converges");
        ritz.copy_from_slice(&dec.values);
        small_vecs.copy_from_slice(&dec.vectors);

        let mut settled = true;
        for i in 0..k {
            let scale = ritz[i].abs().max(1e-300);
            if (ritz[i] - prev[i]).abs() > tol * scale {
                settled = false;
            }
            prev[i] = ritz[i];
        }
        if settled && iterations > 2 {
            break;
        }
        std::mem::swap(&mut x, &mut y);
        orthonormalize_rows(&mut x, m, n);
    }

    // Rotate the basis into Ritz vectors: v_r = sum_i U[r][i] x_i.
    let mut vectors = vec![0.0; k * n];
    for r in 0..k {
        let out = &mut vectors[r * n..(r + 1) * n];
        for i in 0..m {
            let coef = small_vecs[r * m + i];
            for (o, xi) in out.iter_mut().zip(&x[i * n..(i + 1) * n]) {
                *o += coef * xi;
            }
        }
        let norm = dot(out, out).sqrt();
        if norm > 0.0 {
            for o in out.iter_mut() {
                *o /= norm;
            }
        }
    }
    SubspaceResult {
        values: ritz[..k].to_vec(),
        vectors,
        iterations,
    }
}

/// Spectral norm (largest |eigenvalue|) of a symmetric operator.
pub fn spectral_norm(
    apply: &(dyn Fn(&[f64], &mut [f64]) + Sync),
    n: usize,
    seed: u64,
) -> f64 {
    if n == 0 {
        return 0.0;
    }
    top_eigenpairs(apply, n, 1, 1e-13, 3000, seed).values[0].abs()
}

fn orthonormalize_rows(x: &mut [f64], m: usize, n: usize) {
    for i in 0..m {
        for j in 0..i {
            let (head, tail) = x.split_at_mut(i * n);
            let xj = &head[j * n..j * n + n];
            let xi = &mut tail[..n];
            let proj = dot(xj, xi);
            for (a, b) in xi.iter_mut().zip(xj) {
                *a -= proj * b;
            }
        }
        let row = &mut x[i * n..(i + 1) * n];
        let norm = dot(row, row).sqrt();
        if norm > 1e-300 {
            for v in row.iter_mut() {
                *v /= norm;
            }
        } else {
            // Deterministic re-seed for a collapsed direction.
            for (idx, v) in row.iter_mut().enumerate() {
                *v = if idx == i % n { 1.0 } else { 0.0 };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_matrix(n: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                a.set_sym(i, j, rng.gen::<f64>() * 2.0 - 1.0);
            }
        }
        a
    }

    #[test]
    fn diagonal_matrix_is_fixed_point() {
        let mut a = SymMatrix::zeros(4);
        for (i, v) in [3.0, -7.0, 0.5, 0.0].iter().enumerate() {
            a.set_sym(i, i, *v);
        }
        let dec = jacobi_eigen(&a, JACOBI_MAX_SWEEPS, JACOBI_TOL_FACTOR).unwrap();
        assert_eq!(dec.sweeps, 0);
        assert_eq!(dec.values, vec![-7.0, 3.0, 0.5, 0.0]);
    }

    #[test]
    fn rank_one_matrix() {
        // ones * ones^T scaled: single nonzero eigenvalue n*s.
        let n = 16;
        let s = 0.25;
        let mut a = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                a.set_sym(i, j, s);
            }
        }
        let dec = jacobi_eigen(&a, JACOBI_MAX_SWEEPS, JACOBI_TOL_FACTOR).unwrap();
        assert!((dec.values[0] - n as f64 * s).abs() < 1e-12);
        for v in &dec.values[1..] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        let n = 24;
        let a = sample_matrix(n, 7);
        let dec = jacobi_eigen(&a, JACOBI_MAX_SWEEPS, JACOBI_TOL_FACTOR).unwrap();
        // Orthonormality of rows.
        for i in 0..n {
            for j in i..n {
                let g = dot(
                    &dec.vectors[i * n..(i + 1) * n],
                    &dec.vectors[j * n..(j + 1) * n],
                );
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-10, "gram({i},{j}) = {g}");
            }
        }
        // A v = lambda v.
        for r in 0..n {
            let v = &dec.vectors[r * n..(r + 1) * n];
            let mut av = vec![0.0; n];
            a.apply(v, &mut av);
            for i in 0..n {
                assert!(
                    (av[i] - dec.values[r] * v[i]).abs() < 1e-9,
                    "residual at ({r},{i})"
                );
            }
        }
        // Trace preserved.
        let sum: f64 = dec.values.iter().sum();
        assert!((sum - a.trace()).abs() < 1e-10);
    }

    #[test]
    fn ordering_is_by_magnitude_then_sign() {
        let mut a = SymMatrix::zeros(3);
        a.set_sym(0, 0, -2.0);
        a.set_sym(1, 1, 2.0);
        a.set_sym(2, 2, 1.0);
        let dec = jacobi_eigen(&a, JACOBI_MAX_SWEEPS, JACOBI_TOL_FACTOR).unwrap();
        assert_eq!(dec.values, vec![2.0, -2.0, 1.0]);
    }

    #[test]
    fn subspace_matches_jacobi_on_leading_values() {
        let n = 60;
        let a = sample_matrix(n, 3);
        let dec = jacobi_eigen(&a, JACOBI_MAX_SWEEPS, JACOBI_TOL_FACTOR).unwrap();
        let apply = |x: &[f64], y: &mut [f64]| a.apply(x, y);
        let sub = top_eigenpairs(&apply, n, 3, 1e-12, 4000, 42);
        for i in 0..3 {
            assert!(
                (sub.values[i] - dec.values[i]).abs() < 1e-8 * dec.values[0].abs(),
                "ritz {} = {}, jacobi {}",
                i,
                sub.values[i],
                dec.values[i]
            );
        }
        let norm = spectral_norm(&apply, n, 42);
        assert!((norm - dec.values[0].abs()).abs() < 1e-8 * dec.values[0].abs());
    }
}
