//! Domain-derivative machinery: the pull-back of the convolution operator
//! under a C1 imbedding, its weighted self-adjointness, boundary evaluation
//! of eigenfunctions through the smoothing identity, and the closed-form
//! derivative of simple eigenvalues validated against finite differences.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{boundary_quadrature, BoundarySample, DomainSpec, MapSpec, VectorField};
use crate::error::ShapeError;
use crate::kernel::{KernelSpec, Smoothness};
use crate::linalg::{dot, SymMatrix};
use crate::operator::{assemble, ContainerGrid, DiscreteOperator};
use crate::spectral::{spectrum_from_matrix, Spectrum};
use crate::Point;

/// The pull-back of the convolution operator on the image domain to the base
/// domain: matrix entries `P[i][j] = J(h(x_i) - h(x_j)) |det Dh(x_j)| h^dim`
/// plus the weight vector of the deformed inner product.
#[derive(Debug, Clone)]
pub struct PullbackOperator {
    /// Active-set matrix of the pulled-back operator (not symmetric unless
    /// the Jacobian is constant).
    pub matrix: Vec<f64>,
    /// Weights `w_j = |det Dh(x_j)| h^dim` defining the deformed inner
    /// product.
    pub weights: Vec<f64>,
    pub n: usize,
}

/// Builds the pull-back operator for `map` over the active nodes of `base`.
pub fn pullback_operator(
    kernel: &KernelSpec,
    base: &DomainSpec,
    map: &MapSpec,
    grid: Arc<ContainerGrid>,
) -> Result<PullbackOperator, ShapeError> {
    if kernel.smoothness() < Smoothness::C1 {
        return Err(ShapeError::KernelNotSmooth);
    }
    let (lo, hi) = base.bounding_box();
    map.validate_on(lo, hi, base.dim())?;
    let op = assemble(kernel, base, grid.clone())?;
    let points = op.active_points();
    let n = points.len();
    let w0 = grid.cell_weight();
    let dim = base.dim();
    let mapped: Vec<Point> = points.iter().map(|&p| map.apply(p)).collect();
    let weights: Vec<f64> = points
        .iter()
        .map(|&p| map.jacobian_det(p, dim) * w0)
        .collect();
    let mut matrix = vec![0.0; n * n];
    for i in 0..n {
        let pi = mapped[i];
        for j in 0..n {
            let dxx = pi[0] - mapped[j][0];
            let dyy = pi[1] - mapped[j][1];
            matrix[i * n + j] = kernel.eval_r2(dxx * dxx + dyy * dyy) * weights[j];
        }
    }
    Ok(PullbackOperator {
        matrix,
        weights,
        n,
    })
}

impl PullbackOperator {
    /// Similarity transform `W^{1/2} P W^{-1/2}`, which is symmetric and
    /// shares the pull-back spectrum; this is what gets eigensolved.
    pub fn symmetrized(&self) -> SymMatrix {
        let n = self.n;
        let sqrt_w: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                // P[i][j] = J_ij w_j, so the transform is J_ij sqrt(w_i w_j).
                data[i * n + j] = self.matrix[i * n + j] * sqrt_w[i] / sqrt_w[j];
            }
        }
        // Enforce bitwise symmetry against rounding in the scale factors.
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (data[i * n + j] + data[j * n + i]);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        SymMatrix::from_rows(n, data)
    }

    /// Spectrum of the pull-back in the weighted space.
    pub fn spectrum(&self, cell_weight: f64) -> Result<Spectrum, ShapeError> {
        Ok(spectrum_from_matrix(&self.symmetrized(), cell_weight, None)?)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            y[i] = dot(&self.matrix[i * self.n..(i + 1) * self.n], x);
        }
    }
}

/// Largest relative asymmetry of the pull-back bilinear form over seeded
/// random vector pairs, measured in the inner product with weights `w`.
///
/// With the deformed weights this is a rounding-level quantity; with uniform
/// weights and a non-constant Jacobian it is order one, which is exactly the
/// failure of plain-L2 self-adjointness.
pub fn weighted_selfadjointness_check(p: &PullbackOperator, w: &[f64]) -> f64 {
    let n = p.n;
    assert_eq!(w.len(), n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5348_4150);
    let mut worst: f64 = 0.0;
    let mut pu = vec![0.0; n];
    let mut pv = vec![0.0; n];
    for _ in 0..16 {
        let u: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        p.apply(&u, &mut pu);
        p.apply(&v, &mut pv);
        let forward: f64 = (0..n).map(|i| w[i] * u[i] * pv[i]).sum();
        let backward: f64 = (0..n).map(|i| w[i] * pu[i] * v[i]).sum();
        let nu: f64 = (0..n).map(|i| w[i] * u[i] * u[i]).sum::<f64>().sqrt();
        let nv: f64 = (0..n).map(|i| w[i] * v[i] * v[i]).sum::<f64>().sqrt();
        worst = worst.max((forward - backward).abs() / (nu * nv));
    }
    worst
}

/// Evaluates eigenfunction `idx` at off-grid points through the smoothing
/// identity `u(x) = (1/mu) sum_j J(x - x_j) u(x_j) h^dim`, which extends the
/// discrete eigenvector continuously up to (and across) the boundary.
pub fn boundary_eigenfunction(
    op: &DiscreteOperator,
    spectrum: &Spectrum,
    idx: usize,
    samples: &[BoundarySample],
) -> Result<Vec<f64>, ShapeError> {
    if !spectrum.is_simple(idx) {
        return Err(ShapeError::NotSimple {
            idx,
            gap: spectrum.gaps()[idx],
            guard: spectrum.gap_tol(),
        });
    }
    smoothing_eigenfunction(op, spectrum.mu(idx), spectrum.vector(idx), samples)
}

/// The smoothing identity applied to an explicit eigenpair.
pub fn smoothing_eigenfunction(
    op: &DiscreteOperator,
    mu: f64,
    u: &[f64],
    samples: &[BoundarySample],
) -> Result<Vec<f64>, ShapeError> {
    if op.kernel().smoothness() < Smoothness::C1 {
        return Err(ShapeError::KernelNotSmooth);
    }
    if mu.abs() < 1e-10 {
        return Err(ShapeError::TinyEigenvalue(mu));
    }
    let points = op.active_points();
    let w = op.grid().cell_weight();
    let cutoff2 = {
        let c = op.kernel().cutoff_radius();
        c * c
    };
    Ok(samples
        .iter()
        .map(|s| {
            let mut acc = 0.0;
            for (p, &uv) in points.iter().zip(u) {
                let dxx = s.point[0] - p[0];
                let dyy = s.point[1] - p[1];
                let r2 = dxx * dxx + dyy * dyy;
                if r2 <= cutoff2 {
                    acc += op.kernel().eval_r2(r2) * uv;
                }
            }
            acc * w / mu
        })
        .collect())
}

/// How the finite-difference side of the shape derivative is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdRoute {
    /// Re-discretize the deformed domain on the same container grid. The
    /// active set changes cell by cell, so the difference quotient carries
    /// quantization noise of order `h^2 / t`.
    Rediscretize,
    /// Evaluate the pulled-back operator on the fixed base active set; the
    /// matrix entries vary smoothly in `t`.
    Pullback,
}

impl FdRoute {
    pub fn name(self) -> &'static str {
        match self {
            FdRoute::Rediscretize => "rediscretize",
            FdRoute::Pullback => "pullback",
        }
    }
}

/// Report pairing the boundary-integral derivative formula with its
/// finite-difference validation.
#[derive(Debug, Clone)]
pub struct ShapeDerivativeReport {
    pub field_name: String,
    pub lambda0: f64,
    pub mu0: f64,
    pub boundary_integral: f64,
    pub dlambda_formula: f64,
    pub dmu_formula: f64,
    pub dlambda_fd: f64,
    pub dlambda_fd_forward: f64,
    pub dlambda_fd_backward: f64,
    pub t_used: f64,
    pub rel_error: f64,
    pub abs_error: f64,
    pub fd_route: FdRoute,
    pub boundary_samples: usize,
}

/// Options for [`shape_derivative`].
#[derive(Debug, Clone, Copy)]
pub struct ShapeDerivativeOptions {
    pub t_fd: f64,
    pub boundary_samples: usize,
    pub fd_route: FdRoute,
}

impl Default for ShapeDerivativeOptions {
    fn default() -> Self {
        ShapeDerivativeOptions {
            t_fd: 1e-3,
            boundary_samples: 256,
            fd_route: FdRoute::Pullback,
        }
    }
}

/// Derivative of the simple eigenvalue `lambda_idx` along `h_t = id + t V`:
/// the boundary-integral formula evaluated by quadrature, next to a central
/// finite difference across the deformed domains.
pub fn shape_derivative(
    kernel: &KernelSpec,
    domain: &DomainSpec,
    idx: usize,
    field: VectorField,
    grid: Arc<ContainerGrid>,
    opts: ShapeDerivativeOptions,
) -> Result<ShapeDerivativeReport, ShapeError> {
    if kernel.smoothness() < Smoothness::C1 {
        return Err(ShapeError::KernelNotSmooth);
    }
    let op = assemble(kernel, domain, grid.clone())?;
    // Only the leading system around `idx` is needed; a subspace solve keeps
    // the cost at matrix-vector level.
    let (mus, vectors) = leading_pairs(op.matrix(), idx + 4);
    let mu0 = mus[idx];
    let lambda0 = 1.0 - mu0;
    // Simplicity guard: the gap must clear the solver tolerance by a wide
    // margin before tracking makes sense.
    let gap = nearest_gap(&mus, idx);
    let guard = (1e-5 * mus[0].abs()).max(1e-12);
    if gap <= guard {
        return Err(ShapeError::NotSimple { idx, gap, guard });
    }

    // Eigenvector in the weighted normalization, signed positive at its
    // largest entry.
    let n = op.n_active();
    let u0 = normalized_vector(&vectors[idx * n..(idx + 1) * n], grid.cell_weight());

    // Boundary integral of u0^2 V.N with the eigenfunction normalized to
    // unit weighted L2 norm.
    let bq = boundary_quadrature(domain, opts.boundary_samples)?;
    let u_boundary = smoothing_eigenfunction(&op, mu0, &u0, &bq)?;
    let mut boundary_integral = 0.0;
    for (s, ub) in bq.iter().zip(&u_boundary) {
        let v = field.eval(s.point);
        let vn = v[0] * s.normal[0] + v[1] * s.normal[1];
        boundary_integral += ub * ub * vn * s.weight;
    }
    let dmu_formula = mu0 * boundary_integral;
    let dlambda_formula = -dmu_formula;

    let t = opts.t_fd;
    let lp = lambda_at(kernel, domain, idx, field, &grid, t, lambda0, gap, opts.fd_route)?;
    let lm = lambda_at(kernel, domain, idx, field, &grid, -t, lambda0, gap, opts.fd_route)?;
    let dlambda_fd = (lp - lm) / (2.0 * t);
    let dlambda_fd_forward = (lp - lambda0) / t;
    let dlambda_fd_backward = (lambda0 - lm) / t;
    let abs_error = (dlambda_fd - dlambda_formula).abs();
    let rel_error = abs_error / dlambda_formula.abs().max(1e-12);
    Ok(ShapeDerivativeReport {
        field_name: field.name().to_string(),
        lambda0,
        mu0,
        boundary_integral,
        dlambda_formula,
        dmu_formula,
        dlambda_fd,
        dlambda_fd_forward,
        dlambda_fd_backward,
        t_used: t,
        rel_error,
        abs_error,
        fd_route: opts.fd_route,
        boundary_samples: bq.len(),
    })
}

/// Eigenvalue of the deformed problem at deformation parameter `t`, tracked
/// to the nearest lambda with a gap guard against crossings.
#[allow(clippy::too_many_arguments)]
fn lambda_at(
    kernel: &KernelSpec,
    domain: &DomainSpec,
    idx: usize,
    field: VectorField,
    grid: &Arc<ContainerGrid>,
    t: f64,
    lambda0: f64,
    gap0: f64,
    route: FdRoute,
) -> Result<f64, ShapeError> {
    if t == 0.0 {
        return Ok(lambda0);
    }
    let map = MapSpec::PerturbationField { field, t };
    let mus = match route {
        FdRoute::Rediscretize => {
            let deformed = DomainSpec::mapped(domain.clone(), map)?;
            let op = assemble(kernel, &deformed, grid.clone())?;
            leading_pairs(op.matrix(), idx + 4).0
        }
        FdRoute::Pullback => {
            let pb = pullback_operator(kernel, domain, &map, grid.clone())?;
            let sym = pb.symmetrized();
            leading_pairs(&sym, idx + 4).0
        }
    };
    // Track by nearest lambda; refuse if another eigenvalue came closer than
    // half the unperturbed gap.
    let lambdas: Vec<f64> = mus.iter().map(|m| 1.0 - m).collect();
    let mut best = (f64::INFINITY, 0usize);
    for (i, &l) in lambdas.iter().enumerate() {
        let d = (l - lambda0).abs();
        if d < best.0 {
            best = (d, i);
        }
    }
    let mut second = f64::INFINITY;
    for (i, &l) in lambdas.iter().enumerate() {
        if i != best.1 {
            second = second.min((l - lambda0).abs());
        }
    }
    if second < 0.5 * gap0 {
        return Err(ShapeError::TrackingCollapse { idx, t });
    }
    Ok(lambdas[best.1])
}

/// Leading eigenpairs by magnitude of a symmetric matrix through seeded
/// subspace iteration.
fn leading_pairs(m: &SymMatrix, k: usize) -> (Vec<f64>, Vec<f64>) {
    let apply = |x: &[f64], y: &mut [f64]| m.apply(x, y);
    let res = crate::linalg::top_eigenpairs(
        &apply,
        m.n(),
        k.min(m.n()),
        1e-13,
        4000,
        crate::operator::NORM_SEED,
    );
    (res.values, res.vectors)
}

fn nearest_gap(mus: &[f64], idx: usize) -> f64 {
    let mut gap = f64::INFINITY;
    for (i, &m) in mus.iter().enumerate() {
        if i != idx {
            gap = gap.min((m - mus[idx]).abs());
        }
    }
    gap
}

/// Rescales a plain-orthonormal vector into the weighted normalization and
/// signs it positive at its largest-magnitude entry.
fn normalized_vector(v: &[f64], cell_weight: f64) -> Vec<f64> {
    let norm2: f64 = v.iter().map(|x| x * x).sum();
    let scale = 1.0 / (norm2 * cell_weight).sqrt();
    let mut max_abs = 0.0;
    let mut max_val = 0.0;
    for &x in v {
        if x.abs() > max_abs {
            max_abs = x.abs();
            max_val = x;
        }
    }
    let sign = if max_val < 0.0 { -1.0 } else { 1.0 };
    v.iter().map(|&x| x * sign * scale).collect()
}
