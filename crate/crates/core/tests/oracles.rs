//! Independent oracles for the spectral pipeline: a hand-rolled power
//! iteration against the Jacobi decomposition, the finite-rank trace
//! identity, extension-by-zero consistency, and block decoupling.

use std::sync::Arc;

use nlspec_core::domain::{BallSpec, DomainSpec};
use nlspec_core::kernel::{KernelFamily, KernelSpec};
use nlspec_core::linalg::{jacobi_eigen, SymMatrix, JACOBI_MAX_SWEEPS, JACOBI_TOL_FACTOR};
use nlspec_core::operator::{assemble, ContainerGrid, DiscreteOperator};
use nlspec_core::spectral::{detect_simple_systems, eigendecompose};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Plain power iteration from a positive start vector; converges to the
/// Perron eigenvalue of the nonnegative kernel matrix. Written here so the
/// oracle shares nothing with the library solvers.
fn power_mu1(op: &DiscreteOperator, iters: usize) -> f64 {
    let n = op.n_active();
    let mut v = vec![1.0; n];
    let mut av = vec![0.0; n];
    for _ in 0..iters {
        op.matrix().apply(&v, &mut av);
        let norm = dot(&av, &av).sqrt();
        for (x, y) in v.iter_mut().zip(&av) {
            *x = y / norm;
        }
    }
    op.matrix().apply(&v, &mut av);
    dot(&v, &av) / dot(&v, &v)
}

fn interval_op(cells: usize) -> DiscreteOperator {
    let k = KernelSpec::new(KernelFamily::Bump, 0.3, 1).unwrap();
    let d = DomainSpec::interval(0.0, 1.0).unwrap();
    let grid = Arc::new(ContainerGrid::covering(&[&d], 1.0 / cells as f64, 1));
    assemble(&k, &d, grid).unwrap()
}

#[test]
fn power_iteration_reproduces_mu1() {
    let op = interval_op(512);
    let spectrum = eigendecompose(&op).unwrap();
    let oracle = power_mu1(&op, 400);
    let rel = (spectrum.mu(0) - oracle).abs() / oracle;
    assert!(
        rel < 1e-10,
        "jacobi mu1 = {}, power-iteration oracle = {}, rel = {rel}",
        spectrum.mu(0),
        oracle
    );
}

#[test]
fn trace_identity_matches_peak_times_grid_measure() {
    // sum(mu_i) = trace(K) = J(0) h^dim |active| on both supported dimensions.
    let op1 = interval_op(256);
    let s1 = eigendecompose(&op1).unwrap();
    let identity1 = op1.kernel().peak() * op1.grid_measure();
    assert!(((s1.trace_sum() - identity1) / identity1).abs() < 1e-10);

    let k = KernelSpec::new(KernelFamily::Bump, 0.3, 2).unwrap();
    let d = DomainSpec::rect([0.0, 0.0], [1.0, 1.0]).unwrap();
    let grid = Arc::new(ContainerGrid::covering(&[&d], 1.0 / 24.0, 1));
    let op2 = assemble(&k, &d, grid).unwrap();
    let s2 = eigendecompose(&op2).unwrap();
    let identity2 = op2.kernel().peak() * op2.grid_measure();
    assert!(((s2.trace_sum() - identity2) / identity2).abs() < 1e-10);
}

#[test]
fn rank_one_limit_of_a_very_wide_kernel() {
    // With a kernel that is nearly constant over the domain the matrix is
    // close to rank one: mu1 near J(0)|Omega|_grid and the rest tiny.
    let k = KernelSpec::new(KernelFamily::Tent, 1000.0, 1).unwrap();
    let d = DomainSpec::interval(0.0, 1.0).unwrap();
    let grid = Arc::new(ContainerGrid::covering(&[&d], 1.0 / 64.0, 1));
    let op = assemble(&k, &d, grid).unwrap();
    let s = eigendecompose(&op).unwrap();
    let want = k.peak() * op.grid_measure();
    assert!((s.mu(0) / want - 1.0).abs() < 1e-3);
    assert!(s.mu(1).abs() < 1e-3 * s.mu(0));
}

#[test]
fn container_extension_preserves_nonzero_spectrum() {
    // Embed the active submatrix into the full container with zero rows and
    // columns; the nonzero eigenvalues and their multiplicities must agree.
    let k = KernelSpec::new(KernelFamily::Bump, 0.35, 1).unwrap();
    let d = DomainSpec::interval(0.1, 0.9).unwrap();
    let grid = Arc::new(ContainerGrid::covering(&[&d], 1.0 / 32.0, 2));
    let op = assemble(&k, &d, grid.clone()).unwrap();
    let n_container = grid.node_count();
    let mut embedded = SymMatrix::zeros(n_container);
    for (ai, &ci) in op.active().iter().enumerate() {
        for (aj, &cj) in op.active().iter().enumerate() {
            if aj >= ai {
                embedded.set_sym(ci as usize, cj as usize, op.matrix().get(ai, aj));
            }
        }
    }
    let inner = jacobi_eigen(op.matrix(), JACOBI_MAX_SWEEPS, JACOBI_TOL_FACTOR).unwrap();
    let outer = jacobi_eigen(&embedded, JACOBI_MAX_SWEEPS, JACOBI_TOL_FACTOR).unwrap();
    let keep = |v: &[f64]| -> Vec<f64> {
        let mut kept: Vec<f64> = v.iter().cloned().filter(|x| x.abs() > 1e-12).collect();
        kept.sort_by(|a, b| b.partial_cmp(a).unwrap());
        kept
    };
    let inner_nz = keep(&inner.values);
    let outer_nz = keep(&outer.values);
    assert_eq!(
        inner_nz.len(),
        outer_nz.len(),
        "multiplicity of the nonzero spectrum changed under extension"
    );
    for (a, b) in inner_nz.iter().zip(&outer_nz) {
        assert!((a - b).abs() < 1e-12, "eigenvalue moved: {a} vs {b}");
    }
    // The container picked up exactly the extra zeros.
    assert_eq!(outer.values.len() - outer_nz.len(), n_container - inner_nz.len());
}

#[test]
fn two_identical_balls_are_a_degenerate_pair() {
    // Separation beyond the support radius with lattice-aligned centers:
    // the two blocks are identical and the leading pair exactly degenerate.
    let k = KernelSpec::new(KernelFamily::Bump, 0.25, 2).unwrap();
    let h = 1.0 / 16.0;
    let union = DomainSpec::union_of_balls(
        vec![
            BallSpec {
                center: [-0.75, 0.0],
                radius: 0.5,
            },
            BallSpec {
                center: [0.75, 0.0],
                radius: 0.5,
            },
        ],
        2,
    )
    .unwrap();
    let grid = Arc::new(ContainerGrid::covering(&[&union], h, 1));
    let op = assemble(&k, &union, grid).unwrap();
    let s = eigendecompose(&op).unwrap();
    let flags = detect_simple_systems(&s, 2);
    assert!(!flags[0].1, "mu1 of the two-ball union flagged simple");
    assert!(!flags[1].1, "mu2 of the two-ball union flagged simple");
    assert!((s.mu(0) - s.mu(1)).abs() < 1e-12);
    // A generic single domain has simple leading eigenvalues by contrast.
    let single = interval_op(128);
    let ss = eigendecompose(&single).unwrap();
    assert!(detect_simple_systems(&ss, 5).iter().all(|&(_, simple)| simple));
}

#[test]
fn spectral_norm_bounds_hold() {
    let op = interval_op(256);
    let norm = op.spectral_norm_estimate();
    let bound = (op.kernel().peak() * op.grid_measure()).min(op.max_row_sum());
    assert!(norm <= bound + 1e-12, "norm {norm} above bound {bound}");
    assert!(norm < 1.0, "discrete operator norm must stay below one");
    assert!(norm > 0.0);
}
