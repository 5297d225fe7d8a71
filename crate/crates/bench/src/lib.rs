//! Shared fixtures for the solver benchmarks.

use std::sync::Arc;

use nlspec_core::domain::DomainSpec;
use nlspec_core::kernel::{KernelFamily, KernelSpec};
use nlspec_core::operator::{assemble, ContainerGrid, DiscreteOperator};

/// Unit-square operator with a bump kernel at the given cells-per-side.
pub fn square_operator(cells: usize) -> DiscreteOperator {
    let kernel = KernelSpec::new(KernelFamily::Bump, 0.3, 2).unwrap();
    let domain = DomainSpec::rect([0.0, 0.0], [1.0, 1.0]).unwrap();
    let grid = Arc::new(ContainerGrid::covering(
        &[&domain],
        1.0 / cells as f64,
        1,
    ));
    assemble(&kernel, &domain, grid).unwrap()
}

/// Unit-interval operator with a bump kernel at the given cell count.
pub fn interval_operator(cells: usize) -> DiscreteOperator {
    let kernel = KernelSpec::new(KernelFamily::Bump, 0.3, 1).unwrap();
    let domain = DomainSpec::interval(0.0, 1.0).unwrap();
    let grid = Arc::new(ContainerGrid::covering(
        &[&domain],
        1.0 / cells as f64,
        1,
    ));
    assemble(&kernel, &domain, grid).unwrap()
}
