//! Manual timing probe for the dense solver at desk scales.
//! Run with: cargo test --release -p nlspec-core --test perf_probe -- --ignored --nocapture

use std::sync::Arc;
use std::time::Instant;

use nlspec_core::domain::DomainSpec;
use nlspec_core::kernel::{KernelFamily, KernelSpec};
use nlspec_core::operator::{assemble, ContainerGrid};
use nlspec_core::spectral::eigendecompose;

#[test]
#[ignore]
fn jacobi_timings() {
    for cells in [16usize, 24, 32, 48] {
        let k = KernelSpec::new(KernelFamily::Bump, 0.3, 2).unwrap();
        let d = DomainSpec::rect([0.0, 0.0], [1.0, 1.0]).unwrap();
        let grid = Arc::new(ContainerGrid::covering(
            &[&d],
            1.0 / cells as f64,
            1,
        ));
        let t0 = Instant::now();
        let op = assemble(&k, &d, grid).unwrap();
        let t_asm = t0.elapsed();
        let t1 = Instant::now();
        let s = eigendecompose(&op).unwrap();
        let t_eig = t1.elapsed();
        let n = op.n_active() as f64;
        let gflops = 6.0 * n * n * n * s.sweeps() as f64 / t_eig.as_secs_f64() / 1e9;
        println!(
            "n = {:5}  assemble {:9.2?}  jacobi {:9.2?}  sweeps {:2}  ~{:5.1} GF/s  lambda1 {:.6}",
            op.n_active(),
            t_asm,
            t_eig,
            s.sweeps(),
            gflops,
            s.lambda(0)
        );
    }
}
