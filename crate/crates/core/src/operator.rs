//! Nystrom discretization of the convolution operator on a container grid,
//! its extension-by-zero structure, and the operator-norm perturbation bound.

use std::io::{Read, Write};
use std::sync::Arc;

use rayon::prelude::*;

use crate::domain::{symmetric_difference_measure, DomainSpec};
use crate::error::{DomainError, OperatorError};
use crate::kernel::KernelSpec;
use crate::linalg::{spectral_norm, SymMatrix};
use crate::Point;

/// Seed for the deterministic start vectors of norm estimations.
pub const NORM_SEED: u64 = 0x4E4C_5350;

/// Uniform cell-centered grid over a container box that holds every domain
/// under comparison. Cells are square; `cell_weight` is `h^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContainerGrid {
    lo: Point,
    h: f64,
    nx: usize,
    ny: usize,
    dim: usize,
}

impl ContainerGrid {
    /// Grid with spacing `h` whose box starts at `lo` and spans `nx x ny`
    /// cells.
    pub fn new(lo: Point, h: f64, nx: usize, ny: usize, dim: usize) -> Self {
        assert!(h > 0.0 && nx > 0 && ny > 0);
        assert!(dim == 1 || dim == 2);
        let ny = if dim == 1 { 1 } else { ny };
        ContainerGrid {
            lo,
            h,
            nx,
            ny,
            dim,
        }
    }

    /// Smallest grid of spacing `h` containing every domain's bounding box
    /// with `margin_cells` cells of clearance on each side.
    pub fn covering(domains: &[&DomainSpec], h: f64, margin_cells: usize) -> Self {
        let dim = domains[0].dim();
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for d in domains {
            let (dlo, dhi) = d.bounding_box();
            for a in 0..2 {
                lo[a] = lo[a].min(dlo[a]);
                hi[a] = hi[a].max(dhi[a]);
            }
        }
        let m = margin_cells as f64 * h;
        let glo = [lo[0] - m, if dim == 2 { lo[1] - m } else { 0.0 }];
        let nx = (((hi[0] + m - glo[0]) / h) - 1e-9).ceil() as usize;
        let ny = if dim == 1 {
            1
        } else {
            (((hi[1] + m - glo[1]) / h) - 1e-9).ceil() as usize
        };
        ContainerGrid::new(glo, h, nx.max(1), ny.max(1), dim)
    }

    /// Like [`ContainerGrid::covering`], with the spacing chosen so the
    /// longest side of the union bounding box spans `cells` cells.
    pub fn covering_with_cells(
        domains: &[&DomainSpec],
        cells: usize,
        margin_cells: usize,
    ) -> Self {
        let dim = domains[0].dim();
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for d in domains {
            let (dlo, dhi) = d.bounding_box();
            for a in 0..2 {
                lo[a] = lo[a].min(dlo[a]);
                hi[a] = hi[a].max(dhi[a]);
            }
        }
        let long = if dim == 1 {
            hi[0] - lo[0]
        } else {
            (hi[0] - lo[0]).max(hi[1] - lo[1])
        };
        ContainerGrid::covering(domains, long / cells as f64, margin_cells)
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lo(&self) -> Point {
        self.lo
    }

    pub fn hi(&self) -> Point {
        [
            self.lo[0] + self.h * self.nx as f64,
            if self.dim == 1 {
                0.0
            } else {
                self.lo[1] + self.h * self.ny as f64
            },
        ]
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn cell_weight(&self) -> f64 {
        if self.dim == 1 {
            self.h
        } else {
            self.h * self.h
        }
    }

    /// Cell-center coordinates of container node `idx` (row-major, x fastest).
    #[inline]
    pub fn node(&self, idx: usize) -> Point {
        let ix = idx % self.nx;
        let iy = idx / self.nx;
        [
            self.lo[0] + (ix as f64 + 0.5) * self.h,
            if self.dim == 1 {
                0.0
            } else {
                self.lo[1] + (iy as f64 + 0.5) * self.h
            },
        ]
    }

    /// True when the two grids share the same lattice (bit-identical origin
    /// and spacing), so container indices are directly comparable.
    pub fn same_lattice(&self, other: &ContainerGrid) -> bool {
        self.lo == other.lo
            && self.h == other.h
            && self.nx == other.nx
            && self.ny == other.ny
            && self.dim == other.dim
    }

    /// Checks that the domain's bounding box sits inside the container with at
    /// least one cell of clearance.
    pub fn admits(&self, d: &DomainSpec) -> bool {
        let (dlo, dhi) = d.bounding_box();
        let eps = 1e-9 * self.h;
        let hi = self.hi();
        let mut ok = dlo[0] >= self.lo[0] + self.h - eps && dhi[0] <= hi[0] - self.h + eps;
        if self.dim == 2 {
            ok = ok && dlo[1] >= self.lo[1] + self.h - eps && dhi[1] <= hi[1] - self.h + eps;
        }
        ok
    }
}

/// The quadrature matrix of the convolution operator restricted to active
/// nodes, together with the active index set that defines its
/// extension-by-zero to the container.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    grid: Arc<ContainerGrid>,
    kernel: KernelSpec,
    domain: DomainSpec,
    active: Vec<u32>,
    matrix: SymMatrix,
}

/// Assembles the midpoint Nystrom matrix `K[a][b] = J(x_a - x_b) h^dim` over
/// the cell centers that lie inside the domain.
pub fn assemble(
    kernel: &KernelSpec,
    domain: &DomainSpec,
    grid: Arc<ContainerGrid>,
) -> Result<DiscreteOperator, OperatorError> {
    if kernel.dim() != domain.dim() {
        return Err(OperatorError::DimMismatch(kernel.dim(), domain.dim()));
    }
    if kernel.dim() != grid.dim() {
        return Err(OperatorError::DimMismatch(kernel.dim(), grid.dim()));
    }
    if !grid.admits(domain) {
        return Err(OperatorError::DomainOutsideContainer);
    }
    let active: Vec<u32> = (0..grid.node_count())
        .filter(|&i| domain.contains(grid.node(i)))
        .map(|i| i as u32)
        .collect();
    if active.is_empty() {
        return Err(OperatorError::EmptyActiveSet { h: grid.h() });
    }
    let n = active.len();
    let points: Vec<Point> = active.iter().map(|&i| grid.node(i as usize)).collect();
    let w = grid.cell_weight();
    let cutoff2 = {
        let c = kernel.cutoff_radius();
        c * c
    };
    let mut data = vec![0.0; n * n];
    // Row-parallel fill; symmetry is bitwise because evaluation depends on
    // the squared distance only.
    data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let pi = points[i];
        for (j, out) in row.iter_mut().enumerate() {
            let dxx = pi[0] - points[j][0];
            let dyy = pi[1] - points[j][1];
            let r2 = dxx * dxx + dyy * dyy;
            if r2 <= cutoff2 {
                *out = kernel.eval_r2(r2) * w;
            }
        }
    });
    Ok(DiscreteOperator {
        grid,
        kernel: kernel.clone(),
        domain: domain.clone(),
        active,
        matrix: SymMatrix::from_rows(n, data),
    })
}

impl DiscreteOperator {
    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    pub fn active(&self) -> &[u32] {
        &self.active
    }

    pub fn grid(&self) -> &Arc<ContainerGrid> {
        &self.grid
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    /// Grid measure of the domain: active cell count times cell weight.
    pub fn grid_measure(&self) -> f64 {
        self.active.len() as f64 * self.grid.cell_weight()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn max_row_sum(&self) -> f64 {
        (0..self.n_active())
            .map(|i| self.matrix.row(i).iter().sum::<f64>())
            .fold(0.0f64, f64::max)
    }

    /// Coordinates of the active nodes, in active order.
    pub fn active_points(&self) -> Vec<Point> {
        self.active
            .iter()
            .map(|&i| self.grid.node(i as usize))
            .collect()
    }

    /// Largest |eigenvalue| estimated by seeded subspace iteration.
    pub fn spectral_norm_estimate(&self) -> f64 {
        let apply = |x: &[f64], y: &mut [f64]| self.matrix.apply(x, y);
        spectral_norm(&apply, self.n_active(), NORM_SEED)
    }
}

/// Spectral norm of the difference of the two container extensions.
///
/// Both operators must share the container lattice and kernel. The result
/// discretizes the L2 operator distance used by the perturbation theory.
pub fn operator_norm_diff(
    a: &DiscreteOperator,
    b: &DiscreteOperator,
) -> Result<f64, OperatorError> {
    if !a.grid.same_lattice(&b.grid) {
        return Err(OperatorError::GridMismatch);
    }
    if a.kernel != b.kernel {
        return Err(OperatorError::KernelMismatch);
    }
    // Union of the active sets; the difference vanishes elsewhere.
    let mut union: Vec<u32> = Vec::with_capacity(a.active.len() + b.active.len());
    {
        let (mut i, mut j) = (0, 0);
        while i < a.active.len() || j < b.active.len() {
            let x = a.active.get(i).copied().unwrap_or(u32::MAX);
            let y = b.active.get(j).copied().unwrap_or(u32::MAX);
            match x.cmp(&y) {
                std::cmp::Ordering::Less => {
                    union.push(x);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    union.push(y);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    union.push(x);
                    i += 1;
                    j += 1;
                }
            }
        }
    }
    let n = union.len();
    if n == 0 {
        return Ok(0.0);
    }
    let in_a: Vec<bool> = union.iter().map(|i| a.active.binary_search(i).is_ok()).collect();
    let in_b: Vec<bool> = union.iter().map(|i| b.active.binary_search(i).is_ok()).collect();
    let points: Vec<Point> = union.iter().map(|&i| a.grid.node(i as usize)).collect();
    let w = a.grid.cell_weight();
    let cutoff2 = {
        let c = a.kernel.cutoff_radius();
        c * c
    };
    let kernel = &a.kernel;
    let mut diff = vec![0.0; n * n];
    diff.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let pi = points[i];
        for (j, out) in row.iter_mut().enumerate() {
            let sign = match (in_a[i] && in_a[j], in_b[i] && in_b[j]) {
                (true, false) => 1.0,
                (false, true) => -1.0,
                _ => continue,
            };
            let dxx = pi[0] - points[j][0];
            let dyy = pi[1] - points[j][1];
            let r2 = dxx * dxx + dyy * dyy;
            if r2 <= cutoff2 {
                *out = sign * kernel.eval_r2(r2) * w;
            }
        }
    });
    let m = SymMatrix::from_rows(n, diff);
    let apply = |x: &[f64], y: &mut [f64]| m.apply(x, y);
    Ok(spectral_norm(&apply, n, NORM_SEED))
}

/// The explicit perturbation bound
/// `sqrt(2) ||J||_inf sqrt(|A u B| + |A| + |B|) sqrt(|A \ B| + |B \ A|)`.
pub fn lipschitz_bound(
    kernel: &KernelSpec,
    d1: &DomainSpec,
    d2: &DomainSpec,
) -> Result<f64, DomainError> {
    let symdiff = symmetric_difference_measure(d1, d2)?;
    let m1 = d1.measure().value;
    let m2 = d2.measure().value;
    let union = 0.5 * (m1 + m2 + symdiff);
    Ok(2.0f64.sqrt() * kernel.peak() * (union + m1 + m2).sqrt() * symdiff.sqrt())
}

/// First eigenvalue of `I - K` via matrix-free subspace iteration; usable at
/// resolutions where the dense matrix would not fit in memory.
pub fn lambda1_matrix_free(
    kernel: &KernelSpec,
    domain: &DomainSpec,
    grid: &ContainerGrid,
) -> Result<f64, OperatorError> {
    if kernel.dim() != domain.dim() || kernel.dim() != grid.dim() {
        return Err(OperatorError::DimMismatch(kernel.dim(), domain.dim()));
    }
    if !grid.admits(domain) {
        return Err(OperatorError::DomainOutsideContainer);
    }
    let nx = grid.nx();
    let ny = grid.ny();
    let active: Vec<u32> = (0..grid.node_count())
        .filter(|&i| domain.contains(grid.node(i)))
        .map(|i| i as u32)
        .collect();
    if active.is_empty() {
        return Err(OperatorError::EmptyActiveSet { h: grid.h() });
    }
    let n = active.len();
    let mut slot = vec![-1i64; grid.node_count()];
    for (a, &c) in active.iter().enumerate() {
        slot[c as usize] = a as i64;
    }
    let points: Vec<Point> = active.iter().map(|&i| grid.node(i as usize)).collect();
    let w = grid.cell_weight();
    let cutoff = kernel.cutoff_radius();
    let cutoff2 = cutoff * cutoff;
    let wc = (cutoff / grid.h()).ceil() as i64 + 1;

    let apply = |x: &[f64], y: &mut [f64]| {
        y.par_iter_mut().enumerate().for_each(|(ai, out)| {
            let c = active[ai] as i64;
            let ix = c % nx as i64;
            let iy = c / nx as i64;
            let p = points[ai];
            let mut acc = 0.0;
            let jy0 = (iy - wc).max(0);
            let jy1 = (iy + wc).min(ny as i64 - 1);
            let jx0 = (ix - wc).max(0);
            let jx1 = (ix + wc).min(nx as i64 - 1);
            for jy in jy0..=jy1 {
                let base = jy * nx as i64;
                for jx in jx0..=jx1 {
                    let aj = slot[(base + jx) as usize];
                    if aj >= 0 {
                        let q = points[aj as usize];
                        let dxx = p[0] - q[0];
                        let dyy = p[1] - q[1];
                        let r2 = dxx * dxx + dyy * dyy;
                        if r2 <= cutoff2 {
                            acc += kernel.eval_r2(r2) * x[aj as usize];
                        }
                    }
                }
            }
            *out = acc * w;
        });
    };
    let top = crate::linalg::top_eigenpairs(&apply, n, 1, 1e-13, 3000, NORM_SEED);
    Ok(1.0 - top.values[0])
}

const DUMP_MAGIC: &[u8; 4] = b"NLSP";

/// Writes the active-submatrix in the binary exchange format: magic "NLSP",
/// little-endian u32 node count and dimension, then row-major f64 entries.
pub fn write_operator_dump<W: Write>(op: &DiscreteOperator, mut out: W) -> std::io::Result<()> {
    out.write_all(DUMP_MAGIC)?;
    out.write_all(&(op.n_active() as u32).to_le_bytes())?;
    out.write_all(&(op.grid.dim() as u32).to_le_bytes())?;
    // Header is padded to 16 bytes.
    out.write_all(&[0u8; 4])?;
    for v in op.matrix.data() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a dump produced by [`write_operator_dump`].
pub fn read_operator_dump<R: Read>(mut input: R) -> Result<(u32, u32, Vec<f64>), OperatorError> {
    let mut header = [0u8; 16];
    input
        .read_exact(&mut header)
        .map_err(|e| OperatorError::BadDump(e.to_string()))?;
    if &header[0..4] != DUMP_MAGIC {
        return Err(OperatorError::BadDump("bad magic".into()));
    }
    let n = u32::from_le_bytes(header[4..8].try_into().unwrap());
    let dim = u32::from_le_bytes(header[8..12].try_into().unwrap());
    let count = n as usize * n as usize;
    let mut data = vec![0.0f64; count];
    let mut buf = [0u8; 8];
    for v in data.iter_mut() {
        input
            .read_exact(&mut buf)
            .map_err(|e| OperatorError::BadDump(e.to_string()))?;
        *v = f64::from_le_bytes(buf);
    }
    Ok((n, dim, data))
}
