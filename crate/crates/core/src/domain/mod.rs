//! Bounded open sets given analytically: membership predicates, exact
//! measures where closed forms exist, boundary sampling, and the named
//! perturbation families (rough boundaries, periodic perforations, mapped
//! domains).

mod boundary;
mod map;
pub mod subcell;

pub use boundary::{boundary_quadrature, BoundarySample};
pub use map::{MapSpec, VectorField};

use std::f64::consts::PI;

use crate::error::DomainError;
use crate::Point;

/// A ball given by center and radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallSpec {
    pub center: Point,
    pub radius: f64,
}

/// Shape of the hole removed from each periodicity cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HoleShape {
    Box,
    Ball,
}

/// A bounded open set. Membership is a total predicate and every variant has
/// a computable bounding box; the boundary itself is not part of the set.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainSpec {
    Box {
        lo: Point,
        hi: Point,
        dim: usize,
    },
    Ball {
        center: Point,
        radius: f64,
        dim: usize,
    },
    UnionOfBalls {
        balls: Vec<BallSpec>,
        dim: usize,
    },
    /// `{(x, y) : x in (0,1), 0 < y < 1 + sin(2 pi n x)/n}`.
    Rough { n: u32 },
    /// Base box minus periodically scaled translates of a concentric hole.
    Perforated {
        eps: f64,
        hole_fraction: f64,
        hole_shape: HoleShape,
        base_lo: Point,
        base_hi: Point,
    },
    Mapped {
        base: Box<DomainSpec>,
        map: MapSpec,
    },
    Polygon { vertices: Vec<Point> },
}

/// A measure value together with the estimation error when no closed form
/// exists (`error == None` means the value is exact).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measure {
    pub value: f64,
    pub error: Option<f64>,
}

impl Measure {
    fn exact(value: f64) -> Self {
        Measure { value, error: None }
    }
}

impl DomainSpec {
    pub fn interval(lo: f64, hi: f64) -> Result<Self, DomainError> {
        if !(hi > lo) {
            return Err(DomainError::InvalidParameter(format!(
                "interval bounds must satisfy lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(DomainSpec::Box {
            lo: [lo, 0.0],
            hi: [hi, 0.0],
            dim: 1,
        })
    }

    pub fn rect(lo: Point, hi: Point) -> Result<Self, DomainError> {
        if !(hi[0] > lo[0]) || !(hi[1] > lo[1]) {
            return Err(DomainError::InvalidParameter(format!(
                "box corners must satisfy lo < hi componentwise, got {lo:?}, {hi:?}"
            )));
        }
        Ok(DomainSpec::Box { lo, hi, dim: 2 })
    }

    pub fn ball(center: Point, radius: f64, dim: usize) -> Result<Self, DomainError> {
        if !(radius > 0.0) {
            return Err(DomainError::InvalidParameter(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        if dim != 1 && dim != 2 {
            return Err(DomainError::InvalidParameter(format!(
                "unsupported dimension {dim}"
            )));
        }
        Ok(DomainSpec::Ball {
            center,
            radius,
            dim,
        })
    }

    pub fn union_of_balls(balls: Vec<BallSpec>, dim: usize) -> Result<Self, DomainError> {
        if balls.is_empty() {
            return Err(DomainError::InvalidParameter(
                "union of balls needs at least one ball".into(),
            ));
        }
        for i in 0..balls.len() {
            for j in (i + 1)..balls.len() {
                let d = dist(balls[i].center, balls[j].center);
                if d <= balls[i].radius + balls[j].radius {
                    return Err(DomainError::OverlappingBalls(i, j));
                }
            }
        }
        Ok(DomainSpec::UnionOfBalls { balls, dim })
    }

    pub fn rough(n: u32) -> Result<Self, DomainError> {
        if n == 0 {
            return Err(DomainError::InvalidParameter(
                "rough family parameter n must be at least 1".into(),
            ));
        }
        Ok(DomainSpec::Rough { n })
    }

    pub fn perforated(
        eps: f64,
        hole_fraction: f64,
        hole_shape: HoleShape,
        base_lo: Point,
        base_hi: Point,
    ) -> Result<Self, DomainError> {
        if !(eps > 0.0) {
            return Err(DomainError::InvalidParameter(format!(
                "perforation scale eps must be positive, got {eps}"
            )));
        }
        if !(0.0..1.0).contains(&hole_fraction) {
            return Err(DomainError::InvalidParameter(format!(
                "hole fraction must lie in [0, 1), got {hole_fraction}"
            )));
        }
        if hole_shape == HoleShape::Ball && hole_fraction >= PI / 4.0 {
            return Err(DomainError::InvalidParameter(format!(
                "ball hole of fraction {hole_fraction} does not fit inside the unit cell"
            )));
        }
        if !(base_hi[0] > base_lo[0]) || !(base_hi[1] > base_lo[1]) {
            return Err(DomainError::InvalidParameter(
                "perforated base box is degenerate".into(),
            ));
        }
        Ok(DomainSpec::Perforated {
            eps,
            hole_fraction,
            hole_shape,
            base_lo,
            base_hi,
        })
    }

    pub fn mapped(base: DomainSpec, map: MapSpec) -> Result<Self, DomainError> {
        let (lo, hi) = base.bounding_box();
        map.validate_on(lo, hi, base.dim())?;
        Ok(DomainSpec::Mapped {
            base: Box::new(base),
            map,
        })
    }

    pub fn polygon(vertices: Vec<Point>) -> Result<Self, DomainError> {
        if vertices.len() < 3 {
            return Err(DomainError::InvalidParameter(
                "polygon needs at least 3 vertices".into(),
            ));
        }
        Ok(DomainSpec::Polygon { vertices })
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Box { dim, .. }
            | DomainSpec::Ball { dim, .. }
            | DomainSpec::UnionOfBalls { dim, .. } => *dim,
            DomainSpec::Rough { .. }
            | DomainSpec::Perforated { .. }
            | DomainSpec::Polygon { .. } => 2,
            DomainSpec::Mapped { base, .. } => base.dim(),
        }
    }

    /// Open-set membership; points on the topological boundary are outside.
    pub fn contains(&self, p: Point) -> bool {
        match self {
            DomainSpec::Box { lo, hi, dim } => {
                let mut inside = p[0] > lo[0] && p[0] < hi[0];
                if *dim == 2 {
                    inside = inside && p[1] > lo[1] && p[1] < hi[1];
                }
                inside
            }
            DomainSpec::Ball {
                center,
                radius,
                dim,
            } => ball_contains(*center, *radius, *dim, p),
            DomainSpec::UnionOfBalls { balls, dim } => balls
                .iter()
                .any(|b| ball_contains(b.center, b.radius, *dim, p)),
            DomainSpec::Rough { n } => {
                let nf = f64::from(*n);
                p[0] > 0.0
                    && p[0] < 1.0
                    && p[1] > 0.0
                    && p[1] < 1.0 + (2.0 * PI * nf * p[0]).sin() / nf
            }
            DomainSpec::Perforated {
                eps,
                hole_fraction,
                hole_shape,
                base_lo,
                base_hi,
            } => {
                let in_base = p[0] > base_lo[0]
                    && p[0] < base_hi[0]
                    && p[1] > base_lo[1]
                    && p[1] < base_hi[1];
                if !in_base || *hole_fraction == 0.0 {
                    return in_base;
                }
                // Fractional position inside the periodicity cell.
                let cx = cell_frac(p[0] / eps);
                let cy = cell_frac(p[1] / eps);
                let in_hole = match hole_shape {
                    HoleShape::Box => {
                        let half = 0.5 * hole_fraction.sqrt();
                        (cx - 0.5).abs() <= half && (cy - 0.5).abs() <= half
                    }
                    HoleShape::Ball => {
                        let r2 = hole_fraction / PI;
                        let dx = cx - 0.5;
                        let dy = cy - 0.5;
                        dx * dx + dy * dy <= r2
                    }
                };
                !in_hole
            }
            DomainSpec::Mapped { base, map } => match map.inverse(p) {
                Some(q) => base.contains(q),
                None => false,
            },
            DomainSpec::Polygon { vertices } => polygon_contains(vertices, p),
        }
    }

    /// Axis-aligned bounding box, conservative for mapped domains.
    pub fn bounding_box(&self) -> (Point, Point) {
        match self {
            DomainSpec::Box { lo, hi, .. } => (*lo, *hi),
            DomainSpec::Ball {
                center,
                radius,
                dim,
            } => {
                let r = *radius;
                if *dim == 1 {
                    ([center[0] - r, 0.0], [center[0] + r, 0.0])
                } else {
                    (
                        [center[0] - r, center[1] - r],
                        [center[0] + r, center[1] + r],
                    )
                }
            }
            DomainSpec::UnionOfBalls { balls, dim } => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for b in balls {
                    lo[0] = lo[0].min(b.center[0] - b.radius);
                    hi[0] = hi[0].max(b.center[0] + b.radius);
                    if *dim == 2 {
                        lo[1] = lo[1].min(b.center[1] - b.radius);
                        hi[1] = hi[1].max(b.center[1] + b.radius);
                    }
                }
                if *dim == 1 {
                    lo[1] = 0.0;
                    hi[1] = 0.0;
                }
                (lo, hi)
            }
            DomainSpec::Rough { n } => ([0.0, 0.0], [1.0, 1.0 + 1.0 / f64::from(*n)]),
            DomainSpec::Perforated {
                base_lo, base_hi, ..
            } => (*base_lo, *base_hi),
            DomainSpec::Mapped { base, map } => {
                let (lo, hi) = base.bounding_box();
                match map {
                    MapSpec::AffineDiagonal { .. } | MapSpec::Dilation { .. } => {
                        let corners = [
                            map.apply([lo[0], lo[1]]),
                            map.apply([hi[0], lo[1]]),
                            map.apply([lo[0], hi[1]]),
                            map.apply([hi[0], hi[1]]),
                        ];
                        let mut mlo = [f64::INFINITY; 2];
                        let mut mhi = [f64::NEG_INFINITY; 2];
                        for c in corners {
                            mlo[0] = mlo[0].min(c[0]);
                            mlo[1] = mlo[1].min(c[1]);
                            mhi[0] = mhi[0].max(c[0]);
                            mhi[1] = mhi[1].max(c[1]);
                        }
                        if base.dim() == 1 {
                            mlo[1] = 0.0;
                            mhi[1] = 0.0;
                        }
                        (mlo, mhi)
                    }
                    MapSpec::PerturbationField { field, t } => {
                        let pad = t.abs() * field.max_norm_on(lo, hi) * 1.000001;
                        if base.dim() == 1 {
                            ([lo[0] - pad, 0.0], [hi[0] + pad, 0.0])
                        } else {
                            ([lo[0] - pad, lo[1] - pad], [hi[0] + pad, hi[1] + pad])
                        }
                    }
                }
            }
            DomainSpec::Polygon { vertices } => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for v in vertices {
                    lo[0] = lo[0].min(v[0]);
                    lo[1] = lo[1].min(v[1]);
                    hi[0] = hi[0].max(v[0]);
                    hi[1] = hi[1].max(v[1]);
                }
                (lo, hi)
            }
        }
    }

    /// Lebesgue measure: closed form where available, otherwise a refined
    /// subcell estimate with its observed refinement delta as error.
    pub fn measure(&self) -> Measure {
        match self {
            DomainSpec::Box { lo, hi, dim } => {
                let mut v = hi[0] - lo[0];
                if *dim == 2 {
                    v *= hi[1] - lo[1];
                }
                Measure::exact(v)
            }
            DomainSpec::Ball { radius, dim, .. } => Measure::exact(ball_measure(*radius, *dim)),
            DomainSpec::UnionOfBalls { balls, dim } => Measure::exact(
                balls.iter().map(|b| ball_measure(b.radius, *dim)).sum(),
            ),
            // The oscillation integrates to zero over whole periods.
            DomainSpec::Rough { .. } => Measure::exact(1.0),
            DomainSpec::Perforated {
                eps,
                hole_fraction,
                hole_shape,
                base_lo,
                base_hi,
            } => {
                let base_area = (base_hi[0] - base_lo[0]) * (base_hi[1] - base_lo[1]);
                if *hole_fraction == 0.0 {
                    return Measure::exact(base_area);
                }
                match hole_shape {
                    HoleShape::Box => {
                        let half = 0.5 * hole_fraction.sqrt() * eps;
                        let mut holes = 0.0;
                        for_each_cell(*eps, *base_lo, *base_hi, |cx, cy| {
                            let hx =
                                overlap_1d(cx - half, cx + half, base_lo[0], base_hi[0]);
                            let hy =
                                overlap_1d(cy - half, cy + half, base_lo[1], base_hi[1]);
                            holes += hx * hy;
                        });
                        Measure::exact(base_area - holes)
                    }
                    HoleShape::Ball => {
                        let r = (hole_fraction / PI).sqrt() * eps;
                        let mut holes = 0.0;
                        let mut clipped = false;
                        for_each_cell(*eps, *base_lo, *base_hi, |cx, cy| {
                            let inside = cx - r >= base_lo[0]
                                && cx + r <= base_hi[0]
                                && cy - r >= base_lo[1]
                                && cy + r <= base_hi[1];
                            let outside = cx + r <= base_lo[0]
                                || cx - r >= base_hi[0]
                                || cy + r <= base_lo[1]
                                || cy - r >= base_hi[1];
                            if inside {
                                holes += PI * r * r;
                            } else if !outside {
                                clipped = true;
                            }
                        });
                        if clipped {
                            self.subcell_measure(1e-4)
                        } else {
                            Measure::exact(base_area - holes)
                        }
                    }
                }
            }
            DomainSpec::Mapped { base, map } => match map {
                MapSpec::AffineDiagonal { .. } | MapSpec::Dilation { .. } => {
                    let det = map.jacobian_det([0.0, 0.0], base.dim());
                    let m = base.measure();
                    Measure {
                        value: m.value * det,
                        error: m.error.map(|e| e * det),
                    }
                }
                MapSpec::PerturbationField { .. } => {
                    // |h(Omega)| = integral of |det Dh| over the base domain.
                    let (lo, hi) = base.bounding_box();
                    let dim = base.dim();
                    let est = subcell::refine_until(lo, hi, dim, 1e-4, &|p| {
                        if base.contains(p) {
                            map.jacobian_det(p, dim)
                        } else {
                            0.0
                        }
                    });
                    Measure {
                        value: est.value,
                        error: Some(est.refinement_delta),
                    }
                }
            },
            DomainSpec::Polygon { vertices } => Measure::exact(shoelace_area(vertices)),
        }
    }

    fn subcell_measure(&self, rel_tol: f64) -> Measure {
        let (lo, hi) = self.bounding_box();
        let est = subcell::refine_until(lo, hi, self.dim(), rel_tol, &|p| {
            if self.contains(p) {
                1.0
            } else {
                0.0
            }
        });
        Measure {
            value: est.value,
            error: Some(est.refinement_delta),
        }
    }
}

fn ball_contains(center: Point, radius: f64, dim: usize, p: Point) -> bool {
    let dx = p[0] - center[0];
    if dim == 1 {
        dx.abs() < radius
    } else {
        let dy = p[1] - center[1];
        dx * dx + dy * dy < radius * radius
    }
}

fn ball_measure(radius: f64, dim: usize) -> f64 {
    if dim == 1 {
        2.0 * radius
    } else {
        PI * radius * radius
    }
}

fn cell_frac(t: f64) -> f64 {
    let f = t - t.floor();
    if f < 0.0 {
        f + 1.0
    } else {
        f
    }
}

/// Visits the centers of all periodicity cells whose closed cell intersects
/// the base box.
fn for_each_cell(eps: f64, lo: Point, hi: Point, mut visit: impl FnMut(f64, f64)) {
    let kx0 = (lo[0] / eps).floor() as i64 - 1;
    let kx1 = (hi[0] / eps).ceil() as i64 + 1;
    let ky0 = (lo[1] / eps).floor() as i64 - 1;
    let ky1 = (hi[1] / eps).ceil() as i64 + 1;
    for ky in ky0..=ky1 {
        for kx in kx0..=kx1 {
            visit(
                (kx as f64 + 0.5) * eps,
                (ky as f64 + 0.5) * eps,
            );
        }
    }
}

fn overlap_1d(a_lo: f64, a_hi: f64, b_lo: f64, b_hi: f64) -> f64 {
    (a_hi.min(b_hi) - a_lo.max(b_lo)).max(0.0)
}

fn polygon_contains(vertices: &[Point], p: Point) -> bool {
    // Even-odd crossing test.
    let mut inside = false;
    let n = vertices.len();
    let mut j = n - 1;
    for i in 0..n {
        let vi = vertices[i];
        let vj = vertices[j];
        if (vi[1] > p[1]) != (vj[1] > p[1]) {
            let x_cross = vj[0] + (p[1] - vj[1]) / (vi[1] - vj[1]) * (vi[0] - vj[0]);
            if p[0] < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn shoelace_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    let mut twice = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        twice += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * twice.abs()
}

fn dist(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// `|A \ B| + |B \ A|`, in closed form for the pairs the theory names and by
/// refined subcell counting otherwise.
pub fn symmetric_difference_measure(
    a: &DomainSpec,
    b: &DomainSpec,
) -> Result<f64, DomainError> {
    if a.dim() != b.dim() {
        return Err(DomainError::DimMismatch(a.dim(), b.dim()));
    }
    if a == b {
        return Ok(0.0);
    }
    if let Some(v) = rough_vs_unit_square(a, b) {
        return Ok(v);
    }
    match (a, b) {
        (
            DomainSpec::Box {
                lo: alo, hi: ahi, dim,
            },
            DomainSpec::Box { lo: blo, hi: bhi, .. },
        ) => {
            let inter = overlap_1d(alo[0], ahi[0], blo[0], bhi[0])
                * if *dim == 2 {
                    overlap_1d(alo[1], ahi[1], blo[1], bhi[1])
                } else {
                    1.0
                };
            Ok(a.measure().value + b.measure().value - 2.0 * inter)
        }
        (
            DomainSpec::Ball {
                center: ca,
                radius: ra,
                dim,
            },
            DomainSpec::Ball {
                center: cb,
                radius: rb,
                ..
            },
        ) => {
            let inter = if *dim == 1 {
                overlap_1d(ca[0] - ra, ca[0] + ra, cb[0] - rb, cb[0] + rb)
            } else {
                disk_overlap(*ca, *ra, *cb, *rb)
            };
            Ok(ball_measure(*ra, *dim) + ball_measure(*rb, *dim) - 2.0 * inter)
        }
        _ => Ok(symmetric_difference_subcell(a, b, 1e-3)),
    }
}

/// The perturbation metric for the rough family against the unit square has
/// the closed form `2 / (pi n)`.
fn rough_vs_unit_square(a: &DomainSpec, b: &DomainSpec) -> Option<f64> {
    let (square, rough) = match (a, b) {
        (DomainSpec::Box { lo, hi, dim: 2 }, DomainSpec::Rough { n }) => ((lo, hi), *n),
        (DomainSpec::Rough { n }, DomainSpec::Box { lo, hi, dim: 2 }) => ((lo, hi), *n),
        _ => return None,
    };
    let (lo, hi) = square;
    if *lo == [0.0, 0.0] && *hi == [1.0, 1.0] {
        Some(2.0 / (PI * f64::from(rough)))
    } else {
        None
    }
}

/// Subcell estimate of the symmetric difference, refined until two levels
/// agree to `rel_tol` relative.
pub fn symmetric_difference_subcell(a: &DomainSpec, b: &DomainSpec, rel_tol: f64) -> f64 {
    let (alo, ahi) = a.bounding_box();
    let (blo, bhi) = b.bounding_box();
    let lo = [alo[0].min(blo[0]), alo[1].min(blo[1])];
    let hi = [ahi[0].max(bhi[0]), ahi[1].max(bhi[1])];
    subcell::refine_until(lo, hi, a.dim(), rel_tol, &|p| {
        if a.contains(p) != b.contains(p) {
            1.0
        } else {
            0.0
        }
    })
    .value
}

fn disk_overlap(ca: Point, ra: f64, cb: Point, rb: f64) -> f64 {
    let d = dist(ca, cb);
    if d >= ra + rb {
        return 0.0;
    }
    let (rmin, rmax) = if ra < rb { (ra, rb) } else { (rb, ra) };
    if d <= rmax - rmin {
        return PI * rmin * rmin;
    }
    let a2 = ra * ra;
    let b2 = rb * rb;
    let alpha = ((d * d + a2 - b2) / (2.0 * d * ra)).clamp(-1.0, 1.0).acos();
    let beta = ((d * d + b2 - a2) / (2.0 * d * rb)).clamp(-1.0, 1.0).acos();
    a2 * (alpha - alpha.sin() * alpha.cos()) + b2 * (beta - beta.sin() * beta.cos())
}

/// The ball centered at the origin with the same measure as `d`.
pub fn ball_of_same_measure(d: &DomainSpec) -> Result<DomainSpec, DomainError> {
    let m = d.measure().value;
    if !(m > 0.0) || !m.is_finite() {
        return Err(DomainError::DegenerateMeasure(m));
    }
    let radius = if d.dim() == 1 {
        0.5 * m
    } else {
        (m / PI).sqrt()
    };
    DomainSpec::ball([0.0, 0.0], radius, d.dim())
}
