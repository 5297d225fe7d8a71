//! C1 imbeddings used to deform domains: diagonal affine maps, dilations, and
//! perturbations of the identity along a named vector field.

use crate::error::DomainError;
use crate::Point;

/// Deformation fields `V` admitted by the shape-derivative machinery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VectorField {
    /// Constant field, a rigid translation direction.
    Translation { dir: [f64; 2] },
    /// `V(x) = x`, dilation about the origin.
    Dilation,
    /// `V(x) = (-x_2, x_1)`, rotation about the origin.
    Rotation,
    /// `V(x) = exp(-|x|^2) x`, a smooth radial push that decays far out.
    RadialBump,
}

impl VectorField {
    pub fn name(&self) -> &'static str {
        match self {
            VectorField::Translation { .. } => "translation",
            VectorField::Dilation => "dilation",
            VectorField::Rotation => "rotation",
            VectorField::RadialBump => "radial_bump",
        }
    }

    pub fn eval(&self, p: Point) -> [f64; 2] {
        match self {
            VectorField::Translation { dir } => *dir,
            VectorField::Dilation => p,
            VectorField::Rotation => [-p[1], p[0]],
            VectorField::RadialBump => {
                let w = (-(p[0] * p[0] + p[1] * p[1])).exp();
                [w * p[0], w * p[1]]
            }
        }
    }

    /// Jacobian matrix `DV(p)`, rows indexed by component.
    pub fn jacobian(&self, p: Point) -> [[f64; 2]; 2] {
        match self {
            VectorField::Translation { .. } => [[0.0, 0.0], [0.0, 0.0]],
            VectorField::Dilation => [[1.0, 0.0], [0.0, 1.0]],
            VectorField::Rotation => [[0.0, -1.0], [1.0, 0.0]],
            VectorField::RadialBump => {
                let r2 = p[0] * p[0] + p[1] * p[1];
                let w = (-r2).exp();
                [
                    [w * (1.0 - 2.0 * p[0] * p[0]), w * (-2.0 * p[0] * p[1])],
                    [w * (-2.0 * p[0] * p[1]), w * (1.0 - 2.0 * p[1] * p[1])],
                ]
            }
        }
    }

    /// Upper bound for `|V|` over an axis-aligned box, used to inflate
    /// bounding boxes of mapped domains conservatively.
    pub fn max_norm_on(&self, lo: Point, hi: Point) -> f64 {
        let rmax = corner_radius_max(lo, hi);
        match self {
            VectorField::Translation { dir } => (dir[0] * dir[0] + dir[1] * dir[1]).sqrt(),
            VectorField::Dilation | VectorField::Rotation => rmax,
            VectorField::RadialBump => {
                // r exp(-r^2) peaks at r = 1/sqrt(2).
                let r = rmax.min(std::f64::consts::FRAC_1_SQRT_2);
                r * (-r * r).exp()
            }
        }
    }
}

fn corner_radius_max(lo: Point, hi: Point) -> f64 {
    let mut best: f64 = 0.0;
    for &x in &[lo[0], hi[0]] {
        for &y in &[lo[1], hi[1]] {
            best = best.max((x * x + y * y).sqrt());
        }
    }
    best
}

/// A C1 imbedding `h` applied to a base domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MapSpec {
    /// `h(x) = (s_1 x_1, s_2 x_2)`.
    AffineDiagonal { scales: [f64; 2] },
    /// `h(x) = t x` about the origin.
    Dilation { factor: f64 },
    /// `h(x) = x + t V(x)`.
    PerturbationField { field: VectorField, t: f64 },
}

impl MapSpec {
    pub fn apply(&self, p: Point) -> Point {
        match self {
            MapSpec::AffineDiagonal { scales } => [scales[0] * p[0], scales[1] * p[1]],
            MapSpec::Dilation { factor } => [factor * p[0], factor * p[1]],
            MapSpec::PerturbationField { field, t } => {
                let v = field.eval(p);
                [p[0] + t * v[0], p[1] + t * v[1]]
            }
        }
    }

    /// `|det(Dh(p))|`. The second axis does not contribute in dimension 1.
    pub fn jacobian_det(&self, p: Point, dim: usize) -> f64 {
        match self {
            MapSpec::AffineDiagonal { scales } => {
                if dim == 1 {
                    scales[0].abs()
                } else {
                    (scales[0] * scales[1]).abs()
                }
            }
            MapSpec::Dilation { factor } => factor.abs().powi(dim as i32),
            MapSpec::PerturbationField { field, t } => {
                let dv = field.jacobian(p);
                if dim == 1 {
                    (1.0 + t * dv[0][0]).abs()
                } else {
                    let a = 1.0 + t * dv[0][0];
                    let b = t * dv[0][1];
                    let c = t * dv[1][0];
                    let d = 1.0 + t * dv[1][1];
                    (a * d - b * c).abs()
                }
            }
        }
    }

    /// Inverse image of `p`. For perturbation maps this runs the fixed-point
    /// iteration `y <- p - t V(y)`, which contracts whenever `|t| Lip(V) < 1`.
    pub fn inverse(&self, p: Point) -> Option<Point> {
        match self {
            MapSpec::AffineDiagonal { scales } => {
                if scales[0] == 0.0 || scales[1] == 0.0 {
                    return None;
                }
                Some([p[0] / scales[0], p[1] / scales[1]])
            }
            MapSpec::Dilation { factor } => {
                if *factor == 0.0 {
                    return None;
                }
                Some([p[0] / factor, p[1] / factor])
            }
            MapSpec::PerturbationField { field, t } => {
                let mut y = p;
                let tol = 1e-14 * (1.0 + p[0].abs() + p[1].abs());
                for _ in 0..80 {
                    let v = field.eval(y);
                    let next = [p[0] - t * v[0], p[1] - t * v[1]];
                    let step = (next[0] - y[0]).abs() + (next[1] - y[1]).abs();
                    y = next;
                    if step <= tol {
                        return Some(y);
                    }
                }
                None
            }
        }
    }

    /// Checks injectivity and Jacobian positivity on a deterministic sample
    /// lattice inside the given box.
    pub fn validate_on(&self, lo: Point, hi: Point, dim: usize) -> Result<(), DomainError> {
        let per_axis = 7usize;
        let mut pts = Vec::with_capacity(per_axis * per_axis);
        let ny = if dim == 1 { 1 } else { per_axis };
        for iy in 0..ny {
            for ix in 0..per_axis {
                let fx = (ix as f64 + 0.5) / per_axis as f64;
                let fy = (iy as f64 + 0.5) / ny as f64;
                let p = [
                    lo[0] + fx * (hi[0] - lo[0]),
                    if dim == 1 {
                        0.0
                    } else {
                        lo[1] + fy * (hi[1] - lo[1])
                    },
                ];
                pts.push(p);
            }
        }
        let mut min_det = f64::INFINITY;
        for &p in &pts {
            min_det = min_det.min(self.jacobian_det(p, dim));
        }
        if min_det < 1e-8 {
            return Err(DomainError::VanishingJacobian(min_det));
        }
        let mut min_ratio = f64::INFINITY;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let d0 = dist(pts[i], pts[j]);
                if d0 == 0.0 {
                    continue;
                }
                let d1 = dist(self.apply(pts[i]), self.apply(pts[j]));
                min_ratio = min_ratio.min(d1 / d0);
            }
        }
        if min_ratio <= 1e-6 {
            return Err(DomainError::NonInjectiveMap(min_ratio));
        }
        Ok(())
    }
}

fn dist(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}
