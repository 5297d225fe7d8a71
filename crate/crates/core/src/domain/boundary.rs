//! Boundary sampling with outward normals for the C1 domains the shape
//! machinery accepts.

use crate::error::DomainError;
use crate::Point;

use super::{DomainSpec, MapSpec};

/// One boundary quadrature node: location, outward unit normal, arc weight.
#[derive(Debug, Clone, Copy)]
pub struct BoundarySample {
    pub point: Point,
    pub normal: Point,
    pub weight: f64,
}

/// Samples the boundary of `d` with `m` nodes whose weights sum to the
/// boundary length (or to the point count in dimension 1).
///
/// Supported: balls, boxes (corners carry no weight and are assigned to one
/// edge by convention), and affine images of balls. Variants without a C1
/// parameterization are refused.
pub fn boundary_quadrature(
    d: &DomainSpec,
    m: usize,
) -> Result<Vec<BoundarySample>, DomainError> {
    if m < 8 {
        return Err(DomainError::TooFewBoundarySamples(m));
    }
    match d {
        DomainSpec::Ball {
            center,
            radius,
            dim: 1,
        } => Ok(vec![
            BoundarySample {
                point: [center[0] - radius, 0.0],
                normal: [-1.0, 0.0],
                weight: 1.0,
            },
            BoundarySample {
                point: [center[0] + radius, 0.0],
                normal: [1.0, 0.0],
                weight: 1.0,
            },
        ]),
        DomainSpec::Ball {
            center,
            radius,
            dim: 2,
        } => Ok(circle_samples(*center, *radius, m)),
        DomainSpec::Box { lo, hi, dim: 1 } => Ok(vec![
            BoundarySample {
                point: [lo[0], 0.0],
                normal: [-1.0, 0.0],
                weight: 1.0,
            },
            BoundarySample {
                point: [hi[0], 0.0],
                normal: [1.0, 0.0],
                weight: 1.0,
            },
        ]),
        DomainSpec::Box { lo, hi, dim: 2 } => Ok(box_samples(*lo, *hi, m)),
        DomainSpec::Mapped { base, map } => match (base.as_ref(), map) {
            (
                DomainSpec::Ball {
                    center,
                    radius,
                    dim: 2,
                },
                MapSpec::AffineDiagonal { scales },
            ) => Ok(ellipse_samples(*center, *radius, *scales, m)),
            (
                DomainSpec::Ball {
                    center,
                    radius,
                    dim: 2,
                },
                MapSpec::Dilation { factor },
            ) => Ok(ellipse_samples(*center, *radius, [*factor, *factor], m)),
            _ => Err(DomainError::NoBoundaryParameterization("mapped")),
        },
        DomainSpec::Rough { .. } => Err(DomainError::NoBoundaryParameterization("rough")),
        DomainSpec::Perforated { .. } => {
            Err(DomainError::NoBoundaryParameterization("perforated"))
        }
        DomainSpec::UnionOfBalls { .. } => {
            Err(DomainError::NoBoundaryParameterization("union_of_balls"))
        }
        DomainSpec::Polygon { .. } => Err(DomainError::NoBoundaryParameterization("polygon")),
        DomainSpec::Ball { .. } | DomainSpec::Box { .. } => {
            Err(DomainError::NoBoundaryParameterization("unsupported"))
        }
    }
}

fn circle_samples(center: Point, radius: f64, m: usize) -> Vec<BoundarySample> {
    let w = 2.0 * std::f64::consts::PI * radius / m as f64;
    (0..m)
        .map(|i| {
            let theta = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / m as f64;
            let (s, c) = theta.sin_cos();
            BoundarySample {
                point: [center[0] + radius * c, center[1] + radius * s],
                normal: [c, s],
                weight: w,
            }
        })
        .collect()
}

fn box_samples(lo: Point, hi: Point, m: usize) -> Vec<BoundarySample> {
    let lx = hi[0] - lo[0];
    let ly = hi[1] - lo[1];
    let perim = 2.0 * (lx + ly);
    // Distribute samples proportionally, keeping at least two per edge.
    let alloc = |len: f64| ((m as f64 * len / perim).round() as usize).max(2);
    let (mx, my) = (alloc(lx), alloc(ly));
    let mut out = Vec::with_capacity(2 * (mx + my));
    for i in 0..mx {
        let x = lo[0] + (i as f64 + 0.5) * lx / mx as f64;
        out.push(BoundarySample {
            point: [x, lo[1]],
            normal: [0.0, -1.0],
            weight: lx / mx as f64,
        });
        out.push(BoundarySample {
            point: [x, hi[1]],
            normal: [0.0, 1.0],
            weight: lx / mx as f64,
        });
    }
    for i in 0..my {
        let y = lo[1] + (i as f64 + 0.5) * ly / my as f64;
        out.push(BoundarySample {
            point: [lo[0], y],
            normal: [-1.0, 0.0],
            weight: ly / my as f64,
        });
        out.push(BoundarySample {
            point: [hi[0], y],
            normal: [1.0, 0.0],
            weight: ly / my as f64,
        });
    }
    out
}

fn ellipse_samples(center: Point, radius: f64, scales: [f64; 2], m: usize) -> Vec<BoundarySample> {
    let (a, b) = (scales[0], scales[1]);
    let dtheta = 2.0 * std::f64::consts::PI / m as f64;
    (0..m)
        .map(|i| {
            let theta = dtheta * (i as f64 + 0.5);
            let (s, c) = theta.sin_cos();
            let point = [a * (center[0] + radius * c), b * (center[1] + radius * s)];
            // Speed of the parameterization gives the arc weight; the outward
            // normal follows the gradient of the implicit equation.
            let speed = radius * ((a * s).powi(2) + (b * c).powi(2)).sqrt();
            let g = [c / a, s / b];
            let gn = (g[0] * g[0] + g[1] * g[1]).sqrt();
            BoundarySample {
                point,
                normal: [g[0] / gn, g[1] / gn],
                weight: speed * dtheta,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;
    use std::f64::consts::PI;

    #[test]
    fn circle_weights_sum_to_circumference() {
        let d = DomainSpec::ball([0.0, 0.0], 1.0, 2).unwrap();
        let bq = boundary_quadrature(&d, 100).unwrap();
        let total: f64 = bq.iter().map(|s| s.weight).sum();
        assert!((total - 2.0 * PI).abs() < 1e-10);
        for s in &bq {
            let r = (s.point[0] * s.point[0] + s.point[1] * s.point[1]).sqrt();
            assert!((r - 1.0).abs() < 1e-12);
            // Sphere normal is the radial direction.
            assert!((s.normal[0] - s.point[0]).abs() < 1e-12);
            assert!((s.normal[1] - s.point[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_square_perimeter() {
        let d = DomainSpec::rect([0.0, 0.0], [1.0, 1.0]).unwrap();
        let bq = boundary_quadrature(&d, 400).unwrap();
        let total: f64 = bq.iter().map(|s| s.weight).sum();
        assert!((total - 4.0).abs() < 1e-12);
    }

    #[test]
    fn normals_step_outside() {
        let d = DomainSpec::ball([0.2, -0.1], 0.8, 2).unwrap();
        let bq = boundary_quadrature(&d, 64).unwrap();
        let tau = 1e-4 * 1.6;
        for s in &bq {
            let out = [
                s.point[0] + tau * s.normal[0],
                s.point[1] + tau * s.normal[1],
            ];
            let inw = [
                s.point[0] - tau * s.normal[0],
                s.point[1] - tau * s.normal[1],
            ];
            assert!(!d.contains(out));
            assert!(d.contains(inw));
        }
    }

    #[test]
    fn ellipse_weights_approximate_perimeter() {
        let base = DomainSpec::ball([0.0, 0.0], 1.0, 2).unwrap();
        let d = DomainSpec::mapped(base, MapSpec::AffineDiagonal { scales: [2.0, 1.0] })
            .unwrap();
        let bq = boundary_quadrature(&d, 512).unwrap();
        let total: f64 = bq.iter().map(|s| s.weight).sum();
        // Perimeter of a 2x1 ellipse: 4 a E(e) with e^2 = 1 - b^2/a^2.
        let reference = 9.688_448_220_547_675;
        assert!(
            (total - reference).abs() < 1e-6,
            "perimeter quadrature {total}"
        );
        // Normal at theta ~ 0 points along +x.
        let tau = 1e-4;
        for s in bq.iter().take(8) {
            let out = [
                s.point[0] + tau * s.normal[0],
                s.point[1] + tau * s.normal[1],
            ];
            assert!(!d.contains(out));
        }
    }

    #[test]
    fn refuses_non_c1_variants() {
        let rough = DomainSpec::rough(3).unwrap();
        assert!(matches!(
            boundary_quadrature(&rough, 64),
            Err(DomainError::NoBoundaryParameterization("rough"))
        ));
        let d = DomainSpec::ball([0.0, 0.0], 1.0, 2).unwrap();
        assert!(matches!(
            boundary_quadrature(&d, 4),
            Err(DomainError::TooFewBoundarySamples(4))
        ));
    }
}
