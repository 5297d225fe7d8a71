//! Dispersal kernels: nonnegative, radially symmetric, radially nonincreasing
//! probability densities with a strictly positive value at the origin.

use std::f64::consts::PI;

use crate::error::KernelError;
use crate::quadrature::adaptive_simpson;

/// Absolute tolerance on the unit-mass check performed at construction.
pub const MASS_TOL: f64 = 1e-8;

/// Multiple of the Gaussian width beyond which the kernel is treated as zero
/// during operator assembly. The discarded mass is below 1e-14.
pub const GAUSSIAN_CUTOFF_SIGMAS: f64 = 8.0;

/// Functional form of the radial profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    /// `c (1 - |x|^2/d^2)^2` inside the support radius `d`.
    Bump,
    /// `c exp(-|x|^2 / (2 s^2))`.
    Gaussian,
    /// `c (1 - |x|/d)` inside the support radius `d`.
    Tent,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Bump => "bump",
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Tent => "tent",
        }
    }
}

/// Smoothness class of the radial profile, ordered so that `>=` comparisons
/// express "at least this smooth".
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Smoothness {
    C0,
    C1,
    CInf,
}

/// A dispersal kernel with its normalization constant resolved.
///
/// Values are immutable after construction and evaluation is pure, so a spec
/// can be shared freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    width: f64,
    dim: usize,
    norm_const: f64,
    smoothness: Smoothness,
    mass_residual: f64,
}

impl KernelSpec {
    /// Builds a kernel, computing the constant that gives unit mass and
    /// cross-checking it against adaptive radial quadrature.
    pub fn new(family: KernelFamily, width: f64, dim: usize) -> Result<Self, KernelError> {
        if !(width > 0.0) {
            return Err(KernelError::NonPositiveWidth(width));
        }
        if dim != 1 && dim != 2 {
            return Err(KernelError::UnsupportedDim(dim));
        }
        let norm_const = match (family, dim) {
            (KernelFamily::Bump, 1) => 15.0 / (16.0 * width),
            (KernelFamily::Bump, 2) => 3.0 / (PI * width * width),
            (KernelFamily::Gaussian, 1) => 1.0 / (width * (2.0 * PI).sqrt()),
            (KernelFamily::Gaussian, 2) => 1.0 / (2.0 * PI * width * width),
            (KernelFamily::Tent, 1) => 1.0 / width,
            (KernelFamily::Tent, 2) => 3.0 / (PI * width * width),
            _ => unreachable!(),
        };
        let smoothness = match family {
            KernelFamily::Bump => Smoothness::C1,
            KernelFamily::Gaussian => Smoothness::CInf,
            KernelFamily::Tent => Smoothness::C0,
        };
        let spec = KernelSpec {
            family,
            width,
            dim,
            norm_const,
            smoothness,
            mass_residual: 0.0,
        };
        let mass = spec.radial_mass_quadrature();
        let residual = (mass - 1.0).abs();
        if residual > MASS_TOL {
            return Err(KernelError::MassCheck {
                residual,
                tol: MASS_TOL,
            });
        }
        Ok(KernelSpec {
            mass_residual: residual,
            ..spec
        })
    }

    /// Total mass by adaptive quadrature of the radial profile.
    fn radial_mass_quadrature(&self) -> f64 {
        let r_max = match self.family {
            KernelFamily::Gaussian => 12.0 * self.width,
            _ => self.width,
        };
        match self.dim {
            1 => 2.0 * adaptive_simpson(&|r| self.eval_r2(r * r), 0.0, r_max, 1e-11),
            2 => 2.0 * PI * adaptive_simpson(&|r| r * self.eval_r2(r * r), 0.0, r_max, 1e-11),
            _ => unreachable!(),
        }
    }

    /// Kernel value as a function of the squared radius. Evaluation depends on
    /// `|x|^2` only, which makes evenness exact in floating point.
    #[inline]
    pub fn eval_r2(&self, r2: f64) -> f64 {
        match self.family {
            KernelFamily::Bump => {
                let d2 = self.width * self.width;
                if r2 >= d2 {
                    0.0
                } else {
                    let t = 1.0 - r2 / d2;
                    self.norm_const * t * t
                }
            }
            KernelFamily::Gaussian => {
                self.norm_const * (-r2 / (2.0 * self.width * self.width)).exp()
            }
            KernelFamily::Tent => {
                let r = r2.sqrt();
                if r >= self.width {
                    0.0
                } else {
                    self.norm_const * (1.0 - r / self.width)
                }
            }
        }
    }

    /// Kernel value at a point, checking the dimension.
    pub fn eval(&self, x: &[f64]) -> Result<f64, KernelError> {
        if x.len() != self.dim {
            return Err(KernelError::DimMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self.eval_r2(x.iter().map(|v| v * v).sum()))
    }

    /// `J(0)`, which under the standing hypotheses equals the sup norm.
    #[inline]
    pub fn peak(&self) -> f64 {
        self.norm_const
    }

    /// Radius beyond which assembly treats the kernel as zero. This is the
    /// support radius for compactly supported families and a fixed multiple of
    /// the width for the Gaussian.
    pub fn cutoff_radius(&self) -> f64 {
        match self.family {
            KernelFamily::Gaussian => GAUSSIAN_CUTOFF_SIGMAS * self.width,
            _ => self.width,
        }
    }

    /// Exact support radius, `None` for the Gaussian.
    pub fn support_radius(&self) -> Option<f64> {
        match self.family {
            KernelFamily::Gaussian => None,
            _ => Some(self.width),
        }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm_const(&self) -> f64 {
        self.norm_const
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    /// `|integral - 1|` observed by the construction-time quadrature.
    pub fn mass_residual(&self) -> f64 {
        self.mass_residual
    }
}
