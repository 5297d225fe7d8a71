//! JSON experiment configuration: schema-validated before any computation,
//! unknown fields rejected.

use serde::Deserialize;

use nlspec_core::domain::{BallSpec, DomainSpec, HoleShape, MapSpec, VectorField};
use nlspec_core::kernel::{KernelFamily, KernelSpec};

#[derive(Debug, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExperimentConfig {
    Spectrum(SpectrumConfig),
    Converge(ConvergeConfig),
    Perturb(PerturbConfig),
    ShapeDerivative(ShapeDerivativeConfig),
    FaberKrahn(FaberKrahnConfig),
    TwoBalls(TwoBallsConfig),
    Perforated(PerforatedConfig),
}

impl ExperimentConfig {
    pub fn output(&self) -> &OutputConfig {
        match self {
            ExperimentConfig::Spectrum(c) => &c.output,
            ExperimentConfig::Converge(c) => &c.output,
            ExperimentConfig::Perturb(c) => &c.output,
            ExperimentConfig::ShapeDerivative(c) => &c.output,
            ExperimentConfig::FaberKrahn(c) => &c.output,
            ExperimentConfig::TwoBalls(c) => &c.output,
            ExperimentConfig::Perforated(c) => &c.output,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub family: String,
    pub width: f64,
    pub dim: usize,
}

impl KernelConfig {
    pub fn build(&self) -> Result<KernelSpec, String> {
        let family = match self.family.as_str() {
            "bump" => KernelFamily::Bump,
            "gaussian" => KernelFamily::Gaussian,
            "tent" => KernelFamily::Tent,
            other => return Err(format!("unknown kernel family `{other}`")),
        };
        KernelSpec::new(family, self.width, self.dim).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Box {
        bounds: Vec<[f64; 2]>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    UnionOfBalls {
        balls: Vec<BallConfig>,
        dim: usize,
    },
    Rough {
        n: u32,
    },
    Perforated {
        eps: f64,
        hole_fraction: f64,
        #[serde(default)]
        hole_shape: HoleShapeConfig,
        base: [[f64; 2]; 2],
    },
    Mapped {
        base: Box<DomainConfig>,
        map: MapConfig,
    },
    Polygon {
        vertices: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallConfig {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Default, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum HoleShapeConfig {
    #[default]
    Box,
    Ball,
}

impl From<HoleShapeConfig> for HoleShape {
    fn from(h: HoleShapeConfig) -> HoleShape {
        match h {
            HoleShapeConfig::Box => HoleShape::Box,
            HoleShapeConfig::Ball => HoleShape::Ball,
        }
    }
}

fn point_of(v: &[f64]) -> Result<([f64; 2], usize), String> {
    match v.len() {
        1 => Ok(([v[0], 0.0], 1)),
        2 => Ok(([v[0], v[1]], 2)),
        n => Err(format!("points must have 1 or 2 coordinates, got {n}")),
    }
}

impl DomainConfig {
    pub fn build(&self) -> Result<DomainSpec, String> {
        match self {
            DomainConfig::Box { bounds } => match bounds.len() {
                1 => DomainSpec::interval(bounds[0][0], bounds[0][1]).map_err(|e| e.to_string()),
                2 => DomainSpec::rect(
                    [bounds[0][0], bounds[1][0]],
                    [bounds[0][1], bounds[1][1]],
                )
                .map_err(|e| e.to_string()),
                n => Err(format!("box bounds must list 1 or 2 axes, got {n}")),
            },
            DomainConfig::Ball { center, radius } => {
                let (c, dim) = point_of(center)?;
                DomainSpec::ball(c, *radius, dim).map_err(|e| e.to_string())
            }
            DomainConfig::UnionOfBalls { balls, dim } => {
                let mut list = Vec::with_capacity(balls.len());
                for b in balls {
                    let (c, d) = point_of(&b.center)?;
                    if d != *dim && !(d == 1 && *dim == 1) {
                        return Err("ball center dimension mismatch".into());
                    }
                    list.push(BallSpec {
                        center: c,
                        radius: b.radius,
                    });
                }
                DomainSpec::union_of_balls(list, *dim).map_err(|e| e.to_string())
            }
            DomainConfig::Rough { n } => DomainSpec::rough(*n).map_err(|e| e.to_string()),
            DomainConfig::Perforated {
                eps,
                hole_fraction,
                hole_shape,
                base,
            } => DomainSpec::perforated(
                *eps,
                *hole_fraction,
                (*hole_shape).into(),
                [base[0][0], base[1][0]],
                [base[0][1], base[1][1]],
            )
            .map_err(|e| e.to_string()),
            DomainConfig::Mapped { base, map } => {
                let b = base.build()?;
                DomainSpec::mapped(b, map.build()?).map_err(|e| e.to_string())
            }
            DomainConfig::Polygon { vertices } => {
                DomainSpec::polygon(vertices.clone()).map_err(|e| e.to_string())
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapConfig {
    AffineDiagonal { scales: [f64; 2] },
    Dilation { factor: f64 },
    PerturbationField { field: FieldConfig, t: f64 },
}

impl MapConfig {
    pub fn build(&self) -> Result<MapSpec, String> {
        Ok(match self {
            MapConfig::AffineDiagonal { scales } => MapSpec::AffineDiagonal { scales: *scales },
            MapConfig::Dilation { factor } => MapSpec::Dilation { factor: *factor },
            MapConfig::PerturbationField { field, t } => MapSpec::PerturbationField {
                field: field.build()?,
                t: *t,
            },
        })
    }
}

#[derive(Debug, Deserialize, Clone)]
#[serde(untagged)]
pub enum FieldConfig {
    Named(String),
    Translation { dir: [f64; 2] },
}

impl FieldConfig {
    pub fn build(&self) -> Result<VectorField, String> {
        Ok(match self {
            FieldConfig::Named(name) => match name.as_str() {
                "translation" => VectorField::Translation { dir: [1.0, 0.0] },
                "dilation" => VectorField::Dilation,
                "rotation" => VectorField::Rotation,
                "radial_bump" => VectorField::RadialBump,
                other => return Err(format!("unknown field `{other}`")),
            },
            FieldConfig::Translation { dir } => VectorField::Translation { dir: *dir },
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub n_cells: Option<usize>,
    #[serde(default = "default_margin")]
    pub margin_cells: usize,
}

fn default_margin() -> usize {
    1
}

impl GridConfig {
    pub fn validate(&self) -> Result<(), String> {
        match (self.h, self.n_cells) {
            (Some(_), None) | (None, Some(_)) => Ok(()),
            _ => Err("grid must specify exactly one of `h` or `n_cells`".into()),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: String,
    #[serde(default)]
    pub svg: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

/// A scalar assertion evaluated against the experiment's summary metrics;
/// failures exit with code 2 and name the metric.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assertion {
    pub metric: String,
    pub op: AssertOp,
    pub value: f64,
}

#[derive(Debug, Deserialize, Clone, Copy)]
#[serde(rename_all = "snake_case")]
pub enum AssertOp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl AssertOp {
    pub fn eval(self, lhs: f64, rhs: f64) -> bool {
        match self {
            AssertOp::Lt => lhs < rhs,
            AssertOp::Le => lhs <= rhs,
            AssertOp::Gt => lhs > rhs,
            AssertOp::Ge => lhs >= rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            AssertOp::Lt => "<",
            AssertOp::Le => "<=",
            AssertOp::Gt => ">",
            AssertOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub kernel: KernelConfig,
    pub domain: DomainConfig,
    pub grid: GridConfig,
    pub output: OutputConfig,
    #[serde(default)]
    pub rayleigh_samples: usize,
    #[serde(default)]
    pub dump_operator: Option<String>,
    /// Override of the open interval the first eigenvalue must lie in;
    /// defaults to (0, 1).
    #[serde(default)]
    pub lambda1_bounds: Option<[f64; 2]>,
    #[serde(default)]
    pub assertions: Vec<Assertion>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    pub kernel: KernelConfig,
    pub domain: DomainConfig,
    pub n_list: Vec<usize>,
    pub output: OutputConfig,
    #[serde(default)]
    pub assertions: Vec<Assertion>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbConfig {
    pub kernel: KernelConfig,
    pub limit: DomainConfig,
    pub family: FamilyConfig,
    #[serde(default = "default_track")]
    pub track: usize,
    pub grid: GridConfig,
    pub output: OutputConfig,
    #[serde(default)]
    pub require_monotone_distances: bool,
    #[serde(default)]
    pub assertions: Vec<Assertion>,
}

fn default_track() -> usize {
    3
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum FamilyConfig {
    RoughN { rough_n: Vec<u32> },
    Domains { domains: Vec<LabeledDomain> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledDomain {
    pub label: String,
    pub domain: DomainConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeDerivativeConfig {
    #[serde(default)]
    pub mode: ShapeMode,
    pub kernel: KernelConfig,
    pub output: OutputConfig,
    // mode = derivative
    #[serde(default)]
    pub domain: Option<DomainConfig>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub fields: Vec<FieldConfig>,
    /// 1-based index into the magnitude-ordered spectrum.
    #[serde(default = "default_eigen_index")]
    pub eigen_index: usize,
    #[serde(default = "default_t_fd")]
    pub t_fd: f64,
    #[serde(default = "default_boundary_samples")]
    pub boundary_samples: usize,
    #[serde(default)]
    pub fd_route: FdRouteConfig,
    // mode = pullback-check
    #[serde(default)]
    pub base: Option<[[f64; 2]; 2]>,
    #[serde(default)]
    pub scales: Option<[f64; 2]>,
    #[serde(default = "default_leading")]
    pub leading: usize,
    // mode = stretch
    #[serde(default)]
    pub a_list: Vec<f64>,
    #[serde(default)]
    pub cells: Option<usize>,
    #[serde(default)]
    pub assertions: Vec<Assertion>,
}

fn default_eigen_index() -> usize {
    1
}

fn default_t_fd() -> f64 {
    1e-3
}

fn default_boundary_samples() -> usize {
    256
}

fn default_leading() -> usize {
    3
}

#[derive(Debug, Default, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeMode {
    #[default]
    Derivative,
    PullbackCheck,
    Stretch,
}

#[derive(Debug, Default, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum FdRouteConfig {
    #[default]
    Pullback,
    Rediscretize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaberKrahnConfig {
    pub kernel: KernelConfig,
    pub candidates: Vec<LabeledDomain>,
    #[serde(default = "default_cells")]
    pub cells: usize,
    pub output: OutputConfig,
    #[serde(default)]
    pub assertions: Vec<Assertion>,
}

fn default_cells() -> usize {
    64
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoBallsConfig {
    pub kernel: KernelConfig,
    pub radius: f64,
    pub separations: Vec<f64>,
    pub h: f64,
    pub output: OutputConfig,
    #[serde(default)]
    pub assertions: Vec<Assertion>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerforatedConfig {
    pub kernel: KernelConfig,
    pub base: [[f64; 2]; 2],
    pub hole_fraction: f64,
    #[serde(default)]
    pub hole_shape: HoleShapeConfig,
    pub eps_list: Vec<f64>,
    pub h: f64,
    pub output: OutputConfig,
    #[serde(default)]
    pub assertions: Vec<Assertion>,
}
