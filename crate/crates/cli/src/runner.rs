//! Experiment dispatch: build core objects from the validated config, run,
//! check invariants, and write the CSV/SVG artifacts atomically.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nlspec_core::domain::DomainSpec;
use nlspec_core::error::ExperimentError;
use nlspec_core::experiments as exp;
use nlspec_core::operator::{assemble, write_operator_dump, ContainerGrid};
use nlspec_core::report::{Csv, CsvField};
use nlspec_core::shape::{self, FdRoute, ShapeDerivativeOptions};
use nlspec_core::svg::{line_chart, Series};

use crate::config::*;

/// Errors mapped onto process exit codes: usage and configuration problems
/// exit 1, violated invariants and assertions exit 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Invariant { name: String, details: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Invariant { .. } => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Invariant { name, details } => {
                write!(f, "invariant `{name}` violated: {details}")
            }
        }
    }
}

fn from_experiment(e: ExperimentError) -> CliError {
    match e {
        ExperimentError::InvariantViolation { name, details } => CliError::Invariant {
            name: name.to_string(),
            details,
        },
        other => CliError::Config(other.to_string()),
    }
}

/// Outputs of one run, byte-deterministic for a fixed config.
struct RunArtifacts {
    csv: String,
    svg: Option<String>,
    metrics: BTreeMap<String, f64>,
}

/// Loads, validates, runs, and writes. This is the whole CLI behind argument
/// parsing.
pub fn run(config_path: &Path, out_dir: Option<&Path>) -> Result<(), CliError> {
    let text = fs::read_to_string(config_path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", config_path.display())))?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid config: {e}")))?;

    let artifacts = dispatch(&config)?;

    apply_assertions(&config, &artifacts.metrics)?;

    let out = config.output();
    write_atomic(&resolve(out_dir, &out.csv), artifacts.csv.as_bytes())?;
    if let Some(svg_path) = &out.svg {
        let svg = artifacts
            .svg
            .ok_or_else(|| CliError::Config("this command produces no plot".into()))?;
        write_atomic(&resolve(out_dir, svg_path), svg.as_bytes())?;
    }
    Ok(())
}

fn resolve(out_dir: Option<&Path>, path: &str) -> PathBuf {
    match out_dir {
        Some(dir) => dir.join(path),
        None => PathBuf::from(path),
    }
}

/// Writes through a temporary file in the destination directory followed by
/// a rename, so failures never leave partial artifacts.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|s| s.to_str()).unwrap_or("out")
    ));
    fs::write(&tmp, bytes)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path)
        .map_err(|e| CliError::Usage(format!("cannot rename into {}: {e}", path.display())))?;
    Ok(())
}

fn apply_assertions(
    config: &ExperimentConfig,
    metrics: &BTreeMap<String, f64>,
) -> Result<(), CliError> {
    let assertions = match config {
        ExperimentConfig::Spectrum(c) => &c.assertions,
        ExperimentConfig::Converge(c) => &c.assertions,
        ExperimentConfig::Perturb(c) => &c.assertions,
        ExperimentConfig::ShapeDerivative(c) => &c.assertions,
        ExperimentConfig::FaberKrahn(c) => &c.assertions,
        ExperimentConfig::TwoBalls(c) => &c.assertions,
        ExperimentConfig::Perforated(c) => &c.assertions,
    };
    for a in assertions {
        let value = metrics.get(&a.metric).ok_or_else(|| {
            CliError::Config(format!(
                "assertion references unknown metric `{}` (known: {})",
                a.metric,
                metrics.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        })?;
        if !a.op.eval(*value, a.value) {
            return Err(CliError::Invariant {
                name: format!("assertion_{}", a.metric),
                details: format!("{} = {} !{} {}", a.metric, value, a.op.symbol(), a.value),
            });
        }
    }
    Ok(())
}

fn grid_for(domains: &[&DomainSpec], grid: &GridConfig) -> Result<Arc<ContainerGrid>, CliError> {
    grid.validate().map_err(CliError::Config)?;
    Ok(Arc::new(match (grid.h, grid.n_cells) {
        (Some(h), None) => ContainerGrid::covering(domains, h, grid.margin_cells),
        (None, Some(cells)) => ContainerGrid::covering_with_cells(domains, cells, grid.margin_cells),
        _ => unreachable!(),
    }))
}

fn dispatch(config: &ExperimentConfig) -> Result<RunArtifacts, CliError> {
    match config {
        ExperimentConfig::Spectrum(c) => run_spectrum(c),
        ExperimentConfig::Converge(c) => run_converge(c),
        ExperimentConfig::Perturb(c) => run_perturb(c),
        ExperimentConfig::ShapeDerivative(c) => run_shape(c),
        ExperimentConfig::FaberKrahn(c) => run_faber_krahn(c),
        ExperimentConfig::TwoBalls(c) => run_two_balls(c),
        ExperimentConfig::Perforated(c) => run_perforated(c),
    }
}

fn run_spectrum(c: &SpectrumConfig) -> Result<RunArtifacts, CliError> {
    let kernel = c.kernel.build().map_err(CliError::Config)?;
    let domain = c.domain.build().map_err(CliError::Config)?;
    let grid = grid_for(&[&domain], &c.grid)?;
    let op = assemble(&kernel, &domain, grid).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(dump) = &c.dump_operator {
        let mut buf = Vec::new();
        write_operator_dump(&op, &mut buf)
            .map_err(|e| CliError::Usage(format!("cannot serialize operator dump: {e}")))?;
        write_atomic(Path::new(dump), &buf)?;
    }
    let report = exp::spectrum_experiment(&op, c.rayleigh_samples, c.output.seed)
        .map_err(from_experiment)?;
    exp::check_spectrum_invariants(&report).map_err(from_experiment)?;

    // Optional override of the unit-interval bound on lambda1 (the built-in
    // check above already enforced (0, 1)).
    if let Some([lo, hi]) = c.lambda1_bounds {
        let l1 = report.spectrum.lambda(0);
        if !(l1 > lo && l1 < hi) {
            return Err(CliError::Invariant {
                name: "lambda1_in_unit_interval".into(),
                details: format!("lambda1 = {l1} outside configured bounds ({lo}, {hi})"),
            });
        }
    }

    let s = &report.spectrum;
    let mut csv = Csv::new(&[
        "index",
        "mu",
        "lambda",
        "gap",
        "simple_flag",
        "trace_residual",
        "rayleigh_min_excess",
        "rayleigh_eigvec_residual",
    ]);
    for i in 0..s.len() {
        let (tr, rmin, rres) = if i == 0 {
            (
                CsvField::Float(report.trace_residual),
                report
                    .rayleigh
                    .as_ref()
                    .map(|r| CsvField::Float(r.min_excess))
                    .unwrap_or(CsvField::Empty),
                report
                    .rayleigh
                    .as_ref()
                    .map(|r| CsvField::Float(r.eigvec_residual))
                    .unwrap_or(CsvField::Empty),
            )
        } else {
            (CsvField::Empty, CsvField::Empty, CsvField::Empty)
        };
        csv.row(&[
            CsvField::Int((i + 1) as i64),
            CsvField::Float(s.mu(i)),
            CsvField::Float(s.lambda(i)),
            CsvField::Float(s.gaps()[i]),
            CsvField::Bool(s.is_simple(i)),
            tr,
            rmin,
            rres,
        ]);
    }

    let svg = line_chart(
        "spectrum |mu_i|",
        &[Series {
            label: "mu".into(),
            points: s
                .mus()
                .iter()
                .enumerate()
                .map(|(i, &m)| ((i + 1) as f64, m))
                .collect(),
        }],
    )
    .ok();

    let mut metrics = BTreeMap::new();
    metrics.insert("lambda1".into(), s.lambda(0));
    metrics.insert("mu1".into(), s.mu(0));
    metrics.insert("trace_residual".into(), report.trace_residual);
    metrics.insert("n_active".into(), report.n_active as f64);
    if let Some(r) = &report.rayleigh {
        metrics.insert("rayleigh_min_excess".into(), r.min_excess);
        metrics.insert("rayleigh_eigvec_residual".into(), r.eigvec_residual);
    }
    Ok(RunArtifacts {
        csv: csv.into_string(),
        svg,
        metrics,
    })
}

fn run_converge(c: &ConvergeConfig) -> Result<RunArtifacts, CliError> {
    let kernel = c.kernel.build().map_err(CliError::Config)?;
    let domain = c.domain.build().map_err(CliError::Config)?;
    let report = exp::grid_convergence(&kernel, &domain, &c.n_list).map_err(from_experiment)?;
    exp::check_convergence(&report).map_err(from_experiment)?;

    let mut csv = Csv::new(&["n", "lambda1", "diff", "order"]);
    for row in &report.rows {
        csv.row(&[
            CsvField::Int(row.n_cells as i64),
            CsvField::Float(row.lambda1),
            row.diff.map(CsvField::Float).unwrap_or(CsvField::Empty),
            row.order.map(CsvField::Float).unwrap_or(CsvField::Empty),
        ]);
    }
    let svg = line_chart(
        "lambda1 vs grid cells",
        &[Series {
            label: "lambda1".into(),
            points: report
                .rows
                .iter()
                .map(|r| (r.n_cells as f64, r.lambda1))
                .collect(),
        }],
    )
    .ok();

    let mut metrics = BTreeMap::new();
    let last = report.rows.last().unwrap();
    metrics.insert("lambda1_finest".into(), last.lambda1);
    if let Some(order) = last.order {
        metrics.insert("final_order".into(), order);
    }
    Ok(RunArtifacts {
        csv: csv.into_string(),
        svg,
        metrics,
    })
}

fn run_perturb(c: &PerturbConfig) -> Result<RunArtifacts, CliError> {
    let kernel = c.kernel.build().map_err(CliError::Config)?;
    let limit = c.limit.build().map_err(CliError::Config)?;
    let family: Vec<(String, DomainSpec)> = match &c.family {
        FamilyConfig::RoughN { rough_n } => rough_n
            .iter()
            .map(|&n| {
                DomainSpec::rough(n)
                    .map(|d| (format!("rough_{n}"), d))
                    .map_err(|e| CliError::Config(e.to_string()))
            })
            .collect::<Result<_, _>>()?,
        FamilyConfig::Domains { domains } => domains
            .iter()
            .map(|ld| {
                ld.domain
                    .build()
                    .map(|d| (ld.label.clone(), d))
                    .map_err(CliError::Config)
            })
            .collect::<Result<_, _>>()?,
    };
    let mut all: Vec<&DomainSpec> = vec![&limit];
    all.extend(family.iter().map(|(_, d)| d));
    let grid = grid_for(&all, &c.grid)?;
    let report =
        exp::continuity_sweep(&kernel, &limit, &family, c.track, grid).map_err(from_experiment)?;
    exp::check_perturb_invariants(&report).map_err(from_experiment)?;
    if c.require_monotone_distances {
        exp::check_monotone_lambda1_distances(&report).map_err(from_experiment)?;
    }

    let mut columns = vec![
        "label".to_string(),
        "symdiff".into(),
        "norm_diff".into(),
        "lipschitz_bound".into(),
        "e_h".into(),
        "lambda1".into(),
        "lambda1_distance".into(),
        "gap_collapsed".into(),
    ];
    for k in 0..report.track {
        columns.push(format!("mu_{}", k + 1));
        columns.push(format!("mu_dist_{}", k + 1));
    }
    let cols: Vec<&str> = columns.iter().map(|s| s.as_str()).collect();
    let mut csv = Csv::new(&cols);
    for m in &report.members {
        let mut fields = vec![
            CsvField::Str(&m.label),
            CsvField::Float(m.symdiff),
            CsvField::Float(m.norm_diff),
            CsvField::Float(m.lipschitz),
            CsvField::Float(report.e_h),
            CsvField::Float(m.lambdas[0]),
            CsvField::Float((m.lambdas[0] - report.limit_lambda1).abs()),
            CsvField::Bool(m.gap_collapsed),
        ];
        for k in 0..report.track {
            fields.push(CsvField::Float(m.mus[k]));
            fields.push(CsvField::Float(m.mu_distances[k]));
        }
        csv.row(&fields);
    }

    let svg = line_chart(
        "lambda1 distance to limit",
        &[Series {
            label: "|lambda1 - limit|".into(),
            points: report
                .members
                .iter()
                .enumerate()
                .map(|(i, m)| ((i + 1) as f64, (m.lambdas[0] - report.limit_lambda1).abs()))
                .collect(),
        }],
    )
    .ok();

    let mut metrics = BTreeMap::new();
    metrics.insert("limit_lambda1".into(), report.limit_lambda1);
    metrics.insert("e_h".into(), report.e_h);
    let first = (report.members.first().unwrap().lambdas[0] - report.limit_lambda1).abs();
    let last = (report.members.last().unwrap().lambdas[0] - report.limit_lambda1).abs();
    metrics.insert("first_lambda1_distance".into(), first);
    metrics.insert("last_lambda1_distance".into(), last);
    metrics.insert(
        "distance_ratio".into(),
        if first > 0.0 { last / first } else { 0.0 },
    );
    Ok(RunArtifacts {
        csv: csv.into_string(),
        svg,
        metrics,
    })
}

fn run_shape(c: &ShapeDerivativeConfig) -> Result<RunArtifacts, CliError> {
    let kernel = c.kernel.build().map_err(CliError::Config)?;
    match c.mode {
        ShapeMode::Derivative => {
            let domain = c
                .domain
                .as_ref()
                .ok_or_else(|| CliError::Config("mode `derivative` needs `domain`".into()))?
                .build()
                .map_err(CliError::Config)?;
            let grid_cfg = c
                .grid
                .as_ref()
                .ok_or_else(|| CliError::Config("mode `derivative` needs `grid`".into()))?;
            if c.fields.is_empty() {
                return Err(CliError::Config("mode `derivative` needs `fields`".into()));
            }
            if c.eigen_index == 0 {
                return Err(CliError::Config("eigen_index is 1-based".into()));
            }
            let grid = grid_for(&[&domain], grid_cfg)?;
            let opts = ShapeDerivativeOptions {
                t_fd: c.t_fd,
                boundary_samples: c.boundary_samples,
                fd_route: match c.fd_route {
                    FdRouteConfig::Pullback => FdRoute::Pullback,
                    FdRouteConfig::Rediscretize => FdRoute::Rediscretize,
                },
            };
            let mut csv = Csv::new(&[
                "field_name",
                "lambda0",
                "boundary_integral",
                "dlambda_formula",
                "dlambda_fd",
                "t",
                "rel_error",
                "abs_error",
                "dmu_formula",
                "dlambda_fd_forward",
                "dlambda_fd_backward",
                "fd_route",
                "boundary_samples",
            ]);
            let mut metrics = BTreeMap::new();
            for field_cfg in &c.fields {
                let field = field_cfg.build().map_err(CliError::Config)?;
                let rep = shape::shape_derivative(
                    &kernel,
                    &domain,
                    c.eigen_index - 1,
                    field,
                    grid.clone(),
                    opts,
                )
                .map_err(|e| CliError::Config(e.to_string()))?;
                csv.row(&[
                    CsvField::Str(&rep.field_name),
                    CsvField::Float(rep.lambda0),
                    CsvField::Float(rep.boundary_integral),
                    CsvField::Float(rep.dlambda_formula),
                    CsvField::Float(rep.dlambda_fd),
                    CsvField::Float(rep.t_used),
                    CsvField::Float(rep.rel_error),
                    CsvField::Float(rep.abs_error),
                    CsvField::Float(rep.dmu_formula),
                    CsvField::Float(rep.dlambda_fd_forward),
                    CsvField::Float(rep.dlambda_fd_backward),
                    CsvField::Str(rep.fd_route.name()),
                    CsvField::Int(rep.boundary_samples as i64),
                ]);
                metrics.insert(format!("{}_rel_error", rep.field_name), rep.rel_error);
                metrics.insert(format!("{}_abs_error", rep.field_name), rep.abs_error);
                metrics.insert(format!("{}_formula", rep.field_name), rep.dlambda_formula);
                metrics.insert(format!("{}_fd", rep.field_name), rep.dlambda_fd);
            }
            Ok(RunArtifacts {
                csv: csv.into_string(),
                svg: None,
                metrics,
            })
        }
        ShapeMode::PullbackCheck => {
            let base = c
                .base
                .ok_or_else(|| CliError::Config("mode `pullback-check` needs `base`".into()))?;
            let scales = c
                .scales
                .ok_or_else(|| CliError::Config("mode `pullback-check` needs `scales`".into()))?;
            let cells = c
                .cells
                .ok_or_else(|| CliError::Config("mode `pullback-check` needs `cells`".into()))?;
            let report = exp::pullback_invariance_check(
                &kernel,
                [base[0][0], base[1][0]],
                [base[0][1], base[1][1]],
                scales,
                cells,
                c.leading,
            )
            .map_err(from_experiment)?;
            exp::check_pullback_invariance(&report, 1e-3).map_err(from_experiment)?;

            let mut csv = Csv::new(&[
                "index",
                "mu_pullback",
                "mu_direct",
                "rel_diff",
                "weighted_residual",
                "unweighted_residual_affine",
                "unweighted_residual_nonconst",
            ]);
            for i in 0..report.mus_pullback.len() {
                let (w, ua, un) = if i == 0 {
                    (
                        CsvField::Float(report.weighted_residual),
                        CsvField::Float(report.unweighted_residual_affine),
                        CsvField::Float(report.unweighted_residual_nonconst),
                    )
                } else {
                    (CsvField::Empty, CsvField::Empty, CsvField::Empty)
                };
                csv.row(&[
                    CsvField::Int((i + 1) as i64),
                    CsvField::Float(report.mus_pullback[i]),
                    CsvField::Float(report.mus_direct[i]),
                    CsvField::Float(report.rel_diffs[i]),
                    w,
                    ua,
                    un,
                ]);
            }
            let mut metrics = BTreeMap::new();
            metrics.insert(
                "max_rel_diff".into(),
                report.rel_diffs.iter().cloned().fold(0.0, f64::max),
            );
            metrics.insert("weighted_residual".into(), report.weighted_residual);
            metrics.insert(
                "unweighted_residual_nonconst".into(),
                report.unweighted_residual_nonconst,
            );
            Ok(RunArtifacts {
                csv: csv.into_string(),
                svg: None,
                metrics,
            })
        }
        ShapeMode::Stretch => {
            if c.a_list.is_empty() {
                return Err(CliError::Config("mode `stretch` needs `a_list`".into()));
            }
            let cells = c
                .cells
                .ok_or_else(|| CliError::Config("mode `stretch` needs `cells`".into()))?;
            let report =
                exp::stretched_rectangle_sweep(&kernel, &c.a_list, cells).map_err(from_experiment)?;
            exp::check_stretch(&report).map_err(from_experiment)?;

            let mut csv = Csv::new(&["a", "lambda1", "mu1"]);
            for row in &report.rows {
                csv.row(&[
                    CsvField::Float(row.a),
                    CsvField::Float(row.lambda1),
                    CsvField::Float(row.mu1),
                ]);
            }
            let svg = line_chart(
                "lambda1 of the stretched rectangle",
                &[Series {
                    label: "lambda1".into(),
                    points: report.rows.iter().map(|r| (r.a, r.lambda1)).collect(),
                }],
            )
            .ok();
            let mut metrics = BTreeMap::new();
            metrics.insert("lambda1_first".into(), report.rows.first().unwrap().lambda1);
            metrics.insert("lambda1_last".into(), report.rows.last().unwrap().lambda1);
            metrics.insert(
                "degeneration_gap".into(),
                report.rows.last().unwrap().lambda1 - report.rows.first().unwrap().lambda1,
            );
            Ok(RunArtifacts {
                csv: csv.into_string(),
                svg,
                metrics,
            })
        }
    }
}

fn run_faber_krahn(c: &FaberKrahnConfig) -> Result<RunArtifacts, CliError> {
    let kernel = c.kernel.build().map_err(CliError::Config)?;
    let candidates: Vec<(String, DomainSpec)> = c
        .candidates
        .iter()
        .map(|ld| {
            ld.domain
                .build()
                .map(|d| (ld.label.clone(), d))
                .map_err(CliError::Config)
        })
        .collect::<Result<_, _>>()?;
    let report = exp::faber_krahn_check(&kernel, &candidates, c.cells).map_err(from_experiment)?;
    exp::check_faber_krahn(&report).map_err(from_experiment)?;

    let mut csv = Csv::new(&["label", "measure", "n_active", "lambda1", "e_h"]);
    for row in &report.rows {
        csv.row(&[
            CsvField::Str(&row.label),
            CsvField::Float(row.measure),
            CsvField::Int(row.n_active as i64),
            CsvField::Float(row.lambda1),
            CsvField::Float(row.e_h),
        ]);
    }
    let svg = line_chart(
        "lambda1 per candidate",
        &[Series {
            label: "lambda1".into(),
            points: report
                .rows
                .iter()
                .enumerate()
                .map(|(i, r)| (i as f64, r.lambda1))
                .collect(),
        }],
    )
    .ok();
    let mut metrics = BTreeMap::new();
    metrics.insert("ball_lambda1".into(), report.rows[0].lambda1);
    for row in &report.rows[1..] {
        metrics.insert(format!("{}_lambda1", row.label), row.lambda1);
    }
    Ok(RunArtifacts {
        csv: csv.into_string(),
        svg,
        metrics,
    })
}

fn run_two_balls(c: &TwoBallsConfig) -> Result<RunArtifacts, CliError> {
    let kernel = c.kernel.build().map_err(CliError::Config)?;
    let report = exp::hong_krahn_szego_check(&kernel, c.radius, &c.separations, c.h)
        .map_err(from_experiment)?;
    exp::check_two_balls(&report, kernel.support_radius()).map_err(from_experiment)?;

    let mut csv = Csv::new(&[
        "label",
        "separation",
        "lambda1",
        "lambda2",
        "decoupling_residual",
        "leading_pair_simple",
    ]);
    csv.row(&[
        CsvField::Str("single_ball"),
        CsvField::Empty,
        CsvField::Float(report.lambda1_single),
        CsvField::Empty,
        CsvField::Empty,
        CsvField::Empty,
    ]);
    csv.row(&[
        CsvField::Str("double_measure_ball"),
        CsvField::Empty,
        CsvField::Empty,
        CsvField::Float(report.lambda2_double_measure_ball),
        CsvField::Empty,
        CsvField::Empty,
    ]);
    for row in &report.rows {
        csv.row(&[
            CsvField::Str("union"),
            CsvField::Float(row.separation),
            CsvField::Float(row.lambda1),
            CsvField::Float(row.lambda2),
            CsvField::Float(row.decoupling_residual),
            CsvField::Bool(row.leading_pair_simple),
        ]);
    }
    let svg = line_chart(
        "lambda2 vs separation",
        &[Series {
            label: "lambda2".into(),
            points: report
                .rows
                .iter()
                .map(|r| (r.separation, r.lambda2))
                .collect(),
        }],
    )
    .ok();
    let mut metrics = BTreeMap::new();
    metrics.insert("lambda1_single".into(), report.lambda1_single);
    metrics.insert(
        "max_decoupling_residual".into(),
        report
            .rows
            .iter()
            .map(|r| r.decoupling_residual)
            .fold(0.0, f64::max),
    );
    Ok(RunArtifacts {
        csv: csv.into_string(),
        svg,
        metrics,
    })
}

fn run_perforated(c: &PerforatedConfig) -> Result<RunArtifacts, CliError> {
    let kernel = c.kernel.build().map_err(CliError::Config)?;
    let report = exp::perforated_limit(
        &kernel,
        [c.base[0][0], c.base[1][0]],
        [c.base[0][1], c.base[1][1]],
        c.hole_fraction,
        c.hole_shape.into(),
        &c.eps_list,
        c.h,
    )
    .map_err(from_experiment)?;
    exp::check_perforated(&report, c.hole_fraction).map_err(from_experiment)?;

    let mut csv = Csv::new(&[
        "record",
        "eps",
        "lambda1",
        "chi",
        "lambda1_solid",
        "beta1_hat",
        "e_h",
        "variant",
        "beta1_predicted",
        "matched_index",
        "residual",
        "eigenfunction_positive",
        "matches",
    ]);
    for (eps, l1) in report.eps.iter().zip(&report.lambda1_eps) {
        csv.row(&[
            CsvField::Str("eps"),
            CsvField::Float(*eps),
            CsvField::Float(*l1),
            CsvField::Empty,
            CsvField::Empty,
            CsvField::Empty,
            CsvField::Empty,
            CsvField::Empty,
            CsvField::Empty,
            CsvField::Empty,
            CsvField::Empty,
            CsvField::Empty,
            CsvField::Empty,
        ]);
    }
    csv.row(&[
        CsvField::Str("summary"),
        CsvField::Empty,
        CsvField::Empty,
        CsvField::Float(report.chi),
        CsvField::Float(report.lambda1_solid),
        CsvField::Float(report.beta1_hat),
        CsvField::Float(report.e_h),
        CsvField::Empty,
        CsvField::Empty,
        CsvField::Empty,
        CsvField::Empty,
        CsvField::Empty,
        CsvField::Empty,
    ]);
    for cand in &report.candidates {
        csv.row(&[
            CsvField::Str("candidate"),
            CsvField::Empty,
            CsvField::Empty,
            CsvField::Empty,
            CsvField::Empty,
            CsvField::Empty,
            CsvField::Empty,
            CsvField::Str(&cand.variant),
            CsvField::Float(cand.beta1_predicted),
            CsvField::Int(cand.matched_index as i64),
            CsvField::Float(cand.residual),
            CsvField::Bool(cand.eigenfunction_positive),
            CsvField::Bool(cand.matches),
        ]);
    }
    let svg = line_chart(
        "lambda1 vs eps",
        &[Series {
            label: "lambda1(eps)".into(),
            points: report
                .eps
                .iter()
                .zip(&report.lambda1_eps)
                .map(|(&e, &l)| (e, l))
                .collect(),
        }],
    )
    .ok();
    let mut metrics = BTreeMap::new();
    metrics.insert("beta1_hat".into(), report.beta1_hat);
    metrics.insert("lambda1_solid".into(), report.lambda1_solid);
    metrics.insert("chi".into(), report.chi);
    metrics.insert("e_h".into(), report.e_h);
    Ok(RunArtifacts {
        csv: csv.into_string(),
        svg,
        metrics,
    })
}
