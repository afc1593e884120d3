use bernergy::cmfun::{eval_by_representation_branch, Branch};
use bernergy::energy::{difference, inner_product_ell, is_experimental, moment_report};
use bernergy::sampling::{constraint_rows, random_points, stream_rng, MomentConstraint};
use bernergy::spaces::gram;
use bernergy::stats::permutation_test;
use bernergy::verify::{
    check_cpd, check_psd, check_schoenberg, check_triangle, probe_strong_negative_type, VerificationReport,
    SPECTRAL_TOL,
};
use bernergy::{CenteredKernel, CndKernel, Point, PsiFunction, SampleSet, Space};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::input::{read_pointcloud, PointCloud};
use crate::{BranchArg, Check, DataArgs, DistArgs, PsiEvalArgs, TestArgs, VerifyArgs};

/// Default absolute slack of the triangle check.
const TRIANGLE_TOL: f64 = 1e-12;

fn center_cloud(cloud: PointCloud) -> Result<PointCloud, CliError> {
    if cloud.points[0].space() != Space::Euclidean {
        return Err(CliError::Usage("--center needs Euclidean data".into()));
    }
    let n = cloud.points.len();
    let w = cloud.weights.clone().unwrap_or_else(|| vec![1.0; n]);
    let mass: f64 = w.iter().sum();
    if mass == 0.0 {
        return Err(CliError::Usage("--center needs nonzero total weight".into()));
    }
    let dim = cloud.points[0].dim();
    let mean: Vec<f64> = (0..dim)
        .map(|k| cloud.points.iter().zip(&w).map(|(p, wi)| wi * p.coords()[k]).sum::<f64>() / mass)
        .collect();
    let points = cloud
        .points
        .iter()
        .map(|p| Point::euclidean(p.coords().iter().zip(&mean).map(|(c, m)| c - m).collect()))
        .collect::<bernergy::Result<_>>()?;
    Ok(PointCloud {
        points,
        weights: cloud.weights,
    })
}

fn load(args: &DataArgs, kernel: &CndKernel) -> Result<(PointCloud, PointCloud), CliError> {
    let space = kernel.space();
    let mut x = read_pointcloud(&args.x, space, args.weights)?;
    let mut y = read_pointcloud(&args.y, space, args.weights)?;
    if args.center {
        x = center_cloud(x)?;
        y = center_cloud(y)?;
    }
    Ok((x, y))
}

fn experimental_notes(kernel: &CndKernel, psi: &PsiFunction, centered: bool) -> Vec<String> {
    let mut notes = Vec::new();
    if is_experimental(kernel, psi) {
        notes.push(format!("l = {} with the {} kernel is experimental", psi.ell(), kernel.name()));
    }
    if centered {
        notes.push("samples were mean-centered separately; this estimator is experimental".into());
    }
    notes
}

pub fn dist(args: &DistArgs) -> Result<Value, CliError> {
    let kernel = CndKernel::parse(&args.data.kernel)?;
    let psi = PsiFunction::parse(&args.data.psi)?;
    let (x, y) = load(&args.data, &kernel)?;
    let eta = difference(&x.measure()?, &y.measure()?)?;
    let center = CenteredKernel::at_base_point(kernel, x.points[0].dim())?;
    let moments = moment_report(&eta, psi.ell(), &center)?;
    let statistic = inner_product_ell(&eta, &eta, &kernel, &psi, args.tol)?;
    let notes = experimental_notes(&kernel, &psi, args.data.center);
    Ok(json!({
        "statistic": statistic,
        "sqrt_statistic": statistic.max(0.0).sqrt(),
        "kernel": kernel.name(),
        "psi": psi.name(),
        "ell": psi.ell(),
        "constraint_report": {
            "satisfied": true,
            "tolerance": args.tol,
            "moments": moments,
        },
        "experimental": !notes.is_empty(),
        "notes": notes,
    }))
}

pub fn test(args: &TestArgs) -> Result<Value, CliError> {
    if args.data.weights {
        return Err(CliError::Usage("the permutation test works on unweighted samples".into()));
    }
    let kernel = CndKernel::parse(&args.data.kernel)?;
    let psi = PsiFunction::parse(&args.data.psi)?;
    let (x, y) = load(&args.data, &kernel)?;
    let x = SampleSet::new(x.points, args.data.x.display().to_string())?;
    let y = SampleSet::new(y.points, args.data.y.display().to_string())?;
    let result = permutation_test(&x, &y, &kernel, &psi, args.permutations, args.seed)?;
    let notes = experimental_notes(&kernel, &psi, args.data.center);
    let mut value = json!(result);
    value["experimental"] = json!(!notes.is_empty());
    value["notes"] = json!(notes);
    Ok(value)
}

/// Metric used by the triangle check: the square root of the squared Euclidean kernel,
/// the kernel itself otherwise.
fn base_metric(kernel: &CndKernel, x: &Point, y: &Point) -> bernergy::Result<f64> {
    let v = kernel.eval(x, y)?;
    Ok(match kernel {
        CndKernel::EuclideanSquared { .. } => v.sqrt(),
        _ => v,
    })
}

fn run_check(
    check: Check,
    args: &VerifyArgs,
    kernel: &CndKernel,
    points: &[Point],
) -> Result<VerificationReport, CliError> {
    let psi = |default: &str| PsiFunction::parse(args.psi.as_deref().unwrap_or(default));
    let dim = points[0].dim();
    let report = match check {
        Check::Psd => {
            let center = CenteredKernel::at_base_point(*kernel, dim)?;
            let mut r = check_psd(&center.gram(points)?, args.tol.unwrap_or(SPECTRAL_TOL))?;
            r.notes.push(format!("matrix: centered kernel of -{} at its base point", kernel.name()));
            r
        }
        Check::Cpd => {
            let psi = psi("linear")?;
            let constraint = match (psi.ell(), kernel) {
                (1, _) => MomentConstraint::Mass,
                (l, CndKernel::EuclideanSquared { .. }) => MomentConstraint::Moments(l - 1),
                (l, _) => {
                    return Err(bernergy::Error::Contract(format!(
                        "cpd at l = {l} needs the squared Euclidean kernel"
                    ))
                    .into())
                }
            };
            let rows = constraint_rows(points, constraint)?;
            let sign = psi.cm_sign();
            let g = gram(kernel, points)?.map(psi.name(), |v| sign * psi.eval_unchecked(v));
            let mut r = check_cpd(&g, &rows, args.tol.unwrap_or(SPECTRAL_TOL))?;
            r.notes.push(format!("matrix: {sign} * {}({})", psi.name(), kernel.name()));
            r
        }
        Check::Schoenberg => check_schoenberg(kernel, points, &args.r_grid, args.tol.unwrap_or(SPECTRAL_TOL))?,
        Check::Triangle => {
            let psi = psi("linear")?;
            let metric = |x: &Point, y: &Point| psi.eval(base_metric(kernel, x, y)?);
            let mut r = check_triangle(metric, points, args.triples, args.seed, args.tol.unwrap_or(TRIANGLE_TOL))?;
            r.notes.push(format!("metric: {} of the {} distance", psi.name(), kernel.name()));
            r
        }
        Check::Sntype => probe_strong_negative_type(kernel, &psi("sqrt")?, args.dim, args.trials, args.seed)?,
    };
    Ok(report)
}

pub fn verify(args: &VerifyArgs) -> Result<Value, CliError> {
    let kernel = CndKernel::parse(&args.kernel)?;
    let (points, source) = match &args.input {
        Some(path) => (
            read_pointcloud(path, kernel.space(), false)?.points,
            path.display().to_string(),
        ),
        None => {
            if args.n == 0 || args.dim == 0 {
                return Err(CliError::Usage("--n and --dim must be positive".into()));
            }
            let mut rng = stream_rng(args.seed, 0);
            (random_points(&mut rng, kernel.space(), args.dim, args.n)?, "generated".to_string())
        }
    };
    let reports = args
        .check
        .iter()
        .map(|&c| run_check(c, args, &kernel, &points))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(json!({
        "kernel": kernel.name(),
        "points": { "source": source, "n": points.len(), "dim": points[0].dim() },
        "pass": reports.iter().all(|r| r.pass),
        "reports": reports,
    }))
}

/// 13 points, log-spaced from 1e-3 to 1e3.
fn default_grid() -> Vec<f64> {
    (0..13).map(|k| 10f64.powf(-3.0 + 0.5 * f64::from(k))).collect()
}

pub fn psi_eval(args: &PsiEvalArgs) -> Result<Value, CliError> {
    let psi = PsiFunction::parse(&args.psi)?;
    if args.representation && !psi.has_representation() {
        return Err(bernergy::Error::Contract(format!(
            "`{}` is available in closed form only",
            psi.name()
        ))
        .into());
    }
    let grid = if args.t.is_empty() { default_grid() } else { args.t.clone() };
    let branch = match args.branch {
        BranchArg::Auto if psi.smooth_at_zero() => Branch::Smooth,
        BranchArg::Auto | BranchArg::Full => Branch::Full,
        BranchArg::Smooth => Branch::Smooth,
    };
    let rows = grid
        .iter()
        .map(|&t| {
            let closed = psi.eval(t)?;
            if !psi.has_representation() {
                return Ok(json!({ "t": t, "closed": closed }));
            }
            let rep = eval_by_representation_branch(&psi, t, args.tol, branch)?;
            Ok(json!({
                "t": t,
                "closed": closed,
                "by_representation": rep.value,
                "abs_err": (rep.value - closed).abs(),
                "error_estimate": rep.error_estimate,
            }))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(json!({
        "psi": psi.name(),
        "ell": psi.ell(),
        "cm_sign": psi.cm_sign(),
        "representation": psi.has_representation(),
        "branch": psi.has_representation().then_some(branch),
        "rows": rows,
    }))
}
