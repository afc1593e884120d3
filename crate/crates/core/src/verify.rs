//! Numerical certificates on finite samples: spectra of Gram matrices, conditional
//! positive definiteness, the triangle inequality and strong-negative-type probes.
//!
//! Each check returns a [`VerificationReport`]. `worst_margin` is signed so that the check
//! passes exactly when it is nonnegative.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cmfun::PsiFunction;
use crate::energy::{inner_product_ell, DiscreteSignedMeasure, CONSTRAINT_TOL};
use crate::error::{Error, Result};
use crate::gram::GramMatrix;
use crate::sampling::{random_measure, stream_rng, MomentConstraint};
use crate::spaces::{gram, CndKernel, Point, Space};

/// Default relative eigenvalue tolerance.
pub const SPECTRAL_TOL: f64 = 1e-10;

/// Evidence for the outcome of a check.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// Smallest eigenvalue of the (projected) matrix and a unit coefficient vector
    /// attaining it.
    Eigen {
        min_eigenvalue: f64,
        threshold: f64,
        vector: Vec<f64>,
    },
    /// Worst Gram matrix over a grid of Schoenberg parameters.
    Schoenberg {
        r: f64,
        min_eigenvalue: f64,
        threshold: f64,
    },
    /// Triple with the largest `D(x, y) - D(x, z) - D(z, y)`.
    Triple {
        indices: [usize; 3],
        d_xy: f64,
        d_xz: f64,
        d_zy: f64,
        violation: f64,
    },
    /// Measure with the smallest normalized energy.
    Measure {
        trial: usize,
        value: f64,
        threshold: f64,
        atoms: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub check: String,
    pub pass: bool,
    /// Nonnegative exactly when `pass` holds.
    pub worst_margin: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub seed: Option<u64>,
    pub witness: Witness,
    pub notes: Vec<String>,
}

fn min_eigen(m: DMatrix<f64>) -> (f64, Vec<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (f64::INFINITY, Vec::new());
    }
    let eig = SymmetricEigen::new(m);
    let (k, min) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bk, bv), (k, &v)| if v < bv { (k, v) } else { (bk, bv) });
    (min, eig.eigenvectors.column(k).iter().copied().collect())
}

fn spectral_threshold(g: &GramMatrix, tol: f64) -> f64 {
    -tol * g.n() as f64 * g.max_abs()
}

/// Positive semidefiniteness: pass iff the smallest eigenvalue is at least
/// `-tol * n * max|G_ij|`.
pub fn check_psd(g: &GramMatrix, tol: f64) -> Result<VerificationReport> {
    if !g.is_finite() {
        return Err(Error::NonFinite("gram matrix"));
    }
    let threshold = spectral_threshold(g, tol);
    let (min_eigenvalue, vector) = min_eigen(g.to_dmatrix());
    let margin = min_eigenvalue - threshold;
    Ok(VerificationReport {
        check: "psd".into(),
        pass: margin >= 0.0,
        worst_margin: margin,
        tolerance: tol,
        samples: g.n(),
        seed: None,
        witness: Witness::Eigen {
            min_eigenvalue,
            threshold,
            vector,
        },
        notes: Vec::new(),
    })
}

/// Conditional positive definiteness relative to the rows of `constraints` (each row
/// holds `p_k(x_1), .., p_k(x_n)`).
///
/// The Gram matrix is restricted to an orthonormal basis of `{c : sum_i c_i p_k(x_i) = 0}`
/// and checked for positive semidefiniteness with the same threshold as [`check_psd`].
/// Rank-deficient constraints are noted in the report and the actual rank is used.
pub fn check_cpd(g: &GramMatrix, constraints: &[Vec<f64>], tol: f64) -> Result<VerificationReport> {
    if constraints.is_empty() {
        let mut report = check_psd(g, tol)?;
        report.check = "cpd".into();
        return Ok(report);
    }
    if !g.is_finite() {
        return Err(Error::NonFinite("gram matrix"));
    }
    let n = g.n();
    let m = constraints.len();
    if let Some(row) = constraints.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: row.len(),
        });
    }
    if m >= n {
        return Err(Error::InvalidInput(format!(
            "need fewer constraints than points, got {m} for {n} points"
        )));
    }
    let c = DMatrix::from_fn(m, n, |i, j| constraints[i][j]);
    let svd = c.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max();
    let cutoff = 1e-12 * smax * n as f64;
    let kept: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > cutoff)
        .collect();
    let mut notes = Vec::new();
    if kept.len() < m {
        notes.push(format!(
            "constraint matrix is rank deficient: rank {} of {m}",
            kept.len()
        ));
    }
    // null space = eigenvectors of I - V_r V_r^T with eigenvalue 1
    let mut projector = DMatrix::<f64>::identity(n, n);
    for &k in &kept {
        let v = v_t.row(k).transpose();
        projector -= &v * v.transpose();
    }
    let eig = SymmetricEigen::new(projector);
    let null_cols: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > 0.5).collect();
    let basis = DMatrix::from_fn(n, null_cols.len(), |i, j| eig.eigenvectors[(i, null_cols[j])]);
    let projected = basis.transpose() * g.to_dmatrix() * &basis;
    let projected = (&projected + projected.transpose()) * 0.5;
    let (min_eigenvalue, u) = min_eigen(projected);
    let vector: Vec<f64> = if u.is_empty() {
        Vec::new()
    } else {
        (&basis * nalgebra::DVector::from_vec(u)).iter().copied().collect()
    };
    let threshold = spectral_threshold(g, tol);
    let margin = min_eigenvalue - threshold;
    Ok(VerificationReport {
        check: "cpd".into(),
        pass: margin >= 0.0,
        worst_margin: margin,
        tolerance: tol,
        samples: n,
        seed: None,
        witness: Witness::Eigen {
            min_eigenvalue,
            threshold,
            vector,
        },
        notes,
    })
}

/// Positive semidefiniteness of `exp(-r gamma)` for every `r` in `r_grid`.
pub fn check_schoenberg(
    kernel: &CndKernel,
    points: &[Point],
    r_grid: &[f64],
    tol: f64,
) -> Result<VerificationReport> {
    if r_grid.is_empty() || r_grid.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(Error::Domain("schoenberg grid needs positive finite r values".into()));
    }
    let g = gram(kernel, points)?;
    let mut worst: Option<(f64, f64, f64, f64)> = None;
    for &r in r_grid {
        let report = check_psd(&g.map(&format!("exp(-{r} {})", kernel.name()), |v| (-r * v).exp()), tol)?;
        if let Witness::Eigen {
            min_eigenvalue,
            threshold,
            ..
        } = report.witness
        {
            if worst.is_none_or(|w| report.worst_margin < w.0) {
                worst = Some((report.worst_margin, r, min_eigenvalue, threshold));
            }
        }
    }
    let (margin, r, min_eigenvalue, threshold) = worst.expect("grid is nonempty");
    Ok(VerificationReport {
        check: "schoenberg".into(),
        pass: margin >= 0.0,
        worst_margin: margin,
        tolerance: tol,
        samples: points.len(),
        seed: None,
        witness: Witness::Schoenberg {
            r,
            min_eigenvalue,
            threshold,
        },
        notes: vec![format!("r grid: {r_grid:?}")],
    })
}

/// Triangle inequality `D(x, y) <= D(x, z) + D(z, y)` on `n_triples` index triples drawn
/// uniformly (with replacement) from `points`. Pass iff the largest violation is at most
/// `tol`.
pub fn check_triangle<F>(
    metric: F,
    points: &[Point],
    n_triples: usize,
    seed: u64,
    tol: f64,
) -> Result<VerificationReport>
where
    F: Fn(&Point, &Point) -> Result<f64> + Sync,
{
    if n_triples == 0 {
        return Err(Error::InvalidInput("need at least one triple".into()));
    }
    if points.is_empty() {
        return Err(Error::InvalidInput("need at least one point".into()));
    }
    let d = GramMatrix::try_from_fn(points, "metric", metric)?;
    if !d.is_finite() {
        return Err(Error::NonFinite("metric value"));
    }
    let n = points.len();
    let mut rng = stream_rng(seed, 0);
    let mut best = ([0usize; 3], f64::NEG_INFINITY);
    for _ in 0..n_triples {
        let (x, y, z) = (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n));
        let violation = d.get(x, y) - d.get(x, z) - d.get(z, y);
        if violation > best.1 {
            best = ([x, y, z], violation);
        }
    }
    let [x, y, z] = best.0;
    Ok(VerificationReport {
        check: "triangle".into(),
        pass: best.1 <= tol,
        worst_margin: tol - best.1,
        tolerance: tol,
        samples: n_triples,
        seed: Some(seed),
        witness: Witness::Triple {
            indices: best.0,
            d_xy: d.get(x, y),
            d_xz: d.get(x, z),
            d_zy: d.get(z, y),
            violation: best.1,
        },
        notes: vec![format!("{n} points")],
    })
}

/// Relative threshold for strict positivity in [`probe_strong_negative_type`].
pub const STRICT_POSITIVITY_TOL: f64 = 1e-12;

/// Monte Carlo probe of strict positivity of `I(eta, eta)` over random nonzero measures in
/// the level-`l` constraint set.
///
/// Trial `i` uses stream `i` of `seed`. Odd trials additionally cancel the ambient
/// first moments, which is where polynomial functions degenerate. A trial passes when
/// `I(eta, eta) > 1e-12 * TV^2 * max|psi(gamma(x_i, x_j))|`.
pub fn probe_strong_negative_type(
    kernel: &CndKernel,
    psi: &PsiFunction,
    dim: usize,
    n_trials: usize,
    seed: u64,
) -> Result<VerificationReport> {
    if n_trials == 0 {
        return Err(Error::InvalidInput("need at least one trial".into()));
    }
    let space = kernel.space();
    let (standard, degenerate) = match psi.ell() {
        1 => (MomentConstraint::Mass, MomentConstraint::AmbientMean),
        l @ 2..=3 => {
            if !matches!(kernel, CndKernel::EuclideanSquared { .. }) {
                return Err(Error::Contract(format!(
                    "probing l = {l} needs the squared Euclidean kernel"
                )));
            }
            (MomentConstraint::Moments(l - 1), MomentConstraint::Moments(l - 1))
        }
        l => return Err(Error::Domain(format!("unsupported l = {l}"))),
    };
    let trials: Vec<(f64, f64, DiscreteSignedMeasure)> = (0..n_trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let constraint = if i % 2 == 1 { degenerate } else { standard };
            let eta = random_measure(&mut rng, space, dim, constraint)?;
            let value = inner_product_ell(&eta, &eta, kernel, psi, CONSTRAINT_TOL)?;
            let g = gram(kernel, eta.atoms())?;
            let psi_max = g.as_slice().iter().map(|v| psi.eval_unchecked(*v).abs()).fold(0.0, f64::max);
            let tv = eta.total_variation();
            Ok((value, STRICT_POSITIVITY_TOL * tv * tv * psi_max, eta))
        })
        .collect::<Result<_>>()?;
    let (worst, (value, threshold, eta)) = trials
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 .0 - a.1 .1).total_cmp(&(b.1 .0 - b.1 .1)))
        .expect("at least one trial");
    let min_value = trials.iter().map(|t| t.0).fold(f64::INFINITY, f64::min);
    let mut notes = vec![format!("minimum I(eta, eta) over trials: {min_value:e}")];
    if psi.is_polynomial() {
        notes.push("psi is a polynomial; strict positivity is not expected".into());
    }
    if space == Space::Sphere {
        notes.push("random probes cannot certify strong negative type on the sphere".into());
    }
    Ok(VerificationReport {
        check: "sntype".into(),
        pass: trials.iter().all(|(v, t, _)| v > t),
        worst_margin: value - threshold,
        tolerance: STRICT_POSITIVITY_TOL,
        samples: n_trials,
        seed: Some(seed),
        witness: Witness::Measure {
            trial: worst,
            value: *value,
            threshold: *threshold,
            atoms: eta.atoms().iter().map(Point::ambient).collect(),
            weights: eta.weights().to_vec(),
        },
        notes,
    })
}
