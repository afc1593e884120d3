//! Discrete signed measures and the energy semi-inner products built on `psi(gamma)`.
//!
//! For a CND kernel `gamma` and a function `psi` with `s * psi` in `CM_l`, the pairing
//!
//! ```text
//! I(mu, nu) = s * sum_i sum_j mu_i nu_j psi(gamma(x_i, y_j))
//! ```
//!
//! is positive semidefinite on measures whose first `l` moment conditions vanish. For a
//! Bernstein `psi` (`l = 1`, `s = -1`) this is the familiar energy distance pairing and
//! only the total mass has to vanish.
//!
//! Double sums are split by rows, rows are evaluated in parallel and the row totals are
//! added in index order, so results are independent of the thread count.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::cmfun::PsiFunction;
use crate::error::{Error, Result};
use crate::gram::GramMatrix;
use crate::spaces::{
    arccosh_coefficients, check_homogeneous, lorentz_product_minus_one, CndKernel, Point, Space,
};

/// Relative slack for the exact equalities (mass, moments) that inner products require.
pub const CONSTRAINT_TOL: f64 = 1e-10;

/// Highest supported `l`.
pub const MAX_ELL: u32 = 3;

/// A finitely supported signed measure `sum_i w_i delta_{x_i}`.
///
/// Duplicate atoms are kept as given. The empty measure is the zero measure and is
/// compatible with every space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteSignedMeasure {
    atoms: Vec<Point>,
    weights: Vec<f64>,
}

impl DiscreteSignedMeasure {
    pub fn new(atoms: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: atoms.len(),
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("measure weights"));
        }
        check_homogeneous(&atoms)?;
        Ok(DiscreteSignedMeasure { atoms, weights })
    }

    pub fn zero() -> Self {
        DiscreteSignedMeasure {
            atoms: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn dirac(x: Point) -> Self {
        DiscreteSignedMeasure {
            atoms: vec![x],
            weights: vec![1.0],
        }
    }

    /// Empirical probability measure `(1/n) sum delta_{x_i}`.
    pub fn empirical(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("empirical measure needs at least one point".into()));
        }
        let w = 1.0 / points.len() as f64;
        let n = points.len();
        Self::new(points, vec![w; n])
    }

    pub fn atoms(&self) -> &[Point] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn space(&self) -> Option<Space> {
        self.atoms.first().map(Point::space)
    }

    pub fn dim(&self) -> Option<usize> {
        self.atoms.first().map(Point::dim)
    }

    /// Total mass `eta(X) = sum w_i`.
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn total_variation(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }

    /// Largest Euclidean norm of an atom's ambient coordinates.
    pub fn max_norm(&self) -> f64 {
        self.atoms
            .iter()
            .map(|p| p.ambient().iter().map(|c| c * c).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Vector mean `v = sum w_i x_i` (Euclidean only).
    pub fn vector_mean(&self) -> Result<Vec<f64>> {
        tensor_moment(self, 1)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        DiscreteSignedMeasure {
            atoms: self.atoms.clone(),
            weights: self.weights.iter().map(|w| w * factor).collect(),
        }
    }

    /// `self + other`, concatenating atoms.
    pub fn sum(&self, other: &Self) -> Result<Self> {
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        let mut weights = self.weights.clone();
        weights.extend_from_slice(&other.weights);
        Self::new(atoms, weights)
    }
}

/// `P - Q`: atoms concatenated, weights `(w_P, -w_Q)`.
pub fn difference(p: &DiscreteSignedMeasure, q: &DiscreteSignedMeasure) -> Result<DiscreteSignedMeasure> {
    p.sum(&q.scaled(-1.0))
}

// ---------------------------------------------------------------------------
// double sums

/// `sum_i sum_j mu_i nu_j f(x_i, y_j)` with a fixed reduction order.
pub fn double_sum<F>(mu: &DiscreteSignedMeasure, nu: &DiscreteSignedMeasure, f: F) -> Result<f64>
where
    F: Fn(&Point, &Point) -> Result<f64> + Sync,
{
    let rows: Vec<f64> = mu
        .atoms
        .par_iter()
        .zip(mu.weights.par_iter())
        .map(|(x, &wx)| {
            let mut acc = 0.0;
            for (y, &wy) in nu.atoms.iter().zip(&nu.weights) {
                acc += wy * f(x, y)?;
            }
            Ok(wx * acc)
        })
        .collect::<Result<_>>()?;
    Ok(rows.iter().sum())
}

/// `sum_ij w_i w_j G_ij` for the measure's own Gram matrix.
fn quadratic_form(weights: &[f64], g: &GramMatrix) -> f64 {
    g.bilinear(weights, weights)
}

fn check_kernel_space(kernel: &CndKernel, mu: &DiscreteSignedMeasure) -> Result<()> {
    match mu.atoms.first() {
        Some(p) => kernel.check_point(p),
        None => Ok(()),
    }
}

fn check_same_space(mu: &DiscreteSignedMeasure, nu: &DiscreteSignedMeasure) -> Result<()> {
    if let (Some(a), Some(b)) = (mu.atoms.first(), nu.atoms.first()) {
        check_homogeneous(&[a.clone(), b.clone()])?;
    }
    Ok(())
}

fn check_mass_zero(mu: &DiscreteSignedMeasure, tol: f64) -> Result<()> {
    let mass = mu.mass();
    let tolerance = tol * mu.total_variation();
    if mass.abs() > tolerance {
        return Err(Error::Constraint {
            condition: "mass zero (j = 0)".into(),
            magnitude: mass.abs(),
            tolerance,
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// moments

/// Nondecreasing index tuples of length `order` over `0..dim`, in lexicographic order.
/// There are `C(dim + order - 1, order)` of them.
pub fn symmetric_indices(dim: usize, order: u32) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..order {
        let mut next = Vec::new();
        for idx in &out {
            let start = idx.last().copied().unwrap_or(0);
            for k in start..dim {
                let mut v = idx.clone();
                v.push(k);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// Symmetric tensor moment `int x^{(x) order} d mu` in packed storage (one entry per
/// [`symmetric_indices`] tuple). Euclidean measures only.
pub fn tensor_moment(mu: &DiscreteSignedMeasure, order: u32) -> Result<Vec<f64>> {
    match mu.space() {
        None => return Ok(Vec::new()),
        Some(Space::Euclidean) => {}
        Some(other) => {
            return Err(Error::SpaceMismatch {
                expected: Space::Euclidean.name(),
                found: other.name(),
            })
        }
    }
    let dim = mu.dim().unwrap_or(0);
    Ok(symmetric_indices(dim, order)
        .iter()
        .map(|idx| {
            mu.atoms
                .iter()
                .zip(&mu.weights)
                .map(|(x, w)| w * idx.iter().map(|&k| x.coords()[k]).product::<f64>())
                .sum()
        })
        .collect())
}

/// Moments of a measure relevant to the level-`l` constraint set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub mass: f64,
    /// Vector mean; `None` outside Euclidean space.
    pub mean: Option<Vec<f64>>,
    /// Packed symmetric tensors of orders `2..l-1`; `None` outside Euclidean space.
    pub tensors: Option<Vec<Vec<f64>>>,
    /// `sum_ij w_i w_j K(x_i, x_j)^j` for `j = 1..l-1`, with `K` the centered kernel.
    pub centered_powers: Vec<f64>,
}

pub fn moment_report(
    mu: &DiscreteSignedMeasure,
    ell: u32,
    center: &CenteredKernel,
) -> Result<MomentReport> {
    if ell == 0 || ell > MAX_ELL {
        return Err(Error::Domain(format!("l must be in 1..={MAX_ELL}, got {ell}")));
    }
    let euclidean = mu.space().is_none_or(|s| s == Space::Euclidean);
    let (mean, tensors) = if euclidean {
        let tensors = (2..ell).map(|j| tensor_moment(mu, j)).collect::<Result<Vec<_>>>()?;
        (Some(tensor_moment(mu, 1)?), Some(tensors))
    } else {
        (None, None)
    };
    let centered_powers = if mu.is_empty() || ell == 1 {
        vec![0.0; ell as usize - 1]
    } else {
        let k = center.gram(mu.atoms())?;
        (1..ell)
            .map(|j| quadratic_form(&mu.weights, &k.map("power", |v| v.powi(j as i32))))
            .collect()
    };
    Ok(MomentReport {
        mass: mu.mass(),
        mean,
        tensors,
        centered_powers,
    })
}

/// Check the level-`l` constraints: mass zero and `sum w_i w_j K(x_i, x_j)^j = 0` for
/// `j = 1..l-1`. For the squared Euclidean kernel the equivalent linear conditions
/// (vanishing tensor moments up to order `l - 1`) are checked instead, with slack
/// `tol * TV * max|x|^j`.
pub fn constraint_check(
    mu: &DiscreteSignedMeasure,
    ell: u32,
    kernel: &CndKernel,
    tol: f64,
) -> Result<()> {
    if ell == 0 || ell > MAX_ELL {
        return Err(Error::Domain(format!("l must be in 1..={MAX_ELL}, got {ell}")));
    }
    if mu.is_empty() {
        return Ok(());
    }
    check_mass_zero(mu, tol)?;
    if ell == 1 {
        return Ok(());
    }
    let tv = mu.total_variation();
    if let CndKernel::EuclideanSquared { .. } = kernel {
        let radius = mu.max_norm();
        for j in 1..ell {
            let moment = tensor_moment(mu, j)?;
            let magnitude = moment.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
            let tolerance = tol * tv * radius.powi(j as i32);
            if magnitude > tolerance {
                return Err(Error::Constraint {
                    condition: format!("vanishing moments of order j = {j}"),
                    magnitude,
                    tolerance,
                });
            }
        }
        return Ok(());
    }
    let center = CenteredKernel::at_base_point(*kernel, mu.dim().unwrap_or(1))?;
    let k = center.gram(mu.atoms())?;
    let kmax = k.max_abs();
    for j in 1..ell {
        let value = quadratic_form(&mu.weights, &k.map("power", |v| v.powi(j as i32)));
        let tolerance = tol * tv * tv * kmax.powi(j as i32);
        if value.abs() > tolerance {
            return Err(Error::Constraint {
                condition: format!("centered moment j = {j}"),
                magnitude: value.abs(),
                tolerance,
            });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// inner products

/// Energy pairing for `l = 1`: `s * sum_ij mu_i nu_j psi(gamma(x_i, y_j))`, which is
/// `-sum psi(gamma)` for a Bernstein `psi`. Both measures must have zero mass.
pub fn inner_product_bernstein(
    mu: &DiscreteSignedMeasure,
    nu: &DiscreteSignedMeasure,
    kernel: &CndKernel,
    psi: &PsiFunction,
) -> Result<f64> {
    if psi.ell() != 1 {
        return Err(Error::Contract(format!(
            "`{}` has l = {}; the Bernstein pairing needs l = 1",
            psi.name(),
            psi.ell()
        )));
    }
    inner_product_ell(mu, nu, kernel, psi, CONSTRAINT_TOL)
}

/// Level-`l` pairing `s * sum_ij mu_i nu_j psi(gamma(x_i, y_j))` where `s * psi` is in
/// `CM_l`. Both measures must pass [`constraint_check`] at `l = psi.ell()`.
///
/// Results for `l >= 2` on non-Euclidean kernels are experimental; see
/// [`is_experimental`].
pub fn inner_product_ell(
    mu: &DiscreteSignedMeasure,
    nu: &DiscreteSignedMeasure,
    kernel: &CndKernel,
    psi: &PsiFunction,
    tol: f64,
) -> Result<f64> {
    check_kernel_space(kernel, mu)?;
    check_kernel_space(kernel, nu)?;
    check_same_space(mu, nu)?;
    constraint_check(mu, psi.ell(), kernel, tol)?;
    constraint_check(nu, psi.ell(), kernel, tol)?;
    pairing(mu, nu, kernel, psi)
}

/// The signed double sum without constraint checks.
pub fn pairing(
    mu: &DiscreteSignedMeasure,
    nu: &DiscreteSignedMeasure,
    kernel: &CndKernel,
    psi: &PsiFunction,
) -> Result<f64> {
    let sum = double_sum(mu, nu, |x, y| Ok(psi.eval_unchecked(kernel.eval(x, y)?)))?;
    Ok(psi.cm_sign() * sum)
}

/// True when the level-`l` machinery is applied outside the setting where it is known to
/// hold (`l >= 2` with a non-Euclidean kernel).
pub fn is_experimental(kernel: &CndKernel, psi: &PsiFunction) -> bool {
    psi.ell() >= 2 && kernel.space() != Space::Euclidean
}

/// Result of [`inner_product_hyperbolic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HyperbolicInnerProduct {
    /// `-sum_ij mu_i nu_j d_H(x_i, y_j)`.
    pub value: f64,
    /// `sum_{k=1}^{K} c_k sum_ij mu_i nu_j [x_i, y_j]^{-2k}`.
    pub series_lower_bound: f64,
    /// `-sum_ij mu_i nu_j log [x_i, y_j]`.
    pub log_term: f64,
    /// `c_{K+1} sum_ij |mu_i nu_j| [x_i, y_j]^{-2(K+1)}`.
    pub first_omitted: f64,
    pub terms: usize,
}

/// Default number of series terms for [`inner_product_hyperbolic`].
pub const HYPERBOLIC_SERIES_TERMS: usize = 12;

/// Hyperbolic-distance pairing with its series decomposition.
///
/// With `d_H = log 2 + log[x, y] - sum_k c_k [x, y]^{-2k}` and zero total mass,
/// `value = log_term + sum_k c_k sum [x,y]^{-2k}`; every series term is nonnegative for
/// `mu = nu`, so a truncated sum is a lower bound for `value - log_term`.
pub fn inner_product_hyperbolic(
    mu: &DiscreteSignedMeasure,
    nu: &DiscreteSignedMeasure,
    terms: usize,
) -> Result<HyperbolicInnerProduct> {
    for m in [mu, nu] {
        if let Some(s) = m.space() {
            if s != Space::Hyperboloid {
                return Err(Error::SpaceMismatch {
                    expected: Space::Hyperboloid.name(),
                    found: s.name(),
                });
            }
        }
        check_mass_zero(m, CONSTRAINT_TOL)?;
    }
    check_same_space(mu, nu)?;
    let coeffs = arccosh_coefficients(terms + 1);
    let value = -double_sum(mu, nu, |x, y| CndKernel::Hyperbolic.eval(x, y))?;
    let log_term = -double_sum(mu, nu, |x, y| Ok(lorentz_product_minus_one(x, y)?.max(0.0).ln_1p()))?;
    let series_lower_bound = double_sum(mu, nu, |x, y| {
        let inv_sq = (1.0 + lorentz_product_minus_one(x, y)?.max(0.0)).powi(-2);
        let mut power = 1.0;
        let mut acc = 0.0;
        for c in &coeffs[..terms] {
            power *= inv_sq;
            acc += c * power;
        }
        Ok(acc)
    })?;
    let abs_mu = mu.abs_weights();
    let abs_nu = nu.abs_weights();
    let first_omitted = coeffs[terms]
        * double_sum(&abs_mu, &abs_nu, |x, y| {
            Ok((1.0 + lorentz_product_minus_one(x, y)?.max(0.0)).powi(-2 * (terms as i32 + 1)))
        })?;
    Ok(HyperbolicInnerProduct {
        value,
        series_lower_bound,
        log_term,
        first_omitted,
        terms,
    })
}

impl DiscreteSignedMeasure {
    fn abs_weights(&self) -> Self {
        DiscreteSignedMeasure {
            atoms: self.atoms.clone(),
            weights: self.weights.iter().map(|w| w.abs()).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// centering

/// A real-valued function on points, used as a Lagrange basis element.
pub type BasisFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// The centered kernel
///
/// ```text
/// K(x, y) = -gamma(x, y) + sum_k p_k(x) gamma(xi_k, y) + sum_l p_l(y) gamma(x, xi_l)
///           - sum_kl p_k(x) p_l(y) gamma(xi_k, xi_l)
/// ```
///
/// for a Lagrange basis `p_i(xi_j) = delta_ij` of a finite-dimensional function space.
/// `gamma` is conditionally negative definite relative to that space exactly when `K`
/// is positive semidefinite.
#[derive(Clone)]
pub struct CenteredKernel {
    base: CndKernel,
    points: Vec<Point>,
    basis: Vec<BasisFn>,
    /// `gamma(xi_k, xi_l)`, row-major.
    gamma_xi: Vec<f64>,
}

impl fmt::Debug for CenteredKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CenteredKernel")
            .field("base", &self.base)
            .field("points", &self.points)
            .field("basis_len", &self.basis.len())
            .finish()
    }
}

const LAGRANGE_TOL: f64 = 1e-10;

impl CenteredKernel {
    /// Build from basis points and functions; fails with [`Error::DegenerateBasis`] if
    /// `|p_i(xi_j) - delta_ij| > 1e-10` for some pair.
    pub fn new(base: CndKernel, points: Vec<Point>, basis: Vec<BasisFn>) -> Result<Self> {
        if points.len() != basis.len() || points.is_empty() {
            return Err(Error::InvalidInput(format!(
                "need matching nonempty basis points and functions, got {} and {}",
                points.len(),
                basis.len()
            )));
        }
        check_homogeneous(&points)?;
        base.check_point(&points[0])?;
        for (i, p) in basis.iter().enumerate() {
            for (j, xi) in points.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                let deviation = (p(xi) - target).abs();
                if !(deviation <= LAGRANGE_TOL) {
                    return Err(Error::DegenerateBasis { i, j, deviation });
                }
            }
        }
        let m = points.len();
        let mut gamma_xi = vec![0.0; m * m];
        for k in 0..m {
            for l in 0..m {
                gamma_xi[k * m + l] = base.eval(&points[k], &points[l])?;
            }
        }
        Ok(CenteredKernel {
            base,
            points,
            basis,
            gamma_xi,
        })
    }

    /// Constants, with the single basis point `xi`.
    pub fn constant(base: CndKernel, xi: Point) -> Result<Self> {
        Self::new(base, vec![xi], vec![Arc::new(|_: &Point| 1.0)])
    }

    /// Constants at the kernel's [`CndKernel::base_point`].
    pub fn at_base_point(base: CndKernel, dim: usize) -> Result<Self> {
        Self::constant(base, base.base_point(dim)?)
    }

    /// Affine functions `span{1, x_1, .., x_d}` on Euclidean space with `d + 1` basis
    /// points; the Lagrange basis is obtained by inverting the Vandermonde-type matrix.
    pub fn affine(base: CndKernel, points: Vec<Point>) -> Result<Self> {
        let m = points.len();
        check_homogeneous(&points)?;
        let d = points.first().map_or(0, Point::dim);
        if m != d + 1 {
            return Err(Error::InvalidInput(format!(
                "affine basis in dimension {d} needs {} points, got {m}",
                d + 1
            )));
        }
        let a = DMatrix::from_fn(m, m, |j, c| if c == 0 { 1.0 } else { points[j].coords()[c - 1] });
        let inv = a.try_inverse().ok_or(Error::DegenerateBasis {
            i: 0,
            j: 0,
            deviation: f64::INFINITY,
        })?;
        let basis: Vec<BasisFn> = (0..m)
            .map(|i| {
                let col: Vec<f64> = inv.column(i).iter().copied().collect();
                Arc::new(move |x: &Point| {
                    col[0] + x.coords().iter().zip(&col[1..]).map(|(v, c)| v * c).sum::<f64>()
                }) as BasisFn
            })
            .collect();
        Self::new(base, points, basis)
    }

    pub fn base(&self) -> &CndKernel {
        &self.base
    }

    pub fn basis_points(&self) -> &[Point] {
        &self.points
    }

    /// `(p_1(x), .., p_m(x))`.
    pub fn basis_values(&self, x: &Point) -> Vec<f64> {
        self.basis.iter().map(|p| p(x)).collect()
    }

    fn gamma_to_basis(&self, x: &Point) -> Result<Vec<f64>> {
        self.points.iter().map(|xi| self.base.eval(xi, x)).collect()
    }

    fn eval_parts(&self, x: (&Point, &[f64], &[f64]), y: (&Point, &[f64], &[f64])) -> Result<f64> {
        let (xp, px, gx) = x;
        let (yp, py, gy) = y;
        let m = self.points.len();
        let mut value = -self.base.eval(xp, yp)?;
        for k in 0..m {
            value += px[k] * gy[k] + py[k] * gx[k];
            let row = &self.gamma_xi[k * m..(k + 1) * m];
            value -= px[k] * row.iter().zip(py).map(|(g, p)| g * p).sum::<f64>();
        }
        Ok(value)
    }

    /// `K(x, y)` (the centered form of `-gamma`).
    pub fn eval(&self, x: &Point, y: &Point) -> Result<f64> {
        let (px, py) = (self.basis_values(x), self.basis_values(y));
        let (gx, gy) = (self.gamma_to_basis(x)?, self.gamma_to_basis(y)?);
        self.eval_parts((x, &px, &gx), (y, &py, &gy))
    }

    /// Gram matrix of `K` on `points`.
    pub fn gram(&self, points: &[Point]) -> Result<GramMatrix> {
        if let Some(p) = points.first() {
            self.base.check_point(p)?;
        }
        let basis_vals: Vec<Vec<f64>> = points.iter().map(|x| self.basis_values(x)).collect();
        let gammas: Vec<Vec<f64>> = points.iter().map(|x| self.gamma_to_basis(x)).collect::<Result<_>>()?;
        GramMatrix::try_from_index_fn(points, &format!("centered {}", self.base.name()), |i, j| {
            self.eval_parts(
                (&points[i], &basis_vals[i], &gammas[i]),
                (&points[j], &basis_vals[j], &gammas[j]),
            )
        })
    }
}

/// Both sides of `-sum w_i w_j gamma = sum w_i w_j K` for a measure that annihilates
/// the basis space.
pub fn energy_equals_centered_mmd(
    eta: &DiscreteSignedMeasure,
    center: &CenteredKernel,
) -> Result<(f64, f64)> {
    if eta.is_empty() {
        return Ok((0.0, 0.0));
    }
    let tv = eta.total_variation();
    for (k, p) in center.basis.iter().enumerate() {
        let pairing: f64 = eta.atoms.iter().zip(&eta.weights).map(|(x, w)| w * p(x)).sum();
        let scale = eta.atoms.iter().map(|x| p(x).abs()).fold(0.0, f64::max);
        let tolerance = CONSTRAINT_TOL * tv * scale.max(1.0);
        if pairing.abs() > tolerance {
            return Err(Error::Constraint {
                condition: format!("annihilates basis function p_{k}"),
                magnitude: pairing.abs(),
                tolerance,
            });
        }
    }
    let lhs = -double_sum(eta, eta, |x, y| center.base.eval(x, y))?;
    let k = center.gram(eta.atoms())?;
    let rhs = quadratic_form(&eta.weights, &k);
    Ok((lhs, rhs))
}

// ---------------------------------------------------------------------------
// even powers

/// Coefficients `C(n, 2l) C(2l, l) 2^{n-2l}` for `l = 0..=n/2`.
pub fn even_power_coefficients(n: u32) -> Vec<f64> {
    let binom = |a: u32, b: u32| -> f64 { (0..b).map(|i| f64::from(a - i) / f64::from(i + 1)).product() };
    (0..=n / 2)
        .map(|l| binom(n, 2 * l) * binom(2 * l, l) * 2f64.powi((n - 2 * l) as i32))
        .collect()
}

/// Both sides of the even-power expansion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvenPowerIdentity {
    /// `(-1)^n sum w_i w_j |x_i - x_j|^{2n}`.
    pub lhs: f64,
    /// `sum_l coef_l sum w_i w_j <x_i, x_j>^{n-2l} |x_i|^{2l} |x_j|^{2l}`.
    pub rhs: f64,
    /// `sum w_i w_j |x_i - x_j|^{2m}` for `m = 0..n-1`.
    pub lower_powers: Vec<f64>,
    /// `TV^2 (2 max|x|)^{2n}`, the natural magnitude of `lhs`.
    pub scale: f64,
}

/// Evaluate the expansion of `(-1)^n |x - y|^{2n}` for a Euclidean measure whose
/// inner-product moments `sum w_i w_j <x_i, x_j>^k` vanish for `k < n`.
pub fn even_power_identity(mu: &DiscreteSignedMeasure, n: u32) -> Result<EvenPowerIdentity> {
    if n == 0 {
        return Err(Error::Domain("even power identity needs n >= 1".into()));
    }
    if let Some(s) = mu.space() {
        if s != Space::Euclidean {
            return Err(Error::SpaceMismatch {
                expected: Space::Euclidean.name(),
                found: s.name(),
            });
        }
    }
    let dot = |x: &Point, y: &Point| -> f64 { x.coords().iter().zip(y.coords()).map(|(a, b)| a * b).sum() };
    let tv = mu.total_variation();
    let radius = mu.max_norm();
    for k in 0..n {
        let value = double_sum(mu, mu, |x, y| Ok(dot(x, y).powi(k as i32)))?;
        let tolerance = CONSTRAINT_TOL * tv * tv * radius.powi(2 * k as i32);
        if value.abs() > tolerance {
            return Err(Error::Constraint {
                condition: format!("inner-product moment k = {k}"),
                magnitude: value.abs(),
                tolerance,
            });
        }
    }
    let dist_sq = |x: &Point, y: &Point| -> f64 {
        x.coords().iter().zip(y.coords()).map(|(a, b)| (a - b) * (a - b)).sum()
    };
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let lhs = sign * double_sum(mu, mu, |x, y| Ok(dist_sq(x, y).powi(n as i32)))?;
    let coeffs = even_power_coefficients(n);
    let rhs = double_sum(mu, mu, |x, y| {
        let (a, bx, by) = (dot(x, y), x.norm_sq(), y.norm_sq());
        Ok(coeffs
            .iter()
            .enumerate()
            .map(|(l, c)| c * a.powi((n as usize - 2 * l) as i32) * (bx * by).powi(l as i32))
            .sum())
    })?;
    let lower_powers = (0..n)
        .map(|m| double_sum(mu, mu, |x, y| Ok(dist_sq(x, y).powi(m as i32))))
        .collect::<Result<_>>()?;
    Ok(EvenPowerIdentity {
        lhs,
        rhs,
        lower_powers,
        scale: tv * tv * (2.0 * radius).powi(2 * n as i32),
    })
}

// ---------------------------------------------------------------------------
// constructions

/// `eta_t = t mu - t mu(X) delta_0 - (delta_{t v} - delta_{-t v}) / 2` with `v` the vector
/// mean of `mu`; `eta_t` has zero mass and zero mean. Terms whose weight or offset is
/// exactly zero are omitted, so a balanced mean-zero `mu` maps to `t mu`.
pub fn mean_cancel_augment(mu: &DiscreteSignedMeasure, t: f64) -> Result<DiscreteSignedMeasure> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("t must be finite and positive, got {t}")));
    }
    let dim = mu
        .dim()
        .ok_or_else(|| Error::InvalidInput("cannot augment the empty measure".into()))?;
    let v = mu.vector_mean()?;
    let mut out = mu.scaled(t);
    let mass = mu.mass();
    if mass != 0.0 {
        out = out.sum(&DiscreteSignedMeasure::new(
            vec![Point::euclidean(vec![0.0; dim])?],
            vec![-t * mass],
        )?)?;
    }
    if v.iter().any(|c| *c != 0.0) {
        let plus: Vec<f64> = v.iter().map(|c| t * c).collect();
        let minus: Vec<f64> = v.iter().map(|c| -t * c).collect();
        out = out.sum(&DiscreteSignedMeasure::new(
            vec![Point::euclidean(plus)?, Point::euclidean(minus)?],
            vec![-0.5, 0.5],
        )?)?;
    }
    Ok(out)
}

/// `psi(gamma(x, y))` as a metric. `psi` must be a sublinear Bernstein function with
/// `psi(0) = 0`, and `gamma` must itself be a metric.
pub fn psi_metric(x: &Point, y: &Point, kernel: &CndKernel, psi: &PsiFunction) -> Result<f64> {
    if !psi.is_bernstein() || psi.eval_unchecked(0.0) != 0.0 || !psi.sublinear() {
        return Err(Error::Contract(format!(
            "`{}` is not a sublinear Bernstein function vanishing at 0",
            psi.name()
        )));
    }
    if !kernel.is_metric() {
        return Err(Error::Contract(format!("kernel `{}` is not a metric", kernel.name())));
    }
    Ok(psi.eval_unchecked(kernel.eval(x, y)?))
}
