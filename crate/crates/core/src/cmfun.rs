//! Bernstein and `CM_l` functions: closed forms, integral representations and the
//! quadrature that evaluates them.
//!
//! A function `phi` is in `CM_l` when `(-1)^l phi^(l)` is completely monotone on
//! `(0, inf)`. Such a function has the representation
//!
//! ```text
//! phi(t) = int_(0,inf) (e^{-tr} - e_l(r) w_l(rt)) / r^l  d lambda(r) + sum_{k<=l} a_k t^k
//! ```
//!
//! with `w_l(s) = sum_{j<l} (-s)^j / j!` and `e_l(s) = e^{-s} sum_{j<l} s^j / j!`. When
//! `phi` is additionally `l - 1` times continuously differentiable at `0` the factor
//! `e_l(r)` can be dropped (the "smooth" branch), with coefficients `b_k`.
//!
//! Each [`PsiFunction`] stores the function `psi` itself together with a sign `s` such
//! that `s * psi` is the `CM_l` element. For a Bernstein function such as `sqrt`,
//! `s = -1`. The inner products in [`crate::energy`] apply the sign; this module only
//! reproduces `psi`.

use std::fmt;

use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, MAX_INTERVALS};

// ---------------------------------------------------------------------------
// integrand helpers

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `w_l(s) = sum_{j<l} (-1)^j s^j / j!`; identically zero for `l = 0`.
pub fn omega(ell: u32, s: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for j in 0..ell {
        if j > 0 {
            term *= -s / f64::from(j);
        }
        sum += term;
    }
    sum
}

/// `e_l(s) = e^{-s} sum_{j<l} s^j / j!`.
pub fn e_ell(ell: u32, s: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for j in 0..ell {
        if j > 0 {
            term *= s / f64::from(j);
        }
        sum += term;
    }
    (-s).exp() * sum
}

/// `e^{-s} - w_l(s)`, accurate for small `s` where the difference cancels.
pub fn exp_remainder(ell: u32, s: f64) -> f64 {
    if ell == 0 {
        return (-s).exp();
    }
    if ell == 1 {
        return (-s).exp_m1();
    }
    if s < 1.0 {
        // tail of the exponential series, starting at (-s)^l / l!
        let mut term = (-s).powi(ell as i32) / factorial(ell);
        let mut sum = term;
        let mut j = ell;
        while term.abs() > 1e-18 * sum.abs() && j < ell + 40 {
            j += 1;
            term *= -s / f64::from(j);
            sum += term;
        }
        sum
    } else {
        (-s).exp() - omega(ell, s)
    }
}

/// `1 - e_l(r) = e^{-r} sum_{j>=l} r^j / j!`, the probability that a Poisson(r) variable
/// is at least `l`.
pub fn one_minus_e_ell(ell: u32, r: f64) -> f64 {
    if ell == 0 {
        return 1.0;
    }
    if r < f64::from(ell) + 1.0 {
        let mut term = r.powi(ell as i32) / factorial(ell);
        let mut sum = term;
        let mut j = ell;
        while term > 1e-18 * sum && j < ell + 200 {
            j += 1;
            term *= r / f64::from(j);
            sum += term;
        }
        (-r).exp() * sum
    } else {
        1.0 - e_ell(ell, r)
    }
}

/// Truncation envelope `r^l (1 + t^l) min{1, r^{-l}}`.
pub fn change_envelope(ell: u32, r: f64, t: f64) -> f64 {
    let l = ell as i32;
    r.powi(l) * (1.0 + t.powi(l)) * 1.0_f64.min(r.powi(-l))
}

/// A constant `M` with `|e^{-rt} - e_l(r) w_l(rt)| <= M * change_envelope(l, r, t)` for
/// all `r > 0`, `t >= 0`.
///
/// For `r <= 1` the Taylor remainders give `(1 + sum_{j<l} 1/j!) / l!`; for `r >= 1`
/// each `e_l(r) r^j` is bounded by `sum_{i<l} (i+j)^{i+j} e^{-(i+j)} / i!`.
pub fn envelope_constant(ell: u32) -> f64 {
    let small = (1.0 + (0..ell).map(|j| 1.0 / factorial(j)).sum::<f64>()) / factorial(ell);
    let sup_power_exp = |p: u32| {
        if p == 0 {
            1.0
        } else {
            let p = f64::from(p);
            p.powf(p) * (-p).exp()
        }
    };
    let large = 1.0
        + (0..ell)
            .map(|j| {
                let c_j: f64 = (0..ell).map(|i| sup_power_exp(i + j) / factorial(i)).sum();
                c_j / factorial(j)
            })
            .sum::<f64>();
    small.max(large)
}

// ---------------------------------------------------------------------------
// densities

/// Density `coeff * r^power * e^{-decay r}` of the representing measure on `(0, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevyDensity {
    pub coeff: f64,
    pub power: f64,
    pub decay: f64,
}

impl LevyDensity {
    pub fn eval(&self, r: f64) -> f64 {
        if self.coeff == 0.0 {
            return 0.0;
        }
        self.coeff * r.powf(self.power) * (-self.decay * r).exp()
    }

    /// Upper bound for `int_R^inf r^extra_power * density(r) dr`, `R >= 1`.
    fn upper_tail_bound(&self, extra_power: f64, big_r: f64) -> f64 {
        if self.coeff == 0.0 {
            return 0.0;
        }
        let p = self.power + extra_power;
        let mut bound = f64::INFINITY;
        if p < -1.0 {
            bound = big_r.powf(p + 1.0) / (-p - 1.0);
        }
        if self.decay > 0.0 && big_r >= 2.0 * p.max(0.0) / self.decay {
            // r^p e^{-k r} <= R^p e^{-k R / 2} e^{-k r / 2} once r^p e^{-k r/2} decreases
            bound = bound.min(2.0 / self.decay * big_r.powf(p) * (-self.decay * big_r).exp());
        }
        self.coeff.abs() * bound
    }

    /// Numerical value of `int min{1, r^{-l}} density(r) dr`.
    pub fn integrability_mass(&self, ell: u32) -> Result<f64> {
        let lower = integrate(
            |u: f64| {
                let r = (-u).exp();
                self.eval(r) * r
            },
            0.0,
            200.0,
            1e-10,
            MAX_INTERVALS,
        )?;
        let upper = integrate(
            |u: f64| {
                let r = u.exp();
                self.eval(r) * r.powi(-(ell as i32)) * r
            },
            0.0,
            200.0,
            1e-10,
            MAX_INTERVALS,
        )?;
        Ok(lower.value + upper.value)
    }
}

// ---------------------------------------------------------------------------
// functions

/// The analytic family of a catalog entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PsiKind {
    /// `sqrt(t)`.
    Sqrt,
    /// `t^{a/2}` with `a` in `(0, 6)` and not even.
    Pow { a: f64 },
    /// `log(1 + t)`.
    Log1p,
    /// `log(log(1 + t) + 1)`.
    IteratedLog,
    /// `t`.
    Linear,
    /// `t^{l-1} log t`, `l >= 2`, extended by `0` at `t = 0`.
    TLogT,
    /// `e^{-rate t}`.
    Exp { rate: f64 },
    /// `e^{-rate t} + t`.
    ExpPlusLinear { rate: f64 },
}

/// A Bernstein or `CM_l` function with its metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiFunction {
    name: String,
    kind: PsiKind,
    ell: u32,
    cm_sign: f64,
    poly_coeffs: Option<Vec<f64>>,
    density: Option<LevyDensity>,
    smooth_at_zero: bool,
    sublinear: bool,
    polynomial: bool,
}

/// Which form of the integral representation to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Integrand `(e^{-tr} - w_l(rt)) / r^l`; requires `psi` in `C^{l-1}[0, inf)`.
    Smooth,
    /// Integrand `(e^{-tr} - e_l(r) w_l(rt)) / r^l` with shifted polynomial coefficients.
    Full,
}

fn pow_ell(a: f64) -> Result<u32> {
    if !(a > 0.0 && a < 6.0) || a == 2.0 || a == 4.0 || !a.is_finite() {
        return Err(Error::Domain(format!(
            "pow(a) needs a in (0,2), (2,4) or (4,6); got {a}"
        )));
    }
    Ok((a / 2.0).ceil() as u32)
}

impl PsiFunction {
    pub fn sqrt() -> Self {
        let mut psi = Self::pow(1.0).expect("a = 1 is valid");
        psi.name = "sqrt".into();
        psi.kind = PsiKind::Sqrt;
        psi
    }

    /// `t^{a/2}`: in `CM_l` with sign `(-1)^l`, where `l = ceil(a / 2)`.
    ///
    /// For `l <= 2` the representing density is `r^{l-1-a/2} / |Gamma(-a/2)|`.
    pub fn pow(a: f64) -> Result<Self> {
        let ell = pow_ell(a)?;
        let alpha = a / 2.0;
        // |Gamma(-alpha)| = Gamma(l - alpha) / prod_{j<l} |j - alpha|
        let abs_gamma = gamma(f64::from(ell) - alpha)
            / (0..ell).map(|j| (f64::from(j) - alpha).abs()).product::<f64>();
        let density = (ell <= 2).then(|| LevyDensity {
            coeff: 1.0 / abs_gamma,
            power: f64::from(ell) - 1.0 - alpha,
            decay: 0.0,
        });
        Ok(PsiFunction {
            name: format!("pow:{a}"),
            kind: PsiKind::Pow { a },
            ell,
            cm_sign: if ell % 2 == 0 { 1.0 } else { -1.0 },
            poly_coeffs: Some(vec![0.0; ell as usize + 1]),
            density,
            smooth_at_zero: true,
            sublinear: a < 2.0,
            polynomial: false,
        })
    }

    pub fn log1p() -> Self {
        PsiFunction {
            name: "log1p".into(),
            kind: PsiKind::Log1p,
            ell: 1,
            cm_sign: -1.0,
            poly_coeffs: Some(vec![0.0, 0.0]),
            density: Some(LevyDensity {
                coeff: 1.0,
                power: 0.0,
                decay: 1.0,
            }),
            smooth_at_zero: true,
            sublinear: true,
            polynomial: false,
        }
    }

    pub fn iterated_log() -> Self {
        PsiFunction {
            name: "iterlog".into(),
            kind: PsiKind::IteratedLog,
            ell: 1,
            cm_sign: -1.0,
            poly_coeffs: Some(vec![0.0, 0.0]),
            density: None,
            smooth_at_zero: true,
            sublinear: true,
            polynomial: false,
        }
    }

    /// `psi(t) = t`, a Bernstein function with no integral part.
    pub fn linear() -> Self {
        PsiFunction {
            name: "linear".into(),
            kind: PsiKind::Linear,
            ell: 1,
            cm_sign: -1.0,
            poly_coeffs: Some(vec![0.0, 1.0]),
            density: Some(LevyDensity {
                coeff: 0.0,
                power: 0.0,
                decay: 0.0,
            }),
            smooth_at_zero: true,
            sublinear: false,
            polynomial: true,
        }
    }

    /// `t^{l-1} log t`, which lies in `CM_l` with sign `(-1)^l`.
    pub fn tlogt(ell: u32) -> Result<Self> {
        if !(2..=3).contains(&ell) {
            return Err(Error::Domain(format!("tlogt needs l in 2..=3, got {ell}")));
        }
        Ok(PsiFunction {
            name: format!("tlogt:{ell}"),
            kind: PsiKind::TLogT,
            ell,
            cm_sign: if ell % 2 == 0 { 1.0 } else { -1.0 },
            poly_coeffs: None,
            density: None,
            smooth_at_zero: false,
            sublinear: false,
            polynomial: false,
        })
    }

    /// `e^{-rate t}`, in `CM_1` with sign `+1`.
    pub fn exp(rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::Domain(format!("exp rate must be positive, got {rate}")));
        }
        Ok(PsiFunction {
            name: format!("exp:{rate}"),
            kind: PsiKind::Exp { rate },
            ell: 1,
            cm_sign: 1.0,
            poly_coeffs: Some(vec![1.0, 0.0]),
            density: None,
            smooth_at_zero: true,
            sublinear: true,
            polynomial: false,
        })
    }

    /// `e^{-rate t} + t`, in `CM_2` with sign `+1`.
    pub fn exp_plus_linear(rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::Domain(format!("exp rate must be positive, got {rate}")));
        }
        Ok(PsiFunction {
            name: format!("exp_plus_linear:{rate}"),
            kind: PsiKind::ExpPlusLinear { rate },
            ell: 2,
            cm_sign: 1.0,
            poly_coeffs: Some(vec![1.0, 1.0 - rate, 0.0]),
            density: None,
            smooth_at_zero: true,
            sublinear: false,
            polynomial: false,
        })
    }

    /// Look up a catalog entry by name: `sqrt`, `pow:<a>`, `log1p`, `iterlog`, `linear`,
    /// `tlogt:<l>`, `exp[:<rate>]`, `exp_plus_linear[:<rate>]`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (head, arg) = match spec.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (spec, None),
        };
        let num = |a: Option<&str>, default: Option<f64>| -> Result<f64> {
            match a {
                Some(a) => a.parse().map_err(|_| Error::UnknownPsi(spec.to_string())),
                None => default.ok_or_else(|| Error::UnknownPsi(spec.to_string())),
            }
        };
        match (head, arg) {
            ("sqrt", None) => Ok(Self::sqrt()),
            ("log1p", None) => Ok(Self::log1p()),
            ("iterlog", None) => Ok(Self::iterated_log()),
            ("linear", None) => Ok(Self::linear()),
            ("pow", a) => Self::pow(num(a, None)?),
            ("tlogt", a) => {
                let ell = num(a, None)?;
                if ell.fract() != 0.0 || ell < 0.0 {
                    return Err(Error::UnknownPsi(spec.to_string()));
                }
                Self::tlogt(ell as u32)
            }
            ("exp", a) => Self::exp(num(a, Some(1.0))?),
            ("exp_plus_linear", a) => Self::exp_plus_linear(num(a, Some(1.0))?),
            _ => Err(Error::UnknownPsi(spec.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> PsiKind {
        self.kind
    }

    /// The `l` of `CM_l`.
    pub fn ell(&self) -> u32 {
        self.ell
    }

    /// Sign `s` such that `s * psi` belongs to `CM_l`.
    pub fn cm_sign(&self) -> f64 {
        self.cm_sign
    }

    /// Polynomial part of `psi` in the smooth representation (`s * b_k`), when known.
    pub fn poly_coeffs(&self) -> Option<&[f64]> {
        self.poly_coeffs.as_deref()
    }

    pub fn density(&self) -> Option<&LevyDensity> {
        self.density.as_ref()
    }

    pub fn smooth_at_zero(&self) -> bool {
        self.smooth_at_zero
    }

    /// `psi(t) / t -> 0` as `t -> inf`.
    pub fn sublinear(&self) -> bool {
        self.sublinear
    }

    pub fn is_polynomial(&self) -> bool {
        self.polynomial
    }

    pub fn has_representation(&self) -> bool {
        self.density.is_some() && self.poly_coeffs.is_some()
    }

    /// `psi` itself is a Bernstein function (`-psi` in `CM_1`).
    pub fn is_bernstein(&self) -> bool {
        self.ell == 1 && self.cm_sign < 0.0
    }

    /// Closed-form value of `psi(t)`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!("psi needs finite t >= 0, got {t}")));
        }
        Ok(self.eval_unchecked(t))
    }

    /// Closed form without the domain check; `t` must be finite and `>= 0`.
    pub fn eval_unchecked(&self, t: f64) -> f64 {
        match self.kind {
            PsiKind::Sqrt => t.sqrt(),
            PsiKind::Pow { a } => t.powf(a / 2.0),
            PsiKind::Log1p => t.ln_1p(),
            PsiKind::IteratedLog => t.ln_1p().ln_1p(),
            PsiKind::Linear => t,
            PsiKind::TLogT => {
                if t == 0.0 {
                    0.0
                } else {
                    t.powi(self.ell as i32 - 1) * t.ln()
                }
            }
            PsiKind::Exp { rate } => (-rate * t).exp(),
            PsiKind::ExpPlusLinear { rate } => (-rate * t).exp() + t,
        }
    }

    /// `s * psi(t)`, the `CM_l` element.
    pub fn eval_cm(&self, t: f64) -> f64 {
        self.cm_sign * self.eval_unchecked(t)
    }
}

impl fmt::Display for PsiFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Free-function form of [`PsiFunction::eval`].
pub fn eval_closed(psi: &PsiFunction, t: f64) -> Result<f64> {
    psi.eval(t)
}

/// The built-in function catalog.
pub fn catalog() -> Vec<PsiFunction> {
    let mut out = vec![PsiFunction::sqrt()];
    for a in [0.5, 0.7, 1.0, 1.5, 3.0, 5.0] {
        out.push(PsiFunction::pow(a).expect("catalog exponents are valid"));
    }
    out.push(PsiFunction::log1p());
    out.push(PsiFunction::iterated_log());
    out.push(PsiFunction::linear());
    out.push(PsiFunction::tlogt(2).expect("valid"));
    out.push(PsiFunction::tlogt(3).expect("valid"));
    out.push(PsiFunction::exp(1.0).expect("valid"));
    out.push(PsiFunction::exp_plus_linear(1.0).expect("valid"));
    out
}

// ---------------------------------------------------------------------------
// representation

/// Outcome of a representation evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RepresentationValue {
    pub value: f64,
    /// Quadrature error estimate plus the bound on the truncated tails.
    pub error_estimate: f64,
    pub branch: Branch,
}

/// Integrate `g` over `(0, inf)`, truncated to `[r0, big_r]` and split at `r = 1`, with
/// the substitutions `r = e^{-u}` on `[r0, 1]` and `r = e^u` on `[1, big_r]`.
fn integrate_half_line(g: impl Fn(f64) -> f64, r0: f64, big_r: f64, tol: f64) -> Result<(f64, f64)> {
    let lower = integrate(
        |u: f64| {
            let r = (-u).exp();
            g(r) * r
        },
        0.0,
        -r0.ln(),
        0.5 * tol,
        MAX_INTERVALS,
    )?;
    let upper = integrate(
        |u: f64| {
            let r = u.exp();
            g(r) * r
        },
        0.0,
        big_r.ln(),
        0.5 * tol,
        MAX_INTERVALS,
    )?;
    Ok((lower.value + upper.value, lower.error + upper.error))
}

/// Smallest `r0 <= 1` with `prefactor * r0^p / p <= budget` (`p > 0`).
fn lower_cut(prefactor: f64, p: f64, budget: f64) -> f64 {
    if prefactor <= 0.0 {
        return 1.0;
    }
    (budget * p / prefactor).powf(1.0 / p).clamp(f64::MIN_POSITIVE, 1.0)
}

/// Smallest `R = e^u` (on a geometric grid of `u`) whose tail bound is within `budget`.
fn upper_cut(bound: impl Fn(f64) -> f64, budget: f64) -> Result<f64> {
    let mut u = 1.0_f64;
    while u <= 700.0 {
        let r = u.exp();
        if bound(r) <= budget {
            return Ok(r);
        }
        u *= 1.25;
    }
    Err(Error::Quadrature {
        estimate: f64::NAN,
        error_bound: f64::INFINITY,
        tol: budget,
    })
}

fn check_representation_args(psi: &PsiFunction, t: f64, tol: f64) -> Result<(LevyDensity, Vec<f64>)> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("psi needs finite t >= 0, got {t}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    match (psi.density, &psi.poly_coeffs) {
        (Some(d), Some(p)) => Ok((d, p.clone())),
        _ => Err(Error::Contract(format!(
            "`{}` is closed-form only; it has no integral representation",
            psi.name
        ))),
    }
}

fn poly_eval(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

/// Evaluate `psi(t)` through its integral representation with absolute error at most
/// `tol`, using the smooth branch when `psi` is smooth at zero and the full branch
/// otherwise.
pub fn eval_by_representation(psi: &PsiFunction, t: f64, tol: f64) -> Result<f64> {
    let branch = if psi.smooth_at_zero {
        Branch::Smooth
    } else {
        Branch::Full
    };
    eval_by_representation_branch(psi, t, tol, branch).map(|r| r.value)
}

/// Evaluate `psi(t)` with an explicit choice of representation branch.
///
/// Tails of `(0, inf)` are cut where an elementwise bound on the integrand (the
/// [`change_envelope`] bound for the full branch, Taylor remainders for the smooth one)
/// integrates to less than `tol / 10`.
pub fn eval_by_representation_branch(
    psi: &PsiFunction,
    t: f64,
    tol: f64,
    branch: Branch,
) -> Result<RepresentationValue> {
    let (density, poly) = check_representation_args(psi, t, tol)?;
    if branch == Branch::Smooth && !psi.smooth_at_zero {
        return Err(Error::Contract(format!(
            "`{}` is not smooth at zero; use the full branch",
            psi.name
        )));
    }
    let ell = psi.ell;
    let l = ell as i32;
    let tail_budget = tol / 20.0;
    let mut value = poly_eval(&poly, t);
    let mut error = 0.0;

    if density.coeff == 0.0 || t == 0.0 {
        // integrand vanishes identically at t = 0 for both branches once the
        // full-branch coefficients are added back; handled below for Full
        if branch == Branch::Smooth || density.coeff == 0.0 {
            return Ok(RepresentationValue {
                value,
                error_estimate: 0.0,
                branch,
            });
        }
    }

    match branch {
        Branch::Smooth => {
            let lower_p = density.power + 1.0;
            let pre = t.powi(l) / factorial(ell) * density.coeff.abs();
            let r0 = lower_cut(pre, lower_p, tail_budget);
            let big_r = upper_cut(
                |r| {
                    let mut b = density.upper_tail_bound(-f64::from(ell), r);
                    for j in 0..ell {
                        b += t.powi(j as i32) / factorial(j)
                            * density.upper_tail_bound(f64::from(j) - f64::from(ell), r);
                    }
                    b
                },
                tail_budget,
            )?;
            let g = |r: f64| exp_remainder(ell, r * t) * r.powi(-l) * density.eval(r);
            let (integral, qerr) = integrate_half_line(g, r0, big_r, 0.9 * tol)?;
            value += psi.cm_sign * integral;
            error += qerr + 2.0 * tail_budget;
        }
        Branch::Full => {
            let m = envelope_constant(ell);
            let scale = m * (1.0 + t.powi(l));
            let main_tol = if ell == 0 { 0.9 * tol } else { 0.5 * tol };
            let r0 = lower_cut(scale * density.coeff.abs(), density.power + 1.0, tail_budget);
            let big_r = upper_cut(
                |r| scale * density.upper_tail_bound(-f64::from(ell), r),
                tail_budget,
            )?;
            let g = |r: f64| {
                let s = r * t;
                // e^{-s} - e_l(r) w_l(s) = (e^{-s} - w_l(s)) + (1 - e_l(r)) w_l(s)
                (exp_remainder(ell, s) + one_minus_e_ell(ell, r) * omega(ell, s))
                    * r.powi(-l)
                    * density.eval(r)
            };
            let (integral, qerr) = integrate_half_line(g, r0, big_r, main_tol)?;
            value += psi.cm_sign * integral;
            error += qerr + 2.0 * tail_budget;

            // a_k - b_k = s (-1)^k / k! int (e_l(r) - 1) r^{k-l} d eta
            for k in 0..ell {
                let weight = t.powi(k as i32) / factorial(k);
                if weight == 0.0 {
                    continue;
                }
                let k_tol = 0.4 * tol / (f64::from(ell) * weight);
                let k_budget = k_tol / 20.0;
                let extra = f64::from(k) - f64::from(ell);
                let r0 = lower_cut(
                    density.coeff.abs() / factorial(ell),
                    density.power + f64::from(k) + 1.0,
                    k_budget,
                );
                let big_r = upper_cut(|r| density.upper_tail_bound(extra, r), k_budget)?;
                let h = |r: f64| one_minus_e_ell(ell, r) * r.powi(k as i32 - l) * density.eval(r);
                let (integral, qerr) = integrate_half_line(h, r0, big_r, 0.9 * k_tol)?;
                let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
                let shift = psi.cm_sign * sign * integral;
                value += shift * weight;
                error += (qerr + 2.0 * k_budget) * weight;
            }
        }
    }
    if error > tol {
        return Err(Error::Quadrature {
            estimate: value,
            error_bound: error,
            tol,
        });
    }
    Ok(RepresentationValue {
        value,
        error_estimate: error,
        branch,
    })
}
