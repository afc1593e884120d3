//! Two-sample energy statistics and a seeded permutation test.

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::cmfun::PsiFunction;
use crate::energy::{difference, inner_product_ell, DiscreteSignedMeasure, CONSTRAINT_TOL};
use crate::error::{Error, Result};
use crate::sampling::stream_rng;
use crate::spaces::{check_homogeneous, gram, CndKernel, Point, Space};

/// A labelled, nonempty, homogeneous collection of points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSet {
    points: Vec<Point>,
    label: String,
}

impl SampleSet {
    pub fn new(points: Vec<Point>, label: impl Into<String>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("sample set is empty".into()));
        }
        check_homogeneous(&points)?;
        Ok(SampleSet {
            points,
            label: label.into(),
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn empirical(&self) -> Result<DiscreteSignedMeasure> {
        DiscreteSignedMeasure::empirical(self.points.clone())
    }

    /// Translate a Euclidean sample so that its mean is zero.
    pub fn centered(&self) -> Result<SampleSet> {
        let first = &self.points[0];
        if first.space() != Space::Euclidean {
            return Err(Error::SpaceMismatch {
                expected: Space::Euclidean.name(),
                found: first.space().name(),
            });
        }
        let n = self.points.len() as f64;
        let dim = first.dim();
        let mean: Vec<f64> = (0..dim)
            .map(|k| self.points.iter().map(|p| p.coords()[k]).sum::<f64>() / n)
            .collect();
        let points = self
            .points
            .iter()
            .map(|p| Point::euclidean(p.coords().iter().zip(&mean).map(|(c, m)| c - m).collect()))
            .collect::<Result<_>>()?;
        SampleSet::new(points, self.label.clone())
    }
}

/// `I(P - Q, P - Q)` for the empirical measures of `x` and `y` (the V-statistic).
///
/// For a Bernstein `psi` this is
/// `2/(nm) sum psi(gamma(x_i, y_j)) - 1/n^2 sum psi(gamma(x_i, x_k)) - 1/m^2 sum psi(gamma(y_j, y_l))`.
/// For `l >= 2` the difference of the empirical measures must satisfy the moment
/// constraints, which generally requires centering the samples first.
pub fn energy_statistic(x: &SampleSet, y: &SampleSet, kernel: &CndKernel, psi: &PsiFunction) -> Result<f64> {
    let eta = difference(&x.empirical()?, &y.empirical()?)?;
    inner_product_ell(&eta, &eta, kernel, psi, CONSTRAINT_TOL)
}

/// Outcome of [`permutation_test`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub permutations: usize,
    /// `(1 + #{b : T_b >= T_obs}) / (B + 1)`; a permuted statistic counts as `>=` when it
    /// is within `1e-12 * max|psi(gamma)|` below the observed value.
    pub p_value: f64,
    pub exceedances: usize,
    pub seed: u64,
    pub psi: String,
    pub kernel: String,
    pub n: usize,
    pub m: usize,
    pub algorithm: String,
}

/// Description of the permutation generator, recorded in every [`TestResult`].
pub const PERMUTATION_ALGORITHM: &str = "Fisher-Yates (i from N-1 down to 1, j uniform on 0..=i by \
Lemire multiply-shift with rejection on next_u64) driven by ChaCha8Rng seed_from_u64(seed) with \
set_stream(b) for replica b";

/// Uniform integer on `0..bound` (`bound >= 1`) by Lemire's multiply-shift method.
fn bounded<R: RngCore>(rng: &mut R, bound: u64) -> u64 {
    let mut m = u128::from(rng.next_u64()) * u128::from(bound);
    if (m as u64) < bound {
        let threshold = bound.wrapping_neg() % bound;
        while (m as u64) < threshold {
            m = u128::from(rng.next_u64()) * u128::from(bound);
        }
    }
    (m >> 64) as u64
}

/// Uniformly random permutation of `0..n` for replica `b` of `seed`.
pub fn seeded_permutation(n: usize, seed: u64, replica: u64) -> Vec<usize> {
    let mut rng = stream_rng(seed, replica);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = bounded(&mut rng, i as u64 + 1) as usize;
        order.swap(i, j);
    }
    order
}

/// Permutation two-sample test based on [`energy_statistic`].
///
/// The pooled Gram matrix of `psi(gamma)` is computed once. Replica `b` relabels the pooled
/// sample by [`seeded_permutation`]`(n + m, seed, b)`: the first `n` entries of the
/// permutation form the new `X`.
pub fn permutation_test(
    x: &SampleSet,
    y: &SampleSet,
    kernel: &CndKernel,
    psi: &PsiFunction,
    permutations: usize,
    seed: u64,
) -> Result<TestResult> {
    if permutations == 0 {
        return Err(Error::InvalidInput("need at least one permutation".into()));
    }
    let (n, m) = (x.len(), y.len());
    if n + m < 2 {
        return Err(Error::InvalidInput("need at least two pooled points".into()));
    }
    // validates the constraint set for the observed labelling
    energy_statistic(x, y, kernel, psi)?;

    let mut pooled = x.points.clone();
    pooled.extend(y.points.iter().cloned());
    let psi_gram = gram(kernel, &pooled)?.map(psi.name(), |v| psi.eval_unchecked(v));
    let total = n + m;
    let sign = psi.cm_sign();
    let (wx, wy) = (1.0 / n as f64, -1.0 / m as f64);
    let statistic_for = |labels: &[usize]| -> f64 {
        let mut w = vec![0.0; total];
        for (slot, &idx) in labels.iter().enumerate() {
            w[idx] = if slot < n { wx } else { wy };
        }
        sign * psi_gram.bilinear(&w, &w)
    };
    let identity: Vec<usize> = (0..total).collect();
    let observed = statistic_for(&identity);
    let slack = 1e-12 * psi_gram.max_abs();
    let permuted: Vec<f64> = (0..permutations)
        .into_par_iter()
        .map(|b| statistic_for(&seeded_permutation(total, seed, b as u64)))
        .collect();
    let exceedances = permuted.iter().filter(|&&t| t >= observed - slack).count();
    Ok(TestResult {
        statistic: observed,
        permutations,
        p_value: (1 + exceedances) as f64 / (permutations + 1) as f64,
        exceedances,
        seed,
        psi: psi.name().to_string(),
        kernel: kernel.name(),
        n,
        m,
        algorithm: PERMUTATION_ALGORITHM.into(),
    })
}
