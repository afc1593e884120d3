//! Seeded random points and random constrained measures.
//!
//! Every generator is `ChaCha8` seeded with `seed_from_u64(seed)`; independent trials use
//! separate streams (`set_stream(index)`) of the same seed, so trial `i` does not depend on
//! how many other trials ran or in which order.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::energy::{symmetric_indices, DiscreteSignedMeasure};
use crate::error::{Error, Result};
use crate::spaces::{Point, Space};

/// Name of the generator, as recorded in reports.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64(seed), stream = trial index";

/// Generator for trial `stream` of a seeded experiment.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// A random point: standard normal coordinates, lifted to the hyperboloid or normalized
/// onto the sphere as the space requires.
pub fn random_point<R: Rng + ?Sized>(rng: &mut R, space: Space, dim: usize) -> Result<Point> {
    loop {
        let coords: Vec<f64> = (0..dim).map(|_| standard_normal(rng)).collect();
        match space {
            Space::Euclidean => return Point::euclidean(coords),
            Space::Hyperboloid => return Point::hyperboloid_lift(coords),
            Space::Sphere => {
                if coords.iter().any(|c| *c != 0.0) {
                    return Point::sphere(coords);
                }
            }
        }
    }
}

pub fn random_points<R: Rng + ?Sized>(rng: &mut R, space: Space, dim: usize, n: usize) -> Result<Vec<Point>> {
    (0..n).map(|_| random_point(rng, space, dim)).collect()
}

/// Linear conditions imposed on the weights of a random measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentConstraint {
    /// No condition.
    Free,
    /// Zero total mass.
    Mass,
    /// All Euclidean moments `int x^a d mu` with `|a| <= order` vanish (`order = 1` means
    /// zero mass and zero vector mean).
    Moments(u32),
    /// Zero mass and zero sum of every ambient coordinate; works in all spaces.
    AmbientMean,
}

/// Rows `r_k(x_i)` of the constraint matrix; a weight vector `w` satisfies the
/// constraint iff `sum_i w_i r_k(x_i) = 0` for every `k`.
pub fn constraint_rows(atoms: &[Point], constraint: MomentConstraint) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    if constraint == MomentConstraint::Free {
        return Ok(rows);
    }
    rows.push(vec![1.0; atoms.len()]);
    match constraint {
        MomentConstraint::Free | MomentConstraint::Mass => {}
        MomentConstraint::Moments(order) => {
            let dim = atoms.first().map_or(0, Point::dim);
            if let Some(p) = atoms.iter().find(|p| p.space() != Space::Euclidean) {
                return Err(Error::SpaceMismatch {
                    expected: Space::Euclidean.name(),
                    found: p.space().name(),
                });
            }
            for j in 1..=order {
                for idx in symmetric_indices(dim, j) {
                    rows.push(
                        atoms
                            .iter()
                            .map(|x| idx.iter().map(|&k| x.coords()[k]).product())
                            .collect(),
                    );
                }
            }
        }
        MomentConstraint::AmbientMean => {
            let ambient: Vec<Vec<f64>> = atoms.iter().map(Point::ambient).collect();
            let width = ambient.first().map_or(0, Vec::len);
            for k in 0..width {
                rows.push(ambient.iter().map(|a| a[k]).collect());
            }
        }
    }
    Ok(rows)
}

/// Orthogonal projection of `weights` onto the null space of `rows`.
///
/// The row space is orthonormalized by an SVD (singular values below `1e-12` times the
/// largest are treated as zero) and the projection is applied twice.
pub fn project_onto_null_space(rows: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let n = weights.len();
    if rows.is_empty() || n == 0 {
        return weights.to_vec();
    }
    let a = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max();
    let mut w = DVector::from_column_slice(weights);
    for _ in 0..2 {
        for (k, s) in svd.singular_values.iter().enumerate() {
            if *s > 1e-12 * smax {
                let v = v_t.row(k).transpose();
                let c = v.dot(&w);
                w -= v * c;
            }
        }
    }
    w.iter().copied().collect()
}

/// Number of independent constraint rows for `constraint` in dimension `dim`.
fn row_count(space: Space, dim: usize, constraint: MomentConstraint) -> usize {
    match constraint {
        MomentConstraint::Free => 0,
        MomentConstraint::Mass => 1,
        MomentConstraint::Moments(order) => (0..=order).map(|j| symmetric_indices(dim, j).len()).sum(),
        MomentConstraint::AmbientMean => 1 + dim + usize::from(space == Space::Hyperboloid),
    }
}

/// A random nonzero measure satisfying `constraint`.
///
/// The atom count is uniform on `2..=10` (raised to at least one more than the number of
/// constraint rows), coordinates are standard normal and the standard normal weights are
/// projected onto the constraint set.
pub fn random_measure<R: Rng + ?Sized>(
    rng: &mut R,
    space: Space,
    dim: usize,
    constraint: MomentConstraint,
) -> Result<DiscreteSignedMeasure> {
    let rows = row_count(space, dim, constraint);
    let lo = 2.max(rows + 1);
    let hi = if lo <= 10 { 10 } else { lo + 8 };
    loop {
        let n = rng.random_range(lo..=hi);
        let atoms = random_points(rng, space, dim, n)?;
        let raw: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
        let weights = project_onto_null_space(&constraint_rows(&atoms, constraint)?, &raw);
        let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        let raw_norm = raw.iter().map(|w| w * w).sum::<f64>().sqrt();
        if norm > 1e-8 * raw_norm {
            return DiscreteSignedMeasure::new(atoms, weights);
        }
    }
}
