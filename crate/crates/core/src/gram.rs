//! Dense symmetric matrices of pairwise kernel values.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::spaces::Point;

/// Where a Gram matrix came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub kernel: String,
    pub points_hash: String,
}

/// A real symmetric `n x n` matrix, stored row-major.
///
/// Only the upper triangle is evaluated; the lower triangle is mirrored, so symmetry is
/// exact. Rows are evaluated in parallel with the same per-entry expression as a serial
/// loop, so the result does not depend on the thread count.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    n: usize,
    data: Vec<f64>,
    provenance: Provenance,
}

/// Short SHA-256 fingerprint of a point set (space, dimensions and coordinate bits).
pub fn points_hash(points: &[Point]) -> String {
    let mut hasher = Sha256::new();
    for p in points {
        hasher.update(p.space().name().as_bytes());
        hasher.update((p.dim() as u64).to_le_bytes());
        for c in p.ambient() {
            hasher.update(c.to_bits().to_le_bytes());
        }
    }
    hasher
        .finalize()
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl GramMatrix {
    /// Evaluate `f` on all pairs of `points` (upper triangle, mirrored).
    pub fn try_from_fn<F>(points: &[Point], label: &str, f: F) -> Result<Self>
    where
        F: Fn(&Point, &Point) -> Result<f64> + Sync,
    {
        Self::try_from_index_fn(points, label, |i, j| f(&points[i], &points[j]))
    }

    /// Like [`GramMatrix::try_from_fn`], but `f` receives the pair of indices.
    pub fn try_from_index_fn<F>(points: &[Point], label: &str, f: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> Result<f64> + Sync,
    {
        let n = points.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (i..n).map(|j| f(i, j)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let mut data = vec![0.0; n * n];
        for (i, row) in rows.into_iter().enumerate() {
            for (offset, v) in row.into_iter().enumerate() {
                let j = i + offset;
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Ok(GramMatrix {
            n,
            data,
            provenance: Provenance {
                kernel: label.to_string(),
                points_hash: points_hash(points),
            },
        })
    }

    /// Build from explicit rows. The rows must form a square symmetric matrix.
    pub fn from_rows(rows: Vec<Vec<f64>>, label: &str) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in &rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        for i in 0..n {
            for j in 0..i {
                if data[i * n + j] != data[j * n + i] {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(GramMatrix {
            n,
            data,
            provenance: Provenance {
                kernel: label.to_string(),
                points_hash: String::new(),
            },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Apply `f` entrywise, keeping the provenance hash and relabelling the kernel.
    pub fn map(&self, label: &str, f: impl Fn(f64) -> f64) -> GramMatrix {
        GramMatrix {
            n: self.n,
            data: self.data.iter().map(|&v| f(v)).collect(),
            provenance: Provenance {
                kernel: label.to_string(),
                points_hash: self.provenance.points_hash.clone(),
            },
        }
    }

    /// Symmetric permutation `P G P^T`.
    pub fn permuted(&self, order: &[usize]) -> GramMatrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for (i, &oi) in order.iter().enumerate() {
            for (j, &oj) in order.iter().enumerate() {
                data[i * n + j] = self.get(oi, oj);
            }
        }
        GramMatrix {
            n,
            data,
            provenance: self.provenance.clone(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diag(&self) -> f64 {
        (0..self.n).fold(0.0, |m, i| m.max(self.get(i, i).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Quadratic form `c^T G d`.
    pub fn bilinear(&self, c: &[f64], d: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| {
                let row = &self.data[i * self.n..(i + 1) * self.n];
                c[i] * row.iter().zip(d).map(|(g, w)| g * w).sum::<f64>()
            })
            .sum()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }
}
