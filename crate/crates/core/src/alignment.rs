//! Dynamic time warping between two feature sequences.
//!
//! Steps (1,0), (0,1), (1,1) with unit weights, both endpoints fixed, local
//! cost is the Euclidean distance between frames.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::ArrayView1;

use crate::error::{ensure_dims, Error, Result};
use crate::features::FeatureSequence;

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentPath {
    /// (source frame, target frame), from (0, 0) to (T_a − 1, T_b − 1).
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

impl AlignmentPath {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Checks the boundary and step constraints against sequence lengths.
    pub fn validate(&self, len_a: usize, len_b: usize) -> Result<()> {
        let first = self.pairs.first().copied();
        let last = self.pairs.last().copied();
        if len_a == 0 || len_b == 0 || first != Some((0, 0)) || last != Some((len_a - 1, len_b - 1))
        {
            return Err(Error::InvalidPath(format!(
                "path must run from (0, 0) to ({}, {})",
                len_a.saturating_sub(1),
                len_b.saturating_sub(1)
            )));
        }
        for w in self.pairs.windows(2) {
            let (di, dj) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
            if !matches!((di, dj), (1, 0) | (0, 1) | (1, 1)) {
                return Err(Error::InvalidPath(format!(
                    "illegal step {:?} -> {:?}",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }

    /// `# cost=<total_cost>` then one `i<TAB>j` line per pair.
    pub fn to_text(&self) -> String {
        let mut out = format!("# cost={}\n", self.total_cost);
        for (i, j) in &self.pairs {
            let _ = writeln!(out, "{i}\t{j}");
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

pub fn euclidean(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Minimum-cost monotone alignment of `a` onto `b`. On backtrace ties the
/// diagonal predecessor wins, then (0,1), then (1,0).
pub fn dtw_align(a: &FeatureSequence, b: &FeatureSequence) -> Result<AlignmentPath> {
    ensure_dims("dtw frame dimension", a.dim(), b.dim())?;
    let (n, m) = (a.len(), b.len());
    let mut acc = vec![f64::INFINITY; n * m];
    let idx = |i: usize, j: usize| i * m + j;
    for i in 0..n {
        for j in 0..m {
            let d = euclidean(a.frame(i), b.frame(j));
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 {
                    acc[idx(i - 1, j - 1)]
                } else {
                    f64::INFINITY
                };
                let left = if j > 0 {
                    acc[idx(i, j - 1)]
                } else {
                    f64::INFINITY
                };
                let up = if i > 0 {
                    acc[idx(i - 1, j)]
                } else {
                    f64::INFINITY
                };
                diag.min(left).min(up)
            };
            // the first cell is d alone so sums accumulate in path order
            acc[idx(i, j)] = if i == 0 && j == 0 { d } else { best + d };
        }
    }

    let mut pairs = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while (i, j) != (0, 0) {
        let diag = if i > 0 && j > 0 {
            acc[idx(i - 1, j - 1)]
        } else {
            f64::INFINITY
        };
        let left = if j > 0 {
            acc[idx(i, j - 1)]
        } else {
            f64::INFINITY
        };
        let up = if i > 0 {
            acc[idx(i - 1, j)]
        } else {
            f64::INFINITY
        };
        if diag <= left && diag <= up {
            i -= 1;
            j -= 1;
        } else if left <= up {
            j -= 1;
        } else {
            i -= 1;
        }
        pairs.push((i, j));
    }
    pairs.reverse();
    Ok(AlignmentPath {
        pairs,
        total_cost: acc[idx(n - 1, m - 1)],
    })
}

/// Expands both sequences along the path: row k of the outputs is
/// `a[i_k]` and `b[j_k]`.
pub fn pair_frames(
    path: &AlignmentPath,
    a: &FeatureSequence,
    b: &FeatureSequence,
) -> Result<(FeatureSequence, FeatureSequence)> {
    if path.is_empty() {
        return Err(Error::InvalidPath("empty path".into()));
    }
    let (ia, ib): (Vec<usize>, Vec<usize>) = path.pairs.iter().copied().unzip();
    Ok((a.select_rows(&ia)?, b.select_rows(&ib)?))
}
