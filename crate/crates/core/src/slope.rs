//! Sorted-L1 (SLOPE) norm, its column-group extension, and the exact
//! proximal operator.
//!
//! The norm pairs the largest weight with the largest magnitude:
//! `||x|| = sum_i lambda_(i) * |x|_(i)` with both sequences sorted
//! nonincreasing. It is a proper norm whenever `lambda_1 > 0`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::util::kahan_sum;

/// Nonincreasing, nonnegative weight sequence for the sorted-L1 norm.
///
/// Construction sorts the entries, so callers may pass weights in any order;
/// `values()` is always the canonical nonincreasing form.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyVector {
    values: Vec<f64>,
}

impl PenaltyVector {
    /// Builds a penalty from arbitrary-order weights.
    ///
    /// Rejects negative, NaN, or infinite entries.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        for &v in &values {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: "penalty entry",
                });
            }
            if v < 0.0 {
                return Err(Error::Negative {
                    what: "penalty entry",
                });
            }
        }
        // Entries are finite, so total ordering exists.
        values.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
        Ok(Self { values })
    }

    /// Constant weights; with these the sorted-L1 norm collapses to
    /// `value * ||x||_1` and the prox to plain soft thresholding.
    pub fn constant(value: f64, len: usize) -> Result<Self> {
        Self::new(vec![value; len])
    }

    /// New penalty with every weight multiplied by `factor >= 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !factor.is_finite() {
            return Err(Error::NonFinite {
                what: "scale factor",
            });
        }
        if factor < 0.0 {
            return Err(Error::Negative {
                what: "scale factor",
            });
        }
        // Multiplying by a nonnegative constant preserves the ordering.
        Ok(Self {
            values: self.values.iter().map(|v| v * factor).collect(),
        })
    }

    /// Weights in nonincreasing order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_finite(x: &[f64], what: &'static str) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        Err(Error::NonFinite { what })
    } else {
        Ok(())
    }
}

/// Sorted-L1 norm of a real vector: magnitudes and weights are paired in
/// matching (nonincreasing) order before the dot product.
pub fn slope_norm(x: &[f64], lambda: &PenaltyVector) -> Result<f64> {
    if x.len() != lambda.len() {
        return Err(Error::LengthMismatch {
            expected: lambda.len(),
            got: x.len(),
        });
    }
    check_finite(x, "norm argument")?;
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(kahan_sum(
        mags.iter().zip(lambda.values()).map(|(m, l)| m * l),
    ))
}

/// Column-group sorted-L1 norm of a complex matrix: the sorted-L1 norm of the
/// vector of column Euclidean norms. One weight per column.
pub fn group_slope_norm(x: &DMatrix<Complex64>, lambda: &PenaltyVector) -> Result<f64> {
    if x.ncols() != lambda.len() {
        return Err(Error::LengthMismatch {
            expected: lambda.len(),
            got: x.ncols(),
        });
    }
    let norms = column_norms(x)?;
    slope_norm(&norms, lambda)
}

/// Euclidean norm of every column. Errors on non-finite entries.
pub(crate) fn column_norms(x: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    let mut norms = Vec::with_capacity(x.ncols());
    for col in x.column_iter() {
        let mut s = 0.0;
        for v in col.iter() {
            s += v.norm_sqr();
        }
        if !s.is_finite() {
            return Err(Error::NonFinite {
                what: "matrix entry",
            });
        }
        norms.push(s.sqrt());
    }
    Ok(norms)
}

/// Exact proximal operator of the sorted-L1 norm:
/// `argmin_v 0.5*||w - v||^2 + sum_i lambda_(i) |v|_(i)`.
///
/// Signs separate from magnitudes and the magnitude problem reduces, after
/// sorting `|w|` nonincreasing, to projecting `|w|_(i) - lambda_i` onto the
/// nonincreasing cone followed by clipping at zero. The projection is the
/// stack form of pool-adjacent-violators: each new value merges backwards
/// with any block whose running mean it would violate. O(n log n) overall,
/// dominated by the sort.
///
/// Ties in `|w|` are broken by original index (stable sort), which fixes one
/// minimizer deterministically when several exist. Entries shrunk to zero are
/// exactly `0.0`, so the support can be read off with `!= 0.0`.
pub fn prox_slope(w: &[f64], lambda: &PenaltyVector) -> Result<Vec<f64>> {
    if w.len() != lambda.len() {
        return Err(Error::LengthMismatch {
            expected: lambda.len(),
            got: w.len(),
        });
    }
    check_finite(w, "prox argument")?;
    let n = w.len();
    if n == 0 {
        return Ok(Vec::new());
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| w[b].abs().partial_cmp(&w[a].abs()).unwrap());
    let lam = lambda.values();

    // Block of pooled positions [start, end] with running mean `value`.
    struct Block {
        start: usize,
        end: usize,
        sum: f64,
        value: f64,
    }

    let mut blocks: Vec<Block> = Vec::with_capacity(n);
    for (k, &idx) in order.iter().enumerate() {
        let d = w[idx].abs() - lam[k];
        let mut blk = Block {
            start: k,
            end: k,
            sum: d,
            value: d,
        };
        while let Some(top) = blocks.last() {
            if top.value <= blk.value {
                let top = blocks.pop().unwrap();
                blk.start = top.start;
                blk.sum += top.sum;
                blk.value = blk.sum / (blk.end - blk.start + 1) as f64;
            } else {
                break;
            }
        }
        blocks.push(blk);
    }

    let mut out = vec![0.0; n];
    for blk in &blocks {
        let v = blk.value.max(0.0);
        if v == 0.0 {
            continue; // positions already exactly zero
        }
        for k in blk.start..=blk.end {
            let idx = order[k];
            out[idx] = if w[idx] < 0.0 { -v } else { v };
        }
    }
    Ok(out)
}
