//! Detection scoring, subspace refitting on the retained snapshots, and
//! direction-of-arrival readout.
//!
//! Rate conventions, chosen to match how array-processing results are
//! usually tabulated: `fdp`/`fpr` is the share of *declared* interference
//! that is actually clean, and `fnr` is the share of *declared-clean*
//! snapshots that actually carry interference. The classic denominators
//! (truly clean, truly interfered) are also exposed as `fallout` and
//! `miss_rate` so nothing has to be recomputed downstream.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sim::{steering_vector, ArrayGeometry};
use crate::slope::PenaltyVector;
use crate::solver::{
    self, basis_update, SnapshotMatrix, SolverConfig, SolverResult, SubspaceEstimate,
};

/// Per-snapshot detection outcome counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub true_neg: usize,
    pub false_pos: usize,
    pub false_neg: usize,
    pub true_pos: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.true_neg + self.false_pos + self.false_neg + self.true_pos
    }

    /// Truly clean snapshot count (n0).
    pub fn clean_truth(&self) -> usize {
        self.true_neg + self.false_pos
    }

    /// False discovery proportion: clean snapshots among those declared
    /// interfered, `FP / (FP + TP)`. Zero when nothing was declared.
    pub fn fdp(&self) -> f64 {
        ratio(self.false_pos, self.false_pos + self.true_pos)
    }

    /// Interfered snapshots among those declared clean, `FN / (FN + TN)`.
    /// Zero when everything was declared interfered.
    pub fn fnr(&self) -> f64 {
        ratio(self.false_neg, self.false_neg + self.true_neg)
    }

    /// Classic false positive rate over the truly clean, `FP / (FP + TN)`.
    pub fn fallout(&self) -> f64 {
        ratio(self.false_pos, self.false_pos + self.true_neg)
    }

    /// Classic miss rate over the truly interfered, `FN / (FN + TP)`.
    pub fn miss_rate(&self) -> f64 {
        ratio(self.false_neg, self.false_neg + self.true_pos)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Tallies detection flags against truth labels.
pub fn confusion(flags: &[bool], truth: &[bool]) -> Result<Confusion> {
    if flags.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            got: flags.len(),
        });
    }
    let mut c = Confusion::default();
    for (&f, &t) in flags.iter().zip(truth) {
        match (f, t) {
            (false, false) => c.true_neg += 1,
            (true, false) => c.false_pos += 1,
            (false, true) => c.false_neg += 1,
            (true, true) => c.true_pos += 1,
        }
    }
    Ok(c)
}

/// Fits a `d`-dimensional basis to the selected snapshot columns only.
///
/// Runs the same Gram-plus-eigendecomposition path as [`basis_update`], so
/// with `keep = 0..n` the result is identical to `basis_update` with zero
/// interference, bit for bit. Indices may repeat; each occurrence enters
/// the fit.
pub fn refit_subspace(x: &SnapshotMatrix, keep: &[usize], d: usize) -> Result<SubspaceEstimate> {
    if keep.len() < d {
        return Err(Error::TooFewColumns {
            needed: d,
            got: keep.len(),
        });
    }
    let n = x.snapshots();
    for &j in keep {
        if j >= n {
            return Err(Error::ColumnOutOfRange { index: j, ncols: n });
        }
    }
    let cols: Vec<_> = keep.iter().map(|&j| x.matrix().column(j)).collect();
    let sub = SnapshotMatrix::new(DMatrix::from_columns(&cols))?;
    let zero = DMatrix::zeros(x.channels(), keep.len());
    basis_update(&sub, &zero, d)
}

/// Grid step used by the experiments: 1e-3 of the half-circle.
pub const DEFAULT_DOA_GRID: f64 = 1e-3 * PI;

const DOA_REFINE_TOL: f64 = 1e-5;

/// Direction-of-arrival estimate for a one-dimensional subspace: the
/// `theta` in `(0, pi)` whose steering vector has the largest projection
/// onto the basis, scanned on a uniform grid of step `grid_rad` and then
/// refined by golden-section search to 1e-5 radians.
///
/// Deterministic: exact grid ties keep the smallest `theta`, and the result
/// is invariant to the basis phase (only `|b^H a|` enters).
pub fn doa_grid_search(
    basis: &SubspaceEstimate,
    geom: &ArrayGeometry,
    grid_rad: f64,
) -> Result<f64> {
    if basis.dim() != 1 {
        return Err(Error::UnsupportedModelOrder {
            what: "direction-of-arrival search",
            d: basis.dim(),
        });
    }
    if basis.channels() != geom.channels() {
        return Err(Error::ShapeMismatch {
            expected_rows: geom.channels(),
            expected_cols: 1,
            rows: basis.channels(),
            cols: basis.dim(),
        });
    }
    if !(grid_rad > 0.0 && grid_rad < PI) {
        return Err(Error::NonPositive {
            what: "grid step (radians in (0, pi))",
            value: grid_rad,
        });
    }

    // ||a(theta)|| = sqrt(m) for every theta, so maximizing the normalized
    // projection is maximizing |b^H a|.
    let b = basis.basis();
    let score = |theta: f64| -> f64 {
        let a = steering_vector(geom, theta);
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..geom.channels() {
            acc += b[(i, 0)].conj() * a[i];
        }
        acc.norm_sqr()
    };

    let mut best_theta = grid_rad;
    let mut best = score(grid_rad);
    let mut k = 2usize;
    loop {
        let theta = grid_rad * k as f64;
        if theta >= PI {
            break;
        }
        let s = score(theta);
        if s > best {
            best = s;
            best_theta = theta;
        }
        k += 1;
    }

    let lo = (best_theta - grid_rad).max(0.0);
    let hi = (best_theta + grid_rad).min(PI);
    Ok(golden_max(lo, hi, DOA_REFINE_TOL, score))
}

/// Golden-section maximization on `[lo, hi]`; assumes the function is
/// unimodal there. Equal evaluations shrink from the right, biasing flat
/// regions toward the left endpoint.
fn golden_max(mut lo: f64, mut hi: f64, tol: f64, score: impl Fn(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = score(c);
    let mut fd = score(d);
    while hi - lo > tol {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = score(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = score(d);
        }
    }
    0.5 * (lo + hi)
}

/// Solver outcome digest carried on every report row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSummary {
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
    pub support_size: usize,
}

impl From<&SolverResult> for SolverSummary {
    fn from(r: &SolverResult) -> Self {
        Self {
            iterations: r.iterations,
            converged: r.converged,
            final_objective: r.objective_trace.last().copied().unwrap_or(f64::NAN),
            support_size: r.interference.support().len(),
        }
    }
}

/// Scored outcome of one detection run against known truth labels.
///
/// `doa_cleaned` is the estimate after refitting on the snapshots declared
/// clean; it is NaN when fewer columns survive than the model order.
/// `doa_all` comes from fitting every snapshot, the no-screening baseline.
#[derive(Debug, Clone)]
pub struct DetectionReport {
    /// Per-snapshot detection flags, `true` where interference was declared.
    pub flags: Vec<bool>,
    pub confusion: Confusion,
    /// Truly clean snapshot count.
    pub n0: usize,
    pub fdp: f64,
    /// Same quantity as `fdp` under the discovery-denominator convention.
    pub fpr: f64,
    pub fnr: f64,
    pub fallout: f64,
    pub miss_rate: f64,
    pub doa_cleaned: f64,
    pub doa_all: f64,
    pub solver: SolverSummary,
}

impl DetectionReport {
    pub fn new(
        flags: Vec<bool>,
        truth: &[bool],
        doa_cleaned: f64,
        doa_all: f64,
        solver: SolverSummary,
    ) -> Result<Self> {
        let c = confusion(&flags, truth)?;
        Ok(Self {
            flags,
            confusion: c,
            n0: c.clean_truth(),
            fdp: c.fdp(),
            fpr: c.fdp(),
            fnr: c.fnr(),
            fallout: c.fallout(),
            miss_rate: c.miss_rate(),
            doa_cleaned,
            doa_all,
            solver,
        })
    }

    /// Column names for [`csv_row`](Self::csv_row), in order.
    pub fn csv_header() -> &'static str {
        "tn,fp,fn,tp,n0,fdp,fpr,fnr,fallout,miss_rate,doa_cleaned_rad,doa_all_rad,\
         iterations,converged,final_objective,support_size"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.confusion.true_neg,
            self.confusion.false_pos,
            self.confusion.false_neg,
            self.confusion.true_pos,
            self.n0,
            self.fdp,
            self.fpr,
            self.fnr,
            self.fallout,
            self.miss_rate,
            self.doa_cleaned,
            self.doa_all,
            self.solver.iterations,
            self.solver.converged,
            self.solver.final_objective,
            self.solver.support_size,
        )
    }

    /// Flat `key value` lines, one per field, same values as the CSV row.
    pub fn kv_record(&self) -> String {
        let mut out = String::new();
        for (k, v) in Self::csv_header().split(',').zip(self.csv_row().split(',')) {
            let _ = writeln!(out, "{} {}", k.trim(), v);
        }
        out
    }
}

/// Full pipeline on labeled data: solve, score the detected support, refit
/// on the declared-clean columns, and read out both direction estimates.
///
/// Restricted to `d = 1`, where a direction of arrival is defined.
pub fn detect_and_report(
    x: &SnapshotMatrix,
    truth: &[bool],
    geom: &ArrayGeometry,
    d: usize,
    lambda: &PenaltyVector,
    config: &SolverConfig,
) -> Result<(DetectionReport, SolverResult)> {
    if d != 1 {
        return Err(Error::UnsupportedModelOrder {
            what: "detection pipeline",
            d,
        });
    }
    if geom.channels() != x.channels() {
        return Err(Error::ShapeMismatch {
            expected_rows: geom.channels(),
            expected_cols: x.snapshots(),
            rows: x.channels(),
            cols: x.snapshots(),
        });
    }
    if truth.len() != x.snapshots() {
        return Err(Error::LengthMismatch {
            expected: x.snapshots(),
            got: truth.len(),
        });
    }

    let result = solver::solve(x, d, lambda, config)?;
    let flags = result.interference.support_flags();

    let all: Vec<usize> = (0..x.snapshots()).collect();
    let doa_all = doa_grid_search(&refit_subspace(x, &all, d)?, geom, DEFAULT_DOA_GRID)?;

    let keep: Vec<usize> = flags
        .iter()
        .enumerate()
        .filter(|&(_, &f)| !f)
        .map(|(j, _)| j)
        .collect();
    let doa_cleaned = if keep.len() >= d {
        doa_grid_search(&refit_subspace(x, &keep, d)?, geom, DEFAULT_DOA_GRID)?
    } else {
        f64::NAN
    };

    let report = DetectionReport::new(
        flags,
        truth,
        doa_cleaned,
        doa_all,
        SolverSummary::from(&result),
    )?;
    Ok((report, result))
}
