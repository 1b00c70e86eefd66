//! Brute-force oracles shared by the integration suites. Everything here
//! favors obviously-correct over fast and shares no code path with the
//! production routines it checks.

// Each test target compiles this module separately and uses its own subset.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use subslope::slope::slope_norm;
use subslope::solver::{objective, residual_projector_apply};
use subslope::{PenaltyVector, SnapshotMatrix, SubspaceEstimate};

/// `1/2 ||w - v||^2` plus the sorted-L1 penalty, the functional the scalar
/// prox minimizes.
pub fn prox_objective(w: &[f64], v: &[f64], lam: &PenaltyVector) -> f64 {
    let fit: f64 = w.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    0.5 * fit + slope_norm(v, lam).unwrap()
}

/// Exact sorted-L1 prox by exhaustive search over level-set patterns.
///
/// In the magnitude-sorted domain the minimizer is piecewise constant on
/// consecutive blocks, each block at the clipped mean of `|w|_(i) - lam_i`.
/// With n <= ~16 every one of the 2^(n-1) block compositions can be tried;
/// candidates violating the nonincreasing constraint are discarded and the
/// feasible candidate with the smallest objective is returned. Ties in |w|
/// are broken by original index, matching the production routine, so the
/// outputs are comparable entrywise.
pub fn prox_oracle(w: &[f64], lam: &PenaltyVector) -> Vec<f64> {
    let n = w.len();
    assert!(n >= 1 && n <= 16, "oracle is exponential in n");
    assert_eq!(lam.len(), n);
    let lv = lam.values();

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| w[b].abs().partial_cmp(&w[a].abs()).unwrap());
    let mags: Vec<f64> = idx.iter().map(|&i| w[i].abs()).collect();

    let mut best_obj = f64::INFINITY;
    let mut best_t = vec![0.0; n];
    for mask in 0u32..(1 << (n - 1)) {
        let mut t = Vec::with_capacity(n);
        let mut start = 0usize;
        for pos in 0..n {
            let boundary = pos + 1 == n || (mask >> pos) & 1 == 1;
            if !boundary {
                continue;
            }
            let len = (pos + 1 - start) as f64;
            let mean = (start..=pos).map(|i| mags[i] - lv[i]).sum::<f64>() / len;
            let val = mean.max(0.0);
            t.extend(std::iter::repeat(val).take(pos + 1 - start));
            start = pos + 1;
        }
        if t.windows(2).any(|p| p[1] > p[0] + 1e-12) {
            continue;
        }
        let fit: f64 = mags.iter().zip(&t).map(|(a, b)| (a - b) * (a - b)).sum();
        let pen: f64 = lv.iter().zip(&t).map(|(l, b)| l * b).sum();
        let obj = 0.5 * fit + pen;
        if obj < best_obj {
            best_obj = obj;
            best_t = t;
        }
    }

    let mut out = vec![0.0; n];
    for (rank, &i) in idx.iter().enumerate() {
        out[i] = if w[i] < 0.0 { -best_t[rank] } else { best_t[rank] };
    }
    out
}

/// Tail singular-value energy `sum_{i > d} sigma_i^2` from a full SVD,
/// independent of the Gram/eigen path used in production.
pub fn svd_tail_energy(y: &DMatrix<Complex64>, d: usize) -> f64 {
    let svd = y.clone().svd(false, false);
    svd.singular_values.iter().skip(d).map(|s| s * s).sum()
}

/// Random complex matrix with independent uniform(-scale, scale) parts.
pub fn cplx_uniform(m: usize, n: usize, scale: f64, rng: &mut impl Rng) -> DMatrix<Complex64> {
    DMatrix::from_fn(m, n, |_, _| {
        Complex64::new(
            scale * (2.0 * rng.random::<f64>() - 1.0),
            scale * (2.0 * rng.random::<f64>() - 1.0),
        )
    })
}

/// Random orthonormal basis from a QR factorization.
pub fn random_basis(m: usize, d: usize, rng: &mut impl Rng) -> SubspaceEstimate {
    loop {
        let a = cplx_uniform(m, d, 1.0, rng);
        let qr = a.qr();
        let q = qr.q();
        // A near-singular draw can leave Q defective; just redraw.
        if let Ok(b) = SubspaceEstimate::new(q) {
            return b;
        }
    }
}

/// Global minimum of the interference subproblem at a fixed basis, by
/// proximal gradient descent from a random start, using the enumeration
/// prox. Returns the final objective value.
///
/// The smooth part `||(I - P)(X - Delta)||_F^2` has gradient
/// `2 (I - P)(Delta - X)` and Lipschitz constant 2, so with step 1/2 the
/// gradient step simplifies to `P Delta + (I - P) X`; the prox step shrinks
/// column norms through the scalar sorted-L1 prox with the caller's
/// penalties.
pub fn delta_oracle_objective(
    basis: &SubspaceEstimate,
    x: &SnapshotMatrix,
    lam: &PenaltyVector,
    iters: usize,
    rng: &mut impl Rng,
) -> f64 {
    let m = x.channels();
    let n = x.snapshots();
    let rx = residual_projector_apply(basis, x).unwrap();
    let b = basis.basis();

    let mut delta = cplx_uniform(m, n, 1.0, rng);
    for _ in 0..iters {
        let g = b * (b.adjoint() * &delta) + &rx;
        let norms: Vec<f64> = (0..n)
            .map(|j| g.column(j).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt())
            .collect();
        let shrunk = prox_oracle(&norms, lam);
        let mut next = g;
        for j in 0..n {
            let s = if norms[j] > 0.0 { shrunk[j] / norms[j] } else { 0.0 };
            for i in 0..m {
                next[(i, j)] *= s;
            }
        }
        delta = next;
    }
    objective(basis, &delta, x, lam).unwrap()
}
