//! Chi-square special functions used by the penalty design.
//!
//! Everything here is crate-internal. The public entry point is
//! [`crate::lambda::chi_quantile`].

/// Lanczos approximation, g = 7 with 9 coefficients. Relative error below
/// 1e-13 on x > 0, which is the only domain we call it on.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let z = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

const GAMMA_EPS: f64 = 1e-16;
const MAX_ITER: usize = 10_000;

/// Regularized lower incomplete gamma P(a, x) by its power series.
/// Converges fastest for x < a + 1.
fn gamma_p_series(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// Regularized upper incomplete gamma Q(a, x) by continued fraction
/// (modified Lentz). Converges fastest for x >= a + 1.
fn gamma_q_cf(a: f64, x: f64) -> f64 {
    const FPMIN: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
pub(crate) fn reg_gamma_p(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        0.0
    } else if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_cf(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x). Computed by the
/// continued fraction in its own tail so small survival values keep full
/// relative accuracy instead of cancelling against 1.
pub(crate) fn reg_gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        1.0
    } else if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_cf(a, x)
    }
}

/// CDF of chi-square with k degrees of freedom.
pub(crate) fn chi2_cdf(k: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        reg_gamma_p(0.5 * k, 0.5 * x)
    }
}

/// Survival function of chi-square with k degrees of freedom.
pub(crate) fn chi2_sf(k: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        reg_gamma_q(0.5 * k, 0.5 * x)
    }
}

/// Log density of chi-square with k degrees of freedom at x > 0.
fn chi2_ln_pdf(k: f64, x: f64) -> f64 {
    let a = 0.5 * k;
    (a - 1.0) * x.ln() - 0.5 * x - a * std::f64::consts::LN_2 - ln_gamma(a)
}

/// Quantile of chi-square with k degrees of freedom at probability p in
/// [0, 1).
///
/// Root of the CDF by bracketed Newton with bisection fallback; for p > 0.5
/// the residual is evaluated in survival space, so quantiles at p close to 1
/// do not lose accuracy to cancellation. Converges to ~1e-12 relative.
///
/// `lower_hint`, when given, must be a point known to lie at or below the
/// quantile (e.g. the quantile at a smaller p); it tightens the initial
/// bracket so sweeps over increasing p cost a handful of evaluations each.
pub(crate) fn chi2_quantile(k: f64, p: f64, lower_hint: Option<f64>) -> f64 {
    debug_assert!(k > 0.0 && (0.0..1.0).contains(&p));
    if p == 0.0 {
        return 0.0;
    }

    // Increasing residual with root at the quantile.
    let surv_target = 1.0 - p;
    let resid = |x: f64| -> f64 {
        if p <= 0.5 {
            chi2_cdf(k, x) - p
        } else {
            surv_target - chi2_sf(k, x)
        }
    };

    let mut lo = lower_hint.unwrap_or(0.0).max(0.0);
    if lo > 0.0 && resid(lo) > 0.0 {
        lo = 0.0; // hint overshot; fall back to the full bracket
    }
    // Mean + 10 standard deviations covers all but p > 1 - 1e-20; double
    // from there otherwise.
    let mut hi = (k + 10.0 * (2.0 * k).sqrt() + 10.0).max(lo * 2.0 + 1.0);
    for _ in 0..200 {
        if resid(hi) >= 0.0 {
            break;
        }
        hi *= 2.0;
    }

    let mut x = if lo > 0.0 {
        lo * 1.0000001 // warm start directly at the hint
    } else {
        0.5 * (lo + hi)
    };
    for _ in 0..200 {
        let r = resid(x);
        if r > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        // Relative width test: quantiles range over ~1e-12 (deep lower
        // tail, small k) to ~1e3, so an absolute test is wrong at one end
        // or the other. hi >= root > 0 holds throughout.
        if hi - lo <= 1e-13 * hi {
            break;
        }
        let step = r / chi2_ln_pdf(k, x).exp();
        let next = x - step;
        x = if next.is_finite() && next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
    }
    x
}
