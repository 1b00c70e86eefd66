//! Small numeric helpers shared across modules.

/// Kahan compensated sum. The objective trace is asserted monotone to within
/// 1e-9 by downstream checks, so plain left-to-right accumulation over 1e5
/// terms is not accurate enough.
pub(crate) fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}
