//! Small order statistics shared by the LC-MS and z-stack code.

use alloc::vec::Vec;

/// Consistency constant turning a MAD into a normal standard deviation.
pub const MAD_TO_SIGMA: f64 = 1.4826;

/// Median of the values; `None` for an empty slice. NaNs sort last.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut buf: Vec<f64> = values.to_vec();
    Some(median_in_place(&mut buf))
}

/// Median that reorders `buf`. Panics on an empty slice.
pub fn median_in_place(buf: &mut [f64]) -> f64 {
    let n = buf.len();
    assert!(n > 0, "median of empty slice");
    let mid = n / 2;
    let (lower, upper, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = lower.iter().copied().max_by(f64::total_cmp).unwrap_or(upper);
        lower + (upper - lower) / 2.0
    }
}

/// Median and raw (unscaled) median absolute deviation.
pub fn median_mad(values: &[f64]) -> Option<(f64, f64)> {
    let center = median(values)?;
    let mut dev: Vec<f64> = values.iter().map(|v| (v - center).abs()).collect();
    Some((center, median_in_place(&mut dev)))
}
