//! Rényi entropy of intensity histograms and point divergence gain.
//!
//! For an ordered frame pair `(l, l+1)` the point divergence gain at a pixel is
//! the change of the Rényi entropy of frame `l`'s histogram when that pixel's
//! intensity `a` is replaced by the intensity `b` found at the same position in
//! frame `l+1`. With `S = Σ n_i^α` over the histogram of frame `l`,
//!
//! ```text
//! ω = 1/(1-α) · log2( (S - n_a^α - n_b^α + (n_a-1)^α + (n_b+1)^α) / S )
//! ```
//!
//! which needs O(1) work per pixel once the per-level powers are tabulated.
//! `α = 1` uses the Shannon limit. All entropies are in bits.
//!
//! `I_α` (PDGE) sums `|ω|` over all pixels, `P_α` (PDGED) sums the distinct
//! values of `|ω|` once each.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::LN_2;
use serde::{Deserialize, Serialize};

use crate::frame::{Frame, FrameError};

/// α grid used for the spectra of the simulated BZ series.
pub const DEFAULT_ALPHAS: [f64; 13] = [0.1, 0.3, 0.5, 0.7, 0.99, 1.3, 1.5, 1.7, 2.0, 2.5, 3.0, 3.5, 4.0];

/// `|ω|` values are rounded to this many significant decimal digits before
/// deciding distinctness for `P_α`.
pub const DEFAULT_DISTINCT_DIGITS: u32 = 12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PdgError {
    #[error("alpha must be a positive finite number, got {0}")]
    InvalidAlpha(f64),
    #[error("alpha list is empty")]
    EmptyAlphaList,
    #[error("histogram has no samples")]
    EmptyHistogram,
    #[error("pixel ({x}, {y}) is outside the frame")]
    PixelOutOfRange { x: usize, y: usize },
    #[error(transparent)]
    Frame(#[from] FrameError),
}

pub fn check_alpha(alpha: f64) -> Result<(), PdgError> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(PdgError::InvalidAlpha(alpha))
    }
}

/// Counts per intensity level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    counts: Vec<u64>,
    total: u64,
}

impl Histogram {
    pub fn from_counts(counts: Vec<u64>) -> Result<Self, PdgError> {
        let total = counts.iter().sum();
        if total == 0 {
            return Err(PdgError::EmptyHistogram);
        }
        Ok(Self { counts, total })
    }

    pub fn from_frame(frame: &Frame) -> Self {
        let mut counts = alloc::vec![0u64; frame.levels()];
        for &p in frame.pixels() {
            counts[p as usize] += 1;
        }
        Self { counts, total: frame.len() as u64 }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

/// Rényi entropy `H_α = 1/(1-α) · log2 Σ p_i^α` in bits; Shannon entropy at `α = 1`.
pub fn renyi_entropy(hist: &Histogram, alpha: f64) -> Result<f64, PdgError> {
    check_alpha(alpha)?;
    let n = hist.total as f64;
    let occupied = hist.counts.iter().filter(|&&c| c > 0);
    let h = if alpha == 1.0 {
        -occupied
            .map(|&c| {
                let p = c as f64 / n;
                p * libm::log2(p)
            })
            .sum::<f64>()
    } else {
        let s: f64 = occupied.map(|&c| libm::pow(c as f64 / n, alpha)).sum();
        libm::log2(s) / (1.0 - alpha)
    };
    // A degenerate histogram gives -0.0 or tiny negative dust.
    Ok(h.max(0.0))
}

/// Per-level terms of the incremental divergence for one frame and one α.
///
/// For `α ≠ 1` the level term is `f(n) = n^α`; for `α = 1` it is
/// `f(n) = n ln n`. Only occupied levels and their neighbours `n ± 1` are
/// ever needed, so they are tabulated per level.
struct DivergenceKernel<'h> {
    alpha: f64,
    counts: &'h [u64],
    /// `(f(n - 1) - f(n), f(n + 1) - f(n))` per level.
    deltas: Vec<(f64, f64)>,
    /// Converts a summed delta into ω.
    scale: Scale,
}

enum Scale {
    Renyi { power_sum: f64 },
    Shannon { total: f64 },
}

impl<'h> DivergenceKernel<'h> {
    fn new(hist: &'h Histogram, alpha: f64) -> Self {
        let term = |n: u64| -> f64 {
            let n = n as f64;
            if alpha == 1.0 {
                if n == 0.0 {
                    0.0
                } else {
                    n * libm::log(n)
                }
            } else {
                libm::pow(n, alpha)
            }
        };
        let empty_level = (0.0, term(1));
        let mut power_sum = 0.0;
        let deltas = hist
            .counts
            .iter()
            .map(|&n| {
                if n == 0 {
                    return empty_level;
                }
                let here = term(n);
                power_sum += here;
                (term(n - 1) - here, term(n + 1) - here)
            })
            .collect();
        let scale = if alpha == 1.0 { Scale::Shannon { total: hist.total as f64 } } else { Scale::Renyi { power_sum } };
        Self { alpha, counts: &hist.counts, deltas, scale }
    }

    /// ω for replacing one pixel of intensity `a` with intensity `b`.
    fn omega(&self, a: u16, b: u16) -> f64 {
        if a == b {
            return 0.0;
        }
        let (na, nb) = (self.counts[a as usize], self.counts[b as usize]);
        // The count multiset is unchanged.
        if na == nb + 1 {
            return 0.0;
        }
        let delta = self.deltas[a as usize].0 + self.deltas[b as usize].1;
        match self.scale {
            Scale::Renyi { power_sum } => libm::log1p(delta / power_sum) / ((1.0 - self.alpha) * LN_2),
            Scale::Shannon { total } => -delta / (total * LN_2),
        }
    }
}

/// Point divergence gain at pixel `(x, y)` for the pair `(frame_l, frame_l1)`.
pub fn pdg(frame_l: &Frame, frame_l1: &Frame, x: usize, y: usize, alpha: f64) -> Result<f64, PdgError> {
    check_alpha(alpha)?;
    frame_l.check_compatible(frame_l1)?;
    let (Some(a), Some(b)) = (frame_l.get(x, y), frame_l1.get(x, y)) else {
        return Err(PdgError::PixelOutOfRange { x, y });
    };
    let hist = Histogram::from_frame(frame_l);
    Ok(DivergenceKernel::new(&hist, alpha).omega(a, b))
}

/// Signed ω for every pixel of one frame pair at one α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdgMap {
    pub width: usize,
    pub height: usize,
    pub alpha: f64,
    /// Indices of the source frames `(l, l+1)`.
    pub pair: (usize, usize),
    pub values: Vec<f64>,
}

impl PdgMap {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// ω for every pixel, each substitution evaluated against the unmodified
/// histogram of `frame_l`.
pub fn pdg_map(frame_l: &Frame, frame_l1: &Frame, alpha: f64) -> Result<PdgMap, PdgError> {
    pdg_map_for_pair(frame_l, frame_l1, alpha, (0, 1))
}

pub fn pdg_map_for_pair(
    frame_l: &Frame,
    frame_l1: &Frame,
    alpha: f64,
    pair: (usize, usize),
) -> Result<PdgMap, PdgError> {
    check_alpha(alpha)?;
    frame_l.check_compatible(frame_l1)?;
    let hist = Histogram::from_frame(frame_l);
    let kernel = DivergenceKernel::new(&hist, alpha);
    let values = frame_l.pixels().iter().zip(frame_l1.pixels()).map(|(&a, &b)| kernel.omega(a, b)).collect();
    Ok(PdgMap { width: frame_l.width(), height: frame_l.height(), alpha, pair, values })
}

/// `I_α = Σ |ω|`.
pub fn pdge(map: &PdgMap) -> f64 {
    map.values.iter().map(|w| w.abs()).sum()
}

/// `P_α`: sum of the distinct non-zero `|ω|` values, distinctness judged at
/// [`DEFAULT_DISTINCT_DIGITS`] significant digits.
pub fn pdged(map: &PdgMap) -> f64 {
    pdged_with_digits(map, DEFAULT_DISTINCT_DIGITS)
}

pub fn pdged_with_digits(map: &PdgMap, digits: u32) -> f64 {
    let magnitudes: Vec<f64> = map.values.iter().map(|w| w.abs()).collect();
    distinct_sum(&magnitudes, digits)
}

/// Sums each distinct non-zero value once, taking its first occurrence and
/// adding in the original order. Summing the first representative (not the
/// rounded key) in the same order as the full sum keeps `P_α ≤ I_α` exact in
/// floating point.
fn distinct_sum(values: &[f64], digits: u32) -> f64 {
    let mut keyed: Vec<(u64, usize)> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(i, &v)| (round_significant(v, digits).to_bits(), i))
        .collect();
    keyed.sort_unstable();
    let mut first = alloc::vec![false; values.len()];
    for (j, &(key, i)) in keyed.iter().enumerate() {
        if j == 0 || keyed[j - 1].0 != key {
            first[i] = true;
        }
    }
    values.iter().zip(&first).filter(|(_, &f)| f).map(|(v, _)| v).sum()
}

/// Rounds a positive finite value to `digits` significant decimal digits.
pub fn round_significant(value: f64, digits: u32) -> f64 {
    if value == 0.0 || !value.is_finite() {
        return value;
    }
    let exponent = libm::floor(libm::log10(value.abs())) as i32;
    let shift = digits as i32 - 1 - exponent;
    let rounded = libm::round(value * pow10(shift));
    if shift >= 0 {
        rounded / pow10(shift)
    } else {
        rounded * pow10(-shift)
    }
}

/// `10^e`, exact from a table for `0 ≤ e ≤ 22`.
fn pow10(e: i32) -> f64 {
    const EXACT: [f64; 23] = [
        1e0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8, 1e9, 1e10, 1e11, 1e12, 1e13, 1e14, 1e15, 1e16, 1e17, 1e18, 1e19,
        1e20, 1e21, 1e22,
    ];
    match usize::try_from(e) {
        Ok(i) if i < EXACT.len() => EXACT[i],
        _ => libm::pow(10.0, e as f64),
    }
}

/// `I_α` and `P_α` over an α grid for one frame pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSpectrum {
    pub pair_index: usize,
    pub alphas: Vec<f64>,
    pub pdge: Vec<f64>,
    pub pdged: Vec<f64>,
}

/// Spectrum of one frame pair. Pixels are grouped by the counts of their two
/// levels first, so each distinct `(n_a, n_b)` is evaluated once per α.
pub fn spectrum(frame_l: &Frame, frame_l1: &Frame, alphas: &[f64]) -> Result<AlphaSpectrum, PdgError> {
    spectrum_for_pair(frame_l, frame_l1, alphas, 0)
}

pub fn spectrum_for_pair(
    frame_l: &Frame,
    frame_l1: &Frame,
    alphas: &[f64],
    pair_index: usize,
) -> Result<AlphaSpectrum, PdgError> {
    if alphas.is_empty() {
        return Err(PdgError::EmptyAlphaList);
    }
    for &alpha in alphas {
        check_alpha(alpha)?;
    }
    frame_l.check_compatible(frame_l1)?;
    let hist = Histogram::from_frame(frame_l);
    let substitutions = count_classes(&hist, substitution_counts(frame_l, frame_l1));

    let mut pdge = Vec::with_capacity(alphas.len());
    let mut pdged = Vec::with_capacity(alphas.len());
    let mut magnitudes = Vec::with_capacity(substitutions.len());
    for &alpha in alphas {
        let kernel = DivergenceKernel::new(&hist, alpha);
        magnitudes.clear();
        magnitudes.extend(substitutions.iter().map(|&(a, b, _)| kernel.omega(a, b).abs()));
        pdge.push(substitutions.iter().zip(&magnitudes).map(|(&(_, _, count), &w)| count as f64 * w).sum());
        pdged.push(distinct_sum(&magnitudes, DEFAULT_DISTINCT_DIGITS));
    }
    Ok(AlphaSpectrum { pair_index, alphas: alphas.to_vec(), pdge, pdged })
}

/// ω of a substitution depends only on the counts of its two levels. Merges
/// substitutions with equal `(n_a, n_b)` into one representative `(a, b, count)`.
fn count_classes(hist: &Histogram, substitutions: Vec<(u16, u16, u64)>) -> Vec<(u16, u16, u64)> {
    let mut classes: BTreeMap<(u64, u64), (u16, u16, u64)> = BTreeMap::new();
    for (a, b, count) in substitutions {
        let key = (hist.counts[a as usize], hist.counts[b as usize]);
        classes.entry(key).or_insert((a, b, 0)).2 += count;
    }
    classes.into_values().collect()
}

/// `(a, b, count)` for every substitution with `a ≠ b`, sorted by `(a, b)`.
fn substitution_counts(frame_l: &Frame, frame_l1: &Frame) -> Vec<(u16, u16, u64)> {
    let mut codes: Vec<u32> = frame_l
        .pixels()
        .iter()
        .zip(frame_l1.pixels())
        .filter(|(a, b)| a != b)
        .map(|(&a, &b)| ((a as u32) << 16) | b as u32)
        .collect();
    codes.sort_unstable();
    let mut out: Vec<(u16, u16, u64)> = Vec::new();
    for code in codes {
        let (a, b) = ((code >> 16) as u16, code as u16);
        match out.last_mut() {
            Some(last) if last.0 == a && last.1 == b => last.2 += 1,
            _ => out.push((a, b, 1)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn frame(w: usize, h: usize, depth: u8, px: &[u16]) -> Frame {
        Frame::new(w, h, depth, px.to_vec()).unwrap()
    }

    #[test]
    fn degenerate_histogram_has_zero_entropy() {
        let h = Histogram::from_counts(vec![0, 7, 0]).unwrap();
        for &a in DEFAULT_ALPHAS.iter().chain(&[1.0]) {
            assert_eq!(renyi_entropy(&h, a).unwrap(), 0.0);
        }
    }

    #[test]
    fn uniform_histogram_is_log_levels() {
        let h = Histogram::from_counts(vec![5, 5, 5, 5]).unwrap();
        for &a in DEFAULT_ALPHAS.iter().chain(&[1.0]) {
            assert!((renyi_entropy(&h, a).unwrap() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn collision_entropy_of_three_one() {
        // -log2((9 + 1) / 16)
        let h = Histogram::from_counts(vec![3, 1]).unwrap();
        let expected = libm::log2(16.0 / 10.0);
        assert!((renyi_entropy(&h, 2.0).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.678_071_905_112_638).abs() < 1e-12);
    }

    #[test]
    fn invalid_inputs() {
        let h = Histogram::from_counts(vec![1]).unwrap();
        assert_eq!(renyi_entropy(&h, 0.0), Err(PdgError::InvalidAlpha(0.0)));
        assert!(renyi_entropy(&h, -1.0).is_err());
        assert!(renyi_entropy(&h, f64::NAN).is_err());
        assert_eq!(Histogram::from_counts(vec![0, 0]), Err(PdgError::EmptyHistogram));
        let f = frame(2, 1, 4, &[0, 1]);
        let g = frame(1, 2, 4, &[0, 1]);
        assert!(matches!(pdg_map(&f, &g, 2.0), Err(PdgError::Frame(FrameError::DimensionMismatch(..)))));
        assert_eq!(pdg(&f, &f, 3, 0, 2.0), Err(PdgError::PixelOutOfRange { x: 3, y: 0 }));
        assert_eq!(spectrum(&f, &f, &[]), Err(PdgError::EmptyAlphaList));
    }

    #[test]
    fn two_by_two_substitution() {
        // {n0 = 3, n1 = 1} -> {4, 0}: ω = H2({4}) - H2({3,1}) = -log2(1.6).
        let l = frame(2, 2, 1, &[0, 0, 0, 1]);
        let l1 = frame(2, 2, 1, &[0, 0, 0, 0]);
        let w = pdg(&l, &l1, 1, 1, 2.0).unwrap();
        assert!((w + libm::log2(1.6)).abs() < 1e-15, "{w}");
        assert_eq!(pdg(&l, &l1, 0, 0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn equal_count_swap_is_exactly_zero() {
        // n_2 = 3, n_5 = 2 -> substituting 2 by 5 leaves counts {2, 3}.
        let l = frame(5, 1, 4, &[2, 2, 2, 5, 5]);
        let l1 = frame(5, 1, 4, &[5, 5, 5, 5, 5]);
        for &a in DEFAULT_ALPHAS.iter().chain(&[1.0]) {
            assert_eq!(pdg(&l, &l1, 0, 0, a).unwrap(), 0.0);
        }
    }

    #[test]
    fn single_pixel_frames_give_zero() {
        let l = frame(1, 1, 8, &[3]);
        let l1 = frame(1, 1, 8, &[200]);
        let map = pdg_map(&l, &l1, 0.5).unwrap();
        assert_eq!(map.values, vec![0.0]);
    }

    #[test]
    fn identical_frames_give_zero_spectrum() {
        let f = frame(3, 2, 8, &[1, 2, 3, 4, 5, 5]);
        let s = spectrum(&f, &f, &DEFAULT_ALPHAS).unwrap();
        assert_eq!(s.pdge, vec![0.0; 13]);
        assert_eq!(s.pdged, vec![0.0; 13]);
        assert!(pdg_map(&f, &f, 2.0).unwrap().values.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn pdge_and_pdged_on_small_maps() {
        let map = |values: Vec<f64>| PdgMap { width: values.len(), height: 1, alpha: 2.0, pair: (0, 1), values };
        assert_eq!(pdge(&map(vec![0.0, 0.0])), 0.0);
        assert_eq!(pdged(&map(vec![0.0, 0.0])), 0.0);
        assert_eq!(pdge(&map(vec![0.5, -0.5])), 1.0);
        assert_eq!(pdged(&map(vec![0.5, 0.5, 0.25])), 0.75);
        // Signs are ignored: |+0.5| and |-0.5| are one level.
        assert_eq!(pdged(&map(vec![0.5, -0.5])), 0.5);
    }

    #[test]
    fn rounding_to_significant_digits() {
        assert_eq!(round_significant(0.123_456_789_012_345, 12), 0.123_456_789_012);
        assert_eq!(round_significant(1234.5, 2), 1200.0);
        assert_eq!(round_significant(1.0 / 3.0, 12).to_bits(), round_significant(1.0 / 3.0 + 1e-17, 12).to_bits());
    }
}
