use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{quantize, ComponentLabel, ComponentMask, LcmsError, LcmsGrid};
use crate::stats::{median_in_place, median_mad, MAD_TO_SIGMA};

pub const DEFAULT_ENVELOPE_K: f64 = 4.0;
pub const DEFAULT_RIDGE_FRACTION: f64 = 0.8;
/// Log-domain clipping threshold, in fitted σ, for the robust refit.
pub const DEFAULT_CLIP_SIGMAS: f64 = 3.0;
pub const MIN_POSITIVE_CELLS: usize = 100;
const MAX_CLIP_ROUNDS: usize = 50;

/// Log-normal model of the random noise and its envelope `exp(μ + kσ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub mu: f64,
    pub sigma: f64,
    pub k: f64,
    pub envelope: f64,
    pub positive_cells: usize,
    /// Cells left after clipping; the final fit uses only these.
    pub fitted_cells: usize,
    /// `σ == 0`: every positive cell has the same value.
    pub degenerate: bool,
}

impl NoiseModel {
    pub fn new(mu: f64, sigma: f64, k: f64) -> Result<Self, LcmsError> {
        if !mu.is_finite() || !(sigma.is_finite() && sigma >= 0.0) || !(k.is_finite() && k >= 0.0) {
            return Err(LcmsError::InvalidParameter("noise model needs finite μ, σ ≥ 0 and k ≥ 0".into()));
        }
        Ok(Self {
            mu,
            sigma,
            k,
            envelope: libm::exp(mu + k * sigma),
            positive_cells: 0,
            fitted_cells: 0,
            degenerate: sigma == 0.0,
        })
    }

    /// Same fit, different envelope multiplier.
    pub fn with_k(&self, k: f64) -> Self {
        Self { k, envelope: libm::exp(self.mu + k * self.sigma), ..self.clone() }
    }

    /// Mean of the fitted log-normal, `exp(μ + σ²/2)`.
    pub fn mean_level(&self) -> f64 {
        libm::exp(self.mu + 0.5 * self.sigma * self.sigma)
    }
}

pub fn fit_noise_envelope(grid: &LcmsGrid) -> Result<NoiseModel, LcmsError> {
    fit_noise_envelope_with(grid, DEFAULT_ENVELOPE_K, DEFAULT_CLIP_SIGMAS)
}

/// Median / MAD fit of `ln y` over positive cells, refitted after dropping
/// cells above `μ + clip_sigmas·σ` until the retained set stops changing.
pub fn fit_noise_envelope_with(grid: &LcmsGrid, k: f64, clip_sigmas: f64) -> Result<NoiseModel, LcmsError> {
    if !(k.is_finite() && k >= 0.0) {
        return Err(LcmsError::InvalidParameter("envelope multiplier must be finite and ≥ 0".into()));
    }
    if !(clip_sigmas > 0.0) {
        return Err(LcmsError::InvalidParameter("clip threshold must be positive".into()));
    }
    let logs: Vec<f64> = grid.values().iter().filter(|&&v| v > 0.0).map(|&v| libm::log(v)).collect();
    if logs.len() < MIN_POSITIVE_CELLS {
        return Err(LcmsError::DegenerateData { needed: MIN_POSITIVE_CELLS, found: logs.len() });
    }
    let (mut mu, mad) = median_mad(&logs).expect("non-empty");
    let mut sigma = mad * MAD_TO_SIGMA;
    let mut kept = logs.len();
    for _ in 0..MAX_CLIP_ROUNDS {
        if sigma == 0.0 {
            break;
        }
        let cutoff = mu + clip_sigmas * sigma;
        let subset: Vec<f64> = logs.iter().copied().filter(|&l| l <= cutoff).collect();
        if subset.len() == kept {
            break;
        }
        kept = subset.len();
        let (m, d) = median_mad(&subset).expect("the median itself survives clipping");
        mu = m;
        sigma = d * MAD_TO_SIGMA;
    }
    let mut model = NoiseModel::new(mu, sigma, k)?;
    model.positive_cells = logs.len();
    model.fitted_cells = kept;
    Ok(model)
}

/// Labels every cell.
///
/// Cells at or below the envelope are `r`. An above-envelope cell with no
/// above-envelope 8-neighbour is a `spike`. On rows where at least
/// `ridge_fraction` of the cells are above the envelope, above cells are `q`
/// unless they exceed the row's ridge level by more than the envelope, which
/// makes them `s`. All other above cells are `s`.
pub fn classify(grid: &LcmsGrid, model: &NoiseModel, ridge_fraction: f64) -> Result<ComponentMask, LcmsError> {
    if !(ridge_fraction > 0.0 && ridge_fraction <= 1.0) {
        return Err(LcmsError::InvalidParameter("ridge fraction must lie in (0, 1]".into()));
    }
    let (rows, cols) = (grid.rows(), grid.cols());
    let e = model.envelope;
    let above: Vec<bool> = grid.values().iter().map(|&y| y > e).collect();
    let mut mask = ComponentMask::filled(rows, cols, ComponentLabel::R);

    for r in 0..rows {
        let row_above = &above[r * cols..(r + 1) * cols];
        let n_above = row_above.iter().filter(|&&a| a).count();
        let ridge_level = if n_above as f64 >= ridge_fraction * cols as f64 {
            let mut vals: Vec<f64> = grid.row(r).iter().zip(row_above).filter(|(_, &a)| a).map(|(&y, _)| y).collect();
            Some(median_in_place(&mut vals))
        } else {
            None
        };
        for c in 0..cols {
            let i = r * cols + c;
            if !above[i] {
                continue;
            }
            mask.labels[i] = if is_isolated(&above, rows, cols, r, c) {
                ComponentLabel::Spike
            } else {
                match ridge_level {
                    Some(level) if grid.values()[i] <= level + e => ComponentLabel::Q,
                    _ => ComponentLabel::S,
                }
            };
        }
    }
    Ok(mask)
}

fn is_isolated(above: &[bool], rows: usize, cols: usize, r: usize, c: usize) -> bool {
    let rr = r.saturating_sub(1)..=(r + 1).min(rows - 1);
    rr.flat_map(|nr| (c.saturating_sub(1)..=(c + 1).min(cols - 1)).map(move |nc| (nr, nc)))
        .filter(|&(nr, nc)| (nr, nc) != (r, c))
        .all(|(nr, nc)| !above[nr * cols + nc])
}

/// The three additive components plus the levels used to form them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub rows: usize,
    pub cols: usize,
    pub r: Vec<f64>,
    pub q: Vec<f64>,
    pub s: Vec<f64>,
    /// `(row, level)` for every ridge row.
    pub ridge_levels: Vec<(usize, f64)>,
    /// Baseline subtracted from signal cells.
    pub noise_level: f64,
}

impl Components {
    /// Largest `|y - (r + q + s)|`; zero for every decomposition.
    pub fn max_residual(&self, grid: &LcmsGrid) -> f64 {
        grid.values()
            .iter()
            .enumerate()
            .map(|(i, &y)| libm::fabs(y - (self.r[i] + self.q[i] + self.s[i])))
            .fold(0.0, f64::max)
    }
}

/// Splits `y` into `r + q + s`.
///
/// `q` is the median of each ridge row's `q` cells and is applied to that
/// row's `q` and `s` cells. `s = max(y - q - noise, 0)` on `s` cells, where
/// `noise` is the fitted mean noise level, and `r = y - q - s` everywhere.
/// All terms sit on the intensity quantum, so the sum is exact.
pub fn decompose(grid: &LcmsGrid, mask: &ComponentMask, model: &NoiseModel) -> Result<Components, LcmsError> {
    if !mask.matches(grid) {
        return Err(LcmsError::MaskShape);
    }
    let (rows, cols) = (grid.rows(), grid.cols());
    let noise_level = quantize(model.mean_level());
    let n = grid.len();
    let (mut r, mut q, mut s) = (alloc::vec![0.0; n], alloc::vec![0.0; n], alloc::vec![0.0; n]);
    let mut ridge_levels = Vec::new();

    for row in 0..rows {
        let labels = &mask.labels[row * cols..(row + 1) * cols];
        let y = grid.row(row);
        let mut q_cells: Vec<f64> =
            y.iter().zip(labels).filter(|(_, &l)| l == ComponentLabel::Q).map(|(&v, _)| v).collect();
        let level = if q_cells.is_empty() {
            0.0
        } else {
            let level = quantize(median_in_place(&mut q_cells));
            ridge_levels.push((row, level));
            level
        };
        for c in 0..cols {
            let i = row * cols + c;
            let yi = y[c];
            match labels[c] {
                ComponentLabel::Q => q[i] = level,
                ComponentLabel::S => {
                    q[i] = level;
                    s[i] = (yi - level - noise_level).max(0.0);
                }
                ComponentLabel::R | ComponentLabel::Spike => {}
            }
            r[i] = yi - q[i] - s[i];
        }
    }
    Ok(Components { rows, cols, r, q, s, ridge_levels, noise_level })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    /// 1 when nothing was predicted.
    pub precision: f64,
    /// 1 when nothing was expected.
    pub recall: f64,
}

/// Cell-level precision and recall of `label` in `predicted` against `truth`.
pub fn score_label(
    predicted: &ComponentMask,
    truth: &ComponentMask,
    label: ComponentLabel,
) -> Result<LabelScore, LcmsError> {
    if predicted.rows != truth.rows || predicted.cols != truth.cols || predicted.labels.len() != truth.labels.len() {
        return Err(LcmsError::MaskShape);
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&p, &t) in predicted.labels.iter().zip(&truth.labels) {
        match (p == label, t == label) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    Ok(LabelScore {
        true_positive: tp,
        false_positive: fp,
        false_negative: fn_,
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
    })
}
