//! Additive decomposition `y = r + q + s` of LC-MS intensity grids into random
//! chemical noise `r`, systematic ridge noise `q` and analyte signal `s`.
//!
//! Rows are mass bins, columns are scans. Intensities are stored on a fixed
//! binary quantum ([`QUANTUM`]) so that the decomposition is exact in `f64`.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

mod analysis;
mod peaks;
mod synth;

pub use analysis::{
    classify, decompose, fit_noise_envelope, fit_noise_envelope_with, score_label, Components, LabelScore, NoiseModel,
    DEFAULT_CLIP_SIGMAS, DEFAULT_ENVELOPE_K, DEFAULT_RIDGE_FRACTION, MIN_POSITIVE_CELLS,
};
pub use peaks::{extract_peaks, subtract_blank, Peak};
pub use synth::{synth_generate, PeakSpec, RidgeSpec, SynthConfig, SynthOutput};

/// Intensity quantum, `2^-16`.
pub const QUANTUM: f64 = 1.0 / 65536.0;
/// Exclusive upper bound on stored intensities, `2^34`.
pub const MAX_INTENSITY: f64 = 17_179_869_184.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LcmsError {
    #[error("grid has no cells")]
    EmptyGrid,
    #[error("expected {expected} values, got {actual}")]
    ValueCount { expected: usize, actual: usize },
    #[error("expected {expected} m/z values, got {actual}")]
    AxisLength { expected: usize, actual: usize },
    #[error("invalid intensity {value} at row {row}, column {col}")]
    InvalidIntensity { row: usize, col: usize, value: f64 },
    #[error("invalid axis calibration: {0}")]
    InvalidAxis(String),
    #[error("mask shape does not match the grid")]
    MaskShape,
    #[error("need at least {needed} positive cells for a noise fit, found {found}")]
    DegenerateData { needed: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid synthetic configuration: {0}")]
    InvalidConfig(String),
}

/// Round to the nearest multiple of [`QUANTUM`].
pub fn quantize(value: f64) -> f64 {
    libm::round(value * 65536.0) * QUANTUM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcmsGrid {
    rows: usize,
    cols: usize,
    /// m/z of each row.
    mz: Vec<f64>,
    seconds_per_scan: f64,
    values: Vec<f64>,
}

impl LcmsGrid {
    /// Values are row-major and are rounded onto the [`QUANTUM`] grid.
    pub fn new(
        rows: usize,
        cols: usize,
        values: Vec<f64>,
        mz: Vec<f64>,
        seconds_per_scan: f64,
    ) -> Result<Self, LcmsError> {
        if rows == 0 || cols == 0 {
            return Err(LcmsError::EmptyGrid);
        }
        if values.len() != rows * cols {
            return Err(LcmsError::ValueCount { expected: rows * cols, actual: values.len() });
        }
        if mz.len() != rows {
            return Err(LcmsError::AxisLength { expected: rows, actual: mz.len() });
        }
        if mz.iter().any(|m| !m.is_finite()) {
            return Err(LcmsError::InvalidAxis("m/z values must be finite".into()));
        }
        if !(seconds_per_scan.is_finite() && seconds_per_scan > 0.0) {
            return Err(LcmsError::InvalidAxis("seconds per scan must be positive".into()));
        }
        let mut values = values;
        for (i, v) in values.iter_mut().enumerate() {
            if !(v.is_finite() && *v >= 0.0 && *v < MAX_INTENSITY) {
                return Err(LcmsError::InvalidIntensity { row: i / cols, col: i % cols, value: *v });
            }
            *v = quantize(*v);
        }
        Ok(Self { rows, cols, mz, seconds_per_scan, values })
    }

    /// Rows at m/z `100, 101, ...`, one second per scan.
    pub fn with_default_axes(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, LcmsError> {
        Self::new(rows, cols, values, default_mz(rows), 1.0)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn mz(&self) -> &[f64] {
        &self.mz
    }

    pub fn seconds_per_scan(&self) -> f64 {
        self.seconds_per_scan
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub(crate) fn default_mz(rows: usize) -> Vec<f64> {
    (0..rows).map(|r| 100.0 + r as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentLabel {
    R,
    Q,
    S,
    Spike,
}

impl ComponentLabel {
    pub const ALL: [ComponentLabel; 4] = [Self::R, Self::Q, Self::S, Self::Spike];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::R => "r",
            Self::Q => "q",
            Self::S => "s",
            Self::Spike => "spike",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.as_str() == s)
    }
}

/// One label per cell, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentMask {
    pub rows: usize,
    pub cols: usize,
    pub labels: Vec<ComponentLabel>,
}

impl ComponentMask {
    pub fn filled(rows: usize, cols: usize, label: ComponentLabel) -> Self {
        Self { rows, cols, labels: alloc::vec![label; rows * cols] }
    }

    pub fn get(&self, row: usize, col: usize) -> ComponentLabel {
        self.labels[row * self.cols + col]
    }

    pub fn count(&self, label: ComponentLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn fraction(&self, label: ComponentLabel) -> f64 {
        self.count(label) as f64 / self.labels.len() as f64
    }

    pub fn matches(&self, grid: &LcmsGrid) -> bool {
        self.rows == grid.rows && self.cols == grid.cols && self.labels.len() == grid.len()
    }
}
