use alloc::format;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ComponentLabel, ComponentMask, LcmsError, LcmsGrid, Peak};

/// A constant-in-time ridge added to one mass row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RidgeSpec {
    pub row: usize,
    pub amplitude: f64,
}

/// A Gaussian-in-time peak covering `mass_rows` rows starting at `row`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeakSpec {
    pub row: usize,
    #[serde(default = "one")]
    pub mass_rows: usize,
    /// Apex position in scans.
    pub t0: f64,
    /// Gaussian standard deviation in scans.
    pub width: f64,
    pub height: f64,
}

fn one() -> usize {
    1
}

impl PeakSpec {
    pub fn contribution(&self, t: usize) -> f64 {
        let d = (t as f64 - self.t0) / self.width;
        self.height * libm::exp(-0.5 * d * d)
    }

    /// Height over the noise envelope.
    pub fn snr(&self, envelope: f64) -> f64 {
        self.height / envelope
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub rows: usize,
    pub cols: usize,
    pub mu: f64,
    pub sigma: f64,
    pub envelope_k: f64,
    pub mz_start: f64,
    pub mz_step: f64,
    pub seconds_per_scan: f64,
    pub ridges: Vec<RidgeSpec>,
    pub peaks: Vec<PeakSpec>,
    pub spike_count: usize,
    pub spike_height: f64,
}

const DEFAULT_RIDGE_ROWS: [usize; 5] = [15, 38, 61, 84, 107];
const DEFAULT_PEAK_ROWS: [usize; 6] = [4, 26, 49, 72, 95, 116];
const DEFAULT_PEAK_SLOTS: usize = 6;

impl Default for SynthConfig {
    /// 120 × 400 grid with about 93 % noise cells: five ridges, 36 peaks at
    /// SNR 5 to 15 and 30 spikes.
    fn default() -> Self {
        let (mu, sigma, k) = (6.0, 0.3, super::DEFAULT_ENVELOPE_K);
        let envelope = libm::exp(mu + k * sigma);
        let ridges = DEFAULT_RIDGE_ROWS.iter().map(|&row| RidgeSpec { row, amplitude: 3.0 * envelope }).collect();
        let mut peaks = Vec::new();
        for (i, &row) in DEFAULT_PEAK_ROWS.iter().enumerate() {
            for j in 0..DEFAULT_PEAK_SLOTS {
                let n = i * DEFAULT_PEAK_SLOTS + j;
                peaks.push(PeakSpec {
                    row,
                    mass_rows: 1 + n % 2,
                    t0: 35.0 + 66.0 * j as f64 + (n % 3) as f64 * 0.25,
                    width: 3.0 + (n % 4) as f64,
                    height: envelope * (5.0 + (n * 7 % 11) as f64),
                });
            }
        }
        Self {
            rows: 120,
            cols: 400,
            mu,
            sigma,
            envelope_k: k,
            mz_start: 100.0,
            mz_step: 1.0,
            seconds_per_scan: 1.0,
            ridges,
            peaks,
            spike_count: 30,
            spike_height: 8.0 * envelope,
        }
    }
}

impl SynthConfig {
    /// Only noise, no structure.
    pub fn pure_noise(rows: usize, cols: usize, mu: f64, sigma: f64) -> Self {
        Self { rows, cols, mu, sigma, ridges: Vec::new(), peaks: Vec::new(), spike_count: 0, ..Self::default() }
    }

    /// True envelope `exp(μ + kσ)`.
    pub fn envelope(&self) -> f64 {
        libm::exp(self.mu + self.envelope_k * self.sigma)
    }

    pub fn mz(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.mz_start + self.mz_step * r as f64).collect()
    }

    pub fn validate(&self) -> Result<(), LcmsError> {
        let bad = |msg: alloc::string::String| Err(LcmsError::InvalidConfig(msg));
        if self.rows == 0 || self.cols == 0 {
            return bad("grid dimensions must be positive".into());
        }
        if !self.mu.is_finite() || !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return bad("noise needs finite μ and σ ≥ 0".into());
        }
        if !(self.envelope_k.is_finite() && self.envelope_k >= 0.0) {
            return bad("envelope_k must be ≥ 0".into());
        }
        if !self.mz_start.is_finite() || !(self.mz_step.is_finite() && self.mz_step > 0.0) {
            return bad("m/z axis needs a finite start and a positive step".into());
        }
        if !(self.seconds_per_scan.is_finite() && self.seconds_per_scan > 0.0) {
            return bad("seconds_per_scan must be positive".into());
        }
        for (i, r) in self.ridges.iter().enumerate() {
            if r.row >= self.rows || !(r.amplitude.is_finite() && r.amplitude >= 0.0) {
                return bad(format!("ridge {i} is outside the grid or has a negative amplitude"));
            }
        }
        for (i, p) in self.peaks.iter().enumerate() {
            if p.mass_rows == 0 || p.row + p.mass_rows > self.rows {
                return bad(format!("peak {i} rows fall outside the grid"));
            }
            if !p.t0.is_finite()
                || !(p.width.is_finite() && p.width > 0.0)
                || !(p.height.is_finite() && p.height >= 0.0)
            {
                return bad(format!("peak {i} needs finite t0, width > 0 and height ≥ 0"));
            }
        }
        if self.spike_count > 0 && !(self.spike_height.is_finite() && self.spike_height > 0.0) {
            return bad("spike_height must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthOutput {
    pub grid: LcmsGrid,
    pub truth: ComponentMask,
    /// One entry per configured peak, in configuration order.
    pub peaks: Vec<Peak>,
    pub spikes: Vec<(usize, usize)>,
    pub envelope: f64,
}

const SPIKE_ATTEMPTS_PER_SPIKE: usize = 10_000;
/// Peak contribution, as a fraction of the envelope, that keeps spikes away.
const SPIKE_CLEARANCE: f64 = 0.01;

/// Log-normal noise plus ridges, Gaussian peaks and isolated spikes.
///
/// Ground truth: spike cells are `spike`; peak cells whose contribution lifts
/// the median noise level `exp(μ)` above the envelope are `s`; every cell of a
/// ridge row is otherwise `q`; the rest is `r`.
pub fn synth_generate(config: &SynthConfig, seed: u64) -> Result<SynthOutput, LcmsError> {
    config.validate()?;
    let (rows, cols) = (config.rows, config.cols);
    let n = rows * cols;
    let envelope = config.envelope();
    let median_noise = libm::exp(config.mu);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut y: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            libm::exp(config.mu + config.sigma * z)
        })
        .collect();

    let mut truth = ComponentMask::filled(rows, cols, ComponentLabel::R);
    let mut is_ridge = alloc::vec![false; rows];
    for r in &config.ridges {
        is_ridge[r.row] = true;
        for c in 0..cols {
            y[r.row * cols + c] += r.amplitude;
            truth.labels[r.row * cols + c] = ComponentLabel::Q;
        }
    }

    let mut signal = alloc::vec![0.0; n];
    let mut peaks = Vec::with_capacity(config.peaks.len());
    for spec in &config.peaks {
        let profile: Vec<f64> = (0..cols).map(|t| spec.contribution(t)).collect();
        let in_peak: Vec<usize> = (0..cols).filter(|&t| profile[t] + median_noise > envelope).collect();
        for row in spec.row..spec.row + spec.mass_rows {
            for t in 0..cols {
                signal[row * cols + t] += profile[t];
            }
            for &t in &in_peak {
                truth.labels[row * cols + t] = ComponentLabel::S;
            }
        }
        let apex_t = (libm::round(spec.t0).max(0.0) as usize).min(cols - 1);
        peaks.push(Peak {
            row_start: spec.row,
            row_end: spec.row + spec.mass_rows - 1,
            apex_row: spec.row,
            mz: config.mz_start + config.mz_step * spec.row as f64,
            mz_low: config.mz_start + config.mz_step * spec.row as f64,
            mz_high: config.mz_start + config.mz_step * (spec.row + spec.mass_rows - 1) as f64,
            t_start: in_peak.first().copied().unwrap_or(apex_t),
            t_end: in_peak.last().copied().unwrap_or(apex_t),
            apex_t,
            area: profile.iter().sum::<f64>() * spec.mass_rows as f64,
            max: profile[apex_t],
            cells: in_peak.len() * spec.mass_rows,
        });
    }
    for (v, s) in y.iter_mut().zip(&signal) {
        *v += s;
    }

    let mut spikes: Vec<(usize, usize)> = Vec::with_capacity(config.spike_count);
    let clearance = SPIKE_CLEARANCE * envelope;
    let mut attempts = 0;
    while spikes.len() < config.spike_count {
        attempts += 1;
        if attempts > SPIKE_ATTEMPTS_PER_SPIKE * config.spike_count {
            return Err(LcmsError::InvalidConfig(format!(
                "could only place {} of {} isolated spikes",
                spikes.len(),
                config.spike_count
            )));
        }
        let (r, c) = (rng.random_range(0..rows), rng.random_range(0..cols));
        let near = |nr: usize, nc: usize| is_ridge[nr] || signal[nr * cols + nc] >= clearance;
        let clear = (r.saturating_sub(1)..=(r + 1).min(rows - 1))
            .all(|nr| (c.saturating_sub(1)..=(c + 1).min(cols - 1)).all(|nc| !near(nr, nc)))
            && spikes.iter().all(|&(sr, sc)| sr.abs_diff(r) > 2 || sc.abs_diff(c) > 2);
        if clear {
            y[r * cols + c] += config.spike_height;
            truth.labels[r * cols + c] = ComponentLabel::Spike;
            spikes.push((r, c));
        }
    }

    let grid = LcmsGrid::new(rows, cols, y, config.mz(), config.seconds_per_scan)
        .map_err(|e| LcmsError::InvalidConfig(format!("generated grid is invalid: {e}")))?;
    Ok(SynthOutput { grid, truth, peaks, spikes, envelope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lcms::{
        classify, decompose, extract_peaks, fit_noise_envelope, quantize, score_label, DEFAULT_RIDGE_FRACTION,
    };
    use alloc::vec;

    #[test]
    fn pure_noise_is_all_r() {
        let out = synth_generate(&SynthConfig::pure_noise(20, 30, 2.0, 0.5), 3).unwrap();
        assert_eq!(out.truth.count(ComponentLabel::R), 600);
        assert!(out.peaks.is_empty() && out.spikes.is_empty());
    }

    #[test]
    fn zero_sigma_gives_peak_on_constant_background() {
        let cfg = SynthConfig {
            peaks: vec![PeakSpec { row: 1, mass_rows: 1, t0: 10.0, width: 2.0, height: 500.0 }],
            ..SynthConfig::pure_noise(3, 21, 1.0, 0.0)
        };
        let out = synth_generate(&cfg, 9).unwrap();
        let bg = libm::exp(1.0);
        for r in 0..3 {
            for t in 0..21 {
                let expect = bg + if r == 1 { cfg.peaks[0].contribution(t) } else { 0.0 };
                assert_eq!(out.grid.get(r, t), quantize(expect));
            }
        }
        assert_eq!(out.peaks[0].apex_t, 10);
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = SynthConfig::default();
        let a = synth_generate(&cfg, 5).unwrap();
        assert_eq!(a, synth_generate(&cfg, 5).unwrap());
        assert_ne!(a.grid, synth_generate(&cfg, 6).unwrap().grid);
    }

    #[test]
    fn default_noise_fraction_near_93_percent() {
        let out = synth_generate(&SynthConfig::default(), 1).unwrap();
        let f = out.truth.fraction(ComponentLabel::R);
        assert!((f - 0.93).abs() <= 0.01, "noise fraction {f}");
        assert_eq!(out.spikes.len(), 30);
    }

    #[test]
    fn invalid_configs() {
        let base = SynthConfig::default();
        assert!(synth_generate(&SynthConfig { rows: 0, ..base.clone() }, 0).is_err());
        assert!(synth_generate(&SynthConfig { sigma: -1.0, ..base.clone() }, 0).is_err());
        let mut p = base.clone();
        p.peaks[0].width = 0.0;
        assert!(matches!(synth_generate(&p, 0), Err(LcmsError::InvalidConfig(_))));
        let mut r = base.clone();
        r.ridges[0].row = 500;
        assert!(synth_generate(&r, 0).is_err());
        let crowded = SynthConfig { spike_count: 10_000, ..SynthConfig::pure_noise(5, 5, 1.0, 0.1) };
        assert!(synth_generate(&crowded, 0).is_err());
    }

    #[test]
    fn spikes_are_isolated_in_truth() {
        let out = synth_generate(&SynthConfig::default(), 11).unwrap();
        let (rows, cols) = (out.grid.rows(), out.grid.cols());
        for &(r, c) in &out.spikes {
            for nr in r.saturating_sub(1)..=(r + 1).min(rows - 1) {
                for nc in c.saturating_sub(1)..=(c + 1).min(cols - 1) {
                    if (nr, nc) != (r, c) {
                        assert_eq!(out.truth.get(nr, nc), ComponentLabel::R);
                    }
                }
            }
        }
    }

    #[test]
    fn single_peak_area_and_apex() {
        let cfg = SynthConfig {
            peaks: vec![PeakSpec { row: 10, mass_rows: 1, t0: 100.0, width: 5.0, height: 0.0 }],
            ..SynthConfig::pure_noise(40, 200, 6.0, 0.3)
        };
        for seed in 0..5 {
            let mut cfg = cfg.clone();
            cfg.peaks[0].height = 5.0 * cfg.envelope();
            let out = synth_generate(&cfg, seed).unwrap();
            let model = fit_noise_envelope(&out.grid).unwrap();
            let mask = classify(&out.grid, &model, DEFAULT_RIDGE_FRACTION).unwrap();
            let parts = decompose(&out.grid, &mask, &model).unwrap();
            let found = extract_peaks(&parts.s, 40, 200, out.grid.mz()).unwrap();
            let main = found.iter().max_by(|a, b| a.area.total_cmp(&b.area)).unwrap();
            assert!(main.apex_t.abs_diff(100) <= 1, "apex {}", main.apex_t);
            let rel = (main.area - out.peaks[0].area).abs() / out.peaks[0].area;
            assert!(rel <= 0.10, "seed {seed}: area error {rel}");
            let score = score_label(&mask, &out.truth, ComponentLabel::S).unwrap();
            assert!(score.recall >= 0.8);
        }
    }
}
