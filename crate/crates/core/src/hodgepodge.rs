//! Noisy hodgepodge machine.
//!
//! Cells hold a state in `0..=q`: `0` is healthy, `q` is ill, anything in
//! between is infected. With `A` the number of infected and `B` the number of
//! ill cells in the Moore neighbourhood and `S` the sum of states over the
//! cell and its eight neighbours, one synchronous step maps
//!
//! - healthy: `s' = ⌊A/k1⌋ + ⌊B/k2⌋`
//! - infected: `s' = ⌊S/(A+B+1)⌋ + g + η`
//! - ill: `s' = 0`
//!
//! and clamps to `[0, q]`. The noise `η` is uniform on `0..=η_max` with
//! probability `p_η` and zero otherwise. It is a pure function of
//! `(seed, step, cell index)`, so the update order cannot change the result.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::frame::{Frame, FrameSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Torus,
    /// Cells outside the lattice are permanently healthy.
    FixedHealthy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HodgepodgeParams {
    pub width: usize,
    pub height: usize,
    /// Ill state `q`.
    pub max_state: u16,
    pub k1: u32,
    pub k2: u32,
    pub growth: u32,
    pub noise_max: u32,
    pub noise_probability: f64,
    /// `(x, y)` cells that start ill.
    pub ignition: Vec<(usize, usize)>,
    #[serde(default)]
    pub boundary: Boundary,
    pub seed: u64,
}

impl Default for HodgepodgeParams {
    fn default() -> Self {
        Self {
            width: 128,
            height: 128,
            max_state: 200,
            k1: 2,
            k2: 1,
            growth: 24,
            noise_max: 4,
            noise_probability: 0.05,
            ignition: alloc::vec![(40, 40), (88, 72)],
            boundary: Boundary::Torus,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HodgepodgeError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: &'static str },
    #[error("lattice does not match the parameters")]
    LatticeMismatch,
}

fn invalid(field: &'static str, reason: &'static str) -> HodgepodgeError {
    HodgepodgeError::InvalidParams { field, reason }
}

impl HodgepodgeParams {
    pub fn validate(&self) -> Result<(), HodgepodgeError> {
        if self.width == 0 {
            return Err(invalid("width", "must be positive"));
        }
        if self.height == 0 {
            return Err(invalid("height", "must be positive"));
        }
        if self.max_state < 2 {
            return Err(invalid("max_state", "must be at least 2"));
        }
        if self.k1 == 0 {
            return Err(invalid("k1", "must be at least 1"));
        }
        if self.k2 == 0 {
            return Err(invalid("k2", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.noise_probability) {
            return Err(invalid("noise_probability", "must lie in [0, 1]"));
        }
        if self.ignition.iter().any(|&(x, y)| x >= self.width || y >= self.height) {
            return Err(invalid("ignition", "point outside the lattice"));
        }
        Ok(())
    }

    /// Smallest bit depth holding `0..=max_state`.
    pub fn bit_depth(&self) -> u8 {
        (16 - self.max_state.leading_zeros()).max(1) as u8
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<u16>,
    pub step: u64,
}

impl Lattice {
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.cells[y * self.width + x]
    }

    pub fn to_frame(&self, bit_depth: u8) -> Frame {
        Frame::new(self.width, self.height, bit_depth, self.cells.clone()).expect("states fit the bit depth")
    }
}

/// All cells healthy except the ignition points, which start ill.
pub fn init(params: &HodgepodgeParams) -> Result<Lattice, HodgepodgeError> {
    params.validate()?;
    let mut cells = alloc::vec![0u16; params.width * params.height];
    for &(x, y) in &params.ignition {
        cells[y * params.width + x] = params.max_state;
    }
    Ok(Lattice { width: params.width, height: params.height, cells, step: 0 })
}

/// One synchronous update.
pub fn step(lattice: &Lattice, params: &HodgepodgeParams) -> Lattice {
    let mut next = Lattice { width: lattice.width, height: lattice.height, cells: Vec::new(), step: 0 };
    step_into(lattice, &mut next, params);
    next
}

/// One synchronous update written into `next`, reusing its allocation.
pub fn step_into(lattice: &Lattice, next: &mut Lattice, params: &HodgepodgeParams) {
    let (w, h) = (lattice.width, lattice.height);
    assert_eq!((w, h), (params.width, params.height), "lattice does not match params");
    next.width = w;
    next.height = h;
    next.cells.resize(w * h, 0);
    next.step = lattice.step + 1;

    let q = params.max_state as u32;
    let noise = NoiseSource::new(params, lattice.step);
    let cells = &lattice.cells;
    for y in 0..h {
        let rows = neighbour_indices(y, h, params.boundary);
        for x in 0..w {
            let cols = neighbour_indices(x, w, params.boundary);
            let idx = y * w + x;
            let s = cells[idx] as u32;
            let mut infected = 0u32;
            let mut ill = 0u32;
            let mut sum = s;
            for (dy, ry) in rows.iter().enumerate() {
                let Some(ry) = ry else { continue };
                for (dx, cx) in cols.iter().enumerate() {
                    if dx == 1 && dy == 1 {
                        continue;
                    }
                    let Some(cx) = cx else { continue };
                    let v = cells[ry * w + cx] as u32;
                    sum += v;
                    if v == q {
                        ill += 1;
                    } else if v > 0 {
                        infected += 1;
                    }
                }
            }
            let new = if s == 0 {
                infected / params.k1 + ill / params.k2
            } else if s < q {
                sum / (infected + ill + 1) + params.growth + noise.sample(idx)
            } else {
                0
            };
            next.cells[idx] = new.min(q) as u16;
        }
    }
}

/// `[before, self, after]` along one axis.
#[inline]
fn neighbour_indices(i: usize, n: usize, boundary: Boundary) -> [Option<usize>; 3] {
    match boundary {
        Boundary::Torus => [Some((i + n - 1) % n), Some(i), Some((i + 1) % n)],
        Boundary::FixedHealthy => [i.checked_sub(1), Some(i), (i + 1 < n).then_some(i + 1)],
    }
}

struct NoiseSource {
    key: u64,
    max: u64,
    threshold: u64,
}

impl NoiseSource {
    fn new(params: &HodgepodgeParams, step: u64) -> Self {
        // p is compared against the low 32 bits of the cell hash.
        let threshold = libm::floor(params.noise_probability * 4_294_967_296.0) as u64;
        let key = mix(mix(params.seed ^ 0x6a09_e667_f3bc_c908) ^ step.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        Self { key, max: params.noise_max as u64, threshold }
    }

    #[inline]
    fn sample(&self, cell: usize) -> u32 {
        if self.max == 0 || self.threshold == 0 {
            return 0;
        }
        let r = mix(self.key ^ (cell as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9));
        if (r & 0xffff_ffff) >= self.threshold {
            return 0;
        }
        // Multiply-shift maps the high half onto 0..=max.
        (((r >> 32) * (self.max + 1)) >> 32) as u32
    }
}

/// SplitMix64 finaliser.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Runs `n_steps` updates from [`init`], emitting the lattice at steps
/// `0, emit_every, 2·emit_every, ...`.
pub fn run(params: &HodgepodgeParams, n_steps: u64, emit_every: u64) -> Result<FrameSeries, HodgepodgeError> {
    let mut series = FrameSeries::default();
    run_with(params, n_steps, emit_every, |lattice| {
        series.push(lattice.to_frame(params.bit_depth()), lattice.step);
    })?;
    Ok(series)
}

/// Like [`run`] but hands each emitted lattice to `emit` instead of collecting.
pub fn run_with(
    params: &HodgepodgeParams,
    n_steps: u64,
    emit_every: u64,
    mut emit: impl FnMut(&Lattice),
) -> Result<(), HodgepodgeError> {
    if n_steps == 0 {
        return Err(invalid("n_steps", "must be positive"));
    }
    if emit_every == 0 {
        return Err(invalid("emit_every", "must be positive"));
    }
    let mut current = init(params)?;
    let mut next = current.clone();
    emit(&current);
    for _ in 0..n_steps {
        step_into(&current, &mut next, params);
        core::mem::swap(&mut current, &mut next);
        if current.step % emit_every == 0 {
            emit(&current);
        }
    }
    Ok(())
}
