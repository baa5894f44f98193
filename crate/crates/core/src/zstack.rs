//! Point-divergence transforms of microscope z-stacks and the
//! least-information-lost (LIL) 8-bit rescale used to display them.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::frame::{max_level, Frame, FrameError};
use crate::pdg::{pdg_map_for_pair, PdgError};

/// α used for the z-stack transform.
pub const DEFAULT_ZSTACK_ALPHA: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ZStackError {
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("a transform needs at least two z planes, got {0}")]
    TooFewFrames(usize),
    #[error("z positions must be strictly increasing")]
    NonIncreasingZ,
    #[error("plane {plane} has {actual} channels, expected {expected}")]
    ChannelCount { plane: usize, expected: usize, actual: usize },
    #[error("bit depth {0} is outside 9..=16")]
    BitDepth(u8),
    #[error("image has no pixels")]
    EmptyImage,
    #[error("pixel value {0} exceeds the declared bit depth")]
    ValueOutOfRange(u16),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Pdg(#[from] PdgError),
}

/// Physical description of a stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackGeometry {
    pub pixel_pitch_nm: f64,
    pub z_step_nm: f64,
}

impl Default for StackGeometry {
    fn default() -> Self {
        Self { pixel_pitch_nm: 64.0, z_step_nm: 130.0 }
    }
}

/// Ordered z planes, each holding one frame per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZStack {
    channels: Vec<String>,
    geometry: StackGeometry,
    z_positions_nm: Vec<f64>,
    planes: Vec<Vec<Frame>>,
}

impl ZStack {
    /// Planes at `0, z_step, 2·z_step, ...`.
    pub fn new(channels: Vec<String>, geometry: StackGeometry, planes: Vec<Vec<Frame>>) -> Result<Self, ZStackError> {
        let z = (0..planes.len()).map(|i| i as f64 * geometry.z_step_nm).collect();
        Self::with_positions(channels, geometry, z, planes)
    }

    pub fn with_positions(
        channels: Vec<String>,
        geometry: StackGeometry,
        z_positions_nm: Vec<f64>,
        planes: Vec<Vec<Frame>>,
    ) -> Result<Self, ZStackError> {
        if z_positions_nm.len() != planes.len() || z_positions_nm.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(ZStackError::NonIncreasingZ);
        }
        let reference = planes.first().and_then(|p| p.first());
        for (i, plane) in planes.iter().enumerate() {
            if plane.len() != channels.len() {
                return Err(ZStackError::ChannelCount { plane: i, expected: channels.len(), actual: plane.len() });
            }
            if let Some(r) = reference {
                for f in plane {
                    r.check_compatible(f)?;
                }
            }
        }
        Ok(Self { channels, geometry, z_positions_nm, planes })
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn geometry(&self) -> &StackGeometry {
        &self.geometry
    }

    pub fn z_positions_nm(&self) -> &[f64] {
        &self.z_positions_nm
    }

    pub fn len(&self) -> usize {
        self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.planes.is_empty()
    }

    pub fn channel_index(&self, name: &str) -> Result<usize, ZStackError> {
        self.channels.iter().position(|c| c == name).ok_or_else(|| ZStackError::UnknownChannel(name.into()))
    }

    pub fn frame(&self, plane: usize, channel: usize) -> &Frame {
        &self.planes[plane][channel]
    }
}

/// Signed ω per pixel between planes `pair.0` and `pair.1` of one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaImage {
    pub width: usize,
    pub height: usize,
    pub alpha: f64,
    pub pair: (usize, usize),
    pub channel: String,
    pub values: Vec<f64>,
}

/// One [`OmegaImage`] per consecutive plane pair of `channel`.
pub fn pdg_transform_stack(stack: &ZStack, channel: &str, alpha: f64) -> Result<Vec<OmegaImage>, ZStackError> {
    let c = stack.channel_index(channel)?;
    if stack.len() < 2 {
        return Err(ZStackError::TooFewFrames(stack.len()));
    }
    (0..stack.len() - 1).map(|z| transform_pair(stack, c, z, alpha)).collect()
}

/// Transform of the single pair `(z, z + 1)`; pairs are independent.
pub fn transform_pair(stack: &ZStack, channel: usize, z: usize, alpha: f64) -> Result<OmegaImage, ZStackError> {
    let map = pdg_map_for_pair(stack.frame(z, channel), stack.frame(z + 1, channel), alpha, (z, z + 1))?;
    Ok(OmegaImage {
        width: map.width,
        height: map.height,
        alpha,
        pair: map.pair,
        channel: stack.channels[channel].clone(),
        values: map.values,
    })
}

/// `(|min(ω, 0)|, max(ω, 0))`, so `positive - negative` restores ω exactly.
pub fn split_signs(image: &OmegaImage) -> (Vec<f64>, Vec<f64>) {
    image.values.iter().map(|&w| if w < 0.0 { (-w, 0.0) } else { (0.0, w) }).unzip()
}

/// Pixels with `|ω| ≤ tolerance`: structures that did not change between the
/// two planes. The default tolerance is exactly zero.
pub fn stable_mask(image: &OmegaImage, tolerance: f64) -> Vec<bool> {
    image.values.iter().map(|w| w.abs() <= tolerance).collect()
}

/// Occupied input levels and the 8-bit value each maps to, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelMap {
    pub entries: Vec<(u16, u8)>,
}

impl LevelMap {
    pub fn lookup(&self, level: u16) -> Option<u8> {
        self.entries.binary_search_by_key(&level, |e| e.0).ok().map(|i| self.entries[i].1)
    }

    /// The input level behind an output value, when the map is injective.
    pub fn invert(&self, value: u8) -> Option<u16> {
        let mut hits = self.entries.iter().filter(|e| e.1 == value);
        let first = hits.next()?;
        hits.next().is_none().then_some(first.0)
    }

    pub fn is_bijective(&self) -> bool {
        self.entries.windows(2).all(|w| w[0].1 < w[1].1)
    }
}

/// Least-information-lost rescale of a `bit_depth`-bit image onto 0..=255.
///
/// Occupied levels are sorted and mapped order-preservingly. With at most 256
/// occupied levels the map is a bijection spread evenly over the full 8-bit
/// range. With more, levels are grouped into 256 equal-frequency bins and the
/// used bins are spread the same way. Either way the lowest occupied level
/// maps to 0 and the highest to 255.
pub fn lil_rescale(pixels: &[u16], bit_depth: u8) -> Result<(Vec<u8>, LevelMap), ZStackError> {
    if !(9..=16).contains(&bit_depth) {
        return Err(ZStackError::BitDepth(bit_depth));
    }
    if pixels.is_empty() {
        return Err(ZStackError::EmptyImage);
    }
    let max = max_level(bit_depth);
    if let Some(&v) = pixels.iter().find(|&&v| v > max) {
        return Err(ZStackError::ValueOutOfRange(v));
    }

    let mut counts = alloc::vec![0u64; max as usize + 1];
    for &p in pixels {
        counts[p as usize] += 1;
    }
    let occupied: Vec<(u16, u64)> =
        counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(l, &c)| (l as u16, c)).collect();

    // Ordinal rank of each occupied level, before spreading.
    let ranks: Vec<usize> = if occupied.len() <= 256 {
        (0..occupied.len()).collect()
    } else {
        let total = pixels.len() as u64;
        let mut below = 0u64;
        let bins: Vec<usize> = occupied
            .iter()
            .map(|&(_, c)| {
                let bin = (below * 256 / total) as usize;
                below += c;
                bin.min(255)
            })
            .collect();
        // Bins are non-decreasing; renumber the used ones densely.
        let mut dense = Vec::with_capacity(bins.len());
        let mut next = 0usize;
        for (i, &b) in bins.iter().enumerate() {
            if i > 0 && b != bins[i - 1] {
                next += 1;
            }
            dense.push(next);
        }
        dense
    };
    let used = ranks.last().map_or(0, |r| r + 1);
    let spread = |rank: usize| -> u8 {
        if used <= 1 {
            0
        } else {
            ((rank * 255 * 2 + (used - 1)) / (2 * (used - 1))) as u8
        }
    };
    let entries: Vec<(u16, u8)> = occupied.iter().zip(&ranks).map(|(&(l, _), &r)| (l, spread(r))).collect();

    let mut lut = alloc::vec![0u8; max as usize + 1];
    for &(l, v) in &entries {
        lut[l as usize] = v;
    }
    let out = pixels.iter().map(|&p| lut[p as usize]).collect();
    Ok((out, LevelMap { entries }))
}

/// Linear quantisation of an ω image onto 16-bit levels (min to 0, max to
/// 65535), used before [`lil_rescale`] for display.
pub fn quantize_to_u16(values: &[f64]) -> Vec<u16> {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return alloc::vec![0; values.len()];
    }
    values.iter().map(|&v| libm::round((v - lo) / (hi - lo) * 65535.0) as u16).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn plane(px: &[u16]) -> Vec<Frame> {
        vec![Frame::new(px.len(), 1, 12, px.to_vec()).unwrap()]
    }

    fn red_stack(planes: Vec<Vec<Frame>>) -> ZStack {
        ZStack::new(vec!["red".into()], StackGeometry::default(), planes).unwrap()
    }

    #[test]
    fn identical_planes_are_stable() {
        let s = red_stack(vec![plane(&[1, 2, 3, 3]), plane(&[1, 2, 3, 3]), plane(&[1, 2, 3, 3])]);
        let out = pdg_transform_stack(&s, "red", DEFAULT_ZSTACK_ALPHA).unwrap();
        assert_eq!(out.len(), 2);
        for img in &out {
            assert!(img.values.iter().all(|&w| w == 0.0));
            assert!(stable_mask(img, 0.0).iter().all(|&b| b));
        }
        assert_eq!(out[1].pair, (1, 2));
    }

    #[test]
    fn stack_errors() {
        let s = red_stack(vec![plane(&[1, 2]), plane(&[2, 1])]);
        assert_eq!(pdg_transform_stack(&s, "red", 0.99).unwrap().len(), 1);
        assert_eq!(pdg_transform_stack(&s, "green", 0.99), Err(ZStackError::UnknownChannel("green".into())));
        let one = red_stack(vec![plane(&[1, 2])]);
        assert_eq!(pdg_transform_stack(&one, "red", 0.99), Err(ZStackError::TooFewFrames(1)));
        assert_eq!(
            ZStack::with_positions(
                vec!["red".into()],
                StackGeometry::default(),
                vec![0.0, 0.0],
                vec![plane(&[1]), plane(&[1])]
            ),
            Err(ZStackError::NonIncreasingZ)
        );
        assert!(matches!(
            ZStack::new(vec!["red".into()], StackGeometry::default(), vec![plane(&[1]), plane(&[1, 2])]),
            Err(ZStackError::Frame(_))
        ));
    }

    #[test]
    fn sign_split() {
        let img = OmegaImage {
            width: 3,
            height: 1,
            alpha: 0.99,
            pair: (0, 1),
            channel: "red".into(),
            values: vec![-0.3, 0.0, 0.7],
        };
        let (neg, pos) = split_signs(&img);
        assert_eq!(neg, vec![0.3, 0.0, 0.0]);
        assert_eq!(pos, vec![0.0, 0.0, 0.7]);
        let zero = OmegaImage { values: vec![0.0; 3], ..img };
        assert_eq!(split_signs(&zero), (vec![0.0; 3], vec![0.0; 3]));
    }

    #[test]
    fn lil_two_levels_use_full_scale() {
        let (out, map) = lil_rescale(&[100, 4000, 100, 4000], 12).unwrap();
        assert_eq!(out, vec![0, 255, 0, 255]);
        assert_eq!(map.entries, vec![(100, 0), (4000, 255)]);
        assert_eq!(map.invert(255), Some(4000));
    }

    #[test]
    fn lil_constant_image() {
        let (out, map) = lil_rescale(&[777; 5], 16).unwrap();
        assert_eq!(out, vec![0; 5]);
        assert_eq!(map.entries.len(), 1);
    }

    #[test]
    fn lil_many_levels_is_monotone_and_full_span() {
        let px: Vec<u16> = (0..4096u16).chain(0..1000).collect();
        let (out, map) = lil_rescale(&px, 12).unwrap();
        assert_eq!(map.lookup(0), Some(0));
        assert_eq!(map.lookup(4095), Some(255));
        assert!(map.entries.windows(2).all(|w| w[0].1 <= w[1].1));
        assert!(!map.is_bijective());
        assert_eq!(out.len(), px.len());
    }

    #[test]
    fn lil_rejects_bad_input() {
        assert_eq!(lil_rescale(&[1], 8), Err(ZStackError::BitDepth(8)));
        assert_eq!(lil_rescale(&[], 12), Err(ZStackError::EmptyImage));
        assert_eq!(lil_rescale(&[5000], 12), Err(ZStackError::ValueOutOfRange(5000)));
    }

    #[test]
    fn quantize_spans_u16() {
        assert_eq!(quantize_to_u16(&[-1.0, 0.0, 1.0]), vec![0, 32768, 65535]);
        assert_eq!(quantize_to_u16(&[2.0, 2.0]), vec![0, 0]);
    }
}
