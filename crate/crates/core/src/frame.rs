//! Integer-valued 2D frames (CA states or pixel intensities).

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrameError {
    #[error("frame must have at least one pixel")]
    Empty,
    #[error("bit depth {0} is outside 1..=16")]
    BitDepth(u8),
    #[error("expected {expected} pixels, got {actual}")]
    PixelCount { expected: usize, actual: usize },
    #[error("pixel value {value} exceeds the {bit_depth}-bit range")]
    ValueOutOfRange { value: u16, bit_depth: u8 },
    #[error("frames differ in shape or bit depth: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize, u8), (usize, usize, u8)),
}

/// Row-major single-channel frame with a nominal bit depth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    width: usize,
    height: usize,
    bit_depth: u8,
    pixels: Vec<u16>,
}

impl Frame {
    pub fn new(width: usize, height: usize, bit_depth: u8, pixels: Vec<u16>) -> Result<Self, FrameError> {
        if width == 0 || height == 0 {
            return Err(FrameError::Empty);
        }
        if !(1..=16).contains(&bit_depth) {
            return Err(FrameError::BitDepth(bit_depth));
        }
        let expected = width * height;
        if pixels.len() != expected {
            return Err(FrameError::PixelCount { expected, actual: pixels.len() });
        }
        let max = max_level(bit_depth);
        if let Some(&value) = pixels.iter().find(|&&v| v > max) {
            return Err(FrameError::ValueOutOfRange { value, bit_depth });
        }
        Ok(Self { width, height, bit_depth, pixels })
    }

    pub fn filled(width: usize, height: usize, bit_depth: u8, value: u16) -> Result<Self, FrameError> {
        Self::new(width, height, bit_depth, alloc::vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    /// Number of representable intensity levels, `2^bit_depth`.
    pub fn levels(&self) -> usize {
        1usize << self.bit_depth
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u16> {
        self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> Option<u16> {
        (x < self.width && y < self.height).then(|| self.pixels[y * self.width + x])
    }

    pub(crate) fn shape(&self) -> (usize, usize, u8) {
        (self.width, self.height, self.bit_depth)
    }

    pub fn check_compatible(&self, other: &Frame) -> Result<(), FrameError> {
        if self.shape() != other.shape() {
            return Err(FrameError::DimensionMismatch(self.shape(), other.shape()));
        }
        Ok(())
    }
}

pub fn max_level(bit_depth: u8) -> u16 {
    if bit_depth >= 16 {
        u16::MAX
    } else {
        (1u16 << bit_depth) - 1
    }
}

/// Time-ordered frames together with the elementary step index of each frame.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FrameSeries {
    pub frames: Vec<Frame>,
    pub steps: Vec<u64>,
}

impl FrameSeries {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn push(&mut self, frame: Frame, step: u64) {
        self.frames.push(frame);
        self.steps.push(step);
    }

    /// Keeps frames `0, n, 2n, ...`.
    pub fn decimated(&self, n: usize) -> FrameSeries {
        let keep = crate::clustering::decimate_indices(self.len(), n);
        FrameSeries {
            frames: keep.iter().map(|&i| self.frames[i].clone()).collect(),
            steps: keep.iter().map(|&i| self.steps[i]).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_out_of_range_values() {
        assert_eq!(Frame::new(2, 1, 4, vec![3, 16]), Err(FrameError::ValueOutOfRange { value: 16, bit_depth: 4 }));
        assert!(Frame::new(2, 1, 16, vec![0, u16::MAX]).is_ok());
    }

    #[test]
    fn shape_checks() {
        assert_eq!(Frame::new(0, 3, 8, vec![]), Err(FrameError::Empty));
        assert_eq!(Frame::new(2, 2, 0, vec![0; 4]), Err(FrameError::BitDepth(0)));
        assert!(matches!(Frame::new(2, 2, 8, vec![0; 3]), Err(FrameError::PixelCount { .. })));
        let a = Frame::filled(2, 2, 8, 0).unwrap();
        let b = Frame::filled(2, 2, 12, 0).unwrap();
        assert!(a.check_compatible(&b).is_err());
    }
}
