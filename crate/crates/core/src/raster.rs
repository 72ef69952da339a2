//! Flat row-major pixel grids shared by every stage of the pipeline.
//!
//! All three grid types store `height * width` values in a single `Vec`, with
//! pixel `(x, y)` at index `y * width + x`.

use crate::error::{check_dims, Error, Result};

/// Per-pixel text probability in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ScoreMap {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Self {
        Self { height, width, data: vec![value; height * width] }
    }

    /// Builds a map from row-major data, rejecting values outside `[0, 1]` or NaN.
    pub fn from_vec(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::InvalidArgument(format!(
                "score map of {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("score {v} outside [0, 1]")));
        }
        Ok(Self { height, width, data })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f32) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_vec(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }
}

impl From<&BinaryMask> for ScoreMap {
    fn from(mask: &BinaryMask) -> Self {
        Self {
            height: mask.height,
            width: mask.width,
            data: mask.data.iter().map(|&v| f32::from(v)).collect(),
        }
    }
}

/// A 0/1 per-pixel mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, data: vec![0; height * width] }
    }

    pub fn ones(height: usize, width: usize) -> Self {
        Self { height, width, data: vec![1; height * width] }
    }

    /// Nonzero bytes are normalized to 1.
    pub fn from_vec(height: usize, width: usize, mut data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::InvalidArgument(format!(
                "mask of {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        for v in &mut data {
            *v = u8::from(*v != 0);
        }
        Ok(Self { height, width, data })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(u8::from(f(x, y)));
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] != 0
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = u8::from(value);
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|&v| v != 0)
    }

    /// Pixelwise AND.
    pub fn and(&self, other: &BinaryMask) -> Result<BinaryMask> {
        check_dims(self.dims(), other.dims())?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a & b).collect();
        Ok(BinaryMask { height: self.height, width: self.width, data })
    }

    /// In-place pixelwise OR.
    pub fn or_assign(&mut self, other: &BinaryMask) -> Result<()> {
        check_dims(self.dims(), other.dims())?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a |= b;
        }
        Ok(())
    }

    /// True when every 1-pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims() && self.data.iter().zip(&other.data).all(|(&a, &b)| a <= b)
    }
}

/// Instance labels: 0 is background, `1..=label_count` are instances.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMap {
    height: usize,
    width: usize,
    data: Vec<u32>,
    label_count: u32,
}

impl LabelMap {
    pub fn empty(height: usize, width: usize) -> Self {
        Self { height, width, data: vec![0; height * width], label_count: 0 }
    }

    /// Validates that the labels used are exactly `0..=max`, each nonzero label present.
    pub fn from_vec(height: usize, width: usize, data: Vec<u32>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::InvalidArgument(format!(
                "label map of {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        let max = data.iter().copied().max().unwrap_or(0);
        let mut seen = vec![false; max as usize + 1];
        for &v in &data {
            seen[v as usize] = true;
        }
        if let Some(missing) = seen.iter().skip(1).position(|s| !s) {
            return Err(Error::InvalidArgument(format!(
                "label {} has no pixels but label {max} does",
                missing + 1
            )));
        }
        Ok(Self { height, width, data, label_count: max })
    }

    pub(crate) fn from_raw(height: usize, width: usize, data: Vec<u32>, label_count: u32) -> Self {
        debug_assert_eq!(data.len(), height * width);
        Self { height, width, data, label_count }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn label_count(&self) -> u32 {
        self.label_count
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.data[y * self.width + x]
    }

    /// Pixel count per label, indexed by label (entry 0 is background).
    pub fn pixel_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.label_count as usize + 1];
        for &v in &self.data {
            counts[v as usize] += 1;
        }
        counts
    }

    /// Mask of all labeled pixels.
    pub fn support(&self) -> BinaryMask {
        BinaryMask {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| u8::from(v != 0)).collect(),
        }
    }

    /// Mask of the pixels carrying `label`.
    pub fn instance_mask(&self, label: u32) -> BinaryMask {
        BinaryMask {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| u8::from(v == label)).collect(),
        }
    }
}
