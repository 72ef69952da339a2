//! Joint image/label augmentation: random rescale, horizontal flip, small
//! rotation and a fixed-size crop, applied in that order.
//!
//! Images are resampled bilinearly, masks by nearest neighbour, so every mask
//! stays binary and nested kernels stay nested.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labelgen::LabelStack;
use crate::raster::BinaryMask;

/// Largest rotation accepted by [`rotate`], in degrees.
pub const MAX_ROTATION_DEG: f64 = 45.0;

/// Attempts at finding a crop window that contains text.
const CROP_ATTEMPTS: usize = 10;

/// Interleaved 8-bit image, `channels` bytes per pixel, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if channels == 0 || data.len() != height * width * channels {
            return Err(Error::InvalidArgument(format!(
                "image {height}x{width}x{channels} cannot hold {} bytes",
                data.len()
            )));
        }
        Ok(Self { height, width, channels, data })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self { height, width, channels, data: vec![0; height * width * channels] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let at = (y * self.width + x) * self.channels;
        &self.data[at..at + self.channels]
    }
}

/// An image with its kernel masks and ignore mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: Image,
    pub labels: LabelStack,
}

impl Sample {
    pub fn new(image: Image, labels: LabelStack) -> Result<Self> {
        let dims = image.dims();
        if labels.dims() != dims || labels.masks.iter().any(|m| m.dims() != dims) {
            return Err(Error::InvalidArgument("image and masks differ in size".into()));
        }
        Ok(Self { image, labels })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.image.dims()
    }

    /// Applies `f` to every mask plane, ignore mask included.
    fn map_masks(&self, mut f: impl FnMut(&BinaryMask) -> BinaryMask) -> LabelStack {
        LabelStack {
            masks: self.labels.masks.iter().map(&mut f).collect(),
            ignore_mask: f(&self.labels.ignore_mask),
            warnings: self.labels.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub scales: Vec<f64>,
    pub flip_prob: f64,
    pub rotate_range_deg: (f64, f64),
    /// `(height, width)` of the output.
    pub crop_size: (usize, usize),
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            scales: vec![0.5, 1.0, 2.0, 3.0],
            flip_prob: 0.5,
            rotate_range_deg: (-10.0, 10.0),
            crop_size: (640, 640),
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() || self.scales.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument("scales must be a nonempty list of positive ratios".into()));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(Error::InvalidArgument(format!("flip probability {} outside [0, 1]", self.flip_prob)));
        }
        let (lo, hi) = self.rotate_range_deg;
        if !(lo <= hi && lo.abs() <= MAX_ROTATION_DEG && hi.abs() <= MAX_ROTATION_DEG) {
            return Err(Error::InvalidArgument(format!("rotation range ({lo}, {hi}) invalid")));
        }
        if self.crop_size.0 == 0 || self.crop_size.1 == 0 {
            return Err(Error::InvalidArgument("crop size must be positive".into()));
        }
        Ok(())
    }
}

/// Source coordinate (in pixel units, continuous) sampled by output index `i`
/// when resizing `src` pixels to `dst` pixels.
fn resample_coord(i: usize, src: usize, dst: usize) -> f64 {
    (i as f64 + 0.5) * src as f64 / dst as f64 - 0.5
}

fn resize_mask(mask: &BinaryMask, height: usize, width: usize) -> BinaryMask {
    let (sh, sw) = mask.dims();
    let col: Vec<usize> = (0..width)
        .map(|x| ((resample_coord(x, sw, width) + 0.5).floor().max(0.0) as usize).min(sw - 1))
        .collect();
    BinaryMask::from_fn(height, width, |x, y| {
        let sy = ((resample_coord(y, sh, height) + 0.5).floor().max(0.0) as usize).min(sh - 1);
        mask.get(col[x], sy)
    })
}

fn bilinear(image: &Image, fx: f64, fy: f64, out: &mut [u8]) {
    let (h, w, c) = (image.height, image.width, image.channels);
    let fx = fx.clamp(0.0, (w - 1) as f64);
    let fy = fy.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
    for (ch, o) in out.iter_mut().enumerate() {
        let at = |x: usize, y: usize| f64::from(image.data[(y * w + x) * c + ch]);
        let top = at(x0, y0) * (1.0 - tx) + at(x1, y0) * tx;
        let bottom = at(x0, y1) * (1.0 - tx) + at(x1, y1) * tx;
        *o = (top * (1.0 - ty) + bottom * ty).round().clamp(0.0, 255.0) as u8;
    }
}

fn resize_image(image: &Image, height: usize, width: usize) -> Image {
    let c = image.channels;
    let mut out = Image::zeros(height, width, c);
    for y in 0..height {
        let fy = resample_coord(y, image.height, height);
        for x in 0..width {
            let fx = resample_coord(x, image.width, width);
            let at = (y * width + x) * c;
            bilinear(image, fx, fy, &mut out.data[at..at + c]);
        }
    }
    out
}

/// Rescales by `ratio`; output sides are rounded and at least 1.
pub fn rescale(sample: &Sample, ratio: f64) -> Result<Sample> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::InvalidArgument(format!("rescale ratio {ratio} must be positive")));
    }
    let (h, w) = sample.dims();
    let nh = ((h as f64 * ratio).round() as usize).max(1);
    let nw = ((w as f64 * ratio).round() as usize).max(1);
    if (nh, nw) == (h, w) {
        return Ok(sample.clone());
    }
    Ok(Sample {
        image: resize_image(&sample.image, nh, nw),
        labels: sample.map_masks(|m| resize_mask(m, nh, nw)),
    })
}

/// Mirrors every plane left to right.
pub fn hflip(sample: &Sample) -> Sample {
    let (h, w) = sample.dims();
    let c = sample.image.channels;
    let mut data = Vec::with_capacity(sample.image.data.len());
    for y in 0..h {
        for x in (0..w).rev() {
            data.extend_from_slice(sample.image.pixel(x, y));
        }
    }
    Sample {
        image: Image { height: h, width: w, channels: c, data },
        labels: sample.map_masks(|m| BinaryMask::from_fn(h, w, |x, y| m.get(w - 1 - x, y))),
    }
}

/// Rotates about the image center by `deg` (positive turns +x toward +y),
/// keeping the canvas size. Pixels whose source falls outside the canvas are
/// zero in the image and every kernel, and set in the ignore mask.
pub fn rotate(sample: &Sample, deg: f64) -> Result<Sample> {
    if deg.is_nan() || deg.abs() > MAX_ROTATION_DEG {
        return Err(Error::InvalidArgument(format!("rotation {deg} exceeds {MAX_ROTATION_DEG} degrees")));
    }
    if deg == 0.0 {
        return Ok(sample.clone());
    }
    let (h, w) = sample.dims();
    let c = sample.image.channels;
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let (s, co) = deg.to_radians().sin_cos();
    // Inverse map from each output pixel center to a continuous source point.
    let source = |x: usize, y: usize| {
        let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
        (co * dx + s * dy + cx, -s * dx + co * dy + cy)
    };
    let nearest = |x: usize, y: usize| {
        let (sx, sy) = source(x, y);
        (sx >= 0.0 && sy >= 0.0 && sx < w as f64 && sy < h as f64).then_some((sx as usize, sy as usize))
    };

    let mut image = Image::zeros(h, w, c);
    for y in 0..h {
        for x in 0..w {
            if nearest(x, y).is_some() {
                let (sx, sy) = source(x, y);
                let at = (y * w + x) * c;
                bilinear(&sample.image, sx - 0.5, sy - 0.5, &mut image.data[at..at + c]);
            }
        }
    }
    let masks = sample
        .labels
        .masks
        .iter()
        .map(|m| BinaryMask::from_fn(h, w, |x, y| nearest(x, y).is_some_and(|(sx, sy)| m.get(sx, sy))))
        .collect();
    let ignore = &sample.labels.ignore_mask;
    let ignore_mask = BinaryMask::from_fn(h, w, |x, y| nearest(x, y).is_none_or(|(sx, sy)| ignore.get(sx, sy)));
    Ok(Sample { image, labels: LabelStack { masks, ignore_mask, warnings: sample.labels.warnings.clone() } })
}

fn crop_window(sample: &Sample, x0: usize, y0: usize, ch: usize, cw: usize) -> Sample {
    let c = sample.image.channels;
    let mut data = Vec::with_capacity(ch * cw * c);
    for y in y0..y0 + ch {
        let row = (y * sample.image.width + x0) * c;
        data.extend_from_slice(&sample.image.data[row..row + cw * c]);
    }
    Sample {
        image: Image { height: ch, width: cw, channels: c, data },
        labels: sample.map_masks(|m| BinaryMask::from_fn(ch, cw, |x, y| m.get(x0 + x, y0 + y))),
    }
}

fn pad_to(sample: &Sample, height: usize, width: usize) -> Sample {
    let (h, w) = sample.dims();
    if h >= height && w >= width {
        return sample.clone();
    }
    let (nh, nw) = (h.max(height), w.max(width));
    let c = sample.image.channels;
    let mut image = Image::zeros(nh, nw, c);
    for y in 0..h {
        image.data[y * nw * c..(y * nw + w) * c].copy_from_slice(&sample.image.data[y * w * c..(y + 1) * w * c]);
    }
    Sample {
        image,
        labels: sample.map_masks(|m| BinaryMask::from_fn(nh, nw, |x, y| x < w && y < h && m.get(x, y))),
    }
}

/// Crops a `crop_size` window at a random origin, zero-padding smaller
/// samples first. When the sample has any full-scale text, up to
/// 10 origins are drawn until the window contains some.
pub fn random_crop<R: Rng + ?Sized>(sample: &Sample, config: &AugmentConfig, rng: &mut R) -> Sample {
    let (ch, cw) = config.crop_size;
    let padded = pad_to(sample, ch, cw);
    let (h, w) = padded.dims();
    if (h, w) == (ch, cw) {
        return padded;
    }
    let text = padded.labels.full();
    let has_text = text.any();
    let mut origin = (0, 0);
    for _ in 0..CROP_ATTEMPTS {
        origin = (rng.gen_range(0..=w - cw), rng.gen_range(0..=h - ch));
        if !has_text || window_has_text(text, origin, ch, cw) {
            break;
        }
    }
    crop_window(&padded, origin.0, origin.1, ch, cw)
}

fn window_has_text(mask: &BinaryMask, (x0, y0): (usize, usize), ch: usize, cw: usize) -> bool {
    (y0..y0 + ch).any(|y| (x0..x0 + cw).any(|x| mask.get(x, y)))
}

/// Full augmentation pipeline driven by `config.seed`.
pub fn augment(sample: &Sample, config: &AugmentConfig) -> Result<Sample> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let ratio = *config.scales.choose(&mut rng).expect("validated nonempty");
    let mut out = rescale(sample, ratio)?;
    if rng.gen_bool(config.flip_prob) {
        out = hflip(&out);
    }
    let (lo, hi) = config.rotate_range_deg;
    let deg = if lo < hi { rng.gen_range(lo..=hi) } else { lo };
    out = rotate(&out, deg)?;
    Ok(random_crop(&out, config, &mut rng))
}
