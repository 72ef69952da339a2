//! File formats: binary score stacks and label maps, JSON annotations and
//! detections, synthetic stack generation and PNG rendering.
//!
//! Score stack (`PSES`), little-endian, 16-byte header:
//!
//! ```text
//! magic "PSES" | version u16 | n u16 | H u32 | W u32 | n planes of H*W f32
//! ```
//!
//! Planes are smallest kernel first. Version 2 files carry the ignore mask as
//! a trailing 0/1 plane, counted in `n`. Label maps (`PSEL`) use the same
//! header layout (the `n` field is reserved, zero) followed by H*W u32 labels.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::{ImageBuffer, ImageFormat, Luma, Rgb};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::augment::Image;
use crate::error::{Error, Result};
use crate::geometry::{KernelSpec, Point};
use crate::labelgen::{generate_labels, Annotation, LabelStack};
use crate::pse::Detection;
use crate::raster::{BinaryMask, LabelMap, ScoreMap};

pub const SCORE_MAGIC: &[u8; 4] = b"PSES";
pub const LABEL_MAGIC: &[u8; 4] = b"PSEL";
pub const HEADER_LEN: usize = 16;

const VERSION_SCORES: u16 = 1;
const VERSION_WITH_IGNORE: u16 = 2;
const VERSION_LABELS: u16 = 1;

/// Kernel score planes (smallest first) and an optional ignore mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreStack {
    pub planes: Vec<ScoreMap>,
    pub ignore: Option<BinaryMask>,
}

impl ScoreStack {
    pub fn new(planes: Vec<ScoreMap>, ignore: Option<BinaryMask>) -> Result<Self> {
        let first = planes.first().ok_or(Error::EmptyInput("score stack"))?;
        let dims = first.dims();
        for p in &planes {
            crate::error::check_dims(dims, p.dims())?;
        }
        if let Some(m) = &ignore {
            crate::error::check_dims(dims, m.dims())?;
        }
        Ok(Self { planes, ignore })
    }

    /// 0/1 planes of a generated label stack, with its ignore mask.
    pub fn from_labels(labels: &LabelStack) -> Self {
        Self {
            planes: labels.masks.iter().map(ScoreMap::from).collect(),
            ignore: Some(labels.ignore_mask.clone()),
        }
    }

    pub fn n(&self) -> usize {
        self.planes.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.planes[0].dims()
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let (h, w) = self.dims();
        let total = self.n() + usize::from(self.ignore.is_some());
        let n = u16::try_from(total).map_err(|_| Error::InvalidArgument(format!("{total} planes exceed u16")))?;
        let version = if self.ignore.is_some() { VERSION_WITH_IGNORE } else { VERSION_SCORES };
        let mut out = Vec::with_capacity(HEADER_LEN + total * h * w * 4);
        write_header(&mut out, SCORE_MAGIC, version, n, h, w)?;
        for p in &self.planes {
            out.extend(p.as_slice().iter().flat_map(|v| v.to_le_bytes()));
        }
        if let Some(m) = &self.ignore {
            out.extend(m.as_slice().iter().flat_map(|&v| f32::from(v).to_le_bytes()));
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let (version, n, h, w) = read_header(bytes, SCORE_MAGIC)?;
        if version != VERSION_SCORES && version != VERSION_WITH_IGNORE {
            return Err(Error::Format(format!("unsupported score stack version {version}")));
        }
        let has_ignore = version == VERSION_WITH_IGNORE;
        let n = usize::from(n);
        if n < 1 + usize::from(has_ignore) {
            return Err(Error::Format(format!("version {version} stack needs more than {n} planes")));
        }
        let plane_len = h.checked_mul(w).ok_or_else(|| Error::Format("dimensions overflow".into()))?;
        expect_len(bytes, n, plane_len)?;

        let mut planes = Vec::with_capacity(n);
        for k in 0..n {
            let start = HEADER_LEN + k * plane_len * 4;
            let data: Vec<f32> = bytes[start..start + plane_len * 4]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
                .collect();
            planes.push(ScoreMap::from_vec(h, w, data).map_err(|e| Error::Format(format!("plane {k}: {e}")))?);
        }
        let ignore = if has_ignore {
            let plane = planes.pop().expect("at least two planes");
            if plane.as_slice().iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::Format("ignore plane must hold only 0 and 1".into()));
            }
            Some(BinaryMask::from_fn(h, w, |x, y| plane.get(x, y) == 1.0))
        } else {
            None
        };
        Ok(Self { planes, ignore })
    }
}

fn write_header(out: &mut Vec<u8>, magic: &[u8; 4], version: u16, n: u16, h: usize, w: usize) -> Result<()> {
    let dim = |v: usize| u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("dimension {v} exceeds u32")));
    out.extend_from_slice(magic);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&dim(h)?.to_le_bytes());
    out.extend_from_slice(&dim(w)?.to_le_bytes());
    Ok(())
}

/// Returns `(version, n, H, W)`.
fn read_header(bytes: &[u8], magic: &[u8; 4]) -> Result<(u16, u16, usize, usize)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&bytes[..4]),
            String::from_utf8_lossy(magic)
        )));
    }
    let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
    Ok((u16_at(4), u16_at(6), u32_at(8), u32_at(12)))
}

fn expect_len(bytes: &[u8], planes: usize, plane_len: usize) -> Result<()> {
    let expected = plane_len
        .checked_mul(planes * 4)
        .and_then(|b| b.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!("file is {} bytes, header implies {expected}", bytes.len())));
    }
    Ok(())
}

pub fn encode_label_map(labels: &LabelMap) -> Result<Vec<u8>> {
    let (h, w) = labels.dims();
    let mut out = Vec::with_capacity(HEADER_LEN + h * w * 4);
    write_header(&mut out, LABEL_MAGIC, VERSION_LABELS, 0, h, w)?;
    out.extend(labels.as_slice().iter().flat_map(|v| v.to_le_bytes()));
    Ok(out)
}

pub fn decode_label_map(bytes: &[u8]) -> Result<LabelMap> {
    let (version, _, h, w) = read_header(bytes, LABEL_MAGIC)?;
    if version != VERSION_LABELS {
        return Err(Error::Format(format!("unsupported label map version {version}")));
    }
    let plane_len = h.checked_mul(w).ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    expect_len(bytes, 1, plane_len)?;
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("4-byte chunk")))
        .collect();
    LabelMap::from_vec(h, w, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn read_score_stack(path: impl AsRef<Path>) -> Result<ScoreStack> {
    ScoreStack::decode(&fs::read(path)?)
}

pub fn write_score_stack(path: impl AsRef<Path>, stack: &ScoreStack) -> Result<()> {
    Ok(fs::write(path, stack.encode()?)?)
}

pub fn read_label_map(path: impl AsRef<Path>) -> Result<LabelMap> {
    decode_label_map(&fs::read(path)?)
}

pub fn write_label_map(path: impl AsRef<Path>, labels: &LabelMap) -> Result<()> {
    Ok(fs::write(path, encode_label_map(labels)?)?)
}

/// Either binary raster, told apart by magic.
#[derive(Debug, Clone, PartialEq)]
pub enum Raster {
    Scores(ScoreStack),
    Labels(LabelMap),
}

pub fn read_raster(path: impl AsRef<Path>) -> Result<Raster> {
    let bytes = fs::read(path)?;
    match bytes.get(..4) {
        Some(m) if m == LABEL_MAGIC => decode_label_map(&bytes).map(Raster::Labels),
        _ => ScoreStack::decode(&bytes).map(Raster::Scores),
    }
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(fs::write(path, text)?)
}

pub fn read_annotation(path: impl AsRef<Path>) -> Result<Annotation> {
    let ann: Annotation = read_json(path)?;
    ann.validate()?;
    Ok(ann)
}

/// Detections for one image, with the image size they refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionsFile {
    pub height: usize,
    pub width: usize,
    pub detections: Vec<Detection>,
}

/// One synthetic text instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthShape {
    /// `[x0, y0, x1, y1]`
    Rect([f64; 4]),
    Polygon(Vec<Point>),
}

/// Recipe for an ideal (optionally noisy) score stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub height: usize,
    pub width: usize,
    pub n: usize,
    pub m: f64,
    pub shapes: Vec<SynthShape>,
    /// Amplitude of uniform noise added to every score before clamping.
    #[serde(default)]
    pub noise: f32,
    #[serde(default)]
    pub seed: u64,
}

impl SynthSpec {
    pub fn annotation(&self) -> Annotation {
        self.shapes.iter().fold(Annotation::new(self.height, self.width), |ann, shape| {
            let points = match shape {
                SynthShape::Rect([x0, y0, x1, y1]) => {
                    vec![Point::new(*x0, *y0), Point::new(*x1, *y0), Point::new(*x1, *y1), Point::new(*x0, *y1)]
                }
                SynthShape::Polygon(points) => points.clone(),
            };
            ann.with_region(points, false)
        })
    }
}

/// Kernel masks of the `SynthSpec` shapes as 0/1 planes, plus seeded uniform
/// noise in `[-noise, noise]` clamped to `[0, 1]`.
pub fn synthesize(spec: &SynthSpec) -> Result<ScoreStack> {
    if !(0.0..=1.0).contains(&spec.noise) {
        return Err(Error::InvalidArgument(format!("noise {} outside [0, 1]", spec.noise)));
    }
    let kernels = KernelSpec::new(spec.n, spec.m)?;
    let labels = generate_labels(&spec.annotation(), &kernels)?;
    let mut stack = ScoreStack::from_labels(&labels);
    stack.ignore = None;
    if spec.noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let (h, w) = (spec.height, spec.width);
        for plane in &mut stack.planes {
            let noisy: Vec<f32> = plane
                .as_slice()
                .iter()
                .map(|&v| (v + rng.gen_range(-spec.noise..=spec.noise)).clamp(0.0, 1.0))
                .collect();
            *plane = ScoreMap::from_vec(h, w, noisy)?;
        }
    }
    Ok(stack)
}

/// Deterministic, never-black color for a label.
pub fn label_color(label: u32) -> [u8; 3] {
    // splitmix64 finalizer
    let mut z = u64::from(label).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    let [r, g, b, ..] = z.to_le_bytes();
    // Keep every channel off the dark end so no label reads as background.
    [r | 0x40, g | 0x40, b | 0x40]
}

fn png_bytes<P: image::PixelWithColorType>(img: &ImageBuffer<P, Vec<P::Subpixel>>) -> Result<Vec<u8>>
where
    P::Subpixel: image::Primitive,
    [P::Subpixel]: image::EncodableLayout,
{
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

fn dim32(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("dimension {v} too large for PNG")))
}

/// RGB PNG: black background, one hashed color per label.
pub fn render_labels(labels: &LabelMap) -> Result<Vec<u8>> {
    let (h, w) = labels.dims();
    let img = ImageBuffer::from_fn(dim32(w)?, dim32(h)?, |x, y| match labels.get(x as usize, y as usize) {
        0 => Rgb([0, 0, 0]),
        l => Rgb(label_color(l)),
    });
    png_bytes(&img)
}

/// Grayscale PNG of one score plane (0 black, 1 white).
pub fn render_scores(plane: &ScoreMap) -> Result<Vec<u8>> {
    let (h, w) = plane.dims();
    let img = ImageBuffer::from_fn(dim32(w)?, dim32(h)?, |x, y| {
        Luma([(plane.get(x as usize, y as usize) * 255.0).round() as u8])
    });
    png_bytes(&img)
}

/// Renders a label map, or the full-scale plane of a score stack.
pub fn render_raster(raster: &Raster) -> Result<Vec<u8>> {
    match raster {
        Raster::Labels(l) => render_labels(l),
        Raster::Scores(s) => render_scores(s.planes.last().expect("nonempty stack")),
    }
}

/// Loads any PNG/other supported image as 8-bit RGB.
pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let rgb = image::open(path)?.into_rgb8();
    let (w, h) = rgb.dimensions();
    Image::new(h as usize, w as usize, 3, rgb.into_raw())
}

pub fn encode_image_png(img: &Image) -> Result<Vec<u8>> {
    let (w, h) = (dim32(img.width())?, dim32(img.height())?);
    let data = img.as_slice().to_vec();
    match img.channels() {
        1 => png_bytes(&ImageBuffer::<Luma<u8>, _>::from_raw(w, h, data).expect("sized buffer")),
        3 => png_bytes(&ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, data).expect("sized buffer")),
        c => Err(Error::InvalidArgument(format!("cannot write a {c}-channel PNG"))),
    }
}
