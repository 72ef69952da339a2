//! Ground-truth kernel masks from annotated text polygons.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{offset_inward, scale_ratios, shrink_offset, KernelSpec, Point, Polygon};
use crate::raster::BinaryMask;

/// One annotated text region. `ignore` marks blurred "do not care" text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub points: Vec<Point>,
    #[serde(default)]
    pub ignore: bool,
}

/// Annotated image: size plus text regions. This is also the on-disk
/// annotation JSON layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub height: usize,
    pub width: usize,
    #[serde(default)]
    pub regions: Vec<Region>,
}

impl Annotation {
    pub fn new(height: usize, width: usize) -> Self {
        Self { height, width, regions: Vec::new() }
    }

    pub fn with_region(mut self, points: Vec<Point>, ignore: bool) -> Self {
        self.regions.push(Region { points, ignore });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidArgument(format!(
                "image size {}x{} must be at least 1x1",
                self.height, self.width
            )));
        }
        if let Some(i) = self.regions.iter().position(|r| r.points.len() < 3) {
            return Err(Error::InvalidArgument(format!("region {i} has fewer than 3 points")));
        }
        Ok(())
    }

    /// The region's polygon with vertices clamped into the image.
    pub fn region_polygon(&self, index: usize) -> Result<Polygon> {
        let (w, h) = (self.width as f64, self.height as f64);
        let pts = self.regions[index]
            .points
            .iter()
            .map(|p| Point::new(p.x.clamp(0.0, w), p.y.clamp(0.0, h)));
        Polygon::new_simple(pts)
    }
}

/// A region skipped during label generation.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelWarning {
    pub region: usize,
    pub message: String,
}

/// Kernel masks `G_1..G_n` (smallest scale first) plus the ignore mask.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelStack {
    pub masks: Vec<BinaryMask>,
    pub ignore_mask: BinaryMask,
    pub warnings: Vec<LabelWarning>,
}

impl LabelStack {
    pub fn n(&self) -> usize {
        self.masks.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.ignore_mask.dims()
    }

    /// Full-scale text mask `G_n`.
    pub fn full(&self) -> &BinaryMask {
        self.masks.last().expect("label stack has at least one mask")
    }

    /// Every kernel lies inside the next larger one.
    pub fn is_nested(&self) -> bool {
        self.masks.windows(2).all(|w| w[0].is_subset_of(&w[1]))
    }
}

/// Rasterizes `polygon` by sampling pixel centers with the even-odd rule.
pub fn rasterize(polygon: &Polygon, height: usize, width: usize) -> BinaryMask {
    let mut mask = BinaryMask::zeros(height, width);
    rasterize_into(polygon, &mut mask);
    mask
}

/// Sets (never clears) the pixels of `mask` whose centers fall inside `polygon`.
pub fn rasterize_into(polygon: &Polygon, mask: &mut BinaryMask) {
    let (height, width) = mask.dims();
    if height == 0 || width == 0 {
        return;
    }
    let (_, min_y, _, max_y) = polygon.bounds();
    let row_start = (min_y - 0.5).ceil().max(0.0) as usize;
    let row_end = ((max_y - 0.5).ceil().max(0.0) as usize).min(height);
    let mut crossings: Vec<f64> = Vec::new();
    let data = mask.as_mut_slice();
    for y in row_start..row_end {
        let yc = y as f64 + 0.5;
        crossings.clear();
        for (a, b) in polygon.edges() {
            if (a.y > yc) != (b.y > yc) {
                crossings.push(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
        crossings.sort_by(f64::total_cmp);
        // Center x+0.5 is inside iff x0 <= x+0.5 < x1 for some crossing pair.
        for pair in crossings.chunks_exact(2) {
            let first = (pair[0] - 0.5).ceil().max(0.0);
            let last = (pair[1] - 0.5).ceil().min(width as f64);
            if last <= first {
                continue;
            }
            let row = &mut data[y * width..(y + 1) * width];
            row[first as usize..last as usize].fill(1);
        }
    }
}

/// Builds the `n` nested kernel masks and the ignore mask for one image.
///
/// Regions whose polygon is degenerate or self-intersecting are skipped and
/// reported in [`LabelStack::warnings`]. Kernels that vanish under offsetting
/// simply contribute no pixels.
pub fn generate_labels(ann: &Annotation, spec: &KernelSpec) -> Result<LabelStack> {
    ann.validate()?;
    let (h, w) = (ann.height, ann.width);
    let ratios = scale_ratios(spec);
    let mut masks = vec![BinaryMask::zeros(h, w); ratios.len()];
    let mut ignore_mask = BinaryMask::zeros(h, w);
    let mut warnings = Vec::new();

    for (index, region) in ann.regions.iter().enumerate() {
        let polygon = match ann.region_polygon(index) {
            Ok(p) => p,
            Err(e) => {
                warn!("skipping region {index}: {e}");
                warnings.push(LabelWarning { region: index, message: e.to_string() });
                continue;
            }
        };
        if region.ignore {
            rasterize_into(&polygon, &mut ignore_mask);
            continue;
        }
        for (mask, &r) in masks.iter_mut().zip(&ratios) {
            let d = shrink_offset(&polygon, r)?;
            for piece in offset_inward(&polygon, d) {
                rasterize_into(&piece, mask);
            }
        }
    }

    // Offsets are nested geometrically; clamp away pixel-center ties on
    // coincident boundaries so G_i is a subset of G_{i+1} exactly.
    for i in (0..masks.len().saturating_sub(1)).rev() {
        let (lower, upper) = masks.split_at_mut(i + 1);
        lower[i] = lower[i].and(&upper[0])?;
    }

    Ok(LabelStack { masks, ignore_mask, warnings })
}
