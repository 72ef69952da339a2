//! Progressive scale expansion.
//!
//! The smallest kernel map is thresholded and split into 4-connected
//! components; each component is one text instance. Every larger kernel map
//! then absorbs unlabeled text pixels by a breadth-first search that starts
//! from all instances at once, so a pixel reachable from two instances goes
//! to whichever reaches it first.
//!
//! Seeding order is fixed (ascending label, then row-major) which makes the
//! outcome of every conflict deterministic. Only the pixels that stopped a
//! round with an unlabeled neighbour seed the next round; pixels buried
//! inside an instance can never absorb anything, so dropping them leaves the
//! result unchanged and keeps the total cost proportional to the image size.

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::geometry::{Point, Polygon};
use crate::raster::{BinaryMask, LabelMap, ScoreMap};

/// Default binarization threshold.
pub const DEFAULT_THRESHOLD: f32 = 0.5;

/// Default minimum instance size, in pixels at map resolution.
pub const DEFAULT_MIN_AREA: usize = 16;

/// Pixel is text iff `score >= threshold`.
pub fn binarize(scores: &ScoreMap, threshold: f32) -> Result<BinaryMask> {
    check_threshold(threshold)?;
    let data = scores.as_slice().iter().map(|&s| u8::from(s >= threshold)).collect();
    BinaryMask::from_vec(scores.height(), scores.width(), data)
}

fn check_threshold(threshold: f32) -> Result<()> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} outside [0, 1]")));
    }
    Ok(())
}

/// 4-connected components, numbered in order of their first pixel in a
/// row-major scan.
pub fn connected_components(mask: &BinaryMask) -> LabelMap {
    let (h, w) = mask.dims();
    let text = mask.as_slice();
    let mut labels = vec![0u32; h * w];
    let mut queue: Vec<u32> = Vec::new();
    let mut next = 0u32;
    for start in 0..h * w {
        if text[start] == 0 || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.clear();
        queue.push(start as u32);
        let mut head = 0;
        while head < queue.len() {
            let p = queue[head] as usize;
            head += 1;
            for q in neighbours(p, w, h) {
                if text[q] != 0 && labels[q] == 0 {
                    labels[q] = next;
                    queue.push(q as u32);
                }
            }
        }
    }
    LabelMap::from_raw(h, w, labels, next)
}

#[inline]
fn neighbours(p: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (x, y) = (p % w, p / w);
    let left = (x > 0).then(|| p - 1);
    let right = (x + 1 < w).then(|| p + 1);
    let up = (y > 0).then(|| p - w);
    let down = (y + 1 < h).then(|| p + w);
    [left, right, up, down].into_iter().flatten()
}

/// Pixels of `labels` ordered by label, then row-major.
fn seeds_in_label_order(labels: &LabelMap) -> Vec<u32> {
    let counts = labels.pixel_counts();
    let mut offsets = vec![0usize; counts.len()];
    let mut total = 0;
    for (label, &c) in counts.iter().enumerate().skip(1) {
        offsets[label] = total;
        total += c;
    }
    let mut seeds = vec![0u32; total];
    for (p, &label) in labels.as_slice().iter().enumerate() {
        if label != 0 {
            seeds[offsets[label as usize]] = p as u32;
            offsets[label as usize] += 1;
        }
    }
    seeds
}

/// Breadth-first growth of `labels` into the text pixels of `text`.
///
/// `queue` holds the seeds on entry; on return it holds the seeds followed by
/// every newly absorbed pixel in the order they were labeled. A nonzero label
/// doubles as the visited flag.
fn grow(labels: &mut [u32], text: &[u8], w: usize, h: usize, queue: &mut Vec<u32>) {
    let mut head = 0;
    while head < queue.len() {
        let p = queue[head] as usize;
        head += 1;
        let label = labels[p];
        for q in neighbours(p, w, h) {
            if labels[q] == 0 && text[q] != 0 {
                labels[q] = label;
                queue.push(q as u32);
            }
        }
    }
}

/// One scale-expansion step: grows every kernel into the text pixels of
/// `text`, first come first served. Never creates or merges labels.
pub fn expand(kernels: &LabelMap, text: &BinaryMask) -> Result<LabelMap> {
    check_dims(kernels.dims(), text.dims())?;
    let (h, w) = kernels.dims();
    let mut labels = kernels.as_slice().to_vec();
    let mut queue = seeds_in_label_order(kernels);
    grow(&mut labels, text.as_slice(), w, h, &mut queue);
    Ok(LabelMap::from_raw(h, w, labels, kernels.label_count()))
}

/// Progressive scale expansion over thresholded score maps, smallest kernel
/// first.
pub fn pse(scores: &[ScoreMap], threshold: f32) -> Result<LabelMap> {
    check_threshold(threshold)?;
    let first = scores.first().ok_or(Error::EmptyInput("score stack"))?;
    for s in scores {
        check_dims(first.dims(), s.dims())?;
    }
    let masks = scores.iter().map(|s| binarize(s, threshold)).collect::<Result<Vec<_>>>()?;
    pse_masks(&masks)
}

/// [`pse`] on already-binarized kernel masks.
///
/// Every mask is intersected with the full-scale mask first: predicted
/// kernels are not guaranteed to nest, and no label may leave the full text
/// region.
pub fn pse_masks(masks: &[BinaryMask]) -> Result<LabelMap> {
    let full = masks.last().ok_or(Error::EmptyInput("kernel masks"))?;
    for m in masks {
        check_dims(full.dims(), m.dims())?;
    }
    let (h, w) = full.dims();
    let kernels = connected_components(&masks[0].and(full)?);
    if masks.len() == 1 || kernels.label_count() == 0 {
        return Ok(kernels);
    }

    let label_count = kernels.label_count();
    let mut queue = seeds_in_label_order(&kernels);
    let mut labels: Vec<u32> = kernels.as_slice().to_vec();
    let mut text = vec![0u8; h * w];
    let mut keys: Vec<u64> = Vec::new();
    let full_px = full.as_slice();

    for (round, mask) in masks[1..].iter().enumerate() {
        for ((t, &a), &b) in text.iter_mut().zip(mask.as_slice()).zip(full_px) {
            *t = a & b;
        }
        grow(&mut labels, &text, w, h, &mut queue);
        if round + 2 == masks.len() {
            break;
        }
        // Next round starts from the pixels that still border unlabeled ones.
        keys.clear();
        keys.extend(
            queue
                .iter()
                .filter(|&&p| neighbours(p as usize, w, h).any(|q| labels[q] == 0))
                .map(|&p| (u64::from(labels[p as usize]) << 32) | u64::from(p)),
        );
        keys.sort_unstable();
        queue.clear();
        queue.extend(keys.iter().map(|&k| k as u32));
    }
    Ok(LabelMap::from_raw(h, w, labels, label_count))
}

/// Minimum-area rotated rectangle.
///
/// `angle` is in degrees within `[0, 90)` and gives the direction of the side
/// of length `width`, measured from the +x axis toward +y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotatedRect {
    pub center: Point,
    pub width: f64,
    pub height: f64,
    pub angle: f64,
}

impl RotatedRect {
    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    /// Corners in order around the rectangle.
    pub fn corners(&self) -> [Point; 4] {
        let (s, c) = self.angle.to_radians().sin_cos();
        let (hw, hh) = (self.width / 2.0, self.height / 2.0);
        let at = |a: f64, b: f64| Point::new(self.center.x + a * c - b * s, self.center.y + a * s + b * c);
        [at(-hw, -hh), at(hw, -hh), at(hw, hh), at(-hw, hh)]
    }

    pub fn scaled(&self, factor: f64) -> RotatedRect {
        RotatedRect {
            center: Point::new(self.center.x * factor, self.center.y * factor),
            width: self.width * factor,
            height: self.height * factor,
            angle: self.angle,
        }
    }
}

/// Convex hull by monotone chain, counter-clockwise, collinear points dropped.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: Point, a: Point, b: Point| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Minimum-area enclosing rectangle of `points`, with one side on a hull edge.
pub fn min_area_rect(points: &[Point]) -> Result<RotatedRect> {
    if points.is_empty() {
        return Err(Error::EmptyInput("point set"));
    }
    let hull = convex_hull(points);
    if hull.len() == 1 {
        return Ok(RotatedRect { center: hull[0], width: 0.0, height: 0.0, angle: 0.0 });
    }

    struct Candidate {
        area: f64,
        dir: (f64, f64),
        u: (f64, f64),
        v: (f64, f64),
    }
    let n = hull.len();
    let edge_count = if n == 2 { 1 } else { n };
    let mut best: Option<Candidate> = None;
    for i in 0..edge_count {
        let (a, b) = (hull[i], hull[(i + 1) % n]);
        let len = a.distance(&b);
        let (ux, uy) = ((b.x - a.x) / len, (b.y - a.y) / len);
        let mut u = (f64::INFINITY, f64::NEG_INFINITY);
        let mut v = (f64::INFINITY, f64::NEG_INFINITY);
        for p in &hull {
            let pu = p.x * ux + p.y * uy;
            let pv = -p.x * uy + p.y * ux;
            u = (u.0.min(pu), u.1.max(pu));
            v = (v.0.min(pv), v.1.max(pv));
        }
        let area = (u.1 - u.0) * (v.1 - v.0);
        if best.as_ref().is_none_or(|c| area < c.area) {
            best = Some(Candidate { area, dir: (ux, uy), u, v });
        }
    }
    let Candidate { dir: (ux, uy), u, v, .. } = best.expect("hull has an edge");
    let (cu, cv) = ((u.0 + u.1) / 2.0, (v.0 + v.1) / 2.0);
    let center = Point::new(cu * ux - cv * uy, cu * uy + cv * ux);
    let (mut width, mut height) = (u.1 - u.0, v.1 - v.0);
    let mut angle = uy.atan2(ux).to_degrees().rem_euclid(180.0);
    if angle >= 90.0 - 1e-9 {
        angle -= 90.0;
        std::mem::swap(&mut width, &mut height);
    }
    if angle.abs() < 1e-9 {
        angle = 0.0;
    }
    Ok(RotatedRect { center, width, height, angle })
}

/// Output geometry of a detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractMode {
    /// Minimum-area rotated rectangle, for quadrilateral text.
    #[default]
    Rect,
    /// Outer contour, for curved text.
    Polygon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionShape {
    Rect(RotatedRect),
    Polygon(Vec<Point>),
}

impl DetectionShape {
    pub fn to_polygon(&self) -> Result<Polygon> {
        match self {
            DetectionShape::Rect(r) => Polygon::new(r.corners()),
            DetectionShape::Polygon(pts) => Polygon::new(pts.iter().copied()),
        }
    }

    pub fn scaled(&self, factor: f64) -> DetectionShape {
        match self {
            DetectionShape::Rect(r) => DetectionShape::Rect(r.scaled(factor)),
            DetectionShape::Polygon(pts) => {
                DetectionShape::Polygon(pts.iter().map(|p| Point::new(p.x * factor, p.y * factor)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: u32,
    pub pixel_count: usize,
    #[serde(flatten)]
    pub shape: DetectionShape,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractConfig {
    pub mode: ExtractMode,
    /// Labels with fewer pixels are dropped.
    pub min_area: usize,
    /// Output coordinates are map coordinates times this factor, e.g. 4 when
    /// the maps are a quarter of the input resolution.
    pub scale: f64,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self { mode: ExtractMode::Rect, min_area: DEFAULT_MIN_AREA, scale: 1.0 }
    }
}

/// One detection per label with at least `min_area` pixels, in label order.
/// Pixel `(x, y)` covers the square `[x, x+1] x [y, y+1]`.
pub fn extract_detections(labels: &LabelMap, config: &ExtractConfig) -> Vec<Detection> {
    let (h, w) = labels.dims();
    let data = labels.as_slice();
    let counts = labels.pixel_counts();
    let keep: Vec<bool> = counts.iter().enumerate().map(|(l, &c)| l > 0 && c >= config.min_area).collect();

    let mut first_pixel = vec![usize::MAX; counts.len()];
    let mut corners: Vec<Vec<Point>> = vec![Vec::new(); counts.len()];
    for (p, &label) in data.iter().enumerate() {
        let l = label as usize;
        if !keep[l] {
            continue;
        }
        if first_pixel[l] == usize::MAX {
            first_pixel[l] = p;
        }
        if config.mode == ExtractMode::Rect {
            let (x, y) = (p % w, p / w);
            let interior = x > 0 && y > 0 && x + 1 < w && y + 1 < h && neighbours(p, w, h).all(|q| data[q] == label);
            if !interior {
                let (fx, fy) = (x as f64, y as f64);
                corners[l].extend([
                    Point::new(fx, fy),
                    Point::new(fx + 1.0, fy),
                    Point::new(fx + 1.0, fy + 1.0),
                    Point::new(fx, fy + 1.0),
                ]);
            }
        }
    }

    (1..counts.len())
        .filter(|&l| keep[l])
        .map(|l| {
            let shape = match config.mode {
                ExtractMode::Rect => {
                    DetectionShape::Rect(min_area_rect(&corners[l]).expect("kept labels have pixels"))
                }
                ExtractMode::Polygon => DetectionShape::Polygon(trace_outer_boundary(labels, first_pixel[l])),
            };
            Detection {
                label: l as u32,
                pixel_count: counts[l],
                shape: if config.scale == 1.0 { shape } else { shape.scaled(config.scale) },
            }
        })
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Heading {
    East,
    South,
    West,
    North,
}

impl Heading {
    fn step(self) -> (i64, i64) {
        match self {
            Heading::East => (1, 0),
            Heading::South => (0, 1),
            Heading::West => (-1, 0),
            Heading::North => (0, -1),
        }
    }

    fn right(self) -> Heading {
        match self {
            Heading::East => Heading::South,
            Heading::South => Heading::West,
            Heading::West => Heading::North,
            Heading::North => Heading::East,
        }
    }

    fn left(self) -> Heading {
        self.right().right().right()
    }

    /// Pixels ahead-left and ahead-right of grid vertex `(vx, vy)`.
    fn ahead(self, vx: i64, vy: i64) -> ((i64, i64), (i64, i64)) {
        match self {
            Heading::East => ((vx, vy - 1), (vx, vy)),
            Heading::South => ((vx, vy), (vx - 1, vy)),
            Heading::West => ((vx - 1, vy), (vx - 1, vy - 1)),
            Heading::North => ((vx - 1, vy - 1), (vx, vy - 1)),
        }
    }
}

/// Outer boundary of the label at pixel index `start`, which must be the
/// label's first pixel in row-major order. Walks the pixel edges with the
/// region on the right, treating diagonal contact as disconnected, and
/// returns the corner vertices.
fn trace_outer_boundary(labels: &LabelMap, start: usize) -> Vec<Point> {
    let (h, w) = labels.dims();
    let label = labels.as_slice()[start];
    let inside = |(x, y): (i64, i64)| {
        x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && labels.get(x as usize, y as usize) == label
    };
    let origin = ((start % w) as i64, (start / w) as i64);
    let mut vertices = vec![Point::new(origin.0 as f64, origin.1 as f64)];
    let mut heading = Heading::East;
    let mut v = (origin.0 + 1, origin.1);
    let limit = 4 * (w + 1) * (h + 1);
    for _ in 0..limit {
        if v == origin {
            break;
        }
        let (ahead_left, ahead_right) = heading.ahead(v.0, v.1);
        let next = if !inside(ahead_right) {
            heading.right()
        } else if inside(ahead_left) {
            heading.left()
        } else {
            heading
        };
        if next != heading {
            vertices.push(Point::new(v.0 as f64, v.1 as f64));
            heading = next;
        }
        let (dx, dy) = heading.step();
        v = (v.0 + dx, v.1 + dy);
    }
    vertices
}
