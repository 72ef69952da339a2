//! Polygon arithmetic for kernel label generation.
//!
//! A text instance of area `A` and perimeter `P` is shrunk for scale ratio `r`
//! by an inward offset of `d = A * (1 - r^2) / P` pixels, with the ratios of an
//! `n`-kernel setup ramping linearly from the minimal ratio `m` up to 1.

use clipper2_rust::{inflate_paths_d, EndType, JoinType, PathD, PathsD, PointD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance (pixels) for containment and identity tests.
pub const EPSILON: f64 = 1e-6;

/// Polygons with smaller absolute area are rejected as degenerate.
pub const MIN_AREA: f64 = 1e-9;

/// Miter joins are limited to this multiple of the offset distance.
pub const MITER_LIMIT: f64 = 2.0;

/// Decimal digits kept when handing coordinates to the integer clipper.
const CLIP_PRECISION: i32 = 6;

/// Serialized as a `[x, y]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Self { x, y }
    }
}

/// Closed polygon with at least three vertices, normalized to counter-clockwise
/// order (positive shoelace area).
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    /// Builds a polygon, dropping consecutive duplicate vertices and normalizing
    /// orientation. Fails when fewer than three distinct vertices remain or the
    /// area is below [`MIN_AREA`].
    pub fn new(vertices: impl IntoIterator<Item = Point>) -> Result<Self> {
        let mut pts: Vec<Point> = Vec::new();
        for p in vertices {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(Error::DegenerateGeometry(format!("non-finite vertex ({}, {})", p.x, p.y)));
            }
            if pts.last() != Some(&p) {
                pts.push(p);
            }
        }
        while pts.len() > 1 && pts.first() == pts.last() {
            pts.pop();
        }
        if pts.len() < 3 {
            return Err(Error::DegenerateGeometry(format!("polygon has {} distinct vertices", pts.len())));
        }
        let signed = signed_area(&pts);
        if signed.abs() < MIN_AREA {
            return Err(Error::DegenerateGeometry(format!("polygon area {signed:e} is zero")));
        }
        if signed < 0.0 {
            pts.reverse();
        }
        Ok(Self { vertices: pts })
    }

    /// Like [`Polygon::new`], but additionally rejects self-intersecting input.
    /// Ground-truth annotations go through this constructor.
    pub fn new_simple(vertices: impl IntoIterator<Item = Point>) -> Result<Self> {
        let poly = Self::new(vertices)?;
        if let Some((i, j)) = poly.self_intersection() {
            return Err(Error::DegenerateGeometry(format!("edges {i} and {j} intersect")));
        }
        Ok(poly)
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new([Point::new(x0, y0), Point::new(x1, y0), Point::new(x1, y1), Point::new(x0, y1)])
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edges as `(start, end)` pairs, including the closing edge.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Shoelace area; positive by construction.
    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.distance(&b)).sum()
    }

    /// `(min_x, min_y, max_x, max_y)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.vertices.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(x0, y0, x1, y1), p| (x0.min(p.x), y0.min(p.y), x1.max(p.x), y1.max(p.y)),
        )
    }

    /// Even-odd point-in-polygon test with a half-open crossing rule, the same
    /// rule [`crate::labelgen::rasterize`] applies to pixel centers.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Distance from `p` to the nearest point on the boundary.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.edges().map(|(a, b)| segment_distance(p, a, b)).fold(f64::INFINITY, f64::min)
    }

    /// The first pair of non-adjacent edges that touch or cross, if any.
    pub fn self_intersection(&self) -> Option<(usize, usize)> {
        let n = self.vertices.len();
        let v = &self.vertices;
        for i in 0..n {
            let (a, b) = (v[i], v[(i + 1) % n]);
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (c, d) = (v[j], v[(j + 1) % n]);
                if adjacent {
                    // Adjacent edges share one vertex; they only conflict when they fold back.
                    let shared = if j == i + 1 { b } else { a };
                    let (far_a, far_b) = if j == i + 1 { (a, d) } else { (b, c) };
                    if cross(shared, far_a, far_b).abs() < MIN_AREA
                        && dot(far_a.x - shared.x, far_a.y - shared.y, far_b.x - shared.x, far_b.y - shared.y) > 0.0
                    {
                        return Some((i, j));
                    }
                } else if segments_touch(a, b, c, d) {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// Returns a copy with every coordinate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|p| Point::new(p.x * factor, p.y * factor)).collect(),
        }
    }
}

fn signed_area(pts: &[Point]) -> f64 {
    let n = pts.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum();
    twice / 2.0
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn dot(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    ax * bx + ay * by
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_touch(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(a, c, d))
        || (d2 == 0.0 && on_segment(b, c, d))
        || (d3 == 0.0 && on_segment(c, a, b))
        || (d4 == 0.0 && on_segment(d, a, b))
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(&a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(&Point::new(a.x + t * dx, a.y + t * dy))
}

/// Number of kernel scales and the minimal scale ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    n: usize,
    m: f64,
}

impl KernelSpec {
    pub fn new(n: usize, m: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidArgument("kernel count n must be at least 1".into()));
        }
        if !(m > 0.0 && m <= 1.0) {
            return Err(Error::InvalidArgument(format!("minimal scale ratio m={m} outside (0, 1]")));
        }
        Ok(Self { n, m })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> f64 {
        self.m
    }
}

/// Scale ratio of every kernel, smallest first: `r_i = 1 - (1 - m)(n - i)/(n - 1)`.
pub fn scale_ratios(spec: &KernelSpec) -> Vec<f64> {
    let n = spec.n;
    if n == 1 {
        return vec![1.0];
    }
    (1..=n)
        .map(|i| 1.0 - (1.0 - spec.m) * (n - i) as f64 / (n - 1) as f64)
        .collect()
}

/// Inward offset distance in pixels.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct ShrinkOffset(f64);

impl ShrinkOffset {
    pub fn new(d: f64) -> Result<Self> {
        if !(d >= 0.0 && d.is_finite()) {
            return Err(Error::InvalidArgument(format!("offset {d} must be finite and non-negative")));
        }
        Ok(Self(d))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Margin between a polygon and its kernel at scale ratio `r`.
pub fn shrink_offset(polygon: &Polygon, r: f64) -> Result<ShrinkOffset> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::InvalidArgument(format!("scale ratio r={r} outside (0, 1]")));
    }
    if r == 1.0 {
        return Ok(ShrinkOffset(0.0));
    }
    let perimeter = polygon.perimeter();
    if perimeter <= 0.0 {
        return Err(Error::DegenerateGeometry("zero perimeter".into()));
    }
    ShrinkOffset::new(polygon.area() * (1.0 - r * r) / perimeter)
}

/// Offsets `polygon` inward by `d` with miter joins.
///
/// Concave input may split into several pieces; an offset deeper than the
/// polygon's inradius yields an empty list.
pub fn offset_inward(polygon: &Polygon, d: ShrinkOffset) -> Vec<Polygon> {
    if d.0 == 0.0 {
        return vec![polygon.clone()];
    }
    let path: PathD = polygon.vertices.iter().map(|p| PointD::new(p.x, p.y)).collect();
    let paths: PathsD = vec![path];
    let solution = inflate_paths_d(&paths, -d.0, JoinType::Miter, EndType::Polygon, MITER_LIMIT, CLIP_PRECISION, 0.0);
    solution
        .iter()
        .filter_map(|path| {
            let pts: Vec<Point> = path.iter().map(|p| Point::new(p.x, p.y)).collect();
            // Holes and self-overlap loops come back with negative orientation.
            if pts.len() < 3 || signed_area(&pts) <= 0.0 {
                return None;
            }
            Polygon::new(pts).ok()
        })
        .collect()
}
