//! Wall-clock scaling harness for progressive scale expansion.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{synthesize, SynthShape, SynthSpec};
use crate::pse::{binarize, connected_components, extract_detections, pse, ExtractConfig, DEFAULT_THRESHOLD};
use crate::raster::ScoreMap;

pub const MIN_REPEATS: usize = 5;
pub const DEFAULT_REPEATS: usize = 20;
const WARMUP_RUNS: usize = 2;

/// Side of the square text tiles covering a benchmark fixture.
const TILE: usize = 32;
/// Minimal kernel scale of the fixture, small so most pixels are reached by
/// expansion rather than seeding.
const FIXTURE_M: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub height: usize,
    pub width: usize,
    pub n: usize,
    pub pixels: usize,
    /// Binarization plus seed labelling only.
    pub components_ms: f64,
    pub pse_ms: f64,
    /// `pse` plus rectangle extraction.
    pub total_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub repeats: usize,
    pub rows: Vec<BenchRow>,
    /// `pse_ms` against pixel count.
    pub fit: LinearFit,
    /// `ln pse_ms` against `ln pixels`.
    pub loglog: LinearFit,
}

impl BenchReport {
    pub fn table(&self) -> String {
        let mut s = String::from("      H       W   n      pixels   comp_ms    pse_ms  total_ms\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>7} {:>7} {:>3} {:>11} {:>9.3} {:>9.3} {:>9.3}",
                r.height, r.width, r.n, r.pixels, r.components_ms, r.pse_ms, r.total_ms
            );
        }
        let _ = writeln!(
            s,
            "linear fit: pse_ms = {:.3e} * pixels + {:.3} (r2 {:.4})",
            self.fit.slope, self.fit.intercept, self.fit.r2
        );
        let _ = writeln!(s, "log-log slope: {:.3} (r2 {:.4})", self.loglog.slope, self.loglog.r2);
        s
    }
}

/// Least-squares line through `(x, y)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument("a fit needs at least two paired points".into()));
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("fit needs distinct x values".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit { slope, intercept: my - slope * mx, r2 })
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

/// Dense worst case: the image is tiled edge to edge with square text
/// instances, so every pixel is text and most are claimed by expansion.
pub fn dense_fixture(height: usize, width: usize, n: usize) -> Result<Vec<ScoreMap>> {
    let mut shapes = Vec::new();
    for y in (0..height).step_by(TILE) {
        for x in (0..width).step_by(TILE) {
            let (x1, y1) = ((x + TILE).min(width), (y + TILE).min(height));
            shapes.push(SynthShape::Rect([x as f64, y as f64, x1 as f64, y1 as f64]));
        }
    }
    let spec = SynthSpec { height, width, n, m: FIXTURE_M, shapes, noise: 0.0, seed: 0 };
    Ok(synthesize(&spec)?.planes)
}

fn time_ms(mut f: impl FnMut()) -> f64 {
    let start = Instant::now();
    f();
    start.elapsed().as_secs_f64() * 1e3
}

fn measure(repeats: usize, mut f: impl FnMut()) -> f64 {
    for _ in 0..WARMUP_RUNS {
        f();
    }
    let mut times: Vec<f64> = (0..repeats).map(|_| time_ms(&mut f)).collect();
    median(&mut times)
}

/// Times one fixture per `(H, W)` resolution, single-threaded.
pub fn run_bench(resolutions: &[(usize, usize)], n: usize, repeats: usize) -> Result<BenchReport> {
    if repeats < MIN_REPEATS {
        return Err(Error::InvalidArgument(format!("repeats must be at least {MIN_REPEATS}, got {repeats}")));
    }
    if resolutions.len() < 2 {
        return Err(Error::InvalidArgument("need at least two resolutions to fit".into()));
    }
    let extract = ExtractConfig::default();
    let mut rows = Vec::with_capacity(resolutions.len());
    for &(height, width) in resolutions {
        let planes = dense_fixture(height, width, n)?;
        log::info!("bench {height}x{width}, n={n}");
        let components_ms = measure(repeats, || {
            let small = binarize(&planes[0], DEFAULT_THRESHOLD).expect("valid plane");
            let full = binarize(&planes[n - 1], DEFAULT_THRESHOLD).expect("valid plane");
            std::hint::black_box(connected_components(&small.and(&full).expect("same size")));
        });
        let pse_ms = measure(repeats, || {
            std::hint::black_box(pse(&planes, DEFAULT_THRESHOLD).expect("valid stack"));
        });
        let total_ms = measure(repeats, || {
            let labels = pse(&planes, DEFAULT_THRESHOLD).expect("valid stack");
            std::hint::black_box(extract_detections(&labels, &extract));
        });
        rows.push(BenchRow { height, width, n, pixels: height * width, components_ms, pse_ms, total_ms });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.pixels as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.pse_ms).collect();
    let fit = linear_fit(&xs, &ys)?;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.max(1e-9).ln()).collect();
    let loglog = linear_fit(&lx, &ly)?;
    Ok(BenchReport { repeats, rows, fit, loglog })
}
