//! Independent reference implementations and fixture helpers used by the
//! acceptance gate.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};

use pse_core::raster::{BinaryMask, LabelMap};
use rand::Rng;

/// Path of a shared fixture under the workspace `fixtures/` directory.
pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn neighbours(p: usize, w: usize, h: usize) -> Vec<usize> {
    let (x, y) = (p % w, p / w);
    let mut out = Vec::with_capacity(4);
    if x > 0 {
        out.push(p - 1);
    }
    if x + 1 < w {
        out.push(p + 1);
    }
    if y > 0 {
        out.push(p - w);
    }
    if y + 1 < h {
        out.push(p + w);
    }
    out
}

/// Reference expansion without any frontier bookkeeping: every round
/// restarts a FIFO search from all labeled pixels, ordered by label and then
/// row-major position.
pub fn naive_pse(masks: &[BinaryMask]) -> Vec<u32> {
    let full = masks.last().unwrap();
    let (h, w) = full.dims();
    let inside = |m: &BinaryMask, p: usize| m.get(p % w, p / w) && full.get(p % w, p / w);

    let mut labels = vec![0u32; h * w];
    let mut next = 0;
    for start in 0..h * w {
        if !inside(&masks[0], start) || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        let mut stack = vec![start];
        while let Some(p) = stack.pop() {
            for q in neighbours(p, w, h) {
                if inside(&masks[0], q) && labels[q] == 0 {
                    labels[q] = next;
                    stack.push(q);
                }
            }
        }
    }

    for mask in &masks[1..] {
        let mut seeds: Vec<usize> = (0..h * w).filter(|&p| labels[p] != 0).collect();
        seeds.sort_by_key(|&p| (labels[p], p));
        let mut queue: VecDeque<usize> = seeds.into();
        while let Some(p) = queue.pop_front() {
            for q in neighbours(p, w, h) {
                if labels[q] == 0 && inside(mask, q) {
                    labels[q] = labels[p];
                    queue.push_back(q);
                }
            }
        }
    }
    labels
}

/// Random nested stack: blobs of random rectangles for the full mask, each
/// smaller kernel a random thinning of the next.
pub fn random_nested_stack(rng: &mut impl Rng) -> Vec<BinaryMask> {
    let h = rng.gen_range(1..=32);
    let w = rng.gen_range(1..=32);
    let n = rng.gen_range(1..=6);
    let mut full = BinaryMask::zeros(h, w);
    for _ in 0..rng.gen_range(1..=6) {
        let (x0, y0) = (rng.gen_range(0..w), rng.gen_range(0..h));
        let (x1, y1) = (rng.gen_range(x0..w) + 1, rng.gen_range(y0..h) + 1);
        for y in y0..y1 {
            for x in x0..x1 {
                full.set(x, y, true);
            }
        }
    }
    let mut masks = vec![full];
    for _ in 1..n {
        let keep = rng.gen_range(0.3..0.95);
        let prev = masks.last().unwrap();
        let next = BinaryMask::from_fn(h, w, |x, y| prev.get(x, y) && rng.gen_bool(keep));
        masks.push(next);
    }
    masks.reverse();
    masks
}

/// Text form of a label map: `H W` then one row of space-separated labels
/// per line.
pub fn label_map_to_text(labels: &LabelMap) -> String {
    let (h, w) = labels.dims();
    let mut s = format!("{h} {w}\n");
    for y in 0..h {
        let row: Vec<String> = (0..w).map(|x| labels.get(x, y).to_string()).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn label_map_from_text(text: &str) -> LabelMap {
    let mut lines = text.lines();
    let dims: Vec<usize> = lines.next().unwrap().split_whitespace().map(|v| v.parse().unwrap()).collect();
    let data: Vec<u32> = lines.flat_map(|l| l.split_whitespace().map(|v| v.parse::<u32>().unwrap())).collect();
    LabelMap::from_vec(dims[0], dims[1], data).unwrap()
}
