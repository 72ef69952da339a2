//! Training objective: dice-based losses on the complete text map and the
//! shrunk kernels, with online hard example mining on the complete map.
//!
//! Sums are accumulated in `f64` regardless of the `f32` storage of scores.

use crate::error::{check_dims, Error, Result};
use crate::labelgen::LabelStack;
use crate::raster::{BinaryMask, ScoreMap};

/// Weight of the complete-text loss against the shrunk-kernel loss.
pub const DEFAULT_LAMBDA: f64 = 0.7;

/// Hard negatives kept per positive pixel.
pub const DEFAULT_OHEM_RATIO: f64 = 3.0;

/// Score at or above which a full-scale pixel counts toward the shrunk loss.
pub const SHRUNK_LOSS_CUTOFF: f32 = 0.5;

/// Dice coefficient `2 sum(s g) / (sum(s^2) + sum(g^2))`. Two all-zero maps
/// agree perfectly and score 1.
pub fn dice(s: &ScoreMap, g: &BinaryMask) -> Result<f64> {
    dice_masked(s, g, None)
}

/// Dice coefficient of `s * mask` against `g * mask`.
pub fn dice_masked(s: &ScoreMap, g: &BinaryMask, mask: Option<&BinaryMask>) -> Result<f64> {
    let (num, den) = dice_terms(s, g, mask)?;
    Ok(if den == 0.0 { 1.0 } else { 2.0 * num / den })
}

/// `(sum(s g), sum(s^2) + sum(g^2))` over the pixels selected by `mask`.
fn dice_terms(s: &ScoreMap, g: &BinaryMask, mask: Option<&BinaryMask>) -> Result<(f64, f64)> {
    check_dims(s.dims(), g.dims())?;
    if let Some(m) = mask {
        check_dims(s.dims(), m.dims())?;
    }
    let mut inter = 0.0f64;
    let mut den = 0.0f64;
    for (k, (&sv, &gv)) in s.as_slice().iter().zip(g.as_slice()).enumerate() {
        if mask.is_some_and(|m| m.as_slice()[k] == 0) {
            continue;
        }
        let (sv, gv) = (f64::from(sv), f64::from(gv));
        inter += sv * gv;
        den += sv * sv + gv * gv;
    }
    Ok((inter, den))
}

/// Analytic gradient of [`dice_masked`] with respect to every score.
///
/// With `I = sum(s g)` and `U = sum(s^2) + sum(g^2)` over the masked pixels,
/// `dD/ds_k = 2 (g_k U - 2 s_k I) / U^2` inside the mask and 0 outside. At
/// `U = 0` the coefficient is pinned to 1 and the gradient is taken as 0.
pub fn dice_gradient(s: &ScoreMap, g: &BinaryMask, mask: Option<&BinaryMask>) -> Result<Vec<f64>> {
    let (inter, den) = dice_terms(s, g, mask)?;
    if den == 0.0 {
        return Ok(vec![0.0; s.as_slice().len()]);
    }
    Ok(s.as_slice()
        .iter()
        .zip(g.as_slice())
        .enumerate()
        .map(|(k, (&sv, &gv))| {
            if mask.is_some_and(|m| m.as_slice()[k] == 0) {
                0.0
            } else {
                2.0 * (f64::from(gv) * den - 2.0 * f64::from(sv) * inter) / (den * den)
            }
        })
        .collect())
}

/// Training mask selected by hard example mining.
#[derive(Debug, Clone, PartialEq)]
pub struct OhemMask {
    pub mask: BinaryMask,
    pub positives_kept: usize,
    pub negatives_kept: usize,
}

/// Keeps every non-ignored text pixel plus the `floor(ratio * positives)`
/// non-ignored background pixels with the highest predicted scores. Ties at
/// the cutoff go to the earlier pixel in row-major order.
pub fn ohem_mask(s_n: &ScoreMap, g_n: &BinaryMask, ignore: &BinaryMask, ratio: f64) -> Result<OhemMask> {
    check_dims(s_n.dims(), g_n.dims())?;
    check_dims(s_n.dims(), ignore.dims())?;
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::InvalidArgument(format!("OHEM ratio {ratio} must be positive")));
    }
    let (h, w) = s_n.dims();
    let scores = s_n.as_slice();
    let mut keep = vec![0u8; h * w];
    let mut negatives: Vec<usize> = Vec::new();
    let mut positives = 0usize;
    for (k, (&gv, &iv)) in g_n.as_slice().iter().zip(ignore.as_slice()).enumerate() {
        if iv != 0 {
            continue;
        }
        if gv != 0 {
            keep[k] = 1;
            positives += 1;
        } else {
            negatives.push(k);
        }
    }
    let budget = ((ratio * positives as f64).floor() as usize).min(negatives.len());
    if budget > 0 {
        let hardest_first = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
        if budget < negatives.len() {
            negatives.select_nth_unstable_by(budget - 1, hardest_first);
        }
        for &k in &negatives[..budget] {
            keep[k] = 1;
        }
    }
    Ok(OhemMask { mask: BinaryMask::from_vec(h, w, keep)?, positives_kept: positives, negatives_kept: budget })
}

/// Complete-text loss `1 - D(s_n * M, g_n * M)`.
pub fn loss_complete(s_n: &ScoreMap, g_n: &BinaryMask, ohem: &OhemMask) -> Result<f64> {
    Ok(1.0 - dice_masked(s_n, g_n, Some(&ohem.mask))?)
}

/// Pixels that count toward the shrunk loss: predicted full-scale text that
/// is not marked ignore.
pub fn shrunk_loss_mask(s_n: &ScoreMap, ignore: &BinaryMask) -> Result<BinaryMask> {
    check_dims(s_n.dims(), ignore.dims())?;
    let data = s_n
        .as_slice()
        .iter()
        .zip(ignore.as_slice())
        .map(|(&s, &i)| u8::from(s >= SHRUNK_LOSS_CUTOFF && i == 0))
        .collect();
    BinaryMask::from_vec(s_n.height(), s_n.width(), data)
}

/// Shrunk-kernel loss: one minus the mean dice of kernels `1..n-1`, each
/// restricted to [`shrunk_loss_mask`]. Zero for a single-scale stack.
pub fn loss_shrunk(scores: &[ScoreMap], labels: &LabelStack) -> Result<f64> {
    Ok(shrunk_dice(scores, labels)?.map_or(0.0, |d| 1.0 - d.iter().sum::<f64>() / d.len() as f64))
}

fn shrunk_dice(scores: &[ScoreMap], labels: &LabelStack) -> Result<Option<Vec<f64>>> {
    let s_n = scores.last().ok_or(Error::EmptyInput("score stack"))?;
    if scores.len() != labels.n() {
        return Err(Error::InvalidArgument(format!("{} score maps for {} label masks", scores.len(), labels.n())));
    }
    if scores.len() == 1 {
        return Ok(None);
    }
    let w = shrunk_loss_mask(s_n, &labels.ignore_mask)?;
    let dices = scores[..scores.len() - 1]
        .iter()
        .zip(&labels.masks)
        .map(|(s, g)| dice_masked(s, g, Some(&w)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(dices))
}

/// `lambda * l_c + (1 - lambda) * l_s`.
pub fn total_loss(l_c: f64, l_s: f64, lambda: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} outside [0, 1]")));
    }
    Ok(lambda * l_c + (1.0 - lambda) * l_s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub total: f64,
    pub l_c: f64,
    pub l_s: f64,
    /// Masked dice of kernels `1..n-1`, then the OHEM-masked full-scale dice.
    pub dice_per_scale: Vec<f64>,
    /// Effective balance; forced to 1 for a single-scale stack.
    pub lambda: f64,
    pub ohem: OhemMask,
}

/// Every loss term for one image.
pub fn compute_losses(scores: &[ScoreMap], labels: &LabelStack, lambda: f64, ohem_ratio: f64) -> Result<LossReport> {
    let s_n = scores.last().ok_or(Error::EmptyInput("score stack"))?;
    let shrunk = shrunk_dice(scores, labels)?;
    let ohem = ohem_mask(s_n, labels.full(), &labels.ignore_mask, ohem_ratio)?;
    let full_dice = dice_masked(s_n, labels.full(), Some(&ohem.mask))?;
    let l_c = 1.0 - full_dice;
    let (l_s, lambda, mut dice_per_scale) = match shrunk {
        Some(d) => (1.0 - d.iter().sum::<f64>() / d.len() as f64, lambda, d),
        None => (0.0, 1.0, Vec::new()),
    };
    dice_per_scale.push(full_dice);
    let total = total_loss(l_c, l_s, lambda)?;
    Ok(LossReport { total, l_c, l_s, dice_per_scale, lambda, ohem })
}
