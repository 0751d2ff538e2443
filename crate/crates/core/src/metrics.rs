//! Per-layer classification metrics and concept-depth metrics over a layer
//! series.
//!
//! Layers are indexed `0..d`. The variation rate `β_i = α_i / α_{i-1}` exists
//! for `i in 1..d`, so depth fractions `i/d` range over `1/d ..= (d-1)/d`
//! and never reach 1.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A jump needs `β_i >= JUMP_THRESHOLD`.
pub const JUMP_THRESHOLD: f64 = 1.1;
/// Convergence needs `|β_i - 1| < CONVERGENCE_BAND` (strict).
pub const CONVERGENCE_BAND: f64 = 0.03;
/// Peak accuracy at or above this counts as comprehension.
pub const COMPREHENSION_THRESHOLD: f64 = 0.7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {left} predictions vs {right} labels")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    Empty,
    #[error("AUC needs both classes present")]
    SingleClass,
    #[error("score at index {0} is not finite")]
    NonFiniteScore(usize),
    #[error("label at index {0} is not binary")]
    NonBinary(usize),
    #[error("accuracy at layer {0} is zero; variation rate undefined")]
    ZeroAccuracy(usize),
    #[error("a layer series needs at least 2 layers, got {0}")]
    TooFewLayers(usize),
    #[error("accuracy {value} at layer {layer} outside [0, 1]")]
    OutOfRange { layer: usize, value: f64 },
}

fn check_pair(z: &[u8], y: &[u8]) -> Result<(), MetricsError> {
    if z.len() != y.len() {
        return Err(MetricsError::LengthMismatch {
            left: z.len(),
            right: y.len(),
        });
    }
    if let Some(i) = z.iter().chain(y).position(|&v| v > 1) {
        return Err(MetricsError::NonBinary(i % z.len().max(1)));
    }
    Ok(())
}

/// Fraction of positions where prediction and label agree.
pub fn accuracy(z: &[u8], y: &[u8]) -> Result<f64, MetricsError> {
    check_pair(z, y)?;
    if z.is_empty() {
        return Err(MetricsError::Empty);
    }
    let hits = z.iter().zip(y).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / z.len() as f64)
}

/// Binary F1 on class 1; 0 when there are no true positives, false
/// positives or false negatives at all.
pub fn f1_score(z: &[u8], y: &[u8]) -> Result<f64, MetricsError> {
    check_pair(z, y)?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &t) in z.iter().zip(y) {
        match (p, t) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fn_ += 1,
            _ => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        return Ok(0.0);
    }
    Ok(2.0 * tp as f64 / denom as f64)
}

/// ROC-AUC as the Mann-Whitney statistic with midranks for ties:
/// `(#{pos > neg} + 0.5 #{pos = neg}) / (P N)`.
pub fn auc(scores: &[f64], y: &[u8]) -> Result<f64, MetricsError> {
    if scores.len() != y.len() {
        return Err(MetricsError::LengthMismatch {
            left: scores.len(),
            right: y.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricsError::NonFiniteScore(i));
    }
    if let Some(i) = y.iter().position(|&v| v > 1) {
        return Err(MetricsError::NonBinary(i));
    }
    let positives = y.iter().filter(|&&v| v == 1).count();
    let negatives = y.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricsError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    // Sum of 1-based midranks of the positives, kept doubled so it stays an
    // exact integer.
    let mut doubled_rank_sum: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // Ranks start+1 ..= end share the midrank (start + 1 + end) / 2.
        let doubled_midrank = (start + 1 + end) as u64;
        let tied_positives = order[start..end].iter().filter(|&&i| y[i] == 1).count() as u64;
        doubled_rank_sum += doubled_midrank * tied_positives;
        start = end;
    }
    let p = positives as u64;
    // 2U = 2R - P(P+1); U counts pos>neg pairs plus half the ties.
    let doubled_u = doubled_rank_sum - p * (p + 1);
    Ok(doubled_u as f64 / (2 * p * negatives as u64) as f64)
}

/// Test-split metrics for one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEval {
    pub layer_index: usize,
    pub acc: f64,
    pub f1: f64,
    pub auc: f64,
}

impl LayerEval {
    pub fn compute(layer_index: usize, z: &[u8], scores: &[f64], y: &[u8]) -> Result<Self, MetricsError> {
        Ok(Self {
            layer_index,
            acc: accuracy(z, y)?,
            f1: f1_score(z, y)?,
            auc: auc(scores, y)?,
        })
    }
}

/// Per-layer accuracies `α_0 ..= α_{d-1}` of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerAccuracySeries {
    alpha: Vec<f64>,
}

impl LayerAccuracySeries {
    pub fn new(alpha: Vec<f64>) -> Result<Self, MetricsError> {
        if alpha.len() < 2 {
            return Err(MetricsError::TooFewLayers(alpha.len()));
        }
        if let Some((layer, &value)) = alpha
            .iter()
            .enumerate()
            .find(|(_, a)| !(0.0..=1.0).contains(*a))
        {
            return Err(MetricsError::OutOfRange { layer, value });
        }
        Ok(Self { alpha })
    }

    pub fn d(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }
}

/// A layer `i` reported as the depth fraction `i / d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthFraction {
    pub layer: usize,
    pub fraction: f64,
}

impl DepthFraction {
    fn new(layer: usize, d: usize) -> Self {
        Self {
            layer,
            fraction: layer as f64 / d as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthMetrics {
    /// `β_1 ..= β_{d-1}`; `beta[k]` is `β_{k+1}`.
    pub beta: Vec<f64>,
    pub jumping_point: Option<DepthFraction>,
    pub converging_point: Option<DepthFraction>,
    pub peak_acc: f64,
    pub peak_layer: usize,
    pub comprehended: bool,
}

/// `β_i = α_i / α_{i-1}` for `i in 1..d`.
pub fn variation_rate(series: &LayerAccuracySeries) -> Result<Vec<f64>, MetricsError> {
    if let Some(layer) = series.alpha.iter().position(|&a| a <= 0.0) {
        return Err(MetricsError::ZeroAccuracy(layer));
    }
    Ok(series.alpha.windows(2).map(|w| w[1] / w[0]).collect())
}

/// Smallest `i` with `β_i >= 1.1`, as `i / d`.
pub fn jumping_point(series: &LayerAccuracySeries) -> Result<Option<DepthFraction>, MetricsError> {
    let beta = variation_rate(series)?;
    Ok(first_jump(&beta, series.d()))
}

/// Largest `i` with `|β_i - 1| < 0.03`, as `i / d`.
///
/// This is the last near-flat step, which after a dip can be a late flat
/// segment rather than the start of the first plateau.
pub fn converging_point(series: &LayerAccuracySeries) -> Result<Option<DepthFraction>, MetricsError> {
    let beta = variation_rate(series)?;
    Ok(last_flat(&beta, series.d()))
}

fn first_jump(beta: &[f64], d: usize) -> Option<DepthFraction> {
    beta.iter()
        .position(|&b| b >= JUMP_THRESHOLD)
        .map(|k| DepthFraction::new(k + 1, d))
}

fn last_flat(beta: &[f64], d: usize) -> Option<DepthFraction> {
    beta.iter()
        .rposition(|&b| (b - 1.0).abs() < CONVERGENCE_BAND)
        .map(|k| DepthFraction::new(k + 1, d))
}

pub fn depth_metrics(series: &LayerAccuracySeries) -> Result<DepthMetrics, MetricsError> {
    let beta = variation_rate(series)?;
    let d = series.d();
    let (peak_layer, peak_acc) = series
        .alpha
        .iter()
        .copied()
        .enumerate()
        .fold((0, series.alpha[0]), |best, (i, a)| if a > best.1 { (i, a) } else { best });
    Ok(DepthMetrics {
        jumping_point: first_jump(&beta, d),
        converging_point: last_flat(&beta, d),
        beta,
        peak_acc,
        peak_layer,
        comprehended: peak_acc >= COMPREHENSION_THRESHOLD,
    })
}
