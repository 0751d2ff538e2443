//! L2-regularized logistic-regression probes.
//!
//! The probe minimizes
//!
//! ```text
//! J(θ, b) = (1/n) Σ_i [softplus(s_i) − y_i s_i] + (λ / 2n) ‖θ‖²,   s_i = θᵀx_i + b
//! ```
//!
//! which is the usual binary cross-entropy written in a form that never
//! evaluates `log(0)`. The intercept `b` is not penalized. Training is
//! full-batch gradient descent with Armijo backtracking from θ = 0, b = 0,
//! so a fit is a pure, deterministic function of its inputs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::json;
use crate::reps_io::RepresentationMatrix;
use crate::rng::Xorshift64Star;

/// Armijo sufficient-decrease constant.
pub const ARMIJO_C: f64 = 1e-4;
/// Step shrink factor during backtracking.
pub const BACKTRACK_SHRINK: f64 = 0.5;
/// First trial step of every line search.
pub const INITIAL_STEP: f64 = 1.0;
/// Backtracking gives up after this many halvings (step ≈ 1e-18).
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbeError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("training labels contain a single class")]
    SingleClassTraining,
    #[error("non-finite objective or gradient at iteration {iteration}")]
    NonFiniteEncountered { iteration: usize },
    #[error("non-finite input value at row {row}, column {col}")]
    NonFiniteInput { row: usize, col: usize },
    #[error("split needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("invalid probe config: {0}")]
    InvalidConfig(String),
    #[error("label {value} at index {index} is not binary")]
    NonBinaryLabel { index: usize, value: u8 },
}

fn shape_err(expected: impl ToString, found: impl ToString) -> ProbeError {
    ProbeError::ShapeMismatch {
        expected: expected.to_string(),
        found: found.to_string(),
    }
}

/// Dense row-major `f64` design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, ProbeError> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(shape_err(
                format!("{rows}x{cols} = {} values", rows * cols),
                format!("{} values", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ProbeError> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(shape_err(format!("{cols} columns"), format!("{} columns", bad.len())));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    /// Widens the selected rows of a stored layer to `f64`.
    pub fn from_representation(matrix: &RepresentationMatrix, rows: &[usize]) -> Self {
        let cols = matrix.d_model();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for &r in rows {
            data.extend(matrix.row(r).iter().map(|&v| f64::from(v)));
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Self {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }

    fn check_finite(&self) -> Result<(), ProbeError> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(flat) => Err(ProbeError::NonFiniteInput {
                row: flat / self.cols.max(1),
                col: flat % self.cols.max(1),
            }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub lambda: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub standardize: bool,
    pub split_seed: u64,
    pub train_fraction: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            max_iters: 10_000,
            grad_tol: 1e-6,
            standardize: true,
            split_seed: 42,
            train_fraction: 0.8,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<(), ProbeError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(ProbeError::InvalidConfig(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(ProbeError::InvalidConfig(format!(
                "lambda must be finite and non-negative, got {}",
                self.lambda
            )));
        }
        if self.max_iters == 0 {
            return Err(ProbeError::InvalidConfig("max_iters must be at least 1".into()));
        }
        if self.grad_tol.is_nan() || self.grad_tol < 0.0 {
            return Err(ProbeError::InvalidConfig(format!(
                "grad_tol must be non-negative, got {}",
                self.grad_tol
            )));
        }
        Ok(())
    }
}

/// A trained probe for one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel {
    pub theta: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
    pub converged: bool,
    pub iters_used: usize,
    pub final_grad_norm: f64,
}

impl ProbeModel {
    /// Model with the given weights and an identity feature transform.
    pub fn from_weights(theta: Vec<f64>, intercept: f64) -> Self {
        let m = theta.len();
        Self {
            theta,
            intercept,
            lambda: 0.0,
            feature_means: vec![0.0; m],
            feature_stds: vec![1.0; m],
            converged: true,
            iters_used: 0,
            final_grad_norm: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// Applies the stored standardization to `x`.
    pub fn transform(&self, x: &FeatureMatrix) -> Result<FeatureMatrix, ProbeError> {
        if x.cols() != self.dim() {
            return Err(shape_err(format!("{} columns", self.dim()), format!("{} columns", x.cols())));
        }
        Ok(standardize_with(x, &self.feature_means, &self.feature_stds))
    }

    pub fn to_json(&self) -> String {
        json::to_canonical_string(self).expect("probe model is always serializable")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// Predicted labels plus the probabilities they were thresholded from.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionVector {
    pub z: Vec<u8>,
    pub scores: Vec<f64>,
}

/// Disjoint train/test index sets covering `0..n`, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SplitIndex {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Logistic function, evaluated so that `exp` only ever sees a non-positive
/// argument.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn check_problem(theta: &[f64], x: &FeatureMatrix, y: &[u8]) -> Result<(), ProbeError> {
    if x.cols() != theta.len() {
        return Err(shape_err(format!("{} columns", theta.len()), format!("{} columns", x.cols())));
    }
    if x.rows() != y.len() {
        return Err(shape_err(format!("{} labels", x.rows()), format!("{} labels", y.len())));
    }
    if x.rows() == 0 {
        return Err(shape_err("at least one row", "0 rows"));
    }
    if let Some((index, &value)) = y.iter().enumerate().find(|(_, &v)| v > 1) {
        return Err(ProbeError::NonBinaryLabel { index, value });
    }
    Ok(())
}

fn decision_values(theta: &[f64], intercept: f64, x: &FeatureMatrix) -> Vec<f64> {
    (0..x.rows())
        .map(|i| {
            x.row(i)
                .iter()
                .zip(theta)
                .fold(intercept, |acc, (xi, ti)| acc + xi * ti)
        })
        .collect()
}

fn penalty(theta: &[f64], lambda: f64, n: usize) -> f64 {
    lambda / (2.0 * n as f64) * theta.iter().map(|t| t * t).sum::<f64>()
}

fn objective_unchecked(theta: &[f64], intercept: f64, x: &FeatureMatrix, y: &[u8], lambda: f64) -> f64 {
    let n = x.rows();
    let loss: f64 = decision_values(theta, intercept, x)
        .iter()
        .zip(y)
        .map(|(&s, &yi)| softplus(s) - f64::from(yi) * s)
        .sum();
    loss / n as f64 + penalty(theta, lambda, n)
}

/// Regularized cross-entropy objective.
pub fn objective(
    theta: &[f64],
    intercept: f64,
    x: &FeatureMatrix,
    y: &[u8],
    lambda: f64,
) -> Result<f64, ProbeError> {
    check_problem(theta, x, y)?;
    Ok(objective_unchecked(theta, intercept, x, y, lambda))
}

/// Objective value and gradient from one pass over the data.
fn value_and_gradient(
    theta: &[f64],
    intercept: f64,
    x: &FeatureMatrix,
    y: &[u8],
    lambda: f64,
) -> (f64, Vec<f64>, f64) {
    let n = x.rows();
    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; theta.len()];
    let mut grad_b = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let row = x.row(i);
        let s = row.iter().zip(theta).fold(intercept, |acc, (xi, ti)| acc + xi * ti);
        let yf = f64::from(yi);
        loss += softplus(s) - yf * s;
        let residual = sigmoid(s) - yf;
        grad_b += residual;
        for (g, xi) in grad.iter_mut().zip(row) {
            *g += residual * xi;
        }
    }
    let shrink = lambda * inv_n;
    for (g, t) in grad.iter_mut().zip(theta) {
        *g = *g * inv_n + shrink * t;
    }
    (loss / n as f64 + penalty(theta, lambda, n), grad, grad_b * inv_n)
}

/// Analytic gradient of [`objective`] with respect to `(θ, b)`.
pub fn gradient(
    theta: &[f64],
    intercept: f64,
    x: &FeatureMatrix,
    y: &[u8],
    lambda: f64,
) -> Result<(Vec<f64>, f64), ProbeError> {
    check_problem(theta, x, y)?;
    let (_, g, gb) = value_and_gradient(theta, intercept, x, y, lambda);
    Ok((g, gb))
}

/// Number of training samples for `n` samples at `train_fraction`:
/// `round(train_fraction * n)` clamped to `1..=n-1` so neither side is empty.
pub fn train_size(n: usize, train_fraction: f64) -> usize {
    let k = (train_fraction * n as f64).round() as usize;
    k.clamp(1, n - 1)
}

/// Seeded Fisher-Yates shuffle of `0..n`; the first `train_size` shuffled
/// indices form the training set.
pub fn split(n: usize, config: &ProbeConfig) -> Result<SplitIndex, ProbeError> {
    split_with_seed(n, config.train_fraction, config.split_seed)
}

pub fn split_with_seed(n: usize, train_fraction: f64, seed: u64) -> Result<SplitIndex, ProbeError> {
    if n < 2 {
        return Err(ProbeError::TooFewSamples(n));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(ProbeError::InvalidConfig(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = Xorshift64Star::new(seed);
    for i in (1..n).rev() {
        let j = rng.next_below(i as u64 + 1) as usize;
        perm.swap(i, j);
    }
    let k = train_size(n, train_fraction);
    let mut train = perm[..k].to_vec();
    let mut test = perm[k..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndex { train, test })
}

/// Per-column mean and population standard deviation. Columns whose spread
/// is negligible relative to their magnitude get std 1 and are reported in
/// the returned mask.
fn feature_stats(x: &FeatureMatrix) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let n = x.rows() as f64;
    let mut means = vec![0.0; x.cols()];
    for i in 0..x.rows() {
        for (m, v) in means.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut vars = vec![0.0; x.cols()];
    for i in 0..x.rows() {
        for ((acc, v), m) in vars.iter_mut().zip(x.row(i)).zip(&means) {
            *acc += (v - m) * (v - m);
        }
    }
    let mut stds = Vec::with_capacity(x.cols());
    let mut constant = Vec::with_capacity(x.cols());
    for (var, mean) in vars.iter().zip(&means) {
        let std = (var / n).sqrt();
        let flat = std <= 1e-12 * mean.abs().max(1.0);
        stds.push(if flat { 1.0 } else { std });
        constant.push(flat);
    }
    (means, stds, constant)
}

fn standardize_with(x: &FeatureMatrix, means: &[f64], stds: &[f64]) -> FeatureMatrix {
    let mut data = Vec::with_capacity(x.data.len());
    for i in 0..x.rows() {
        data.extend(
            x.row(i)
                .iter()
                .zip(means.iter().zip(stds))
                .map(|(v, (m, s))| (v - m) / s),
        );
    }
    FeatureMatrix {
        rows: x.rows,
        cols: x.cols,
        data,
    }
}

/// One accepted descent step, reported to a [`fit_observed`] observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub iteration: usize,
    pub objective_before: f64,
    pub objective_after: f64,
    pub step_size: f64,
}

/// Trains a probe on `(x, y)`.
pub fn fit(x: &FeatureMatrix, y: &[u8], config: &ProbeConfig) -> Result<ProbeModel, ProbeError> {
    fit_observed(x, y, config, |_| {})
}

/// [`fit`], calling `observer` after every accepted step.
pub fn fit_observed(
    x: &FeatureMatrix,
    y: &[u8],
    config: &ProbeConfig,
    mut observer: impl FnMut(StepRecord),
) -> Result<ProbeModel, ProbeError> {
    config.validate()?;
    let m = x.cols();
    check_problem(&vec![0.0; m], x, y)?;
    x.check_finite()?;
    let positives = y.iter().filter(|&&v| v == 1).count();
    if positives == 0 || positives == y.len() {
        return Err(ProbeError::SingleClassTraining);
    }

    let (means, stds, pinned) = if config.standardize {
        feature_stats(x)
    } else {
        let (_, _, constant) = feature_stats(x);
        (vec![0.0; m], vec![1.0; m], constant)
    };
    let z = standardize_with(x, &means, &stds);

    let lambda = config.lambda;
    let mut theta = vec![0.0; m];
    let mut intercept = 0.0;
    let mut iters_used = 0;
    let mut converged = false;

    let (mut value, mut grad, mut grad_b) = value_and_gradient(&theta, intercept, &z, y, lambda);
    mask(&mut grad, &pinned);
    let mut grad_norm = inf_norm(&grad, grad_b);

    for iteration in 0..config.max_iters {
        if !value.is_finite() || !grad_norm.is_finite() {
            return Err(ProbeError::NonFiniteEncountered { iteration });
        }
        if grad_norm < config.grad_tol {
            converged = true;
            break;
        }
        let grad_sq = grad.iter().map(|g| g * g).sum::<f64>() + grad_b * grad_b;
        let mut step = INITIAL_STEP;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t - step * g).collect();
            let trial_b = intercept - step * grad_b;
            let trial_value = objective_unchecked(&trial, trial_b, &z, y, lambda);
            if trial_value <= value - ARMIJO_C * step * grad_sq {
                accepted = Some((trial, trial_b, trial_value));
                break;
            }
            step *= BACKTRACK_SHRINK;
        }
        // No sufficient decrease at any step size: the iterate is at the
        // floating-point resolution of the objective.
        let Some((next, next_b, next_value)) = accepted else {
            break;
        };
        observer(StepRecord {
            iteration,
            objective_before: value,
            objective_after: next_value,
            step_size: step,
        });
        theta = next;
        intercept = next_b;
        iters_used += 1;
        (value, grad, grad_b) = value_and_gradient(&theta, intercept, &z, y, lambda);
        mask(&mut grad, &pinned);
        grad_norm = inf_norm(&grad, grad_b);
    }
    if !converged && grad_norm < config.grad_tol {
        converged = true;
    }
    if theta.iter().any(|t| !t.is_finite()) || !intercept.is_finite() {
        return Err(ProbeError::NonFiniteEncountered {
            iteration: iters_used,
        });
    }

    Ok(ProbeModel {
        theta,
        intercept,
        lambda,
        feature_means: means,
        feature_stds: stds,
        converged,
        iters_used,
        final_grad_norm: grad_norm,
    })
}

fn mask(grad: &mut [f64], pinned: &[bool]) {
    for (g, &p) in grad.iter_mut().zip(pinned) {
        if p {
            *g = 0.0;
        }
    }
}

fn inf_norm(grad: &[f64], grad_b: f64) -> f64 {
    grad.iter().fold(grad_b.abs(), |acc, g| acc.max(g.abs()))
}

/// Scores every row; `z = 1` iff the score is at least 0.5.
pub fn predict(model: &ProbeModel, x: &FeatureMatrix) -> Result<PredictionVector, ProbeError> {
    let standardized = model.transform(x)?;
    let scores: Vec<f64> = decision_values(&model.theta, model.intercept, &standardized)
        .into_iter()
        .map(sigmoid)
        .collect();
    let z = scores.iter().map(|&p| u8::from(p >= 0.5)).collect();
    Ok(PredictionVector { z, scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Xorshift64Star;
    use proptest::prelude::*;

    fn random_problem(seed: u64, n: usize, m: usize) -> (FeatureMatrix, Vec<u8>) {
        let mut rng = Xorshift64Star::new(seed);
        let data = (0..n * m).map(|_| rng.next_gaussian()).collect();
        let mut y: Vec<u8> = (0..n).map(|_| u8::from(rng.next_f64() < 0.5)).collect();
        y[0] = 0;
        y[1] = 1;
        (FeatureMatrix::new(n, m, data).unwrap(), y)
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(800.0), 1.0);
        assert_eq!(sigmoid(-800.0), 0.0);
        // 1 / (1 + e^-2), evaluated independently.
        assert!((sigmoid(2.0) - 0.880_797_077_977_882_3).abs() < 1e-15);
        assert!((sigmoid(-2.0) - (1.0 - 0.880_797_077_977_882_3)).abs() < 1e-15);
    }

    #[test]
    fn objective_at_origin_is_ln2() {
        let (x, y) = random_problem(1, 7, 3);
        for lambda in [0.0, 1.0, 50.0] {
            let j = objective(&[0.0; 3], 0.0, &x, &y, lambda).unwrap();
            assert!((j - std::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn objective_single_point() {
        let x = FeatureMatrix::new(1, 1, vec![1.0]).unwrap();
        // -ln σ(2) = 0.12692801104297263 by direct evaluation.
        let j0 = objective(&[2.0], 0.0, &x, &[1], 0.0).unwrap();
        assert!((j0 - 0.126_928_011_042_972_63).abs() < 1e-15);
        let j1 = objective(&[2.0], 0.0, &x, &[1], 1.0).unwrap();
        assert!((j1 - 2.126_928_011_042_972_7).abs() < 1e-14);
    }

    #[test]
    fn objective_rejects_shape_mismatch() {
        let (x, y) = random_problem(2, 5, 3);
        assert!(matches!(objective(&[0.0; 2], 0.0, &x, &y, 1.0), Err(ProbeError::ShapeMismatch { .. })));
        assert!(matches!(gradient(&[0.0; 3], 0.0, &x, &y[..4], 1.0), Err(ProbeError::ShapeMismatch { .. })));
    }

    #[test]
    fn gradient_at_origin() {
        let (x, y) = random_problem(3, 6, 2);
        let (g, _) = gradient(&[0.0; 2], 0.0, &x, &y, 3.0).unwrap();
        for (j, gj) in g.iter().enumerate() {
            let expected: f64 = (0..6).map(|i| x.row(i)[j] * (0.5 - f64::from(y[i]))).sum::<f64>() / 6.0;
            assert!((gj - expected).abs() < 1e-15);
        }
        // Symmetric design with balanced labels: intercept gradient vanishes.
        let sym = FeatureMatrix::from_rows(&[vec![1.0, -2.0], vec![-1.0, 2.0]]).unwrap();
        let (_, gb) = gradient(&[0.0; 2], 0.0, &sym, &[1, 0], 1.0).unwrap();
        assert_eq!(gb, 0.0);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let config = ProbeConfig::default();
        let s = split(1000, &config).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (800, 200));
        assert_eq!(split(1000, &config).unwrap(), s);
        let small = split(5, &config).unwrap();
        assert_eq!((small.train.len(), small.test.len()), (4, 1));
        let two = split(2, &config).unwrap();
        assert_eq!((two.train.len(), two.test.len()), (1, 1));
        assert!(matches!(split(1, &config), Err(ProbeError::TooFewSamples(1))));
        let other = split_with_seed(1000, 0.8, 43).unwrap();
        assert_ne!(other, s);
    }

    #[test]
    fn separable_set_is_fit_exactly() {
        let mut rng = Xorshift64Star::new(11);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let c = if i % 2 == 0 { -2.0 } else { 2.0 };
            rows.push(vec![c + 0.5 * (rng.next_f64() - 0.5), rng.next_f64() - 0.5]);
            y.push(u8::from(c > 0.0));
        }
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let config = ProbeConfig {
            lambda: 0.01,
            ..ProbeConfig::default()
        };
        let model = fit(&x, &y, &config).unwrap();
        assert_eq!(predict(&model, &x).unwrap().z, y);
    }

    #[test]
    fn single_class_is_rejected() {
        let (x, _) = random_problem(4, 6, 2);
        assert_eq!(fit(&x, &[1; 6], &ProbeConfig::default()), Err(ProbeError::SingleClassTraining));
    }

    #[test]
    fn zero_variance_feature_is_pinned() {
        let (x, y) = random_problem(5, 30, 2);
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![x.row(i)[0], 0.1, x.row(i)[1]]).collect();
        let x3 = FeatureMatrix::from_rows(&rows).unwrap();
        for standardize in [true, false] {
            let config = ProbeConfig {
                standardize,
                ..ProbeConfig::default()
            };
            let model = fit(&x3, &y, &config).unwrap();
            assert_eq!(model.theta[1], 0.0);
            assert!(model.feature_stds.iter().all(|&s| s > 0.0));
        }
    }

    #[test]
    fn zero_model_predicts_class_one() {
        let (x, _) = random_problem(6, 5, 3);
        let p = predict(&ProbeModel::from_weights(vec![0.0; 3], 0.0), &x).unwrap();
        assert!(p.scores.iter().all(|&s| s == 0.5));
        assert!(p.z.iter().all(|&z| z == 1));
    }

    #[test]
    fn standardization_composes() {
        let (x, y) = random_problem(7, 40, 4);
        let model = fit(&x, &y, &ProbeConfig::default()).unwrap();
        let pre = model.transform(&x).unwrap();
        let identity = ProbeModel::from_weights(model.theta.clone(), model.intercept);
        assert_eq!(predict(&model, &x).unwrap(), predict(&identity, &pre).unwrap());
    }

    #[test]
    fn stronger_penalty_shrinks_weights() {
        let (x, y) = random_problem(8, 40, 4);
        let norm = |lambda: f64| {
            let config = ProbeConfig {
                lambda,
                ..ProbeConfig::default()
            };
            let model = fit(&x, &y, &config).unwrap();
            model.theta.iter().map(|t| t * t).sum::<f64>().sqrt()
        };
        assert!(norm(10.0) <= norm(0.01));
    }

    #[test]
    fn model_json_round_trip() {
        let (x, y) = random_problem(9, 40, 3);
        let model = fit(&x, &y, &ProbeConfig::default()).unwrap();
        let text = model.to_json();
        let back = ProbeModel::from_json(&text).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn rejects_bad_config() {
        let (x, y) = random_problem(10, 10, 2);
        for config in [
            ProbeConfig { train_fraction: 1.0, ..ProbeConfig::default() },
            ProbeConfig { lambda: -1.0, ..ProbeConfig::default() },
            ProbeConfig { max_iters: 0, ..ProbeConfig::default() },
        ] {
            assert!(matches!(fit(&x, &y, &config), Err(ProbeError::InvalidConfig(_))));
        }
    }

    fn central_difference(theta: &[f64], b: f64, x: &FeatureMatrix, y: &[u8], lambda: f64) -> Vec<f64> {
        let h = 1e-5;
        let j = |t: &[f64], b: f64| objective(t, b, x, y, lambda).unwrap();
        let mut out = Vec::with_capacity(theta.len() + 1);
        for k in 0..theta.len() {
            let mut up = theta.to_vec();
            let mut down = theta.to_vec();
            up[k] += h;
            down[k] -= h;
            out.push((j(&up, b) - j(&down, b)) / (2.0 * h));
        }
        out.push((j(theta, b + h) - j(theta, b - h)) / (2.0 * h));
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn gradient_matches_finite_differences(
            seed in any::<u64>(),
            n in 2usize..=40,
            m in 1usize..=5,
            lambda in 0.0f64..5.0,
        ) {
            let (x, y) = random_problem(seed, n, m);
            let mut rng = Xorshift64Star::new(seed ^ 0xABCD);
            let theta: Vec<f64> = (0..m).map(|_| rng.next_gaussian()).collect();
            let b = rng.next_gaussian();
            let (g, gb) = gradient(&theta, b, &x, &y, lambda).unwrap();
            let mut analytic = g.clone();
            analytic.push(gb);
            let numeric = central_difference(&theta, b, &x, &y, lambda);
            let diff = analytic.iter().zip(&numeric).map(|(a, f)| (a - f).powi(2)).sum::<f64>().sqrt();
            let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt()
                .max(numeric.iter().map(|a| a * a).sum::<f64>().sqrt())
                .max(1e-8);
            prop_assert!(diff / scale < 1e-5, "relative error {}", diff / scale);
        }

        #[test]
        fn objective_never_increases(seed in any::<u64>(), n in 4usize..=40, m in 1usize..=5) {
            let (x, y) = random_problem(seed, n, m);
            let mut steps = Vec::new();
            fit_observed(&x, &y, &ProbeConfig::default(), |s| steps.push(s)).unwrap();
            for s in &steps {
                prop_assert!(s.objective_after <= s.objective_before + 1e-12);
            }
            for pair in steps.windows(2) {
                prop_assert!(pair[1].objective_before == pair[0].objective_after);
            }
        }

        #[test]
        fn fit_is_deterministic(seed in any::<u64>()) {
            let (x, y) = random_problem(seed, 30, 3);
            let a = fit(&x, &y, &ProbeConfig::default()).unwrap();
            let b = fit(&x, &y, &ProbeConfig::default()).unwrap();
            prop_assert_eq!(a.to_json(), b.to_json());
        }

        #[test]
        fn predictions_invariant_under_positive_scaling(seed in any::<u64>()) {
            let (x, _) = random_problem(seed, 25, 3);
            let mut rng = Xorshift64Star::new(seed);
            let theta: Vec<f64> = (0..3).map(|_| rng.next_gaussian()).collect();
            let b = rng.next_gaussian();
            let base = predict(&ProbeModel::from_weights(theta.clone(), b), &x).unwrap();
            let scaled = ProbeModel::from_weights(theta.iter().map(|t| 3.0 * t).collect(), 3.0 * b);
            prop_assert_eq!(predict(&scaled, &x).unwrap().z, base.z);
        }
    }
}
