//! Load a run, fit one probe per layer on a shared split, evaluate, and
//! summarize the accuracy series with depth metrics.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{self, DepthMetrics, LayerAccuracySeries, LayerEval, MetricsError};
use crate::probe::{self, FeatureMatrix, ProbeConfig, ProbeError, ProbeModel, SplitIndex};
use crate::reps_io::{self, FormatError, Run, RunManifest};

/// Depth fractions of the six summary rows and their display labels.
pub const SUMMARY_DEPTHS: [(f64, &str); 6] = [
    (0.0, "1st-layer"),
    (0.25, "25%-layer"),
    (0.5, "50%-layer"),
    (0.67, "67%-layer"),
    (0.83, "83%-layer"),
    (1.0, "last-layer"),
];

#[derive(Debug, Error)]
pub enum LayerFailure {
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("labels contain a single class; probing needs both")]
    SingleClassLabels,
    #[error(transparent)]
    Split(ProbeError),
    #[error("layer {layer} failed: {cause}")]
    PartialFailure { layer: usize, cause: LayerFailure },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("could not start worker pool: {0}")]
    Pool(String),
    #[error("writing probes to {path}: {source}")]
    ProbeIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    pub fn is_io(&self) -> bool {
        match self {
            PipelineError::Format(e) => e.is_io(),
            PipelineError::ProbeIo { .. } => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub probe: ProbeConfig,
    /// Maximum number of layers fitted concurrently.
    pub parallelism: usize,
    /// Draw a fresh split per layer instead of one shared split.
    pub per_layer_split: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            probe: ProbeConfig::default(),
            parallelism: std::thread::available_parallelism().map_or(1, |p| p.get()),
            per_layer_split: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.parallelism == 0 {
            return Err(PipelineError::InvalidConfig("parallelism must be at least 1".into()));
        }
        self.probe
            .validate()
            .map_err(|e| PipelineError::InvalidConfig(e.to_string()))
    }
}

/// Configuration as echoed in a report. Parallelism is left out so reports
/// do not depend on the machine they were produced on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub lambda: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub standardize: bool,
    pub split_seed: u64,
    pub train_fraction: f64,
    pub per_layer_split: bool,
    pub train_size: usize,
    pub test_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    #[serde(flatten)]
    pub eval: LayerEval,
    pub converged: bool,
    pub iters_used: usize,
    pub final_grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub depth: f64,
    pub layer_index: usize,
    pub acc: f64,
    pub auc: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub manifest: RunManifest,
    pub config: ConfigEcho,
    pub layers: Vec<LayerReport>,
    pub depth_metrics: DepthMetrics,
    pub summary: Vec<SummaryRow>,
}

impl RunReport {
    pub fn test_accuracies(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.eval.acc).collect()
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: RunReport,
    /// One probe per layer, in layer order.
    pub probes: Vec<ProbeModel>,
}

/// Layers picked for the six-row summary: `round(f · (d − 1))`.
pub fn summary_layers(d: usize) -> [usize; 6] {
    let last = d.saturating_sub(1) as f64;
    SUMMARY_DEPTHS.map(|(f, _)| (f * last).round() as usize)
}

/// Splits for each of the `d` layers.
pub fn plan_splits(n: usize, d: usize, config: &PipelineConfig) -> Result<Vec<SplitIndex>, PipelineError> {
    let frac = config.probe.train_fraction;
    let seed = config.probe.split_seed;
    if config.per_layer_split {
        (0..d)
            .map(|i| probe::split_with_seed(n, frac, seed ^ i as u64).map_err(PipelineError::Split))
            .collect()
    } else {
        let shared = probe::split_with_seed(n, frac, seed).map_err(PipelineError::Split)?;
        Ok(vec![shared; d])
    }
}

pub fn run_pipeline(run_dir: &Path, config: &PipelineConfig) -> Result<RunReport, PipelineError> {
    config.validate()?;
    let run = reps_io::load_run(run_dir)?;
    Ok(evaluate_run(&run, config)?.report)
}

/// Runs the pipeline on a run that is already in memory.
pub fn evaluate_run(run: &Run, config: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    config.validate()?;
    let y = run.labels.as_slice();
    if !(y.contains(&0) && y.contains(&1)) {
        return Err(PipelineError::SingleClassLabels);
    }
    let d = run.layers.len();
    let splits = plan_splits(y.len(), d, config)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))?;
    let results: Vec<Result<(LayerReport, ProbeModel), LayerFailure>> = pool.install(|| {
        run.layers
            .par_iter()
            .zip(splits.par_iter())
            .map(|(layer, split)| fit_layer(layer, y, split, &config.probe))
            .collect()
    });

    let mut layers = Vec::with_capacity(d);
    let mut probes = Vec::with_capacity(d);
    for (layer, result) in results.into_iter().enumerate() {
        let (report, model) = result.map_err(|cause| PipelineError::PartialFailure { layer, cause })?;
        layers.push(report);
        probes.push(model);
    }

    let alpha: Vec<f64> = layers.iter().map(|l| l.eval.acc).collect();
    let depth_metrics = metrics::depth_metrics(&LayerAccuracySeries::new(alpha)?)?;
    let summary = summary_layers(d)
        .iter()
        .zip(SUMMARY_DEPTHS)
        .map(|(&i, (depth, label))| SummaryRow {
            label: label.to_string(),
            depth,
            layer_index: i,
            acc: layers[i].eval.acc,
            auc: layers[i].eval.auc,
            f1: layers[i].eval.f1,
        })
        .collect();
    let p = &config.probe;
    let config_echo = ConfigEcho {
        lambda: p.lambda,
        max_iters: p.max_iters,
        grad_tol: p.grad_tol,
        standardize: p.standardize,
        split_seed: p.split_seed,
        train_fraction: p.train_fraction,
        per_layer_split: config.per_layer_split,
        train_size: splits[0].train.len(),
        test_size: splits[0].test.len(),
    };
    Ok(PipelineOutput {
        report: RunReport {
            manifest: run.manifest.clone(),
            config: config_echo,
            layers,
            depth_metrics,
            summary,
        },
        probes,
    })
}

fn fit_layer(
    layer: &reps_io::RepresentationMatrix,
    y: &[u8],
    split: &SplitIndex,
    config: &ProbeConfig,
) -> Result<(LayerReport, ProbeModel), LayerFailure> {
    let pick = |rows: &[usize]| -> (FeatureMatrix, Vec<u8>) {
        (
            FeatureMatrix::from_representation(layer, rows),
            rows.iter().map(|&r| y[r]).collect(),
        )
    };
    let (x_train, y_train) = pick(&split.train);
    let model = probe::fit(&x_train, &y_train, config)?;
    drop(x_train);
    let (x_test, y_test) = pick(&split.test);
    let pred = probe::predict(&model, &x_test)?;
    let eval = LayerEval::compute(layer.layer_index(), &pred.z, &pred.scores, &y_test)?;
    let report = LayerReport {
        eval,
        converged: model.converged,
        iters_used: model.iters_used,
        final_grad_norm: model.final_grad_norm,
    };
    Ok((report, model))
}

/// Writes `probe_NNN.json` for each layer into `dir`.
pub fn save_probes(dir: &Path, probes: &[ProbeModel]) -> Result<(), PipelineError> {
    let io_err = |path: &Path, source| PipelineError::ProbeIo {
        path: path.display().to_string(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    for (i, model) in probes.iter().enumerate() {
        let path = dir.join(format!("probe_{i:03}.json"));
        std::fs::write(&path, model.to_json()).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}
