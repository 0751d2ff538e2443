//! Synthetic runs with a designed separability profile over depth.
//!
//! Layer `i` draws each sample as `x = c · (μ_i / 2) · u + σ · ε`, where
//! `c = −1` for label 0 and `+1` for label 1, `u` is a fixed random unit
//! vector and `ε` is isotropic standard Gaussian noise. Along `u` the two
//! classes are `N(±μ_i/2, σ²)`, so the best achievable accuracy at layer `i`
//! is `Φ(μ_i / 2σ)`.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reps_io::{self, FormatError, LabelVector, RepresentationMatrix, Run, RunManifest};
use crate::rng::Xorshift64Star;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("profile file: {0}")]
    ProfileFile(String),
}

impl SynthError {
    pub fn is_io(&self) -> bool {
        match self {
            SynthError::Format(e) => e.is_io(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmergenceProfile {
    /// Number of layers.
    pub d: usize,
    pub d_model: usize,
    /// Sample count; must be even so the classes are balanced.
    pub n: usize,
    /// Within-class standard deviation.
    pub sigma: f64,
    /// Class-mean separation `μ_i` for each layer.
    pub sep: Vec<f64>,
    pub direction_seed: u64,
    pub noise_seed: u64,
}

impl EmergenceProfile {
    /// Separation 0 before layer `step_layer` and `step_sep` from it on.
    pub fn step(d: usize, d_model: usize, n: usize, sigma: f64, step_layer: usize, step_sep: f64) -> Self {
        Self {
            d,
            d_model,
            n,
            sigma,
            sep: (0..d).map(|i| if i < step_layer { 0.0 } else { step_sep }).collect(),
            direction_seed: 1,
            noise_seed: 2,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |m: String| Err(SynthError::InvalidProfile(m));
        if self.d < 2 {
            return fail(format!("d must be at least 2, got {}", self.d));
        }
        if self.d_model == 0 {
            return fail("d_model must be positive".into());
        }
        if self.n == 0 || !self.n.is_multiple_of(2) {
            return fail(format!("n must be positive and even, got {}", self.n));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return fail(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.sep.len() != self.d {
            return fail(format!("sep has {} entries, expected d = {}", self.sep.len(), self.d));
        }
        if let Some(bad) = self.sep.iter().find(|m| !(**m >= 0.0 && m.is_finite())) {
            return fail(format!("separations must be finite and non-negative, got {bad}"));
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self, SynthError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SynthError::Format(FormatError::Io { path: path.to_path_buf(), source: e }))?;
        serde_json::from_str(&text).map_err(|e| SynthError::ProfileFile(e.to_string()))
    }

    /// Closed-form best accuracy per layer, `Φ(μ_i / 2σ)`.
    pub fn bayes_accuracy(&self) -> Vec<f64> {
        self.sep
            .iter()
            .map(|mu| standard_normal_cdf(mu / (2.0 * self.sigma)))
            .collect()
    }
}

fn standard_normal_cdf(x: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().cdf(x)
}

/// Label of sample `k`: classes alternate so every prefix is near balanced.
fn label_of(k: usize) -> u8 {
    (k % 2) as u8
}

fn unit_direction(d_model: usize, seed: u64) -> Vec<f64> {
    let mut rng = Xorshift64Star::new(seed);
    loop {
        let v: Vec<f64> = (0..d_model).map(|_| rng.next_gaussian()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// One layer of a profile; the noise stream is seeded with
/// `noise_seed ^ layer` so layers can be produced in any order.
pub fn generate_layer(profile: &EmergenceProfile, layer: usize, direction: &[f64]) -> RepresentationMatrix {
    let mut rng = Xorshift64Star::new(profile.noise_seed ^ layer as u64);
    let half_sep = profile.sep[layer] / 2.0;
    let mut data = Vec::with_capacity(profile.n * profile.d_model);
    for k in 0..profile.n {
        let c = if label_of(k) == 1 { 1.0 } else { -1.0 };
        for &u in direction {
            let x = c * half_sep * u + profile.sigma * rng.next_gaussian();
            data.push(x as f32);
        }
    }
    RepresentationMatrix::new(layer, profile.n, profile.d_model, data)
        .expect("generated values are finite and correctly sized")
}

/// Builds the whole run in memory.
pub fn generate_run(profile: &EmergenceProfile) -> Result<Run, SynthError> {
    profile.validate()?;
    let direction = unit_direction(profile.d_model, profile.direction_seed);
    let layers = (0..profile.d)
        .into_par_iter()
        .map(|layer| generate_layer(profile, layer, &direction))
        .collect();
    let labels = LabelVector::new((0..profile.n).map(label_of).collect())?;
    let mut meta = BTreeMap::new();
    meta.insert("generator".into(), "synth".into());
    meta.insert("sigma".into(), format!("{:?}", profile.sigma));
    meta.insert(
        "sep".into(),
        profile.sep.iter().map(|m| format!("{m:?}")).collect::<Vec<_>>().join(","),
    );
    meta.insert("direction_seed".into(), profile.direction_seed.to_string());
    meta.insert("noise_seed".into(), profile.noise_seed.to_string());
    let manifest = RunManifest {
        model_name: "synthetic".into(),
        dataset_name: "synthetic".into(),
        num_layers: profile.d,
        n: profile.n,
        d_model: profile.d_model,
        extraction_point: "synthetic".into(),
        quantization_bits: 32,
        meta,
        extra: BTreeMap::new(),
    };
    Ok(Run {
        manifest,
        layers,
        labels,
    })
}

/// Generates a run and writes it as a run directory.
pub fn generate(profile: &EmergenceProfile, out_dir: &Path) -> Result<Run, SynthError> {
    let run = generate_run(profile)?;
    reps_io::write_run(out_dir, &run.manifest, &run.layers, &run.labels)?;
    Ok(run)
}
