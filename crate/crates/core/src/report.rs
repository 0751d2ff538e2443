//! Rendering a [`RunReport`] as canonical JSON, CSV, or a Markdown table.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::json;
use crate::metrics::DepthFraction;
use crate::pipeline::RunReport;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("writing report to {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serializing report: {0}")]
    Serialize(String),
    #[error("unknown report format {0:?} (expected json, csv or md)")]
    UnknownFormat(String),
}

impl ReportError {
    pub fn is_io(&self) -> bool {
        matches!(self, ReportError::Io { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Md,
}

impl FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "md" | "markdown" => Ok(Self::Md),
            _ => Err(ReportError::UnknownFormat(s.to_string())),
        }
    }
}

pub fn render(report: &RunReport, format: ReportFormat) -> Result<String, ReportError> {
    match format {
        ReportFormat::Json => {
            json::to_canonical_string(report).map_err(|e| ReportError::Serialize(e.to_string()))
        }
        ReportFormat::Csv => Ok(render_csv(report)),
        ReportFormat::Md => Ok(render_md(report)),
    }
}

pub fn emit_report(report: &RunReport, format: ReportFormat, path: &Path) -> Result<(), ReportError> {
    let text = render(report, format)?;
    std::fs::write(path, text).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn point(p: &Option<DepthFraction>) -> String {
    match p {
        Some(p) => format!("{} ({})", json::format_f64(p.fraction), p.layer),
        None => "none".to_string(),
    }
}

/// One `layer,acc,f1,auc` row per layer, then the depth metrics as
/// `#`-prefixed lines so CSV readers that honor comments skip them.
fn render_csv(report: &RunReport) -> String {
    let mut out = String::from("layer,acc,f1,auc\n");
    for l in &report.layers {
        let e = &l.eval;
        let _ = writeln!(
            out,
            "{},{},{},{}",
            e.layer_index,
            json::format_f64(e.acc),
            json::format_f64(e.f1),
            json::format_f64(e.auc)
        );
    }
    let m = &report.depth_metrics;
    let _ = writeln!(out, "# jumping_point,{}", point(&m.jumping_point));
    let _ = writeln!(out, "# converging_point,{}", point(&m.converging_point));
    let _ = writeln!(out, "# peak_acc,{}", json::format_f64(m.peak_acc));
    let _ = writeln!(out, "# peak_layer,{}", m.peak_layer);
    let _ = writeln!(out, "# comprehended,{}", m.comprehended);
    out
}

fn render_md(report: &RunReport) -> String {
    let mut out = format!(
        "{} ({} Layers), {}\n\n| Depth | Layer | ACC | AUC | F1 |\n|---|---|---|---|---|\n",
        report.manifest.model_name, report.manifest.num_layers, report.manifest.dataset_name
    );
    for row in &report.summary {
        let _ = writeln!(
            out,
            "| {} | {} | {:.3} | {:.3} | {:.3} |",
            row.label, row.layer_index, row.acc, row.auc, row.f1
        );
    }
    out
}
