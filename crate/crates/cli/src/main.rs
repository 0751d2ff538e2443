use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use concept_depth::datasets::{self, CorpusRecord, NoiseChoice, PerturbationSpec};
use concept_depth::metrics::{self, DepthFraction, LayerAccuracySeries};
use concept_depth::pipeline::{self, PipelineConfig};
use concept_depth::probe::ProbeConfig;
use concept_depth::report::{self, ReportFormat};
use concept_depth::reps_io::{self, RunManifest};
use concept_depth::synth::{self, EmergenceProfile};
use concept_depth::Error;

/// Layer-wise linear probing and concept-depth metrics.
#[derive(Parser)]
#[command(name = "cdepth", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one probe per layer of a run directory and write a report.
    ProbeRun(ProbeRunArgs),
    /// Depth metrics for a comma-separated per-layer accuracy series.
    Depth {
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        alphas: Vec<f64>,
    },
    /// Write a synthetic run with a step or custom separability profile.
    SynthGen(SynthArgs),
    /// Prepend one of two seeded noise strings to every prompt of a corpus.
    PerturbCorpus(PerturbArgs),
    /// Rank datasets by mean anchor-model accuracy from a judgments CSV.
    AnchorRank {
        judgments: PathBuf,
    },
    /// Describe a layer file, label file, or run directory as JSON.
    FmtDump {
        path: PathBuf,
    },
}

#[derive(Args)]
struct ProbeRunArgs {
    #[arg(long)]
    run_dir: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, env = "CD_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    no_standardize: bool,
    #[arg(long, default_value_t = 0.8)]
    train_frac: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    grad_tol: f64,
    /// Layers fitted concurrently [default: number of processors]
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long, default_value = "json")]
    format: String,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Draw a separate train/test split for every layer.
    #[arg(long)]
    per_layer_split: bool,
    /// Directory for the fitted probes, one JSON file per layer.
    #[arg(long)]
    probes_out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// JSON profile file; overrides the step flags below.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    layers: usize,
    #[arg(long, default_value_t = 16)]
    d_model: usize,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// First layer carrying signal.
    #[arg(long, default_value_t = 5)]
    step_layer: usize,
    /// Class-mean separation after the step, in units of sigma.
    #[arg(long, default_value_t = 4.0)]
    step_sep: f64,
    /// Seeds the direction (seed) and noise (seed + 1) streams.
    #[arg(long, env = "CD_SEED")]
    seed: Option<u64>,
}

#[derive(Args)]
struct PerturbArgs {
    /// JSON-lines corpus with id, text and label fields.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Render each text through this dataset's prompt template first.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long, default_value = "aaa ")]
    s1: String,
    #[arg(long, default_value = "bbb ")]
    s2: String,
    #[arg(long, env = "CD_SEED", default_value_t = 42)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::ProbeRun(args) => probe_run(args),
        Command::Depth { alphas } => depth(alphas),
        Command::SynthGen(args) => synth_gen(args),
        Command::PerturbCorpus(args) => perturb_corpus(args),
        Command::AnchorRank { judgments } => anchor_rank(&judgments),
        Command::FmtDump { path } => fmt_dump(&path),
    }
}

fn probe_run(args: ProbeRunArgs) -> Result<(), Error> {
    let format: ReportFormat = args.format.parse()?;
    let defaults = PipelineConfig::default();
    let config = PipelineConfig {
        probe: ProbeConfig {
            lambda: args.lambda,
            max_iters: args.max_iters,
            grad_tol: args.grad_tol,
            standardize: !args.no_standardize,
            split_seed: args.seed,
            train_fraction: args.train_frac,
        },
        parallelism: args.parallelism.unwrap_or(defaults.parallelism),
        per_layer_split: args.per_layer_split,
    };
    config.validate()?;
    let run = reps_io::load_run(&args.run_dir)?;
    let output = pipeline::evaluate_run(&run, &config)?;
    if let Some(dir) = &args.probes_out {
        pipeline::save_probes(dir, &output.probes)?;
    }
    match &args.out {
        Some(path) => report::emit_report(&output.report, format, path)?,
        None => print!("{}", report::render(&output.report, format)?),
    }
    Ok(())
}

fn fraction(p: Option<DepthFraction>) -> String {
    p.map_or_else(|| "none".to_string(), |p| format!("{:.4}", p.fraction))
}

fn depth(alphas: Vec<f64>) -> Result<(), Error> {
    let m = metrics::depth_metrics(&LayerAccuracySeries::new(alphas)?)?;
    println!("jumping={}", fraction(m.jumping_point));
    println!("converging={}", fraction(m.converging_point));
    println!("peak_acc={}", m.peak_acc);
    println!("peak_layer={}", m.peak_layer);
    println!("comprehended={}", m.comprehended);
    Ok(())
}

fn synth_gen(args: SynthArgs) -> Result<(), Error> {
    let mut profile = match &args.profile {
        Some(path) => EmergenceProfile::from_json_file(path)?,
        None => EmergenceProfile::step(
            args.layers,
            args.d_model,
            args.n,
            args.sigma,
            args.step_layer,
            args.step_sep * args.sigma,
        ),
    };
    if let Some(seed) = args.seed {
        profile.direction_seed = seed;
        profile.noise_seed = seed.wrapping_add(1);
    }
    synth::generate(&profile, &args.out)?;
    eprintln!(
        "wrote {} layers of {}x{} to {}",
        profile.d,
        profile.n,
        profile.d_model,
        args.out.display()
    );
    Ok(())
}

fn perturb_corpus(args: PerturbArgs) -> Result<(), Error> {
    let spec = PerturbationSpec::new(args.s1, args.s2, args.seed)?;
    let records = datasets::read_corpus(&args.input)?;
    let prompts = match &args.dataset {
        Some(name) => {
            let template = datasets::template(name)?;
            records.iter().map(|r| template.render(&r.text)).collect()
        }
        None => records.iter().map(|r| r.text.clone()).collect::<Vec<_>>(),
    };
    let perturbed = datasets::perturb_all(&prompts, &spec)?;
    let s1 = perturbed.iter().filter(|(_, c)| *c == NoiseChoice::S1).count();
    let out: Vec<CorpusRecord> = records
        .into_iter()
        .zip(perturbed)
        .map(|(r, (text, _))| CorpusRecord { text, ..r })
        .collect();
    datasets::write_corpus(&args.output, &out)?;
    eprintln!("perturbed {} prompts: s1={} s2={}", out.len(), s1, out.len() - s1);
    Ok(())
}

fn anchor_rank(path: &Path) -> Result<(), Error> {
    let records = datasets::read_judgments(path)?;
    let ranking = datasets::anchor_accuracies(&records)?;
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "rank,dataset,avg_acc,models");
    for (i, name) in ranking.order.iter().enumerate() {
        let _ = writeln!(
            stdout,
            "{},{},{:.4},{}",
            i + 1,
            name,
            ranking.avg_acc[name],
            ranking.models_for(name).join(";")
        );
    }
    let _ = writeln!(stdout, "# hardest={}", ranking.hardest().unwrap_or(""));
    let _ = writeln!(stdout, "# easiest={}", ranking.easiest().unwrap_or(""));
    Ok(())
}

fn fmt_dump(path: &Path) -> Result<(), Error> {
    let summary = if path.is_dir() {
        let run = reps_io::load_run(path)?;
        let y = run.labels.as_slice();
        serde_json::json!({
            "kind": "run",
            "manifest": run.manifest,
            "layers": run.layers.len(),
            "labels": { "n": y.len(), "positives": y.iter().filter(|&&v| v == 1).count() },
        })
    } else if path.extension().is_some_and(|e| e == "cdl") {
        let labels = reps_io::read_labels(path)?;
        let y = labels.as_slice();
        serde_json::json!({
            "kind": "labels",
            "n": y.len(),
            "positives": y.iter().filter(|&&v| v == 1).count(),
        })
    } else if path.extension().is_some_and(|e| e == "json") {
        let manifest = RunManifest::read(path)?;
        serde_json::json!({ "kind": "manifest", "manifest": manifest })
    } else {
        let m = reps_io::read_layer(path)?;
        let head: Vec<f32> = m.data().iter().take(8).copied().collect();
        serde_json::json!({
            "kind": "layer",
            "layer_index": m.layer_index(),
            "n": m.n(),
            "d_model": m.d_model(),
            "head": head,
        })
    };
    println!(
        "{}",
        concept_depth::json::to_canonical_string(&summary).expect("JSON values always serialize")
    );
    Ok(())
}
