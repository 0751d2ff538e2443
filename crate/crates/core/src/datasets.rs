//! Prompt templates for the nine probing datasets, the noise-prefix
//! perturbation, and difficulty anchoring from reference-model judgments.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::Xorshift64Star;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
    #[error("cannot perturb an empty prompt")]
    EmptyPrompt,
    #[error("noise strings must differ, both are {0:?}")]
    IdenticalNoise(String),
    #[error("no judgment records")]
    NoRecords,
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

impl DatasetError {
    pub fn is_io(&self) -> bool {
        matches!(self, DatasetError::Io { .. })
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// How a dataset sample is wrapped into a prompt: `prefix`, sample and
/// `suffix` joined by single spaces, with empty parts (other than the sample
/// itself) left out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub dataset_name: &'static str,
    pub prefix: &'static str,
    pub suffix: &'static str,
    /// Answer words for label 1 and label 0.
    pub label_vocabulary: (&'static str, &'static str),
    /// Number of samples used in the reference study; informational only.
    pub default_samples: usize,
}

impl PromptTemplate {
    pub fn render(&self, sample: &str) -> String {
        let mut out = String::with_capacity(self.prefix.len() + sample.len() + self.suffix.len() + 2);
        if !self.prefix.is_empty() {
            out.push_str(self.prefix);
            out.push(' ');
        }
        out.push_str(sample);
        if !self.suffix.is_empty() {
            out.push(' ');
            out.push_str(self.suffix);
        }
        out
    }
}

const TRUE_FALSE: &str = "Judge the statement is True or False.";

const SARCASM_PREFIX: &str = "Task: Detect sarcasm, help me identify whether this sentence is \
sarcastic. First, we need to understand what sarcasm is. Sarcasm is a form of verbal irony, where \
the intended meaning of the words is the opposite of the literal meaning. In other words, the \
speaker is saying one thing but meaning the opposite.";

const STRATEGYQA_PREFIX: &str = "Judge the question is true or false? Q: Will Queen Elizabeth be \
buried in the Pantheon? Let us think step by step. The stem of the sentence is Queen Elizabeth, \
burial, pantheon. Inference: First, the Pantheon is a church, so it is possible that she could be \
buried there. Second, Queen Elizabeth II is still alive, so she has not been buried yet. Third, \
even if she were to be buried in the Pantheon, it is unlikely that we would know about it ahead of \
time, so it is hard to say for sure. pred_ans: no.";

pub const TEMPLATES: [PromptTemplate; 9] = [
    PromptTemplate {
        dataset_name: "Cities",
        prefix: TRUE_FALSE,
        suffix: "",
        label_vocabulary: ("True", "False"),
        default_samples: 1496,
    },
    PromptTemplate {
        dataset_name: "CommonClaim",
        prefix: TRUE_FALSE,
        suffix: "",
        label_vocabulary: ("True", "False"),
        default_samples: 6000,
    },
    PromptTemplate {
        dataset_name: "Counterfact",
        prefix: TRUE_FALSE,
        suffix: "",
        label_vocabulary: ("True", "False"),
        default_samples: 4000,
    },
    PromptTemplate {
        dataset_name: "HateEval",
        prefix: "",
        suffix: "According to the comment, tell whether they present hate speech or not.",
        label_vocabulary: ("Yes", "No"),
        default_samples: 6000,
    },
    PromptTemplate {
        dataset_name: "STSA",
        prefix: "",
        suffix: "The sentence above is a movie review and reflects the writer's overall intention \
for this review. According to the sentence, judge whether the emotion is Positive or Negative.",
        label_vocabulary: ("Positive", "Negative"),
        default_samples: 6920,
    },
    PromptTemplate {
        dataset_name: "IMDb",
        prefix: "",
        suffix: "According to the movie review, judge whether it is Positive or Negative.",
        label_vocabulary: ("Positive", "Negative"),
        default_samples: 2000,
    },
    PromptTemplate {
        dataset_name: "Sarcasm",
        prefix: SARCASM_PREFIX,
        suffix: "Think carefully according to the sentence. Is there any sarcasm in this sentence? \
Please answer Yes or No.",
        label_vocabulary: ("Yes", "No"),
        default_samples: 6000,
    },
    PromptTemplate {
        dataset_name: "StrategyQA",
        prefix: STRATEGYQA_PREFIX,
        suffix: "Let us think step by step...",
        label_vocabulary: ("Yes", "No"),
        default_samples: 2290,
    },
    PromptTemplate {
        dataset_name: "Coinflip",
        prefix: "",
        suffix: "According to the flipping process above, determine if a coin remains heads up \
after it is either flipped or left unflipped by individuals. Therefore, the answer (Yes or No) is?",
        label_vocabulary: ("Yes", "No"),
        default_samples: 500,
    },
];

/// Looks a template up by dataset name, ignoring ASCII case. The short forms
/// `Common` and `Coin` are accepted.
pub fn template(dataset_name: &str) -> Result<&'static PromptTemplate, DatasetError> {
    let wanted = match dataset_name.to_ascii_lowercase().as_str() {
        "common" => "commonclaim".to_string(),
        "coin" => "coinflip".to_string(),
        other => other.to_string(),
    };
    TEMPLATES
        .iter()
        .find(|t| t.dataset_name.to_ascii_lowercase() == wanted)
        .ok_or_else(|| DatasetError::UnknownDataset(dataset_name.to_string()))
}

pub fn render_prompt(dataset_name: &str, sample_text: &str) -> Result<String, DatasetError> {
    Ok(template(dataset_name)?.render(sample_text))
}

/// Two label-independent noise prefixes, each chosen with probability 1/2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub s1: String,
    pub s2: String,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn new(s1: impl Into<String>, s2: impl Into<String>, seed: u64) -> Result<Self, DatasetError> {
        let spec = Self {
            s1: s1.into(),
            s2: s2.into(),
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_seed(seed: u64) -> Self {
        Self {
            s1: "aaa ".into(),
            s2: "bbb ".into(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.s1 == self.s2 {
            return Err(DatasetError::IdenticalNoise(self.s1.clone()));
        }
        Ok(())
    }
}

/// Which noise string was prepended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseChoice {
    S1,
    S2,
}

/// Prepends `s1` when `draw < 0.5`, otherwise `s2`.
pub fn perturb(prompt: &str, spec: &PerturbationSpec, draw: f64) -> Result<String, DatasetError> {
    Ok(perturb_with_choice(prompt, spec, draw)?.0)
}

fn perturb_with_choice(
    prompt: &str,
    spec: &PerturbationSpec,
    draw: f64,
) -> Result<(String, NoiseChoice), DatasetError> {
    if prompt.is_empty() {
        return Err(DatasetError::EmptyPrompt);
    }
    spec.validate()?;
    let (noise, choice) = if draw < 0.5 {
        (&spec.s1, NoiseChoice::S1)
    } else {
        (&spec.s2, NoiseChoice::S2)
    };
    Ok((format!("{noise}{prompt}"), choice))
}

/// Perturbs every prompt in order with one uniform draw each from the
/// seeded stream. Labels never enter the stream.
pub fn perturb_all<S: AsRef<str>>(
    prompts: &[S],
    spec: &PerturbationSpec,
) -> Result<Vec<(String, NoiseChoice)>, DatasetError> {
    spec.validate()?;
    let mut rng = Xorshift64Star::new(spec.seed);
    prompts
        .iter()
        .map(|p| perturb_with_choice(p.as_ref(), spec, rng.next_f64()))
        .collect()
}

/// One line of a JSON-lines corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub text: String,
    pub label: u8,
}

pub fn read_corpus(path: &Path) -> Result<Vec<CorpusRecord>, DatasetError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse = |message: String| DatasetError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message,
        };
        let record: CorpusRecord = serde_json::from_str(&line).map_err(|e| parse(e.to_string()))?;
        if record.label > 1 {
            return Err(parse(format!("label {} is not 0 or 1", record.label)));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn write_corpus(path: &Path, records: &[CorpusRecord]) -> Result<(), DatasetError> {
    let mut out = io::BufWriter::new(File::create(path).map_err(io_err(path))?);
    for r in records {
        let line = serde_json::to_string(r).expect("corpus records serialize");
        writeln!(out, "{line}").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

/// One reference-model verdict on one sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    pub anchor_model: String,
    #[serde(rename = "dataset")]
    pub dataset_name: String,
    pub sample_id: String,
    pub predicted: u8,
    pub gold: u8,
}

/// Reads a judgment CSV with header `anchor_model,dataset,sample_id,predicted,gold`.
pub fn read_judgments(path: &Path) -> Result<Vec<JudgmentRecord>, DatasetError> {
    let file = File::open(path).map_err(io_err(path))?;
    parse_judgments(file, &path.display().to_string())
}

pub fn parse_judgments(reader: impl io::Read, source: &str) -> Result<Vec<JudgmentRecord>, DatasetError> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let parse = |line: usize, message: String| DatasetError::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let header = csv.headers().map_err(|e| parse(1, e.to_string()))?.clone();
    let expected = ["anchor_model", "dataset", "sample_id", "predicted", "gold"];
    if header.iter().ne(expected) {
        return Err(parse(1, format!("header must be {}", expected.join(","))));
    }
    let mut records = Vec::new();
    for (i, row) in csv.deserialize::<JudgmentRecord>().enumerate() {
        let line = i + 2;
        let record = row.map_err(|e| parse(line, e.to_string()))?;
        if record.predicted > 1 || record.gold > 1 {
            return Err(parse(line, "predicted and gold must be 0 or 1".into()));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn write_judgments(path: &Path, records: &[JudgmentRecord]) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut csv = csv::Writer::from_writer(file);
    for r in records {
        csv.serialize(r).map_err(|e| DatasetError::Io {
            path: path.display().to_string(),
            source: e.into(),
        })?;
    }
    csv.flush().map_err(io_err(path))
}

/// Dataset difficulty from reference-model accuracies; `order` runs from
/// hardest (lowest mean accuracy) to easiest.
#[derive(Debug, Clone, PartialEq)]
pub struct DifficultyRanking {
    pub per_model_acc: BTreeMap<(String, String), f64>,
    pub avg_acc: BTreeMap<String, f64>,
    pub order: Vec<String>,
}

impl DifficultyRanking {
    pub fn hardest(&self) -> Option<&str> {
        self.order.first().map(String::as_str)
    }

    pub fn easiest(&self) -> Option<&str> {
        self.order.last().map(String::as_str)
    }

    /// Anchor models that judged `dataset`, in name order.
    pub fn models_for(&self, dataset: &str) -> Vec<&str> {
        self.per_model_acc
            .keys()
            .filter(|(_, d)| d == dataset)
            .map(|(m, _)| m.as_str())
            .collect()
    }
}

/// Accuracy per (model, dataset), unweighted mean over models per dataset,
/// and datasets sorted by ascending mean (ties by name).
pub fn anchor_accuracies(records: &[JudgmentRecord]) -> Result<DifficultyRanking, DatasetError> {
    if records.is_empty() {
        return Err(DatasetError::NoRecords);
    }
    let mut counts: BTreeMap<(String, String), (usize, usize)> = BTreeMap::new();
    for r in records {
        let entry = counts
            .entry((r.anchor_model.clone(), r.dataset_name.clone()))
            .or_default();
        entry.0 += usize::from(r.predicted == r.gold);
        entry.1 += 1;
    }
    let per_model_acc: BTreeMap<(String, String), f64> = counts
        .into_iter()
        .map(|(key, (hits, total))| (key, hits as f64 / total as f64))
        .collect();

    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for ((_, dataset), acc) in &per_model_acc {
        let entry = sums.entry(dataset.clone()).or_default();
        entry.0 += acc;
        entry.1 += 1;
    }
    let avg_acc: BTreeMap<String, f64> = sums
        .into_iter()
        .map(|(dataset, (sum, k))| (dataset, sum / k as f64))
        .collect();

    let mut order: Vec<String> = avg_acc.keys().cloned().collect();
    order.sort_by(|a, b| avg_acc[a].total_cmp(&avg_acc[b]).then_with(|| a.cmp(b)));

    Ok(DifficultyRanking {
        per_model_acc,
        avg_acc,
        order,
    })
}
