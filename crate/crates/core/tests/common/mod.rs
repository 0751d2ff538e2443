//! Fixtures and reference implementations shared by the integration tests
//! and the acceptance runner.
#![allow(dead_code)]

use concept_depth::datasets::JudgmentRecord;
use concept_depth::probe::FeatureMatrix;
use concept_depth::rng::Xorshift64Star;
use nalgebra::{DMatrix, DVector};

/// `(dataset, sample, rendered prompt)` for both printed examples of each
/// dataset. Printed fragments are joined with one space and LaTeX escapes
/// (`\$`, `\_`) are undone.
pub const TEMPLATE_EXAMPLES: [(&str, &str, &str); 18] = [
    (
        "Cities",
        "The city of Tokyo is in Japan.",
        "Judge the statement is True or False. The city of Tokyo is in Japan.",
    ),
    (
        "Cities",
        "The city of Lodz is in the Dominican Republic.",
        "Judge the statement is True or False. The city of Lodz is in the Dominican Republic.",
    ),
    (
        "CommonClaim",
        "Salmon will often return to the same spawning ground where then were born.",
        "Judge the statement is True or False. Salmon will often return to the same spawning ground where then were born.",
    ),
    (
        "CommonClaim",
        "A chicken has two right wings.",
        "Judge the statement is True or False. A chicken has two right wings.",
    ),
    (
        "Counterfact",
        "The city of Tokyo is in Japan.",
        "Judge the statement is True or False. The city of Tokyo is in Japan.",
    ),
    (
        "Counterfact",
        "Kanata South Ward is in Wisconsin.",
        "Judge the statement is True or False. Kanata South Ward is in Wisconsin.",
    ),
    (
        "HateEval",
        "Here it is not about Refugees or Illegal immigrants. It is about whether one has documents before 1971 or not. Now, it is difficult for slum people and beggars to show valid documents, except the name in voter list.",
        "Here it is not about Refugees or Illegal immigrants. It is about whether one has documents before 1971 or not. Now, it is difficult for slum people and beggars to show valid documents, except the name in voter list. According to the comment, tell whether they present hate speech or not.",
    ),
    (
        "HateEval",
        "Labor migrants transfer almost $10 billion a year to Ukraine.",
        "Labor migrants transfer almost $10 billion a year to Ukraine. According to the comment, tell whether they present hate speech or not.",
    ),
    (
        "STSA",
        "The production values are of the highest and the performances attractive without being memorable.",
        "The production values are of the highest and the performances attractive without being memorable. The sentence above is a movie review and reflects the writer's overall intention for this review. According to the sentence, judge whether the emotion is Positive or Negative.",
    ),
    (
        "STSA",
        "Less a story than an inexplicable nightmare, right down to the population's shrugging acceptance to each new horror.",
        "Less a story than an inexplicable nightmare, right down to the population's shrugging acceptance to each new horror. The sentence above is a movie review and reflects the writer's overall intention for this review. According to the sentence, judge whether the emotion is Positive or Negative.",
    ),
    (
        "IMDb",
        "This is the definitive movie version of Hamlet. Branagh cuts nothing, but there are no wasted moments.",
        "This is the definitive movie version of Hamlet. Branagh cuts nothing, but there are no wasted moments. According to the movie review, judge whether it is Positive or Negative.",
    ),
    (
        "IMDb",
        "This is without a doubt the worst movie I have ever seen. It is not funny. It is not interesting and should not have been made.",
        "This is without a doubt the worst movie I have ever seen. It is not funny. It is not interesting and should not have been made. According to the movie review, judge whether it is Positive or Negative.",
    ),
    (
        "Sarcasm",
        "Bashar al-Assad tries a tiny bit of sarin gas on self to see what it's like.",
        "Task: Detect sarcasm, help me identify whether this sentence is sarcastic. First, we need to understand what sarcasm is. Sarcasm is a form of verbal irony, where the intended meaning of the words is the opposite of the literal meaning. In other words, the speaker is saying one thing but meaning the opposite. Bashar al-Assad tries a tiny bit of sarin gas on self to see what it's like. Think carefully according to the sentence. Is there any sarcasm in this sentence? Please answer Yes or No.",
    ),
    (
        "Sarcasm",
        "This ceo will send your kids to school, if you work for his company.",
        "Task: Detect sarcasm, help me identify whether this sentence is sarcastic. First, we need to understand what sarcasm is. Sarcasm is a form of verbal irony, where the intended meaning of the words is the opposite of the literal meaning. In other words, the speaker is saying one thing but meaning the opposite. This ceo will send your kids to school, if you work for his company. Think carefully according to the sentence. Is there any sarcasm in this sentence? Please answer Yes or No.",
    ),
    (
        "StrategyQA",
        "Do hamsters provide food for any animals?",
        "Judge the question is true or false? Q: Will Queen Elizabeth be buried in the Pantheon? Let us think step by step. The stem of the sentence is Queen Elizabeth, burial, pantheon. Inference: First, the Pantheon is a church, so it is possible that she could be buried there. Second, Queen Elizabeth II is still alive, so she has not been buried yet. Third, even if she were to be buried in the Pantheon, it is unlikely that we would know about it ahead of time, so it is hard to say for sure. pred_ans: no. Do hamsters provide food for any animals? Let us think step by step...",
    ),
    (
        "StrategyQA",
        "Could a llama birth twice during the War in Vietnam (1945-46)?",
        "Judge the question is true or false? Q: Will Queen Elizabeth be buried in the Pantheon? Let us think step by step. The stem of the sentence is Queen Elizabeth, burial, pantheon. Inference: First, the Pantheon is a church, so it is possible that she could be buried there. Second, Queen Elizabeth II is still alive, so she has not been buried yet. Third, even if she were to be buried in the Pantheon, it is unlikely that we would know about it ahead of time, so it is hard to say for sure. pred_ans: no. Could a llama birth twice during the War in Vietnam (1945-46)? Let us think step by step...",
    ),
    (
        "Coinflip",
        "A coin is heads up. Whitney flips the coin. Erika does not flip the coin. Tj does not flip the coin. Benito flips the coin. Is the coin still heads up? Note that \"flip\" here means \"reverse\".",
        "A coin is heads up. Whitney flips the coin. Erika does not flip the coin. Tj does not flip the coin. Benito flips the coin. Is the coin still heads up? Note that \"flip\" here means \"reverse\". According to the flipping process above, determine if a coin remains heads up after it is either flipped or left unflipped by individuals. Therefore, the answer (Yes or No) is?",
    ),
    (
        "Coinflip",
        "A coin is heads up. Lucky does not flip the coin. Mireya flips the coin. Jj flips the coin. Kc flips the coin. Is the coin still heads up? Note that \"flip\" here means \"reverse\".",
        "A coin is heads up. Lucky does not flip the coin. Mireya flips the coin. Jj flips the coin. Kc flips the coin. Is the coin still heads up? Note that \"flip\" here means \"reverse\". According to the flipping process above, determine if a coin remains heads up after it is either flipped or left unflipped by individuals. Therefore, the answer (Yes or No) is?",
    ),
];

/// A six-depth accuracy row from the published per-model tables with its
/// expected depth metrics. Layers index the six-entry series, so a jump at
/// layer 1 is reported as 1/6.
pub struct DepthFixture {
    pub name: &'static str,
    pub alpha: [f64; 6],
    pub jump: Option<usize>,
    pub converge: Option<usize>,
    pub peak_acc: f64,
    pub peak_layer: usize,
    pub comprehended: bool,
}

/// Expected values were worked out with exact rational arithmetic on the
/// printed three-decimal accuracies.
pub const DEPTH_FIXTURES: [DepthFixture; 8] = [
    DepthFixture {
        name: "Gemma-2B Cities",
        alpha: [0.446, 0.94, 0.983, 0.992, 0.985, 0.988],
        jump: Some(1),
        converge: Some(5),
        peak_acc: 0.992,
        peak_layer: 3,
        comprehended: true,
    },
    DepthFixture {
        name: "Gemma-2B StrategyQA",
        alpha: [0.556, 0.602, 0.639, 0.683, 0.62, 0.592],
        jump: None,
        converge: None,
        peak_acc: 0.683,
        peak_layer: 3,
        comprehended: false,
    },
    DepthFixture {
        name: "Gemma-7B Cities",
        alpha: [0.59, 0.95, 1.0, 1.0, 0.98, 0.95],
        jump: Some(1),
        converge: Some(4),
        peak_acc: 1.0,
        peak_layer: 2,
        comprehended: true,
    },
    DepthFixture {
        name: "LLaMA-7B Coinflip",
        alpha: [0.545, 0.615, 0.915, 0.9, 0.88, 0.815],
        jump: Some(1),
        converge: Some(4),
        peak_acc: 0.915,
        peak_layer: 2,
        comprehended: true,
    },
    DepthFixture {
        name: "LLaMA-13B STSA",
        alpha: [0.697, 0.93, 0.939, 0.938, 0.937, 0.935],
        jump: Some(1),
        converge: Some(5),
        peak_acc: 0.939,
        peak_layer: 2,
        comprehended: true,
    },
    DepthFixture {
        name: "QWen-0.5B IMDb",
        alpha: [0.764, 0.804, 0.884, 0.894, 0.866, 0.879],
        jump: None,
        converge: Some(5),
        peak_acc: 0.894,
        peak_layer: 3,
        comprehended: true,
    },
    DepthFixture {
        name: "QWen-1.8B Counterfact",
        alpha: [0.516, 0.521, 0.688, 0.695, 0.657, 0.638],
        jump: Some(2),
        converge: Some(5),
        peak_acc: 0.695,
        peak_layer: 3,
        comprehended: false,
    },
    DepthFixture {
        name: "LLaMA-7B CommonClaim",
        alpha: [0.74, 0.736, 0.753, 0.744, 0.734, 0.743],
        jump: None,
        converge: Some(5),
        peak_acc: 0.753,
        peak_layer: 2,
        comprehended: true,
    },
];

/// Anchor-model zero-shot accuracies: LLaMA3-8B-Instruct, GPT-4o-mini,
/// QWen2-7B-Instruct.
pub const ANCHOR_MODELS: [&str; 3] = ["LLaMA3-8B", "GPT-4o-mini", "QWen2-7B"];
pub const ANCHOR_TABLE: [(&str, [f64; 3]); 9] = [
    ("Coinflip", [0.5080, 0.7620, 0.5060]),
    ("CommonClaim", [0.5606, 0.6905, 0.6950]),
    ("Sarcasm", [0.6575, 0.6770, 0.6445]),
    ("StrategyQA", [0.7035, 0.8803, 0.5069]),
    ("Counterfact", [0.5277, 0.7990, 0.8110]),
    ("HateEval", [0.7640, 0.7300, 0.7952]),
    ("STSA", [0.9030, 0.9211, 0.9108]),
    ("Cities", [0.7687, 0.9973, 0.9953]),
    ("IMDb", [0.9365, 0.9370, 0.9405]),
];

/// Expands the anchor table into 10,000 judgments per (model, dataset)
/// with `round(acc · 10000)` of them correct.
pub fn anchor_judgments() -> Vec<JudgmentRecord> {
    const PER_CELL: usize = 10_000;
    let mut out = Vec::with_capacity(ANCHOR_TABLE.len() * ANCHOR_MODELS.len() * PER_CELL);
    for (dataset, accs) in ANCHOR_TABLE {
        for (model, acc) in ANCHOR_MODELS.iter().zip(accs) {
            let correct = (acc * PER_CELL as f64).round() as usize;
            for k in 0..PER_CELL {
                let gold = (k % 2) as u8;
                out.push(JudgmentRecord {
                    anchor_model: model.to_string(),
                    dataset_name: dataset.to_string(),
                    sample_id: format!("{dataset}-{k}"),
                    predicted: if k < correct { gold } else { 1 - gold },
                    gold,
                });
            }
        }
    }
    out
}

/// A small logistic-regression problem with both classes present and a
/// partial mean shift between them.
pub fn random_problem(seed: u64, n: usize, m: usize) -> (FeatureMatrix, Vec<u8>) {
    let mut rng = Xorshift64Star::new(seed);
    let shift: Vec<f64> = (0..m).map(|_| rng.next_gaussian()).collect();
    let mut y: Vec<u8> = (0..n).map(|_| (rng.next_u64() & 1) as u8).collect();
    y[0] = 0;
    y[n - 1] = 1;
    let mut data = Vec::with_capacity(n * m);
    for &label in &y {
        let sign = if label == 1 { 0.5 } else { -0.5 };
        for s in &shift {
            data.push(sign * s + rng.next_gaussian() * 1.5 + 0.3);
        }
    }
    (FeatureMatrix::new(n, m, data).unwrap(), y)
}

/// Minimizes the same regularized objective by damped Newton iteration in
/// dense linear algebra. Returns `(θ, b)`.
pub fn newton_reference(x: &FeatureMatrix, y: &[u8], lambda: f64) -> (Vec<f64>, f64) {
    let n = x.rows();
    let m = x.cols();
    // Augmented design with the intercept as the last column.
    let design = DMatrix::from_fn(n, m + 1, |i, j| if j < m { x.row(i)[j] } else { 1.0 });
    let target = DVector::from_iterator(n, y.iter().map(|&v| f64::from(v)));
    let mut reg = DVector::from_element(m + 1, lambda / n as f64);
    reg[m] = 0.0;

    let objective = |w: &DVector<f64>| -> f64 {
        let s = &design * w;
        let loss: f64 = s
            .iter()
            .zip(target.iter())
            .map(|(&si, &yi)| si.max(0.0) + (-si.abs()).exp().ln_1p() - yi * si)
            .sum();
        loss / n as f64 + 0.5 * w.iter().zip(reg.iter()).map(|(wi, ri)| ri * wi * wi).sum::<f64>()
    };

    let mut w = DVector::zeros(m + 1);
    for _ in 0..200 {
        let s = &design * &w;
        let p = s.map(|t| 1.0 / (1.0 + (-t).exp()));
        let grad = design.transpose() * (&p - &target) / n as f64 + reg.component_mul(&w);
        if grad.amax() < 1e-13 {
            break;
        }
        let weights = p.map(|pi| pi * (1.0 - pi));
        let mut hess = design.transpose() * DMatrix::from_diagonal(&weights) * &design / n as f64;
        for k in 0..=m {
            hess[(k, k)] += reg[k];
        }
        let step = hess
            .cholesky()
            .expect("regularized Hessian is positive definite")
            .solve(&grad);
        let current = objective(&w);
        let mut t = 1.0;
        while t > 1e-12 && objective(&(&w - &step * t)) > current {
            t *= 0.5;
        }
        w -= step * t;
    }
    let b = w[m];
    (w.rows(0, m).iter().copied().collect(), b)
}

/// Probability scores `σ(xθ + b)` for every row.
pub fn reference_scores(x: &FeatureMatrix, theta: &[f64], b: f64) -> Vec<f64> {
    (0..x.rows())
        .map(|i| {
            let s: f64 = x.row(i).iter().zip(theta).map(|(a, t)| a * t).sum::<f64>() + b;
            1.0 / (1.0 + (-s).exp())
        })
        .collect()
}

/// Pairwise AUC: share of (positive, negative) pairs ranked correctly,
/// ties counting one half. Returned as the doubled count over `2·P·N`.
pub fn brute_force_auc(scores: &[f64], y: &[u8]) -> (u64, u64) {
    let mut doubled = 0u64;
    let mut pairs = 0u64;
    for (i, &si) in scores.iter().enumerate() {
        if y[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if y[j] != 0 {
                continue;
            }
            pairs += 1;
            doubled += match si.partial_cmp(&sj).unwrap() {
                std::cmp::Ordering::Greater => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Less => 0,
            };
        }
    }
    (doubled, 2 * pairs)
}
