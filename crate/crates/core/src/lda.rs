//! Latent Dirichlet Allocation fitted by collapsed Gibbs sampling.
//!
//! Documents are token-index sequences. In `Counts` mode these are the
//! story's own tokens; in `TfidfWeighted` mode each story's TF-IDF row is
//! scaled by [`TFIDF_PSEUDO_COUNT_SCALE`] and rounded to integer pseudo-counts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textprep::{TokenizedStory, Vocabulary};
use crate::vectorize::TfidfMatrix;

pub const TFIDF_PSEUDO_COUNT_SCALE: f64 = 10.0;

#[derive(Debug, Error, PartialEq)]
pub enum LdaError {
    #[error("corpus has no documents")]
    EmptyCorpus,
    #[error("every document is empty")]
    AllEmptyDocuments,
    #[error("tfidf_weighted mode requires a TF-IDF matrix")]
    MissingWeights,
    #[error("invalid LDA configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LdaMode {
    #[default]
    Counts,
    TfidfWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaConfig {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
    pub mode: LdaMode,
}

impl LdaConfig {
    /// `alpha = 50 / k`, `beta = 0.01`, 1000 sweeps.
    pub fn with_topics(k: usize) -> Self {
        LdaConfig {
            k,
            alpha: 50.0 / k as f64,
            beta: 0.01,
            iterations: 1000,
            seed: 0,
            mode: LdaMode::Counts,
        }
    }

    pub fn validate(&self) -> Result<(), LdaError> {
        if self.k == 0 {
            return Err(LdaError::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(LdaError::InvalidConfig("alpha and beta must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(LdaError::InvalidConfig("iterations must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig::with_topics(5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    /// n × k, row-major.
    pub theta: Vec<Vec<f64>>,
    /// k × V, row-major.
    pub phi: Vec<Vec<f64>>,
    pub config: LdaConfig,
}

impl LdaModel {
    pub fn k(&self) -> usize {
        self.config.k
    }

    /// Index of the most probable topic per document; ties go to the lower
    /// topic index.
    pub fn dominant_topics(&self) -> Vec<usize> {
        self.theta.iter().map(|row| argmax(row)).collect()
    }
}

/// Document-topic matrix of a fitted model.
pub fn doc_topics(model: &LdaModel) -> &[Vec<f64>] {
    &model.theta
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn documents(
    stories: &[TokenizedStory],
    vocab: &Vocabulary,
    mode: LdaMode,
    weights: Option<&TfidfMatrix>,
) -> Result<Vec<Vec<usize>>, LdaError> {
    match mode {
        LdaMode::Counts => Ok(stories
            .iter()
            .map(|s| s.tokens.iter().filter_map(|t| vocab.index_of(t)).collect())
            .collect()),
        LdaMode::TfidfWeighted => {
            let w = weights.ok_or(LdaError::MissingWeights)?;
            if w.rows.len() != stories.len() {
                return Err(LdaError::InvalidConfig(format!(
                    "TF-IDF matrix has {} rows for {} stories",
                    w.rows.len(),
                    stories.len()
                )));
            }
            Ok(w.rows
                .iter()
                .map(|row| {
                    let mut doc = Vec::new();
                    for &(j, x) in row {
                        let reps = (x * TFIDF_PSEUDO_COUNT_SCALE).round().max(0.0) as usize;
                        doc.extend(std::iter::repeat_n(j, reps));
                    }
                    doc
                })
                .collect())
        }
    }
}

pub fn fit_lda(
    stories: &[TokenizedStory],
    vocab: &Vocabulary,
    cfg: &LdaConfig,
    weights: Option<&TfidfMatrix>,
) -> Result<LdaModel, LdaError> {
    cfg.validate()?;
    if stories.is_empty() {
        return Err(LdaError::EmptyCorpus);
    }
    let docs = documents(stories, vocab, cfg.mode, weights)?;
    if docs.iter().all(Vec::is_empty) {
        return Err(LdaError::AllEmptyDocuments);
    }

    let k = cfg.k;
    let v = vocab.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut doc_topic = vec![vec![0u32; k]; docs.len()];
    let mut topic_word = vec![vec![0u32; v]; k];
    let mut topic_total = vec![0u32; k];
    let mut assignments: Vec<Vec<usize>> = docs
        .iter()
        .enumerate()
        .map(|(d, doc)| {
            doc.iter()
                .map(|&w| {
                    let z = rng.gen_range(0..k);
                    doc_topic[d][z] += 1;
                    topic_word[z][w] += 1;
                    topic_total[z] += 1;
                    z
                })
                .collect()
        })
        .collect();

    let v_beta = v as f64 * cfg.beta;
    let mut weights_buf = vec![0.0f64; k];
    for _ in 0..cfg.iterations {
        for (d, doc) in docs.iter().enumerate() {
            for (pos, &w) in doc.iter().enumerate() {
                let old = assignments[d][pos];
                doc_topic[d][old] -= 1;
                topic_word[old][w] -= 1;
                topic_total[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    let p = (doc_topic[d][t] as f64 + cfg.alpha)
                        * (topic_word[t][w] as f64 + cfg.beta)
                        / (topic_total[t] as f64 + v_beta);
                    total += p;
                    weights_buf[t] = total;
                }
                let u = rng.gen::<f64>() * total;
                let new = weights_buf
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or(k - 1);

                assignments[d][pos] = new;
                doc_topic[d][new] += 1;
                topic_word[new][w] += 1;
                topic_total[new] += 1;
            }
        }
    }

    let theta = doc_topic
        .iter()
        .map(|counts| {
            let row: Vec<f64> = counts.iter().map(|&c| c as f64 + cfg.alpha).collect();
            normalize(row)
        })
        .collect();
    let phi = topic_word
        .iter()
        .map(|counts| {
            let row: Vec<f64> = counts.iter().map(|&c| c as f64 + cfg.beta).collect();
            normalize(row)
        })
        .collect();

    Ok(LdaModel {
        theta,
        phi,
        config: cfg.clone(),
    })
}

fn normalize(mut row: Vec<f64>) -> Vec<f64> {
    let s: f64 = row.iter().sum();
    for x in row.iter_mut() {
        *x /= s;
    }
    row
}

/// Permutation `perm` minimizing `sum_t L1(phi_a[t], phi_b[perm[t]])`,
/// solved with the Hungarian algorithm. Used to compare fits whose topic
/// identities differ.
pub fn align_topics(phi_a: &[Vec<f64>], phi_b: &[Vec<f64>]) -> Vec<usize> {
    let cost: Vec<Vec<f64>> = phi_a
        .iter()
        .map(|a| {
            phi_b
                .iter()
                .map(|b| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum())
                .collect()
        })
        .collect();
    hungarian(&cost)
}

/// Minimum-cost perfect assignment on a square cost matrix; returns the
/// column assigned to each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based potentials formulation
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}
