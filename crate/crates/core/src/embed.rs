//! Word embeddings: a skip-gram trainer with negative sampling and a reader
//! and writer for the word2vec binary format.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textprep::{TokenizedStory, Vocabulary};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("corpus has no tokens")]
    EmptyCorpus,
    #[error("no token occurs at least {0} times")]
    NoTokenMeetsMinCount(usize),
    #[error("invalid skip-gram configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed word2vec header")]
    MalformedHeader,
    #[error("word2vec file truncated while reading record {0}")]
    TruncatedFile(usize),
    #[error("token of record {0} is not valid UTF-8")]
    NonUtf8Token(usize),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingSource {
    SelfTrained,
    Pretrained,
}

/// Which surface form of a token matched a table entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchForm {
    Exact,
    Capitalized,
    Lowercase,
}

/// Token → dense vector table, rows stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
    source: EmbeddingSource,
}

impl EmbeddingTable {
    /// Builds a table from `(token, vector)` pairs. Later duplicates of a
    /// token are ignored.
    pub fn from_rows<I>(dim: usize, source: EmbeddingSource, rows: I) -> Self
    where
        I: IntoIterator<Item = (String, Vec<f32>)>,
    {
        let mut table = EmbeddingTable {
            dim,
            tokens: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
            source,
        };
        for (tok, vec) in rows {
            assert_eq!(vec.len(), dim, "vector for `{tok}` has wrong dimension");
            table.push(tok, &vec);
        }
        table
    }

    fn push(&mut self, token: String, vector: &[f32]) -> bool {
        if self.index.contains_key(&token) {
            return false;
        }
        self.index.insert(token.clone(), self.tokens.len());
        self.tokens.push(token);
        self.data.extend_from_slice(vector);
        true
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn source(&self) -> EmbeddingSource {
        self.source
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn row(&self, idx: usize) -> &[f32] {
        &self.data[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.index.get(token).map(|&i| self.row(i))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Resolves a corpus token to a row, trying the exact form, then the
    /// capitalized form, then the lowercase form.
    pub fn lookup(&self, token: &str) -> Option<(usize, MatchForm)> {
        if let Some(&i) = self.index.get(token) {
            return Some((i, MatchForm::Exact));
        }
        let cap = capitalize(token);
        if cap != token {
            if let Some(&i) = self.index.get(&cap) {
                return Some((i, MatchForm::Capitalized));
            }
        }
        let lower = token.to_lowercase();
        if lower != token {
            if let Some(&i) = self.index.get(&lower) {
                return Some((i, MatchForm::Lowercase));
            }
        }
        None
    }

    /// Copy with every row scaled to unit Euclidean norm (zero rows kept).
    pub fn l2_normalized(&self) -> EmbeddingTable {
        let mut out = self.clone();
        for row in out.data.chunks_mut(self.dim.max(1)) {
            let norm = row.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
            if norm > 0.0 {
                for x in row.iter_mut() {
                    *x = (*x as f64 / norm) as f32;
                }
            }
        }
        out
    }

    pub fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        let (x, y) = (self.get(a)?, self.get(b)?);
        let dot: f64 = x.iter().zip(y).map(|(&p, &q)| p as f64 * q as f64).sum();
        let nx: f64 = x.iter().map(|&p| (p as f64).powi(2)).sum::<f64>().sqrt();
        let ny: f64 = y.iter().map(|&q| (q as f64).powi(2)).sum::<f64>().sqrt();
        Some(dot / (nx * ny))
    }
}

fn capitalize(token: &str) -> String {
    let mut chars = token.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkipgramConfig {
    pub dim: usize,
    pub window: usize,
    pub min_count: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SkipgramConfig {
    fn default() -> Self {
        SkipgramConfig {
            dim: 50,
            window: 5,
            min_count: 5,
            negatives: 5,
            epochs: 15,
            learning_rate: 0.025,
            seed: 1,
        }
    }
}

impl SkipgramConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        let positive = [
            ("dim", self.dim),
            ("window", self.window),
            ("min_count", self.min_count),
            ("negatives", self.negatives),
            ("epochs", self.epochs),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(EmbedError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(EmbedError::InvalidConfig("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Tokens with corpus frequency at least `min_count`, most frequent first
/// (ties in order of first occurrence), with their counts.
pub fn trainable_vocabulary(stories: &[TokenizedStory], min_count: usize) -> Vec<(String, usize)> {
    let vocab = Vocabulary::build(stories);
    let mut kept: Vec<(usize, &str, usize)> = (0..vocab.len())
        .filter(|&i| vocab.corpus_freq(i) >= min_count)
        .map(|i| (i, vocab.token(i), vocab.corpus_freq(i)))
        .collect();
    kept.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)));
    kept.into_iter().map(|(_, t, c)| (t.to_string(), c)).collect()
}

const UNIGRAM_TABLE_SIZE: usize = 1_000_000;

fn sigmoid(x: f32) -> f32 {
    if x > 20.0 {
        1.0
    } else if x < -20.0 {
        0.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

/// Trains skip-gram vectors with negative sampling, single-threaded.
///
/// Sentences are the stories with below-threshold tokens removed. For every
/// center word a window radius is drawn uniformly from `1..=window`; each
/// context word is a positive example for the center word's input vector,
/// paired with `negatives` draws from the unigram^0.75 distribution. The
/// learning rate decays linearly over all training words.
pub fn train_skipgram(
    stories: &[TokenizedStory],
    cfg: &SkipgramConfig,
) -> Result<EmbeddingTable, EmbedError> {
    cfg.validate()?;
    if stories.iter().all(|s| s.tokens.is_empty()) {
        return Err(EmbedError::EmptyCorpus);
    }
    let vocab = trainable_vocabulary(stories, cfg.min_count);
    if vocab.is_empty() {
        return Err(EmbedError::NoTokenMeetsMinCount(cfg.min_count));
    }
    let index: HashMap<&str, usize> = vocab
        .iter()
        .enumerate()
        .map(|(i, (t, _))| (t.as_str(), i))
        .collect();
    let sentences: Vec<Vec<usize>> = stories
        .iter()
        .map(|s| s.tokens.iter().filter_map(|t| index.get(t.as_str()).copied()).collect())
        .filter(|s: &Vec<usize>| !s.is_empty())
        .collect();

    let unigram = unigram_table(&vocab);
    let d = cfg.dim;
    let v = vocab.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let half = 0.5 / d as f32;
    let mut input: Vec<f32> = (0..v * d).map(|_| rng.gen_range(-half..half)).collect();
    let mut output = vec![0.0f32; v * d];
    let mut grad = vec![0.0f32; d];

    let words_per_epoch: usize = sentences.iter().map(Vec::len).sum();
    let total_words = (words_per_epoch * cfg.epochs) as f64;
    let lr0 = cfg.learning_rate as f32;
    let mut processed = 0usize;

    for _ in 0..cfg.epochs {
        for sentence in &sentences {
            for (pos, &center) in sentence.iter().enumerate() {
                let progress = processed as f64 / total_words;
                let lr = (lr0 * (1.0 - progress as f32)).max(lr0 * 1e-4);
                processed += 1;

                let radius = rng.gen_range(1..=cfg.window);
                let lo = pos.saturating_sub(radius);
                let hi = (pos + radius).min(sentence.len() - 1);
                for (cpos, &context) in sentence.iter().enumerate().take(hi + 1).skip(lo) {
                    if cpos == pos {
                        continue;
                    }
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let in_row = center * d;
                    for n in 0..=cfg.negatives {
                        let (target, label) = if n == 0 {
                            (context, 1.0f32)
                        } else {
                            let t = unigram[rng.gen_range(0..unigram.len())];
                            if t == context {
                                continue;
                            }
                            (t, 0.0f32)
                        };
                        let out_row = target * d;
                        let dot: f32 = (0..d).map(|k| input[in_row + k] * output[out_row + k]).sum();
                        let g = (label - sigmoid(dot)) * lr;
                        for k in 0..d {
                            grad[k] += g * output[out_row + k];
                            output[out_row + k] += g * input[in_row + k];
                        }
                    }
                    for k in 0..d {
                        input[in_row + k] += grad[k];
                    }
                }
            }
        }
    }

    let rows = vocab
        .into_iter()
        .enumerate()
        .map(|(i, (tok, _))| (tok, input[i * d..(i + 1) * d].to_vec()));
    Ok(EmbeddingTable::from_rows(d, EmbeddingSource::SelfTrained, rows))
}

fn unigram_table(vocab: &[(String, usize)]) -> Vec<usize> {
    let weights: Vec<f64> = vocab.iter().map(|(_, c)| (*c as f64).powf(0.75)).collect();
    let total: f64 = weights.iter().sum();
    let mut table = Vec::with_capacity(UNIGRAM_TABLE_SIZE);
    let mut word = 0;
    let mut cumulative = weights[0] / total;
    for slot in 0..UNIGRAM_TABLE_SIZE {
        let x = (slot as f64 + 0.5) / UNIGRAM_TABLE_SIZE as f64;
        while x > cumulative && word + 1 < weights.len() {
            word += 1;
            cumulative += weights[word] / total;
        }
        table.push(word);
    }
    table
}

/// How tokens whose bytes are not UTF-8 are handled when reading a table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonUtf8Policy {
    #[default]
    Replace,
    Skip,
    Reject,
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub non_utf8: NonUtf8Policy,
    /// Keep only records whose token is in this set; all records are still
    /// parsed so truncation is detected.
    pub keep: Option<HashSet<String>>,
}

/// Reads a word2vec binary file: an ASCII header `"<count> <dim>\n"`, then per
/// record the token bytes terminated by a space, `dim` little-endian f32
/// values, and an optional newline.
pub fn load_word2vec_binary(path: &Path) -> Result<EmbeddingTable, EmbedError> {
    load_word2vec_binary_with(path, &LoadOptions::default())
}

pub fn load_word2vec_binary_with(
    path: &Path,
    opts: &LoadOptions,
) -> Result<EmbeddingTable, EmbedError> {
    let file = File::open(path)?;
    read_word2vec_binary(BufReader::with_capacity(1 << 20, file), opts)
}

pub fn read_word2vec_binary<R: BufRead>(
    mut reader: R,
    opts: &LoadOptions,
) -> Result<EmbeddingTable, EmbedError> {
    let mut header = Vec::new();
    reader.read_until(b'\n', &mut header)?;
    if header.last() != Some(&b'\n') {
        return Err(EmbedError::MalformedHeader);
    }
    let header = std::str::from_utf8(&header).map_err(|_| EmbedError::MalformedHeader)?;
    let mut fields = header.split_whitespace();
    let parse = |f: Option<&str>| -> Result<usize, EmbedError> {
        f.and_then(|s| s.parse().ok()).ok_or(EmbedError::MalformedHeader)
    };
    let count = parse(fields.next())?;
    let dim = parse(fields.next())?;
    if fields.next().is_some() || dim == 0 {
        return Err(EmbedError::MalformedHeader);
    }

    let mut table = EmbeddingTable {
        dim,
        tokens: Vec::new(),
        index: HashMap::new(),
        data: Vec::new(),
        source: EmbeddingSource::Pretrained,
    };
    let mut token_buf = Vec::new();
    let mut raw = vec![0u8; dim * 4];
    let mut values = vec![0f32; dim];
    for record in 0..count {
        token_buf.clear();
        // the newline ending the previous record is optional
        loop {
            let buf = reader.fill_buf()?;
            match buf.first() {
                Some(b'\n') => reader.consume(1),
                Some(_) => break,
                None => return Err(EmbedError::TruncatedFile(record)),
            }
        }
        reader.read_until(b' ', &mut token_buf)?;
        if token_buf.pop() != Some(b' ') {
            return Err(EmbedError::TruncatedFile(record));
        }
        reader.read_exact(&mut raw).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => EmbedError::TruncatedFile(record),
            _ => EmbedError::Io(e),
        })?;
        for (v, chunk) in values.iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        }
        let token = match String::from_utf8(std::mem::take(&mut token_buf)) {
            Ok(t) => t,
            Err(e) => match opts.non_utf8 {
                NonUtf8Policy::Replace => String::from_utf8_lossy(e.as_bytes()).into_owned(),
                NonUtf8Policy::Skip => continue,
                NonUtf8Policy::Reject => return Err(EmbedError::NonUtf8Token(record)),
            },
        };
        if let Some(keep) = &opts.keep {
            if !keep.contains(&token) {
                continue;
            }
        }
        table.push(token, &values);
    }
    // a trailing newline after the last record is allowed
    let mut rest = Vec::new();
    reader.read_to_end(&mut rest)?;
    Ok(table)
}

/// Writes the table in word2vec binary format, newline after each record.
pub fn write_word2vec_binary<W: Write>(table: &EmbeddingTable, mut w: W) -> io::Result<()> {
    writeln!(w, "{} {}", table.len(), table.dim())?;
    for (i, tok) in table.tokens().iter().enumerate() {
        w.write_all(tok.as_bytes())?;
        w.write_all(b" ")?;
        for v in table.row(i) {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Candidate surface forms of corpus tokens, for [`LoadOptions::keep`].
pub fn lookup_forms<'a, I: IntoIterator<Item = &'a str>>(tokens: I) -> HashSet<String> {
    let mut forms = HashSet::new();
    for t in tokens {
        forms.insert(t.to_string());
        forms.insert(capitalize(t));
        forms.insert(t.to_lowercase());
    }
    forms
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub vocab_size: usize,
    pub embeddable_tokens: usize,
    pub token_coverage: f64,
    pub affected_stories: usize,
    pub affected_story_fraction: f64,
    pub dropped_per_story: Vec<usize>,
    pub matched_exact: usize,
    pub matched_capitalized: usize,
    pub matched_lowercase: usize,
}

pub fn coverage_report(
    stories: &[TokenizedStory],
    vocab: &Vocabulary,
    table: &EmbeddingTable,
) -> CoverageReport {
    let mut matched = [0usize; 3];
    let mut embeddable = vec![false; vocab.len()];
    for (i, tok) in vocab.tokens().iter().enumerate() {
        if let Some((_, form)) = table.lookup(tok) {
            embeddable[i] = true;
            matched[form as usize] += 1;
        }
    }
    let dropped_per_story: Vec<usize> = stories
        .iter()
        .map(|s| {
            s.tokens
                .iter()
                .filter(|t| match vocab.index_of(t) {
                    Some(i) => !embeddable[i],
                    None => table.lookup(t).is_none(),
                })
                .count()
        })
        .collect();
    let embeddable_tokens = embeddable.iter().filter(|&&e| e).count();
    let affected_stories = dropped_per_story.iter().filter(|&&d| d > 0).count();
    let frac = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    CoverageReport {
        vocab_size: vocab.len(),
        embeddable_tokens,
        token_coverage: frac(embeddable_tokens, vocab.len()),
        affected_stories,
        affected_story_fraction: frac(affected_stories, stories.len()),
        dropped_per_story,
        matched_exact: matched[0],
        matched_capitalized: matched[1],
        matched_lowercase: matched[2],
    }
}
