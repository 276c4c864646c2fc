//! Bag-of-words counts and TF-IDF weighting over a fixed vocabulary.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::textprep::{TokenizedStory, Vocabulary};

/// Row-sparse matrix; each row holds `(column, value)` pairs sorted by column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseRows<T> {
    pub n_cols: usize,
    pub rows: Vec<Vec<(usize, T)>>,
}

impl<T: Copy + Default + PartialEq> SparseRows<T> {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        let r = &self.rows[row];
        match r.binary_search_by_key(&col, |&(c, _)| c) {
            Ok(pos) => r[pos].1,
            Err(_) => T::default(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        self.rows
            .iter()
            .map(|r| {
                let mut dense = vec![T::default(); self.n_cols];
                for &(c, v) in r {
                    dense[c] = v;
                }
                dense
            })
            .collect()
    }
}

impl<T: Copy + std::fmt::Display> SparseRows<T> {
    /// Writes one `row col value` line per stored entry.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                writeln!(w, "{i} {j} {v}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowMatrix {
    pub counts: SparseRows<u32>,
    /// Story tokens that had no vocabulary entry and were skipped.
    pub dropped_tokens: usize,
}

pub type TfidfMatrix = SparseRows<f64>;

pub fn bow(stories: &[TokenizedStory], vocab: &Vocabulary) -> BowMatrix {
    let per_row: Vec<(Vec<(usize, u32)>, usize)> = stories
        .par_iter()
        .map(|story| {
            let mut idx: Vec<usize> = Vec::with_capacity(story.tokens.len());
            let mut dropped = 0;
            for t in &story.tokens {
                match vocab.index_of(t) {
                    Some(i) => idx.push(i),
                    None => dropped += 1,
                }
            }
            idx.sort_unstable();
            let mut row: Vec<(usize, u32)> = Vec::new();
            for i in idx {
                match row.last_mut() {
                    Some((c, n)) if *c == i => *n += 1,
                    _ => row.push((i, 1)),
                }
            }
            (row, dropped)
        })
        .collect();
    let dropped_tokens = per_row.iter().map(|(_, d)| d).sum();
    BowMatrix {
        counts: SparseRows {
            n_cols: vocab.len(),
            rows: per_row.into_iter().map(|(r, _)| r).collect(),
        },
        dropped_tokens,
    }
}

/// Inverse-document-frequency variant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdfScheme {
    /// `ln(n / df)`: a token present in every story gets weight 0.
    #[default]
    Plain,
    /// `ln((1 + n) / (1 + df)) + 1`.
    Smoothed,
}

impl IdfScheme {
    pub fn idf(self, n: usize, df: usize) -> f64 {
        match self {
            IdfScheme::Plain => (n as f64 / df as f64).ln(),
            IdfScheme::Smoothed => ((1 + n) as f64 / (1 + df) as f64).ln() + 1.0,
        }
    }
}

/// Raw-count TF times IDF, each row L2-normalized. Rows that end up all
/// zero stay zero.
pub fn tfidf(bow: &BowMatrix, vocab: &Vocabulary) -> TfidfMatrix {
    tfidf_with(bow, vocab, IdfScheme::Plain)
}

pub fn tfidf_with(bow: &BowMatrix, vocab: &Vocabulary, scheme: IdfScheme) -> TfidfMatrix {
    let n = bow.counts.n_rows();
    let idf: Vec<f64> = vocab
        .doc_freqs()
        .iter()
        .map(|&df| if df == 0 { 0.0 } else { scheme.idf(n, df) })
        .collect();
    let rows = bow
        .counts
        .rows
        .par_iter()
        .map(|row| {
            let mut weighted: Vec<(usize, f64)> = row
                .iter()
                .map(|&(j, c)| (j, c as f64 * idf[j]))
                .filter(|&(_, w)| w != 0.0)
                .collect();
            let norm = weighted.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt();
            if norm > 0.0 {
                for (_, w) in weighted.iter_mut() {
                    *w /= norm;
                }
            }
            weighted
        })
        .collect();
    SparseRows {
        n_cols: bow.counts.n_cols,
        rows,
    }
}
