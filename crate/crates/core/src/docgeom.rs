//! Per-story embedding matrices, their rank-`s` principal-axis summary, and
//! the flat `n × (d·s)` representation fed to the projection step.
//!
//! A story with `t` embeddable tokens is a `t × d` matrix (tokens as
//! samples). When `t > s` it is centered and summarized by its top `s`
//! right singular vectors scaled by their singular values, giving an `s × d`
//! matrix. When `t <= s` the raw matrix is padded with zero rows.

use std::io::{self, Read, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use thiserror::Error;

use crate::embed::EmbeddingTable;
use crate::textprep::TokenizedStory;

#[derive(Debug, Error)]
pub enum DocGeomError {
    #[error("every story matrix is empty")]
    AllEmpty,
    #[error("story {index} reduced to {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    ShapeMismatch {
        index: usize,
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
    #[error("bad FLAT file: {0}")]
    BadFile(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoryMatrix {
    pub story_id: u64,
    pub matrix: DMatrix<f64>,
}

impl StoryMatrix {
    pub fn tokens(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }
}

/// One row per token found in the table, in story order.
pub fn embed_story(story: &TokenizedStory, table: &EmbeddingTable) -> StoryMatrix {
    let rows: Vec<usize> = story
        .tokens
        .iter()
        .filter_map(|t| table.lookup(t).map(|(i, _)| i))
        .collect();
    let d = table.dim();
    let matrix = DMatrix::from_fn(rows.len(), d, |r, c| table.row(rows[r])[c] as f64);
    StoryMatrix {
        story_id: story.story_id,
        matrix,
    }
}

/// Smallest token count among non-empty story matrices.
pub fn shortest_length(matrices: &[StoryMatrix]) -> Result<usize, DocGeomError> {
    matrices
        .iter()
        .map(StoryMatrix::tokens)
        .filter(|&t| t > 0)
        .min()
        .ok_or(DocGeomError::AllEmpty)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PcaOptions {
    pub center: bool,
}

impl Default for PcaOptions {
    fn default() -> Self {
        PcaOptions { center: true }
    }
}

/// Reduces a `t × d` story matrix to `s × d`; see the module docs.
///
/// Singular vectors are oriented so their largest-magnitude entry is
/// positive (first such entry on ties).
pub fn pca_reduce(m: &StoryMatrix, s: usize, opts: PcaOptions) -> DMatrix<f64> {
    assert!(s >= 1, "target length must be at least 1");
    let (t, d) = m.matrix.shape();
    if t <= s {
        let mut out = DMatrix::zeros(s, d);
        out.rows_mut(0, t).copy_from(&m.matrix);
        return out;
    }
    let mut centered = m.matrix.clone();
    if opts.center {
        for c in 0..d {
            let mean = centered.column(c).mean();
            centered.column_mut(c).add_scalar_mut(-mean);
        }
    }
    // Right singular vectors come from the smaller Gram matrix. nalgebra's
    // SVD loses accuracy on rank-deficient input, and centering always makes
    // the matrix rank-deficient.
    let wide = t <= d;
    let gram = if wide {
        &centered * centered.transpose()
    } else {
        centered.transpose() * &centered
    };
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut out = DMatrix::zeros(s, d);
    for (r, &k) in order.iter().take(s).enumerate() {
        let mut row: Vec<f64> = if wide {
            // u_kᵀ X = σ_k v_kᵀ
            (eig.eigenvectors.column(k).transpose() * &centered).iter().copied().collect()
        } else {
            let sigma = eig.eigenvalues[k].max(0.0).sqrt();
            eig.eigenvectors.column(k).iter().map(|v| v * sigma).collect()
        };
        orient(&mut row);
        for c in 0..d {
            out[(r, c)] = row[c];
        }
    }
    out
}

/// Flips `v` so its largest-magnitude entry is positive.
pub fn orient(v: &mut [f64]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Row-major `n × (d·s)` matrix; row `i` concatenates story `i`'s reduced
/// vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatRepresentation {
    pub n: usize,
    pub s: usize,
    pub d: usize,
    pub data: Vec<f64>,
}

impl FlatRepresentation {
    pub fn width(&self) -> usize {
        self.s * self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }
}

pub fn assemble_flat(matrices: &[DMatrix<f64>]) -> Result<FlatRepresentation, DocGeomError> {
    let (s, d) = matrices.first().map(|m| m.shape()).unwrap_or((0, 0));
    let mut data = Vec::with_capacity(matrices.len() * s * d);
    for (index, m) in matrices.iter().enumerate() {
        if m.shape() != (s, d) {
            return Err(DocGeomError::ShapeMismatch {
                index,
                rows: m.nrows(),
                cols: m.ncols(),
                expected_rows: s,
                expected_cols: d,
            });
        }
        for r in 0..s {
            data.extend(m.row(r).iter());
        }
    }
    Ok(FlatRepresentation {
        n: matrices.len(),
        s,
        d,
        data,
    })
}

#[derive(Debug, Clone)]
pub struct ReducedCorpus {
    pub flat: FlatRepresentation,
    /// Positions of stories with no embeddable token (all-zero rows).
    pub empty_positions: Vec<usize>,
}

/// Full per-story path: embed, find `s`, reduce, concatenate.
pub fn reduce_corpus(
    stories: &[TokenizedStory],
    table: &EmbeddingTable,
    opts: PcaOptions,
) -> Result<ReducedCorpus, DocGeomError> {
    let matrices: Vec<StoryMatrix> = stories.par_iter().map(|s| embed_story(s, table)).collect();
    let s = shortest_length(&matrices)?;
    let reduced: Vec<DMatrix<f64>> = matrices.par_iter().map(|m| pca_reduce(m, s, opts)).collect();
    let empty_positions = matrices
        .iter()
        .enumerate()
        .filter(|(_, m)| m.is_empty())
        .map(|(i, _)| i)
        .collect();
    Ok(ReducedCorpus {
        flat: assemble_flat(&reduced)?,
        empty_positions,
    })
}

const FLAT_MAGIC: &[u8; 4] = b"FLAT";
const FLAT_VERSION: u32 = 1;

/// `FLAT`, version u32, n u64, width u64, then row-major f64, all
/// little-endian. `s` and `d` are not stored; a read-back has `s = 1` and
/// `d = width`.
pub fn write_flat<W: Write>(flat: &FlatRepresentation, mut w: W) -> io::Result<()> {
    w.write_all(FLAT_MAGIC)?;
    w.write_all(&FLAT_VERSION.to_le_bytes())?;
    w.write_all(&(flat.n as u64).to_le_bytes())?;
    w.write_all(&(flat.width() as u64).to_le_bytes())?;
    for v in &flat.data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

pub fn read_flat<R: Read>(mut r: R) -> Result<FlatRepresentation, DocGeomError> {
    let mut head = [0u8; 24];
    r.read_exact(&mut head)?;
    if &head[..4] != FLAT_MAGIC {
        return Err(DocGeomError::BadFile("wrong magic".into()));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != FLAT_VERSION {
        return Err(DocGeomError::BadFile(format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(head[8..16].try_into().unwrap()) as usize;
    let width = u64::from_le_bytes(head[16..24].try_into().unwrap()) as usize;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != n * width * 8 {
        return Err(DocGeomError::BadFile(format!(
            "expected {} payload bytes, found {}",
            n * width * 8,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(FlatRepresentation {
        n,
        s: 1,
        d: width,
        data,
    })
}
