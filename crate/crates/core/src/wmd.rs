//! Word Mover's Distance between stories.
//!
//! A story is a normalized bag of words over its embeddable tokens. The
//! distance between two stories is the optimal value of the transportation
//! problem between their word distributions with Euclidean distance between
//! embedding rows as ground cost, solved exactly by a network simplex on the
//! complete bipartite support graph.

use std::collections::VecDeque;
use std::io::{self, Read, Write};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use thiserror::Error;

use crate::embed::EmbeddingTable;
use crate::textprep::TokenizedStory;

#[derive(Debug, Error, PartialEq)]
pub enum WmdError {
    #[error("story {0} has no embeddable token")]
    EmptyDocument(u64),
    #[error("transport marginals differ: {0} vs {1}")]
    UnbalancedMass(f64, f64),
    #[error("bad WMDM file: {0}")]
    BadFile(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NbowDistribution {
    pub story_id: u64,
    /// Embedding-table rows, in order of first occurrence in the story.
    pub support: Vec<usize>,
    pub weights: Vec<f64>,
}

pub fn nbow(story: &TokenizedStory, table: &EmbeddingTable) -> Result<NbowDistribution, WmdError> {
    let mut support: Vec<usize> = Vec::new();
    let mut counts: Vec<f64> = Vec::new();
    for tok in &story.tokens {
        if let Some((row, _)) = table.lookup(tok) {
            match support.iter().position(|&r| r == row) {
                Some(p) => counts[p] += 1.0,
                None => {
                    support.push(row);
                    counts.push(1.0);
                }
            }
        }
    }
    if support.is_empty() {
        return Err(WmdError::EmptyDocument(story.story_id));
    }
    let total: f64 = counts.iter().sum();
    Ok(NbowDistribution {
        story_id: story.story_id,
        support,
        weights: counts.into_iter().map(|c| c / total).collect(),
    })
}

/// Euclidean distance between two embedding rows, accumulated in f64.
pub fn euclidean(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

pub fn ground_cost(a: &NbowDistribution, b: &NbowDistribution, table: &EmbeddingTable) -> Vec<Vec<f64>> {
    a.support
        .iter()
        .map(|&i| b.support.iter().map(|&j| euclidean(table.row(i), table.row(j))).collect())
        .collect()
}

pub fn wmd(a: &NbowDistribution, b: &NbowDistribution, table: &EmbeddingTable) -> f64 {
    let cost = ground_cost(a, b, table);
    let value = transport_cost(&a.weights, &b.weights, &cost)
        .expect("nBOW weights are normalized");
    debug_assert!(
        word_centroid_distance(a, b, table) <= value + 1e-9 * (1.0 + value),
        "centroid lower bound exceeds transport cost"
    );
    value
}

/// Distance between the weighted mean vectors; a lower bound on [`wmd`].
pub fn word_centroid_distance(a: &NbowDistribution, b: &NbowDistribution, table: &EmbeddingTable) -> f64 {
    let centroid = |x: &NbowDistribution| {
        let mut c = vec![0.0f64; table.dim()];
        for (&row, &w) in x.support.iter().zip(&x.weights) {
            for (acc, &v) in c.iter_mut().zip(table.row(row)) {
                *acc += w * v as f64;
            }
        }
        c
    };
    let (ca, cb) = (centroid(a), centroid(b));
    ca.iter().zip(&cb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Optimal value of `min Σ T_ij c_ij` subject to `T ≥ 0`, row sums `supply`,
/// column sums `demand`.
pub fn transport_cost(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> Result<f64, WmdError> {
    let plan = transport_plan(supply, demand, cost)?;
    Ok(plan
        .iter()
        .map(|&(i, j, f)| f * cost[i][j])
        .sum())
}

const MASS_TOLERANCE: f64 = 1e-9;

/// Basic cells `(row, col, flow)` of an optimal transportation plan.
///
/// Transportation simplex (network simplex specialized to the bipartite
/// graph): northwest-corner initial tree, node potentials from the tree,
/// most-negative reduced cost enters, ratio test along the tree cycle.
/// After a run of degenerate pivots the entering rule switches to the first
/// improving cell to rule out cycling.
pub fn transport_plan(
    supply: &[f64],
    demand: &[f64],
    cost: &[Vec<f64>],
) -> Result<Vec<(usize, usize, f64)>, WmdError> {
    let m = supply.len();
    let n = demand.len();
    let (sa, sb): (f64, f64) = (supply.iter().sum(), demand.iter().sum());
    if m == 0 || n == 0 || (sa - sb).abs() > MASS_TOLERANCE {
        return Err(WmdError::UnbalancedMass(sa, sb));
    }

    // northwest corner: m + n - 1 basic cells, some possibly degenerate
    let mut basis: Vec<(usize, usize, f64)> = Vec::with_capacity(m + n - 1);
    {
        let mut rem_a = supply.to_vec();
        let mut rem_b = demand.to_vec();
        let (mut i, mut j) = (0, 0);
        loop {
            let x = rem_a[i].min(rem_b[j]).max(0.0);
            basis.push((i, j, x));
            rem_a[i] -= x;
            rem_b[j] -= x;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if j == n - 1 || (i < m - 1 && rem_a[i] <= rem_b[j]) {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    let scale = cost
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, &c| acc.max(c.abs()));
    let eps = 1e-13 * scale.max(1e-300);
    let max_pivots = 50 * (m + n) * (m + n) + 100;
    let mut degenerate_run = 0;
    let nodes = m + n;
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];

    for _ in 0..max_pivots {
        compute_potentials(&basis, cost, m, n, &mut u, &mut v);

        let bland = degenerate_run > m + n;
        let mut entering: Option<(usize, usize)> = None;
        let mut best = -eps;
        'search: for i in 0..m {
            for j in 0..n {
                let rc = cost[i][j] - u[i] - v[j];
                if rc < best {
                    entering = Some((i, j));
                    if bland {
                        break 'search;
                    }
                    best = rc;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            return Ok(basis);
        };

        // tree path from column node ej to row node ei
        let path = tree_path(&basis, nodes, m, m + ej, ei);
        // edges on the path alternate -, +, -, ... starting at the column end
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (k, &e) in path.iter().enumerate() {
            if k % 2 == 0 && (basis[e].2 < theta || (basis[e].2 == theta && e < leave)) {
                theta = basis[e].2;
                leave = e;
            }
        }
        for (k, &e) in path.iter().enumerate() {
            if k % 2 == 0 {
                basis[e].2 = (basis[e].2 - theta).max(0.0);
            } else {
                basis[e].2 += theta;
            }
        }
        basis[leave] = (ei, ej, theta);
        if theta == 0.0 {
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }
    }
    // pivot budget is far above what small supports need; the current basis
    // is still feasible
    Ok(basis)
}

fn compute_potentials(
    basis: &[(usize, usize, f64)],
    cost: &[Vec<f64>],
    m: usize,
    n: usize,
    u: &mut [f64],
    v: &mut [f64],
) {
    let mut row_set = vec![false; m];
    let mut col_set = vec![false; n];
    let mut row_adj: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut col_adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(i, j, _) in basis {
        row_adj[i].push(j);
        col_adj[j].push(i);
    }
    u[0] = 0.0;
    row_set[0] = true;
    let mut queue = VecDeque::from([(true, 0usize)]);
    while let Some((is_row, x)) = queue.pop_front() {
        if is_row {
            for &j in &row_adj[x] {
                if !col_set[j] {
                    v[j] = cost[x][j] - u[x];
                    col_set[j] = true;
                    queue.push_back((false, j));
                }
            }
        } else {
            for &i in &col_adj[x] {
                if !row_set[i] {
                    u[i] = cost[i][x] - v[x];
                    row_set[i] = true;
                    queue.push_back((true, i));
                }
            }
        }
    }
}

/// Basis-edge indices along the unique tree path from node `from` to node
/// `to` (rows are nodes `0..m`, columns `m..m+n`).
fn tree_path(basis: &[(usize, usize, f64)], nodes: usize, m: usize, from: usize, to: usize) -> Vec<usize> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes];
    for (e, &(i, j, _)) in basis.iter().enumerate() {
        adj[i].push((m + j, e));
        adj[m + j].push((i, e));
    }
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; nodes];
    let mut seen = vec![false; nodes];
    seen[from] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(x) = queue.pop_front() {
        if x == to {
            break;
        }
        for &(y, e) in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                parent[y] = Some((x, e));
                queue.push_back(y);
            }
        }
    }
    let mut path = Vec::new();
    let mut x = to;
    while x != from {
        let (p, e) = parent[x].expect("basis is a spanning tree");
        path.push(e);
        x = p;
    }
    path.reverse();
    path
}

/// Symmetric `n × n` distance matrix, row-major. Rows and columns of
/// stories without embeddable tokens hold NaN (except the zero diagonal).
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub n: usize,
    pub values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// Builds a matrix from an arbitrary pairwise function evaluated for
    /// `i < j` and mirrored.
    pub fn from_fn<F: Fn(usize, usize) -> f64 + Sync>(n: usize, f: F) -> Self {
        let upper: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| ((i + 1)..n).map(|j| f(i, j)).collect())
            .collect();
        Self::from_upper(n, upper)
    }

    fn from_upper(n: usize, upper: Vec<Vec<f64>>) -> Self {
        let mut values = vec![0.0; n * n];
        for (i, row) in upper.into_iter().enumerate() {
            for (k, d) in row.into_iter().enumerate() {
                let j = i + 1 + k;
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
        }
        DistanceMatrix { n, values }
    }

    /// Positions whose row is entirely NaN off the diagonal.
    pub fn sentinel_rows(&self) -> Vec<usize> {
        (0..self.n)
            .filter(|&i| self.n > 1 && (0..self.n).all(|j| j == i || self.get(i, j).is_nan()))
            .collect()
    }

    /// Replaces each NaN entry `(i, j)`, `i < j`, by the median of the finite
    /// off-diagonal entries of row `i`, falling back to row `j` and then to
    /// the median of all finite entries. Sentinel rows have no finite entry,
    /// so an empty story borrows its partner's row median. The result stays
    /// symmetric.
    pub fn imputed(&self) -> DistanceMatrix {
        let n = self.n;
        let finite_median = |vals: &mut Vec<f64>| -> Option<f64> {
            if vals.is_empty() {
                return None;
            }
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mid = vals.len() / 2;
            Some(if vals.len() % 2 == 1 {
                vals[mid]
            } else {
                0.5 * (vals[mid - 1] + vals[mid])
            })
        };
        let row_medians: Vec<Option<f64>> = (0..n)
            .map(|i| {
                let mut vals: Vec<f64> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| self.get(i, j))
                    .filter(|x| x.is_finite())
                    .collect();
                finite_median(&mut vals)
            })
            .collect();
        let mut all: Vec<f64> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .filter(|x| x.is_finite())
            .collect();
        let global = finite_median(&mut all).unwrap_or(0.0);
        let mut out = self.clone();
        for i in 0..n {
            if out.values[i * n + i].is_nan() {
                out.values[i * n + i] = 0.0;
            }
            for j in (i + 1)..n {
                if out.values[i * n + j].is_nan() {
                    let fill = row_medians[i].or(row_medians[j]).unwrap_or(global);
                    out.values[i * n + j] = fill;
                    out.values[j * n + i] = fill;
                }
            }
        }
        out
    }
}

/// Computes all pairwise distances. `None` entries mark stories without an
/// embeddable token. `parallelism` bounds the worker count (0 = rayon
/// default); the result does not depend on it. `progress` receives the
/// number of finished rows.
pub fn distance_matrix(
    docs: &[Option<NbowDistribution>],
    table: &EmbeddingTable,
    parallelism: usize,
    progress: Option<&(dyn Fn(usize, usize) + Sync)>,
) -> DistanceMatrix {
    let n = docs.len();
    let done = AtomicUsize::new(0);
    let compute = || -> Vec<Vec<f64>> {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let row = ((i + 1)..n)
                    .map(|j| match (&docs[i], &docs[j]) {
                        (Some(a), Some(b)) => wmd(a, b, table),
                        _ => f64::NAN,
                    })
                    .collect();
                let finished = done.fetch_add(1, Ordering::Relaxed) + 1;
                if let Some(cb) = progress {
                    cb(finished, n);
                }
                row
            })
            .collect()
    };
    let upper = if parallelism == 0 {
        compute()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
            .expect("thread pool")
            .install(compute)
    };
    DistanceMatrix::from_upper(n, upper)
}

/// nBOW for every story, `None` where no token is embeddable.
pub fn corpus_nbow(stories: &[TokenizedStory], table: &EmbeddingTable) -> Vec<Option<NbowDistribution>> {
    stories.iter().map(|s| nbow(s, table).ok()).collect()
}

const WMDM_MAGIC: &[u8; 4] = b"WMDM";
const WMDM_VERSION: u32 = 1;

/// `WMDM`, version u32 = 1, n u64, then `n·n` row-major f64, little-endian.
pub fn write_matrix<W: Write>(m: &DistanceMatrix, mut w: W) -> io::Result<()> {
    w.write_all(WMDM_MAGIC)?;
    w.write_all(&WMDM_VERSION.to_le_bytes())?;
    w.write_all(&(m.n as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(m.values.len() * 8);
    for v in &m.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<DistanceMatrix, WmdError> {
    let io_err = |e: io::Error| WmdError::BadFile(e.to_string());
    let mut head = [0u8; 16];
    r.read_exact(&mut head).map_err(io_err)?;
    if &head[..4] != WMDM_MAGIC {
        return Err(WmdError::BadFile("wrong magic".into()));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != WMDM_VERSION {
        return Err(WmdError::BadFile(format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(head[8..16].try_into().unwrap()) as usize;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(io_err)?;
    if bytes.len() != n * n * 8 {
        return Err(WmdError::BadFile(format!(
            "expected {} payload bytes, found {}",
            n * n * 8,
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(DistanceMatrix { n, values })
}
