//! k-means in representation space, cluster/label agreement scores, classical
//! MDS coordinates from a distance matrix, and nearest-story reports.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, DomainLabel};
use crate::wmd::DistanceMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("k = {k} exceeds the number of points {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("input contains non-finite values")]
    NonFiniteInput,
    #[error("unknown story id {0}")]
    UnknownStory(u64),
    #[error("assignment and labels differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub cluster_ids: Vec<usize>,
    pub k: usize,
    pub inertia: f64,
    /// Inertia after each Lloyd assignment step.
    pub inertia_trace: Vec<f64>,
    /// Clusters that ended with no member.
    pub empty_clusters: Vec<usize>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding followed by Lloyd iterations until the assignment stops
/// changing or `max_iter` is reached. An emptied cluster keeps its previous
/// centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<ClusterAssignment, EvalError> {
    let n = points.len();
    if k == 0 {
        return Err(EvalError::ZeroK);
    }
    if k > n {
        return Err(EvalError::KTooLarge { k, n });
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(EvalError::NonFiniteInput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_pp(points, k, &mut rng);

    let mut assign = vec![usize::MAX; n];
    let mut inertia_trace = Vec::new();
    let mut inertia = 0.0;
    for _ in 0..max_iter.max(1) {
        let nearest: Vec<(usize, f64)> = points
            .par_iter()
            .map(|p| {
                let mut best = (0, f64::INFINITY);
                for (c, cen) in centroids.iter().enumerate() {
                    let d = sq_dist(p, cen);
                    if d < best.1 {
                        best = (c, d);
                    }
                }
                best
            })
            .collect();
        let changed = nearest.iter().zip(&assign).any(|((c, _), a)| c != a);
        inertia = nearest.iter().map(|(_, d)| d).sum();
        inertia_trace.push(inertia);
        for (a, (c, _)) in assign.iter_mut().zip(&nearest) {
            *a = *c;
        }
        if !changed {
            break;
        }
        let dim = points[0].len();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assign) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    let mut counts = vec![0usize; k];
    for &c in &assign {
        counts[c] += 1;
    }
    Ok(ClusterAssignment {
        cluster_ids: assign,
        k,
        inertia,
        inertia_trace,
        empty_clusters: (0..k).filter(|&c| counts[c] == 0).collect(),
    })
}

fn kmeans_pp(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points[first].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[first])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave target just past the last positive weight
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            // all remaining points coincide with a centroid
            chosen.iter().position(|&c| !c).unwrap()
        };
        chosen[next] = true;
        centroids.push(points[next].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &points[next]));
        }
    }
    centroids
}

/// Lowest-inertia result over `seeds`.
pub fn best_of_kmeans(points: &[Vec<f64>], k: usize, seeds: &[u64], max_iter: usize) -> Result<ClusterAssignment, EvalError> {
    let mut best: Option<ClusterAssignment> = None;
    for &s in seeds {
        let a = kmeans(points, k, s, max_iter)?;
        if best.as_ref().is_none_or(|b| a.inertia < b.inertia) {
            best = Some(a);
        }
    }
    best.ok_or(EvalError::ZeroK)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementScores {
    pub purity: f64,
    pub adjusted_rand_index: f64,
    pub normalized_mutual_information: f64,
}

fn choose2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Purity, ARI and NMI (arithmetic-mean normalization) of a clustering
/// against domain labels.
pub fn agreement(cluster_ids: &[usize], labels: &[DomainLabel]) -> Result<AgreementScores, EvalError> {
    if cluster_ids.len() != labels.len() {
        return Err(EvalError::LengthMismatch(cluster_ids.len(), labels.len()));
    }
    let n = labels.len();
    if n == 0 {
        return Ok(AgreementScores {
            purity: 1.0,
            adjusted_rand_index: 1.0,
            normalized_mutual_information: 1.0,
        });
    }
    let mut table: BTreeMap<usize, [usize; 5]> = BTreeMap::new();
    for (&c, &l) in cluster_ids.iter().zip(labels) {
        table.entry(c).or_insert([0; 5])[l.index()] += 1;
    }
    let mut label_totals = [0usize; 5];
    for row in table.values() {
        for (t, &v) in label_totals.iter_mut().zip(row) {
            *t += v;
        }
    }
    let cluster_totals: Vec<usize> = table.values().map(|r| r.iter().sum()).collect();

    let purity = table.values().map(|r| *r.iter().max().unwrap()).sum::<usize>() as f64 / n as f64;

    let sum_cells: f64 = table.values().flat_map(|r| r.iter()).map(|&v| choose2(v)).sum();
    let sum_clusters: f64 = cluster_totals.iter().map(|&v| choose2(v)).sum();
    let sum_labels: f64 = label_totals.iter().map(|&v| choose2(v)).sum();
    let total = choose2(n);
    let expected = if total > 0.0 { sum_clusters * sum_labels / total } else { 0.0 };
    let max_index = 0.5 * (sum_clusters + sum_labels);
    let ari = if (max_index - expected).abs() < f64::EPSILON * total.max(1.0) {
        1.0
    } else {
        (sum_cells - expected) / (max_index - expected)
    };

    let nf = n as f64;
    let entropy = |counts: &mut dyn Iterator<Item = usize>| -> f64 {
        counts
            .filter(|&c| c > 0)
            .map(|c| {
                let p = c as f64 / nf;
                -p * p.ln()
            })
            .sum()
    };
    let h_c = entropy(&mut cluster_totals.iter().copied());
    let h_l = entropy(&mut label_totals.iter().copied());
    let mut mi = 0.0;
    for (row, &ct) in table.values().zip(&cluster_totals) {
        for (&v, &lt) in row.iter().zip(&label_totals) {
            if v > 0 {
                let pv = v as f64 / nf;
                mi += pv * (pv * nf * nf / (ct as f64 * lt as f64)).ln();
            }
        }
    }
    let nmi = if h_c + h_l == 0.0 {
        1.0
    } else {
        (2.0 * mi / (h_c + h_l)).clamp(0.0, 1.0)
    };

    Ok(AgreementScores {
        purity,
        adjusted_rand_index: ari,
        normalized_mutual_information: nmi,
    })
}

/// Majority label of each cluster; ties go to the alphabetically first
/// domain name.
pub fn majority_labels(cluster_ids: &[usize], labels: &[DomainLabel]) -> BTreeMap<usize, DomainLabel> {
    let mut table: BTreeMap<usize, [usize; 5]> = BTreeMap::new();
    for (&c, &l) in cluster_ids.iter().zip(labels) {
        table.entry(c).or_insert([0; 5])[l.index()] += 1;
    }
    table
        .into_iter()
        .map(|(c, row)| {
            let mut by_name = DomainLabel::ALL;
            by_name.sort_by_key(|l| l.name());
            let best = by_name
                .iter()
                .copied()
                .fold(by_name[0], |best, l| if row[l.index()] > row[best.index()] { l } else { best });
            (c, best)
        })
        .collect()
}

/// Classical multidimensional scaling: the top `dims` eigenpairs of the
/// double-centered squared-distance matrix, coordinates scaled by the square
/// root of positive eigenvalues (non-positive eigenvalues give zero columns).
pub fn classical_mds(d: &DistanceMatrix, dims: usize) -> Result<Vec<Vec<f64>>, EvalError> {
    let n = d.n;
    if d.values.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::NonFiniteInput);
    }
    let dims = dims.min(n);
    let sq: Vec<f64> = d.values.iter().map(|v| v * v).collect();
    let row_mean: Vec<f64> = (0..n).map(|i| sq[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[i * n + j] - row_mean[i] - row_mean[j] + grand));
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap().then(a.cmp(&b)));
    let mut coords = vec![vec![0.0; dims]; n];
    for (c, &k) in order.iter().take(dims).enumerate() {
        let lambda = eig.eigenvalues[k];
        if lambda <= 0.0 {
            continue;
        }
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        crate::docgeom::orient(&mut v);
        let scale = lambda.sqrt();
        for i in 0..n {
            coords[i][c] = v[i] * scale;
        }
    }
    Ok(coords)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub story_id: u64,
    pub distance: f64,
    pub full_text: String,
    pub domain: DomainLabel,
}

pub enum NeighborSource<'a> {
    Distances(&'a DistanceMatrix),
    Coords(&'a [[f64; 2]]),
}

/// The `top_k` nearest stories to `story_id`, excluding itself, by
/// increasing distance with ties broken by story id. NaN distances are
/// skipped.
pub fn neighbor_report(
    source: &NeighborSource<'_>,
    corpus: &Corpus,
    story_id: u64,
    top_k: usize,
) -> Result<Vec<Neighbor>, EvalError> {
    let i = corpus.position_of(story_id).ok_or(EvalError::UnknownStory(story_id))?;
    let stories = corpus.stories();
    let dist = |j: usize| match source {
        NeighborSource::Distances(d) => d.get(i, j),
        NeighborSource::Coords(c) => ((c[i][0] - c[j][0]).powi(2) + (c[i][1] - c[j][1]).powi(2)).sqrt(),
    };
    let mut cands: Vec<(f64, u64, usize)> = (0..stories.len())
        .filter(|&j| j != i)
        .map(|j| (dist(j), stories[j].id, j))
        .filter(|(d, _, _)| !d.is_nan())
        .collect();
    cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    Ok(cands
        .into_iter()
        .take(top_k)
        .map(|(d, id, j)| Neighbor {
            story_id: id,
            distance: d,
            full_text: stories[j].full_text.clone(),
            domain: stories[j].domain,
        })
        .collect())
}

/// Plain-text table of a neighbor report.
pub fn format_neighbors(query: &str, neighbors: &[Neighbor]) -> String {
    let mut out = format!("query: {query}\nrank\tstory_id\tdistance\tdomain\ttext\n");
    for (r, nb) in neighbors.iter().enumerate() {
        out.push_str(&format!(
            "{}\t{}\t{:.6}\t{}\t{}\n",
            r + 1,
            nb.story_id,
            nb.distance,
            nb.domain,
            nb.full_text
        ));
    }
    out
}
