//! Exact t-SNE projection to two dimensions.
//!
//! Input is either a feature matrix (squared Euclidean distances are
//! computed) or a precomputed distance matrix (entries are squared and used
//! in the same Gaussian kernel, so a Euclidean distance matrix reproduces
//! the feature-mode affinities up to rounding). All sums run in a fixed
//! order so results depend only on the seed.

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DomainLabel;
use crate::wmd::DistanceMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum TsneError {
    #[error("perplexity {perplexity} needs at least {needed} points, got {n}")]
    PerplexityTooLarge { perplexity: f64, n: usize, needed: usize },
    #[error("input contains non-finite values")]
    NonFiniteInput,
    #[error("invalid t-SNE configuration: {0}")]
    InvalidConfig(String),
    #[error("labels/ids do not match input size {0}")]
    LengthMismatch(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            learning_rate: 200.0,
            iterations: 1000,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            seed: 0,
        }
    }
}

const INITIAL_MOMENTUM: f64 = 0.5;
const FINAL_MOMENTUM: f64 = 0.8;
const ENTROPY_TOLERANCE: f64 = 1e-5;
const MAX_BANDWIDTH_STEPS: usize = 50;
const MIN_GAIN: f64 = 0.01;
const P_FLOOR: f64 = 1e-12;

impl TsneConfig {
    pub fn validate(&self, n: usize) -> Result<(), TsneError> {
        if self.perplexity.is_nan() || self.perplexity < 1.0 {
            return Err(TsneError::InvalidConfig("perplexity must be at least 1".into()));
        }
        if self.iterations < 250 {
            return Err(TsneError::InvalidConfig("at least 250 iterations required".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(TsneError::InvalidConfig("learning_rate must be positive".into()));
        }
        if 3.0 * self.perplexity >= n as f64 - 1.0 {
            return Err(TsneError::PerplexityTooLarge {
                perplexity: self.perplexity,
                n,
                needed: (3.0 * self.perplexity).floor() as usize + 2,
            });
        }
        Ok(())
    }
}

pub enum TsneInput<'a> {
    /// One feature vector per point, equal lengths.
    Features(&'a [Vec<f64>]),
    /// Symmetric distances with zero diagonal; NaN sentinels must already be
    /// imputed.
    Distances(&'a DistanceMatrix),
}

impl TsneInput<'_> {
    fn len(&self) -> usize {
        match self {
            TsneInput::Features(x) => x.len(),
            TsneInput::Distances(d) => d.n,
        }
    }

    /// Row-major squared distances.
    fn squared_distances(&self) -> Result<Vec<f64>, TsneError> {
        match self {
            TsneInput::Features(x) => {
                if x.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(TsneError::NonFiniteInput);
                }
                let n = x.len();
                Ok((0..n)
                    .into_par_iter()
                    .flat_map_iter(|i| {
                        (0..n).map(move |j| {
                            x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                        })
                    })
                    .collect())
            }
            TsneInput::Distances(d) => {
                if d.values.iter().any(|v| !v.is_finite()) {
                    return Err(TsneError::NonFiniteInput);
                }
                Ok(d.values.iter().map(|v| v * v).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    pub coords: Vec<[f64; 2]>,
    pub labels: Vec<DomainLabel>,
    pub story_ids: Vec<u64>,
    /// KL(P || Q) before each gradient step, against the unexaggerated P.
    pub kl_trace: Vec<f64>,
}

impl Projection2D {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// `story_id,x,y,domain`
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "story_id,x,y,domain")?;
        for ((id, c), l) in self.story_ids.iter().zip(&self.coords).zip(&self.labels) {
            writeln!(w, "{id},{},{},{l}", c[0], c[1])?;
        }
        Ok(())
    }

    /// `iteration,kl`
    pub fn write_kl_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "iteration,kl")?;
        for (i, kl) in self.kl_trace.iter().enumerate() {
            writeln!(w, "{i},{kl}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: io::Read>(r: R) -> Result<Projection2D, String> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut out = Projection2D {
            coords: vec![],
            labels: vec![],
            story_ids: vec![],
            kl_trace: vec![],
        };
        for rec in rdr.records() {
            let rec = rec.map_err(|e| e.to_string())?;
            let field = |i: usize| rec.get(i).ok_or_else(|| format!("short row: {rec:?}"));
            out.story_ids.push(field(0)?.parse().map_err(|e| format!("{e}"))?);
            let x: f64 = field(1)?.parse().map_err(|e| format!("{e}"))?;
            let y: f64 = field(2)?.parse().map_err(|e| format!("{e}"))?;
            out.coords.push([x, y]);
            out.labels.push(DomainLabel::parse(field(3)?));
        }
        Ok(out)
    }
}

/// Conditional affinities `p_{j|i}` with per-point bandwidths found by
/// bisection on the precision so the row entropy matches `ln(perplexity)`.
pub fn conditional_affinities(sq_dist: &[f64], n: usize, perplexity: f64) -> Vec<f64> {
    let target = perplexity.ln();
    (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let d = &sq_dist[i * n..(i + 1) * n];
            let mut beta = 1.0;
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            let mut row = vec![0.0; n];
            for _ in 0..MAX_BANDWIDTH_STEPS {
                let h = gaussian_row(d, i, beta, &mut row);
                let diff = h - target;
                if diff.abs() < ENTROPY_TOLERANCE {
                    break;
                }
                if diff > 0.0 {
                    lo = beta;
                    beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
                } else {
                    hi = beta;
                    beta = if lo.is_finite() { 0.5 * (beta + lo) } else { beta / 2.0 };
                }
            }
            gaussian_row(d, i, beta, &mut row);
            row.into_iter()
        })
        .collect()
}

/// Fills `row` with normalized `exp(-beta d)` (zero at `skip`) and returns
/// its Shannon entropy in nats. Distances are shifted by the row minimum
/// for numerical range; this cancels in the normalization.
fn gaussian_row(d: &[f64], skip: usize, beta: f64, row: &mut [f64]) -> f64 {
    let min = d
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != skip)
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for (j, (&dj, r)) in d.iter().zip(row.iter_mut()).enumerate() {
        *r = if j == skip { 0.0 } else { (-beta * (dj - min)).exp() };
        sum += *r;
    }
    let mut weighted = 0.0;
    for (j, r) in row.iter_mut().enumerate() {
        if j != skip {
            weighted += *r * (d[j] - min);
            *r /= sum;
        }
    }
    // H = ln(sum) + beta * E[d - min]
    sum.ln() + beta * weighted / sum
}

/// Symmetrized joint affinities `(p_{j|i} + p_{i|j}) / 2n`, floored.
pub fn joint_affinities(sq_dist: &[f64], n: usize, perplexity: f64) -> Vec<f64> {
    let cond = conditional_affinities(sq_dist, n, perplexity);
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = ((cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64)).max(P_FLOOR);
            }
        }
    }
    p
}

fn recenter(y: &mut [[f64; 2]]) {
    let n = y.len() as f64;
    let mean = [
        y.iter().map(|p| p[0]).sum::<f64>() / n,
        y.iter().map(|p| p[1]).sum::<f64>() / n,
    ];
    for p in y.iter_mut() {
        p[0] -= mean[0];
        p[1] -= mean[1];
    }
}

/// Per-row sums that do not depend on the embedding.
struct AffinityRows {
    p: Vec<f64>,
    /// `Σ_j p_ij ln p_ij`
    plogp: Vec<f64>,
    /// `Σ_j p_ij`
    mass: Vec<f64>,
}

impl AffinityRows {
    fn new(p: Vec<f64>, n: usize) -> Self {
        let plogp = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| p[i * n + j])
                    .filter(|&x| x > 0.0)
                    .map(|x| x * x.ln())
                    .sum()
            })
            .collect();
        let mass = (0..n).map(|i| p[i * n..(i + 1) * n].iter().sum()).collect();
        AffinityRows { p, plogp, mass }
    }
}

/// Gradient of KL(exaggeration·P || Q) at `y`, and KL(P || Q) itself.
///
/// With `w_ij = 1 / (1 + |y_i - y_j|²)` and `Z = Σ w`, the gradient row is
/// `4 (e Σ_j p_ij w_ij Δ_ij − Σ_j w_ij² Δ_ij / Z)` and
/// `KL = Σ_i (Σ_j p_ij ln p_ij − Σ_j p_ij ln w_ij + ln Z Σ_j p_ij)`, so one
/// pass per row suffices. Rows run in parallel; sums run in a fixed order.
fn gradient_and_kl(y: &[[f64; 2]], aff: &AffinityRows, exaggeration: f64) -> (Vec<[f64; 2]>, f64) {
    let n = y.len();
    let p = &aff.p;
    // (attractive, repulsive, Σ w, Σ p ln w)
    let rows: Vec<([f64; 2], [f64; 2], f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (mut att, mut rep) = ([0.0; 2], [0.0; 2]);
            let (mut wsum, mut plogw) = (0.0, 0.0);
            // floor-valued p_ij share one logarithm through a running product
            let (mut prod, mut floor_log) = (1.0f64, 0.0);
            let yi = y[i];
            let prow = &p[i * n..(i + 1) * n];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let dx = yi[0] - y[j][0];
                let dy = yi[1] - y[j][1];
                let d2 = dx * dx + dy * dy;
                let w = 1.0 / (1.0 + d2);
                let pw = prow[j] * w;
                let ww = w * w;
                att[0] += pw * dx;
                att[1] += pw * dy;
                rep[0] += ww * dx;
                rep[1] += ww * dy;
                wsum += w;
                let excess = prow[j] - P_FLOOR;
                if excess > 0.0 {
                    plogw -= excess * d2.ln_1p();
                }
                prod *= 1.0 + d2;
                if prod > 1e150 {
                    floor_log += prod.ln();
                    prod = 1.0;
                }
            }
            plogw -= P_FLOOR * (floor_log + prod.ln());
            (att, rep, wsum, plogw)
        })
        .collect();
    let z: f64 = rows.iter().map(|r| r.2).sum();
    let lnz = z.ln();
    let mut kl = 0.0;
    let grad = rows
        .iter()
        .enumerate()
        .map(|(i, (att, rep, _, plogw))| {
            kl += aff.plogp[i] - plogw + lnz * aff.mass[i];
            [
                4.0 * (exaggeration * att[0] - rep[0] / z),
                4.0 * (exaggeration * att[1] - rep[1] / z),
            ]
        })
        .collect();
    (grad, kl)
}

/// Gradient descent with momentum and per-coordinate gains, early
/// exaggeration for the first `exaggeration_iterations` steps. After that
/// phase a step that would raise KL(P || Q) is rejected: the point set stays
/// put, velocity and gains reset, and the step size halves (it grows back by
/// 10% per accepted step). `kl_trace[t]` is the KL before step `t`.
pub fn tsne(
    input: TsneInput<'_>,
    cfg: &TsneConfig,
    labels: &[DomainLabel],
    story_ids: &[u64],
) -> Result<Projection2D, TsneError> {
    let n = input.len();
    if labels.len() != n || story_ids.len() != n {
        return Err(TsneError::LengthMismatch(n));
    }
    cfg.validate(n)?;
    let sq = input.squared_distances()?;
    let aff = AffinityRows::new(joint_affinities(&sq, n, cfg.perplexity), n);
    drop(sq);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)])
        .collect();
    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut kl_trace = Vec::with_capacity(cfg.iterations);
    let exaggeration_at = |iter: usize| {
        if iter < cfg.exaggeration_iterations {
            cfg.early_exaggeration
        } else {
            1.0
        }
    };
    let mut step_scale = 1.0;
    let (mut grad, mut kl) = gradient_and_kl(&y, &aff, exaggeration_at(0));

    for iter in 0..cfg.iterations {
        kl_trace.push(kl);
        let momentum = if iter < cfg.exaggeration_iterations {
            INITIAL_MOMENTUM
        } else {
            FINAL_MOMENTUM
        };
        let saved = (iter >= cfg.exaggeration_iterations).then(|| y.clone());

        for (i, g) in grad.iter().enumerate() {
            for c in 0..2 {
                gains[i][c] = if (g[c] > 0.0) != (update[i][c] > 0.0) {
                    gains[i][c] + 0.2
                } else {
                    (gains[i][c] * 0.8).max(MIN_GAIN)
                };
                update[i][c] =
                    momentum * update[i][c] - cfg.learning_rate * step_scale * gains[i][c] * g[c];
                y[i][c] += update[i][c];
            }
        }
        recenter(&mut y);

        let (next_grad, next_kl) = gradient_and_kl(&y, &aff, exaggeration_at(iter + 1));
        match saved {
            // after exaggeration a step that raises KL is undone and the
            // descent restarts from rest with a smaller step
            Some(prev) if next_kl > kl => {
                y = prev;
                update.iter_mut().for_each(|u| *u = [0.0; 2]);
                gains.iter_mut().for_each(|g| *g = [1.0; 2]);
                step_scale *= 0.5;
            }
            _ => {
                grad = next_grad;
                kl = next_kl;
                step_scale = (step_scale * 1.1).min(1.0);
            }
        }
    }

    if y.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(TsneError::NonFiniteInput);
    }
    Ok(Projection2D {
        coords: y,
        labels: labels.to_vec(),
        story_ids: story_ids.to_vec(),
        kl_trace,
    })
}
