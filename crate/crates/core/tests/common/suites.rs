//! Randomized oracle-vs-module suites. Each returns the number of compared
//! instances or a description of the first mismatch.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use storytopics::corpus::DomainLabel;
use storytopics::docgeom::{pca_reduce, PcaOptions, StoryMatrix};
use storytopics::embed::{EmbeddingSource, EmbeddingTable};
use storytopics::evalcluster::agreement;
use storytopics::textprep::Vocabulary;
use storytopics::vectorize::{bow, tfidf};
use storytopics::wmd::{transport_cost, wmd, NbowDistribution};

use super::oracles::*;
use super::tokenized;

pub const INSTANCES: usize = 200;

pub type SuiteResult = Result<usize, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn random_docs(rng: &mut ChaCha8Rng) -> Vec<Vec<String>> {
    let alphabet = rng.gen_range(1..15);
    let n = rng.gen_range(0..10);
    (0..n)
        .map(|_| {
            let len = rng.gen_range(0..12);
            (0..len).map(|_| format!("t{}", rng.gen_range(0..alphabet))).collect()
        })
        .collect()
}

pub fn vocabulary_statistics(instances: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for inst in 0..instances {
        let docs = random_docs(&mut rng);
        let vocab = Vocabulary::build(&tokenized(&docs));
        let oracle = recount_oracle(&docs);
        ensure!(vocab.len() == oracle.len(), "instance {inst}: {} vs {} tokens", vocab.len(), oracle.len());
        for (i, (tok, df, cf)) in oracle.iter().enumerate() {
            ensure!(vocab.token(i) == tok, "instance {inst}: token {i} {} vs {tok}", vocab.token(i));
            ensure!(vocab.index_of(tok) == Some(i), "instance {inst}: index of {tok}");
            ensure!(vocab.doc_freq(i) == *df, "instance {inst}: df of {tok}");
            ensure!(vocab.corpus_freq(i) == *cf, "instance {inst}: cf of {tok}");
        }
    }
    Ok(instances)
}

pub fn bow_counts(instances: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for inst in 0..instances {
        let docs = random_docs(&mut rng);
        let stories = tokenized(&docs);
        let vocab = Vocabulary::build(&stories);
        let m = bow(&stories, &vocab);
        ensure!(m.counts.to_dense() == bow_oracle(&docs, vocab.tokens()), "instance {inst}: counts differ");
    }
    Ok(instances)
}

pub fn tfidf_weights(instances: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for inst in 0..instances {
        let docs = random_docs(&mut rng);
        let stories = tokenized(&docs);
        let vocab = Vocabulary::build(&stories);
        let got = tfidf(&bow(&stories, &vocab), &vocab).to_dense();
        let want = tfidf_oracle(&docs, vocab.tokens());
        ensure!(got.len() == want.len(), "instance {inst}: row count");
        for (g, w) in got.iter().flatten().zip(want.iter().flatten()) {
            ensure!((g - w).abs() <= 1e-9, "instance {inst}: {g} vs {w}");
        }
    }
    Ok(instances)
}

fn random_matrix(rng: &mut ChaCha8Rng, t: usize, d: usize) -> Vec<Vec<f64>> {
    (0..t).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

fn story_matrix(m: &[Vec<f64>]) -> StoryMatrix {
    let (t, d) = (m.len(), m[0].len());
    StoryMatrix {
        story_id: 0,
        matrix: DMatrix::from_fn(t, d, |i, j| m[i][j]),
    }
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Singular values, residual and (where the spectrum is separated) the rows
/// themselves against the Jacobi Gram-matrix oracle.
pub fn pca_factors(instances: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut compared_rows = 0;
    for inst in 0..instances {
        let t = rng.gen_range(2..=12);
        let d = rng.gen_range(1..=12);
        let s = rng.gen_range(1..=(t - 1).min(d));
        let center = rng.gen_bool(0.8);
        let m = random_matrix(&mut rng, t, d);
        let got = rows_of(&pca_reduce(&story_matrix(&m), s, PcaOptions { center }));
        let oracle = pca_oracle(&m, s, center);
        ensure!(got.len() == s, "instance {inst}: {} rows", got.len());

        let sigma1 = oracle.singular_values[0].max(1.0);
        for (k, row) in got.iter().enumerate() {
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            ensure!(
                (norm - oracle.singular_values[k]).abs() <= 1e-9 * sigma1,
                "instance {inst} ({t}x{d}, s={s}): sigma {k} {norm} vs {}",
                oracle.singular_values[k]
            );
        }
        let resid = projection_residual(&m, &got, center);
        ensure!((resid - oracle.residual).abs() <= 1e-9 * sigma1 * sigma1, "instance {inst}: residual {resid} vs {}", oracle.residual);

        // directions are unique only when the spectrum is separated
        let sv = &oracle.singular_values;
        for k in 0..s {
            let gap_prev = if k == 0 { f64::INFINITY } else { sv[k - 1] - sv[k] };
            let gap_next = sv.get(k + 1).map_or(sv[k], |n| sv[k] - n);
            if gap_prev.min(gap_next) < 1e-3 * sigma1 {
                continue;
            }
            let o = &oracle.rows[k];
            let plus: f64 = got[k].iter().zip(o).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let minus: f64 = got[k].iter().zip(o).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
            ensure!(plus.min(minus) <= 1e-9 * sigma1, "instance {inst}: row {k} off by {}", plus.min(minus));
            compared_rows += 1;
        }
    }
    ensure!(instances < 200 || compared_rows > 300, "only {compared_rows} rows had a separated spectrum");
    Ok(instances)
}

/// No random rank-s subspace beats the PCA rows.
pub fn pca_optimality(instances: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for inst in 0..instances {
        let (t, d) = (rng.gen_range(3..=8), rng.gen_range(2..=8));
        let s = rng.gen_range(1..=(t - 1).min(d));
        let m = random_matrix(&mut rng, t, d);
        let got = rows_of(&pca_reduce(&story_matrix(&m), s, PcaOptions::default()));
        let best = projection_residual(&m, &got, true);
        for _ in 0..5 {
            let other = random_matrix(&mut rng, s, d);
            let r = projection_residual(&m, &other, true);
            ensure!(best <= r + 1e-12, "instance {inst}: {best} > {r}");
        }
    }
    Ok(instances)
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

/// Table with `m + n` random vectors and two nBOWs over disjoint rows.
fn wmd_instance(rng: &mut ChaCha8Rng, m: usize, n: usize) -> (EmbeddingTable, NbowDistribution, NbowDistribution) {
    let dim = rng.gen_range(1..=6);
    let rows: Vec<_> = (0..m + n)
        .map(|i| {
            let v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-2.0f32..2.0)).collect();
            (format!("w{i}"), v)
        })
        .collect();
    let table = EmbeddingTable::from_rows(dim, EmbeddingSource::SelfTrained, rows);
    let a = NbowDistribution {
        story_id: 1,
        support: (0..m).collect(),
        weights: random_simplex(rng, m),
    };
    let b = NbowDistribution {
        story_id: 2,
        support: (m..m + n).collect(),
        weights: random_simplex(rng, n),
    };
    (table, a, b)
}

fn oracle_cost(table: &EmbeddingTable, a: &NbowDistribution, b: &NbowDistribution) -> Vec<Vec<f64>> {
    a.support
        .iter()
        .map(|&i| {
            b.support
                .iter()
                .map(|&j| {
                    let (u, v) = (table.row(i), table.row(j));
                    let mut acc = 0.0f64;
                    for k in 0..u.len() {
                        let diff = u[k] as f64 - v[k] as f64;
                        acc += diff * diff;
                    }
                    acc.sqrt()
                })
                .collect()
        })
        .collect()
}

fn close_rel(got: f64, want: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want.abs().max(1e-300) || (got - want).abs() <= 1e-15
}

fn wmd_against_lp(seed: u64, instances: usize, shape: impl Fn(&mut ChaCha8Rng) -> (usize, usize)) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for inst in 0..instances {
        let (m, n) = shape(&mut rng);
        let (table, a, b) = wmd_instance(&mut rng, m, n);
        let want = lp_transport_oracle(&a.weights, &b.weights, &oracle_cost(&table, &a, &b))
            .map_err(|e| format!("instance {inst}: oracle {e:?}"))?
            .values[0];
        let got = wmd(&a, &b, &table);
        ensure!(close_rel(got, want, 1e-9), "instance {inst} ({m}x{n}): {got} vs {want}");
    }
    Ok(instances)
}

/// Supports up to 4 x 4.
pub fn wmd_small_supports(instances: usize) -> SuiteResult {
    wmd_against_lp(106, instances, |rng| (rng.gen_range(1..=4), rng.gen_range(1..=4)))
}

pub fn wmd_three_by_four(instances: usize) -> SuiteResult {
    wmd_against_lp(107, instances, |_| (3, 4))
}

pub fn transport_arbitrary_costs(instances: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    for inst in 0..instances {
        let (m, n) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let a = random_simplex(&mut rng, m);
        let b = random_simplex(&mut rng, n);
        // every fourth instance uses small integer costs to force ties
        let cost: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                (0..n)
                    .map(|_| if inst % 4 == 0 { rng.gen_range(0..3) as f64 } else { rng.gen_range(0.0..10.0) })
                    .collect()
            })
            .collect();
        let want = lp_transport_oracle(&a, &b, &cost).map_err(|e| format!("instance {inst}: oracle {e:?}"))?.values[0];
        let got = transport_cost(&a, &b, &cost).map_err(|e| format!("instance {inst}: {e}"))?;
        ensure!(close_rel(got, want, 1e-9), "instance {inst} ({m}x{n}): {got} vs {want}");
    }
    Ok(instances)
}

pub fn agreement_scores(instances: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    for inst in 0..instances {
        let n = rng.gen_range(2..60);
        let k = rng.gen_range(1..7);
        let clusters: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let labels: Vec<DomainLabel> = (0..n).map(|_| DomainLabel::ALL[rng.gen_range(0..5)]).collect();
        let got = agreement(&clusters, &labels).map_err(|e| format!("instance {inst}: {e}"))?;
        let label_ids: Vec<usize> = labels.iter().map(|l| l.index()).collect();
        let o = contingency_oracle(&clusters, &label_ids).values;
        ensure!((got.purity - o[0]).abs() <= 1e-12, "instance {inst}: purity {} vs {}", got.purity, o[0]);
        ensure!((got.adjusted_rand_index - o[1]).abs() <= 1e-12, "instance {inst}: ARI {} vs {}", got.adjusted_rand_index, o[1]);
        ensure!(
            (got.normalized_mutual_information - o[2]).abs() <= 1e-12,
            "instance {inst}: NMI {} vs {}",
            got.normalized_mutual_information,
            o[2]
        );
    }
    Ok(instances)
}
