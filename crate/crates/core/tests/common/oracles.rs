//! Slow reference implementations. Nothing here calls into the library's
//! numeric code; inputs and outputs are plain vectors.
#![allow(clippy::needless_range_loop)]

use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub values: Vec<f64>,
    pub method: &'static str,
}

#[derive(Debug, PartialEq)]
pub enum OracleError {
    InfeasibleWeights,
}

const EPS: f64 = 1e-12;

/// Minimum of `c·x` subject to `A x = b`, `x ≥ 0`, with `b ≥ 0`. Two-phase
/// tableau simplex with Bland's rule. Returns `None` when infeasible.
pub fn dense_simplex(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Option<f64> {
    let rows = a.len();
    let nvar = c.len();
    let width = nvar + rows + 1;
    let rhs = width - 1;
    let mut t = vec![vec![0.0; width]; rows];
    for r in 0..rows {
        t[r][..nvar].copy_from_slice(&a[r]);
        t[r][nvar + r] = 1.0;
        t[r][rhs] = b[r];
    }
    let mut basis: Vec<usize> = (nvar..nvar + rows).collect();

    // phase 1: minimize the sum of artificials
    let mut obj = vec![0.0; width];
    for j in nvar..nvar + rows {
        obj[j] = 1.0;
    }
    price_out(&mut obj, &t, &basis);
    run_bland(&mut t, &mut obj, &mut basis, nvar + rows);
    if -obj[rhs] > 1e-9 {
        return None;
    }
    // drive zero-level artificials out of the basis where possible
    for r in 0..rows {
        if basis[r] >= nvar {
            if let Some(j) = (0..nvar).find(|&j| t[r][j].abs() > 1e-9) {
                pivot(&mut t, &mut obj, &mut basis, r, j);
            }
        }
    }

    // phase 2
    let mut obj = vec![0.0; width];
    obj[..nvar].copy_from_slice(c);
    price_out(&mut obj, &t, &basis);
    run_bland(&mut t, &mut obj, &mut basis, nvar);
    Some(
        (0..rows)
            .filter(|&r| basis[r] < nvar)
            .map(|r| c[basis[r]] * t[r][rhs])
            .sum(),
    )
}

fn price_out(obj: &mut [f64], t: &[Vec<f64>], basis: &[usize]) {
    for (r, &bv) in basis.iter().enumerate() {
        let f = obj[bv];
        if f != 0.0 {
            for (o, v) in obj.iter_mut().zip(&t[r]) {
                *o -= f * v;
            }
        }
    }
}

fn pivot(t: &mut [Vec<f64>], obj: &mut [f64], basis: &mut [usize], r: usize, j: usize) {
    let p = t[r][j];
    for v in t[r].iter_mut() {
        *v /= p;
    }
    let prow = t[r].clone();
    for (q, row) in t.iter_mut().enumerate() {
        if q != r && row[j] != 0.0 {
            let f = row[j];
            for (v, pv) in row.iter_mut().zip(&prow) {
                *v -= f * pv;
            }
        }
    }
    let f = obj[j];
    for (o, pv) in obj.iter_mut().zip(&prow) {
        *o -= f * pv;
    }
    basis[r] = j;
}

fn run_bland(t: &mut [Vec<f64>], obj: &mut [f64], basis: &mut [usize], allowed: usize) {
    let rhs = obj.len() - 1;
    loop {
        let Some(j) = (0..allowed).find(|&j| obj[j] < -EPS) else {
            return;
        };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..t.len() {
            if t[r][j] > EPS {
                let ratio = t[r][rhs] / t[r][j];
                let better = match leave {
                    None => true,
                    Some((lr, lratio)) => {
                        ratio < lratio - EPS || ((ratio - lratio).abs() <= EPS && basis[r] < basis[lr])
                    }
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
        }
        let (r, _) = leave.expect("transportation problems are bounded");
        pivot(t, obj, basis, r, j);
    }
}

/// Optimal transport value between `a` and `b` under `cost`, via the dense
/// simplex on the full transportation LP (last column constraint dropped as
/// redundant).
pub fn lp_transport_oracle(a: &[f64], b: &[f64], cost: &[Vec<f64>]) -> Result<OracleResult, OracleError> {
    let (m, n) = (a.len(), b.len());
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    if (sa - sb).abs() > 1e-12 {
        return Err(OracleError::InfeasibleWeights);
    }
    let nvar = m * n;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..m {
        let mut row = vec![0.0; nvar];
        for j in 0..n {
            row[i * n + j] = 1.0;
        }
        rows.push(row);
        rhs.push(a[i]);
    }
    for j in 0..n.saturating_sub(1) {
        let mut row = vec![0.0; nvar];
        for i in 0..m {
            row[i * n + j] = 1.0;
        }
        rows.push(row);
        rhs.push(b[j]);
    }
    let c: Vec<f64> = cost.iter().flatten().copied().collect();
    let v = dense_simplex(&rows, &rhs, &c).ok_or(OracleError::InfeasibleWeights)?;
    Ok(OracleResult {
        values: vec![v],
        method: "dense-simplex",
    })
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Eigenpairs sorted
/// by decreasing eigenvalue; eigenvectors are returned as rows.
pub fn jacobi_eigen(sym: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = sym.len();
    let mut a: Vec<Vec<f64>> = sym.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y][y].partial_cmp(&a[x][x]).unwrap());
    let vals = order.iter().map(|&k| a[k][k]).collect();
    let vecs = order.iter().map(|&k| (0..n).map(|i| v[i][k]).collect()).collect();
    (vals, vecs)
}

pub struct PcaOracle {
    /// Singular values, descending, all of them.
    pub singular_values: Vec<f64>,
    /// Top-s rows `σ_k v_k`, sign as returned by Jacobi.
    pub rows: Vec<Vec<f64>>,
    /// Squared Frobenius error of the rank-s approximation of the centered
    /// matrix.
    pub residual: f64,
}

/// PCA from the eigendecomposition of the Gram matrix `XᵀX` of the
/// (optionally) column-centered `t × d` matrix `m`.
pub fn pca_oracle(m: &[Vec<f64>], s: usize, center: bool) -> PcaOracle {
    let t = m.len();
    let d = m[0].len();
    let mut x = m.to_vec();
    if center {
        for c in 0..d {
            let mean = x.iter().map(|r| r[c]).sum::<f64>() / t as f64;
            for r in x.iter_mut() {
                r[c] -= mean;
            }
        }
    }
    let gram: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| x.iter().map(|r| r[i] * r[j]).sum()).collect())
        .collect();
    let (vals, vecs) = jacobi_eigen(&gram);
    let singular_values: Vec<f64> = vals.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let rows = (0..s)
        .map(|k| vecs[k].iter().map(|v| v * singular_values[k]).collect())
        .collect();
    let residual = vals.iter().skip(s).map(|l| l.max(0.0)).sum();
    PcaOracle {
        singular_values,
        rows,
        residual,
    }
}

/// Squared Frobenius error of projecting the centered `m` onto the span of
/// `rows`, computed by explicit Gram–Schmidt.
pub fn projection_residual(m: &[Vec<f64>], rows: &[Vec<f64>], center: bool) -> f64 {
    let t = m.len();
    let d = m[0].len();
    let mut x = m.to_vec();
    if center {
        for c in 0..d {
            let mean = x.iter().map(|r| r[c]).sum::<f64>() / t as f64;
            for r in x.iter_mut() {
                r[c] -= mean;
            }
        }
    }
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for r in rows {
        let mut v = r.clone();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(p, q)| p * q).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= dot * bi;
            }
        }
        let norm = v.iter().map(|p| p * p).sum::<f64>().sqrt();
        if norm > 1e-10 {
            basis.push(v.into_iter().map(|p| p / norm).collect());
        }
    }
    x.iter()
        .map(|r| {
            let mut res = r.clone();
            for b in &basis {
                let dot: f64 = r.iter().zip(b).map(|(p, q)| p * q).sum();
                for (ri, bi) in res.iter_mut().zip(b) {
                    *ri -= dot * bi;
                }
            }
            res.iter().map(|p| p * p).sum::<f64>()
        })
        .sum()
}

/// `(token, doc_freq, corpus_freq)` in order of first appearance.
pub fn recount_oracle(docs: &[Vec<String>]) -> Vec<(String, usize, usize)> {
    let mut seen: Vec<String> = Vec::new();
    for doc in docs {
        for tok in doc {
            if !seen.iter().any(|s| s == tok) {
                seen.push(tok.clone());
            }
        }
    }
    seen.into_iter()
        .map(|tok| {
            let mut df = 0;
            let mut cf = 0;
            for doc in docs {
                let mut here = 0;
                for t in doc {
                    if *t == tok {
                        here += 1;
                    }
                }
                cf += here;
                if here > 0 {
                    df += 1;
                }
            }
            (tok, df, cf)
        })
        .collect()
}

/// Dense count matrix over `vocab` by string comparison.
pub fn bow_oracle(docs: &[Vec<String>], vocab: &[String]) -> Vec<Vec<u32>> {
    docs.iter()
        .map(|doc| {
            vocab
                .iter()
                .map(|v| doc.iter().filter(|t| *t == v).count() as u32)
                .collect()
        })
        .collect()
}

/// `count · ln(n/df)`, rows scaled to unit length (zero rows left as is).
pub fn tfidf_oracle(docs: &[Vec<String>], vocab: &[String]) -> Vec<Vec<f64>> {
    let counts = bow_oracle(docs, vocab);
    let n = docs.len() as f64;
    let df: Vec<f64> = (0..vocab.len())
        .map(|j| counts.iter().filter(|r| r[j] > 0).count() as f64)
        .collect();
    counts
        .iter()
        .map(|row| {
            let w: Vec<f64> = row
                .iter()
                .zip(&df)
                .map(|(&c, &d)| if c == 0 { 0.0 } else { c as f64 * (n / d).ln() })
                .collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                w.iter().map(|x| x / norm).collect()
            } else {
                w
            }
        })
        .collect()
}

/// Purity, ARI and NMI. ARI comes from counting every pair of points, NMI
/// from explicit joint probabilities.
pub fn contingency_oracle(clusters: &[usize], labels: &[usize]) -> OracleResult {
    let n = clusters.len();
    let mut cells: HashMap<(usize, usize), usize> = HashMap::new();
    let mut per_cluster: HashMap<usize, usize> = HashMap::new();
    let mut per_label: HashMap<usize, usize> = HashMap::new();
    for (&c, &l) in clusters.iter().zip(labels) {
        *cells.entry((c, l)).or_default() += 1;
        *per_cluster.entry(c).or_default() += 1;
        *per_label.entry(l).or_default() += 1;
    }

    let mut purity_hits = 0;
    for &c in per_cluster.keys() {
        purity_hits += per_label.keys().map(|&l| cells.get(&(c, l)).copied().unwrap_or(0)).max().unwrap();
    }
    let purity = purity_hits as f64 / n as f64;

    let (mut ss, mut sd, mut ds, mut dd) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..n {
        for j in (i + 1)..n {
            match (clusters[i] == clusters[j], labels[i] == labels[j]) {
                (true, true) => ss += 1.0,
                (true, false) => sd += 1.0,
                (false, true) => ds += 1.0,
                (false, false) => dd += 1.0,
            }
        }
    }
    let denom = (ss + sd) * (sd + dd) + (ss + ds) * (ds + dd);
    let ari = if denom == 0.0 { 1.0 } else { 2.0 * (ss * dd - sd * ds) / denom };

    let nf = n as f64;
    let h = |m: &HashMap<usize, usize>| -> f64 {
        m.values().map(|&v| v as f64 / nf).map(|p| -p * p.ln()).sum()
    };
    let (hc, hl) = (h(&per_cluster), h(&per_label));
    let mut mi = 0.0;
    for (&(c, l), &v) in &cells {
        let pcl = v as f64 / nf;
        let pc = per_cluster[&c] as f64 / nf;
        let pl = per_label[&l] as f64 / nf;
        mi += pcl * (pcl / (pc * pl)).ln();
    }
    let nmi = if hc + hl == 0.0 { 1.0 } else { 2.0 * mi / (hc + hl) };
    OracleResult {
        values: vec![purity, ari, nmi],
        method: "pair-count",
    }
}
