//! External clustering metrics computed from a contingency table.
//!
//! Entropies use natural logarithms. Degenerate cases:
//!
//! | Case | Value |
//! |------|-------|
//! | `H(U) = 0` and `H(V) = 0` | NMI = 1 |
//! | exactly one of `H(U)`, `H(V)` is 0 | NMI = 0 |
//! | `H(U) = 0` | HOM = 1 |
//! | `H(V) = 0` | COM = 1 |
//! | zero ARI denominator | ARI = 1 |
//!
//! `U` is the true partition and `V` the predicted one.

use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("label vectors differ in length ({truth} vs {pred})")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("label vectors are empty")]
    Empty,
}

/// Counts of points per (true class, predicted cluster), with label ids
/// densely re-indexed in increasing order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
    row_sums: Vec<u64>,
    col_sums: Vec<u64>,
    total: u64,
}

fn dense(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let mapped = labels.iter().map(|l| ids.binary_search(l).unwrap()).collect();
    (mapped, ids.len())
}

impl ContingencyTable {
    pub fn new(truth: &[usize], pred: &[usize]) -> Result<Self, MetricsError> {
        if truth.len() != pred.len() {
            return Err(MetricsError::LengthMismatch {
                truth: truth.len(),
                pred: pred.len(),
            });
        }
        if truth.is_empty() {
            return Err(MetricsError::Empty);
        }
        let (t, rows) = dense(truth);
        let (p, cols) = dense(pred);
        let mut counts = vec![0u64; rows * cols];
        for (a, b) in t.iter().zip(&p) {
            counts[a * cols + b] += 1;
        }
        let row_sums = (0..rows).map(|a| counts[a * cols..(a + 1) * cols].iter().sum()).collect();
        let col_sums = (0..cols).map(|b| (0..rows).map(|a| counts[a * cols + b]).sum()).collect();
        Ok(Self {
            rows,
            cols,
            counts,
            row_sums,
            col_sums,
            total: truth.len() as u64,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, a: usize, b: usize) -> u64 {
        self.counts[a * self.cols + b]
    }

    pub fn row_sums(&self) -> &[u64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[u64] {
        &self.col_sums
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    fn entropy(marginal: &[u64], total: u64) -> f64 {
        let n = total as f64;
        marginal
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * libm::log(p)
            })
            .sum()
    }

    fn mutual_information(&self) -> f64 {
        let n = self.total as f64;
        let mut mi = 0.0;
        for a in 0..self.rows {
            for b in 0..self.cols {
                let c = self.get(a, b);
                if c > 0 {
                    let c = c as f64;
                    mi += c / n * libm::log(c * n / (self.row_sums[a] as f64 * self.col_sums[b] as f64));
                }
            }
        }
        mi.max(0.0)
    }
}

/// Shorthand for [`ContingencyTable::new`].
pub fn contingency(truth: &[usize], pred: &[usize]) -> Result<ContingencyTable, MetricsError> {
    ContingencyTable::new(truth, pred)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub nmi: f64,
    /// ARI clamped to `[0, 1]`.
    pub ari: f64,
    pub ari_raw: f64,
    pub acc: f64,
    pub hom: f64,
    pub com: f64,
    pub pur: f64,
}

fn choose2(x: u64) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

pub fn nmi(t: &ContingencyTable) -> f64 {
    let hu = ContingencyTable::entropy(&t.row_sums, t.total);
    let hv = ContingencyTable::entropy(&t.col_sums, t.total);
    match (hu > 0.0, hv > 0.0) {
        (false, false) => 1.0,
        (true, true) => (t.mutual_information() / libm::sqrt(hu * hv)).clamp(0.0, 1.0),
        _ => 0.0,
    }
}

/// Unclamped adjusted Rand index.
pub fn ari(t: &ContingencyTable) -> f64 {
    let index: f64 = t.counts.iter().map(|&c| choose2(c)).sum();
    let a: f64 = t.row_sums.iter().map(|&c| choose2(c)).sum();
    let b: f64 = t.col_sums.iter().map(|&c| choose2(c)).sum();
    let pairs = choose2(t.total);
    let expected = if pairs > 0.0 { a * b / pairs } else { 0.0 };
    let max = 0.5 * (a + b);
    let denom = max - expected;
    if denom == 0.0 {
        1.0
    } else {
        (index - expected) / denom
    }
}

pub fn homogeneity(t: &ContingencyTable) -> f64 {
    let hu = ContingencyTable::entropy(&t.row_sums, t.total);
    if hu == 0.0 {
        1.0
    } else {
        // H(U|V) = H(U) - I(U;V)
        (t.mutual_information() / hu).clamp(0.0, 1.0)
    }
}

pub fn completeness(t: &ContingencyTable) -> f64 {
    let hv = ContingencyTable::entropy(&t.col_sums, t.total);
    if hv == 0.0 {
        1.0
    } else {
        (t.mutual_information() / hv).clamp(0.0, 1.0)
    }
}

pub fn purity(t: &ContingencyTable) -> f64 {
    let hits: u64 = (0..t.cols).map(|b| (0..t.rows).map(|a| t.get(a, b)).max().unwrap_or(0)).sum();
    hits as f64 / t.total as f64
}

/// Fraction of points correctly labelled under the best one-to-one
/// matching of clusters to classes.
pub fn accuracy(t: &ContingencyTable) -> f64 {
    let n = t.rows.max(t.cols);
    let mut weight = vec![0i64; n * n];
    for a in 0..t.rows {
        for b in 0..t.cols {
            weight[a * n + b] = t.get(a, b) as i64;
        }
    }
    let assignment = max_weight_assignment(&weight, n);
    let hits: i64 = assignment.iter().enumerate().map(|(a, &b)| weight[a * n + b]).sum();
    hits as f64 / t.total as f64
}

/// Hungarian algorithm on an `n x n` weight matrix; returns, for each row,
/// the column it is matched to so that the total weight is maximal.
pub fn max_weight_assignment(weight: &[i64], n: usize) -> Vec<usize> {
    assert_eq!(weight.len(), n * n, "weight matrix must be square");
    if n == 0 {
        return Vec::new();
    }
    // minimise cost = -weight with 1-based potentials
    let cost = |i: usize, j: usize| -weight[(i - 1) * n + (j - 1)];
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
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
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[p[j] - 1] = j - 1;
    }
    row_to_col
}

/// All six metrics for a predicted labelling against the truth.
pub fn evaluate(truth: &[usize], pred: &[usize]) -> Result<Scores, MetricsError> {
    let t = contingency(truth, pred)?;
    let ari_raw = ari(&t);
    Ok(Scores {
        nmi: nmi(&t),
        ari: ari_raw.clamp(0.0, 1.0),
        ari_raw,
        acc: accuracy(&t),
        hom: homogeneity(&t),
        com: completeness(&t),
        pur: purity(&t),
    })
}
