//! Partition agreement measures.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::collections::BTreeMap;

/// Contingency table of two labelings. Rows follow the sorted distinct labels of
/// `a`, columns those of `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Contingency {
    pub row_labels: Vec<usize>,
    pub col_labels: Vec<usize>,
    pub counts: DMatrix<usize>,
}

fn index_of(labels: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut map = BTreeMap::new();
    for &l in labels {
        map.entry(l).or_insert(0usize);
    }
    for (i, v) in map.values_mut().enumerate() {
        *v = i;
    }
    (map.keys().copied().collect(), labels.iter().map(|l| map[l]).collect())
}

pub fn confusion(a: &[usize], b: &[usize]) -> Result<Contingency> {
    if a.len() != b.len() {
        return Err(Error::Domain(format!("label vectors differ in length ({} vs {})", a.len(), b.len())));
    }
    let (row_labels, ia) = index_of(a);
    let (col_labels, ib) = index_of(b);
    let mut counts = DMatrix::zeros(row_labels.len(), col_labels.len());
    for (i, j) in ia.into_iter().zip(ib) {
        counts[(i, j)] += 1;
    }
    Ok(Contingency { row_labels, col_labels, counts })
}

fn pairs(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Hubert-Arabie adjusted Rand index. When the index is undefined (zero
/// denominator, e.g. both partitions constant) it is 1 for identical partitions
/// and 0 otherwise.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::Domain("empty label vectors".into()));
    }
    let c = confusion(a, b)?;
    let index: f64 = c.counts.iter().map(|&v| pairs(v)).sum();
    let sa: f64 = c.counts.row_iter().map(|r| pairs(r.sum())).sum();
    let sb: f64 = c.counts.column_iter().map(|r| pairs(r.sum())).sum();
    let total = pairs(a.len());
    // Scaled by 2 * total so that every term stays an exact integer in f64.
    let num = 2.0 * (index * total - sa * sb);
    let den = (sa + sb) * total - 2.0 * sa * sb;
    if den == 0.0 {
        let identical = c.row_labels.len() == c.col_labels.len()
            && c.counts.row_iter().all(|r| r.iter().filter(|&&v| v > 0).count() == 1);
        return Ok(if identical { 1.0 } else { 0.0 });
    }
    Ok(num / den)
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

/// For labels in 0..k on both sides, the permutation `perm` maximizing the number
/// of i with truth[i] == perm[pred[i]] (ties to the lexicographically first).
pub fn best_matching(truth: &[usize], pred: &[usize], k: usize) -> Vec<usize> {
    let mut counts = vec![vec![0usize; k]; k];
    for (&t, &p) in truth.iter().zip(pred) {
        if t < k && p < k {
            counts[p][t] += 1;
        }
    }
    let mut best = (0..k).collect::<Vec<_>>();
    let mut best_score = 0;
    let mut first = true;
    for perm in permutations(k) {
        let score: usize = (0..k).map(|p| counts[p][perm[p]]).sum();
        if first || score > best_score {
            best_score = score;
            best = perm;
            first = false;
        }
    }
    best
}
