use super::estep::ESuffStats;
use crate::error::{Error, Result};
use crate::funbasis::FunctionalDataset;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitStrategy {
    KMeans,
    Random,
}

fn sq_dist(x: &DMatrix<f64>, i: usize, c: &DMatrix<f64>, k: usize) -> f64 {
    x.row(i).iter().zip(c.row(k).iter()).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn lloyd(x: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let n = x.nrows();
    // k-means++ seeding
    let mut centers = DMatrix::zeros(k, x.ncols());
    centers.set_row(0, &x.row(rng.random_range(0..n)));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x, i, &centers, 0)).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, v) in d2.iter().enumerate() {
                if u < *v {
                    idx = i;
                    break;
                }
                u -= v;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        centers.set_row(c, &x.row(pick));
        for i in 0..n {
            d2[i] = d2[i].min(sq_dist(x, i, &centers, c));
        }
    }
    let mut labels = vec![0usize; n];
    for it in 0..300 {
        let mut changed = false;
        for i in 0..n {
            let mut best = (0, f64::INFINITY);
            for c in 0..k {
                let d = sq_dist(x, i, &centers, c);
                if d < best.1 {
                    best = (c, d);
                }
            }
            if labels[i] != best.0 {
                labels[i] = best.0;
                changed = true;
            }
        }
        if !changed && it > 0 {
            break;
        }
        let mut sums = DMatrix::zeros(k, x.ncols());
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let mut r = sums.row_mut(labels[i]);
            r += x.row(i);
            counts[labels[i]] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers.set_row(c, &(sums.row(c) / counts[c] as f64));
            }
        }
    }
    let wss = (0..n).map(|i| sq_dist(x, i, &centers, labels[i])).sum();
    (labels, wss)
}

/// Lloyd's algorithm from `restarts` k-means++ seedings; the partition with the
/// smallest within-cluster sum of squares is returned.
pub fn kmeans(x: &DMatrix<f64>, k: usize, restarts: usize, seed: u64) -> Result<Vec<usize>> {
    if k == 0 || k > x.nrows() {
        return Err(Error::Domain(format!("cannot form {k} clusters from {} rows", x.nrows())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..restarts.max(1) {
        let (labels, wss) = lloyd(x, k, &mut rng);
        if best.as_ref().is_none_or(|b| wss < b.1) {
            best = Some((labels, wss));
        }
    }
    Ok(best.expect("at least one restart").0)
}

/// Hard starting partition, returned as sufficient statistics with unit moments.
pub fn initialize(
    data: &FunctionalDataset,
    k: usize,
    strategy: InitStrategy,
    seed: u64,
    kmeans_restarts: usize,
) -> Result<ESuffStats> {
    let n = data.n();
    if k == 0 || k > n {
        return Err(Error::Domain(format!("cannot form {k} clusters from {n} observations")));
    }
    let labels = match strategy {
        InitStrategy::KMeans => {
            let mut x = DMatrix::zeros(n, data.rx() + data.ry());
            x.view_mut((0, 0), (n, data.rx())).copy_from(&data.c_x);
            x.view_mut((0, data.rx()), (n, data.ry())).copy_from(&data.c_y);
            kmeans(&x, k, kmeans_restarts, seed)?
        }
        InitStrategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| rng.random_range(0..k)).collect()
        }
    };
    let t = DMatrix::from_fn(n, k, |i, c| if labels[i] == c { 1.0 } else { 0.0 });
    Ok(ESuffStats::from_hard(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DMatrix::from_fn(60, 2, |i, _| {
            let base = if i < 30 { 0.0 } else { 50.0 };
            base + rng.random::<f64>()
        });
        let l = kmeans(&x, 2, 5, 1).unwrap();
        assert!(l[..30].iter().all(|&v| v == l[0]));
        assert!(l[30..].iter().all(|&v| v == l[30]));
        assert_ne!(l[0], l[30]);
        assert_eq!(l, kmeans(&x, 2, 5, 1).unwrap());
    }
}
