use super::estep::{e_step_prepared, ESuffStats};
use super::init::initialize;
use super::mstep::{m_step_prepared, DimRule};
use super::{DimMode, FitConfig, Prepared};
use crate::error::{Error, Result};
use crate::funbasis::FunctionalDataset;
use crate::model::{FitResult, SIGMA_Y_MIN_EIGEN};
use log::debug;
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Aitken-extrapolated stopping rule on the last three log-likelihood values.
#[derive(Clone, Debug, PartialEq)]
pub struct StopState {
    pub history: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl StopState {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        Self { history: Vec::new(), tol, max_iter }
    }

    pub fn push(&mut self, loglik: f64) {
        self.history.push(loglik);
    }

    pub fn converged(&self) -> bool {
        let h = &self.history;
        h.len() >= 3 && aitken_converged(&h[h.len() - 3..], self.tol)
    }

    pub fn exhausted(&self) -> bool {
        self.history.len() >= self.max_iter
    }
}

/// `last3` = (L^m, L^m+1, L^m+2). Converged when the extrapolated limit is within
/// `tol` of L^m+1 and the rate is below one; a flat sequence counts as converged.
pub fn aitken_converged(last3: &[f64], tol: f64) -> bool {
    let [l0, l1, l2] = [last3[0], last3[1], last3[2]];
    let den = l1 - l0;
    if den.abs() < 1e-14 {
        return true;
    }
    let a = (l2 - l1) / den;
    if !(a < 1.0) {
        return false;
    }
    let one_minus = 1.0 - a;
    if one_minus.abs() < 1e-14 {
        return true;
    }
    let l_inf = l1 + (l2 - l1) / one_minus;
    (l_inf - l1).abs() < tol
}

/// Scree test: the last j whose eigenvalue gap is at least `threshold` times the
/// largest gap, clamped to [1, R - 1]. `eigenvalues` must be in descending order.
pub fn cattell_select(eigenvalues: &[f64], threshold: f64) -> usize {
    let r = eigenvalues.len();
    if r < 2 {
        return 1;
    }
    let gaps: Vec<f64> = eigenvalues.windows(2).map(|w| w[0] - w[1]).collect();
    let max = gaps.iter().copied().fold(0.0, f64::max);
    let mut d = 1;
    if max > 0.0 {
        for (j, g) in gaps.iter().enumerate() {
            if g / max >= threshold {
                d = j + 1;
            }
        }
    }
    d.clamp(1, r - 1)
}

pub fn bic(loglik: f64, tau: usize, n: usize) -> f64 {
    loglik - 0.5 * tau as f64 * (n as f64).ln()
}

/// Row-wise argmax; ties go to the lowest index.
pub fn map_classify(t: &DMatrix<f64>) -> Vec<usize> {
    t.row_iter()
        .map(|r| {
            let mut best = 0;
            for k in 1..r.len() {
                if r[k] > r[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

fn run_start(
    data: &FunctionalDataset,
    prep: &Prepared,
    k: usize,
    cfg: &FitConfig,
    seed: u64,
) -> Result<FitResult> {
    let start = initialize(data, k, cfg.init, seed, cfg.kmeans_restarts)?;
    let mut rule = match cfg.dims {
        DimMode::Fixed(d) => DimRule::Fixed(vec![d; k]),
        DimMode::Cattell { threshold, .. } => DimRule::Cattell(threshold),
    };
    let model0 = m_step_prepared(
        data,
        prep,
        &start,
        cfg,
        &rule,
        Some((cfg.init_alpha, cfg.init_concentration)),
    )?;
    if let DimMode::Cattell { every_iteration: false, .. } = cfg.dims {
        rule = DimRule::Fixed(model0.dims());
    }
    // Latent moments under the starting parameters, with the starting partition held.
    let mut stats: ESuffStats = e_step_prepared(data, prep, &model0, Some(&start.t))?;
    let mut stop = StopState::new(cfg.tol, cfg.max_iter);
    let mut model = model0;
    let mut converged = false;
    while !stop.exhausted() {
        model = m_step_prepared(data, prep, &stats, cfg, &rule, None)?;
        stats = e_step_prepared(data, prep, &model, None)?;
        stop.push(stats.loglik);
        debug!(
            "iter={} loglik={:.10e} min_nk={:.3}",
            stop.history.len(),
            stats.loglik,
            stats.n_k().iter().copied().fold(f64::INFINITY, f64::min)
        );
        if stop.converged() {
            converged = true;
            break;
        }
    }
    for (c, cl) in model.clusters.iter().enumerate() {
        let m = cl.y.min_eigenvalue();
        if !(m > SIGMA_Y_MIN_EIGEN) {
            return Err(Error::Numerical {
                i: 0,
                k: c,
                msg: format!("spurious cluster: response scatter eigenvalue {m:e}"),
            });
        }
    }
    let n_params = model.n_free_params();
    let loglik = stats.loglik;
    Ok(FitResult {
        labels: map_classify(&stats.t),
        t: stats.t,
        n_iter: stop.history.len(),
        loglik_trace: stop.history,
        loglik,
        n_params,
        bic: bic(loglik, n_params, data.n()),
        converged,
        threshold: cfg.dims.threshold(),
        model,
    })
}

/// Multi-start EM; start s is seeded with `seed + s` and the start with the
/// highest BIC is kept (ties to the earliest start).
pub fn fit(
    data: &FunctionalDataset,
    k: usize,
    cfg: &FitConfig,
    n_starts: usize,
    seed: u64,
) -> Result<FitResult> {
    if k == 0 || k > data.n() {
        return Err(Error::Domain(format!("cannot fit {k} clusters to {} observations", data.n())));
    }
    let prep = Prepared::new(data);
    let results: Vec<Result<FitResult>> = (0..n_starts.max(1) as u64)
        .into_par_iter()
        .map(|s| run_start(data, &prep, k, cfg, seed.wrapping_add(s)))
        .collect();
    let mut best: Option<FitResult> = None;
    let mut causes = Vec::new();
    for (s, r) in results.into_iter().enumerate() {
        match r {
            Ok(f) if f.bic.is_finite() => {
                if best.as_ref().is_none_or(|b| f.bic > b.bic) {
                    best = Some(f);
                }
            }
            Ok(f) => causes.push(format!("start {s}: non-finite BIC {}", f.bic)),
            Err(e) => causes.push(format!("start {s}: {e}")),
        }
    }
    best.ok_or(Error::Fit(causes))
}
