use super::{row, Prepared};
use crate::error::{Error, Result};
use crate::funbasis::FunctionalDataset;
use crate::model::{ClusterModel, ClusterParams};
use crate::skewdist::{latent_moments, unified_constants, UnifiedConstants};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Posterior probabilities and conditional moments of the mixing variables.
#[derive(Clone, Debug, PartialEq)]
pub struct ESuffStats {
    /// n x K posterior probabilities t_ik
    pub t: DMatrix<f64>,
    pub w_x: DMatrix<f64>,
    pub wi_x: DMatrix<f64>,
    pub lw_x: DMatrix<f64>,
    pub w_y: DMatrix<f64>,
    pub wi_y: DMatrix<f64>,
    pub lw_y: DMatrix<f64>,
    /// Observed-data log-likelihood at the parameters the stats were computed from.
    pub loglik: f64,
}

impl ESuffStats {
    /// Hard assignment with unit moments (used before any parameters exist).
    pub fn from_hard(t: DMatrix<f64>) -> Self {
        let (n, k) = t.shape();
        let ones = DMatrix::from_element(n, k, 1.0);
        let zeros = DMatrix::zeros(n, k);
        Self {
            t,
            w_x: ones.clone(),
            wi_x: ones.clone(),
            lw_x: zeros.clone(),
            w_y: ones.clone(),
            wi_y: ones,
            lw_y: zeros,
            loglik: f64::NAN,
        }
    }

    pub fn n_k(&self) -> Vec<f64> {
        self.t.column_iter().map(|c| c.sum()).collect()
    }
}

/// Per-cluster quantities that do not depend on the observation.
pub(crate) struct ClusterCache {
    // covariate side, whitened coordinates
    mu_t: DVector<f64>,
    u: DMatrix<f64>,
    inv_a: Vec<f64>,
    inv_b: f64,
    al_t: DVector<f64>,
    al_u: DVector<f64>,
    rho_x: f64,
    cx: UnifiedConstants,
    // response side
    gamma_star: DMatrix<f64>,
    l_y: DMatrix<f64>,
    za: DVector<f64>,
    rho_y: f64,
    cy: UnifiedConstants,
    /// log pi - (log|Q D Q'| + log|Sigma_Y|)/2 + p4_X + p4_Y
    offset: f64,
}

/// Quantities of one (observation, cluster) pair.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PairEval {
    pub h: f64,
    pub delta_x: f64,
    pub rho_x: f64,
    pub delta_y: f64,
    pub rho_y: f64,
}

impl ClusterCache {
    pub fn new(c: &ClusterParams, pi: f64, w_sqrt: &DMatrix<f64>) -> Result<Self> {
        let x = &c.x;
        let y = &c.y;
        let rx = x.mu_x.len();
        let mu_t = w_sqrt * &x.mu_x;
        let al_t = w_sqrt * &x.alpha_x;
        let inv_a: Vec<f64> = x.a.iter().map(|a| 1.0 / a).collect();
        let inv_b = 1.0 / x.b;
        let al_u = x.u.transpose() * &al_t;
        let perp = &al_t - &x.u * &al_u;
        let rho_x = al_u.iter().zip(&inv_a).map(|(v, ia)| v * v * ia).sum::<f64>()
            + perp.norm_squared() * inv_b;
        let log_det_m = x.a.iter().map(|a| a.ln()).sum::<f64>() + (rx - x.d) as f64 * x.b.ln();

        let chol = y
            .sigma_y
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Model("response scatter is not positive definite".into()))?;
        let l_y = chol.unpack();
        let log_det_y = 2.0 * l_y.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let za = l_y.solve_lower_triangular(&y.alpha_y).expect("nonsingular factor");
        let rho_y = za.norm_squared();
        let cx = unified_constants(x.family_x, rx);
        let cy = unified_constants(y.family_y, y.alpha_y.len());
        let offset = pi.ln() - 0.5 * (log_det_m + log_det_y) + cx.p4 + cy.p4;
        Ok(Self {
            mu_t,
            u: x.u.clone(),
            inv_a,
            inv_b,
            al_t,
            al_u,
            rho_x,
            cx,
            gamma_star: y.gamma_star.clone(),
            l_y,
            za,
            rho_y,
            cy,
            offset,
        })
    }

    /// H value and Mahalanobis terms for whitened covariate `z`, coefficients `c_y`
    /// and regressor `cstar`.
    pub fn eval(&self, z: &DVector<f64>, c_y: &DVector<f64>, cstar: &DVector<f64>) -> Result<PairEval> {
        let yv = z - &self.mu_t;
        let uy = self.u.transpose() * &yv;
        let perp = &yv - &self.u * &uy;
        let mut delta_x = perp.norm_squared() * self.inv_b;
        // perp is orthogonal to U, so perp . al_t only sees the complement part of al_t
        let mut lin_x = perp.dot(&self.al_t) * self.inv_b;
        for j in 0..uy.len() {
            delta_x += uy[j] * uy[j] * self.inv_a[j];
            lin_x += uy[j] * self.al_u[j] * self.inv_a[j];
        }
        let r = c_y - &self.gamma_star * cstar;
        let zr = self.l_y.solve_lower_triangular(&r).expect("nonsingular factor");
        let delta_y = zr.norm_squared();
        let lin_y = zr.dot(&self.za);
        let bx = self.cx.bessel_block(delta_x, self.rho_x)?;
        let by = self.cy.bessel_block(delta_y, self.rho_y)?;
        Ok(PairEval {
            h: self.offset + lin_x + bx + lin_y + by,
            delta_x,
            rho_x: self.rho_x,
            delta_y,
            rho_y: self.rho_y,
        })
    }

    pub fn moments_x(&self, p: &PairEval) -> Result<(f64, f64, f64)> {
        let (a, b, l) = self.cx.conditional(p.delta_x, p.rho_x);
        let m = latent_moments(a, b, l)?;
        Ok((m.e_w, m.e_inv_w, m.e_log_w))
    }

    pub fn moments_y(&self, p: &PairEval) -> Result<(f64, f64, f64)> {
        let (a, b, l) = self.cy.conditional(p.delta_y, p.rho_y);
        let m = latent_moments(a, b, l)?;
        Ok((m.e_w, m.e_inv_w, m.e_log_w))
    }
}

pub(crate) fn caches(model: &ClusterModel, data: &FunctionalDataset) -> Result<Vec<ClusterCache>> {
    model
        .clusters
        .iter()
        .zip(&model.pi)
        .map(|(c, &pi)| ClusterCache::new(c, pi, &data.w_x_sqrt))
        .collect()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// log pi_k + log f_k + log g_k differs from H_k by this constant.
fn density_shift(data: &FunctionalDataset, prep: &Prepared) -> f64 {
    -0.5 * (data.rx() + data.ry()) as f64 * (2.0 * PI).ln() + 0.5 * prep.log_det_w
}

/// H_k for one observation.
pub fn h_k(
    c_y: &DVector<f64>,
    c_x: &DVector<f64>,
    cluster: &ClusterParams,
    pi_k: f64,
    data: &FunctionalDataset,
) -> Result<f64> {
    let cache = ClusterCache::new(cluster, pi_k, &data.w_x_sqrt)?;
    let z = &data.w_x_sqrt * c_x;
    let mut cstar = DVector::from_element(c_x.len() + 1, 1.0);
    cstar.rows_mut(0, c_x.len()).copy_from(&(&data.w_x * c_x));
    Ok(cache.eval(&z, c_y, &cstar)?.h)
}

/// n x K matrix of H values.
pub fn h_values(data: &FunctionalDataset, model: &ClusterModel) -> Result<DMatrix<f64>> {
    let prep = Prepared::new(data);
    let cs = caches(model, data)?;
    let n = data.n();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let z = row(&prep.z, i);
            let cy = row(&data.c_y, i);
            let cstar = row(&prep.cstar, i);
            cs.iter().map(|c| c.eval(&z, &cy, &cstar).map(|p| p.h)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(n, model.k, |i, k| rows[i][k]))
}

/// Observed-data log-likelihood.
pub fn log_likelihood(data: &FunctionalDataset, model: &ClusterModel) -> Result<f64> {
    let h = h_values(data, model)?;
    let prep = Prepared::new(data);
    let shift = density_shift(data, &prep);
    let mut total = 0.0;
    for i in 0..h.nrows() {
        let r: Vec<f64> = h.row(i).iter().copied().collect();
        total += log_sum_exp(&r) + shift;
    }
    Ok(total)
}

type RowOut = (Vec<f64>, [Vec<f64>; 6], f64);

/// Posterior probabilities by the ratio form 1 / sum_l exp(H_l - H_k) and the
/// conditional moments of W_X and W_Y under each cluster.
pub fn e_step(data: &FunctionalDataset, model: &ClusterModel) -> Result<ESuffStats> {
    let prep = Prepared::new(data);
    e_step_prepared(data, &prep, model, None)
}

/// With `fixed_t`, the posterior probabilities are not recomputed (used at initialization).
pub(crate) fn e_step_prepared(
    data: &FunctionalDataset,
    prep: &Prepared,
    model: &ClusterModel,
    fixed_t: Option<&DMatrix<f64>>,
) -> Result<ESuffStats> {
    let cs = caches(model, data)?;
    let n = data.n();
    let k = model.k;
    let rows: Vec<RowOut> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<RowOut> {
            let z = row(&prep.z, i);
            let cy = row(&data.c_y, i);
            let cstar = row(&prep.cstar, i);
            let mut h = Vec::with_capacity(k);
            let mut mom: [Vec<f64>; 6] = Default::default();
            for (kk, c) in cs.iter().enumerate() {
                let p = c.eval(&z, &cy, &cstar).map_err(|e| Error::Numerical {
                    i,
                    k: kk,
                    msg: e.to_string(),
                })?;
                if !p.h.is_finite() {
                    return Err(Error::Numerical { i, k: kk, msg: format!("H = {}", p.h) });
                }
                let numerr = |e: Error| Error::Numerical { i, k: kk, msg: e.to_string() };
                let (w, wi, lw) = c.moments_x(&p).map_err(numerr)?;
                let (vw, vwi, vlw) = c.moments_y(&p).map_err(numerr)?;
                for (slot, v) in mom.iter_mut().zip([w, wi, lw, vw, vwi, vlw]) {
                    if !v.is_finite() {
                        return Err(Error::Numerical { i, k: kk, msg: "non-finite latent moment".into() });
                    }
                    slot.push(v);
                }
                h.push(p.h);
            }
            let lse = log_sum_exp(&h);
            let t: Vec<f64> = match fixed_t {
                Some(ft) => ft.row(i).iter().copied().collect(),
                None => h.iter().map(|hk| 1.0 / h.iter().map(|hl| (hl - hk).exp()).sum::<f64>()).collect(),
            };
            Ok((t, mom, lse))
        })
        .collect::<Result<_>>()?;
    let shift = density_shift(data, prep);
    let mut loglik = 0.0;
    for r in &rows {
        loglik += r.2 + shift;
    }
    let pick = |j: usize| DMatrix::from_fn(n, k, |i, kk| rows[i].1[j][kk]);
    Ok(ESuffStats {
        t: DMatrix::from_fn(n, k, |i, kk| rows[i].0[kk]),
        w_x: pick(0),
        wi_x: pick(1),
        lw_x: pick(2),
        w_y: pick(3),
        wi_y: pick(4),
        lw_y: pick(5),
        loglik,
    })
}
