#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skewcwm::em::{DimMode, FitConfig};
use skewcwm::funbasis::FunctionalDataset;
use skewcwm::model::{ClusterModel, ClusterParams, ParsimonyConfig, XClusterParams, YClusterParams};
use skewcwm::skewdist::{FamilyKind, SkewFamily, SkewParams};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Well-conditioned random SPD matrix.
pub fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| uniform(rng, -1.0, 1.0));
    &a * a.transpose() + DMatrix::identity(d, d) * uniform(rng, 0.3, 1.5)
}

pub fn random_vec(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(d, |_, _| uniform(rng, -scale, scale))
}

pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn slice(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

/// Concentration drawn from a range where all three laws are well behaved.
pub fn random_family(rng: &mut ChaCha8Rng, kind: FamilyKind, d: usize) -> SkewFamily {
    match kind {
        FamilyKind::VG => SkewFamily::VG(d as f64 / 2.0 + uniform(rng, 0.3, 3.0)),
        FamilyKind::ST => SkewFamily::ST(uniform(rng, 2.5, 15.0)),
        FamilyKind::NIG => SkewFamily::NIG(uniform(rng, 0.3, 3.0)),
    }
}

pub fn random_params(rng: &mut ChaCha8Rng, d: usize, kind: FamilyKind) -> SkewParams {
    let mu = random_vec(rng, d, 2.0);
    let alpha = random_vec(rng, d, 1.0);
    let sigma = random_spd(rng, d);
    let family = random_family(rng, kind, d);
    SkewParams::new(mu, alpha, sigma, family).unwrap()
}

pub const KINDS: [FamilyKind; 3] = [FamilyKind::VG, FamilyKind::ST, FamilyKind::NIG];

/// Random SPD metric playing the role of a Gram matrix.
pub fn random_metric(rng: &mut ChaCha8Rng, r: usize) -> DMatrix<f64> {
    let m = random_spd(rng, r);
    &m / m.trace() * r as f64
}

/// A random K-cluster model with the given shapes and families; parameters are
/// loose enough that every cluster gets some posterior mass on random data.
pub fn random_model(
    rng: &mut ChaCha8Rng,
    k: usize,
    rx: usize,
    ry: usize,
    fx: FamilyKind,
    fy: FamilyKind,
) -> ClusterModel {
    let raw: Vec<f64> = (0..k).map(|_| uniform(rng, 0.5, 1.5)).collect();
    let tot: f64 = raw.iter().sum();
    let clusters = (0..k)
        .map(|_| {
            let d = 1 + (rng.random::<u64>() as usize) % (rx - 1);
            let q = random_spd(rng, rx).symmetric_eigen().eigenvectors;
            let u = q.columns(0, d).into_owned();
            let b = uniform(rng, 0.2, 0.8);
            let mut a: Vec<f64> = (0..d).map(|_| uniform(rng, 1.0, 4.0)).collect();
            a.sort_by(|x, y| y.partial_cmp(x).unwrap());
            ClusterParams {
                x: XClusterParams {
                    mu_x: random_vec(rng, rx, 1.0),
                    alpha_x: random_vec(rng, rx, 0.7),
                    u,
                    a,
                    b,
                    d,
                    family_x: random_family(rng, fx, rx),
                },
                y: YClusterParams {
                    gamma_star: DMatrix::from_fn(ry, rx + 1, |_, _| uniform(rng, -1.0, 1.0)),
                    alpha_y: random_vec(rng, ry, 0.7),
                    sigma_y: random_spd(rng, ry),
                    family_y: random_family(rng, fy, ry),
                },
            }
        })
        .collect();
    ClusterModel {
        k,
        pi: raw.iter().map(|r| r / tot).collect(),
        clusters,
        parsimony: ParsimonyConfig::default(),
    }
}

/// Random coefficient data (not drawn from any model).
pub fn random_data(rng: &mut ChaCha8Rng, n: usize, rx: usize, ry: usize) -> FunctionalDataset {
    let c_x = DMatrix::from_fn(n, rx, |_, _| uniform(rng, -2.0, 2.0));
    let c_y = DMatrix::from_fn(n, ry, |_, _| uniform(rng, -2.0, 2.0));
    let w = random_metric(rng, rx);
    FunctionalDataset::from_parts(c_x, c_y, w).unwrap()
}

/// Draws n observations from a model; returns the data and generating labels.
pub fn sample_model(rng: &mut ChaCha8Rng, model: &ClusterModel, w: &DMatrix<f64>, n: usize) -> (FunctionalDataset, Vec<usize>) {
    use skewcwm::skewdist::sample_skew_with;
    let rx = model.rx();
    let ry = model.ry();
    let w_sqrt = skewcwm::funbasis::sqrt_psd(w).unwrap();
    let w_isqrt = w_sqrt.clone().try_inverse().unwrap();
    let mut c_x = DMatrix::zeros(n, rx);
    let mut c_y = DMatrix::zeros(n, ry);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = model.k - 1;
        for (j, p) in model.pi.iter().enumerate() {
            acc += p;
            if u < acc {
                k = j;
                break;
            }
        }
        labels.push(k);
        let cl = &model.clusters[k];
        let sx = &w_isqrt * cl.x.whitened_scatter() * &w_isqrt;
        let sx = (&sx + sx.transpose()) * 0.5;
        let px = SkewParams::new(cl.x.mu_x.clone(), cl.x.alpha_x.clone(), sx, cl.x.family_x).unwrap();
        let cx = sample_skew_with(&px, 1, rng).unwrap().row(0).transpose();
        let mut cstar = DVector::from_element(rx + 1, 1.0);
        cstar.rows_mut(0, rx).copy_from(&(w * &cx));
        let py = SkewParams::new(&cl.y.gamma_star * cstar, cl.y.alpha_y.clone(), cl.y.sigma_y.clone(), cl.y.family_y).unwrap();
        let cy = sample_skew_with(&py, 1, rng).unwrap().row(0).transpose();
        c_x.set_row(i, &cx.transpose());
        c_y.set_row(i, &cy.transpose());
    }
    (FunctionalDataset::from_parts(c_x, c_y, w.clone()).unwrap(), labels)
}

pub fn config(fx: FamilyKind, fy: FamilyKind, d: usize) -> FitConfig {
    let mut cfg = FitConfig::new(fx, fy);
    cfg.dims = DimMode::Fixed(d);
    cfg
}

/// Closed-form log density with the Bessel function taken from its integral
/// representation, independent of the crate's special functions.
pub fn oracle_log_pdf(v: &DVector<f64>, mu: &DVector<f64>, alpha: &DVector<f64>, sigma: &DMatrix<f64>, family: SkewFamily) -> f64 {
    let lk = |l: f64, x: f64| oracle::log_bessel_k_quad(l, x);
    let (v, mu, al, s) = (slice(v), slice(mu), slice(alpha), rows(sigma));
    match family {
        SkewFamily::VG(p) => oracle::log_pdf_vg(&v, &mu, &al, &s, p, &lk),
        SkewFamily::ST(n) => oracle::log_pdf_st(&v, &mu, &al, &s, n, &lk),
        SkewFamily::NIG(k) => oracle::log_pdf_nig(&v, &mu, &al, &s, k, &lk),
    }
}

/// Covariate scatter in coefficient coordinates.
pub fn covariate_sigma(data: &FunctionalDataset, x: &XClusterParams) -> DMatrix<f64> {
    let s_inv = data.w_x_sqrt.clone().try_inverse().unwrap();
    let m = &s_inv * x.whitened_scatter() * &s_inv;
    (&m + m.transpose()) * 0.5
}

/// n x K matrix of log pi_k + log f_X + log f_Y, from the defining densities.
pub fn oracle_log_joint(data: &FunctionalDataset, model: &ClusterModel) -> DMatrix<f64> {
    let rx = data.rx();
    DMatrix::from_fn(data.n(), model.k, |i, k| {
        let cl = &model.clusters[k];
        let cx = data.c_x.row(i).transpose();
        let cy = data.c_y.row(i).transpose();
        let mut cstar = DVector::from_element(rx + 1, 1.0);
        cstar.rows_mut(0, rx).copy_from(&(&data.w_x * &cx));
        let fx = oracle_log_pdf(&cx, &cl.x.mu_x, &cl.x.alpha_x, &covariate_sigma(data, &cl.x), cl.x.family_x);
        let fy = oracle_log_pdf(&cy, &(&cl.y.gamma_star * cstar), &cl.y.alpha_y, &cl.y.sigma_y, cl.y.family_y);
        model.pi[k].ln() + fx + fy
    })
}

/// Posterior probabilities and log-likelihood from the definitional ratio.
pub fn oracle_posterior(data: &FunctionalDataset, model: &ClusterModel) -> (DMatrix<f64>, f64) {
    let lj = oracle_log_joint(data, model);
    let mut t = DMatrix::zeros(lj.nrows(), lj.ncols());
    let mut ll = 0.0;
    for i in 0..lj.nrows() {
        let m = lj.row(i).max();
        let s: f64 = lj.row(i).iter().map(|v| (v - m).exp()).sum();
        ll += m + s.ln();
        for k in 0..lj.ncols() {
            t[(i, k)] = (lj[(i, k)] - m).exp() / s;
        }
    }
    (t, ll)
}

/// Random model with a random family pair.
pub fn random_instance(rng: &mut ChaCha8Rng, k: usize, rx: usize, ry: usize, n: usize) -> (FunctionalDataset, ClusterModel) {
    let fx = KINDS[(rng.random::<u64>() % 3) as usize];
    let fy = KINDS[(rng.random::<u64>() % 3) as usize];
    let model = random_model(rng, k, rx, ry, fx, fy);
    let w = random_metric(rng, rx);
    let (data, _) = sample_model(rng, &model, &w, n);
    (data, model)
}

/// Parameters of one cluster that enter the expected complete-data
/// log-likelihood through the normal kernels, flattened as
/// (mu_X, alpha_X, Gamma* row-major, alpha_Y).
pub fn location_vector(model: &ClusterModel, k: usize) -> Vec<f64> {
    let cl = &model.clusters[k];
    let mut v = slice(&cl.x.mu_x);
    v.extend(slice(&cl.x.alpha_x));
    v.extend(rows(&cl.y.gamma_star).into_iter().flatten());
    v.extend(slice(&cl.y.alpha_y));
    v
}

/// Expected complete-data log-likelihood of cluster k as a function of the
/// flattened location vector, with scatter matrices fixed at `model`'s values.
/// Terms of the mixing laws do not involve these parameters and are left out.
pub fn q_cluster(data: &FunctionalDataset, stats: &skewcwm::em::ESuffStats, model: &ClusterModel, k: usize, theta: &[f64]) -> f64 {
    let rx = data.rx();
    let ry = data.ry();
    let mu = DVector::from_column_slice(&theta[..rx]);
    let al = DVector::from_column_slice(&theta[rx..2 * rx]);
    let g = DMatrix::from_row_slice(ry, rx + 1, &theta[2 * rx..2 * rx + ry * (rx + 1)]);
    let ay = DVector::from_column_slice(&theta[2 * rx + ry * (rx + 1)..]);
    let sx = covariate_sigma(data, &model.clusters[k].x);
    let sy = &model.clusters[k].y.sigma_y;
    let (sxi, syi) = (sx.clone().try_inverse().unwrap(), sy.clone().try_inverse().unwrap());
    let (ldx, ldy) = (sx.determinant().ln(), sy.determinant().ln());
    let mut q = 0.0;
    for i in 0..data.n() {
        let t = stats.t[(i, k)];
        let cx = data.c_x.row(i).transpose();
        let dx = &cx - &mu;
        let kx = stats.wi_x[(i, k)] * dx.dot(&(&sxi * &dx)) - 2.0 * dx.dot(&(&sxi * &al)) + stats.w_x[(i, k)] * al.dot(&(&sxi * &al));
        let mut cstar = DVector::from_element(rx + 1, 1.0);
        cstar.rows_mut(0, rx).copy_from(&(&data.w_x * &cx));
        let dy = data.c_y.row(i).transpose() - &g * cstar;
        let ky = stats.wi_y[(i, k)] * dy.dot(&(&syi * &dy)) - 2.0 * dy.dot(&(&syi * &ay)) + stats.w_y[(i, k)] * ay.dot(&(&syi * &ay));
        q += t * (-0.5 * (ldx + kx) - 0.5 * (ldy + ky));
    }
    q
}

/// Largest central-difference gradient component of `q_cluster` at the
/// model's own location vector, and the value there.
pub fn q_gradient_max(data: &FunctionalDataset, stats: &skewcwm::em::ESuffStats, model: &ClusterModel, k: usize) -> (f64, f64) {
    let theta = location_vector(model, k);
    let q0 = q_cluster(data, stats, model, k, &theta);
    let mut worst: f64 = 0.0;
    for j in 0..theta.len() {
        let h = 1e-5 * theta[j].abs().max(1.0);
        let mut up = theta.clone();
        up[j] += h;
        let mut dn = theta.clone();
        dn[j] -= h;
        let g = (q_cluster(data, stats, model, k, &up) - q_cluster(data, stats, model, k, &dn)) / (2.0 * h);
        worst = worst.max(g.abs());
    }
    (worst, q0)
}
