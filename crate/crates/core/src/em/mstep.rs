use super::estep::ESuffStats;
use super::fit::cattell_select;
use super::{FitConfig, Prepared};
use crate::error::{Error, Result};
use crate::funbasis::FunctionalDataset;
use crate::model::{
    sigma_y_project, ClusterModel, ClusterParams, FlmVariant, XClusterParams, YClusterParams,
};
use crate::skewdist::special::{digamma_unchecked, trigamma_unchecked};
use crate::skewdist::FamilyKind;
use log::warn;
use nalgebra::{ColPivQR, DMatrix, DVector, SymmetricEigen};

/// How d_k is obtained at an M-step.
#[derive(Clone, Debug, PartialEq)]
pub enum DimRule {
    Fixed(Vec<usize>),
    Cattell(f64),
}

/// Scalar stationarity equations of the concentration updates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConcentrationEq {
    /// log psi + 1 - digamma(psi) + mean(lw) - mean(w) = 0
    VG { mean_w: f64, mean_lw: f64 },
    /// log(nu/2) + 1 - digamma(nu/2) - mean(lw) - mean(wi) = 0
    ST { mean_wi: f64, mean_lw: f64 },
}

const BRACKET: (f64, f64) = (1e-6, 1e6);

/// Root of a concentration equation by bisection on [1e-6, 1e6] with Newton steps
/// kept inside the bracket. Without a sign change the nearer end is returned.
pub fn solve_concentration(eq: ConcentrationEq) -> f64 {
    // g(x) = log x - digamma(x) + c, decreasing in x; the parameter is s * x.
    let (c, s) = match eq {
        ConcentrationEq::VG { mean_w, mean_lw } => (1.0 + mean_lw - mean_w, 1.0),
        ConcentrationEq::ST { mean_wi, mean_lw } => (1.0 - mean_lw - mean_wi, 2.0),
    };
    let g = |x: f64| x.ln() - digamma_unchecked(x) + c;
    let dg = |x: f64| 1.0 / x - trigamma_unchecked(x);
    let (mut lo, mut hi) = (BRACKET.0 / s, BRACKET.1 / s);
    let (glo, ghi) = (g(lo), g(hi));
    if !(glo > 0.0) {
        warn!("concentration equation has no root in the bracket (g(lo) = {glo:e}); clamping");
        return BRACKET.0;
    }
    if !(ghi < 0.0) {
        warn!("concentration equation has no root in the bracket (g(hi) = {ghi:e}); clamping");
        return BRACKET.1;
    }
    let mut x = (lo * hi).sqrt();
    for _ in 0..300 {
        let gx = g(x);
        if gx == 0.0 {
            break;
        }
        if gx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - gx / dg(x);
        let next = if newton > lo && newton < hi { newton } else { (lo * hi).sqrt() };
        if (next - x).abs() <= 1e-10 * x || (hi - lo) <= 1e-14 * hi {
            x = next;
            break;
        }
        x = next;
    }
    s * x
}

/// Weighted column sums of `m` with weights `wt` (length n).
fn wsum(m: &DMatrix<f64>, wt: &[f64]) -> DVector<f64> {
    let mut out = DVector::zeros(m.ncols());
    for (i, w) in wt.iter().enumerate() {
        if *w != 0.0 {
            out.axpy(*w, &m.row(i).transpose(), 1.0);
        }
    }
    out
}

/// sum_i wt_i a_i b_i' for rows a_i of `a`, b_i of `b`.
fn wcross(a: &DMatrix<f64>, b: &DMatrix<f64>, wt: &[f64]) -> DMatrix<f64> {
    let mut scaled = a.clone();
    for (i, w) in wt.iter().enumerate() {
        scaled.row_mut(i).scale_mut(*w);
    }
    scaled.transpose() * b
}

/// Solves X G = rhs for symmetric PSD G with Jacobi scaling, pivoted QR and a
/// pseudo-inverse fallback.
fn solve_right(g: &DMatrix<f64>, rhs: &DMatrix<f64>) -> DMatrix<f64> {
    let p = g.nrows();
    let scale = DVector::from_fn(p, |j, _| {
        let v = g[(j, j)];
        if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 }
    });
    let ds = DMatrix::from_diagonal(&scale);
    let gs = &ds * g * &ds;
    let bs = &ds * rhs.transpose();
    let qr = ColPivQR::new(gs.clone());
    let r = qr.r();
    let diag = r.diagonal().map(f64::abs);
    let ok = diag.min() > 1e-13 * diag.max();
    let xs = if ok { qr.solve(&bs) } else { None };
    let xs = xs.unwrap_or_else(|| {
        warn!("regression system is rank deficient; using the pseudo-inverse");
        let eps = 1e-13 * gs.amax().max(1e-300);
        gs.pseudo_inverse(eps).expect("svd") * &bs
    });
    (ds * xs).transpose()
}

/// (1/n_k) sum t [wi d d' - d a' - a d' + w a a'] for residual rows d, written
/// as sum t [wi (d - a/wi)(d - a/wi)' + (w - 1/wi) a a'] so that each term is
/// positive semidefinite (w wi >= 1) and no cancellation can break definiteness.
fn skew_scatter(d: &DMatrix<f64>, t: &[f64], w: &[f64], wi: &[f64], alpha: &DVector<f64>) -> DMatrix<f64> {
    let n_k: f64 = t.iter().sum();
    let mut e = d.clone();
    let mut excess = 0.0;
    for (i, mut r) in e.row_iter_mut().enumerate() {
        let wt = t[i] * wi[i];
        if wt > 0.0 {
            r -= alpha.transpose() / wi[i];
            r *= wt.sqrt();
            excess += t[i] * (w[i] - 1.0 / wi[i]).max(0.0);
        } else {
            r.fill(0.0);
        }
    }
    let s = (e.transpose() * &e + alpha * alpha.transpose() * excess) / n_k;
    (&s + s.transpose()) * 0.5
}

struct XStep {
    mu: DVector<f64>,
    alpha: DVector<f64>,
    eigvals: Vec<f64>,
    eigvecs: DMatrix<f64>,
    trace: f64,
}

fn x_side(
    c: &DMatrix<f64>,
    w_sqrt: &DMatrix<f64>,
    t: &[f64],
    w: &[f64],
    wi: &[f64],
) -> XStep {
    let n_k: f64 = t.iter().sum();
    let tw: Vec<f64> = t.iter().zip(w).map(|(a, b)| a * b).collect();
    let twi: Vec<f64> = t.iter().zip(wi).map(|(a, b)| a * b).collect();
    let a_sum: f64 = tw.iter().sum();
    let b_sum: f64 = twi.iter().sum();
    let sc = wsum(c, t);
    let sci = wsum(c, &twi);
    let den = a_sum * b_sum - n_k * n_k;
    let (mu, alpha) = if den <= 1e-12 * a_sum * b_sum {
        (sc / n_k, DVector::zeros(c.ncols()))
    } else {
        let mu = (sci * a_sum - &sc * n_k) / den;
        let alpha = (sc - &mu * n_k) / a_sum;
        (mu, alpha)
    };
    let mut d = c.clone();
    for mut r in d.row_iter_mut() {
        r -= mu.transpose();
    }
    let s = skew_scatter(&d, t, w, wi, &alpha);
    let st = w_sqrt * s * w_sqrt;
    let st = (&st + st.transpose()) * 0.5;
    let trace = st.trace();
    let eig = SymmetricEigen::new(st);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap().then(i.cmp(&j)));
    let eigvals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigvecs = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, j| {
        eig.eigenvectors[(r, order[j])]
    });
    XStep { mu, alpha, eigvals, eigvecs, trace }
}

struct YStep {
    gamma_star: DMatrix<f64>,
    alpha: DVector<f64>,
    scatter: DMatrix<f64>,
}

fn y_side(cy: &DMatrix<f64>, cstar: &DMatrix<f64>, t: &[f64], w: &[f64], wi: &[f64]) -> YStep {
    let n_k: f64 = t.iter().sum();
    let tw: Vec<f64> = t.iter().zip(w).map(|(a, b)| a * b).collect();
    let twi: Vec<f64> = t.iter().zip(wi).map(|(a, b)| a * b).collect();
    let a_sum: f64 = tw.iter().sum();
    let b_sum: f64 = twi.iter().sum();
    let sy = wsum(cy, t);
    let ss = wsum(cstar, t);
    let degenerate = a_sum * b_sum - n_k * n_k <= 1e-12 * a_sum * b_sum;
    let mut g = wcross(cstar, cstar, &twi);
    let mut rhs = wcross(cy, cstar, &twi);
    if !degenerate {
        g -= &ss * ss.transpose() / a_sum;
        rhs -= &sy * ss.transpose() / a_sum;
    }
    let gamma_star = solve_right(&g, &rhs);
    let alpha = if degenerate {
        DVector::zeros(cy.ncols())
    } else {
        (&sy - &gamma_star * &ss) / a_sum
    };
    let r = cy - cstar * gamma_star.transpose();
    let scatter = skew_scatter(&r, t, w, wi, &alpha);
    YStep { gamma_star, alpha, scatter }
}

fn concentration(kind: FamilyKind, t: &[f64], w: &[f64], wi: &[f64], lw: &[f64]) -> f64 {
    let n: f64 = t.iter().sum();
    let mean = |v: &[f64]| t.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / n;
    match kind {
        FamilyKind::VG => solve_concentration(ConcentrationEq::VG { mean_w: mean(w), mean_lw: mean(lw) }),
        FamilyKind::ST => solve_concentration(ConcentrationEq::ST { mean_wi: mean(wi), mean_lw: mean(lw) }),
        FamilyKind::NIG => 1.0 / mean(w),
    }
}

fn col(m: &DMatrix<f64>, k: usize) -> Vec<f64> {
    m.column(k).iter().copied().collect()
}

/// Concentration updates of one side, tied or per cluster.
/// Smallest admissible VG concentration in dimension `dim`. Below d/2 + 1 the
/// density has an unbounded peak at its location (or E[1/W] diverges there) and
/// EM collapses onto single observations; the concentration objective is concave,
/// so clamping the root is the constrained maximizer.
pub fn vg_min_concentration(dim: usize) -> f64 {
    dim as f64 / 2.0 + 1.0
}

fn side_concentrations(kind: FamilyKind, tied: bool, st: &ESuffStats, x_side: bool, dim: usize) -> Vec<f64> {
    let (w, wi, lw) = if x_side {
        (&st.w_x, &st.wi_x, &st.lw_x)
    } else {
        (&st.w_y, &st.wi_y, &st.lw_y)
    };
    let k = st.t.ncols();
    let admissible = |v: f64| if kind == FamilyKind::VG { v.max(vg_min_concentration(dim)) } else { v };
    if tied {
        let flat = |m: &DMatrix<f64>| m.as_slice().to_vec();
        let v = concentration(kind, &flat(&st.t), &flat(w), &flat(wi), &flat(lw));
        vec![admissible(v); k]
    } else {
        (0..k)
            .map(|c| admissible(concentration(kind, &col(&st.t, c), &col(w, c), &col(wi, c), &col(lw, c))))
            .collect()
    }
}

/// Parameter updates given posterior weights and latent moments.
pub fn m_step(
    data: &FunctionalDataset,
    stats: &ESuffStats,
    cfg: &FitConfig,
    dims: &DimRule,
) -> Result<ClusterModel> {
    let prep = Prepared::new(data);
    m_step_prepared(data, &prep, stats, cfg, dims, None)
}

/// `init` replaces the skewness vectors by a constant vector and the concentrations
/// by a fixed value (the starting point of EM).
pub(crate) fn m_step_prepared(
    data: &FunctionalDataset,
    prep: &Prepared,
    stats: &ESuffStats,
    cfg: &FitConfig,
    dims: &DimRule,
    init: Option<(f64, f64)>,
) -> Result<ClusterModel> {
    let n = data.n() as f64;
    let k = stats.t.ncols();
    let rx = data.rx();
    let ry = data.ry();
    if rx < 2 {
        return Err(Error::Domain("covariate side needs at least two coefficients".into()));
    }
    let n_k = stats.n_k();
    for (c, &nk) in n_k.iter().enumerate() {
        if !(nk >= 2.0) {
            return Err(Error::EmptyCluster { k: c, n_k: nk });
        }
    }
    let pi: Vec<f64> = n_k.iter().map(|nk| nk / n).collect();

    let mut xs = Vec::with_capacity(k);
    let mut ys = Vec::with_capacity(k);
    for c in 0..k {
        let t = col(&stats.t, c);
        xs.push(x_side(&data.c_x, &data.w_x_sqrt, &t, &col(&stats.w_x, c), &col(&stats.wi_x, c)));
        ys.push(y_side(&data.c_y, &prep.cstar, &t, &col(&stats.w_y, c), &col(&stats.wi_y, c)));
    }

    let d: Vec<usize> = match dims {
        DimRule::Fixed(d) => {
            if d.len() != k {
                return Err(Error::Domain("one dimension per cluster required".into()));
            }
            d.iter().map(|&v| v.clamp(1, rx - 1)).collect()
        }
        DimRule::Cattell(thr) => xs.iter().map(|x| cattell_select(&x.eigvals, *thr)).collect(),
    };

    // Eigenvalue pooling per variant.
    let top: Vec<f64> = xs.iter().zip(&d).map(|(x, &dk)| x.eigvals[..dk].iter().sum()).collect();
    let b_own: Vec<f64> = (0..k).map(|c| (xs[c].trace - top[c]) / (rx - d[c]) as f64).collect();
    let variant = cfg.parsimony.flm_variant;
    let b: Vec<f64> = if variant.common_b() {
        let num: f64 = (0..k).map(|c| pi[c] * (xs[c].trace - top[c])).sum();
        let den: f64 = (0..k).map(|c| pi[c] * (rx - d[c]) as f64).sum();
        vec![num / den; k]
    } else {
        b_own
    };
    let common_a = (0..k).map(|c| pi[c] * top[c]).sum::<f64>()
        / (0..k).map(|c| pi[c] * d[c] as f64).sum::<f64>();
    let a: Vec<Vec<f64>> = (0..k)
        .map(|c| match variant {
            FlmVariant::AkjBkQkDk | FlmVariant::AkjBQkDk => xs[c].eigvals[..d[c]].to_vec(),
            FlmVariant::AkBkQkDk | FlmVariant::AkBQkDk => vec![top[c] / d[c] as f64; d[c]],
            FlmVariant::ABkQkDk | FlmVariant::ABQkDk => vec![common_a; d[c]],
        })
        .collect();
    for c in 0..k {
        let floor = 1e-12 * xs[c].trace.abs().max(1e-300);
        if !(b[c] > floor) || a[c].iter().any(|&v| !(v > floor)) {
            return Err(Error::Numerical {
                i: 0,
                k: c,
                msg: format!("degenerate covariate eigenvalues (b = {:e})", b[c]),
            });
        }
    }

    let scatters: Vec<DMatrix<f64>> = ys.iter().map(|y| y.scatter.clone()).collect();
    let sigma_y = sigma_y_project(&scatters, &n_k, cfg.parsimony.sigma_y_family)?;

    let (conc_x, conc_y) = match init {
        Some((_, v)) => {
            let floor = |kind: FamilyKind, dim: usize| if kind == FamilyKind::VG { v.max(vg_min_concentration(dim)) } else { v };
            (vec![floor(cfg.family_x, rx); k], vec![floor(cfg.family_y, ry); k])
        }
        None => (
            side_concentrations(cfg.family_x, cfg.parsimony.common_psi_x, stats, true, rx),
            side_concentrations(cfg.family_y, cfg.parsimony.common_psi_y, stats, false, ry),
        ),
    };

    let clusters = (0..k)
        .map(|c| {
            let (alpha_x, alpha_y) = match init {
                Some((a0, _)) => (DVector::from_element(rx, a0), DVector::from_element(ry, a0)),
                None => (xs[c].alpha.clone(), ys[c].alpha.clone()),
            };
            ClusterParams {
                x: XClusterParams {
                    mu_x: xs[c].mu.clone(),
                    alpha_x,
                    u: xs[c].eigvecs.columns(0, d[c]).into_owned(),
                    a: a[c].clone(),
                    b: b[c],
                    d: d[c],
                    family_x: cfg.family_x.with(conc_x[c]),
                },
                y: YClusterParams {
                    gamma_star: ys[c].gamma_star.clone(),
                    alpha_y,
                    sigma_y: sigma_y[c].clone(),
                    family_y: cfg.family_y.with(conc_y[c]),
                },
            }
        })
        .collect();
    Ok(ClusterModel { k, pi, clusters, parsimony: cfg.parsimony })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skewdist::digamma;

    #[test]
    fn vg_population_root() {
        let rhs = digamma(2.0).unwrap() - 2f64.ln() - 1.0;
        assert!((rhs + 1.270363).abs() < 1e-6);
        let psi = solve_concentration(ConcentrationEq::VG { mean_w: 1.0, mean_lw: rhs + 1.0 });
        assert!((psi - 2.0).abs() < 1e-8, "{psi}");
    }

    #[test]
    fn st_population_root() {
        // InvGamma(2, 2): E[1/W] = 1, E[log W] = log 2 - digamma(2)
        let lw = 2f64.ln() - digamma(2.0).unwrap();
        let nu = solve_concentration(ConcentrationEq::ST { mean_wi: 1.0, mean_lw: lw });
        assert!((nu - 4.0).abs() < 1e-8, "{nu}");
    }

    #[test]
    fn clamps_without_root() {
        // log psi - digamma(psi) > 0 always, so c >= 0 has no root
        let psi = solve_concentration(ConcentrationEq::VG { mean_w: 1.0, mean_lw: 0.0 });
        assert_eq!(psi, 1e6);
    }
}
