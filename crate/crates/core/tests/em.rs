mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use skewcwm::em::{e_step, fit, h_k, initialize, log_likelihood, m_step, DimRule, ESuffStats, InitStrategy};
use skewcwm::eval::ari;
use skewcwm::funbasis::FunctionalDataset;
use skewcwm::model::ClusterModel;
use skewcwm::skewdist::{FamilyKind, SkewFamily};
use skewcwm::Error;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn posterior_matches_definitional_ratio() {
    let mut r = rng(21);
    for _ in 0..6 {
        let (data, model) = random_instance(&mut r, 2, 3, 2, 12);
        let st = e_step(&data, &model).unwrap();
        let (t, ll) = oracle_posterior(&data, &model);
        for (a, b) in st.t.iter().zip(t.iter()) {
            assert!(close(*a, *b, 1e-8) || (a.abs() < 1e-250 && b.abs() < 1e-250), "{a} vs {b}");
        }
        assert!(close(st.loglik, ll, 1e-9), "{} vs {ll}", st.loglik);
        assert!(close(log_likelihood(&data, &model).unwrap(), ll, 1e-9));
    }
}

#[test]
fn h_k_is_log_joint_up_to_the_stated_constant() {
    let mut r = rng(5);
    let (data, model) = random_instance(&mut r, 2, 2, 1, 5);
    let lj = oracle_log_joint(&data, &model);
    let log_det_w = data.w_x.determinant().ln();
    let shift = -0.5 * 3.0 * (2.0 * std::f64::consts::PI).ln() + 0.5 * log_det_w;
    for i in 0..data.n() {
        for k in 0..2 {
            let cx = data.c_x.row(i).transpose();
            let cy = data.c_y.row(i).transpose();
            let h = h_k(&cy, &cx, &model.clusters[k], model.pi[k], &data).unwrap();
            assert!(close(h + shift, lj[(i, k)], 1e-9), "{} vs {}", h + shift, lj[(i, k)]);
        }
    }
}

#[test]
fn latent_moments_match_posterior_quadrature() {
    let mut r = rng(7);
    for (fx, fy) in [(FamilyKind::VG, FamilyKind::NIG), (FamilyKind::ST, FamilyKind::VG), (FamilyKind::NIG, FamilyKind::ST)] {
        let model = random_model(&mut r, 1, 3, 2, fx, fy);
        let w = random_metric(&mut r, 3);
        let (data, _) = sample_model(&mut r, &model, &w, 4);
        let st = e_step(&data, &model).unwrap();
        let cl = &model.clusters[0];
        let sx = covariate_sigma(&data, &cl.x);
        for i in 0..data.n() {
            let cx = data.c_x.row(i).transpose();
            let mut cstar = DVector::from_element(4, 1.0);
            cstar.rows_mut(0, 3).copy_from(&(&data.w_x * &cx));
            let cy = data.c_y.row(i).transpose();
            let my = &cl.y.gamma_star * cstar;
            for (v, mu, al, s, fam, ew, ewi) in [
                (&cx, &cl.x.mu_x, &cl.x.alpha_x, &sx, cl.x.family_x, st.w_x[(i, 0)], st.wi_x[(i, 0)]),
                (&cy, &my, &cl.y.alpha_y, &cl.y.sigma_y, cl.y.family_y, st.w_y[(i, 0)], st.wi_y[(i, 0)]),
            ] {
                let mix = match fam {
                    SkewFamily::VG(p) => oracle::Mixing::Gamma(p),
                    SkewFamily::ST(n) => oracle::Mixing::InvGamma(n),
                    SkewFamily::NIG(k) => oracle::Mixing::InvGaussian(k),
                };
                let (v, mu, al, s) = (slice(v), slice(mu), slice(al), rows(s));
                let lf = |t: f64| oracle::log_normal_scaled(&v, &mu, &al, &s, t.exp()) + mix.log_pdf(t.exp()) + t;
                let norm = oracle::log_integrate(lf, -40.0, 40.0, 1e-13);
                let m1 = (oracle::log_integrate(|t| lf(t) + t, -40.0, 40.0, 1e-13) - norm).exp();
                let mi = (oracle::log_integrate(|t| lf(t) - t, -40.0, 40.0, 1e-13) - norm).exp();
                assert!(close(ew, m1, 1e-7), "{fam:?}: E[W] {ew} vs {m1}");
                assert!(close(ewi, mi, 1e-7), "{fam:?}: E[1/W] {ewi} vs {mi}");
                assert!(ew * ewi >= 1.0 - 1e-12);
            }
        }
    }
}

#[test]
fn single_cluster_posterior_is_one() {
    let mut r = rng(1);
    let (data, model) = random_instance(&mut r, 1, 3, 1, 10);
    let st = e_step(&data, &model).unwrap();
    assert!(st.t.iter().all(|&v| v == 1.0));
}

#[test]
fn clusters_differing_only_in_weight_keep_the_weights() {
    let mut r = rng(2);
    let mut model = random_model(&mut r, 1, 3, 2, FamilyKind::NIG, FamilyKind::ST);
    model.k = 2;
    model.pi = vec![0.8, 0.2];
    model.clusters.push(model.clusters[0].clone());
    let data = random_data(&mut r, 10, 3, 2);
    let st = e_step(&data, &model).unwrap();
    for i in 0..10 {
        assert!((st.t[(i, 0)] - 0.8).abs() < 1e-12);
    }
}

#[test]
fn relabeling_permutes_posteriors_and_keeps_likelihood() {
    let mut r = rng(3);
    let (data, model) = random_instance(&mut r, 3, 4, 2, 30);
    let mut perm = model.clone();
    perm.clusters = vec![model.clusters[2].clone(), model.clusters[0].clone(), model.clusters[1].clone()];
    perm.pi = vec![model.pi[2], model.pi[0], model.pi[1]];
    let a = e_step(&data, &model).unwrap();
    let b = e_step(&data, &perm).unwrap();
    assert!((a.loglik - b.loglik).abs() < 1e-10 * a.loglik.abs());
    for i in 0..30 {
        assert!((a.t[(i, 2)] - b.t[(i, 0)]).abs() < 1e-12);
        assert!((a.w_y[(i, 0)] - b.w_y[(i, 1)]).abs() < 1e-12);
    }
    // one M-step on permuted statistics gives the permuted model
    let cfg = config(model.families().0, model.families().1, 1);
    let ma = m_step(&data, &a, &cfg, &DimRule::Fixed(vec![1; 3])).unwrap();
    let bs = ESuffStats {
        t: permute(&a.t),
        w_x: permute(&a.w_x),
        wi_x: permute(&a.wi_x),
        lw_x: permute(&a.lw_x),
        w_y: permute(&a.w_y),
        wi_y: permute(&a.wi_y),
        lw_y: permute(&a.lw_y),
        loglik: a.loglik,
    };
    let mb = m_step(&data, &bs, &cfg, &DimRule::Fixed(vec![1; 3])).unwrap();
    assert_eq!(mb.clusters[0].y.gamma_star, ma.clusters[2].y.gamma_star);
    assert_eq!(mb.pi[1], ma.pi[0]);
}

fn permute(m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), 3, |i, k| m[(i, [2, 0, 1][k])])
}

#[test]
fn m_step_hand_examples() {
    // pi from hard assignments
    let mut r = rng(4);
    let data = random_data(&mut r, 12, 2, 1);
    let hard = |split: usize| DMatrix::from_fn(12, 2, |i, k| if (i < split) == (k == 0) { 1.0 } else { 0.0 });
    let cfg = config(FamilyKind::NIG, FamilyKind::NIG, 1);
    let m = m_step(&data, &ESuffStats::from_hard(hard(9)), &cfg, &DimRule::Fixed(vec![1, 1])).unwrap();
    assert_eq!(m.pi, vec![0.75, 0.25]);
    // a cluster below two effective observations aborts the start
    assert!(matches!(
        m_step(&data, &ESuffStats::from_hard(hard(11)), &cfg, &DimRule::Fixed(vec![1, 1])),
        Err(Error::EmptyCluster { k: 1, .. })
    ));

    // c_X first coordinate {0, 2, 0, 2}, w = 1, wi = 2 -> mu = 1, alpha = 0 in that coordinate
    let c_x = DMatrix::from_row_slice(4, 2, &[0.0, 1.0, 2.0, -1.0, 0.0, 3.0, 2.0, 0.5]);
    let c_y = DMatrix::from_column_slice(4, 1, &[0.3, -0.2, 1.1, 0.4]);
    let data = FunctionalDataset::from_parts(c_x, c_y, DMatrix::identity(2, 2)).unwrap();
    let mut st = ESuffStats::from_hard(DMatrix::from_element(4, 1, 1.0));
    st.wi_x.fill(2.0);
    let m = m_step(&data, &st, &config(FamilyKind::NIG, FamilyKind::NIG, 1), &DimRule::Fixed(vec![1])).unwrap();
    assert!((m.clusters[0].x.mu_x[0] - 1.0).abs() < 1e-12);
    assert!(m.clusters[0].x.alpha_x[0].abs() < 1e-12);
    // NIG concentration is 1 / mean E[W]
    let mut st2 = st.clone();
    st2.w_x.fill(0.5);
    st2.wi_x.fill(4.0);
    let m = m_step(&data, &st2, &config(FamilyKind::NIG, FamilyKind::NIG, 1), &DimRule::Fixed(vec![1])).unwrap();
    assert_eq!(m.clusters[0].x.family_x, SkewFamily::NIG(2.0));

    // equal weights: degenerate system, weighted mean and zero skewness
    let m = m_step(&data, &ESuffStats::from_hard(DMatrix::from_element(4, 1, 1.0)), &config(FamilyKind::ST, FamilyKind::ST, 1), &DimRule::Fixed(vec![1])).unwrap();
    let mean = data.c_x.row_mean().transpose();
    assert!((&m.clusters[0].x.mu_x - mean).amax() < 1e-12);
    assert_eq!(m.clusters[0].x.alpha_x, DVector::zeros(2));
}

#[test]
fn m_step_is_stationary_for_location_parameters() {
    let mut r = rng(31);
    for fx in KINDS {
        for fy in KINDS {
            let model = random_model(&mut r, 2, 3, 2, fx, fy);
            let w = random_metric(&mut r, 3);
            let (data, _) = sample_model(&mut r, &model, &w, 40);
            let st = e_step(&data, &model).unwrap();
            let next = m_step(&data, &st, &config(fx, fy, 1), &DimRule::Fixed(vec![1, 1])).unwrap();
            for k in 0..2 {
                let (g, q) = q_gradient_max(&data, &st, &next, k);
                assert!(g <= 1e-4 * (1.0 + q.abs()), "{fx:?}-{fy:?} k={k}: |grad| {g}, Q {q}");
            }
        }
    }
}

fn simulated(seed: u64, n: usize, fx: FamilyKind, fy: FamilyKind) -> (FunctionalDataset, Vec<usize>, ClusterModel) {
    let mut r = rng(seed);
    let mut model = random_model(&mut r, 2, 4, 2, fx, fy);
    // pull the clusters apart
    model.clusters[0].x.mu_x.add_scalar_mut(3.0);
    model.clusters[1].x.mu_x.add_scalar_mut(-3.0);
    let w = random_metric(&mut r, 4);
    let (data, labels) = sample_model(&mut r, &model, &w, n);
    (data, labels, model)
}

#[test]
fn em_ascends_and_recovers_separated_clusters() {
    for (seed, fx, fy) in [(1, FamilyKind::NIG, FamilyKind::NIG), (2, FamilyKind::ST, FamilyKind::VG), (3, FamilyKind::VG, FamilyKind::ST)] {
        let (data, labels, _) = simulated(seed, 300, fx, fy);
        let res = fit(&data, 2, &config(fx, fy, 1), 1, seed).unwrap();
        for w in res.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-8 * w[0].abs(), "{fx:?}-{fy:?}: {} -> {}", w[0], w[1]);
        }
        assert!(ari(&labels, &res.labels).unwrap() > 0.9);
        assert_eq!(res.loglik, *res.loglik_trace.last().unwrap());
        for i in 0..data.n() {
            assert!((res.t.row(i).sum() - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn fit_is_deterministic_and_validates_k() {
    let (data, _, _) = simulated(9, 120, FamilyKind::NIG, FamilyKind::NIG);
    let cfg = config(FamilyKind::NIG, FamilyKind::NIG, 1);
    let a = fit(&data, 2, &cfg, 2, 5).unwrap();
    let b = fit(&data, 2, &cfg, 2, 5).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert!(fit(&data, 0, &cfg, 1, 0).is_err());
    assert!(fit(&data, 121, &cfg, 1, 0).is_err());
    let one = fit(&data, 1, &cfg, 1, 0).unwrap();
    assert_eq!(one.model.pi, vec![1.0]);
}

#[test]
fn initialization_strategies() {
    let (data, _, _) = simulated(4, 50, FamilyKind::NIG, FamilyKind::NIG);
    let a = initialize(&data, 3, InitStrategy::Random, 7, 1).unwrap();
    assert_eq!(a.t, initialize(&data, 3, InitStrategy::Random, 7, 1).unwrap().t);
    assert!(a.t.row_iter().all(|r| r.iter().filter(|&&v| v == 1.0).count() == 1 && r.sum() == 1.0));
    assert!(initialize(&data, 51, InitStrategy::KMeans, 0, 1).is_err());
}

#[test]
fn nig_response_concentration_is_fixed_point_of_mean_weight() {
    let (data, _, _) = simulated(6, 200, FamilyKind::NIG, FamilyKind::NIG);
    let res = fit(&data, 2, &config(FamilyKind::NIG, FamilyKind::NIG, 1), 1, 0).unwrap();
    let st = e_step(&data, &res.model).unwrap();
    for k in 0..2 {
        let nk: f64 = st.t.column(k).sum();
        let wbar = st.t.column(k).dot(&st.w_y.column(k)) / nk;
        let SkewFamily::NIG(kappa) = res.model.clusters[k].y.family_y else { panic!() };
        assert!((kappa * wbar - 1.0).abs() < 0.05, "k={k}: {}", kappa * wbar);
    }
}

// Does not hold: on nearly Gaussian data the likelihood keeps increasing along
// psi -> inf with |alpha| ~ sqrt(psi) and mu = mean - alpha, so |alpha| and |mu|
// grow together. Kept runnable with --ignored.
#[test]
#[ignore = "likelihood ridge drives alpha and mu off together"]
fn gaussian_limit_keeps_skewness_small() {
    let mut small = 0;
    for seed in 0..10 {
        let mut r = rng(100 + seed);
        let mut model = random_model(&mut r, 2, 3, 2, FamilyKind::VG, FamilyKind::VG);
        for (j, c) in model.clusters.iter_mut().enumerate() {
            c.x.alpha_x.fill(0.0);
            c.y.alpha_y.fill(0.0);
            c.x.family_x = SkewFamily::VG(1e3);
            c.y.family_y = SkewFamily::VG(1e3);
            c.x.mu_x.add_scalar_mut(if j == 0 { 4.0 } else { -4.0 });
        }
        let w = random_metric(&mut r, 3);
        let (data, _) = sample_model(&mut r, &model, &w, 300);
        let res = fit(&data, 2, &config(FamilyKind::VG, FamilyKind::VG, 1), 1, seed).unwrap();
        let ok = res.model.clusters.iter().all(|c| c.x.alpha_x.norm() < 0.1 * c.x.mu_x.norm());
        small += ok as usize;
    }
    assert!(small >= 9, "{small}/10");
}
