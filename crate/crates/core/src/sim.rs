//! Synthetic paired functional data from a two-cluster skewed regression
//! mixture, with four built-in parameter sets, and a replicate benchmark.

use crate::em::{select_model, FitConfig, SelectionGrid};
use crate::error::{Error, Result};
use crate::eval::{ari, best_matching};
use crate::funbasis::{BSplineBasis, CurveSet, FunctionalDataset, Series};
use crate::model::FitResult;
use crate::skewdist::{sample_skew_with, SkewFamily, SkewParams};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Generative parameters of one cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioCluster {
    /// Law of the covariate coefficients.
    pub x: SkewParams,
    /// Regression block (R^Y x R^X).
    #[serde(with = "crate::serde_mat::mat")]
    pub gamma: DMatrix<f64>,
    #[serde(with = "crate::serde_mat::vec")]
    pub gamma0: DVector<f64>,
    /// Law of the response errors (location zero).
    pub y: SkewParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub n: usize,
    pub pi: Vec<f64>,
    pub clusters: Vec<ScenarioCluster>,
    /// Basis size used for both sides.
    pub n_basis: usize,
    pub degree: usize,
    /// Number of equispaced sampling points on [0, 1].
    pub grid_len: usize,
}

pub const BUILTIN_NAMES: [&str; 4] = ["NIG-VG", "NIG-NIG", "ST-ST", "VG-VG"];

#[rustfmt::skip]
const SIGMA_X1: [f64; 36] = [
    35293.603, -34652.17, 33635.415, -21127.07, 16185.294, 6203.499,
    -34652.172, 53300.21, -50164.778, 39232.83, -23938.415, 11415.853,
    33635.415, -50164.78, 57345.569, -45236.01, 32712.598, -5203.224,
    -21127.071, 39232.83, -45236.014, 42343.90, -30233.209, 16558.252,
    16185.294, -23938.42, 32712.598, -30233.21, 28223.659, -7432.215,
    6203.499, 11415.85, -5203.224, 16558.25, -7432.215, 37585.733,
];

#[rustfmt::skip]
const SIGMA_X2: [f64; 36] = [
    32496.743, -33954.84, 30255.33, -19930.28, 14794.720, 2833.563,
    -33954.843, 53968.88, -50455.29, 40307.52, -23295.369, 14702.169,
    30255.329, -50455.29, 54784.92, -45636.53, 30633.456, -12566.028,
    -19930.283, 40307.52, -45636.53, 44069.51, -29155.230, 21986.692,
    14794.720, -23295.37, 30633.46, -29155.23, 27636.508, -8247.361,
    2833.563, 14702.17, -12566.03, 21986.69, -8247.361, 40627.008,
];

#[rustfmt::skip]
const GAMMA1: [f64; 36] = [
    -0.2425716, 0.54897465, -0.8916372, 1.29210175, -2.1477465, 3.3094321,
    -0.1060100, 1.26481276, -1.9308257, 2.36947593, -3.4423522, 4.2985155,
    -1.1520068, 0.93679861, -2.2869660, 3.93104866, -5.8769335, 7.0047824,
    4.3109023, 0.09308357, -1.7355627, 0.16265468, 0.3923705, 0.4745340,
    0.6957114, 0.80979318, -1.6477535, 1.49785833, -1.3492138, 1.6052517,
    3.3165545, -1.96173600, 0.4144113, -0.05521575, -0.1246685, 0.4763175,
];

#[rustfmt::skip]
const GAMMA2: [f64; 36] = [
    -0.18286204, 0.4846445, -0.8103231, 1.1106091, -1.8322473, 3.0437840,
    -0.09704194, 0.9753574, -1.5860429, 1.9259053, -2.8032265, 3.8551773,
    -1.21799403, 0.8923668, -1.4619894, 2.5499362, -4.7798136, 6.5881388,
    1.45078879, 2.6988567, -4.0145100, 2.2191593, -0.5766956, 0.8673926,
    -0.29982902, 0.9611298, -0.7879001, 0.4851317, -0.3288526, 0.8183521,
    2.00917573, -1.0346535, 0.5647058, -0.5797621, 0.4183034, 0.1227972,
];

const GAMMA0_1: [f64; 6] = [4.978059, -150.127321, 294.147021, -803.866942, 57.684388, 211.959684];
const GAMMA0_2: [f64; 6] = [0.1084669, -59.2740539, 302.7418344, -1012.3411351, 111.9925126, 172.9547505];

const MU_X_SMALL: [[f64; 6]; 2] = [
    [763.1701, 679.3222, 465.8823, 544.5796, 640.5101, 642.5667],
    [778.8822, 750.8995, 402.3499, 836.9349, 840.3188, 831.0520],
];
const MU_X_LARGE: [[f64; 6]; 2] = [
    [1526.340, 1358.644, 931.7646, 1089.159, 1281.020, 1285.133],
    [1557.764, 1501.799, 804.6998, 1673.870, 1680.638, 1662.104],
];

#[rustfmt::skip]
const SIGMA_Y_VG: [f64; 36] = [
    28.35493, 28.62064, 118.3307, 95.89802, 42.41898, 36.26409,
    28.62064, 226.48897, 150.7904, 371.04226, 186.19665, 134.65827,
    118.33066, 150.79045, 1241.6319, 549.88239, 412.62674, 259.10875,
    95.89802, 371.04226, 549.8824, 2616.75870, 836.74973, 835.79828,
    42.41898, 186.19665, 412.6267, 836.74973, 749.32405, 404.91274,
    36.26409, 134.65827, 259.1088, 835.79828, 404.91274, 412.15975,
];

const ALPHA_X_VG: [[f64; 6]; 2] = [
    [0.5, -0.10, 0.25, -0.2, -0.5, 1.0],
    [-0.5, 2.50, 1.3, -1.50, 0.5, 1.0],
];
const ALPHA_Y_VG: [[f64; 6]; 2] = [
    [-0.5, 1.00, -1.50, 0.20, 0.5, -1.5],
    [0.5, -1.50, -0.1, 0.3, 0.1, -0.6],
];

/// Symmetric matrix from a row-major table whose mirrored entries differ only by rounding.
fn sym6(v: &[f64; 36]) -> DMatrix<f64> {
    let m = DMatrix::from_row_slice(6, 6, v);
    (&m + m.transpose()) * 0.5
}

fn constant(v: f64) -> DVector<f64> {
    DVector::from_element(6, v)
}

/// Built-in scenarios with 600 curves and equal weights.
pub fn builtin_scenario(name: &str) -> Result<Scenario> {
    let key = name.to_ascii_uppercase();
    let (mu, ax, fx, sy, ay, fy): ([[f64; 6]; 2], [DVector<f64>; 2], SkewFamily, DMatrix<f64>, [DVector<f64>; 2], SkewFamily) =
        match key.as_str() {
            "NIG-VG" => (
                MU_X_SMALL,
                [constant(0.1), constant(0.1)],
                SkewFamily::NIG(3.0),
                DMatrix::identity(6, 6) * 879.1197,
                [constant(-0.5), constant(-0.5)],
                SkewFamily::VG(2.0),
            ),
            "NIG-NIG" => (
                MU_X_LARGE,
                [constant(100.0), constant(100.0)],
                SkewFamily::NIG(1.0),
                DMatrix::identity(6, 6) * 879.1197,
                [constant(100.0), constant(100.0)],
                SkewFamily::NIG(1.5),
            ),
            "ST-ST" => (
                MU_X_LARGE,
                [constant(0.5), constant(0.5)],
                SkewFamily::ST(4.0),
                DMatrix::identity(6, 6) * 879.1197,
                [constant(-0.5), constant(-0.5)],
                SkewFamily::ST(6.0),
            ),
            "VG-VG" => (
                MU_X_SMALL,
                [DVector::from_row_slice(&ALPHA_X_VG[0]), DVector::from_row_slice(&ALPHA_X_VG[1])],
                SkewFamily::VG(3.0),
                sym6(&SIGMA_Y_VG),
                [DVector::from_row_slice(&ALPHA_Y_VG[0]), DVector::from_row_slice(&ALPHA_Y_VG[1])],
                SkewFamily::VG(2.0),
            ),
            _ => {
                return Err(Error::Domain(format!(
                    "unknown scenario '{name}' (known: {})",
                    BUILTIN_NAMES.join(", ")
                )))
            }
        };
    let sx = [sym6(&SIGMA_X1), sym6(&SIGMA_X2)];
    let gammas = [DMatrix::from_row_slice(6, 6, &GAMMA1), DMatrix::from_row_slice(6, 6, &GAMMA2)];
    let gamma0 = [DVector::from_row_slice(&GAMMA0_1), DVector::from_row_slice(&GAMMA0_2)];
    let clusters = (0..2)
        .map(|k| {
            Ok(ScenarioCluster {
                x: SkewParams::new(DVector::from_row_slice(&mu[k]), ax[k].clone(), sx[k].clone(), fx)?,
                gamma: gammas[k].clone(),
                gamma0: gamma0[k].clone(),
                y: SkewParams::new(DVector::zeros(6), ay[k].clone(), sy.clone(), fy)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Scenario {
        name: key,
        n: 600,
        pi: vec![0.5, 0.5],
        clusters,
        n_basis: 6,
        degree: 3,
        grid_len: 101,
    })
}

/// A simulated data set with its generating labels.
#[derive(Clone, Debug)]
pub struct Simulated {
    pub curves: CurveSet,
    pub data: FunctionalDataset,
    /// 0-based generating cluster per curve
    pub labels: Vec<usize>,
}

impl Scenario {
    pub fn basis(&self) -> Result<BSplineBasis> {
        BSplineBasis::uniform(self.n_basis, self.degree, (0.0, 1.0))
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.grid_len).map(|i| i as f64 / (self.grid_len - 1) as f64).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.clusters.len();
        if k == 0 || self.pi.len() != k || (self.pi.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Domain("scenario weights do not match its clusters".into()));
        }
        for c in &self.clusters {
            c.x.validate()?;
            c.y.validate()?;
            if c.x.dim() != self.n_basis || c.y.dim() != self.n_basis {
                return Err(Error::Domain("scenario dimensions must equal the basis size".into()));
            }
            if c.gamma.shape() != (self.n_basis, self.n_basis) || c.gamma0.len() != self.n_basis {
                return Err(Error::Domain("regression block has the wrong shape".into()));
            }
        }
        Ok(())
    }
}

/// Draws labels, covariate coefficients and regression errors, renders both
/// curve sets on the sampling grid and smooths them back onto the basis.
pub fn simulate(scenario: &Scenario, seed: u64) -> Result<Simulated> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = scenario.basis()?;
    let w_x = basis.gram();
    let n = scenario.n;
    let r = scenario.n_basis;
    let labels: Vec<usize> = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (k, p) in scenario.pi.iter().enumerate() {
                acc += p;
                if u < acc {
                    return k;
                }
            }
            scenario.pi.len() - 1
        })
        .collect();
    let mut c_x = DMatrix::zeros(n, r);
    let mut c_y = DMatrix::zeros(n, r);
    for i in 0..n {
        let cl = &scenario.clusters[labels[i]];
        let cx = sample_skew_with(&cl.x, 1, &mut rng)?.row(0).transpose();
        let eps = sample_skew_with(&cl.y, 1, &mut rng)?.row(0).transpose();
        let cy = &cl.gamma0 + &cl.gamma * (&w_x * &cx) + eps;
        c_x.set_row(i, &cx.transpose());
        c_y.set_row(i, &cy.transpose());
    }
    let grid = scenario.grid();
    let design = basis.eval_basis(&grid)?;
    let render = |c: &DMatrix<f64>, i: usize| Series {
        t: grid.clone(),
        values: (&design * c.row(i).transpose()).iter().copied().collect(),
    };
    let curves = CurveSet {
        ids: (1..=n).map(|i| i.to_string()).collect(),
        x_names: vec!["x".into()],
        y_names: vec!["y".into()],
        x: (0..n).map(|i| vec![render(&c_x, i)]).collect(),
        y: (0..n).map(|i| vec![render(&c_y, i)]).collect(),
    };
    let data = FunctionalDataset::fit(&curves, &[basis.clone()], &[basis])?;
    Ok(Simulated { curves, data, labels })
}

/// Settings of a replicate benchmark.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub grid: SelectionGrid,
    pub base: FitConfig,
    pub n_starts: usize,
}

impl BenchConfig {
    /// True number of clusters and true families; Cattell thresholds searched by BIC.
    pub fn for_scenario(s: &Scenario) -> Self {
        let fx = s.clusters[0].x.family.kind();
        let fy = s.clusters[0].y.family.kind();
        let base = FitConfig::new(fx, fy);
        let mut grid = SelectionGrid::over_k(vec![s.clusters.len()], &base);
        grid.thresholds = vec![0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5];
        Self { grid, base, n_starts: 1 }
    }
}

/// Outcome of one replicate.
#[derive(Clone, Debug)]
pub struct Replicate {
    pub seed: u64,
    pub ari: f64,
    pub fit: FitResult,
    /// Squared errors of the fitted regression blocks after cluster matching,
    /// absent when the fitted K differs from the true K.
    pub gamma_sq_err: Option<Vec<DMatrix<f64>>>,
}

#[derive(Clone, Debug)]
pub struct BenchmarkReport {
    pub scenario: String,
    pub replicates: Vec<Replicate>,
    pub ari_mean: f64,
    pub ari_sd: f64,
    pub ari_median: f64,
    /// Per true cluster, elementwise mean squared error of the regression block.
    pub gamma_mse: Vec<DMatrix<f64>>,
}

fn summary(v: &[f64]) -> (f64, f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = s.len();
    let median = if m % 2 == 1 { s[m / 2] } else { 0.5 * (s[m / 2 - 1] + s[m / 2]) };
    (mean, sd, median)
}

/// Replicate r simulates with `seed + r`, selects a model and scores it against the truth.
pub fn benchmark(scenario: &Scenario, n_reps: usize, seed: u64, cfg: &BenchConfig) -> Result<BenchmarkReport> {
    if n_reps == 0 {
        return Err(Error::Domain("benchmark needs at least one replicate".into()));
    }
    let k_true = scenario.clusters.len();
    let reps: Vec<Replicate> = (0..n_reps as u64)
        .into_par_iter()
        .map(|r| -> Result<Replicate> {
            let s = seed.wrapping_add(r);
            let sim = simulate(scenario, s)?;
            let sel = select_model(&sim.data, &cfg.grid, &cfg.base, cfg.n_starts, s)?;
            let fit = sel.best;
            let score = ari(&sim.labels, &fit.labels)?;
            let gamma_sq_err = (fit.model.k == k_true).then(|| {
                let perm = best_matching(&sim.labels, &fit.labels, k_true);
                let mut out = vec![DMatrix::zeros(0, 0); k_true];
                for (p, &t) in perm.iter().enumerate() {
                    let diff = fit.model.clusters[p].y.gamma() - &scenario.clusters[t].gamma;
                    out[t] = diff.map(|v| v * v);
                }
                out
            });
            Ok(Replicate { seed: s, ari: score, fit, gamma_sq_err })
        })
        .collect::<Result<_>>()?;
    let aris: Vec<f64> = reps.iter().map(|r| r.ari).collect();
    let (ari_mean, ari_sd, ari_median) = summary(&aris);
    let matched: Vec<&Vec<DMatrix<f64>>> = reps.iter().filter_map(|r| r.gamma_sq_err.as_ref()).collect();
    let gamma_mse = (0..k_true)
        .map(|k| {
            let (rr, cc) = scenario.clusters[k].gamma.shape();
            if matched.is_empty() {
                return DMatrix::from_element(rr, cc, f64::NAN);
            }
            matched.iter().fold(DMatrix::zeros(rr, cc), |acc, m| acc + &m[k]) / matched.len() as f64
        })
        .collect();
    Ok(BenchmarkReport {
        scenario: scenario.name.clone(),
        replicates: reps,
        ari_mean,
        ari_sd,
        ari_median,
        gamma_mse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_construct() {
        for name in BUILTIN_NAMES {
            let s = builtin_scenario(name).unwrap();
            s.validate().unwrap();
        }
        assert!(builtin_scenario("XX").is_err());
    }

    #[test]
    fn summary_single_value() {
        assert_eq!(summary(&[0.7]), (0.7, 0.0, 0.7));
        let (m, _, med) = summary(&[1.0, 3.0, 2.0, 10.0]);
        assert_eq!(m, 4.0);
        assert_eq!(med, 2.5);
    }
}
