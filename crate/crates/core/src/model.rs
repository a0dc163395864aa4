//! Parameter types of the mixture, parsimony options and free-parameter counting.

use crate::error::{Error, Result};
use crate::skewdist::{FamilyKind, SkewFamily};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Constraint on the covariate-side eigenvalues: free per dimension (`Akj`),
/// one per cluster (`Ak`) or shared (`A`); noise level per cluster (`Bk`) or shared (`B`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlmVariant {
    AkjBkQkDk,
    AkjBQkDk,
    AkBkQkDk,
    AkBQkDk,
    ABkQkDk,
    ABQkDk,
}

impl FlmVariant {
    pub const ALL: [FlmVariant; 6] = [
        FlmVariant::AkjBkQkDk,
        FlmVariant::AkjBQkDk,
        FlmVariant::AkBkQkDk,
        FlmVariant::AkBQkDk,
        FlmVariant::ABkQkDk,
        FlmVariant::ABQkDk,
    ];

    pub fn common_b(self) -> bool {
        matches!(self, FlmVariant::AkjBQkDk | FlmVariant::AkBQkDk | FlmVariant::ABQkDk)
    }
}

/// Eigen-decomposition family of the response scatter matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SigmaYFamily {
    EII,
    VII,
    EEI,
    VEI,
    EVI,
    VVI,
    EEE,
    VVV,
}

impl SigmaYFamily {
    pub const ALL: [SigmaYFamily; 8] = [
        SigmaYFamily::EII,
        SigmaYFamily::VII,
        SigmaYFamily::EEI,
        SigmaYFamily::VEI,
        SigmaYFamily::EVI,
        SigmaYFamily::VVI,
        SigmaYFamily::EEE,
        SigmaYFamily::VVV,
    ];

    /// Number of free parameters for `k` clusters in dimension `p`.
    pub fn n_params(self, k: usize, p: usize) -> usize {
        match self {
            SigmaYFamily::EII => 1,
            SigmaYFamily::VII => k,
            SigmaYFamily::EEI => p,
            SigmaYFamily::VEI => p + k - 1,
            SigmaYFamily::EVI => k * p - k + 1,
            SigmaYFamily::VVI => k * p,
            SigmaYFamily::EEE => p * (p + 1) / 2,
            SigmaYFamily::VVV => k * p * (p + 1) / 2,
        }
    }
}

macro_rules! enum_str {
    ($t:ty, $($v:ident),+) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                match self { $(<$t>::$v => f.write_str(stringify!($v)),)+ }
            }
        }
        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                $(if s.eq_ignore_ascii_case(stringify!($v)) { return Ok(<$t>::$v); })+
                Err(Error::Unsupported(format!("unknown {} '{}'", stringify!($t), s)))
            }
        }
    };
}
enum_str!(FlmVariant, AkjBkQkDk, AkjBQkDk, AkBkQkDk, AkBQkDk, ABkQkDk, ABQkDk);
enum_str!(SigmaYFamily, EII, VII, EEI, VEI, EVI, VVI, EEE, VVV);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParsimonyConfig {
    pub flm_variant: FlmVariant,
    pub sigma_y_family: SigmaYFamily,
    /// One concentration shared by all clusters on the covariate side.
    pub common_psi_x: bool,
    /// Same for the response side.
    pub common_psi_y: bool,
}

impl Default for ParsimonyConfig {
    fn default() -> Self {
        Self {
            flm_variant: FlmVariant::AkjBkQkDk,
            sigma_y_family: SigmaYFamily::VVV,
            common_psi_x: false,
            common_psi_y: false,
        }
    }
}

/// Covariate-side parameters of one cluster. The scatter matrix is implicit:
/// Sigma_X = W^-1/2 (U (diag(a) - b I) U' + b I) W^-1/2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XClusterParams {
    #[serde(with = "crate::serde_mat::vec")]
    pub mu_x: DVector<f64>,
    #[serde(with = "crate::serde_mat::vec")]
    pub alpha_x: DVector<f64>,
    /// R^X x d orthonormal columns
    #[serde(with = "crate::serde_mat::mat")]
    pub u: DMatrix<f64>,
    pub a: Vec<f64>,
    pub b: f64,
    pub d: usize,
    pub family_x: SkewFamily,
}

impl XClusterParams {
    pub fn validate(&self) -> Result<()> {
        let r = self.mu_x.len();
        if self.alpha_x.len() != r || self.u.shape() != (r, self.d) || self.a.len() != self.d {
            return Err(Error::Model("covariate parameters have inconsistent shapes".into()));
        }
        if self.d < 1 || self.d >= r {
            return Err(Error::Model(format!("intrinsic dimension {} outside [1, {}]", self.d, r - 1)));
        }
        if !(self.b > 0.0) || self.a.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::Model("subspace eigenvalues must be positive".into()));
        }
        let gap = (self.u.transpose() * &self.u - DMatrix::identity(self.d, self.d)).amax();
        if gap > 1e-8 {
            return Err(Error::Model(format!("U columns are not orthonormal (gap {gap:e})")));
        }
        self.family_x.validate()
    }

    /// Q D Q' = U (diag(a) - b I) U' + b I, the scatter in whitened coordinates.
    pub fn whitened_scatter(&self) -> DMatrix<f64> {
        let r = self.mu_x.len();
        let mut core = DMatrix::zeros(self.d, self.d);
        for j in 0..self.d {
            core[(j, j)] = self.a[j] - self.b;
        }
        &self.u * core * self.u.transpose() + DMatrix::identity(r, r) * self.b
    }
}

/// Response-side parameters of one cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YClusterParams {
    /// R^Y x (R^X + 1): regression block followed by the intercept column
    #[serde(with = "crate::serde_mat::mat")]
    pub gamma_star: DMatrix<f64>,
    #[serde(with = "crate::serde_mat::vec")]
    pub alpha_y: DVector<f64>,
    #[serde(with = "crate::serde_mat::mat")]
    pub sigma_y: DMatrix<f64>,
    pub family_y: SkewFamily,
}

/// Smallest eigenvalue a response scatter matrix may have before the cluster counts as spurious.
pub const SIGMA_Y_MIN_EIGEN: f64 = 1e-20;

impl YClusterParams {
    pub fn min_eigenvalue(&self) -> f64 {
        self.sigma_y.clone().symmetric_eigenvalues().min()
    }

    pub fn validate(&self, rx: usize) -> Result<()> {
        let ry = self.alpha_y.len();
        if self.gamma_star.shape() != (ry, rx + 1) || self.sigma_y.shape() != (ry, ry) {
            return Err(Error::Model("response parameters have inconsistent shapes".into()));
        }
        let m = self.min_eigenvalue();
        if !(m > SIGMA_Y_MIN_EIGEN) {
            return Err(Error::Model(format!("response scatter has eigenvalue {m:e}")));
        }
        self.family_y.validate()
    }

    /// Regression block without the intercept.
    pub fn gamma(&self) -> DMatrix<f64> {
        self.gamma_star.columns(0, self.gamma_star.ncols() - 1).into_owned()
    }

    pub fn intercept(&self) -> DVector<f64> {
        self.gamma_star.column(self.gamma_star.ncols() - 1).into_owned()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub x: XClusterParams,
    pub y: YClusterParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub pi: Vec<f64>,
    pub clusters: Vec<ClusterParams>,
    pub parsimony: ParsimonyConfig,
}

impl ClusterModel {
    pub fn rx(&self) -> usize {
        self.clusters[0].x.mu_x.len()
    }

    pub fn ry(&self) -> usize {
        self.clusters[0].y.alpha_y.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c.x.d).collect()
    }

    pub fn families(&self) -> (FamilyKind, FamilyKind) {
        (self.clusters[0].x.family_x.kind(), self.clusters[0].y.family_y.kind())
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.pi.len() != self.k || self.clusters.len() != self.k {
            return Err(Error::Model("cluster count mismatch".into()));
        }
        let s: f64 = self.pi.iter().sum();
        if (s - 1.0).abs() > 1e-12 || self.pi.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::Model(format!("mixing weights sum to {s}")));
        }
        let rx = self.rx();
        for c in &self.clusters {
            c.x.validate()?;
            c.y.validate(rx)?;
        }
        Ok(())
    }

    /// Free-parameter count of this model.
    pub fn n_free_params(&self) -> usize {
        count_free_params(&ModelShape {
            k: self.k,
            rx: self.rx(),
            ry: self.ry(),
            d: self.dims(),
            parsimony: self.parsimony,
        })
    }
}

/// Converged model and its fit diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ClusterModel,
    /// n x K posterior probabilities
    #[serde(with = "crate::serde_mat::mat")]
    pub t: DMatrix<f64>,
    pub loglik_trace: Vec<f64>,
    pub loglik: f64,
    pub n_params: usize,
    pub bic: f64,
    /// 0-based cluster index per observation
    pub labels: Vec<usize>,
    pub n_iter: usize,
    pub converged: bool,
    /// Scree threshold the dimensions were chosen with, if any.
    pub threshold: Option<f64>,
}

/// Everything the free-parameter count depends on.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelShape {
    pub k: usize,
    pub rx: usize,
    pub ry: usize,
    pub d: Vec<usize>,
    pub parsimony: ParsimonyConfig,
}

pub fn count_free_params(s: &ModelShape) -> usize {
    let k = s.k;
    let mix = k - 1;
    let loc_skew_x = 2 * k * s.rx;
    // d (R - (d + 1)/2) orientation parameters per cluster
    let orient: usize = s.d.iter().map(|&d| d * s.rx - d * (d + 1) / 2).sum();
    let n_a = match s.parsimony.flm_variant {
        FlmVariant::AkjBkQkDk | FlmVariant::AkjBQkDk => s.d.iter().sum(),
        FlmVariant::AkBkQkDk | FlmVariant::AkBQkDk => k,
        FlmVariant::ABkQkDk | FlmVariant::ABQkDk => 1,
    };
    let n_b = if s.parsimony.flm_variant.common_b() { 1 } else { k };
    let regression = k * s.ry * (s.rx + 1);
    let skew_y = k * s.ry;
    let scatter_y = s.parsimony.sigma_y_family.n_params(k, s.ry);
    let conc = |tied: bool| if tied { 1 } else { k };
    mix + loc_skew_x
        + orient
        + n_a
        + n_b
        + regression
        + skew_y
        + scatter_y
        + conc(s.parsimony.common_psi_x)
        + conc(s.parsimony.common_psi_y)
}

fn diag_log_det(m: &DMatrix<f64>) -> f64 {
    m.diagonal().iter().map(|x| x.ln()).sum()
}

/// Constrained response scatter estimates from the unconstrained per-cluster
/// matrices `s` and effective sizes `n_k` (closed-form estimators of each family).
pub fn sigma_y_project(s: &[DMatrix<f64>], n_k: &[f64], family: SigmaYFamily) -> Result<Vec<DMatrix<f64>>> {
    let k = s.len();
    if k == 0 || n_k.len() != k {
        return Err(Error::Domain("sigma_y_project needs one weight per matrix".into()));
    }
    let p = s[0].nrows();
    let pf = p as f64;
    let n: f64 = n_k.iter().sum();
    let w_k: Vec<DMatrix<f64>> = s.iter().zip(n_k).map(|(m, &nk)| m * nk).collect();
    let pooled = w_k.iter().fold(DMatrix::zeros(p, p), |acc, m| acc + m);
    let diag_of = |m: &DMatrix<f64>| DMatrix::from_diagonal(&m.diagonal());
    let out = match family {
        SigmaYFamily::VVV => s.to_vec(),
        SigmaYFamily::EEE => vec![&pooled / n; k],
        SigmaYFamily::EII => {
            let lambda = pooled.trace() / (n * pf);
            vec![DMatrix::identity(p, p) * lambda; k]
        }
        SigmaYFamily::VII => s.iter().map(|m| DMatrix::identity(p, p) * (m.trace() / pf)).collect(),
        SigmaYFamily::EEI => vec![diag_of(&pooled) / n; k],
        SigmaYFamily::VVI => s.iter().map(diag_of).collect(),
        SigmaYFamily::EVI => {
            // Sigma_k = lambda B_k with |B_k| = 1
            let scale: Vec<f64> = w_k.iter().map(|w| (diag_log_det(w) / pf).exp()).collect();
            let lambda = scale.iter().sum::<f64>() / n;
            w_k.iter().zip(&scale).map(|(w, c)| diag_of(w) * (lambda / c)).collect()
        }
        SigmaYFamily::VEI => {
            // Sigma_k = lambda_k B with |B| = 1, by alternating the two closed-form updates.
            let mut lambda: Vec<f64> = s.iter().map(|m| m.trace() / pf).collect();
            let mut b = DVector::from_element(p, 1.0);
            for _ in 0..500 {
                let mut acc = DVector::zeros(p);
                for (w, l) in w_k.iter().zip(&lambda) {
                    acc += w.diagonal() / *l;
                }
                let norm = (acc.iter().map(|x| x.ln()).sum::<f64>() / pf).exp();
                let b_new = acc / norm;
                let l_new: Vec<f64> = w_k
                    .iter()
                    .zip(n_k)
                    .map(|(w, nk)| w.diagonal().component_div(&b_new).sum() / (nk * pf))
                    .collect();
                let change = (&b_new - &b).amax()
                    + l_new.iter().zip(&lambda).map(|(a, b)| ((a - b) / b).abs()).fold(0.0, f64::max);
                b = b_new;
                lambda = l_new;
                if change < 1e-13 {
                    break;
                }
            }
            lambda.iter().map(|l| DMatrix::from_diagonal(&(&b * *l))).collect()
        }
    };
    Ok(out)
}
