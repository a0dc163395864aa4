//! EM fitting: posterior probabilities and latent moments (E-step), closed-form
//! parameter updates (M-step), initialization, stopping and model selection.

mod estep;
mod fit;
mod init;
mod mstep;
mod select;

pub use estep::{e_step, h_k, h_values, log_likelihood, ESuffStats};
pub use fit::{aitken_converged, bic, cattell_select, fit, map_classify, StopState};
pub use init::{initialize, kmeans, InitStrategy};
pub use mstep::{m_step, solve_concentration, ConcentrationEq, DimRule};
pub use select::{select_model, BicRow, SelectionGrid, Selection};

use crate::model::ParsimonyConfig;
use crate::skewdist::FamilyKind;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// How the intrinsic dimension d_k of each covariate subspace is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DimMode {
    /// Same d for every cluster, never changed.
    Fixed(usize),
    /// Scree test with the given threshold; `every_iteration` re-runs it at each
    /// M-step, otherwise the dimensions found at initialization are kept.
    Cattell { threshold: f64, every_iteration: bool },
}

impl DimMode {
    pub fn threshold(&self) -> Option<f64> {
        match self {
            DimMode::Fixed(_) => None,
            DimMode::Cattell { threshold, .. } => Some(*threshold),
        }
    }
}

/// Settings of one EM fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub parsimony: ParsimonyConfig,
    pub family_x: FamilyKind,
    pub family_y: FamilyKind,
    pub dims: DimMode,
    pub max_iter: usize,
    pub tol: f64,
    pub init: InitStrategy,
    /// Every entry of the starting skewness vectors.
    pub init_alpha: f64,
    /// Starting concentration of both mixing laws.
    pub init_concentration: f64,
    pub kmeans_restarts: usize,
}

impl FitConfig {
    pub fn new(family_x: FamilyKind, family_y: FamilyKind) -> Self {
        Self {
            parsimony: ParsimonyConfig::default(),
            family_x,
            family_y,
            dims: DimMode::Cattell { threshold: 0.2, every_iteration: false },
            max_iter: 200,
            tol: 1e-6,
            init: InitStrategy::KMeans,
            init_alpha: 10.0,
            init_concentration: 10.0,
            kmeans_restarts: 20,
        }
    }
}

/// Per-dataset quantities reused at every iteration.
pub(crate) struct Prepared {
    /// Rows W^1/2 c_X,i.
    pub z: DMatrix<f64>,
    /// Rows (W c_X,i, 1).
    pub cstar: DMatrix<f64>,
    pub log_det_w: f64,
}

impl Prepared {
    pub fn new(data: &crate::funbasis::FunctionalDataset) -> Self {
        let n = data.n();
        let rx = data.rx();
        let z = &data.c_x * &data.w_x_sqrt;
        let wc = &data.c_x * &data.w_x;
        let mut cstar = DMatrix::from_element(n, rx + 1, 1.0);
        cstar.view_mut((0, 0), (n, rx)).copy_from(&wc);
        let log_det_w = data
            .w_x
            .clone()
            .cholesky()
            .map(|c| 2.0 * c.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>())
            .unwrap_or(f64::NEG_INFINITY);
        Self { z, cstar, log_det_w }
    }
}

pub(crate) fn row(m: &DMatrix<f64>, i: usize) -> DVector<f64> {
    m.row(i).transpose()
}
