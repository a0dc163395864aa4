use super::fit::fit;
use super::{DimMode, FitConfig};
use crate::error::{Error, Result};
use crate::funbasis::FunctionalDataset;
use crate::model::{FitResult, FlmVariant, ParsimonyConfig, SigmaYFamily};
use crate::skewdist::FamilyKind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Candidate values of every selectable setting; the search is their full product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionGrid {
    pub ks: Vec<usize>,
    pub parsimonies: Vec<ParsimonyConfig>,
    pub families: Vec<(FamilyKind, FamilyKind)>,
    /// Scree thresholds; empty keeps the dimension rule of the base configuration.
    pub thresholds: Vec<f64>,
}

impl SelectionGrid {
    /// Grid over K only, everything else from the base configuration.
    pub fn over_k(ks: Vec<usize>, base: &FitConfig) -> Self {
        Self {
            ks,
            parsimonies: vec![base.parsimony],
            families: vec![(base.family_x, base.family_y)],
            thresholds: vec![],
        }
    }
}

/// One cell of the BIC table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BicRow {
    pub k: usize,
    pub flm_variant: FlmVariant,
    pub sigma_y_family: SigmaYFamily,
    pub common_psi_x: bool,
    pub common_psi_y: bool,
    pub family_x: FamilyKind,
    pub family_y: FamilyKind,
    pub threshold: Option<f64>,
    pub loglik: Option<f64>,
    pub n_params: Option<usize>,
    pub bic: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub best: FitResult,
    pub best_config: FitConfig,
    pub table: Vec<BicRow>,
}

/// Exhaustive BIC search. Failed cells are kept in the table with their error.
pub fn select_model(
    data: &FunctionalDataset,
    grid: &SelectionGrid,
    base: &FitConfig,
    n_starts: usize,
    seed: u64,
) -> Result<Selection> {
    let dims: Vec<DimMode> = if grid.thresholds.is_empty() {
        vec![base.dims]
    } else {
        let every = matches!(base.dims, DimMode::Cattell { every_iteration: true, .. });
        grid.thresholds
            .iter()
            .map(|&threshold| DimMode::Cattell { threshold, every_iteration: every })
            .collect()
    };
    let mut cells = Vec::new();
    for &k in &grid.ks {
        for p in &grid.parsimonies {
            for &(fx, fy) in &grid.families {
                for d in &dims {
                    let mut cfg = base.clone();
                    cfg.parsimony = *p;
                    cfg.family_x = fx;
                    cfg.family_y = fy;
                    cfg.dims = *d;
                    cells.push((k, cfg));
                }
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::Domain("empty selection grid".into()));
    }
    let fits: Vec<Result<FitResult>> =
        cells.par_iter().map(|(k, cfg)| fit(data, *k, cfg, n_starts, seed)).collect();
    let mut table = Vec::with_capacity(cells.len());
    let mut best: Option<(usize, FitResult)> = None;
    let mut causes = Vec::new();
    for (idx, ((k, cfg), r)) in cells.iter().zip(fits).enumerate() {
        let mut row = BicRow {
            k: *k,
            flm_variant: cfg.parsimony.flm_variant,
            sigma_y_family: cfg.parsimony.sigma_y_family,
            common_psi_x: cfg.parsimony.common_psi_x,
            common_psi_y: cfg.parsimony.common_psi_y,
            family_x: cfg.family_x,
            family_y: cfg.family_y,
            threshold: cfg.dims.threshold(),
            loglik: None,
            n_params: None,
            bic: None,
            error: None,
        };
        match r {
            Ok(f) => {
                row.loglik = Some(f.loglik);
                row.n_params = Some(f.n_params);
                row.bic = Some(f.bic);
                if best.as_ref().is_none_or(|b| f.bic > b.1.bic) {
                    best = Some((idx, f));
                }
            }
            Err(e) => {
                causes.push(format!("K={k}: {e}"));
                row.error = Some(e.to_string());
            }
        }
        table.push(row);
    }
    let (idx, best) = best.ok_or(Error::Fit(causes))?;
    Ok(Selection { best, best_config: cells[idx].1.clone(), table })
}
