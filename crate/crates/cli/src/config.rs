use serde::{Deserialize, Serialize};
use skewcwm::em::{DimMode, FitConfig, InitStrategy, SelectionGrid};
use skewcwm::funbasis::{BSplineBasis, Series};
use skewcwm::model::{FlmVariant, ParsimonyConfig, SigmaYFamily};
use skewcwm::skewdist::FamilyKind;
use skewcwm::{Error, Result};

/// Basis of one variable. Without knots the interior knots are equally spaced;
/// without a domain the observed time range of the variable is used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    pub n_basis: usize,
    #[serde(default = "cubic")]
    pub degree: usize,
    #[serde(default)]
    pub interior_knots: Option<Vec<f64>>,
    #[serde(default)]
    pub domain: Option<(f64, f64)>,
}

fn cubic() -> usize {
    3
}

impl Default for BasisSpec {
    fn default() -> Self {
        Self { n_basis: 6, degree: 3, interior_knots: None, domain: None }
    }
}

impl BasisSpec {
    fn build(&self, series: &[&Series]) -> Result<BSplineBasis> {
        let domain = match self.domain {
            Some(d) => d,
            None => {
                let lo = series.iter().flat_map(|s| s.t.first()).copied().fold(f64::INFINITY, f64::min);
                let hi = series.iter().flat_map(|s| s.t.last()).copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
        };
        match &self.interior_knots {
            Some(k) => {
                let b = BSplineBasis::new(self.degree, k.clone(), domain)?;
                if b.n_basis() != self.n_basis {
                    return Err(Error::Domain(format!(
                        "{} interior knots of degree {} give {} functions, not {}",
                        k.len(),
                        self.degree,
                        b.n_basis(),
                        self.n_basis
                    )));
                }
                Ok(b)
            }
            None => BSplineBasis::uniform(self.n_basis, self.degree, domain),
        }
    }
}

/// Everything `fit` and `benchmark` can be told through `--config`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// One spec shared by every covariate, or one per covariate.
    pub x_basis: Vec<BasisSpec>,
    pub y_basis: Vec<BasisSpec>,
    pub ks: Vec<usize>,
    /// (covariate family, response family) pairs.
    pub families: Vec<(FamilyKind, FamilyKind)>,
    pub flm_variants: Vec<FlmVariant>,
    pub sigma_y_families: Vec<SigmaYFamily>,
    /// (tied covariate concentration, tied response concentration) options.
    pub common_psi: Vec<(bool, bool)>,
    pub thresholds: Vec<f64>,
    pub reselect_dims_every_iteration: bool,
    pub n_starts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    pub init: InitStrategy,
    pub kmeans_restarts: usize,
    pub init_alpha: f64,
    pub init_concentration: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let kinds = [FamilyKind::VG, FamilyKind::ST, FamilyKind::NIG];
        let base = FitConfig::new(FamilyKind::NIG, FamilyKind::NIG);
        Self {
            x_basis: vec![BasisSpec::default()],
            y_basis: vec![BasisSpec::default()],
            ks: vec![1, 2, 3, 4],
            families: kinds.iter().flat_map(|&x| kinds.iter().map(move |&y| (x, y))).collect(),
            flm_variants: vec![base.parsimony.flm_variant],
            sigma_y_families: vec![base.parsimony.sigma_y_family],
            common_psi: vec![(false, false)],
            thresholds: vec![0.2],
            reselect_dims_every_iteration: false,
            n_starts: 1,
            seed: 0,
            max_iter: base.max_iter,
            tol: base.tol,
            init: base.init,
            kmeans_restarts: base.kmeans_restarts,
            init_alpha: base.init_alpha,
            init_concentration: base.init_concentration,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let cfg: RunConfig = skewcwm::io::read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("x_basis", self.x_basis.is_empty()),
            ("y_basis", self.y_basis.is_empty()),
            ("ks", self.ks.is_empty()),
            ("families", self.families.is_empty()),
            ("flm_variants", self.flm_variants.is_empty()),
            ("sigma_y_families", self.sigma_y_families.is_empty()),
            ("common_psi", self.common_psi.is_empty()),
            ("thresholds", self.thresholds.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|e| e.1) {
            return Err(Error::Domain(format!("config: '{name}' must not be empty")));
        }
        if self.ks.contains(&0) {
            return Err(Error::Domain("config: K must be positive".into()));
        }
        if self.thresholds.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
            return Err(Error::Domain("config: thresholds must lie in (0, 1]".into()));
        }
        if self.max_iter == 0 || !(self.tol > 0.0) {
            return Err(Error::Domain("config: max_iter and tol must be positive".into()));
        }
        Ok(())
    }

    pub fn base(&self) -> FitConfig {
        let (fx, fy) = self.families[0];
        let mut cfg = FitConfig::new(fx, fy);
        cfg.dims = DimMode::Cattell {
            threshold: self.thresholds[0],
            every_iteration: self.reselect_dims_every_iteration,
        };
        cfg.max_iter = self.max_iter;
        cfg.tol = self.tol;
        cfg.init = self.init;
        cfg.kmeans_restarts = self.kmeans_restarts;
        cfg.init_alpha = self.init_alpha;
        cfg.init_concentration = self.init_concentration;
        cfg
    }

    pub fn grid(&self) -> SelectionGrid {
        let mut parsimonies = Vec::new();
        for &flm_variant in &self.flm_variants {
            for &sigma_y_family in &self.sigma_y_families {
                for &(common_psi_x, common_psi_y) in &self.common_psi {
                    parsimonies.push(ParsimonyConfig { flm_variant, sigma_y_family, common_psi_x, common_psi_y });
                }
            }
        }
        SelectionGrid {
            ks: self.ks.clone(),
            parsimonies,
            families: self.families.clone(),
            thresholds: self.thresholds.clone(),
        }
    }

    /// Builds one basis per variable; `series[j]` holds every curve's samples of variable j.
    pub fn bases(specs: &[BasisSpec], series: &[Vec<&Series>]) -> Result<Vec<BSplineBasis>> {
        if specs.len() != 1 && specs.len() != series.len() {
            return Err(Error::Domain(format!(
                "config: {} basis specs for {} variables",
                specs.len(),
                series.len()
            )));
        }
        series
            .iter()
            .enumerate()
            .map(|(j, s)| specs[if specs.len() == 1 { 0 } else { j }].build(s))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_fills_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"ks": [2], "families": [["NIG", "VG"]]}"#).unwrap();
        assert_eq!(cfg.ks, vec![2]);
        assert_eq!(cfg.max_iter, 200);
        assert_eq!(cfg.tol, 1e-6);
        cfg.validate().unwrap();
        assert_eq!(cfg.base().family_y, FamilyKind::VG);
        assert!(serde_json::from_str::<RunConfig>(r#"{"kk": 1}"#).is_err());
    }

    #[test]
    fn default_grid_has_nine_family_pairs() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.families.len(), 9);
        assert_eq!(cfg.grid().parsimonies.len(), 1);
    }
}
