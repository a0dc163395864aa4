use super::bessel::ln_k;
use super::gig::GigParams;
use super::special::ln_gamma;
use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};

/// Mixing law of a normal variance-mean mixture, with its concentration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "value")]
pub enum SkewFamily {
    /// Variance-gamma: W ~ Gamma(psi, rate psi).
    VG(f64),
    /// Skew-t: W ~ InvGamma(nu/2, nu/2).
    ST(f64),
    /// Normal-inverse-Gaussian: W ~ inverse Gaussian with mean 1/kappa, shape 1.
    NIG(f64),
}

/// Family without its parameter value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyKind {
    VG,
    ST,
    NIG,
}

impl FamilyKind {
    pub fn with(self, value: f64) -> SkewFamily {
        match self {
            FamilyKind::VG => SkewFamily::VG(value),
            FamilyKind::ST => SkewFamily::ST(value),
            FamilyKind::NIG => SkewFamily::NIG(value),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::VG => "VG",
            FamilyKind::ST => "ST",
            FamilyKind::NIG => "NIG",
        }
    }
}

impl std::str::FromStr for FamilyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "VG" => Ok(FamilyKind::VG),
            "ST" => Ok(FamilyKind::ST),
            "NIG" => Ok(FamilyKind::NIG),
            _ => Err(Error::Domain(format!("unknown family '{s}'"))),
        }
    }
}

impl SkewFamily {
    pub fn kind(&self) -> FamilyKind {
        match self {
            SkewFamily::VG(_) => FamilyKind::VG,
            SkewFamily::ST(_) => FamilyKind::ST,
            SkewFamily::NIG(_) => FamilyKind::NIG,
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            SkewFamily::VG(v) | SkewFamily::ST(v) | SkewFamily::NIG(v) => v,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.value();
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::Model(format!("concentration must be positive, got {v}")))
        }
    }

    /// Log density of the mixing variable W.
    pub fn mixing_log_pdf(&self, w: f64) -> f64 {
        match *self {
            SkewFamily::VG(psi) => {
                psi * psi.ln() - ln_gamma(psi) + (psi - 1.0) * w.ln() - psi * w
            }
            SkewFamily::ST(nu) => {
                let h = 0.5 * nu;
                h * h.ln() - ln_gamma(h) - (h + 1.0) * w.ln() - h / w
            }
            SkewFamily::NIG(kappa) => {
                -0.5 * (2.0 * PI).ln() + kappa - 1.5 * w.ln() - 0.5 * (1.0 / w + kappa * kappa * w)
            }
        }
    }

    /// E[W] under the mixing law.
    pub fn mixing_mean(&self) -> f64 {
        match *self {
            SkewFamily::VG(_) => 1.0,
            SkewFamily::ST(nu) if nu > 2.0 => nu / (nu - 2.0),
            SkewFamily::ST(_) => f64::INFINITY,
            SkewFamily::NIG(kappa) => 1.0 / kappa,
        }
    }
}

/// Constants (p1, p2, p3, p4) of the single-formula density shared by the three families.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnifiedConstants {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
}

pub fn unified_constants(family: SkewFamily, d: usize) -> UnifiedConstants {
    let d = d as f64;
    match family {
        SkewFamily::VG(psi) => UnifiedConstants {
            p1: 0.0,
            p2: 2.0 * psi,
            p3: 0.5 * (psi - 0.5 * d),
            p4: psi * psi.ln() - ln_gamma(psi) + LN_2,
        },
        SkewFamily::ST(nu) => UnifiedConstants {
            p1: nu,
            p2: 0.0,
            p3: -0.25 * (nu + d),
            p4: 0.5 * nu * (0.5 * nu).ln() - ln_gamma(0.5 * nu) + LN_2,
        },
        SkewFamily::NIG(kappa) => UnifiedConstants {
            p1: 1.0,
            p2: kappa * kappa,
            p3: -0.25 * (1.0 + d),
            p4: kappa + 0.5 * (2.0 / PI).ln(),
        },
    }
}

impl UnifiedConstants {
    /// p3 log(u) - p3 log(w) + log K_{2 p3}(sqrt(u w)) with u = delta + p1, w = rho + p2.
    ///
    /// At a vanishing Bessel argument the small-argument form
    /// K_nu(z) ~ Gamma(nu)/2 (z/2)^-nu is folded in analytically.
    pub fn bessel_block(&self, delta: f64, rho: f64) -> Result<f64> {
        bessel_block(self.p3, delta + self.p1, rho + self.p2)
    }

    /// Parameters of W given an observation with Mahalanobis terms (delta, rho).
    pub fn conditional(&self, delta: f64, rho: f64) -> (f64, f64, f64) {
        (rho + self.p2, delta + self.p1, 2.0 * self.p3)
    }
}

pub(crate) fn bessel_block(p3: f64, u: f64, w: f64) -> Result<f64> {
    let lambda = 2.0 * p3;
    let z = (u * w).sqrt();
    if z == 0.0 || (z < 1e-8 && lambda.abs() >= 1.0) {
        if lambda > 0.0 && w > 0.0 {
            return Ok(-lambda * w.ln() + ln_gamma(lambda) + (lambda - 1.0) * LN_2);
        }
        if lambda < 0.0 && u > 0.0 {
            return Ok(lambda * u.ln() + ln_gamma(-lambda) + (-lambda - 1.0) * LN_2);
        }
        return Err(Error::Model(format!(
            "density is unbounded here (Bessel order {lambda}, argument 0)"
        )));
    }
    Ok(p3 * (u.ln() - w.ln()) + ln_k(lambda.abs(), z))
}

/// Location, skewness, scatter and mixing law of a skewed multivariate law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkewParams {
    #[serde(with = "crate::serde_mat::vec")]
    pub mu: DVector<f64>,
    #[serde(with = "crate::serde_mat::vec")]
    pub alpha: DVector<f64>,
    #[serde(with = "crate::serde_mat::mat")]
    pub sigma: DMatrix<f64>,
    pub family: SkewFamily,
}

/// Quadratic forms of an observation against a factored scatter matrix.
#[derive(Clone, Copy, Debug)]
pub struct QuadForms {
    /// (v - mu)' S^-1 (v - mu)
    pub delta: f64,
    /// alpha' S^-1 alpha
    pub rho: f64,
    /// (v - mu)' S^-1 alpha
    pub lin: f64,
}

impl SkewParams {
    pub fn new(
        mu: DVector<f64>,
        alpha: DVector<f64>,
        sigma: DMatrix<f64>,
        family: SkewFamily,
    ) -> Result<Self> {
        let p = Self { mu, alpha, sigma, family };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.mu.len();
        if d == 0 || self.alpha.len() != d || self.sigma.shape() != (d, d) {
            return Err(Error::Domain(format!(
                "inconsistent dimensions: mu {}, alpha {}, sigma {:?}",
                d,
                self.alpha.len(),
                self.sigma.shape()
            )));
        }
        self.family.validate()?;
        let asym = (&self.sigma - self.sigma.transpose()).amax();
        if asym > 1e-10 {
            return Err(Error::Model(format!("sigma is not symmetric (max gap {asym:e})")));
        }
        self.cholesky()?;
        Ok(())
    }

    pub fn cholesky(&self) -> Result<Cholesky<f64, Dyn>> {
        Cholesky::new(self.sigma.clone())
            .ok_or_else(|| Error::Model("sigma is not positive definite".into()))
    }

    fn forms(&self, v: &DVector<f64>, chol: &Cholesky<f64, Dyn>) -> Result<QuadForms> {
        if v.len() != self.dim() {
            return Err(Error::Domain(format!(
                "observation has dimension {}, expected {}",
                v.len(),
                self.dim()
            )));
        }
        let l = chol.l_dirty();
        let diff = v - &self.mu;
        let zd = l.solve_lower_triangular(&diff).expect("nonsingular factor");
        let za = l.solve_lower_triangular(&self.alpha).expect("nonsingular factor");
        Ok(QuadForms { delta: zd.norm_squared(), rho: za.norm_squared(), lin: zd.dot(&za) })
    }

    pub fn quad_forms(&self, v: &DVector<f64>) -> Result<QuadForms> {
        self.forms(v, &self.cholesky()?)
    }
}

fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>()
}

/// Log density through the shared single formula.
pub fn skew_log_density(v: &DVector<f64>, params: &SkewParams) -> Result<f64> {
    params.family.validate()?;
    let chol = params.cholesky()?;
    let q = params.forms(v, &chol)?;
    let d = params.dim();
    let c = unified_constants(params.family, d);
    Ok(q.lin + c.bessel_block(q.delta, q.rho)? - 0.5 * d as f64 * (2.0 * PI).ln()
        - 0.5 * log_det(&chol)
        + c.p4)
}

/// Conditional law of the mixing variable W given V = v.
pub fn conditional_gig(v: &DVector<f64>, params: &SkewParams) -> Result<GigParams> {
    params.family.validate()?;
    let q = params.quad_forms(v)?;
    let (a, b, lambda) = unified_constants(params.family, params.dim()).conditional(q.delta, q.rho);
    GigParams::new(a, b, lambda)
}

/// log N(v; mu + w alpha, w Sigma), the conditional law of V given W = w.
pub fn log_normal_given_w(v: &DVector<f64>, params: &SkewParams, w: f64) -> Result<f64> {
    let chol = params.cholesky()?;
    let q = params.forms(v, &chol)?;
    let d = params.dim() as f64;
    let quad = q.delta / w - 2.0 * q.lin + w * q.rho;
    Ok(-0.5 * d * (2.0 * PI).ln() - 0.5 * (log_det(&chol) + d * w.ln()) - 0.5 * quad)
}
