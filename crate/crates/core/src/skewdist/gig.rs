use super::bessel::{d_ln_k, ln_k};
use super::special::{digamma_unchecked, ln_gamma};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

/// Generalized inverse Gaussian law with density proportional to
/// w^(lambda-1) exp(-(a w + b / w) / 2) on w > 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GigParams {
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
}

impl GigParams {
    /// `b = 0` is accepted for `lambda > 0` (the Gamma end of the family).
    pub fn new(a: f64, b: f64, lambda: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::Domain(format!("GIG needs a > 0, got {a}")));
        }
        if !(b >= 0.0) || !b.is_finite() || !lambda.is_finite() {
            return Err(Error::Domain(format!("GIG needs b >= 0, got b={b}, lambda={lambda}")));
        }
        if b == 0.0 && lambda <= 0.0 {
            return Err(Error::Domain(format!(
                "GIG with b = 0 needs lambda > 0, got {lambda}"
            )));
        }
        Ok(Self { a, b, lambda })
    }

    /// Log density at w > 0.
    pub fn log_pdf(&self, w: f64) -> f64 {
        let Self { a, b, lambda } = *self;
        if b == 0.0 {
            let rate = 0.5 * a;
            return lambda * rate.ln() - ln_gamma(lambda) + (lambda - 1.0) * w.ln() - rate * w;
        }
        let omega = (a * b).sqrt();
        0.5 * lambda * (a / b).ln() + (lambda - 1.0) * w.ln()
            - LN_2
            - ln_k(lambda.abs(), omega)
            - 0.5 * (a * w + b / w)
    }
}

/// E[W], E[1/W] and E[log W].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GigMoments {
    pub e_w: f64,
    pub e_inv_w: f64,
    pub e_log_w: f64,
}

/// Moments of a GIG law. Bessel ratios are differences of logs; E[1/W] uses
/// K_{lambda-1}/K_lambda, which equals the textbook
/// sqrt(a/b) K_{lambda+1}/K_lambda - 2 lambda / b without its cancellation.
pub fn gig_expectations(p: &GigParams) -> Result<GigMoments> {
    if p.b == 0.0 {
        return gamma_expectations(p.lambda, 0.5 * p.a);
    }
    let GigParams { a, b, lambda } = *p;
    let omega = (a * b).sqrt();
    let base = ln_k(lambda.abs(), omega);
    let up = ln_k((lambda + 1.0).abs(), omega);
    let down = ln_k((lambda - 1.0).abs(), omega);
    let half_log = 0.5 * (b / a).ln();
    Ok(GigMoments {
        e_w: (half_log + up - base).exp(),
        e_inv_w: (down - base - half_log).exp(),
        e_log_w: half_log + d_ln_k(lambda, omega),
    })
}

/// Moments of Gamma(shape, rate); E[1/W] needs shape > 1.
pub fn gamma_expectations(shape: f64, rate: f64) -> Result<GigMoments> {
    if shape <= 1.0 {
        return Err(Error::Model(format!(
            "E[1/W] is infinite for a Gamma law with shape {shape} <= 1"
        )));
    }
    Ok(GigMoments {
        e_w: shape / rate,
        e_inv_w: rate / (shape - 1.0),
        e_log_w: digamma_unchecked(shape) - rate.ln(),
    })
}

/// Moments of InvGamma(shape, scale); E[W] is infinite for shape <= 1.
pub fn inv_gamma_expectations(shape: f64, scale: f64) -> GigMoments {
    GigMoments {
        e_w: if shape > 1.0 { scale / (shape - 1.0) } else { f64::INFINITY },
        e_inv_w: shape / scale,
        e_log_w: scale.ln() - digamma_unchecked(shape),
    }
}

/// Moments of the law proportional to w^(lambda-1) exp(-(a w + b/w)/2),
/// covering both degenerate ends (a = 0 inverse Gamma, b = 0 Gamma).
pub fn latent_moments(a: f64, b: f64, lambda: f64) -> Result<GigMoments> {
    if a == 0.0 {
        if b > 0.0 && lambda < 0.0 {
            return Ok(inv_gamma_expectations(-lambda, 0.5 * b));
        }
        return Err(Error::Model(format!(
            "latent law with a = 0 needs b > 0 and lambda < 0 (b={b}, lambda={lambda})"
        )));
    }
    gig_expectations(&GigParams::new(a, b, lambda)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_order_closed_form() {
        let m = gig_expectations(&GigParams::new(2.0, 2.0, 0.5).unwrap()).unwrap();
        assert!((m.e_w - 1.5).abs() < 1e-13);
        assert!((m.e_inv_w - 1.0).abs() < 1e-13);
    }

    #[test]
    fn symmetric_case() {
        let m = gig_expectations(&GigParams::new(3.0, 3.0, 0.0).unwrap()).unwrap();
        assert!((m.e_w - m.e_inv_w).abs() < 1e-13);
        assert!(m.e_log_w.abs() < 1e-10);
    }

    #[test]
    fn textbook_inverse_moment_agrees() {
        let p = GigParams::new(1.3, 0.4, -2.2).unwrap();
        let m = gig_expectations(&p).unwrap();
        let omega = (p.a * p.b).sqrt();
        let ratio = (ln_k(1.2, omega) - ln_k(2.2, omega)).exp();
        let textbook = (p.a / p.b).sqrt() * ratio - 2.0 * p.lambda / p.b;
        assert!((m.e_inv_w - textbook).abs() < 1e-12 * textbook);
    }

    #[test]
    fn gamma_limit_is_continuous() {
        let g = gamma_expectations(3.0, 1.5).unwrap();
        let m = gig_expectations(&GigParams::new(3.0, 1e-9, 3.0).unwrap()).unwrap();
        assert!((g.e_w - m.e_w).abs() < 1e-6);
        assert!((g.e_inv_w - m.e_inv_w).abs() < 1e-6);
        assert!((g.e_log_w - m.e_log_w).abs() < 1e-6);
    }

    #[test]
    fn constructor_rejects() {
        assert!(GigParams::new(0.0, 1.0, 1.0).is_err());
        assert!(GigParams::new(1.0, -1.0, 1.0).is_err());
        assert!(GigParams::new(1.0, 0.0, -1.0).is_err());
        assert!(GigParams::new(1.0, 0.0, 2.0).is_ok());
    }
}
