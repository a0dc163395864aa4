//! Modified Bessel function of the second kind, K_lambda(x), on the log scale.
//!
//! Orders are reduced to |mu| <= 1/2 and K_mu, K_{mu+1} are obtained from
//! Temme's series (x <= 2) or Steed's continued fraction (x > 2); the target
//! order is then reached by the forward recurrence written in ratio form,
//! which is stable for K. Large orders use the Debye uniform expansion.

use super::special::ln_gamma;
use crate::error::{Error, Result};
use std::f64::consts::{LN_2, PI};

const EPS: f64 = 1e-16;
const MAX_IT: usize = 100_000;
const DEBYE_ORDER: f64 = 100.0;
const SMALL_ARG: f64 = 1e-8;
/// Step of the central difference used for the order derivative.
pub const ORDER_STEP: f64 = 1e-4;

// Taylor coefficients of 1/Gamma(z) about 0.
const RGAM: [f64; 26] = [
    1.0,
    0.577_215_664_901_532_9,
    -0.655_878_071_520_253_8,
    -0.042_002_635_034_095_2,
    0.166_538_611_382_291_5,
    -0.042_197_734_555_544_3,
    -0.009_621_971_527_877_0,
    0.007_218_943_246_663_0,
    -0.001_165_167_591_859_1,
    -0.000_215_241_674_114_9,
    0.000_128_050_282_388_2,
    -0.000_020_134_854_780_7,
    -0.000_001_250_493_482_1,
    0.000_001_133_027_232_0,
    -0.000_000_205_633_841_7,
    0.000_000_006_116_095_0,
    0.000_000_005_002_007_5,
    -0.000_000_001_181_274_6,
    0.000_000_000_104_342_7,
    0.000_000_000_007_782_3,
    -0.000_000_000_003_696_8,
    0.000_000_000_000_510_0,
    -0.000_000_000_000_020_6,
    -0.000_000_000_000_005_4,
    0.000_000_000_000_001_4,
    0.000_000_000_000_000_1,
];

/// (gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu)) as used by Temme's method.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    // 1/Gamma(1 +- mu) = sum_k c_k (+-mu)^(k-1); split into odd and even k.
    let mu2 = mu * mu;
    let mut gam1 = 0.0;
    let mut gam2 = 0.0;
    let mut p = 1.0;
    for pair in RGAM.chunks(2) {
        gam2 += pair[0] * p;
        gam1 -= pair[1] * p;
        p *= mu2;
    }
    let gampl = gam2 - mu * gam1;
    let gammi = gam2 + mu * gam1;
    (gam1, gam2, gampl, gammi)
}

/// ln K_mu(x) and ln K_{mu+1}(x) for |mu| <= 1/2, x <= 2.
fn temme(mu: f64, x: f64) -> (f64, f64) {
    let x2 = 0.5 * x;
    let pimu = PI * mu;
    let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
    let d = -x2.ln();
    let e = mu * d;
    let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
    let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
    let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
    let mut sum = ff;
    let ee = e.exp();
    let mut p = 0.5 * ee / gampl;
    let mut q = 0.5 / (ee * gammi);
    let mut c = 1.0;
    let dd = x2 * x2;
    let mut sum1 = p;
    let mu2 = mu * mu;
    for i in 1..MAX_IT {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi - mu2);
        c *= dd / fi;
        p /= fi - mu;
        q /= fi + mu;
        let del = c * ff;
        sum += del;
        sum1 += c * (p - fi * ff);
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    (sum.ln(), sum1.ln() + (2.0 / x).ln())
}

/// ln K_mu(x) and the ratio K_{mu+1}/K_mu for |mu| <= 1/2, x > 2.
fn steed(mu: f64, x: f64) -> (f64, f64) {
    let mu2 = mu * mu;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - mu2;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..MAX_IT {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    h *= a1;
    let ln_k = 0.5 * (PI / (2.0 * x)).ln() - x - s.ln();
    (ln_k, (mu + x + 0.5 - h) / x)
}

/// Debye uniform asymptotic expansion of ln K_nu(x) for large nu.
fn debye(nu: f64, x: f64) -> f64 {
    let z = x / nu;
    let s = (1.0 + z * z).sqrt();
    let t = 1.0 / s;
    let eta = s + (z / (1.0 + s)).ln();
    let t2 = t * t;
    let u1 = t * (3.0 - 5.0 * t2) / 24.0;
    let u2 = t2 * (81.0 + t2 * (-462.0 + t2 * 385.0)) / 1152.0;
    let u3 = t * t2 * (30375.0 + t2 * (-369603.0 + t2 * (765765.0 - t2 * 425425.0))) / 414720.0;
    let u4 = t2
        * t2
        * (4465125.0
            + t2 * (-94121676.0 + t2 * (349922430.0 + t2 * (-446185740.0 + t2 * 185910725.0))))
        / 39813120.0;
    let inv = 1.0 / nu;
    let series = 1.0 - inv * (u1 - inv * (u2 - inv * (u3 - inv * u4)));
    0.5 * (PI / (2.0 * nu)).ln() - nu * eta - 0.5 * s.ln() + series.ln()
}

fn check(lambda: f64, x: f64) -> Result<()> {
    if !lambda.is_finite() || !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!(
            "Bessel K needs finite order and x > 0, got lambda={lambda}, x={x}"
        )));
    }
    Ok(())
}

/// ln K_nu(x) for nu >= 0, x > 0 (inputs already validated).
pub(crate) fn ln_k(nu: f64, x: f64) -> f64 {
    if nu >= DEBYE_ORDER {
        return debye(nu, x);
    }
    if x < SMALL_ARG && nu >= 1.0 {
        // K_nu(x) ~ Gamma(nu)/2 (x/2)^-nu
        return ln_gamma(nu) - LN_2 - nu * (0.5 * x).ln();
    }
    let n = (nu + 0.5).floor();
    let mu = nu - n;
    let n = n as usize;
    let (ln_kmu, ratio0) = if x <= 2.0 {
        let (a, b) = temme(mu, x);
        (a, (b - a).exp())
    } else {
        steed(mu, x)
    };
    if n == 0 {
        return ln_kmu;
    }
    // r_i = K_{mu+i+1}/K_{mu+i}
    let mut r = ratio0;
    let mut acc = ln_kmu + r.ln();
    for i in 1..n {
        r = 2.0 * (mu + i as f64) / x + 1.0 / r;
        acc += r.ln();
    }
    acc
}

/// ln K_lambda(x). Symmetric in lambda by construction.
pub fn log_bessel_k(lambda: f64, x: f64) -> Result<f64> {
    check(lambda, x)?;
    Ok(ln_k(lambda.abs(), x))
}

/// d/d lambda of ln K_lambda(x) by a central difference with step [`ORDER_STEP`].
pub fn dlog_bessel_k_dlambda(lambda: f64, x: f64) -> Result<f64> {
    check(lambda, x)?;
    Ok(d_ln_k(lambda, x))
}

pub(crate) fn d_ln_k(lambda: f64, x: f64) -> f64 {
    let h = ORDER_STEP;
    (ln_k((lambda + h).abs(), x) - ln_k((lambda - h).abs(), x)) / (2.0 * h)
}
