use crate::error::{Error, Result};

pub use statrs::function::gamma::ln_gamma;

// Bernoulli-number coefficients B_2k / (2k) of the digamma asymptotic series.
const DIGAMMA_ASYM: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
];

// B_2k coefficients of the trigamma asymptotic series.
const TRIGAMMA_ASYM: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

const SHIFT: f64 = 10.0;

/// Digamma for x > 0: upward recurrence to x >= 10, then the asymptotic series.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("digamma needs x > 0, got {x}")));
    }
    Ok(digamma_unchecked(x))
}

pub(crate) fn digamma_unchecked(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < SHIFT {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    let mut series = 0.0;
    let mut p = x2;
    for c in DIGAMMA_ASYM {
        series += c * p;
        p *= x2;
    }
    acc + x.ln() - 0.5 / x - series
}

/// Trigamma for x > 0, same scheme as [`digamma`].
pub fn trigamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("trigamma needs x > 0, got {x}")));
    }
    Ok(trigamma_unchecked(x))
}

pub(crate) fn trigamma_unchecked(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < SHIFT {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let ix = 1.0 / x;
    let x2 = ix * ix;
    let mut series = 0.0;
    let mut p = x2 * ix;
    for c in TRIGAMMA_ASYM {
        series += c * p;
        p *= x2;
    }
    acc + ix + 0.5 * x2 + series
}

#[cfg(test)]
mod tests {
    use super::*;

    const EULER: f64 = 0.577_215_664_901_532_9;

    #[test]
    fn digamma_reference_values() {
        assert!((digamma(1.0).unwrap() + EULER).abs() < 1e-13);
        assert!((digamma(2.0).unwrap() - (1.0 - EULER)).abs() < 1e-13);
        // psi(1/2) = -gamma - 2 ln 2
        assert!((digamma(0.5).unwrap() + EULER + 2.0 * 2f64.ln()).abs() < 1e-13);
        assert!(digamma(0.0).is_err());
        assert!(digamma(-1.0).is_err());
    }

    #[test]
    fn trigamma_reference_values() {
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((trigamma(1.0).unwrap() - pi2_6).abs() < 1e-12);
        assert!((trigamma(0.5).unwrap() - 3.0 * pi2_6).abs() < 1e-12);
    }

    #[test]
    fn trigamma_is_derivative_of_digamma() {
        for &x in &[0.01, 0.3, 1.7, 8.0, 55.0, 1e4] {
            let h = 1e-5 * x;
            let fd = (digamma_unchecked(x + h) - digamma_unchecked(x - h)) / (2.0 * h);
            assert!((fd - trigamma_unchecked(x)).abs() < 1e-6 * trigamma_unchecked(x));
        }
    }
}
