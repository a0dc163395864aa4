//! Reference computations for the test suites.
//!
//! Everything here is written from the defining integrals and closed forms,
//! sharing no code with the `skewcwm` implementation paths it is used to check.
//! Speed is irrelevant; only accuracy matters.

use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Globally adaptive Gauss-Kronrod quadrature on a finite interval.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let mut parts = vec![(a, b, gk15(&f, a, b))];
    for _ in 0..20_000 {
        let total: f64 = parts.iter().map(|p| p.2 .0).sum();
        let err: f64 = parts.iter().map(|p| p.2 .1).sum();
        if err <= rel_tol * total.abs().max(1e-300) {
            return total;
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.partial_cmp(&y.1 .2 .1).unwrap())
            .unwrap();
        let (lo, hi, _) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        parts.push((lo, mid, gk15(&f, lo, mid)));
        parts.push((mid, hi, gk15(&f, mid, hi)));
    }
    parts.iter().map(|p| p.2 .0).sum()
}

/// log of the integral of exp(log_f) over [a, b], shifting by the grid maximum
/// so that the integrand stays representable.
pub fn log_integrate<F: Fn(f64) -> f64>(log_f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let shift = (0..=2000)
        .map(|i| log_f(a + (b - a) * i as f64 / 2000.0))
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let val = integrate(|t| (log_f(t) - shift).exp(), a, b, rel_tol);
    val.ln() + shift
}

/// log K_lambda(x) from the integral representation
/// K = 1/2 * int_0^inf w^(lambda-1) exp(-x (w + 1/w) / 2) dw, with w = e^t.
pub fn log_bessel_k_quad(lambda: f64, x: f64) -> f64 {
    let log_f = |t: f64| lambda * t - x * (t.cosh() - 1.0);
    // Integrand decays like exp(-x e^|t| / 2); this window is generous for x >= 1e-3.
    let lim = 2.0 + ((lambda.abs() + 40.0) / x.min(1.0)).ln().max(1.0) * 1.5;
    let lo = -lim - 5.0;
    let hi = lim + 5.0;
    log_integrate(log_f, lo, hi, 1e-14) + 0.5f64.ln() - x
}

/// Unnormalized log GIG(a, b, lambda) kernel in t = log w, including the Jacobian.
fn gig_log_kernel_t(t: f64, a: f64, b: f64, lambda: f64) -> f64 {
    let w = t.exp();
    lambda * t - 0.5 * (a * w + b / w)
}

fn gig_window(a: f64, b: f64, lambda: f64) -> (f64, f64) {
    // Locate the mode in t and expand until the log kernel drops by 80.
    let f = |t: f64| gig_log_kernel_t(t, a, b, lambda);
    let mut best = (0.0, f(0.0));
    let mut t = -60.0;
    while t <= 60.0 {
        let v = f(t);
        if v > best.1 {
            best = (t, v);
        }
        t += 0.01;
    }
    let mut lo = best.0;
    while f(lo) > best.1 - 80.0 && lo > -700.0 {
        lo -= 0.25;
    }
    let mut hi = best.0;
    while f(hi) > best.1 - 80.0 && hi < 700.0 {
        hi += 0.25;
    }
    (lo, hi)
}

/// E[W], E[1/W], E[log W] for W ~ GIG(a, b, lambda), by direct quadrature of the density.
pub fn gig_moments_quad(a: f64, b: f64, lambda: f64) -> (f64, f64, f64) {
    let (lo, hi) = gig_window(a, b, lambda);
    let k = |t: f64| gig_log_kernel_t(t, a, b, lambda);
    let log_norm = log_integrate(k, lo, hi, 1e-14);
    let e_w = log_integrate(|t| k(t) + t, lo, hi, 1e-14) - log_norm;
    let e_iw = log_integrate(|t| k(t) - t, lo, hi, 1e-14) - log_norm;
    let shift = (0..=400)
        .map(|i| k(lo + (hi - lo) * i as f64 / 400.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let num = integrate(|t| t * (k(t) - shift).exp(), lo, hi, 1e-14);
    let den = integrate(|t| (k(t) - shift).exp(), lo, hi, 1e-14);
    (e_w.exp(), e_iw.exp(), num / den)
}

/// Mixing-law kinds, expressed as in the defining pdfs.
#[derive(Clone, Copy, Debug)]
pub enum Mixing {
    /// W ~ Gamma(psi, rate psi)
    Gamma(f64),
    /// W ~ InvGamma(nu/2, nu/2)
    InvGamma(f64),
    /// W ~ IN(1, kappa)
    InvGaussian(f64),
}

impl Mixing {
    pub fn log_pdf(&self, w: f64) -> f64 {
        match *self {
            Mixing::Gamma(psi) => psi * psi.ln() - ln_gamma(psi) + (psi - 1.0) * w.ln() - psi * w,
            Mixing::InvGamma(nu) => {
                let h = nu / 2.0;
                h * h.ln() - ln_gamma(h) - (h + 1.0) * w.ln() - h / w
            }
            Mixing::InvGaussian(kappa) => {
                -0.5 * (2.0 * PI).ln() + kappa - 1.5 * w.ln() - 0.5 * (1.0 / w + kappa * kappa * w)
            }
        }
    }
}

/// Dense lower Cholesky factor of a small SPD matrix (row-major rows).
pub fn cholesky(s: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = s.len();
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let mut acc = s[i][j];
            for k in 0..j {
                acc -= l[i][k] * l[j][k];
            }
            if i == j {
                assert!(acc > 0.0, "matrix not positive definite");
                l[i][i] = acc.sqrt();
            } else {
                l[i][j] = acc / l[j][j];
            }
        }
    }
    l
}

fn forward(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let d = b.len();
    let mut y = vec![0.0; d];
    for i in 0..d {
        let mut acc = b[i];
        for k in 0..i {
            acc -= l[i][k] * y[k];
        }
        y[i] = acc / l[i][i];
    }
    y
}

/// (delta, rho, lin, log|Sigma|) with delta = (v-mu)' S^-1 (v-mu), rho = a' S^-1 a,
/// lin = (v-mu)' S^-1 a.
pub fn quad_forms(v: &[f64], mu: &[f64], alpha: &[f64], sigma: &[Vec<f64>]) -> (f64, f64, f64, f64) {
    let l = cholesky(sigma);
    let diff: Vec<f64> = v.iter().zip(mu).map(|(a, b)| a - b).collect();
    let zd = forward(&l, &diff);
    let za = forward(&l, alpha);
    let delta = zd.iter().map(|x| x * x).sum();
    let rho = za.iter().map(|x| x * x).sum();
    let lin = zd.iter().zip(&za).map(|(a, b)| a * b).sum();
    let logdet = 2.0 * (0..l.len()).map(|i| l[i][i].ln()).sum::<f64>();
    (delta, rho, lin, logdet)
}

/// log N(v; mu + w alpha, w Sigma)
pub fn log_normal_scaled(v: &[f64], mu: &[f64], alpha: &[f64], sigma: &[Vec<f64>], w: f64) -> f64 {
    let d = v.len() as f64;
    let (delta, rho, lin, logdet) = quad_forms(v, mu, alpha, sigma);
    // (v - mu - w a)' (w S)^-1 (v - mu - w a) = delta / w - 2 lin + w rho
    let q = delta / w - 2.0 * lin + w * rho;
    -0.5 * d * (2.0 * PI).ln() - 0.5 * (logdet + d * w.ln()) - 0.5 * q
}

/// log of  int_0^inf N(v; mu + w alpha, w Sigma) h(w) dw  by quadrature in t = log w.
pub fn log_mixture_density_quad(
    v: &[f64],
    mu: &[f64],
    alpha: &[f64],
    sigma: &[Vec<f64>],
    mixing: Mixing,
) -> f64 {
    let f = |t: f64| {
        let w = t.exp();
        log_normal_scaled(v, mu, alpha, sigma, w) + mixing.log_pdf(w) + t
    };
    let mut best = (0.0, f(0.0));
    let mut t = -40.0;
    while t <= 40.0 {
        let val = f(t);
        if val.is_finite() && val > best.1 {
            best = (t, val);
        }
        t += 0.01;
    }
    let mut lo = best.0;
    while f(lo) > best.1 - 80.0 && lo > -600.0 {
        lo -= 0.25;
    }
    let mut hi = best.0;
    while f(hi) > best.1 - 80.0 && hi < 600.0 {
        hi += 0.25;
    }
    log_integrate(f, lo, hi, 1e-13)
}

/// The variance-gamma log density, transcribed factor by factor from its closed form.
pub fn log_pdf_vg(
    v: &[f64],
    mu: &[f64],
    alpha: &[f64],
    sigma: &[Vec<f64>],
    psi: f64,
    log_k: &dyn Fn(f64, f64) -> f64,
) -> f64 {
    let d = v.len() as f64;
    let (delta, rho, lin, logdet) = quad_forms(v, mu, alpha, sigma);
    let lam = psi - d / 2.0;
    2f64.ln() + psi * psi.ln() + lin
        - (d / 2.0) * (2.0 * PI).ln()
        - 0.5 * logdet
        - ln_gamma(psi)
        + (lam / 2.0) * (delta / (rho + 2.0 * psi)).ln()
        + log_k(lam, ((rho + 2.0 * psi) * delta).sqrt())
}

/// The skew-t log density, transcribed from its closed form.
pub fn log_pdf_st(
    v: &[f64],
    mu: &[f64],
    alpha: &[f64],
    sigma: &[Vec<f64>],
    nu: f64,
    log_k: &dyn Fn(f64, f64) -> f64,
) -> f64 {
    let d = v.len() as f64;
    let (delta, rho, lin, logdet) = quad_forms(v, mu, alpha, sigma);
    2f64.ln() + (nu / 2.0) * (nu / 2.0).ln() + lin
        - (d / 2.0) * (2.0 * PI).ln()
        - 0.5 * logdet
        - ln_gamma(nu / 2.0)
        - ((nu + d) / 4.0) * ((delta + nu) / rho).ln()
        + log_k(-(nu + d) / 2.0, (rho * (delta + nu)).sqrt())
}

/// The normal-inverse-Gaussian log density, transcribed from its closed form.
pub fn log_pdf_nig(
    v: &[f64],
    mu: &[f64],
    alpha: &[f64],
    sigma: &[Vec<f64>],
    kappa: f64,
    log_k: &dyn Fn(f64, f64) -> f64,
) -> f64 {
    let d = v.len() as f64;
    let (delta, rho, lin, logdet) = quad_forms(v, mu, alpha, sigma);
    2f64.ln() + lin + kappa
        - ((d + 1.0) / 2.0) * (2.0 * PI).ln()
        - 0.5 * logdet
        - ((1.0 + d) / 4.0) * ((delta + 1.0) / (rho + kappa * kappa)).ln()
        + log_k(-(1.0 + d) / 2.0, ((rho + kappa * kappa) * (delta + 1.0)).sqrt())
}

/// Hubert-Arabie adjusted Rand index straight from pair counts (O(n^2)).
pub fn ari_pairs(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut only_a, mut only_b, mut none) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..n {
        for j in (i + 1)..n {
            let sa = a[i] == a[j];
            let sb = b[i] == b[j];
            match (sa, sb) {
                (true, true) => both += 1.0,
                (true, false) => only_a += 1.0,
                (false, true) => only_b += 1.0,
                (false, false) => none += 1.0,
            }
        }
    }
    let total = both + only_a + only_b + none;
    let expected = (both + only_a) * (both + only_b) / total;
    let max = 0.5 * ((both + only_a) + (both + only_b));
    (both - expected) / (max - expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_half_order_closed_form() {
        let x: f64 = 2.0;
        let exact = (PI / (2.0 * x)).sqrt().ln() - x;
        assert!((log_bessel_k_quad(0.5, x) - exact).abs() < 1e-12);
    }

    #[test]
    fn gig_moments_half_order() {
        let (ew, eiw, _) = gig_moments_quad(2.0, 2.0, 0.5);
        assert!((ew - 1.5).abs() < 1e-10);
        assert!((eiw - 1.0).abs() < 1e-10);
    }

    #[test]
    fn normal_mixture_gaussian_limit() {
        // A very concentrated gamma mixing law is nearly normal.
        let s = vec![vec![1.0]];
        let v = [0.3];
        let lp = log_mixture_density_quad(&v, &[0.0], &[0.0], &s, Mixing::Gamma(1e6));
        let normal = -0.5 * (2.0 * PI).ln() - 0.045;
        assert!((lp - normal).abs() < 1e-5);
    }
}
