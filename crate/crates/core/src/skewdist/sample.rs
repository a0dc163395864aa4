use super::density::{SkewFamily, SkewParams};
use crate::error::Result;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, InverseGaussian, StandardNormal};

/// One draw of the mixing variable W.
pub fn sample_mixing<R: Rng + ?Sized>(family: SkewFamily, rng: &mut R) -> f64 {
    match family {
        SkewFamily::VG(psi) => Gamma::new(psi, 1.0 / psi).expect("psi > 0").sample(rng),
        SkewFamily::ST(nu) => 1.0 / Gamma::new(0.5 * nu, 2.0 / nu).expect("nu > 0").sample(rng),
        SkewFamily::NIG(kappa) => {
            InverseGaussian::new(1.0 / kappa, 1.0).expect("kappa > 0").sample(rng)
        }
    }
}

/// Draws V = mu + W alpha + sqrt(W) L z using a caller-owned generator.
pub fn sample_skew_with<R: Rng + ?Sized>(
    params: &SkewParams,
    n: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    params.validate()?;
    let d = params.dim();
    let l = params.cholesky()?.unpack();
    let mut out = DMatrix::zeros(n, d);
    for i in 0..n {
        let w = sample_mixing(params.family, rng);
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let v = &params.mu + &params.alpha * w + (&l * z) * w.sqrt();
        out.set_row(i, &v.transpose());
    }
    Ok(out)
}

/// `n` draws (one per row), deterministic in `seed`.
pub fn sample_skew(params: &SkewParams, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_skew_with(params, n, &mut rng)
}
