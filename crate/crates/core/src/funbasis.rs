//! B-spline bases, least-squares smoothing of discretized curves onto them,
//! and the Gram matrix of inner products between basis functions.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// B-spline basis with clamped (repeated) boundary knots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BSplineBasis {
    pub degree: usize,
    pub interior_knots: Vec<f64>,
    pub domain: (f64, f64),
}

impl BSplineBasis {
    pub fn new(degree: usize, interior_knots: Vec<f64>, domain: (f64, f64)) -> Result<Self> {
        let (lo, hi) = domain;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Domain(format!("invalid domain [{lo}, {hi}]")));
        }
        if interior_knots.iter().any(|&k| !(k > lo && k < hi)) {
            return Err(Error::Domain("interior knots must lie strictly inside the domain".into()));
        }
        if interior_knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain("interior knots must be strictly increasing".into()));
        }
        Ok(Self { degree, interior_knots, domain })
    }

    /// `n_basis` functions of the given degree with equally spaced interior knots.
    pub fn uniform(n_basis: usize, degree: usize, domain: (f64, f64)) -> Result<Self> {
        if n_basis < degree + 1 {
            return Err(Error::Domain(format!(
                "{n_basis} functions cannot carry degree {degree}"
            )));
        }
        let n_int = n_basis - degree - 1;
        let (lo, hi) = domain;
        let knots = (1..=n_int).map(|j| lo + (hi - lo) * j as f64 / (n_int + 1) as f64).collect();
        Self::new(degree, knots, domain)
    }

    pub fn n_basis(&self) -> usize {
        self.interior_knots.len() + self.degree + 1
    }

    /// Full knot sequence with the boundary knots repeated degree + 1 times.
    pub fn knots(&self) -> Vec<f64> {
        let p = self.degree;
        let mut k = vec![self.domain.0; p + 1];
        k.extend_from_slice(&self.interior_knots);
        k.extend(std::iter::repeat(self.domain.1).take(p + 1));
        k
    }

    /// Distinct breakpoints, boundaries included.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = vec![self.domain.0];
        b.extend_from_slice(&self.interior_knots);
        b.push(self.domain.1);
        b
    }

    fn eval_point(&self, knots: &[f64], t: f64, out: &mut [f64]) {
        let p = self.degree;
        let nb = self.n_basis();
        // Span index s with knots[s] <= t < knots[s+1]; the right end uses the last span.
        let s = if t >= self.domain.1 {
            nb - 1
        } else {
            let mut s = p;
            while s < nb - 1 && knots[s + 1] <= t {
                s += 1;
            }
            s
        };
        // Cox-de Boor triangle for the p + 1 nonzero functions on span s.
        let mut n = vec![0.0; p + 1];
        n[0] = 1.0;
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        for j in 1..=p {
            left[j] = t - knots[s + 1 - j];
            right[j] = knots[s + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        out.iter_mut().for_each(|x| *x = 0.0);
        for (j, v) in n.into_iter().enumerate() {
            out[s - p + j] = v;
        }
    }

    /// Basis values, one row per point and one column per function.
    pub fn eval_basis(&self, t: &[f64]) -> Result<DMatrix<f64>> {
        let (lo, hi) = self.domain;
        let knots = self.knots();
        let nb = self.n_basis();
        let mut m = DMatrix::zeros(t.len(), nb);
        let mut row = vec![0.0; nb];
        for (i, &ti) in t.iter().enumerate() {
            if !(ti >= lo && ti <= hi) {
                return Err(Error::Domain(format!("t = {ti} outside [{lo}, {hi}]")));
            }
            self.eval_point(&knots, ti, &mut row);
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        Ok(m)
    }

    /// Gram matrix of this basis alone.
    pub fn gram(&self) -> DMatrix<f64> {
        let m = (2 * self.degree + 1).div_ceil(2) + 1;
        let (nodes, weights) = gauss_legendre(m);
        let nb = self.n_basis();
        let mut g = DMatrix::zeros(nb, nb);
        for span in self.breakpoints().windows(2) {
            let (a, b) = (span[0], span[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            let ts: Vec<f64> = nodes.iter().map(|x| mid + half * x).collect();
            let vals = self.eval_basis(&ts).expect("nodes inside the domain");
            for (q, w) in weights.iter().enumerate() {
                let row = vals.row(q);
                for r in 0..nb {
                    if row[r] == 0.0 {
                        continue;
                    }
                    for c in 0..nb {
                        g[(r, c)] += half * w * row[r] * row[c];
                    }
                }
            }
        }
        // Exact symmetry.
        let gt = g.transpose();
        (g + gt) * 0.5
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_m.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..m {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = m as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[m - 1 - i] = w[i];
    }
    (x, w)
}

/// Block-diagonal Gram matrix, one block per basis.
pub fn gram_matrix(bases: &[BSplineBasis]) -> DMatrix<f64> {
    let total: usize = bases.iter().map(|b| b.n_basis()).sum();
    let mut g = DMatrix::zeros(total, total);
    let mut off = 0;
    for b in bases {
        let nb = b.n_basis();
        g.view_mut((off, off), (nb, nb)).copy_from(&b.gram());
        off += nb;
    }
    g
}

/// Symmetric square root of a symmetric positive semidefinite matrix.
pub fn sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::Domain("sqrt_psd needs a square matrix".into()));
    }
    let scale = m.amax().max(1e-300);
    if (m - m.transpose()).amax() > 1e-10 * scale {
        return Err(Error::Domain("sqrt_psd needs a symmetric matrix".into()));
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut vals = eig.eigenvalues.clone();
    if vals.iter().any(|&v| v < -1e-10 * scale) {
        return Err(Error::Domain("sqrt_psd needs a positive semidefinite matrix".into()));
    }
    vals.iter_mut().for_each(|v| *v = v.max(0.0).sqrt());
    let q = &eig.eigenvectors;
    let r = q * DMatrix::from_diagonal(&vals) * q.transpose();
    let rt = r.transpose();
    Ok((r + rt) * 0.5)
}

/// Whether a variable is a covariate or a response.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    X,
    Y,
}

/// One discretized curve of one variable.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Series {
    pub t: Vec<f64>,
    pub values: Vec<f64>,
}

/// Discretized observations: for each curve, one series per covariate and per response variable.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct CurveSet {
    pub ids: Vec<String>,
    pub x_names: Vec<String>,
    pub y_names: Vec<String>,
    /// x[i][j]: curve i, covariate j
    pub x: Vec<Vec<Series>>,
    /// y[i][l]: curve i, response l
    pub y: Vec<Vec<Series>>,
}

impl CurveSet {
    pub fn n(&self) -> usize {
        self.ids.len()
    }
}

/// Basis coefficients of paired curves plus the covariate Gram metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalDataset {
    pub ids: Vec<String>,
    pub x_names: Vec<String>,
    pub y_names: Vec<String>,
    pub x_bases: Vec<BSplineBasis>,
    pub y_bases: Vec<BSplineBasis>,
    /// n x R^X, variable-major column blocks
    #[serde(with = "crate::serde_mat::mat")]
    pub c_x: DMatrix<f64>,
    /// n x R^Y
    #[serde(with = "crate::serde_mat::mat")]
    pub c_y: DMatrix<f64>,
    #[serde(with = "crate::serde_mat::mat")]
    pub w_x: DMatrix<f64>,
    #[serde(with = "crate::serde_mat::mat")]
    pub w_x_sqrt: DMatrix<f64>,
}

fn fit_series(basis: &BSplineBasis, s: &Series, id: &str, name: &str) -> Result<DVector<f64>> {
    if s.t.len() != s.values.len() {
        return Err(Error::Domain(format!("curve {id}, variable {name}: t and values differ in length")));
    }
    if s.t.len() < basis.n_basis() {
        return Err(Error::Domain(format!(
            "curve {id}, variable {name}: {} points for {} basis functions",
            s.t.len(),
            basis.n_basis()
        )));
    }
    if s.t.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain(format!(
            "curve {id}, variable {name}: sampling times must be strictly increasing"
        )));
    }
    let b = basis.eval_basis(&s.t)?;
    let svd = b.svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-12 * smax {
        return Err(Error::Domain(format!(
            "curve {id}, variable {name}: rank-deficient design (too few distinct points per span)"
        )));
    }
    let y = DVector::from_column_slice(&s.values);
    svd.solve(&y, 0.0).map_err(|e| Error::Domain(format!("curve {id}: {e}")))
}

fn fit_side(
    ids: &[String],
    names: &[String],
    series: &[Vec<Series>],
    bases: &[BSplineBasis],
) -> Result<DMatrix<f64>> {
    if bases.len() != names.len() {
        return Err(Error::Domain(format!(
            "{} bases for {} variables",
            bases.len(),
            names.len()
        )));
    }
    let r: usize = bases.iter().map(|b| b.n_basis()).sum();
    let rows: Vec<Vec<f64>> = series
        .par_iter()
        .zip(ids.par_iter())
        .map(|(vars, id)| {
            if vars.len() != bases.len() {
                return Err(Error::Domain(format!("curve {id}: wrong number of variables")));
            }
            let mut row = Vec::with_capacity(r);
            for ((s, b), name) in vars.iter().zip(bases).zip(names) {
                row.extend(fit_series(b, s, id, name)?.iter());
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(ids.len(), r, |i, j| rows[i][j]))
}

impl FunctionalDataset {
    /// Least-squares coefficients of every curve on its variable's basis.
    pub fn fit(curves: &CurveSet, x_bases: &[BSplineBasis], y_bases: &[BSplineBasis]) -> Result<Self> {
        if curves.x.len() != curves.n() || curves.y.len() != curves.n() {
            return Err(Error::Domain("curve set is ragged".into()));
        }
        let c_x = fit_side(&curves.ids, &curves.x_names, &curves.x, x_bases)?;
        let c_y = fit_side(&curves.ids, &curves.y_names, &curves.y, y_bases)?;
        let w_x = gram_matrix(x_bases);
        let w_x_sqrt = sqrt_psd(&w_x)?;
        Ok(Self {
            ids: curves.ids.clone(),
            x_names: curves.x_names.clone(),
            y_names: curves.y_names.clone(),
            x_bases: x_bases.to_vec(),
            y_bases: y_bases.to_vec(),
            c_x,
            c_y,
            w_x,
            w_x_sqrt,
        })
    }

    /// Dataset straight from coefficient matrices and a metric (no curves, no bases).
    pub fn from_parts(c_x: DMatrix<f64>, c_y: DMatrix<f64>, w_x: DMatrix<f64>) -> Result<Self> {
        let n = c_x.nrows();
        if c_y.nrows() != n || w_x.shape() != (c_x.ncols(), c_x.ncols()) {
            return Err(Error::Domain("inconsistent coefficient/metric dimensions".into()));
        }
        let w_x_sqrt = sqrt_psd(&w_x)?;
        Ok(Self {
            ids: (0..n).map(|i| i.to_string()).collect(),
            x_names: vec![],
            y_names: vec![],
            x_bases: vec![],
            y_bases: vec![],
            c_x,
            c_y,
            w_x,
            w_x_sqrt,
        })
    }

    pub fn n(&self) -> usize {
        self.c_x.nrows()
    }

    pub fn rx(&self) -> usize {
        self.c_x.ncols()
    }

    pub fn ry(&self) -> usize {
        self.c_y.ncols()
    }

    /// Evaluates side-`role` curve `i` (or any coefficient row) on a grid, one column per variable.
    pub fn reconstruct(bases: &[BSplineBasis], coef: &[f64], t: &[f64]) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(t.len(), bases.len());
        let mut off = 0;
        for (j, b) in bases.iter().enumerate() {
            let e = b.eval_basis(t)?;
            let nb = b.n_basis();
            let c = DVector::from_column_slice(&coef[off..off + nb]);
            out.set_column(j, &(e * c));
            off += nb;
        }
        Ok(out)
    }
}
