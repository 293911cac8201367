//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn inf_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn matrix_inf_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Square solve by LU; `None` when the matrix is numerically singular.
pub fn solve(a: &CMatrix, b: &CVector) -> Option<CVector> {
    let x = a.clone().lu().solve(b)?;
    x.iter().all(|z| z.re.is_finite() && z.im.is_finite()).then_some(x)
}

/// Minimum-norm least-squares solution through the SVD, discarding
/// singular values below `rcond * sigma_max`. Returns the solution and the
/// numerical rank.
pub fn lstsq(a: &CMatrix, b: &CVector, rcond: f64) -> Option<(CVector, usize)> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Some((CVector::zeros(a.ncols()), 0));
    }
    let svd = a.clone().try_svd(true, true, f64::EPSILON, 500)?;
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if !(smax > 0.0) {
        return Some((CVector::zeros(a.ncols()), 0));
    }
    let eps = rcond * smax;
    let rank = svd.singular_values.iter().filter(|s| **s > eps).count();
    let x = svd.solve(b, eps).ok()?;
    Some((x, rank))
}

/// Singular values in ascending order.
pub fn singular_values_ascending(a: &CMatrix) -> Option<Vec<f64>> {
    let svd = a.clone().try_svd(false, false, f64::EPSILON, 1000)?;
    let mut s: Vec<f64> = svd.singular_values.iter().cloned().collect();
    s.sort_by(f64::total_cmp);
    Some(s)
}

/// Uniform sample from the complex disc of the given radius.
pub fn random_in_disc<R: Rng>(rng: &mut R, radius: f64) -> C64 {
    let r = radius * rng.gen::<f64>().sqrt();
    let theta = rng.gen::<f64>() * std::f64::consts::TAU;
    C64::from_polar(r, theta)
}

pub fn random_vector<R: Rng>(rng: &mut R, len: usize, radius: f64) -> Vec<C64> {
    (0..len).map(|_| random_in_disc(rng, radius)).collect()
}
