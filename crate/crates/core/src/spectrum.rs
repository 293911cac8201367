//! Eigenvalues of the Darboux Hessian, a numeric diagonalizability test and
//! rational reconstruction of eigenvalues.

use nalgebra::Schur;
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};
use crate::report::CNum;

/// One eigenvalue cluster.
#[derive(Clone, Debug, Serialize)]
pub struct Eigenvalue {
    pub value: CNum,
    /// Algebraic multiplicity (cluster size).
    pub multiplicity: usize,
    /// `n - rank(H - value)`.
    pub geometric_multiplicity: usize,
    #[serde(serialize_with = "crate::report::ser_opt_rational")]
    pub rational: Option<BigRational>,
    pub reconstruction_error: Option<f64>,
    /// How many copies belong to symmetry directions (n-body gauge).
    pub gauge_multiplicity: usize,
}

impl Eigenvalue {
    pub fn c(&self) -> C64 {
        self.value.0
    }

    pub fn physical_multiplicity(&self) -> usize {
        self.multiplicity - self.gauge_multiplicity
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<Eigenvalue>,
    pub diagonalizable: bool,
    /// A decisive singular value fell within a factor 10 of the threshold.
    pub uncertain: bool,
    /// Largest singular value that was treated as zero, relative to
    /// `max(1, |H|)`. Zero when no cluster needed a rank decision.
    pub diag_margin: f64,
    pub tol: f64,
}

impl Spectrum {
    pub fn total_multiplicity(&self) -> usize {
        self.eigenvalues.iter().map(|e| e.multiplicity).sum()
    }

    /// Eigenvalues with their multiplicity expanded, in cluster order.
    pub fn values(&self) -> Vec<C64> {
        self.eigenvalues
            .iter()
            .flat_map(|e| std::iter::repeat_n(e.c(), e.multiplicity))
            .collect()
    }
}

fn schur_eigenvalues(h: &CMatrix) -> Result<Vec<C64>> {
    let n = h.nrows();
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::LinearAlgebra("Hessian has non-finite entries".into()));
    }
    let schur = Schur::try_new(h.clone(), f64::EPSILON, 10_000).ok_or(Error::EigenFailed)?;
    let (_, t) = schur.unpack();
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

/// Clusters eigenvalues (single linkage at `tol * max(1, |H|)`), decides
/// diagonalizability per cluster and attempts rational reconstruction.
pub fn eigen(h: &CMatrix, tol: f64, max_den: u64) -> Result<Spectrum> {
    let n = h.nrows();
    if n != h.ncols() {
        return Err(Error::LinearAlgebra("Hessian is not square".into()));
    }
    let mut raw = schur_eigenvalues(h)?;
    raw.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let scale = linalg::matrix_inf_norm(h).max(1.0);
    let link = tol * scale;

    // single linkage
    let mut clusters: Vec<Vec<C64>> = Vec::new();
    let mut assigned = vec![false; n];
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        assigned[i] = true;
        let mut members = vec![raw[i]];
        let mut grew = true;
        while grew {
            grew = false;
            for j in 0..n {
                if !assigned[j] && members.iter().any(|m| (m - raw[j]).norm() <= link) {
                    assigned[j] = true;
                    members.push(raw[j]);
                    grew = true;
                }
            }
        }
        clusters.push(members);
    }

    let threshold = tol * scale;
    let mut diagonalizable = true;
    let mut uncertain = false;
    let mut margin: f64 = 0.0;
    let mut eigenvalues = Vec::with_capacity(clusters.len());
    for members in clusters {
        let m = members.len();
        let value = members.iter().sum::<C64>() / m as f64;
        let geometric = if m == 1 {
            1
        } else {
            let shifted = h - CMatrix::identity(n, n) * value;
            let sv = linalg::singular_values_ascending(&shifted).ok_or(Error::EigenFailed)?;
            let g = sv.iter().filter(|s| **s <= threshold).count();
            // the m-th smallest decides between "m-fold kernel" and less
            let decisive = sv[m - 1];
            if decisive <= threshold {
                margin = margin.max(decisive / scale);
            }
            if decisive >= threshold / 10.0 && decisive <= threshold * 10.0 {
                uncertain = true;
            }
            if g < m {
                diagonalizable = false;
            }
            g.min(m)
        };
        let rational = rationalize(value, tol, max_den);
        let reconstruction_error = rational
            .as_ref()
            .map(|r| (value - C64::new(crate::expr::rational_to_f64(r), 0.0)).norm());
        eigenvalues.push(Eigenvalue {
            value: CNum(value),
            multiplicity: m,
            geometric_multiplicity: geometric,
            rational,
            reconstruction_error,
            gauge_multiplicity: 0,
        });
    }
    Ok(Spectrum {
        eigenvalues,
        diagonalizable,
        uncertain,
        diag_margin: margin,
        tol,
    })
}

/// First continued-fraction convergent `p/q` of `Re x` with `q <= max_den`
/// and `|x - p/q| <= tol * max(1, |x|)`; requires a negligible imaginary
/// part.
pub fn rationalize(x: C64, tol: f64, max_den: u64) -> Option<BigRational> {
    let bound = tol * x.norm().max(1.0);
    if !x.re.is_finite() || x.im.abs() > bound {
        return None;
    }
    let target = x.re;
    let (mut p0, mut q0, mut p1, mut q1): (i128, i128, i128, i128) = (0, 1, 1, 0);
    let mut r = target;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e18 {
            return None;
        }
        let a = a as i128;
        let p2 = a.checked_mul(p1)?.checked_add(p0)?;
        let q2 = a.checked_mul(q1)?.checked_add(q0)?;
        if q2 > max_den as i128 {
            return None;
        }
        if (x - C64::new(p2 as f64 / q2 as f64, 0.0)).norm() <= bound {
            return Some(BigRational::new(BigInt::from(p2), BigInt::from(q2)));
        }
        let frac = r - r.floor();
        if frac == 0.0 {
            return None;
        }
        r = 1.0 / frac;
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
    }
    None
}

/// Marks symmetry directions. Each `(v, mu)` is a vector that should
/// satisfy `H v = mu v`; the matching cluster gets one gauge copy per
/// verified vector. Returns the vectors that failed the check.
pub fn apply_gauge(spec: &mut Spectrum, h: &CMatrix, gauge: &[(Vec<C64>, f64)], tol: f64) -> Vec<usize> {
    let n = h.nrows();
    let scale = linalg::matrix_inf_norm(h).max(1.0);
    let mut failed = Vec::new();
    for (idx, (v, mu)) in gauge.iter().enumerate() {
        let vv = crate::linalg::CVector::from_column_slice(v);
        let norm = linalg::inf_norm(v);
        let resid = &(h * &vv) - &vv * C64::new(*mu, 0.0);
        if v.len() != n || norm == 0.0 || linalg::inf_norm(resid.as_slice()) > 1e3 * tol * scale * norm {
            failed.push(idx);
            continue;
        }
        let target = C64::new(*mu, 0.0);
        let best = spec
            .eigenvalues
            .iter_mut()
            .filter(|e| e.gauge_multiplicity < e.multiplicity)
            .min_by(|a, b| (a.c() - target).norm().total_cmp(&(b.c() - target).norm()));
        match best {
            Some(e) if (e.c() - target).norm() <= 1e3 * tol * scale => e.gauge_multiplicity += 1,
            _ => failed.push(idx),
        }
    }
    failed
}
