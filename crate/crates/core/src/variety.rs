//! The variety `S = {G = 0}`, its Jacobian in the extension variables and
//! pointwise critical-set tests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{RatExpr, Tape};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::setup::AlgebraicSetup;

/// Above this many extension variables the adjugate is not formed
/// symbolically and implicit derivatives are computed per point.
pub const SYMBOLIC_MAX_S: usize = 4;

#[derive(Clone, Debug)]
pub struct JacobianData {
    n: usize,
    s: usize,
    /// `J[i][j] = dG_i/dw_j`.
    pub j: Vec<Vec<RatExpr>>,
    pub det: RatExpr,
    /// Adjugate of `J`, present when `s <= SYMBOLIC_MAX_S`.
    pub adj: Option<Vec<Vec<RatExpr>>>,
    /// `dgdq[i][k] = dG_i/dq_k`.
    pub dgdq: Vec<Vec<RatExpr>>,
    generators: Tape,
    j_tape: Tape,
    dgdq_tape: Tape,
    det_tape: Tape,
}

/// Determinant by cofactor expansion along the first row, skipping zero
/// entries so sparse (e.g. diagonal) matrices stay cheap.
pub fn determinant(m: &[Vec<RatExpr>]) -> RatExpr {
    let size = m.len();
    match size {
        0 => return RatExpr::one(),
        1 => return m[0][0].clone(),
        _ => {}
    }
    let mut terms = Vec::new();
    for col in 0..size {
        if m[0][col].is_zero() {
            continue;
        }
        let minor: Vec<Vec<RatExpr>> = m[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(c, _)| *c != col)
                    .map(|(_, e)| e.clone())
                    .collect()
            })
            .collect();
        let sub = determinant(&minor);
        if sub.is_zero() {
            continue;
        }
        let term = &m[0][col] * &sub;
        terms.push(if col % 2 == 0 { term } else { -term });
    }
    RatExpr::add_all(terms)
}

/// `adj(M)[i][j] = (-1)^(i+j) * minor(M, j, i)`.
pub fn adjugate(m: &[Vec<RatExpr>]) -> Vec<Vec<RatExpr>> {
    let size = m.len();
    if size == 1 {
        return vec![vec![RatExpr::one()]];
    }
    let mut out = vec![vec![RatExpr::zero(); size]; size];
    for (r, row_out) in out.iter_mut().enumerate() {
        for (cidx, slot) in row_out.iter_mut().enumerate() {
            // cofactor of entry (cidx, r)
            let minor: Vec<Vec<RatExpr>> = m
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != cidx)
                .map(|(_, row)| {
                    row.iter()
                        .enumerate()
                        .filter(|(j, _)| *j != r)
                        .map(|(_, e)| e.clone())
                        .collect()
                })
                .collect();
            let d = determinant(&minor);
            *slot = if (r + cidx) % 2 == 0 { d } else { -d };
        }
    }
    out
}

pub fn jacobian(setup: &AlgebraicSetup) -> JacobianData {
    let (n, s) = (setup.n(), setup.s());
    let j: Vec<Vec<RatExpr>> = setup
        .generators
        .iter()
        .map(|g| (0..s).map(|c| g.diff(n + c)).collect())
        .collect();
    let dgdq: Vec<Vec<RatExpr>> = setup
        .generators
        .iter()
        .map(|g| (0..n).map(|k| g.diff(k)).collect())
        .collect();
    let det = determinant(&j);
    let adj = (1..=SYMBOLIC_MAX_S).contains(&s).then(|| adjugate(&j));
    JacobianData {
        n,
        s,
        generators: Tape::compile(&setup.generators),
        j_tape: Tape::compile(&j.concat()),
        dgdq_tape: Tape::compile(&dgdq.concat()),
        det_tape: Tape::compile(std::slice::from_ref(&det)),
        j,
        det,
        adj,
        dgdq,
    }
}

impl JacobianData {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn generators_at(&self, x: &[C64]) -> Result<Vec<C64>> {
        Ok(self.generators.eval(x)?)
    }

    pub fn constraint_residual(&self, x: &[C64]) -> Result<f64> {
        Ok(linalg::inf_norm(&self.generators_at(x)?))
    }

    pub fn j_at(&self, x: &[C64]) -> Result<CMatrix> {
        let v = self.j_tape.eval(x)?;
        Ok(CMatrix::from_row_slice(self.s, self.s, &v))
    }

    pub fn dgdq_at(&self, x: &[C64]) -> Result<CMatrix> {
        let v = self.dgdq_tape.eval(x)?;
        Ok(CMatrix::from_row_slice(self.s, self.n, &v))
    }

    pub fn det_at(&self, x: &[C64]) -> Result<C64> {
        Ok(self.det_tape.eval(x)?[0])
    }

    /// Solves `G(q, w) = 0` for `w` with `q` fixed, by Newton from `w0`.
    /// Iterates until the step is negligible so that multiple roots are
    /// approached as closely as double precision allows.
    pub fn solve_fiber(&self, q: &[C64], w0: &[C64]) -> Option<Vec<C64>> {
        let mut x: Vec<C64> = q.iter().chain(w0).copied().collect();
        if self.s == 0 {
            return Some(Vec::new());
        }
        for _ in 0..200 {
            let g = self.generators_at(&x).ok()?;
            let jm = self.j_at(&x).ok()?;
            let rhs = -CVector::from_vec(g.clone());
            let step = linalg::solve(&jm, &rhs).or_else(|| linalg::lstsq(&jm, &rhs, 1e-14).map(|r| r.0))?;
            let scale = 1.0 + linalg::inf_norm(&x[self.n..]);
            for (xi, d) in x[self.n..].iter_mut().zip(step.iter()) {
                *xi += d;
            }
            let step_norm = linalg::inf_norm(step.as_slice());
            if !step_norm.is_finite() {
                return None;
            }
            if step_norm <= 1e-14 * scale {
                let res = self.constraint_residual(&x).ok()?;
                return (res <= 1e-10 * scale).then(|| x[self.n..].to_vec());
            }
        }
        let res = self.constraint_residual(&x).ok()?;
        let scale = 1.0 + linalg::inf_norm(&x[self.n..]);
        (res <= 1e-10 * scale).then(|| x[self.n..].to_vec())
    }

    /// Places a random point on `S`: random `q` in the disc of radius
    /// `radius`, `w` by Newton from random starts.
    pub fn sample_point(&self, rng: &mut ChaCha8Rng, radius: f64, attempts: usize) -> Option<Vec<C64>> {
        for _ in 0..attempts {
            let q = linalg::random_vector(rng, self.n, radius);
            let w0 = linalg::random_vector(rng, self.s, 2.0);
            if let Some(w) = self.solve_fiber(&q, &w0) {
                let mut x = q;
                x.extend(w);
                return Some(x);
            }
        }
        None
    }
}

/// A point of the ambient space with its distance-to-variety data.
#[derive(Clone, Debug, Serialize)]
pub struct VarietyPoint {
    #[serde(serialize_with = "crate::report::ser_cvec")]
    pub coords: Vec<C64>,
    pub constraint_residual: f64,
    pub critical_value: f64,
}

impl VarietyPoint {
    pub fn new(jd: &JacobianData, coords: Vec<C64>) -> Result<Self> {
        let constraint_residual = jd.constraint_residual(&coords)?;
        let critical_value = jd.det_at(&coords)?.norm();
        Ok(VarietyPoint {
            coords,
            constraint_residual,
            critical_value,
        })
    }

    pub fn on_variety(&self, tol: f64) -> bool {
        self.constraint_residual <= tol
    }

    pub fn q(&self, n: usize) -> &[C64] {
        &self.coords[..n]
    }
}

/// Membership in `Sigma(I)`: `|detJ(p)| <= tol`.
pub fn in_critical_set(_jd: &JacobianData, p: &VarietyPoint, tol: f64) -> bool {
    p.critical_value <= tol
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub detj_nonzero: bool,
    /// Primality of the ideal is never decided, only assumed.
    pub primality_assumed: bool,
    pub samples_used: usize,
    pub seed: u64,
    pub trials: usize,
    pub max_abs_detj: f64,
    pub warnings: Vec<String>,
}

/// Probabilistic sanity check that `detJ` does not vanish identically on `S`.
pub fn validate(setup: &AlgebraicSetup, jd: &JacobianData, trials: usize, seed: u64, tol: f64) -> Result<ValidationReport> {
    let trials = trials.max(1);
    let mut warnings = Vec::new();
    if setup.s() > 0 && jd.det.is_zero() {
        return Err(Error::DetJVanishes { samples: 0 });
    }
    let samples: Vec<Option<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let x = jd.sample_point(&mut rng, 1.5, 10)?;
            jd.det_at(&x).ok().map(|d| d.norm())
        })
        .collect();
    let values: Vec<f64> = samples.into_iter().flatten().collect();
    let samples_used = values.len();
    let max_abs_detj = values.iter().cloned().fold(0.0, f64::max);
    if samples_used == 0 {
        warnings.push("inconclusive: could not place any sample on S".to_string());
        return Ok(ValidationReport {
            detj_nonzero: false,
            primality_assumed: true,
            samples_used,
            seed,
            trials,
            max_abs_detj,
            warnings,
        });
    }
    if max_abs_detj <= tol {
        return Err(Error::DetJVanishes { samples: samples_used });
    }
    if samples_used < trials {
        warnings.push(format!("{} of {trials} samples could not be placed on S", trials - samples_used));
    }
    Ok(ValidationReport {
        detj_nonzero: true,
        primality_assumed: true,
        samples_used,
        seed,
        trials,
        max_abs_detj,
        warnings,
    })
}
