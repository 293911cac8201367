//! Darboux points: `c` on the variety, away from the origin and `Sigma(V)`,
//! with `grad_q V(c) = pi(c)`.
//!
//! Newton runs on `F(q, w) = (grad_q V - q, G_1, .., G_s)` plus optional
//! linear gauge pins, using minimum-norm least-squares steps so that
//! non-isolated solution sets do not stall the iteration.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{asymmetry, Calculus, Homogeneity};
use crate::error::Result;
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::mrtable::{check_pair_numeric, TableConfig, TableVerdict};
use crate::spectrum::{apply_gauge, eigen, Spectrum};
use crate::tolerances::Tolerances;
use crate::variety::VarietyPoint;

/// Continuous symmetries that make Darboux points non-isolated.
pub trait Gauge: Sync {
    /// Rows `P` of the linear pins `P x = 0` on ambient points.
    fn pin_rows(&self) -> CMatrix;
    /// Moves a start onto the pinned slice without changing its orbit.
    fn prepare_seed(&self, x: &[C64]) -> Vec<C64>;
    /// Symmetry directions in `q` at `c`, each with the Hessian eigenvalue
    /// it carries.
    fn gauge_vectors(&self, c: &[C64]) -> Vec<(Vec<C64>, f64)>;
}

#[derive(Clone, Debug)]
pub struct DarbouxOptions {
    /// Starts: full ambient vectors, or `q` only (then `w` is solved).
    pub seeds: Vec<Vec<C64>>,
    pub n_random: usize,
    pub seed: u64,
    pub radius: f64,
    pub tol: Tolerances,
    pub table: TableConfig,
    pub include_gauge_eigenvalues: bool,
}

impl Default for DarbouxOptions {
    fn default() -> Self {
        DarbouxOptions {
            seeds: Vec::new(),
            n_random: 8,
            seed: 0,
            radius: 2.0,
            tol: Tolerances::default(),
            table: TableConfig::default(),
            include_gauge_eigenvalues: false,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DarbouxReport {
    pub point: VarietyPoint,
    /// Which start produced the point first.
    pub start: String,
    pub grad_residual: f64,
    pub sigma_flag: bool,
    /// `pi(c) = 0` with `c != 0`: no homothetic orbit, no verdict.
    pub degenerate: bool,
    #[serde(serialize_with = "crate::report::ser_cmatrix")]
    pub hessian: CMatrix,
    pub hessian_asymmetry: f64,
    /// `|H pi(c) - (k-1) pi(c)|` when the degree is known.
    pub euler_residual: Option<f64>,
    pub spectrum: Option<Spectrum>,
    pub verdicts: Vec<TableVerdict>,
    pub notes: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Origin,
    SigmaV,
}

#[derive(Clone, Debug, Serialize)]
pub struct Rejected {
    pub point: VarietyPoint,
    pub start: String,
    pub reason: RejectReason,
    pub diagnostic: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct DarbouxSearch {
    pub starts: usize,
    pub converged: usize,
    pub abandoned: usize,
    pub accepted: Vec<DarbouxReport>,
    pub rejected: Vec<Rejected>,
    pub diagnostics: Vec<String>,
}

struct System<'a> {
    calc: &'a Calculus,
    pins: CMatrix,
}

impl System<'_> {
    fn residual(&self, x: &[C64]) -> Option<Vec<C64>> {
        let grad = self.calc.grad_at(x).ok()?;
        let mut f: Vec<C64> = grad.iter().zip(x).map(|(g, q)| g - q).collect();
        f.extend(self.calc.jd.generators_at(x).ok()?);
        let xv = CVector::from_column_slice(x);
        f.extend((&self.pins * xv).iter());
        f.iter().all(|z| z.re.is_finite() && z.im.is_finite()).then_some(f)
    }

    fn jacobian(&self, x: &[C64]) -> Option<CMatrix> {
        let (n, s, dim) = (self.calc.n(), self.calc.s(), self.calc.dim());
        let m = self.pins.nrows();
        let mut jm = CMatrix::zeros(n + s + m, dim);
        let gj = self.calc.grad_jacobian_at(x).ok()?;
        jm.view_mut((0, 0), (n, dim)).copy_from(&gj);
        for i in 0..n {
            jm[(i, i)] -= C64::new(1.0, 0.0);
        }
        if s > 0 {
            let gq = self.calc.jd.dgdq_at(x).ok()?;
            let gw = self.calc.jd.j_at(x).ok()?;
            jm.view_mut((n, 0), (s, n)).copy_from(&gq);
            jm.view_mut((n, n), (s, s)).copy_from(&gw);
        }
        if m > 0 {
            jm.view_mut((n + s, 0), (m, dim)).copy_from(&self.pins);
        }
        jm.iter().all(|z| z.re.is_finite() && z.im.is_finite()).then_some(jm)
    }

    /// Damped Newton. Converged when the residual is below
    /// `newton_converge` and the last step is negligible, so that roots of
    /// higher multiplicity are followed all the way in.
    fn newton(&self, mut x: Vec<C64>, tol: &Tolerances) -> Option<Vec<C64>> {
        let mut f = self.residual(&x)?;
        for _ in 0..tol.newton_max_iter {
            let nf = linalg::inf_norm(&f);
            let jm = self.jacobian(&x)?;
            let rhs = -CVector::from_vec(f.clone());
            let (delta, _) = linalg::lstsq(&jm, &rhs, 1e-13)?;
            let mut t = 1.0;
            let mut next = None;
            for _ in 0..=tol.newton_max_halvings {
                let cand: Vec<C64> = x.iter().zip(delta.iter()).map(|(a, d)| a + d * t).collect();
                if let Some(fc) = self.residual(&cand) {
                    let nc = linalg::inf_norm(&fc);
                    if nc < nf || nc <= tol.newton_converge {
                        next = Some((cand, fc, nc));
                        break;
                    }
                }
                t *= 0.5;
            }
            let (cand, fc, nc) = next?;
            let step = t * linalg::inf_norm(delta.as_slice());
            let small = step <= tol.newton_step * (1.0 + linalg::inf_norm(&cand));
            x = cand;
            f = fc;
            if nc <= tol.newton_converge && small {
                return self.polish(x, f, tol);
            }
        }
        (linalg::inf_norm(&f) <= tol.newton_accept).then_some(x)
    }

    fn polish(&self, x: Vec<C64>, f: Vec<C64>, tol: &Tolerances) -> Option<Vec<C64>> {
        let nf = linalg::inf_norm(&f);
        let polished = self.jacobian(&x).and_then(|jm| {
            let (delta, _) = linalg::lstsq(&jm, &-CVector::from_vec(f), 1e-13)?;
            let cand: Vec<C64> = x.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
            let nc = linalg::inf_norm(&self.residual(&cand)?);
            (nc <= nf).then_some((cand, nc))
        });
        let (x, nf) = polished.unwrap_or((x, nf));
        (nf <= tol.newton_accept).then_some(x)
    }
}

fn scaled_distance(a: &[C64], b: &[C64]) -> f64 {
    let d = a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    d / (1.0 + linalg::inf_norm(a).max(linalg::inf_norm(b)))
}

/// Newton from one start; `None` when the start is abandoned.
pub fn newton_from(calc: &Calculus, start: &[C64], gauge: Option<&dyn Gauge>, tol: &Tolerances) -> Option<Vec<C64>> {
    let sys = System {
        calc,
        pins: gauge.map_or_else(|| CMatrix::zeros(0, calc.dim()), |g| g.pin_rows()),
    };
    sys.newton(start.to_vec(), tol)
}

fn complete_start(calc: &Calculus, seed: &[C64]) -> Option<Vec<C64>> {
    let (n, s) = (calc.n(), calc.s());
    if seed.len() == n + s {
        return Some(seed.to_vec());
    }
    if seed.len() != n {
        return None;
    }
    let w0 = vec![C64::new(1.0, 0.0); s];
    let w = calc.jd.solve_fiber(seed, &w0)?;
    Some(seed.iter().copied().chain(w).collect())
}

/// Multi-start Newton search, deduplication and filtering, followed by the
/// Hessian spectrum and table verdicts at every accepted point.
pub fn solve_darboux(
    calc: &Calculus,
    homog: Option<&Homogeneity>,
    opts: &DarbouxOptions,
    gauge: Option<&dyn Gauge>,
) -> Result<DarbouxSearch> {
    let dim = calc.dim();
    let mut diagnostics = Vec::new();
    let mut starts: Vec<(String, Vec<C64>)> = Vec::new();
    for (i, s) in opts.seeds.iter().enumerate() {
        match complete_start(calc, s) {
            Some(x) => starts.push((format!("seed {i}"), x)),
            None => diagnostics.push(format!("seed {i}: wrong length or no point on the fiber; skipped")),
        }
    }
    for i in 0..opts.n_random {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(i as u64 + 1);
        starts.push((format!("random {i}"), linalg::random_vector(&mut rng, dim, opts.radius)));
    }
    if let Some(g) = gauge {
        for s in starts.iter_mut() {
            s.1 = g.prepare_seed(&s.1);
        }
    }

    let results: Vec<Option<Vec<C64>>> = starts
        .par_iter()
        .map(|(_, x)| newton_from(calc, x, gauge, &opts.tol))
        .collect();

    let converged = results.iter().filter(|r| r.is_some()).count();
    let abandoned = results.len() - converged;
    let mut unique: Vec<(String, Vec<C64>)> = Vec::new();
    for ((label, _), r) in starts.iter().zip(results) {
        let Some(x) = r else { continue };
        if unique.iter().all(|(_, u)| scaled_distance(u, &x) >= opts.tol.dedupe) {
            unique.push((label.clone(), x));
        }
    }

    let k = homog.and_then(Homogeneity::integer_degree).filter(|k| *k != 0);
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for (label, x) in unique {
        let point = VarietyPoint::new(&calc.jd, x)?;
        if calc.in_sigma_v(&point, opts.tol.critical) {
            rejected.push(Rejected {
                point,
                start: label,
                reason: RejectReason::SigmaV,
                diagnostic: "rejected: Darboux point in Sigma(V)".into(),
            });
            continue;
        }
        if linalg::inf_norm(&point.coords) < opts.tol.origin {
            rejected.push(Rejected {
                point,
                start: label,
                reason: RejectReason::Origin,
                diagnostic: "rejected: the origin is excluded".into(),
            });
            continue;
        }
        accepted.push(analyze_point(calc, point, label, k, opts, gauge)?);
    }
    if accepted.is_empty() {
        diagnostics.push("no Darboux points found".into());
    }
    Ok(DarbouxSearch {
        starts: starts.len(),
        converged,
        abandoned,
        accepted,
        rejected,
        diagnostics,
    })
}

fn analyze_point(
    calc: &Calculus,
    point: VarietyPoint,
    start: String,
    k: Option<i64>,
    opts: &DarbouxOptions,
    gauge: Option<&dyn Gauge>,
) -> Result<DarbouxReport> {
    let n = calc.n();
    let x = &point.coords;
    let grad = calc.grad_at(x)?;
    let grad_residual = grad.iter().zip(x).map(|(g, q)| (g - q).norm()).fold(0.0, f64::max);
    let hessian = calc.hess_at(x)?;
    let q = CVector::from_column_slice(&x[..n]);
    let degenerate = linalg::inf_norm(q.as_slice()) < opts.tol.origin;
    let euler_residual = k.map(|k| {
        let r = &hessian * &q - &q * C64::new((k - 1) as f64, 0.0);
        linalg::inf_norm(r.as_slice())
    });
    let mut notes = Vec::new();
    let mut spectrum = None;
    let mut verdicts = Vec::new();
    if degenerate {
        notes.push("degenerate: pi(c) = 0, no verdict".into());
    } else {
        let mut spec = eigen(&hessian, opts.tol.spectrum, opts.tol.max_den)?;
        if let Some(g) = gauge {
            let failed = apply_gauge(&mut spec, &hessian, &g.gauge_vectors(x), opts.tol.spectrum);
            if !failed.is_empty() {
                notes.push(format!("{} gauge direction(s) not confirmed as eigenvectors", failed.len()));
            }
        }
        if spec.uncertain {
            notes.push("uncertain: diagonalizability hypothesis unverified".into());
        }
        if let Some(k) = k {
            for e in &spec.eigenvalues {
                if e.physical_multiplicity() == 0 && !opts.include_gauge_eigenvalues {
                    continue;
                }
                verdicts.push(check_pair_numeric(k, e.c(), &opts.table)?);
            }
        }
        spectrum = Some(spec);
    }
    Ok(DarbouxReport {
        start,
        grad_residual,
        sigma_flag: false,
        degenerate,
        hessian_asymmetry: asymmetry(&hessian),
        hessian,
        euler_residual,
        spectrum,
        verdicts,
        notes,
        point,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::homogeneity_weights;
    use crate::linalg::c;
    use crate::parser::parse_setup;

    #[test]
    fn eq1_points_on_the_circle() {
        let s = parse_setup("vars q1 q2\next w1 : w1^2 - q1^2 - q2^2\npotential w1^3").unwrap();
        let calc = Calculus::new(&s).unwrap();
        let h = homogeneity_weights(&s).unwrap();
        let opts = DarbouxOptions {
            seeds: vec![vec![c(0.3, 0.0), c(0.05, 0.0), c(0.3, 0.0)]],
            n_random: 6,
            ..Default::default()
        };
        let res = solve_darboux(&calc, Some(&h), &opts, None).unwrap();
        assert!(!res.accepted.is_empty());
        for r in &res.accepted {
            let x = &r.point.coords;
            assert!((x[2] - c(1.0 / 3.0, 0.0)).norm() < 1e-9);
            assert!((x[0] * x[0] + x[1] * x[1] - c(1.0 / 9.0, 0.0)).norm() < 1e-9);
            assert!(r.verdicts.iter().all(|v| v.matched));
            assert!(r.euler_residual.unwrap() < 1e-8);
        }
        let first = &res.accepted[0];
        assert_eq!(first.start, "seed 0");
        assert!((first.point.coords[0] - c(0.3, 0.0)).norm() < 0.05);
    }

    #[test]
    fn pathological_origin_rejected() {
        let s = parse_setup("vars q1 q2\next w1 : w1^2 - q1\npotential w1^5 + q2^2").unwrap();
        let calc = Calculus::new(&s).unwrap();
        let opts = DarbouxOptions {
            seeds: vec![vec![c(1e-3, 0.0), c(0.0, 0.0), c(0.03, 0.0)], vec![c(0.15, 0.0), c(0.0, 0.0), c(0.41, 0.0)]],
            n_random: 0,
            ..Default::default()
        };
        let res = solve_darboux(&calc, None, &opts, None).unwrap();
        assert_eq!(res.rejected.len(), 1);
        assert_eq!(res.rejected[0].reason, RejectReason::SigmaV);
        assert_eq!(res.accepted.len(), 1);
        let x = &res.accepted[0].point.coords;
        assert!((x[0] - c(4.0 / 25.0, 0.0)).norm() < 1e-9 && (x[2] - c(0.4, 0.0)).norm() < 1e-9);
        assert!(res.accepted[0].verdicts.is_empty());
    }

    #[test]
    fn deterministic_order() {
        let s = parse_setup("vars q1 q2\next w1 : w1^2 - q1^2 - q2^2\npotential w1^3").unwrap();
        let calc = Calculus::new(&s).unwrap();
        let opts = DarbouxOptions {
            n_random: 10,
            seed: 7,
            ..Default::default()
        };
        let a = solve_darboux(&calc, None, &opts, None).unwrap();
        let b = solve_darboux(&calc, None, &opts, None).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
