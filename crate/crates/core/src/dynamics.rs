//! The constrained Hamiltonian system on the variety,
//!
//! ```text
//! q' = p,   p' = -grad_q V(q, w),   w_i' = sum_j p_j dw_i/dq_j,
//! ```
//!
//! its integration with conservation monitors, and the homothetic orbit
//! `q(t) = phi(t)^d1 pi(c)` through a Darboux point.

use serde::Serialize;

use crate::calculus::{Calculus, Homogeneity};
use crate::error::{Error, Result};
use crate::expr::complex_powi;
use crate::linalg::{self, CVector, C64};
use crate::ode::{self, OdeOptions, Stop};
use crate::report::CNum;

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryState {
    pub t: f64,
    #[serde(serialize_with = "crate::report::ser_cvec")]
    pub q: Vec<C64>,
    #[serde(serialize_with = "crate::report::ser_cvec")]
    pub p: Vec<C64>,
    #[serde(serialize_with = "crate::report::ser_cvec")]
    pub w: Vec<C64>,
    /// `1/2 sum p^2 + V`.
    pub energy: CNum,
    pub constraint_residual: f64,
}

impl TrajectoryState {
    pub fn new(calc: &Calculus, t: f64, q: Vec<C64>, p: Vec<C64>, w: Vec<C64>) -> Result<Self> {
        let x: Vec<C64> = q.iter().chain(&w).copied().collect();
        let energy = p.iter().map(|v| v * v).sum::<C64>() * 0.5 + calc.potential_at(&x)?;
        let constraint_residual = calc.jd.constraint_residual(&x)?;
        Ok(TrajectoryState {
            t,
            q,
            p,
            w,
            energy: CNum(energy),
            constraint_residual,
        })
    }

    fn pack(&self) -> Vec<C64> {
        self.q.iter().chain(&self.p).chain(&self.w).copied().collect()
    }

    fn unpack(calc: &Calculus, t: f64, y: &[C64]) -> Result<Self> {
        let n = calc.n();
        Self::new(calc, t, y[..n].to_vec(), y[n..2 * n].to_vec(), y[2 * n..].to_vec())
    }
}

/// Reads an initial state: lines `q ...`, `p ...`, optional `w ...` and
/// `t <time>`, components as in seed files. A missing `w` is solved on
/// the fiber over `q` starting from all ones.
pub fn parse_state(calc: &Calculus, text: &str) -> Result<TrajectoryState> {
    let (mut t, mut q, mut p, mut w) = (0.0, None, None, None);
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let row = crate::report::parse_complex_row(rest)?;
        match key {
            "t" => t = row.first().map(|z| z.re).ok_or_else(|| Error::Number(rest.into()))?,
            "q" => q = Some(row),
            "p" => p = Some(row),
            "w" => w = Some(row),
            other => return Err(Error::InvalidSetup(format!("state file: unknown key `{other}`"))),
        }
    }
    let (n, s) = (calc.n(), calc.s());
    let q = q.ok_or_else(|| Error::InvalidSetup("state file: missing `q` line".into()))?;
    let p = p.unwrap_or_else(|| vec![C64::new(0.0, 0.0); n]);
    let w = match w {
        Some(w) => w,
        None => calc
            .jd
            .solve_fiber(&q, &vec![C64::new(1.0, 0.0); s])
            .ok_or_else(|| Error::InvalidSetup("state file: no point on the fiber over q".into()))?,
    };
    if q.len() != n || p.len() != n || w.len() != s {
        return Err(Error::InvalidSetup(format!(
            "state file: expected {n} q, {n} p and {s} w components"
        )));
    }
    TrajectoryState::new(calc, t, q, p, w)
}

/// `(q', p', w')` at a state; fails inside the critical set.
pub fn vector_field(calc: &Calculus, q: &[C64], p: &[C64], w: &[C64], critical_tol: f64) -> Result<(Vec<C64>, Vec<C64>, Vec<C64>)> {
    let x: Vec<C64> = q.iter().chain(w).copied().collect();
    if calc.s() > 0 {
        let det = calc.jd.det_at(&x).map(|d| d.norm()).unwrap_or(0.0);
        if det <= critical_tol {
            return Err(Error::CriticalSet { detj: det });
        }
    }
    let grad = calc.grad_at(&x)?;
    let wq = calc.dwdq_at(&x)?;
    let wdot = &wq * CVector::from_column_slice(p);
    Ok((p.to_vec(), grad.iter().map(|g| -g).collect(), wdot.iter().copied().collect()))
}

#[derive(Clone, Debug)]
pub struct IntegrateOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Newton-correct `w` onto `G = 0` after every step.
    pub project: bool,
    /// Stop when `|detJ|` or a denominator of `V` drops to this size.
    pub critical_tol: f64,
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            rtol: 1e-12,
            atol: 1e-12,
            project: false,
            critical_tol: 1e-8,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    CriticalSet,
    Pole,
    StepUnderflow,
    MaxSteps,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectoryState>,
    pub termination: Termination,
    pub diagnostic: Option<String>,
    pub energy_drift: f64,
    pub constraint_drift: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectoryState {
        self.samples.last().expect("trajectory has an initial sample")
    }
}

fn project_w(calc: &Calculus, y: &mut [C64]) {
    let n = calc.n();
    if calc.s() == 0 {
        return;
    }
    for _ in 0..2 {
        let x: Vec<C64> = y[..n].iter().chain(&y[2 * n..]).copied().collect();
        let (Ok(g), Ok(j)) = (calc.jd.generators_at(&x), calc.jd.j_at(&x)) else {
            return;
        };
        let Some(step) = linalg::solve(&j, &-CVector::from_vec(g)) else {
            return;
        };
        for (wi, d) in y[2 * n..].iter_mut().zip(step.iter()) {
            *wi += d;
        }
    }
}

/// Adaptive integration of the system from `init` to `t_end`, recording
/// every accepted step. Approaching the critical set ends the run early
/// with a diagnostic instead of an error.
pub fn integrate(calc: &Calculus, init: &TrajectoryState, t_end: f64, opts: &IntegrateOptions) -> Result<Trajectory> {
    let n = calc.n();
    let mut samples = vec![init.clone()];
    let critical = |t: f64, y: &[C64]| -> Option<(Termination, String)> {
        let x: Vec<C64> = y[..n].iter().chain(&y[2 * n..]).copied().collect();
        let margin = calc.singular_margin(&x);
        if calc.s() > 0 {
            let det = calc.jd.det_at(&x).map(|d| d.norm()).unwrap_or(0.0);
            if det <= opts.critical_tol {
                return Some((
                    Termination::CriticalSet,
                    format!("state in critical set: |detJ| = {det:.3e} at t = {t:.6}"),
                ));
            }
        }
        (margin <= opts.critical_tol).then(|| (Termination::Pole, format!("potential has a pole at t = {t:.6}")))
    };
    if let Some((term, msg)) = critical(init.t, &init.pack()) {
        return Ok(Trajectory {
            samples,
            termination: term,
            diagnostic: Some(msg),
            energy_drift: 0.0,
            constraint_drift: 0.0,
            steps: 0,
        });
    }
    let ode_opts = OdeOptions {
        rtol: opts.rtol,
        atol: opts.atol,
        h_init: None,
        max_steps: opts.max_steps,
    };
    let mut stop_reason: Option<(Termination, String)> = None;
    let mut recorded: Vec<(f64, Vec<C64>)> = Vec::new();
    let outcome = ode::integrate(
        |_, y| {
            let (dq, dp, dw) = vector_field(calc, &y[..n], &y[n..2 * n], &y[2 * n..], opts.critical_tol).map_err(|e| e.to_string())?;
            Ok(dq.into_iter().chain(dp).chain(dw).collect())
        },
        init.t,
        &init.pack(),
        t_end,
        &ode_opts,
        |t, y| {
            if opts.project {
                project_w(calc, y);
            }
            if let Some(reason) = critical(t, y) {
                stop_reason = Some(reason);
                recorded.push((t, y.clone()));
                return Err("critical".into());
            }
            recorded.push((t, y.clone()));
            Ok(())
        },
    );
    for (t, y) in &recorded {
        samples.push(TrajectoryState::unpack(calc, *t, y)?);
    }
    let (termination, diagnostic) = match (&outcome.stop, stop_reason) {
        (Stop::Reached, _) => (Termination::Completed, None),
        (Stop::Observer(_), Some((term, msg))) => (term, Some(msg)),
        (Stop::MaxSteps, _) => (Termination::MaxSteps, Some("maximum step count reached".into())),
        (Stop::Rhs(msg), _) if msg.contains("critical set") => (Termination::CriticalSet, Some(msg.clone())),
        (Stop::Rhs(msg), _) => (Termination::Pole, Some(msg.clone())),
        _ => (
            Termination::StepUnderflow,
            Some(format!("step size underflow at t = {:.6}", outcome.t)),
        ),
    };
    let e0 = init.energy.0;
    let energy_drift = samples.iter().map(|s| (s.energy.0 - e0).norm()).fold(0.0, f64::max);
    let constraint_drift = samples.iter().map(|s| s.constraint_residual).fold(0.0, f64::max);
    Ok(Trajectory {
        samples,
        termination,
        diagnostic,
        energy_drift,
        constraint_drift,
        steps: outcome.accepted,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HomotheticSample {
    pub t: f64,
    pub phi: CNum,
    pub state: TrajectoryState,
    /// Max deviation of the assembled `(q', p', w')` from the vector field.
    pub residual: f64,
    /// `|w(t) - fiber solve at q(t)|` for the branch through `w(c)`.
    pub fiber_error: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HomotheticReport {
    pub samples: Vec<HomotheticSample>,
    pub max_residual: f64,
    pub energy: CNum,
    pub energy_drift: f64,
    pub truncated: Option<String>,
}

/// The orbit `q = phi^d1 pi(c)`, `w_j = phi^{k_j} w_j(c)`, with `phi`
/// solving `(phi^d1)'' = -phi^(d2-d1)`, `phi(0)^d2 = 1/2` and
/// `1/2 d1^2 phi'^2 phi^(2 d1 - 2) + (d1/d2) phi^d2 = level`.
pub fn homothetic_orbit(
    calc: &Calculus,
    homog: &Homogeneity,
    c: &[C64],
    t_grid: &[f64],
    level: f64,
    branch: f64,
) -> Result<HomotheticReport> {
    let (n, s) = (calc.n(), calc.s());
    let (d1, d2) = (homog.d1, homog.d2);
    if d2 == 0 {
        return Err(Error::ZeroDegree);
    }
    let (d1f, d2f) = (d1 as f64, d2 as f64);
    let pw = |z: C64, e: i64| complex_powi(z, e).ok_or_else(|| Error::Integration("phi reached 0".into()));
    let phi0 = C64::new(0.5, 0.0).powf(1.0 / d2f);
    let rhs = C64::new(2.0 * (level - d1f / d2f * 0.5), 0.0) / (d1f * d1f * pw(phi0, 2 * d1 - 2)?);
    let dphi0 = branch.signum() * rhs.sqrt();
    let accel = |phi: C64, dphi: C64| -> Result<C64> {
        Ok((-d1f * pw(phi, d2 - 1)? - d1f * d1f * (d1f - 1.0) * dphi * dphi * pw(phi, 2 * d1 - 3)?)
            / (d1f * d1f * pw(phi, 2 * d1 - 2)?))
    };
    let pc = &c[..n];
    let wc = &c[n..];

    let assemble = |t: f64, phi: C64, dphi: C64| -> Result<HomotheticSample> {
        let a = pw(phi, d1)?;
        let da = d1f * pw(phi, d1 - 1)? * dphi;
        let dda = -pw(phi, d2 - d1)?;
        let q: Vec<C64> = pc.iter().map(|v| v * a).collect();
        let p: Vec<C64> = pc.iter().map(|v| v * da).collect();
        let mut w = Vec::with_capacity(s);
        let mut dw = Vec::with_capacity(s);
        for j in 0..s {
            let kj = homog.kw[j];
            w.push(wc[j] * pw(phi, kj)?);
            dw.push(wc[j] * kj as f64 * pw(phi, kj - 1)? * dphi);
        }
        let (fq, fp, fw) = vector_field(calc, &q, &p, &w, 0.0)?;
        let dp: Vec<C64> = pc.iter().map(|v| v * dda).collect();
        let mut residual: f64 = 0.0;
        for (x, y) in fq.iter().zip(&p).chain(fp.iter().zip(&dp)).chain(fw.iter().zip(&dw)) {
            residual = residual.max((x - y).norm());
        }
        let fiber_error = (s > 0)
            .then(|| calc.jd.solve_fiber(&q, &w))
            .flatten()
            .map(|wf| wf.iter().zip(&w).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max));
        let state = TrajectoryState::new(calc, t, q, p, w)?;
        residual = residual.max(state.constraint_residual);
        Ok(HomotheticSample {
            t,
            phi: CNum(phi),
            state,
            residual,
            fiber_error,
        })
    };

    let mut samples = Vec::new();
    let mut truncated = None;
    let mut y = vec![phi0, dphi0];
    let mut t = t_grid.first().copied().unwrap_or(0.0);
    let opts = OdeOptions::default();
    for &tg in t_grid {
        if tg > t {
            let out = ode::integrate(
                |_, y| {
                    let a = accel(y[0], y[1]).map_err(|e| e.to_string())?;
                    Ok(vec![y[1], a])
                },
                t,
                &y,
                tg,
                &opts,
                |_, y| {
                    if y[0].norm() < 1e-8 {
                        Err("phi reached 0".into())
                    } else {
                        Ok(())
                    }
                },
            );
            if out.stop != Stop::Reached {
                truncated = Some(format!(
                    "orbit truncated at t = {:.6}: phi approaches 0 (the orbit meets Sigma(V))",
                    out.t
                ));
                break;
            }
            y = out.y;
            t = tg;
        }
        match assemble(t, y[0], y[1]) {
            Ok(sample) => samples.push(sample),
            Err(e) => {
                truncated = Some(format!("orbit truncated at t = {t:.6}: {e}"));
                break;
            }
        }
    }
    let energy = samples.first().map_or(C64::default(), |s| s.state.energy.0);
    let energy_drift = samples.iter().map(|s| (s.state.energy.0 - energy).norm()).fold(0.0, f64::max);
    Ok(HomotheticReport {
        max_residual: samples.iter().map(|s| s.residual).fold(0.0, f64::max),
        samples,
        energy: CNum(energy),
        energy_drift,
        truncated,
    })
}
