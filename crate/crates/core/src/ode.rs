//! Dormand-Prince 5(4) with adaptive step size, over complex state vectors
//! and a real independent variable.

use crate::linalg::C64;

#[derive(Clone, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen from the scale of the problem when `None`.
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-12,
            atol: 1e-12,
            h_init: None,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stop {
    Reached,
    StepUnderflow,
    MaxSteps,
    /// The right-hand side refused to evaluate.
    Rhs(String),
    /// The observer asked to stop.
    Observer(String),
}

#[derive(Clone, Debug)]
pub struct OdeOutcome {
    pub t: f64,
    pub y: Vec<C64>,
    pub stop: Stop,
    pub accepted: usize,
    pub rejected: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(y: &[C64], terms: &[(f64, &[C64])], h: f64) -> Vec<C64> {
    let mut out = y.to_vec();
    for (c, k) in terms {
        if *c == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(k.iter()) {
            *o += v * (c * h);
        }
    }
    out
}

/// Integrates `y' = f(t, y)` from `t0` to `t1 >= t0`. After every accepted
/// step `observer(t, y)` may modify `y` (projection) or stop the run.
pub fn integrate<F, O>(mut f: F, t0: f64, y0: &[C64], t1: f64, opts: &OdeOptions, mut observer: O) -> OdeOutcome
where
    F: FnMut(f64, &[C64]) -> Result<Vec<C64>, String>,
    O: FnMut(f64, &mut Vec<C64>) -> Result<(), String>,
{
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut accepted = 0;
    let mut rejected = 0;
    let done = |t: f64, y: Vec<C64>, stop: Stop, a: usize, r: usize| OdeOutcome {
        t,
        y,
        stop,
        accepted: a,
        rejected: r,
    };
    if t1 <= t0 {
        return done(t, y, Stop::Reached, 0, 0);
    }
    let mut k1 = match f(t, &y) {
        Ok(k) => k,
        Err(e) => return done(t, y, Stop::Rhs(e), 0, 0),
    };
    let span = t1 - t0;
    let mut h = opts.h_init.unwrap_or_else(|| {
        let ny = y.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let nf = k1.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let guess = if nf > 0.0 { 0.01 * (ny.max(1e-3) / nf) } else { 1e-3 };
        guess.min(span).max(1e-10 * span)
    });
    let h_min = |t: f64| 1e-14 * t.abs().max(span).max(1.0);
    while t < t1 {
        if accepted + rejected >= opts.max_steps {
            return done(t, y, Stop::MaxSteps, accepted, rejected);
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        let stages = (|| -> Result<_, String> {
            let k2 = f(t + C2 * h, &axpy(&y, &[(A21, &k1)], h))?;
            let k3 = f(t + C3 * h, &axpy(&y, &[(A31, &k1), (A32, &k2)], h))?;
            let k4 = f(t + C4 * h, &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h))?;
            let k5 = f(t + C5 * h, &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h))?;
            let k6 = f(t + h, &axpy(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h))?;
            let ynew = axpy(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], h);
            let k7 = f(t + h, &ynew)?;
            Ok((k3, k4, k5, k6, k7, ynew))
        })();
        let (k3, k4, k5, k6, k7, ynew) = match stages {
            Ok(s) => s,
            Err(e) => {
                // a failed stage is treated like a large error
                h *= 0.25;
                rejected += 1;
                if h < h_min(t) {
                    return done(t, y, Stop::Rhs(e), accepted, rejected);
                }
                continue;
            }
        };
        let mut err2 = 0.0;
        for i in 0..y.len() {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let sc = opts.atol + opts.rtol * y[i].norm().max(ynew[i].norm());
            err2 += (e.norm() / sc).powi(2);
        }
        let err = if y.is_empty() { 0.0 } else { (err2 / y.len() as f64).sqrt() };
        if !err.is_finite() {
            h *= 0.25;
            rejected += 1;
            if h < h_min(t) {
                return done(t, y, Stop::StepUnderflow, accepted, rejected);
            }
            continue;
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + h };
            y = ynew;
            accepted += 1;
            let before = y.clone();
            if let Err(msg) = observer(t, &mut y) {
                return done(t, y, Stop::Observer(msg), accepted, rejected);
            }
            k1 = if y == before {
                k7
            } else {
                match f(t, &y) {
                    Ok(k) => k,
                    Err(e) => return done(t, y, Stop::Rhs(e), accepted, rejected),
                }
            };
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
        } else {
            rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            if h < h_min(t) {
                return done(t, y, Stop::StepUnderflow, accepted, rejected);
            }
        }
    }
    done(t, y, Stop::Reached, accepted, rejected)
}
