//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero when any of them fails.

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_complex::Complex64 as C64;
use num_rational::{BigRational, Ratio};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use algpot::calculus::{asymmetry, detect_homogeneity, Calculus, Route};
use algpot::dynamics::{homothetic_orbit, integrate, IntegrateOptions, Termination, TrajectoryState};
use algpot::mrtable::{check_pair_exact, CertificateKind, Mode, TableConfig};
use algpot::nbody::{self, NBodyConfig, NBodyGauge};
use algpot::parser::parse_setup;
use algpot::pipeline::{analyze, AnalysisReport, AnalyzeOptions};
use algpot::varode::{build_ve, monodromy_check, Lambda};
use algpot::variety::{validate, VarietyPoint};
use algpot::AlgebraicSetup;

const CIRCLE: &str = "vars q1 q2\next w1 : w1^2 - q1^2 - q2^2\npotential w1^3\n";
const RAMIFIED: &str = "vars q1 q2\next w1 : w1^2 - q1\npotential w1^5 + q2^2\n";

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn setup(text: &str) -> AlgebraicSetup {
    parse_setup(text).expect("problem parses")
}

fn within(limit: Duration, start: Instant) -> Outcome {
    let t = start.elapsed();
    if t <= limit {
        Ok(format!("{:.2}s", t.as_secs_f64()))
    } else {
        Err(format!("took {:.2}s, limit {:.0}s", t.as_secs_f64(), limit.as_secs_f64()))
    }
}

fn three_body_report() -> (NBodyConfig, AnalysisReport) {
    let cfg = NBodyConfig::equal_masses(3, 2).unwrap();
    let s = nbody::build(&cfg).unwrap();
    let opts = AnalyzeOptions {
        seeds: nbody::central_config_seeds(&cfg).0,
        n_random: 0,
        ..AnalyzeOptions::default()
    };
    let gauge = NBodyGauge::new(&cfg);
    let report = analyze(&s, &opts, Some(&gauge)).unwrap();
    (cfg, report)
}

fn circle_pipeline() -> Outcome {
    let start = Instant::now();
    let r = analyze(&setup(CIRCLE), &AnalyzeOptions::default(), None).map_err(|e| e.to_string())?;
    let h = r.homogeneity.weights.as_ref().ok_or("no homogeneity")?;
    ensure!(h.d1 == 1 && h.d2 == 3 && h.kw == vec![1], "weights d1={} d2={} kw={:?}", h.d1, h.d2, h.kw);
    ensure!(r.homogeneity.k == Some(3), "k = {:?}", r.homogeneity.k);
    ensure!(!r.darboux.accepted.is_empty(), "no Darboux points");
    for p in &r.darboux.accepted {
        let x = &p.point.coords;
        ensure!((x[2] - c(1.0 / 3.0, 0.0)).norm() < 1e-8, "w1 = {}", x[2]);
        let pi2 = x[0] * x[0] + x[1] * x[1];
        ensure!((pi2 - c(1.0 / 9.0, 0.0)).norm() < 1e-8, "|pi(c)|^2 = {pi2}");
        let spec = p.spectrum.as_ref().ok_or("no spectrum")?;
        let mut vals: Vec<C64> = spec.values();
        vals.sort_by(|a, b| a.re.total_cmp(&b.re));
        ensure!(vals.len() == 2, "spectrum {vals:?}");
        ensure!((vals[0] - c(1.0, 0.0)).norm() < 1e-8 && (vals[1] - c(2.0, 0.0)).norm() < 1e-8, "spectrum {vals:?}");
        ensure!(p.verdicts.len() == 2 && p.verdicts.iter().all(|v| v.matched), "verdicts {:?}", p.verdicts);
        let mut ps: Vec<i64> = p
            .verdicts
            .iter()
            .flat_map(|v| v.witnesses.iter())
            .filter(|w| w.label == "familyA")
            .filter_map(|w| w.p.as_ref().and_then(|p| i64::try_from(p).ok()))
            .collect();
        ps.sort();
        ensure!(ps == vec![-1, 1], "family A witnesses p = {ps:?}");
    }
    ensure!(r.certificate.kind == CertificateKind::NoObstruction, "certificate {:?}", r.certificate.kind);
    let t = within(Duration::from_secs(5), start)?;
    Ok(format!("{} Darboux points, spectrum {{1, 2}}, no obstruction, {t}", r.darboux.accepted.len()))
}

type Q = Ratio<i128>;

/// Admissible `lambda` values of the printed table, transcribed separately
/// from the library: `(k, A, B, C, D)` for `lambda = A + B (C + D p)^2`.
fn special_rows() -> Vec<(i64, Q, Q, Q, Q)> {
    let q = |n: i128, d: i128| Q::new(n, d);
    let mut v = Vec::new();
    for cc in [q(10, 3), q(4, 1)] {
        v.push((-5, q(49, 40), q(-1, 40), cc, q(10, 1)));
        v.push((5, q(-9, 40), q(1, 40), cc, q(10, 1)));
    }
    v.push((-4, q(9, 8), q(-1, 4), q(4, 3), q(4, 1)));
    v.push((4, q(-1, 8), q(1, 8), q(4, 3), q(4, 1)));
    for cc in [q(2, 1), q(3, 2), q(6, 5), q(12, 5)] {
        v.push((-3, q(25, 24), q(-1, 24), cc, q(6, 1)));
        v.push((3, q(-1, 24), q(1, 24), cc, q(6, 1)));
    }
    v
}

fn table_oracle() -> Outcome {
    let start = Instant::now();
    let specials = special_rows();
    let cfg = TableConfig::default();
    let mut disagreements = Vec::new();
    let mut matched_total = 0;
    for k in (-6i64..=6).filter(|k| *k != 0) {
        let kk = k as i128;
        // every a with a/24 reachable for some row and |p| <= 10^4
        let mut hit: HashSet<i128> = HashSet::new();
        let mut record = |lambda: Q| {
            let scaled = lambda * Q::from_integer(24);
            if scaled.is_integer() && scaled.numer().abs() <= 200 {
                hit.insert(*scaled.numer());
            }
        };
        for p in -10_000i128..=10_000 {
            record(Q::new(kk * p * p + (kk - 2) * p, 2));
            record(Q::new(kk * kk * p * p + kk * kk * p + kk - 1, 2 * kk));
            for (rk, a, b, cc, d) in &specials {
                if *rk == k {
                    let t = *cc + *d * Q::from_integer(p);
                    record(*a + *b * t * t);
                }
            }
        }
        let wildcard = k == 2 || k == -2;
        for a in -200i128..=200 {
            let lambda = BigRational::new(BigInt::from(a), BigInt::from(24));
            let v = check_pair_exact(k, &lambda, &cfg).map_err(|e| e.to_string())?;
            let expected = wildcard || hit.contains(&a);
            matched_total += usize::from(v.matched);
            if v.matched != expected {
                disagreements.push(format!("k={k} lambda={a}/24 checker={} oracle={expected}", v.matched));
            }
        }
    }
    ensure!(disagreements.is_empty(), "{} disagreements, first: {}", disagreements.len(), disagreements[0]);
    let t = within(Duration::from_secs(60), start)?;
    Ok(format!("4812 pairs, {matched_total} admissible, 0 disagreements, {t}"))
}

fn trivial_eigenvalue() -> Outcome {
    let cfg = TableConfig::default();
    for k in (-50i64..=50).filter(|k| *k != 0) {
        let v = check_pair_exact(k, &BigRational::from_integer(BigInt::from(k - 1)), &cfg).map_err(|e| e.to_string())?;
        ensure!(v.matched, "k = {k}: k-1 not matched");
        ensure!(
            v.witnesses.iter().any(|w| w.label == "familyA" && w.p == Some(BigInt::from(1))),
            "k = {k}: no family A witness with p = 1"
        );
    }
    Ok("100 degrees, family A p = 1".into())
}

fn ramified_guard() -> Outcome {
    let s = setup(RAMIFIED);
    let r = analyze(&s, &AnalyzeOptions::default(), None).map_err(|e| e.to_string())?;
    let rejected: Vec<_> = r
        .darboux
        .rejected
        .iter()
        .filter(|x| x.diagnostic.contains("Sigma(V)"))
        .collect();
    ensure!(!rejected.is_empty(), "no rejected candidate");
    for x in &rejected {
        let coords = &x.point.coords;
        ensure!(coords[0].norm() < 1e-8 && coords[2].norm() < 1e-8, "rejected candidate off w1=q1=0: {coords:?}");
    }
    ensure!(r.warnings.iter().any(|w| w.contains("Sigma(V)")), "no warning");

    // the orbit w1 = q1 = 0, q2 = cos t
    let calc = Calculus::new(&s).map_err(|e| e.to_string())?;
    let init = TrajectoryState::new(&calc, 0.0, vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0); 2], vec![c(0.0, 0.0)])
        .map_err(|e| e.to_string())?;
    let traj = integrate(&calc, &init, 1.0, &IntegrateOptions::default()).map_err(|e| e.to_string())?;
    ensure!(traj.termination == Termination::CriticalSet, "termination {:?}", traj.termination);
    let diag = traj.diagnostic.unwrap_or_default();
    ensure!(diag.contains("critical set"), "diagnostic `{diag}`");
    Ok(format!("{} candidate(s) rejected; simulation stopped: {diag}", rejected.len()))
}

fn nbody_generator() -> Outcome {
    ensure!(NBodyConfig::equal_masses(3, 1).is_err(), "d = 1 accepted");
    let cfg = NBodyConfig::equal_masses(3, 2).map_err(|e| e.to_string())?;
    let s = nbody::build(&cfg).map_err(|e| e.to_string())?;
    ensure!(s.n() == 6 && s.s() == 3, "dimensions {} {}", s.n(), s.s());
    let calc = Calculus::new(&s).map_err(|e| e.to_string())?;
    let v = validate(&s, &calc.jd, 8, 1, 1e-8).map_err(|e| e.to_string())?;
    ensure!(v.detj_nonzero, "validation failed");
    let h = detect_homogeneity(&s, &calc.jd, 1).map_err(|e| e.to_string())?;
    ensure!(h.degree == BigRational::from_integer(BigInt::from(-1)), "degree {}", h.degree);

    // Sigma(V) membership against the distances
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    for trial in 0..60 {
        let mut q: Vec<C64> = (0..6).map(|_| c(rng.gen_range(-2.0..2.0), rng.gen_range(-0.5..0.5))).collect();
        if trial % 3 != 0 {
            // bring one pair to distance 0, 1e-10 or 1e-6
            let (i, j) = [(0, 1), (0, 2), (1, 2)][trial % 3];
            let gap = [0.0, 1e-10, 1e-6][(trial / 3) % 3];
            for a in 0..2 {
                q[2 * j + a] = q[2 * i + a] + if a == 0 { c(gap, 0.0) } else { c(0.0, 0.0) };
            }
        }
        let r: Vec<C64> = [(0, 1), (0, 2), (1, 2)]
            .iter()
            .map(|&(i, j)| {
                let dx = q[2 * i] - q[2 * j];
                let dy = q[2 * i + 1] - q[2 * j + 1];
                (dx * dx + dy * dy).sqrt()
            })
            .collect();
        let near_zero = r.iter().any(|z| z.norm() <= 1e-8);
        let coords: Vec<C64> = q.iter().chain(&r).copied().collect();
        let p = VarietyPoint::new(&calc.jd, coords).map_err(|e| e.to_string())?;
        ensure!(p.constraint_residual < 1e-12, "off the variety");
        let flag = calc.in_sigma_v(&p, 1e-8);
        ensure!(flag == near_zero, "trial {trial}: in_sigma_v = {flag}, distances {r:?}");
        checked += 1;
    }
    Ok(format!("d=1 rejected, validated, degree -1, {checked} Sigma(V) probes agree"))
}

fn three_body_obstruction() -> Outcome {
    let start = Instant::now();
    let (_, r) = three_body_report();
    ensure!(r.exit_code() == 10, "exit code {}", r.exit_code());
    ensure!(r.certificate.kind == CertificateKind::Obstruction, "certificate {:?}", r.certificate.kind);
    let eq = r
        .darboux
        .accepted
        .iter()
        .enumerate()
        .find(|(_, p)| {
            let rr = &p.point.coords[6..];
            (rr[0] - rr[1]).norm() < 1e-8 && (rr[1] - rr[2]).norm() < 1e-8
        })
        .ok_or("no equilateral point")?;
    let (index, point) = eq;
    let cfg = TableConfig::default();
    let mut failing = Vec::new();
    for v in &point.verdicts {
        let Some(q) = &v.rational else { continue };
        // re-check the reconstructed value directly
        let direct = check_pair_exact(-1, q, &cfg).map_err(|e| e.to_string())?;
        if !direct.matched && v.mode == Mode::Exact && !v.matched {
            failing.push(q.to_string());
        }
    }
    ensure!(!failing.is_empty(), "every non-gauge eigenvalue admissible at the equilateral point");
    ensure!(
        r.certificate.witnesses.iter().any(|w| w.point_index == index),
        "certificate does not cite the equilateral point"
    );
    let out = Command::new(env!("CARGO_BIN_EXE_algpot"))
        .args(["nbody", "--n", "3", "--dim", "2", "--analyze"])
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(out.status.code() == Some(10), "CLI exit {:?}", out.status.code());
    let text = String::from_utf8_lossy(&out.stdout);
    ensure!(text.contains("witness"), "CLI printed no witness");
    let t = within(Duration::from_secs(30), start)?;
    Ok(format!("equilateral point, non-admissible eigenvalue(s) {}, exit 10, {t}", failing.join(", ")))
}

/// `V` along the local branch of the fiber through `x`.
fn branch_value(calc: &Calculus, x: &[C64], q: &[C64]) -> Option<C64> {
    let n = calc.n();
    let w = calc.jd.solve_fiber(q, &x[n..])?;
    let y: Vec<C64> = q.iter().chain(&w).copied().collect();
    calc.potential_at(&y).ok()
}

fn calculus_case(name: &str, s: &AlgebraicSetup, route: Route, seed: u64) -> Result<(f64, f64, f64), String> {
    let calc = Calculus::with_route(s, route).map_err(|e| e.to_string())?;
    let n = calc.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_g, mut worst_h, mut worst_sym) = (0.0f64, 0.0f64, 0.0f64);
    let mut done = 0;
    while done < 20 {
        let x = calc.jd.sample_point(&mut rng, 1.5, 50).ok_or("sampling failed")?;
        if calc.singular_margin(&x) < 0.1 {
            continue;
        }
        let q0 = &x[..n];
        let grad = calc.grad_at(&x).map_err(|e| e.to_string())?;
        let hess = calc.hess_at(&x).map_err(|e| e.to_string())?;
        let h = 1e-4;
        let shifted = |steps: &[(usize, f64)]| -> Option<C64> {
            let mut q = q0.to_vec();
            for &(i, a) in steps {
                q[i] += a * h;
            }
            branch_value(&calc, &x, &q)
        };
        let mut fd_grad = vec![c(0.0, 0.0); n];
        for i in 0..n {
            // fourth-order central difference
            let f = |a: f64| shifted(&[(i, a)]).ok_or("branch lost");
            fd_grad[i] = (f(-2.0)? - f(2.0)? * 1.0 + (f(1.0)? - f(-1.0)?) * 8.0) / (12.0 * h);
        }
        let scale = fd_grad.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        let err = grad.iter().zip(&fd_grad).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale;
        worst_g = worst_g.max(err);

        let mut fd_h = vec![vec![c(0.0, 0.0); n]; n];
        for i in 0..n {
            for j in 0..n {
                let f = |a: f64, b: f64| shifted(&[(i, a), (j, b)]).ok_or("branch lost");
                let mut acc = c(0.0, 0.0);
                // product of fourth-order stencils
                let w = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];
                for (a, wa) in w {
                    for (b, wb) in w {
                        acc += f(a, b)? * (wa * wb);
                    }
                }
                fd_h[i][j] = acc / (144.0 * h * h);
            }
        }
        let hscale = fd_h.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        let mut herr = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                herr = herr.max((hess[(i, j)] - fd_h[i][j]).norm());
            }
        }
        worst_h = worst_h.max(herr / hscale);
        let hn = hess.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        worst_sym = worst_sym.max(asymmetry(&hess) / hn);
        done += 1;
    }
    ensure!(worst_g <= 1e-6, "{name}: gradient relative error {worst_g:.2e}");
    ensure!(worst_h <= 1e-6, "{name}: Hessian relative error {worst_h:.2e}");
    ensure!(worst_sym <= 1e-9, "{name}: Hessian asymmetry {worst_sym:.2e}");
    Ok((worst_g, worst_h, worst_sym))
}

fn calculus_correctness() -> Outcome {
    let two_body = nbody::build(&NBodyConfig::equal_masses(2, 2).unwrap()).unwrap();
    let three_body = nbody::build(&NBodyConfig::new(3, 2, nbody::parse_masses("1,2,3").unwrap()).unwrap()).unwrap();
    let cases = [
        ("circle", setup(CIRCLE), Route::Symbolic),
        ("circle numeric", setup(CIRCLE), Route::Numeric),
        ("ramified", setup(RAMIFIED), Route::Symbolic),
        ("two-body", two_body, Route::Symbolic),
        ("three-body", three_body.clone(), Route::Symbolic),
        ("three-body numeric", three_body, Route::Numeric),
        (
            "two extensions",
            setup("vars q1 q2\next w1 : w1^2 - q1 - q2^2\next w2 : w2^3 - w1 - q1\npotential w1*w2 + q1/w2"),
            Route::Symbolic,
        ),
    ];
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for (i, (name, s, route)) in cases.iter().enumerate() {
        let (g, h, sym) = calculus_case(name, s, *route, 100 + i as u64)?;
        worst = (worst.0.max(g), worst.1.max(h), worst.2.max(sym));
    }

    // Euler identity at accepted Darboux points
    let mut euler = 0.0f64;
    let mut points = 0;
    let circle = analyze(&setup(CIRCLE), &AnalyzeOptions::default(), None).map_err(|e| e.to_string())?;
    let (_, three) = three_body_report();
    for r in [&circle, &three] {
        for p in &r.darboux.accepted {
            let e = p.euler_residual.ok_or("no Euler residual")?;
            ensure!(e <= 1e-8, "Euler residual {e:.2e}");
            euler = euler.max(e);
            points += 1;
        }
    }
    Ok(format!(
        "{} setups x 20 points: grad {:.1e}, Hessian {:.1e}, asymmetry {:.1e}; Euler {:.1e} at {points} points",
        cases.len(),
        worst.0,
        worst.1,
        worst.2,
        euler
    ))
}

fn reversal_error(calc: &Calculus, init: &TrajectoryState) -> Result<f64, String> {
    let opts = IntegrateOptions::default();
    let fwd = integrate(calc, init, 1.0, &opts).map_err(|e| e.to_string())?;
    ensure!(fwd.termination == Termination::Completed, "forward run: {:?}", fwd.diagnostic);
    let end = fwd.last();
    let flipped = TrajectoryState::new(calc, 0.0, end.q.clone(), end.p.iter().map(|v| -v).collect(), end.w.clone())
        .map_err(|e| e.to_string())?;
    let back = integrate(calc, &flipped, 1.0, &opts).map_err(|e| e.to_string())?;
    ensure!(back.termination == Termination::Completed, "backward run: {:?}", back.diagnostic);
    let b = back.last();
    let err = init
        .q
        .iter()
        .zip(&b.q)
        .chain(init.w.iter().zip(&b.w))
        .map(|(x, y)| (x - y).norm())
        .chain(init.p.iter().zip(&b.p).map(|(x, y)| (x + y).norm()))
        .fold(0.0, f64::max);
    Ok(err)
}

fn dynamics_conservation() -> Outcome {
    let circle = Calculus::new(&setup(CIRCLE)).unwrap();
    let circle_init = TrajectoryState::new(
        &circle,
        0.0,
        vec![c(0.6, 0.0), c(0.8, 0.0)],
        vec![c(0.1, 0.0), c(-0.2, 0.0)],
        vec![c(1.0, 0.0)],
    )
    .unwrap();
    let two = Calculus::new(&nbody::build(&NBodyConfig::equal_masses(2, 2).unwrap()).unwrap()).unwrap();
    let two_init = TrajectoryState::new(
        &two,
        0.0,
        vec![c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        vec![c(0.0, 0.0), c(0.3, 0.0), c(0.0, 0.0), c(-0.3, 0.0)],
        vec![c(2.0, 0.0)],
    )
    .unwrap();
    let mut summary = Vec::new();
    for (name, calc, init) in [("circle", &circle, &circle_init), ("two-body", &two, &two_init)] {
        let free = integrate(calc, init, 1.0, &IntegrateOptions::default()).map_err(|e| e.to_string())?;
        ensure!(free.termination == Termination::Completed, "{name}: {:?}", free.diagnostic);
        ensure!(free.energy_drift <= 1e-9, "{name}: energy drift {:.2e}", free.energy_drift);
        ensure!(free.constraint_drift <= 1e-7, "{name}: constraint drift {:.2e}", free.constraint_drift);
        let projected = integrate(
            calc,
            init,
            1.0,
            &IntegrateOptions {
                project: true,
                ..IntegrateOptions::default()
            },
        )
        .map_err(|e| e.to_string())?;
        ensure!(projected.energy_drift <= 1e-9, "{name}: projected energy drift {:.2e}", projected.energy_drift);
        ensure!(
            projected.constraint_drift <= 1e-12,
            "{name}: projected constraint drift {:.2e}",
            projected.constraint_drift
        );
        let rev = reversal_error(calc, init)?;
        ensure!(rev <= 1e-7, "{name}: time reversal error {rev:.2e}");
        summary.push(format!(
            "{name}: dH {:.1e}, dG {:.1e}/{:.1e}, reversal {:.1e}",
            free.energy_drift, free.constraint_drift, projected.constraint_drift, rev
        ));
    }

    let s = setup(CIRCLE);
    let h = detect_homogeneity(&s, &circle.jd, 1).map_err(|e| e.to_string())?;
    let third = c(1.0 / 3.0, 0.0);
    let grid: Vec<f64> = (0..=50).map(|i| i as f64 * 0.01).collect();
    let orbit = homothetic_orbit(&circle, &h, &[third, c(0.0, 0.0), third], &grid, 1.0, 1.0).map_err(|e| e.to_string())?;
    ensure!(orbit.max_residual <= 1e-8, "homothetic residual {:.2e}", orbit.max_residual);
    summary.push(format!("homothetic residual {:.1e}", orbit.max_residual));
    Ok(summary.join("; "))
}

fn variational_equation() -> Outcome {
    let mut built = 0;
    for k in (-6i64..=6).filter(|k| *k != 0) {
        for a in (-48i64..=48).step_by(5) {
            let lambda = Lambda::Exact(BigRational::new(BigInt::from(a), BigInt::from(24)));
            let ve = build_ve(k, &lambda).map_err(|e| e.to_string())?;
            ensure!(*ve.fuchs_sum() == BigRational::from_integer(BigInt::from(1)), "Fuchs sum {} for k={k}", ve.fuchs_sum());
            built += 1;
        }
    }
    let mut worst = 0.0f64;
    for (k, l) in [(3, 1), (-1, 0), (2, 3)] {
        let ve = build_ve(k, &Lambda::Exact(BigRational::from_integer(BigInt::from(l)))).map_err(|e| e.to_string())?;
        let m = monodromy_check(&ve, 1e-6).map_err(|e| e.to_string())?;
        for lp in m.loops.iter().filter(|lp| lp.singularity == "0" || lp.singularity == "1") {
            ensure!(lp.eigenvalue_error <= 1e-6, "(k={k}, lambda={l}) at z={}: error {:.2e}", lp.singularity, lp.eigenvalue_error);
            worst = worst.max(lp.eigenvalue_error);
            if lp.singularity == "1" {
                let mut ev = [lp.computed[0].0, lp.computed[1].0];
                ev.sort_by(|a, b| a.re.total_cmp(&b.re));
                ensure!(
                    (ev[0] - c(-1.0, 0.0)).norm() <= 1e-6 && (ev[1] - c(1.0, 0.0)).norm() <= 1e-6,
                    "(k={k}, lambda={l}) eigenvalues at z=1: {ev:?}"
                );
            }
        }
        ensure!(m.loops.iter().filter(|lp| lp.singularity == "0" || lp.singularity == "1").count() == 2, "loops missing");
    }
    Ok(format!("Fuchs sum 1 for {built} equations; monodromy error {worst:.1e}; z=1 eigenvalues {{1, -1}}"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let file = dir.path().join("circle.alg");
    std::fs::write(&file, CIRCLE).map_err(|e| e.to_string())?;
    let run = |args: &[&str], threads: &str| -> Result<Vec<u8>, String> {
        let out = Command::new(env!("CARGO_BIN_EXE_algpot"))
            .args(args)
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(out.status.code().is_some_and(|c| c == 0 || c == 10), "exit {:?}", out.status.code());
        Ok(out.stdout)
    };
    let f = file.to_str().unwrap();
    let jobs: [&[&str]; 3] = [
        &["analyze", f, "--json"],
        &["analyze", f, "--json", "--seed", "99", "--random", "24"],
        &["nbody", "--n", "3", "--dim", "2", "--analyze", "--json"],
    ];
    for args in jobs {
        let a = run(args, "1")?;
        let b = run(args, "4")?;
        let c2 = run(args, "4")?;
        ensure!(!a.is_empty(), "empty output for {args:?}");
        ensure!(a == b && b == c2, "outputs differ for {args:?}");
    }
    let s = setup(CIRCLE);
    let x = serde_json::to_string(&analyze(&s, &AnalyzeOptions::default(), None).unwrap()).unwrap();
    let y = serde_json::to_string(&analyze(&s, &AnalyzeOptions::default(), None).unwrap()).unwrap();
    ensure!(x == y, "library reports differ");
    Ok("3 CLI invocations byte-identical across runs and thread counts".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("circle potential pipeline", circle_pipeline),
        ("table oracle equivalence", table_oracle),
        ("trivial eigenvalue law", trivial_eigenvalue),
        ("critical-set guard", ramified_guard),
        ("n-body generator", nbody_generator),
        ("three-body obstruction", three_body_obstruction),
        ("calculus correctness", calculus_correctness),
        ("dynamics conservation", dynamics_conservation),
        ("variational equation", variational_equation),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|pat| name.contains(pat.as_str())) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("acceptance {:>2} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("acceptance {:>2} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
