use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use algpot::calculus::{detect_homogeneity, Calculus};
use algpot::darboux::{newton_from, solve_darboux, DarbouxOptions, Gauge};
use algpot::nbody::{self, NBodyConfig, NBodyGauge};
use algpot::parser::parse_setup;
use algpot::tolerances::Tolerances;

fn perturb(x: &[C64], rng: &mut ChaCha8Rng, size: f64) -> Vec<C64> {
    x.iter()
        .map(|z| z + C64::new(rng.gen_range(-size..size), rng.gen_range(-size..size)))
        .collect()
}

fn dist(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Newton from `c + delta`, `|delta| ~ 1e-4`, returns to `c`.
fn assert_isolated(calc: &Calculus, c: &[C64], gauge: Option<&dyn Gauge>, seed: u64) {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10 {
        let start = perturb(c, &mut rng, 1e-4);
        let back = newton_from(calc, &start, gauge, &tol).expect("Newton converges from a nearby start");
        assert!(dist(&back, c) < 1e-9, "returned to a different point: {:e}", dist(&back, c));
    }
}

#[test]
fn ramified_point_is_isolated() {
    let s = parse_setup("vars q1 q2\next w1 : w1^2 - q1\npotential w1^5 + q2^2").unwrap();
    let calc = Calculus::new(&s).unwrap();
    let opts = DarbouxOptions {
        seeds: vec![vec![C64::new(0.2, 0.0), C64::new(0.1, 0.0)]],
        n_random: 0,
        ..DarbouxOptions::default()
    };
    let search = solve_darboux(&calc, None, &opts, None).unwrap();
    assert_eq!(search.accepted.len(), 1);
    let c = &search.accepted[0].point.coords;
    // 5 w^3 / 2 = w^2, 2 q2 = q2
    assert!((c[2] - C64::new(0.4, 0.0)).norm() < 1e-12);
    assert!((c[0] - C64::new(0.16, 0.0)).norm() < 1e-12);
    assert!(c[1].norm() < 1e-12);
    assert_isolated(&calc, c, None, 1);
}

#[test]
fn pinned_central_configurations_are_isolated() {
    for n in [2, 3] {
        let cfg = NBodyConfig::equal_masses(n, 2).unwrap();
        let s = nbody::build(&cfg).unwrap();
        let calc = Calculus::new(&s).unwrap();
        let h = detect_homogeneity(&s, &calc.jd, 3).unwrap();
        let gauge = NBodyGauge::new(&cfg);
        let opts = DarbouxOptions {
            seeds: nbody::central_config_seeds(&cfg).0,
            n_random: 0,
            ..DarbouxOptions::default()
        };
        let search = solve_darboux(&calc, Some(&h), &opts, Some(&gauge)).unwrap();
        assert!(!search.accepted.is_empty());
        for (i, p) in search.accepted.iter().enumerate() {
            assert!(p.grad_residual <= 1e-9 && p.point.constraint_residual <= 1e-9);
            assert_isolated(&calc, &p.point.coords, Some(&gauge), 10 + i as u64);
            // third law: the gradient sums to zero per axis
            let g = calc.grad_at(&p.point.coords).unwrap();
            for axis in 0..2 {
                let total: C64 = (0..n).map(|b| g[cfg.q_index(b, axis)]).sum();
                assert!(total.norm() < 1e-10);
            }
        }
    }
}

#[test]
fn circle_potential_points_return_to_the_circle() {
    // V = w^3 on w^2 = q1^2 + q2^2 is rotation invariant: its Darboux points
    // form a curve, so only the transverse directions are isolated.
    let s = parse_setup("vars q1 q2\next w1 : w1^2 - q1^2 - q2^2\npotential w1^3").unwrap();
    let calc = Calculus::new(&s).unwrap();
    let c = [C64::new(1.0 / 3.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0 / 3.0, 0.0)];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let back = newton_from(&calc, &perturb(&c, &mut rng, 1e-4), None, &Tolerances::default()).unwrap();
        assert!(dist(&back, &c) < 1e-3);
        assert!((back[2] - c[2]).norm() < 1e-12);
        let r2 = back[0] * back[0] + back[1] * back[1];
        assert!((r2 - C64::new(1.0 / 9.0, 0.0)).norm() < 1e-12);
    }
}

#[test]
fn report_order_is_deterministic() {
    let s = parse_setup("vars q1 q2\next w1 : w1^2 - q1^2 - q2^2\npotential w1^3").unwrap();
    let calc = Calculus::new(&s).unwrap();
    let opts = DarbouxOptions {
        n_random: 12,
        seed: 77,
        ..DarbouxOptions::default()
    };
    let a = serde_json::to_string(&solve_darboux(&calc, None, &opts, None).unwrap()).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let b = pool.install(|| serde_json::to_string(&solve_darboux(&calc, None, &opts, None).unwrap()).unwrap());
    assert_eq!(a, b);
}
