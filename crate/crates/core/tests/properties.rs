use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64 as C64;
use num_rational::BigRational;
use proptest::prelude::*;

use algpot::calculus::{homogeneity_weights, Calculus};
use algpot::mrtable::{check_pair_exact, check_pair_numeric, TableConfig};
use algpot::parser::{parse_expr, parse_setup};
use algpot::spectrum::{eigen, rationalize};

fn names() -> Vec<String> {
    ["q1", "q2", "w1"].iter().map(|s| s.to_string()).collect()
}

fn expr_text() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (1i64..20).prop_map(|n| n.to_string()),
        (1i64..9, 2i64..9).prop_map(|(n, d)| format!("({n}/{d})")),
        Just("q1".to_string()),
        Just("q2".to_string()),
        Just("w1".to_string()),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} * {b}")),
            (inner.clone(), -3i64..4).prop_map(|(a, e)| format!("({a})^{e}")),
            inner.clone().prop_map(|a| format!("-{a}")),
        ]
    })
}

fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn print_parse_round_trip(text in expr_text()) {
        let names = names();
        // texts whose normal form divides by zero are rejected consistently
        if let Ok(e) = parse_expr(&text, &names) {
            let printed = e.display(&names).to_string();
            let again = parse_expr(&printed, &names).unwrap();
            prop_assert_eq!(again, e, "printed as {}", printed);
        }
    }

    #[test]
    fn trivial_eigenvalue_is_admissible(k in -100_000i64..100_000) {
        prop_assume!(k != 0);
        let v = check_pair_exact(k, &BigRational::from_integer(BigInt::from(k - 1)), &TableConfig::default()).unwrap();
        prop_assert!(v.matched);
    }

    #[test]
    fn numeric_mode_agrees_with_exact(k in -8i64..9, n in -400i64..400, d in prop::sample::select(vec![1i64, 2, 3, 4, 5, 6, 8, 12, 24, 40])) {
        prop_assume!(k != 0);
        let cfg = TableConfig::default();
        let exact = check_pair_exact(k, &rational(n, d), &cfg).unwrap();
        let numeric = check_pair_numeric(k, C64::new(n as f64 / d as f64, 0.0), &cfg).unwrap();
        prop_assert_eq!(exact.matched, numeric.matched);
    }

    #[test]
    fn rational_reconstruction_inverts_division(n in -100_000i64..100_000, d in 1i64..1000) {
        let x = C64::new(n as f64 / d as f64, 0.0);
        prop_assert_eq!(rationalize(x, 1e-12, 1_000_000), Some(rational(n, d)));
    }

    #[test]
    fn spectrum_is_similarity_invariant(
        diag in prop::collection::vec(-6i64..7, 3),
        entries in prop::collection::vec(-2.0f64..2.0, 9),
    ) {
        let p = DMatrix::from_fn(3, 3, |i, j| C64::new(entries[3 * i + j] + if i == j { 4.0 } else { 0.0 }, 0.0));
        let pinv = p.clone().try_inverse().unwrap();
        let d = DMatrix::from_fn(3, 3, |i, j| if i == j { C64::new(diag[i] as f64, 0.0) } else { C64::new(0.0, 0.0) });
        let h = &p * d * pinv;
        let spec = eigen(&h, 1e-8, 1_000_000).unwrap();
        prop_assert!(spec.diagonalizable);
        let mut got: Vec<BigRational> = spec
            .eigenvalues
            .iter()
            .flat_map(|e| std::iter::repeat(e.rational.clone().unwrap()).take(e.multiplicity))
            .collect();
        let mut want: Vec<BigRational> = diag.iter().map(|&v| BigRational::from_integer(BigInt::from(v))).collect();
        got.sort();
        want.sort();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn weighted_scaling_of_potential(re in 0.2f64..1.5, im in -1.0f64..1.0, ar in 0.3f64..2.0, ai in -1.0f64..1.0) {
        let s = parse_setup("vars q1 q2\next w1 : w1^3 - q1^2*w1 - q2^3\npotential w1^2*q1 + q2^3").unwrap();
        let calc = Calculus::new(&s).unwrap();
        let h = homogeneity_weights(&s).unwrap();
        let q = [C64::new(re, im), C64::new(im, re)];
        let Some(w) = calc.jd.solve_fiber(&q, &[C64::new(1.0, 0.3)]) else { return Ok(()) };
        let x: Vec<C64> = q.iter().chain(&w).copied().collect();
        let alpha = C64::new(ar, ai);
        let y = h.scale_point(&x, alpha, 2);
        prop_assert!(calc.jd.constraint_residual(&y).unwrap() < 1e-9 * (1.0 + alpha.norm()).powi(6));
        let lhs = calc.potential_at(&y).unwrap();
        let rhs = calc.potential_at(&x).unwrap() * alpha.powi(h.d2 as i32);
        prop_assert!((lhs - rhs).norm() <= 1e-9 * (1.0 + rhs.norm()));
    }
}
