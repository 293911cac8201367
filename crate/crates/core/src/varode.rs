//! The hypergeometric variational equation along the homothetic orbit,
//!
//! ```text
//! z(z-1) X'' + (a z - b) X' - g X = 0,
//! a = (3k-2)/(2k),  b = (k-1)/k,  g = lambda/(2k),
//! ```
//!
//! with its local exponents and a numeric monodromy cross-check.

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::rational_to_f64;
use crate::linalg::{CMatrix, C64};
use crate::ode::{self, OdeOptions, Stop};
use crate::report::CNum;

/// An eigenvalue given exactly or only numerically.
#[derive(Clone, Debug, PartialEq)]
pub enum Lambda {
    Exact(BigRational),
    Numeric(C64),
}

impl Lambda {
    pub fn value(&self) -> C64 {
        match self {
            Lambda::Exact(r) => C64::new(rational_to_f64(r), 0.0),
            Lambda::Numeric(z) => *z,
        }
    }

    /// Rational when possible, else a complex literal.
    pub fn parse(text: &str) -> Result<Lambda> {
        if let Ok(r) = crate::parser::parse_rational(text) {
            return Ok(Lambda::Exact(r));
        }
        crate::report::parse_complex(text)
            .map(Lambda::Numeric)
            .ok_or_else(|| Error::Number(text.into()))
    }
}

fn rstr(r: &BigRational) -> String {
    r.to_string()
}

#[derive(Clone, Debug, Serialize)]
pub struct Exponents {
    pub zero: [String; 2],
    pub one: [String; 2],
    /// Numeric roots at infinity.
    pub infinity: [CNum; 2],
    /// Exact roots at infinity when they are rational.
    pub infinity_exact: Option<[String; 2]>,
    pub infinity_sum: String,
    /// `a*b` exactly when lambda is exact.
    pub infinity_product: Option<String>,
    /// Sum of all six exponents; always 1.
    pub fuchs_sum: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypergeomVE {
    pub k: i64,
    pub lambda: CNum,
    pub lambda_exact: Option<String>,
    /// `(3k-2)/(2k)`
    pub alpha: String,
    /// `(k-1)/k`
    pub beta: String,
    /// `lambda/(2k)`
    pub gamma: CNum,
    pub exponents: Exponents,
    #[serde(skip)]
    exact: ExactParts,
}

#[derive(Clone, Debug)]
struct ExactParts {
    alpha: BigRational,
    beta: BigRational,
    zero: [BigRational; 2],
    one: [BigRational; 2],
    inf_sum: BigRational,
    fuchs: BigRational,
}

fn rational_sqrt(x: &BigRational) -> Option<BigRational> {
    use num_traits::Signed;
    if x.is_negative() {
        return None;
    }
    let (n, d) = (x.numer().sqrt(), x.denom().sqrt());
    (&n * &n == *x.numer() && &d * &d == *x.denom()).then(|| BigRational::new(n, d))
}

pub fn build_ve(k: i64, lambda: &Lambda) -> Result<HypergeomVE> {
    if k == 0 {
        return Err(Error::ZeroDegree);
    }
    let kr = BigRational::from_integer(k.into());
    let two = BigRational::from_integer(2.into());
    let alpha = (BigRational::from_integer(3.into()) * &kr - &two) / (&two * &kr);
    let beta = (&kr - BigRational::one()) / &kr;
    let inf_sum = &alpha - BigRational::one();
    let zero = [BigRational::zero(), BigRational::one() - &beta];
    let one = [BigRational::zero(), BigRational::one() - (&alpha - &beta)];
    let fuchs = zero.iter().chain(&one).sum::<BigRational>() + &inf_sum;

    let lv = lambda.value();
    let gamma = lv / (2.0 * k as f64);
    // mu^2 - S mu + P with S = alpha - 1, P = -gamma
    let s = rational_to_f64(&inf_sum);
    let disc = (C64::new(s * s, 0.0) + 4.0 * gamma).sqrt();
    let infinity = [CNum((s + disc) / 2.0), CNum((s - disc) / 2.0)];
    let (infinity_exact, infinity_product) = match lambda {
        Lambda::Exact(l) => {
            let p = -(l / (&two * &kr));
            let exact = rational_sqrt(&(&inf_sum * &inf_sum - BigRational::from_integer(4.into()) * &p)).map(|d| {
                let a = (&inf_sum + &d) / &two;
                let b = (&inf_sum - &d) / &two;
                [rstr(&a), rstr(&b)]
            });
            (exact, Some(rstr(&p)))
        }
        Lambda::Numeric(_) => (None, None),
    };
    Ok(HypergeomVE {
        k,
        lambda: CNum(lv),
        lambda_exact: match lambda {
            Lambda::Exact(l) => Some(rstr(l)),
            Lambda::Numeric(_) => None,
        },
        alpha: rstr(&alpha),
        beta: rstr(&beta),
        gamma: CNum(gamma),
        exponents: Exponents {
            zero: [rstr(&zero[0]), rstr(&zero[1])],
            one: [rstr(&one[0]), rstr(&one[1])],
            infinity,
            infinity_exact,
            infinity_sum: rstr(&inf_sum),
            infinity_product,
            fuchs_sum: rstr(&fuchs),
        },
        exact: ExactParts {
            alpha,
            beta,
            zero,
            one,
            inf_sum,
            fuchs,
        },
    })
}

impl HypergeomVE {
    pub fn alpha(&self) -> &BigRational {
        &self.exact.alpha
    }

    pub fn beta(&self) -> &BigRational {
        &self.exact.beta
    }

    pub fn exponents_at_zero(&self) -> &[BigRational; 2] {
        &self.exact.zero
    }

    pub fn exponents_at_one(&self) -> &[BigRational; 2] {
        &self.exact.one
    }

    pub fn infinity_sum(&self) -> &BigRational {
        &self.exact.inf_sum
    }

    pub fn fuchs_sum(&self) -> &BigRational {
        &self.exact.fuchs
    }

    /// `Y' = A(z) Y` for `Y = (X, X')`.
    fn system(&self, z: C64) -> [[C64; 2]; 2] {
        let a = rational_to_f64(&self.exact.alpha);
        let b = rational_to_f64(&self.exact.beta);
        let g = self.gamma.0;
        let zz = z * (z - 1.0);
        [[C64::default(), C64::new(1.0, 0.0)], [g / zz, -(a * z - b) / zz]]
    }

    /// Residual of the equation for a given `(X, X', X'')` at `z`.
    pub fn residual(&self, z: C64, x: C64, dx: C64, ddx: C64) -> C64 {
        let a = rational_to_f64(&self.exact.alpha);
        let b = rational_to_f64(&self.exact.beta);
        z * (z - 1.0) * ddx + (a * z - b) * dx - self.gamma.0 * x
    }
}

/// Transports the identity fundamental matrix along `path(s)`,
/// `s in [0, 1]`, split into `segments` adaptive pieces.
fn transport(ve: &HypergeomVE, path: &dyn Fn(f64) -> (C64, C64), segments: usize, start: CMatrix) -> Result<CMatrix> {
    let mut y: Vec<C64> = start.iter().copied().collect();
    let opts = OdeOptions {
        rtol: 1e-13,
        atol: 1e-13,
        ..Default::default()
    };
    for i in 0..segments {
        let (s0, s1) = (i as f64 / segments as f64, (i + 1) as f64 / segments as f64);
        let out = ode::integrate(
            |s, y| {
                let (z, dz) = path(s);
                let a = ve.system(z);
                let mut d = vec![C64::default(); 4];
                // column-major 2x2
                for col in 0..2 {
                    for row in 0..2 {
                        d[col * 2 + row] = (a[row][0] * y[col * 2] + a[row][1] * y[col * 2 + 1]) * dz;
                    }
                }
                Ok(d)
            },
            s0,
            &y,
            s1,
            &opts,
            |_, _| Ok(()),
        );
        if out.stop != Stop::Reached {
            return Err(Error::Integration(format!("monodromy transport stopped: {:?}", out.stop)));
        }
        y = out.y;
    }
    Ok(CMatrix::from_column_slice(2, 2, &y))
}

#[derive(Clone, Debug, Serialize)]
pub struct LoopCheck {
    pub singularity: String,
    pub expected: [CNum; 2],
    pub computed: [CNum; 2],
    /// Best matching of computed to expected eigenvalues.
    pub eigenvalue_error: f64,
    pub trace_error: f64,
    pub det_error: f64,
    /// Integer exponent difference: logarithmic terms possible, the
    /// characteristic polynomial is compared instead of a diagonal form.
    pub resonant: bool,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MonodromyReport {
    pub basepoint: f64,
    pub radius: f64,
    pub segments: usize,
    pub loops: Vec<LoopCheck>,
    /// `|M_inf M_0 M_1 - I|`.
    pub product_error: f64,
    pub tol: f64,
    pub notices: Vec<String>,
    pub ok: bool,
}

fn eig2(m: &CMatrix) -> [C64; 2] {
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let d = (tr * tr - 4.0 * det).sqrt();
    [(tr + d) / 2.0, (tr - d) / 2.0]
}

fn check_loop(name: &str, m: &CMatrix, exps: [C64; 2], tol: f64) -> LoopCheck {
    let tau = std::f64::consts::TAU;
    let expected = exps.map(|e| (C64::new(0.0, tau) * e).exp());
    let computed = eig2(m);
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let trace_error = (tr - expected[0] - expected[1]).norm();
    let det_error = (det - expected[0] * expected[1]).norm();
    let straight = (computed[0] - expected[0]).norm().max((computed[1] - expected[1]).norm());
    let swapped = (computed[0] - expected[1]).norm().max((computed[1] - expected[0]).norm());
    let diff = exps[0] - exps[1];
    let resonant = diff.im.abs() < 1e-12 && (diff.re - diff.re.round()).abs() < 1e-12;
    let eigenvalue_error = straight.min(swapped);
    // For a repeated eigenvalue the numeric split is ~sqrt(eps); the
    // trace and determinant are the well-conditioned comparison.
    let ok = trace_error <= tol && det_error <= tol && (resonant || eigenvalue_error <= tol);
    LoopCheck {
        singularity: name.into(),
        expected: expected.map(CNum),
        computed: computed.map(CNum),
        eigenvalue_error,
        trace_error,
        det_error,
        resonant,
        ok,
    }
}

pub const MONODROMY_SEGMENTS: usize = 720;

/// Numeric monodromy around `0` and `1` (radius 1/2, basepoint 1/2) and
/// around both (hence infinity), compared with `exp(2 pi i exponent)`.
pub fn monodromy_check(ve: &HypergeomVE, tol: f64) -> Result<MonodromyReport> {
    let tau = std::f64::consts::TAU;
    let i = C64::new(0.0, 1.0);
    let seg = MONODROMY_SEGMENTS;
    let id = CMatrix::identity(2, 2);
    let around0 = |s: f64| {
        let e = (i * tau * s).exp();
        (0.5 * e, 0.5 * i * tau * e)
    };
    let around1 = |s: f64| {
        let e = (i * tau * s).exp();
        (1.0 - 0.5 * e, -0.5 * i * tau * e)
    };
    let m0 = transport(ve, &around0, seg, id.clone())?;
    let m1 = transport(ve, &around1, seg, id.clone())?;

    // down to 1/2 - i, once around the circle |z - 1/2| = 1, back up
    let down = |s: f64| (C64::new(0.5, -s), C64::new(0.0, -1.0));
    let big = |s: f64| {
        let e = (i * (tau * s - tau / 4.0)).exp();
        (0.5 + e, i * tau * e)
    };
    let up = |s: f64| (C64::new(0.5, -1.0 + s), C64::new(0.0, 1.0));
    let mut mb = transport(ve, &down, seg / 8, id.clone())?;
    mb = transport(ve, &big, seg * 2, mb)?;
    mb = transport(ve, &up, seg / 8, mb)?;
    let minf = mb.clone().try_inverse().ok_or_else(|| Error::Integration("singular monodromy".into()))?;

    let z = |r: &BigRational| C64::new(rational_to_f64(r), 0.0);
    let e0 = ve.exponents_at_zero();
    let e1 = ve.exponents_at_one();
    let loops = vec![
        check_loop("0", &m0, [z(&e0[0]), z(&e0[1])], tol),
        check_loop("1", &m1, [z(&e1[0]), z(&e1[1])], tol),
        check_loop("infinity", &minf, [ve.exponents.infinity[0].0, ve.exponents.infinity[1].0], tol),
    ];
    let product_error = crate::linalg::matrix_inf_norm(&(&minf * &m0 * &m1 - &id));
    let mut notices = Vec::new();
    for l in &loops {
        if l.resonant {
            notices.push(format!(
                "exponents at {} differ by an integer; compared through trace and determinant",
                l.singularity
            ));
        }
    }
    let ok = loops.iter().all(|l| l.ok) && product_error <= tol.max(1e-5);
    Ok(MonodromyReport {
        basepoint: 0.5,
        radius: 0.5,
        segments: seg,
        loops,
        product_error,
        tol,
        notices,
        ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact(n: i64, d: i64) -> Lambda {
        Lambda::Exact(BigRational::new(n.into(), d.into()))
    }

    #[test]
    fn coefficients_and_exponents() {
        let ve = build_ve(2, &exact(3, 1)).unwrap();
        assert_eq!((ve.alpha.as_str(), ve.beta.as_str()), ("1", "1/2"));
        assert_eq!(ve.exponents.zero, ["0".to_string(), "1/2".to_string()]);

        let ve = build_ve(3, &exact(1, 1)).unwrap();
        assert_eq!(ve.exponents.infinity_sum, "1/6");
        assert_eq!(ve.exponents.infinity_product.as_deref(), Some("-1/6"));
        assert_eq!(ve.exponents.infinity_exact, Some(["1/2".to_string(), "-1/3".to_string()]));
        assert!(build_ve(0, &exact(1, 1)).is_err());
    }

    #[test]
    fn constant_solution_when_lambda_vanishes() {
        let ve = build_ve(-1, &exact(0, 1)).unwrap();
        for z in [C64::new(0.3, 0.2), C64::new(2.0, -1.0)] {
            assert_eq!(ve.residual(z, C64::new(1.0, 0.0), C64::default(), C64::default()), C64::default());
        }
        assert!(ve.exponents_at_zero().contains(&BigRational::zero()));
        assert!(ve.exponents_at_one().contains(&BigRational::zero()));
    }

    #[test]
    fn fuchs_relation() {
        for k in [-7, -3, -1, 1, 2, 5, 12] {
            for l in [exact(0, 1), exact(7, 3), exact(-5, 8)] {
                assert!(build_ve(k, &l).unwrap().fuchs_sum().is_one());
            }
        }
    }

    #[test]
    fn lambda_literals() {
        assert_eq!(Lambda::parse("25/24").unwrap(), exact(25, 24));
        assert_eq!(Lambda::parse("0.5+0.5i").unwrap(), Lambda::Numeric(C64::new(0.5, 0.5)));
    }

    #[test]
    fn monodromy_k3() {
        for (k, l) in [(3, exact(1, 1)), (-1, exact(0, 1)), (2, exact(3, 1)), (-3, Lambda::Numeric(C64::new(0.3, 0.7)))] {
            let ve = build_ve(k, &l).unwrap();
            let r = monodromy_check(&ve, 1e-6).unwrap();
            assert!(r.ok, "{r:#?}");
            assert!(r.product_error < 1e-5);
            let one = &r.loops[1];
            assert!(one.computed.iter().any(|z| (z.0 - 1.0).norm() < 1e-6));
            assert!(one.computed.iter().any(|z| (z.0 + 1.0).norm() < 1e-6));
        }
    }
}
