//! The table of admissible pairs `(k, lambda)` and the resulting
//! non-integrability certificate.
//!
//! `p` below is an integer parameter. The rows are
//!
//! ```text
//! any k   lambda = p (p k + k - 2) / 2
//! any k   lambda = (p k + k - 1)(p k + 1) / (2 k)
//! k = 2   any lambda
//! k = -2  any lambda
//! k in {-5, -4, -3, 3, 4, 5}:  lambda = A + B (C + D p)^2
//! ```

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::expr::rational_to_f64;
use crate::linalg::C64;
use crate::report::CNum;
use crate::spectrum::rationalize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum RowKind {
    FamilyA,
    FamilyB,
    Wildcard,
    Special,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableRow {
    /// 1-based position in the printed table (left column first).
    pub index: usize,
    pub kind: RowKind,
    /// `None` means any nonzero integer.
    pub k: Option<i64>,
    /// `(A, B, C, D)` for special rows.
    #[serde(serialize_with = "ser_params")]
    pub params: Option<[BigRational; 4]>,
}

fn ser_params<S: Serializer>(p: &Option<[BigRational; 4]>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match p {
        Some(v) => s.collect_seq(v.iter().map(|x| x.to_string())),
        None => s.serialize_none(),
    }
}

impl TableRow {
    pub fn applies_to(&self, k: i64) -> bool {
        self.k.is_none_or(|kk| kk == k)
    }

    /// `lambda(p)` for the parametrized rows; `None` for wildcards.
    pub fn lambda(&self, k: i64, p: &BigInt) -> Option<BigRational> {
        let k = BigRational::from_integer(k.into());
        let p = BigRational::from_integer(p.clone());
        let one = BigRational::one();
        let two = BigRational::from_integer(2.into());
        match self.kind {
            RowKind::FamilyA => Some(&p * (&p * &k + &k - &two) / &two),
            RowKind::FamilyB => Some((&p * &k + &k - &one) * (&p * &k + &one) / (&two * &k)),
            RowKind::Wildcard => None,
            RowKind::Special => {
                let [a, b, c, d] = self.params.as_ref().unwrap();
                let x = c + d * &p;
                Some(a + b * &x * &x)
            }
        }
    }

    pub fn label(&self) -> String {
        match (self.kind, self.k) {
            (RowKind::FamilyA, _) => "familyA".into(),
            (RowKind::FamilyB, _) => "familyB".into(),
            (RowKind::Wildcard, Some(k)) => format!("wildcard(k={k})"),
            (RowKind::Special, Some(k)) => {
                let c = &self.params.as_ref().unwrap()[2];
                format!("special(k={k},C={c})")
            }
            _ => format!("row{}", self.index),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableConfig {
    /// Magnitude of `B` in the `k = -4` row (printed as 1/4).
    #[serde(serialize_with = "crate::report::ser_rational")]
    pub k4_coefficient: BigRational,
    pub tol: f64,
    pub max_den: u64,
}

impl Default for TableConfig {
    fn default() -> Self {
        TableConfig {
            k4_coefficient: BigRational::new(1.into(), 4.into()),
            tol: 1e-8,
            max_den: 1_000_000,
        }
    }
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// The 18 rows, in printed order (left column top to bottom, then right).
pub fn rows(cfg: &TableConfig) -> Vec<TableRow> {
    let mut out = Vec::with_capacity(18);
    let mut push = |kind, k: Option<i64>, params: Option<[BigRational; 4]>| {
        out.push(TableRow {
            index: out.len() + 1,
            kind,
            k,
            params,
        })
    };
    push(RowKind::FamilyA, None, None);
    push(RowKind::FamilyB, None, None);
    push(RowKind::Wildcard, Some(2), None);
    push(RowKind::Wildcard, Some(-2), None);
    for c in [q(10, 3), q(4, 1)] {
        push(RowKind::Special, Some(-5), Some([q(49, 40), q(-1, 40), c, q(10, 1)]));
    }
    push(
        RowKind::Special,
        Some(-4),
        Some([q(9, 8), -cfg.k4_coefficient.clone(), q(4, 3), q(4, 1)]),
    );
    for c in [q(2, 1), q(3, 2)] {
        push(RowKind::Special, Some(-3), Some([q(25, 24), q(-1, 24), c, q(6, 1)]));
    }
    for c in [q(6, 5), q(12, 5)] {
        push(RowKind::Special, Some(-3), Some([q(25, 24), q(-1, 24), c, q(6, 1)]));
    }
    for c in [q(2, 1), q(3, 2), q(6, 5), q(12, 5)] {
        push(RowKind::Special, Some(3), Some([q(-1, 24), q(1, 24), c, q(6, 1)]));
    }
    push(RowKind::Special, Some(4), Some([q(-1, 8), q(1, 8), q(4, 3), q(4, 1)]));
    for c in [q(10, 3), q(4, 1)] {
        push(RowKind::Special, Some(5), Some([q(-9, 40), q(1, 40), c, q(10, 1)]));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub row: usize,
    pub label: String,
    #[serde(serialize_with = "ser_param")]
    pub p: Option<BigInt>,
}

fn ser_param<S: Serializer>(p: &Option<BigInt>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match p {
        None => s.serialize_none(),
        Some(v) => match v.to_i64() {
            Some(i) => s.serialize_some(&i),
            None => s.serialize_some(&v.to_string()),
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Numeric,
}

#[derive(Clone, Debug, Serialize)]
pub struct TableVerdict {
    pub k: i64,
    pub eigenvalue: CNum,
    #[serde(serialize_with = "crate::report::ser_opt_rational")]
    pub rational: Option<BigRational>,
    pub matched: bool,
    pub witnesses: Vec<Witness>,
    pub mode: Mode,
    /// Not matched, decided in exact mode.
    pub obstruction: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn exact_sqrt(n: &BigInt) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let r = n.sqrt();
    (&r * &r == *n).then_some(r)
}

fn rational_sqrt(x: &BigRational) -> Option<BigRational> {
    Some(BigRational::new(exact_sqrt(x.numer())?, exact_sqrt(x.denom())?))
}

/// Integer roots of `a p^2 + b p + c = 0` (rational coefficients).
fn integer_roots(a: &BigRational, b: &BigRational, c: &BigRational) -> Vec<BigInt> {
    let mut roots = Vec::new();
    let mut push_if_int = |r: BigRational| {
        if r.is_integer() && !roots.contains(r.numer()) {
            roots.push(r.to_integer());
        }
    };
    if a.is_zero() {
        if !b.is_zero() {
            push_if_int(-c / b);
        }
        // a = b = 0 would mean every p works; never happens for k != 0
        return roots;
    }
    let disc = b * b - BigRational::from_integer(4.into()) * a * c;
    let Some(s) = rational_sqrt(&disc) else {
        return roots;
    };
    let two_a = BigRational::from_integer(2.into()) * a;
    push_if_int((-b + &s) / &two_a);
    push_if_int((-b - &s) / &two_a);
    roots.sort();
    roots
}

/// Exact membership of `(k, lambda)`, collecting every witness.
pub fn check_pair_exact(k: i64, lambda: &BigRational, cfg: &TableConfig) -> Result<TableVerdict> {
    if k == 0 {
        return Err(Error::ZeroDegree);
    }
    let kk = BigRational::from_integer(k.into());
    let two = BigRational::from_integer(2.into());
    let mut witnesses = Vec::new();
    for row in rows(cfg).iter().filter(|r| r.applies_to(k)) {
        let candidates = match row.kind {
            RowKind::Wildcard => {
                witnesses.push(Witness {
                    row: row.index,
                    label: row.label(),
                    p: None,
                });
                continue;
            }
            RowKind::FamilyA => integer_roots(&kk, &(&kk - &two), &(-&two * lambda)),
            RowKind::FamilyB => integer_roots(&(&kk * &kk), &(&kk * &kk), &(&kk - BigRational::one() - &two * &kk * lambda)),
            RowKind::Special => {
                let [a, b, c, d] = row.params.as_ref().unwrap();
                let mut ps = Vec::new();
                if let Some(x) = rational_sqrt(&((lambda - a) / b)) {
                    for xs in [x.clone(), -x] {
                        let p = (xs - c) / d;
                        if p.is_integer() && !ps.contains(p.numer()) {
                            ps.push(p.to_integer());
                        }
                    }
                }
                ps.sort();
                ps
            }
        };
        for p in candidates {
            // back-substitution guards against false witnesses
            if row.lambda(k, &p).as_ref() == Some(lambda) {
                witnesses.push(Witness {
                    row: row.index,
                    label: row.label(),
                    p: Some(p),
                });
            }
        }
    }
    let matched = !witnesses.is_empty();
    Ok(TableVerdict {
        k,
        eigenvalue: CNum(C64::new(rational_to_f64(lambda), 0.0)),
        rational: Some(lambda.clone()),
        matched,
        witnesses,
        mode: Mode::Exact,
        obstruction: !matched,
        note: None,
    })
}

fn complex_quadratic_roots(a: C64, b: C64, c: C64) -> Vec<C64> {
    if a.norm() == 0.0 {
        return if b.norm() == 0.0 { vec![] } else { vec![-c / b] };
    }
    let s = (b * b - 4.0 * a * c).sqrt();
    vec![(-b + s) / (2.0 * a), (-b - s) / (2.0 * a)]
}

/// Rational reconstruction followed by the exact test; otherwise nearest
/// integer parameters are back-substituted numerically. Numeric-mode
/// non-matches never count as obstructions.
pub fn check_pair_numeric(k: i64, lambda: C64, cfg: &TableConfig) -> Result<TableVerdict> {
    if k == 0 {
        return Err(Error::ZeroDegree);
    }
    if let Some(r) = rationalize(lambda, cfg.tol, cfg.max_den) {
        let mut v = check_pair_exact(k, &r, cfg)?;
        v.eigenvalue = CNum(lambda);
        v.note = Some("exact check after rational reconstruction".into());
        return Ok(v);
    }
    let kf = k as f64;
    let one = C64::new(1.0, 0.0);
    let mut witnesses = Vec::new();
    let accept = cfg.tol * lambda.norm().max(1.0);
    for row in rows(cfg).iter().filter(|r| r.applies_to(k)) {
        let roots = match row.kind {
            RowKind::Wildcard => {
                witnesses.push(Witness {
                    row: row.index,
                    label: row.label(),
                    p: None,
                });
                continue;
            }
            RowKind::FamilyA => complex_quadratic_roots(one * kf, one * (kf - 2.0), -2.0 * lambda),
            RowKind::FamilyB => complex_quadratic_roots(one * kf * kf, one * kf * kf, kf - 1.0 - 2.0 * kf * lambda),
            RowKind::Special => {
                let [a, b, c, d] = row.params.as_ref().unwrap();
                let (a, b, c, d) = (rational_to_f64(a), rational_to_f64(b), rational_to_f64(c), rational_to_f64(d));
                let x = ((lambda - a) / b).sqrt();
                vec![(x - c) / d, (-x - c) / d]
            }
        };
        let mut seen: Vec<i64> = Vec::new();
        for r in roots {
            if !r.re.is_finite() || r.re.abs() > 1e15 {
                continue;
            }
            let p = r.re.round() as i64;
            if seen.contains(&p) {
                continue;
            }
            seen.push(p);
            let lp = row.lambda(k, &BigInt::from(p)).unwrap();
            if (C64::new(rational_to_f64(&lp), 0.0) - lambda).norm() <= accept {
                witnesses.push(Witness {
                    row: row.index,
                    label: row.label(),
                    p: Some(BigInt::from(p)),
                });
            }
        }
    }
    let matched = !witnesses.is_empty();
    Ok(TableVerdict {
        k,
        eigenvalue: CNum(lambda),
        rational: None,
        matched,
        witnesses,
        mode: Mode::Numeric,
        obstruction: false,
        note: (!matched).then(|| "numeric mode: a non-match is not a certificate".into()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    Obstruction,
    NoObstruction,
    HypothesesUnverified,
    NotApplicable,
}

impl CertificateKind {
    pub fn exit_code(self) -> i32 {
        match self {
            CertificateKind::Obstruction => 10,
            _ => 0,
        }
    }
}

/// Evidence gathered at one accepted Darboux point.
#[derive(Clone, Debug)]
pub struct PointEvidence {
    pub point_index: usize,
    pub diagonalizable: bool,
    pub diag_uncertain: bool,
    pub in_sigma_v: bool,
    pub degenerate: bool,
    pub verdicts: Vec<TableVerdict>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateWitness {
    pub point_index: usize,
    pub eigenvalue: CNum,
    #[serde(serialize_with = "crate::report::ser_opt_rational")]
    pub rational: Option<BigRational>,
    pub mode: Mode,
}

#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub message: String,
    pub witnesses: Vec<CertificateWitness>,
    pub reasons: Vec<String>,
}

/// Combines the verdicts at all accepted points. `k = None` means the
/// degree is not a nonzero integer and the criterion does not apply.
pub fn certify(k: Option<i64>, points: &[PointEvidence], allow_numeric: bool) -> Certificate {
    let Some(k) = k else {
        return Certificate {
            kind: CertificateKind::NotApplicable,
            message: "criterion not applicable: no nonzero integer homogeneity degree".into(),
            witnesses: vec![],
            reasons: vec![],
        };
    };
    let mut reasons = Vec::new();
    let mut witnesses = Vec::new();
    let mut unverified = false;
    for pt in points {
        if pt.in_sigma_v || pt.degenerate {
            continue;
        }
        if !pt.diagonalizable || pt.diag_uncertain {
            unverified = true;
            reasons.push(format!(
                "point {}: Hessian diagonalizability {}",
                pt.point_index,
                if pt.diagonalizable { "uncertain" } else { "fails" }
            ));
            continue;
        }
        for v in &pt.verdicts {
            if v.matched {
                continue;
            }
            let counts = v.mode == Mode::Exact || allow_numeric;
            if counts {
                witnesses.push(CertificateWitness {
                    point_index: pt.point_index,
                    eigenvalue: v.eigenvalue,
                    rational: v.rational.clone(),
                    mode: v.mode,
                });
            } else {
                unverified = true;
                reasons.push(format!(
                    "point {}: eigenvalue {} not reconstructed exactly",
                    pt.point_index,
                    crate::report::fmt_c64(v.eigenvalue.0)
                ));
            }
        }
    }
    let (kind, message) = if k == 2 || k == -2 {
        (
            CertificateKind::NoObstruction,
            format!("no obstruction found: every eigenvalue is admissible for k = {k}"),
        )
    } else if !witnesses.is_empty() {
        (
            CertificateKind::Obstruction,
            "non-integrability certificate: no complete system of meromorphic first integrals on C^n x (S \\ Sigma(V))".to_string(),
        )
    } else if unverified {
        (CertificateKind::HypothesesUnverified, "hypotheses unverified".to_string())
    } else {
        (
            CertificateKind::NoObstruction,
            "no obstruction found; integrability not excluded".to_string(),
        )
    };
    if kind != CertificateKind::Obstruction {
        witnesses.clear();
    }
    Certificate {
        kind,
        message,
        witnesses,
        reasons,
    }
}
