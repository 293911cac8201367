//! Differentiation along the variety.
//!
//! On `S` the extension variables are implicit functions of `q` away from
//! the critical set, with
//!
//! ```text
//! dw/dq = -J^{-1} dG/dq,      J = dG/dw
//! ```
//!
//! so the derivative of `f(q, w)` along `S` is
//! `df/dq_k = d_k f + sum_i d_{w_i} f * (dw_i/dq_k)`. The inverse is taken
//! symbolically through the adjugate for small `s`; for larger systems the
//! same quantities are evaluated per point by linear solves.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{RatExpr, Tape};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::poly::Poly;
use crate::setup::AlgebraicSetup;
use crate::variety::{adjugate, jacobian, JacobianData, VarietyPoint, SYMBOLIC_MAX_S};

/// `dwdq[i][k] = dw_i/dq_k` as exact expressions with `detJ` denominators.
#[derive(Clone, Debug)]
pub struct DerivationTable {
    n: usize,
    pub dwdq: Vec<Vec<RatExpr>>,
}

impl DerivationTable {
    pub fn new(jd: &JacobianData) -> Result<Self> {
        let (n, s) = (jd.n(), jd.s());
        if s == 0 {
            return Ok(DerivationTable { n, dwdq: Vec::new() });
        }
        let inv_det = jd.det.recip()?;
        let adj = match &jd.adj {
            Some(a) => a.clone(),
            None => adjugate(&jd.j),
        };
        let dwdq = (0..s)
            .map(|i| {
                (0..n)
                    .map(|k| {
                        let num = RatExpr::add_all((0..s).map(|j| &adj[i][j] * &jd.dgdq[j][k]));
                        -(&num * &inv_det)
                    })
                    .collect()
            })
            .collect();
        Ok(DerivationTable { n, dwdq })
    }

    /// `df/dq_k` along the variety (`k` is 0-based).
    pub fn derive_q(&self, f: &RatExpr, k: usize) -> RatExpr {
        let mut terms = vec![f.diff(k)];
        for (i, row) in self.dwdq.iter().enumerate() {
            let dfw = f.diff(self.n + i);
            if !dfw.is_zero() {
                terms.push(&dfw * &row[k]);
            }
        }
        RatExpr::add_all(terms)
    }
}

pub fn derive_q(f: &RatExpr, jd: &JacobianData, k: usize) -> Result<RatExpr> {
    Ok(DerivationTable::new(jd)?.derive_q(f, k))
}

pub fn grad_q(v: &RatExpr, jd: &JacobianData) -> Result<Vec<RatExpr>> {
    let table = DerivationTable::new(jd)?;
    Ok((0..jd.n()).map(|k| table.derive_q(v, k)).collect())
}

/// Entry `(i, j)` is `d/dq_i (d/dq_j V)`.
pub fn hess_q(v: &RatExpr, jd: &JacobianData) -> Result<Vec<Vec<RatExpr>>> {
    let table = DerivationTable::new(jd)?;
    let grad: Vec<RatExpr> = (0..jd.n()).map(|k| table.derive_q(v, k)).collect();
    Ok((0..jd.n())
        .map(|i| grad.iter().map(|g| table.derive_q(g, i)).collect())
        .collect())
}

/// Membership in `Sigma(V)`: `p` in `Sigma(I)`, or a denominator of the
/// potential's normal form vanishes at `p`.
pub fn in_sigma_v(v: &RatExpr, jd: &JacobianData, p: &VarietyPoint, tol: f64) -> bool {
    if p.critical_value <= tol {
        return true;
    }
    v.denominators()
        .iter()
        .any(|d| d.eval(&p.coords).map_or(true, |z| z.norm() <= tol))
        || jd.det_at(&p.coords).is_err()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Symbolic,
    Numeric,
}

#[derive(Clone, Debug)]
enum RouteData {
    Symbolic {
        table: DerivationTable,
        grad: Vec<RatExpr>,
        hess: Vec<Vec<RatExpr>>,
        grad_tape: Tape,
        hess_tape: Tape,
        dwdq_tape: Tape,
        /// Ambient partials `d grad_i / d x_j`, row-major `n x (n+s)`.
        grad_partials: Tape,
    },
    Numeric {
        v_grad: Tape,
        v_hess: Tape,
        g_hess: Tape,
    },
}

/// Gradient, Hessian and implicit derivatives of a potential on its
/// variety, ready for repeated numeric evaluation.
#[derive(Clone, Debug)]
pub struct Calculus {
    pub setup: AlgebraicSetup,
    pub jd: JacobianData,
    route: RouteData,
    potential: Tape,
    denominators: Tape,
}

impl Calculus {
    pub fn new(setup: &AlgebraicSetup) -> Result<Self> {
        let route = if setup.s() <= SYMBOLIC_MAX_S {
            Route::Symbolic
        } else {
            Route::Numeric
        };
        Self::with_route(setup, route)
    }

    pub fn with_route(setup: &AlgebraicSetup, route: Route) -> Result<Self> {
        let jd = jacobian(setup);
        let (n, s) = (setup.n(), setup.s());
        let dim = n + s;
        let v = &setup.potential;
        let route = match route {
            Route::Symbolic => {
                let table = DerivationTable::new(&jd)?;
                let grad: Vec<RatExpr> = (0..n).map(|k| table.derive_q(v, k)).collect();
                let hess: Vec<Vec<RatExpr>> = (0..n)
                    .map(|i| grad.iter().map(|g| table.derive_q(g, i)).collect())
                    .collect();
                let partials: Vec<RatExpr> = grad.iter().flat_map(|g| (0..dim).map(move |j| g.diff(j))).collect();
                RouteData::Symbolic {
                    grad_tape: Tape::compile(&grad),
                    hess_tape: Tape::compile(&hess.concat()),
                    dwdq_tape: Tape::compile(&table.dwdq.concat()),
                    grad_partials: Tape::compile(&partials),
                    table,
                    grad,
                    hess,
                }
            }
            Route::Numeric => {
                if s > 0 && jd.det.is_zero() {
                    return Err(crate::error::ExprError::ZeroDenominator.into());
                }
                let v_grad: Vec<RatExpr> = (0..dim).map(|j| v.diff(j)).collect();
                let v_hess: Vec<RatExpr> = v_grad.iter().flat_map(|g| (0..dim).map(move |j| g.diff(j))).collect();
                let g_hess: Vec<RatExpr> = setup
                    .generators
                    .iter()
                    .flat_map(|g| {
                        (0..dim).flat_map(move |a| {
                            let ga = g.diff(a);
                            (0..dim).map(move |b| ga.diff(b))
                        })
                    })
                    .collect();
                RouteData::Numeric {
                    v_grad: Tape::compile(&v_grad),
                    v_hess: Tape::compile(&v_hess),
                    g_hess: Tape::compile(&g_hess),
                }
            }
        };
        Ok(Calculus {
            setup: setup.clone(),
            potential: Tape::compile(std::slice::from_ref(v)),
            denominators: Tape::compile(&v.denominators()),
            jd,
            route,
        })
    }

    pub fn route(&self) -> Route {
        match self.route {
            RouteData::Symbolic { .. } => Route::Symbolic,
            RouteData::Numeric { .. } => Route::Numeric,
        }
    }

    pub fn n(&self) -> usize {
        self.setup.n()
    }

    pub fn s(&self) -> usize {
        self.setup.s()
    }

    pub fn dim(&self) -> usize {
        self.setup.dim()
    }

    pub fn derivation_table(&self) -> Option<&DerivationTable> {
        match &self.route {
            RouteData::Symbolic { table, .. } => Some(table),
            RouteData::Numeric { .. } => None,
        }
    }

    pub fn grad_exprs(&self) -> Option<&[RatExpr]> {
        match &self.route {
            RouteData::Symbolic { grad, .. } => Some(grad),
            RouteData::Numeric { .. } => None,
        }
    }

    pub fn hess_exprs(&self) -> Option<&[Vec<RatExpr>]> {
        match &self.route {
            RouteData::Symbolic { hess, .. } => Some(hess),
            RouteData::Numeric { .. } => None,
        }
    }

    fn names(&self) -> &[String] {
        self.setup.names()
    }

    pub fn potential_at(&self, x: &[C64]) -> Result<C64> {
        Ok(self.potential.eval_named(x, self.names())?[0])
    }

    /// Smallest modulus among `detJ` and the potential's denominators.
    pub fn singular_margin(&self, x: &[C64]) -> f64 {
        let det = self.jd.det_at(x).map_or(0.0, |d| d.norm());
        let den = self
            .denominators
            .eval(x)
            .map_or(0.0, |v| v.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min));
        det.min(den)
    }

    pub fn in_sigma_v(&self, p: &VarietyPoint, tol: f64) -> bool {
        p.critical_value <= tol
            || self
                .denominators
                .eval(&p.coords)
                .map_or(true, |v| v.iter().any(|z| z.norm() <= tol))
    }

    fn numeric_implicit(&self, x: &[C64]) -> Result<(CMatrix, CMatrix)> {
        let (n, s) = (self.n(), self.s());
        let gw = self.jd.j_at(x)?;
        let gq = self.jd.dgdq_at(x)?;
        let lu = gw.clone().lu();
        let wq = lu.solve(&(-gq)).filter(|m| m.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        match wq {
            Some(wq) if s > 0 => Ok((gw, wq)),
            _ if s == 0 => Ok((gw, CMatrix::zeros(0, n))),
            _ => Err(Error::CriticalSet {
                detj: self.jd.det_at(x).map_or(0.0, |d| d.norm()),
            }),
        }
    }

    /// `dw/dq` at `x`, an `s x n` matrix.
    pub fn dwdq_at(&self, x: &[C64]) -> Result<CMatrix> {
        match &self.route {
            RouteData::Symbolic { dwdq_tape, .. } => {
                let v = dwdq_tape.eval_named(x, self.names())?;
                Ok(CMatrix::from_row_slice(self.s(), self.n(), &v))
            }
            RouteData::Numeric { .. } => Ok(self.numeric_implicit(x)?.1),
        }
    }

    pub fn grad_at(&self, x: &[C64]) -> Result<Vec<C64>> {
        match &self.route {
            RouteData::Symbolic { grad_tape, .. } => Ok(grad_tape.eval_named(x, self.names())?),
            RouteData::Numeric { v_grad, .. } => {
                let n = self.n();
                let (_, wq) = self.numeric_implicit(x)?;
                let g = v_grad.eval_named(x, self.names())?;
                let vw = CVector::from_column_slice(&g[n..]);
                let total = wq.transpose() * vw;
                Ok((0..n).map(|k| g[k] + total[k]).collect())
            }
        }
    }

    pub fn hess_at(&self, x: &[C64]) -> Result<CMatrix> {
        let n = self.n();
        match &self.route {
            RouteData::Symbolic { hess_tape, .. } => {
                let v = hess_tape.eval_named(x, self.names())?;
                Ok(CMatrix::from_row_slice(n, n, &v))
            }
            RouteData::Numeric { v_grad, v_hess, g_hess } => {
                let (s, dim) = (self.s(), self.dim());
                let (gw, wq) = self.numeric_implicit(x)?;
                let g = v_grad.eval_named(x, self.names())?;
                let vw = CVector::from_column_slice(&g[n..]);
                // multipliers: gw^T mu = V_w
                let mu = if s > 0 {
                    linalg::solve(&gw.transpose(), &vw).ok_or(Error::CriticalSet {
                        detj: self.jd.det_at(x).map_or(0.0, |d| d.norm()),
                    })?
                } else {
                    CVector::zeros(0)
                };
                let vh = v_hess.eval_named(x, self.names())?;
                let gh = g_hess.eval_named(x, self.names())?;
                let mut m = CMatrix::from_row_slice(dim, dim, &vh);
                for a in 0..s {
                    let block = CMatrix::from_row_slice(dim, dim, &gh[a * dim * dim..(a + 1) * dim * dim]);
                    m -= block * mu[a];
                }
                let mut t = CMatrix::zeros(dim, n);
                for k in 0..n {
                    t[(k, k)] = C64::one();
                }
                t.view_mut((n, 0), (s, n)).copy_from(&wq);
                Ok(t.transpose() * m * t)
            }
        }
    }

    /// Ambient partial derivatives of the gradient field, `n x (n+s)`.
    /// Exact on the symbolic route, central differences otherwise.
    pub fn grad_jacobian_at(&self, x: &[C64]) -> Result<CMatrix> {
        let (n, dim) = (self.n(), self.dim());
        match &self.route {
            RouteData::Symbolic { grad_partials, .. } => {
                let v = grad_partials.eval_named(x, self.names())?;
                Ok(CMatrix::from_row_slice(n, dim, &v))
            }
            RouteData::Numeric { .. } => {
                let mut out = CMatrix::zeros(n, dim);
                let mut xp = x.to_vec();
                for j in 0..dim {
                    let h = 1e-6 * (1.0 + x[j].norm());
                    xp[j] = x[j] + h;
                    let fp = self.grad_at(&xp)?;
                    xp[j] = x[j] - h;
                    let fm = self.grad_at(&xp)?;
                    xp[j] = x[j];
                    for i in 0..n {
                        out[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
                    }
                }
                Ok(out)
            }
        }
    }
}


// ---------------------------------------------------------------------------
// Weighted homogeneity

/// Weights with `V(a^d1 q, a^k1 w1, ...) = a^d2 V(q, w)` on `S`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Homogeneity {
    pub d1: i64,
    pub d2: i64,
    pub kw: Vec<i64>,
    #[serde(serialize_with = "crate::report::ser_rational")]
    pub degree: BigRational,
}

impl Homogeneity {
    pub fn integer_degree(&self) -> Option<i64> {
        self.degree.is_integer().then(|| self.degree.to_integer().to_i64()).flatten()
    }

    /// The scaled point `(a^d1 q, a^k1 w1, ..., a^ks ws)`.
    pub fn scale_point(&self, x: &[C64], alpha: C64, n: usize) -> Vec<C64> {
        x.iter()
            .enumerate()
            .map(|(i, z)| {
                let e = if i < n { self.d1 } else { self.kw[i - n] };
                z * crate::expr::complex_powi(alpha, e).unwrap_or(C64::new(f64::NAN, f64::NAN))
            })
            .collect()
    }
}

fn weighted_row(a: &[u32], b: &[u32], n: usize) -> Vec<BigRational> {
    let s = a.len() - n;
    let mut row = Vec::with_capacity(s + 2);
    let qa: i64 = a[..n].iter().map(|&e| e as i64).sum();
    let qb: i64 = b[..n].iter().map(|&e| e as i64).sum();
    row.push(BigRational::from_integer((qa - qb).into()));
    for j in 0..s {
        row.push(BigRational::from_integer((a[n + j] as i64 - b[n + j] as i64).into()));
    }
    row.push(BigRational::zero());
    row
}

/// Basis of the rational nullspace of `rows` (each of length `ncols`).
pub fn nullspace(rows: &[Vec<BigRational>], ncols: usize) -> Vec<Vec<BigRational>> {
    let mut m: Vec<Vec<BigRational>> = rows.iter().filter(|r| r.iter().any(|x| !x.is_zero())).cloned().collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..ncols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][col].recip();
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..m.len() {
            if i != r && !m[i][col].is_zero() {
                let f = m[i][col].clone();
                for c2 in 0..ncols {
                    let delta = &f * &m[r][c2];
                    m[i][c2] -= delta;
                }
            }
        }
        pivots.push(col);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    (0..ncols)
        .filter(|c| !pivots.contains(c))
        .map(|free| {
            let mut v = vec![BigRational::zero(); ncols];
            v[free] = BigRational::one();
            for (i, &pc) in pivots.iter().enumerate() {
                v[pc] = -m[i][free].clone();
            }
            v
        })
        .collect()
}

fn to_coprime_integers(v: &[BigRational]) -> Vec<BigInt> {
    let lcm = v.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<BigInt> = v.iter().map(|x| (x * BigRational::from_integer(lcm.clone())).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    if g.is_zero() {
        return ints;
    }
    ints.into_iter().map(|x| x / &g).collect()
}

/// Exact weight solve (no numeric verification).
pub fn homogeneity_weights(setup: &AlgebraicSetup) -> Result<Homogeneity> {
    let (n, s) = (setup.n(), setup.s());
    let nvars = n + s;
    let ncols = s + 2;
    let mut rows: Vec<Vec<BigRational>> = Vec::new();
    let consecutive = |p: &Poly, rows: &mut Vec<Vec<BigRational>>| {
        let monos: Vec<&[u32]> = p.terms().map(|(e, _)| e).collect();
        for pair in monos.windows(2) {
            rows.push(weighted_row(pair[0], pair[1], n));
        }
    };
    for g in &setup.generators {
        let (num, _) = g.to_fraction(nvars);
        if num.is_zero() {
            return Err(Error::NotHomogeneous("a generator vanishes identically".into()));
        }
        consecutive(&num, &mut rows);
    }
    let (num, den) = setup.potential.to_fraction(nvars);
    if num.is_zero() {
        return Err(Error::NotHomogeneous("the potential vanishes identically; its degree is undefined".into()));
    }
    consecutive(&num, &mut rows);
    consecutive(&den, &mut rows);
    let n0 = num.terms().next().unwrap().0;
    let d0 = den.terms().next().unwrap().0;
    let mut link = weighted_row(n0, d0, n);
    link[s + 1] = -BigRational::one();
    rows.push(link);

    let basis = nullspace(&rows, ncols);
    match basis.len() {
        0 => Err(Error::NotHomogeneous("no nonzero weights exist".into())),
        1 => {
            let mut ints = to_coprime_integers(&basis[0]);
            if ints[0].is_zero() {
                return Err(Error::NotHomogeneous("the only weights have d1 = 0".into()));
            }
            if ints[0].is_negative() {
                ints.iter_mut().for_each(|x| *x = -x.clone());
            }
            let conv = |x: &BigInt| x.to_i64().ok_or_else(|| Error::NotHomogeneous("weights overflow".into()));
            let d1 = conv(&ints[0])?;
            let d2 = conv(&ints[s + 1])?;
            let kw = ints[1..=s].iter().map(conv).collect::<Result<Vec<_>>>()?;
            Ok(Homogeneity {
                d1,
                d2,
                kw,
                degree: BigRational::new(d2.into(), d1.into()),
            })
        }
        dim => Err(Error::NotHomogeneous(format!(
            "weights are not unique ({dim}-dimensional solution space)"
        ))),
    }
}

fn poly_eval(p: &Poly, x: &[C64]) -> (C64, f64) {
    let mut value = C64::default();
    let mut magnitude = 0.0;
    for (e, c) in p.terms() {
        let mut m = C64::new(crate::expr::rational_to_f64(c), 0.0);
        for (xi, &k) in x.iter().zip(e) {
            m *= xi.powu(k);
        }
        value += m;
        magnitude += m.norm();
    }
    (value, magnitude)
}

/// Checks the scaling identity at random on-variety points.
pub fn verify_homogeneity(setup: &AlgebraicSetup, jd: &JacobianData, h: &Homogeneity, samples: usize, seed: u64) -> Result<()> {
    let (n, nvars) = (setup.n(), setup.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gens: Vec<Poly> = setup.generators.iter().map(|g| g.to_fraction(nvars).0).collect();
    let mut checked = 0;
    for _ in 0..samples * 20 {
        if checked == samples {
            break;
        }
        let Some(x) = jd.sample_point(&mut rng, 1.0, 10) else {
            continue;
        };
        let alpha = C64::from_polar(rng.gen_range(0.7..1.3), rng.gen_range(0.0..std::f64::consts::TAU));
        let y = h.scale_point(&x, alpha, n);
        let Ok(vx) = setup.potential.eval(&x) else { continue };
        let Ok(vy) = setup.potential.eval(&y) else { continue };
        for (i, g) in gens.iter().enumerate() {
            let (val, mag) = poly_eval(g, &y);
            if val.norm() > 1e-9 * (1.0 + mag) {
                return Err(Error::HomogeneityVerification(format!(
                    "scaled point leaves the variety (generator {}: |G| = {:.3e})",
                    setup.w_names[i],
                    val.norm()
                )));
            }
        }
        let expected = vx * crate::expr::complex_powi(alpha, h.d2).unwrap();
        if (vy - expected).norm() > 1e-9 * (1.0 + expected.norm()) {
            return Err(Error::HomogeneityVerification(format!(
                "V(scaled) = {vy} but a^d2 V = {expected}"
            )));
        }
        checked += 1;
    }
    if checked == 0 {
        return Err(Error::HomogeneityVerification("no usable sample points".into()));
    }
    Ok(())
}

/// Exact weight solve followed by numeric verification on 5 random points.
pub fn detect_homogeneity(setup: &AlgebraicSetup, jd: &JacobianData, seed: u64) -> Result<Homogeneity> {
    let h = homogeneity_weights(setup)?;
    verify_homogeneity(setup, jd, &h, 5, seed)?;
    Ok(h)
}

/// Numeric Hessian symmetry defect `max |H - H^T|`.
pub fn asymmetry(h: &CMatrix) -> f64 {
    let t: DMatrix<C64> = h.transpose();
    linalg::matrix_inf_norm(&(h - t))
}
