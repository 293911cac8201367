//! Exact multivariate rational expressions.
//!
//! A [`RatExpr`] is an immutable, reference-counted tree whose leaves are
//! rational literals and variable indices. Every value is kept in a normal
//! form by the smart constructors:
//!
//! * sums are flattened, constants merged and identical terms collected
//!   with rational coefficients;
//! * products are flattened, numeric factors merged and identical bases
//!   collected by adding integer exponents;
//! * powers only wrap variables or sums, with exponents outside `{0, 1}`;
//! * a sum used as a factor has a positive leading coefficient (the sign
//!   is moved into the product's coefficient).
//!
//! Quotients are products with negative exponents. No expansion, GCD or
//! factorization is attempted.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{EvalError, ExprError};
use crate::poly::Poly;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Num(BigRational),
    Var(usize),
    Add(Vec<RatExpr>),
    Mul(Vec<RatExpr>),
    Pow(RatExpr, i64),
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RatExpr(Arc<Node>);

impl fmt::Debug for RatExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl RatExpr {
    fn raw(node: Node) -> Self {
        RatExpr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn num(value: BigRational) -> Self {
        Self::raw(Node::Num(value))
    }

    pub fn int(value: i64) -> Self {
        Self::num(BigRational::from_integer(BigInt::from(value)))
    }

    pub fn zero() -> Self {
        Self::int(0)
    }

    pub fn one() -> Self {
        Self::int(1)
    }

    pub fn var(index: usize) -> Self {
        Self::raw(Node::Var(index))
    }

    pub fn as_num(&self) -> Option<&BigRational> {
        match self.node() {
            Node::Num(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_num().is_some_and(Zero::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.as_num().is_some_and(One::is_one)
    }

    /// Pointer identity, used for sharing-aware compilation.
    fn ptr(&self) -> *const Node {
        Arc::as_ptr(&self.0)
    }

    /// Splits a term into its rational coefficient and the remaining key.
    fn split_coeff(&self) -> (BigRational, Option<RatExpr>) {
        match self.node() {
            Node::Num(c) => (c.clone(), None),
            Node::Mul(fs) => match fs[0].node() {
                Node::Num(c) => {
                    let rest = if fs.len() == 2 {
                        fs[1].clone()
                    } else {
                        Self::raw(Node::Mul(fs[1..].to_vec()))
                    };
                    (c.clone(), Some(rest))
                }
                _ => (BigRational::one(), Some(self.clone())),
            },
            _ => (BigRational::one(), Some(self.clone())),
        }
    }

    /// Leading coefficient of a sum, or the coefficient of a single term.
    fn leading_coeff(&self) -> BigRational {
        match self.node() {
            Node::Add(ts) => ts[0].split_coeff().0,
            _ => self.split_coeff().0,
        }
    }

    fn scale_key(key: RatExpr, c: BigRational) -> RatExpr {
        if c.is_one() {
            return key;
        }
        match key.node() {
            Node::Mul(fs) => {
                let mut v = Vec::with_capacity(fs.len() + 1);
                v.push(Self::num(c));
                v.extend(fs.iter().cloned());
                Self::raw(Node::Mul(v))
            }
            _ => Self::raw(Node::Mul(vec![Self::num(c), key])),
        }
    }

    pub fn add_all<I: IntoIterator<Item = RatExpr>>(terms: I) -> RatExpr {
        let mut constant = BigRational::zero();
        let mut collected: BTreeMap<RatExpr, BigRational> = BTreeMap::new();
        let mut stack: Vec<RatExpr> = terms.into_iter().collect();
        stack.reverse();
        while let Some(t) = stack.pop() {
            if let Node::Add(ts) = t.node() {
                stack.extend(ts.iter().rev().cloned());
                continue;
            }
            match t.split_coeff() {
                (c, None) => constant += c,
                (c, Some(key)) => {
                    *collected.entry(key).or_insert_with(BigRational::zero) += c;
                }
            }
        }
        let mut out = Vec::new();
        let mut renest = false;
        if !constant.is_zero() {
            out.push(Self::num(constant));
        }
        for (key, c) in collected {
            if c.is_zero() {
                continue;
            }
            let term = Self::scale_key(key, c);
            renest |= matches!(term.node(), Node::Add(_));
            out.push(term);
        }
        if renest {
            return Self::add_all(out);
        }
        match out.len() {
            0 => Self::zero(),
            1 => out.pop().unwrap(),
            _ => Self::raw(Node::Add(out)),
        }
    }

    pub fn mul_all<I: IntoIterator<Item = RatExpr>>(factors: I) -> RatExpr {
        let mut coeff = BigRational::one();
        let mut bases: BTreeMap<RatExpr, i64> = BTreeMap::new();
        let mut stack: Vec<RatExpr> = factors.into_iter().collect();
        while let Some(f) = stack.pop() {
            match f.node() {
                Node::Num(c) => coeff *= c,
                Node::Mul(fs) => stack.extend(fs.iter().cloned()),
                Node::Pow(b, e) => *bases.entry(b.clone()).or_insert(0) += *e,
                Node::Add(_) => {
                    if f.leading_coeff().is_negative() {
                        coeff = -coeff;
                        *bases.entry(-&f).or_insert(0) += 1;
                    } else {
                        *bases.entry(f.clone()).or_insert(0) += 1;
                    }
                }
                Node::Var(_) => *bases.entry(f.clone()).or_insert(0) += 1,
            }
        }
        if coeff.is_zero() {
            return Self::zero();
        }
        let mut out = Vec::new();
        if !coeff.is_one() {
            out.push(Self::num(coeff));
        }
        for (b, e) in bases {
            match e {
                0 => {}
                1 => out.push(b),
                _ => out.push(Self::raw(Node::Pow(b, e))),
            }
        }
        match out.len() {
            0 => Self::one(),
            1 => out.pop().unwrap(),
            _ => Self::raw(Node::Mul(out)),
        }
    }

    /// Integer power. Fails on a negative power of the zero expression.
    pub fn pow(&self, e: i64) -> Result<RatExpr, ExprError> {
        if e == 0 {
            return Ok(Self::one());
        }
        if e == 1 {
            return Ok(self.clone());
        }
        match self.node() {
            Node::Num(c) => {
                if c.is_zero() {
                    return if e < 0 {
                        Err(ExprError::ZeroDenominator)
                    } else {
                        Ok(Self::zero())
                    };
                }
                let e32 = i32::try_from(e).map_err(|_| ExprError::ExponentOverflow)?;
                Ok(Self::num(num_traits::Pow::pow(c, e32)))
            }
            Node::Var(_) => Ok(Self::raw(Node::Pow(self.clone(), e))),
            Node::Add(_) => {
                if self.leading_coeff().is_negative() {
                    let base = Self::raw(Node::Pow(-self, e));
                    Ok(if e % 2 == 0 { base } else { -&base })
                } else {
                    Ok(Self::raw(Node::Pow(self.clone(), e)))
                }
            }
            Node::Mul(fs) => {
                let parts = fs.iter().map(|f| f.pow(e)).collect::<Result<Vec<_>, _>>()?;
                Ok(Self::mul_all(parts))
            }
            Node::Pow(b, e2) => {
                let total = e2.checked_mul(e).ok_or(ExprError::ExponentOverflow)?;
                b.pow(total)
            }
        }
    }

    pub fn recip(&self) -> Result<RatExpr, ExprError> {
        self.pow(-1)
    }

    pub fn checked_div(&self, other: &RatExpr) -> Result<RatExpr, ExprError> {
        Ok(self * &other.recip()?)
    }

    /// Partial derivative with respect to variable `var`.
    pub fn diff(&self, var: usize) -> RatExpr {
        match self.node() {
            Node::Num(_) => Self::zero(),
            Node::Var(j) => {
                if *j == var {
                    Self::one()
                } else {
                    Self::zero()
                }
            }
            Node::Add(ts) => Self::add_all(ts.iter().map(|t| t.diff(var))),
            Node::Mul(fs) => {
                let mut terms = Vec::new();
                for (i, f) in fs.iter().enumerate() {
                    let d = f.diff(var);
                    if d.is_zero() {
                        continue;
                    }
                    let mut prod: Vec<RatExpr> = Vec::with_capacity(fs.len());
                    prod.extend(fs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, g)| g.clone()));
                    prod.push(d);
                    terms.push(Self::mul_all(prod));
                }
                Self::add_all(terms)
            }
            Node::Pow(b, e) => {
                let db = b.diff(var);
                if db.is_zero() {
                    return Self::zero();
                }
                // bases are never the zero expression
                let lowered = b.pow(e - 1).expect("power of a nonzero base");
                Self::mul_all([Self::int(*e), lowered, db])
            }
        }
    }

    pub fn depends_on(&self, var: usize) -> bool {
        match self.node() {
            Node::Num(_) => false,
            Node::Var(j) => *j == var,
            Node::Add(xs) | Node::Mul(xs) => xs.iter().any(|x| x.depends_on(var)),
            Node::Pow(b, _) => b.depends_on(var),
        }
    }

    /// True if no negative exponent appears anywhere in the tree.
    pub fn is_polynomial(&self) -> bool {
        match self.node() {
            Node::Num(_) | Node::Var(_) => true,
            Node::Add(xs) | Node::Mul(xs) => xs.iter().all(RatExpr::is_polynomial),
            Node::Pow(b, e) => *e > 0 && b.is_polynomial(),
        }
    }

    /// Bases raised to negative powers, i.e. the denominators of the
    /// normal form (collected recursively, deduplicated).
    pub fn denominators(&self) -> Vec<RatExpr> {
        let mut out = Vec::new();
        self.collect_denominators(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_denominators(&self, out: &mut Vec<RatExpr>) {
        match self.node() {
            Node::Num(_) | Node::Var(_) => {}
            Node::Add(xs) | Node::Mul(xs) => xs.iter().for_each(|x| x.collect_denominators(out)),
            Node::Pow(b, e) => {
                if *e < 0 {
                    out.push(b.clone());
                }
                b.collect_denominators(out);
            }
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self.node() {
            Node::Num(_) => None,
            Node::Var(j) => Some(*j),
            Node::Add(xs) | Node::Mul(xs) => xs.iter().filter_map(RatExpr::max_var).max(),
            Node::Pow(b, _) => b.max_var(),
        }
    }

    pub fn node_count(&self) -> usize {
        match self.node() {
            Node::Num(_) | Node::Var(_) => 1,
            Node::Add(xs) | Node::Mul(xs) => 1 + xs.iter().map(RatExpr::node_count).sum::<usize>(),
            Node::Pow(b, _) => 1 + b.node_count(),
        }
    }

    /// Replaces variable `i` by `subs[i]`.
    pub fn substitute(&self, subs: &[RatExpr]) -> Result<RatExpr, ExprError> {
        Ok(match self.node() {
            Node::Num(_) => self.clone(),
            Node::Var(j) => subs[*j].clone(),
            Node::Add(xs) => Self::add_all(xs.iter().map(|x| x.substitute(subs)).collect::<Result<Vec<_>, _>>()?),
            Node::Mul(xs) => Self::mul_all(xs.iter().map(|x| x.substitute(subs)).collect::<Result<Vec<_>, _>>()?),
            Node::Pow(b, e) => b.substitute(subs)?.pow(*e)?,
        })
    }

    /// Numeric evaluation in double-precision complex arithmetic.
    pub fn eval(&self, point: &[Complex64]) -> Result<Complex64, EvalError> {
        match self.node() {
            Node::Num(c) => Ok(rational_to_f64(c).into()),
            Node::Var(j) => point.get(*j).copied().ok_or(EvalError::Dimension {
                expected: j + 1,
                got: point.len(),
            }),
            Node::Add(xs) => {
                let mut acc = Complex64::zero();
                for x in xs {
                    acc += x.eval(point)?;
                }
                Ok(acc)
            }
            Node::Mul(xs) => {
                let mut acc = Complex64::one();
                for x in xs {
                    acc *= x.eval(point)?;
                }
                Ok(acc)
            }
            Node::Pow(b, e) => {
                let v = b.eval(point)?;
                complex_powi(v, *e).ok_or_else(|| EvalError::Pole {
                    subexpr: b.to_string(),
                })
            }
        }
    }

    /// Brings the expression to a single fraction `N/D` of expanded
    /// polynomials in `nvars` variables.
    pub fn to_fraction(&self, nvars: usize) -> (Poly, Poly) {
        match self.node() {
            Node::Num(c) => (Poly::constant(nvars, c.clone()), Poly::one(nvars)),
            Node::Var(j) => (Poly::var(nvars, *j), Poly::one(nvars)),
            Node::Add(xs) => {
                let mut it = xs.iter().map(|x| x.to_fraction(nvars));
                let (mut num, mut den) = it.next().unwrap();
                for (n2, d2) in it {
                    if d2 == den {
                        num = &num + &n2;
                    } else {
                        num = &(&num * &d2) + &(&n2 * &den);
                        den = &den * &d2;
                    }
                }
                (num, den)
            }
            Node::Mul(xs) => {
                let mut num = Poly::one(nvars);
                let mut den = Poly::one(nvars);
                for x in xs {
                    let (n2, d2) = x.to_fraction(nvars);
                    num = &num * &n2;
                    den = &den * &d2;
                }
                (num, den)
            }
            Node::Pow(b, e) => {
                let (n, d) = b.to_fraction(nvars);
                let m = e.unsigned_abs() as u32;
                if *e > 0 {
                    (n.pow(m), d.pow(m))
                } else {
                    (d.pow(m), n.pow(m))
                }
            }
        }
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> Display<'a> {
        Display {
            expr: self,
            names: Some(names),
        }
    }
}

pub fn rational_to_f64(c: &BigRational) -> f64 {
    c.to_f64().unwrap_or_else(|| {
        let n = c.numer().to_f64().unwrap_or(f64::NAN);
        let d = c.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// `v^e`, or `None` when `e < 0` and `v` is zero.
pub fn complex_powi(v: Complex64, e: i64) -> Option<Complex64> {
    if e < 0 && v.norm_sqr() == 0.0 {
        return None;
    }
    let mut base = if e < 0 { v.inv() } else { v };
    let mut n = e.unsigned_abs();
    let mut acc = Complex64::one();
    while n > 0 {
        if n & 1 == 1 {
            acc *= base;
        }
        base *= base;
        n >>= 1;
    }
    Some(acc)
}

impl std::ops::Add for &RatExpr {
    type Output = RatExpr;
    fn add(self, rhs: &RatExpr) -> RatExpr {
        RatExpr::add_all([self.clone(), rhs.clone()])
    }
}

impl std::ops::Sub for &RatExpr {
    type Output = RatExpr;
    fn sub(self, rhs: &RatExpr) -> RatExpr {
        RatExpr::add_all([self.clone(), -rhs])
    }
}

impl std::ops::Mul for &RatExpr {
    type Output = RatExpr;
    fn mul(self, rhs: &RatExpr) -> RatExpr {
        RatExpr::mul_all([self.clone(), rhs.clone()])
    }
}

impl std::ops::Neg for &RatExpr {
    type Output = RatExpr;
    fn neg(self) -> RatExpr {
        match self.node() {
            Node::Num(c) => RatExpr::num(-c),
            Node::Add(ts) => RatExpr::add_all(ts.iter().map(|t| -t)),
            _ => RatExpr::mul_all([RatExpr::int(-1), self.clone()]),
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl std::ops::$tr for RatExpr {
            type Output = RatExpr;
            fn $m(self, rhs: RatExpr) -> RatExpr {
                std::ops::$tr::$m(&self, &rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl std::ops::Neg for RatExpr {
    type Output = RatExpr;
    fn neg(self) -> RatExpr {
        -&self
    }
}

// ---------------------------------------------------------------------------
// Printing

pub struct Display<'a> {
    expr: &'a RatExpr,
    names: Option<&'a [String]>,
}

impl fmt::Display for RatExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Display {
            expr: self,
            names: None,
        }
        .fmt(f)
    }
}

impl fmt::Display for Display<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_expr(self.expr, self.names, &mut s);
        f.write_str(&s)
    }
}

fn var_name(j: usize, names: Option<&[String]>) -> String {
    match names.and_then(|n| n.get(j)) {
        Some(name) => name.clone(),
        None => format!("x{j}"),
    }
}

fn write_rational(c: &BigRational, out: &mut String) {
    if c.is_integer() {
        out.push_str(&c.numer().to_string());
    } else {
        out.push_str(&format!("{}/{}", c.numer(), c.denom()));
    }
}

/// Writes a factor that must bind tighter than `*` and `/`.
fn write_atom(base: &RatExpr, names: Option<&[String]>, out: &mut String) {
    match base.node() {
        Node::Var(j) => out.push_str(&var_name(*j, names)),
        _ => {
            out.push('(');
            write_expr(base, names, out);
            out.push(')');
        }
    }
}

fn write_power(base: &RatExpr, e: u64, names: Option<&[String]>, out: &mut String) {
    write_atom(base, names, out);
    if e != 1 {
        out.push_str(&format!("^{e}"));
    }
}

/// Writes `|coeff| * Π factors` as `num/den`; the sign is handled by the caller.
fn write_product(coeff: &BigRational, factors: &[RatExpr], names: Option<&[String]>, out: &mut String) {
    let mut num: Vec<String> = Vec::new();
    let mut den: Vec<String> = Vec::new();
    let abs = coeff.abs();
    if !abs.numer().is_one() {
        num.push(abs.numer().to_string());
    }
    if !abs.denom().is_one() {
        den.push(abs.denom().to_string());
    }
    for f in factors {
        let (b, e) = match f.node() {
            Node::Pow(b, e) => (b, *e),
            _ => (f, 1),
        };
        let mut s = String::new();
        write_power(b, e.unsigned_abs(), names, &mut s);
        if e > 0 {
            num.push(s);
        } else {
            den.push(s);
        }
    }
    if num.is_empty() {
        out.push('1');
    } else {
        out.push_str(&num.join("*"));
    }
    match den.len() {
        0 => {}
        1 => {
            out.push('/');
            // a lone power like x^2 binds tighter than '/', so no parentheses
            out.push_str(&den[0]);
        }
        _ => {
            out.push_str("/(");
            out.push_str(&den.join("*"));
            out.push(')');
        }
    }
}

/// Writes a term of a sum without its sign; returns true if it was negative.
fn write_term(t: &RatExpr, names: Option<&[String]>, out: &mut String) -> bool {
    match t.node() {
        Node::Num(c) => {
            write_rational(&c.abs(), out);
            c.is_negative()
        }
        Node::Mul(fs) => {
            let (coeff, rest) = match fs[0].node() {
                Node::Num(c) => (c.clone(), &fs[1..]),
                _ => (BigRational::one(), &fs[..]),
            };
            write_product(&coeff, rest, names, out);
            coeff.is_negative()
        }
        Node::Pow(..) => {
            write_product(&BigRational::one(), std::slice::from_ref(t), names, out);
            false
        }
        _ => {
            write_expr(t, names, out);
            false
        }
    }
}

fn write_expr(e: &RatExpr, names: Option<&[String]>, out: &mut String) {
    match e.node() {
        Node::Num(c) => write_rational(c, out),
        Node::Var(j) => out.push_str(&var_name(*j, names)),
        Node::Add(ts) => {
            for (i, t) in ts.iter().enumerate() {
                let mut s = String::new();
                let neg = write_term(t, names, &mut s);
                match (i, neg) {
                    (0, true) => out.push('-'),
                    (0, false) => {}
                    (_, true) => out.push_str(" - "),
                    (_, false) => out.push_str(" + "),
                }
                out.push_str(&s);
            }
        }
        Node::Mul(_) | Node::Pow(..) => {
            let mut s = String::new();
            if write_term(e, names, &mut s) {
                out.push('-');
            }
            out.push_str(&s);
        }
    }
}

// ---------------------------------------------------------------------------
// Compiled evaluation

#[derive(Clone, Debug)]
enum Op {
    Const(Complex64),
    Var(usize),
    Add(Vec<usize>),
    Mul(Vec<usize>),
    Pow(usize, i64),
}

/// A batch of expressions flattened into one instruction list, sharing
/// common subtrees by pointer identity. Much faster than [`RatExpr::eval`]
/// for repeated evaluation inside Newton loops and integrators.
#[derive(Clone, Debug)]
pub struct Tape {
    ops: Vec<Op>,
    outputs: Vec<usize>,
    sources: Vec<Option<RatExpr>>,
    nvars: usize,
}

impl Tape {
    pub fn compile(exprs: &[RatExpr]) -> Tape {
        let mut tape = Tape {
            ops: Vec::new(),
            outputs: Vec::new(),
            sources: Vec::new(),
            nvars: 0,
        };
        let mut seen: HashMap<*const Node, usize> = HashMap::new();
        let mut consts: HashMap<RatExpr, usize> = HashMap::new();
        for e in exprs {
            let slot = tape.push(e, &mut seen, &mut consts);
            tape.outputs.push(slot);
        }
        tape.nvars = exprs.iter().filter_map(RatExpr::max_var).max().map_or(0, |m| m + 1);
        tape
    }

    fn push(
        &mut self,
        e: &RatExpr,
        seen: &mut HashMap<*const Node, usize>,
        consts: &mut HashMap<RatExpr, usize>,
    ) -> usize {
        if let Some(&slot) = seen.get(&e.ptr()) {
            return slot;
        }
        let (op, source) = match e.node() {
            Node::Num(c) => {
                if let Some(&slot) = consts.get(e) {
                    return slot;
                }
                (Op::Const(rational_to_f64(c).into()), None)
            }
            Node::Var(j) => (Op::Var(*j), None),
            Node::Add(xs) => (Op::Add(xs.iter().map(|x| self.push(x, seen, consts)).collect()), None),
            Node::Mul(xs) => (Op::Mul(xs.iter().map(|x| self.push(x, seen, consts)).collect()), None),
            Node::Pow(b, k) => (Op::Pow(self.push(b, seen, consts), *k), Some(b.clone())),
        };
        self.ops.push(op);
        self.sources.push(source);
        let slot = self.ops.len() - 1;
        seen.insert(e.ptr(), slot);
        if matches!(e.node(), Node::Num(_)) {
            consts.insert(e.clone(), slot);
        }
        slot
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    /// Evaluates all outputs into `out` (resized to the output count).
    pub fn eval_into(&self, point: &[Complex64], out: &mut Vec<Complex64>) -> Result<(), EvalError> {
        if point.len() < self.nvars {
            return Err(EvalError::Dimension {
                expected: self.nvars,
                got: point.len(),
            });
        }
        let mut regs: Vec<Complex64> = Vec::with_capacity(self.ops.len());
        for (i, op) in self.ops.iter().enumerate() {
            let v = match op {
                Op::Const(c) => *c,
                Op::Var(j) => point[*j],
                Op::Add(xs) => xs.iter().map(|&x| regs[x]).sum(),
                Op::Mul(xs) => xs.iter().map(|&x| regs[x]).product(),
                Op::Pow(b, e) => complex_powi(regs[*b], *e).ok_or_else(|| EvalError::Pole {
                    subexpr: self.sources[i].as_ref().map(|s| s.to_string()).unwrap_or_default(),
                })?,
            };
            regs.push(v);
        }
        out.clear();
        out.extend(self.outputs.iter().map(|&o| regs[o]));
        Ok(())
    }

    pub fn eval(&self, point: &[Complex64]) -> Result<Vec<Complex64>, EvalError> {
        let mut out = Vec::with_capacity(self.outputs.len());
        self.eval_into(point, &mut out)?;
        Ok(out)
    }

    /// Like [`Tape::eval`] but reports pole subexpressions with `names`.
    pub fn eval_named(&self, point: &[Complex64], names: &[String]) -> Result<Vec<Complex64>, EvalError> {
        self.eval(point).map_err(|e| rename_pole(e, self, names))
    }
}

fn rename_pole(err: EvalError, tape: &Tape, names: &[String]) -> EvalError {
    match err {
        EvalError::Pole { subexpr } => {
            let renamed = tape
                .sources
                .iter()
                .flatten()
                .find(|s| s.to_string() == subexpr)
                .map(|s| s.display(names).to_string())
                .unwrap_or(subexpr);
            EvalError::Pole { subexpr: renamed }
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: usize) -> RatExpr {
        RatExpr::var(i)
    }

    fn q(n: i64, d: i64) -> RatExpr {
        RatExpr::num(BigRational::new(n.into(), d.into()))
    }

    #[test]
    fn like_terms_collect() {
        let e = &(&v(0) + &v(1)) - &v(0);
        assert_eq!(e, v(1));
        let e2 = &(&v(0) * &q(2, 1)) + &v(0);
        assert_eq!(e2, &q(3, 1) * &v(0));
    }

    #[test]
    fn powers_collect_and_cancel() {
        let w = v(2);
        let e = &w.pow(3).unwrap() * &w.recip().unwrap();
        assert_eq!(e, w.pow(2).unwrap());
        assert!((&w * &w.recip().unwrap()).is_one());
    }

    #[test]
    fn sign_of_sum_factor_is_canonical() {
        let a = &v(0) - &v(1);
        let b = &v(1) - &v(0);
        assert_eq!(b.pow(2).unwrap(), a.pow(2).unwrap());
        assert_eq!(&a + &b, RatExpr::zero());
        assert!((&a.pow(3).unwrap() + &b.pow(3).unwrap()).is_zero());
    }

    #[test]
    fn zero_denominator_rejected() {
        let z = &v(0) - &v(0);
        assert_eq!(z.recip(), Err(ExprError::ZeroDenominator));
        assert!(RatExpr::one().checked_div(&RatExpr::zero()).is_err());
    }

    #[test]
    fn diff_of_cube() {
        let w = v(2);
        let e = w.pow(3).unwrap();
        assert_eq!(e.diff(2), &RatExpr::int(3) * &w.pow(2).unwrap());
        assert!(e.diff(0).is_zero());
    }

    #[test]
    fn quotient_is_a_pole_at_origin() {
        let num = &v(0) * &v(1);
        let den = &v(0).pow(2).unwrap() + &v(1).pow(2).unwrap();
        let e = num.checked_div(&den).unwrap();
        let z = Complex64::zero();
        assert!(matches!(e.eval(&[z, z]), Err(EvalError::Pole { .. })));
        let t = Tape::compile(std::slice::from_ref(&e));
        assert!(matches!(t.eval(&[z, z]), Err(EvalError::Pole { .. })));
    }

    #[test]
    fn printing() {
        let names: Vec<String> = ["q1", "q2", "w1"].iter().map(|s| s.to_string()).collect();
        let g = &(&v(2).pow(2).unwrap() - &v(0).pow(2).unwrap()) - &v(1).pow(2).unwrap();
        assert_eq!(g.display(&names).to_string(), "-q1^2 - q2^2 + w1^2");
        let e = &q(3, 2) * &(&v(0) * &v(2).recip().unwrap());
        assert_eq!(e.display(&names).to_string(), "3*q1/(2*w1)");
    }

    #[test]
    fn tape_matches_tree() {
        let e = &(&v(0) * &v(1).pow(-2).unwrap()) + &q(1, 3);
        let pt = [Complex64::new(1.5, -0.5), Complex64::new(0.3, 2.0)];
        let a = e.eval(&pt).unwrap();
        let b = Tape::compile(std::slice::from_ref(&e)).eval(&pt).unwrap()[0];
        assert!((a - b).norm() < 1e-14);
    }
}
