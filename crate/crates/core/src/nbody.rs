//! The Newtonian n-body potential as an algebraic potential: mutual
//! distances `r_ij` are extension variables with `r_ij^2 = |q_i - q_j|^2`.
//!
//! Variables are named `q{i}_{k}` (body `i`, axis `k`) and `r{i}_{j}`,
//! all 1-based, bodies first then pairs in lexicographic order.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::darboux::Gauge;
use crate::error::{Error, Result};
use crate::expr::{rational_to_f64, RatExpr};
use crate::linalg::{CMatrix, C64};
use crate::setup::AlgebraicSetup;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NBodyConfig {
    pub n: usize,
    pub d: usize,
    #[serde(serialize_with = "ser_masses")]
    pub masses: Vec<BigRational>,
}

fn ser_masses<S: serde::Serializer>(m: &[BigRational], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(m.iter().map(|x| x.to_string()))
}

impl NBodyConfig {
    pub fn new(n: usize, d: usize, masses: Vec<BigRational>) -> Result<Self> {
        if n < 2 {
            return Err(Error::NBody("at least two bodies are required".into()));
        }
        if d < 2 {
            return Err(Error::NBody(format!(
                "dimension d = {d} rejected: the ideal of mutual distances is only prime for d >= 2"
            )));
        }
        if masses.len() != n {
            return Err(Error::NBody(format!("{} masses given for {n} bodies", masses.len())));
        }
        if masses.iter().any(|m| !m.is_positive()) {
            return Err(Error::NBody("masses must be positive".into()));
        }
        Ok(NBodyConfig { n, d, masses })
    }

    pub fn equal_masses(n: usize, d: usize) -> Result<Self> {
        Self::new(n, d, vec![BigRational::from_integer(1.into()); n])
    }

    pub fn pairs(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    /// Index of `r_ij` (0-based bodies, `i < j`) among the extension variables.
    pub fn pair_index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn q_index(&self, body: usize, axis: usize) -> usize {
        body * self.d + axis
    }
}

/// Parses a comma-separated list of masses. Integers and fractions are
/// exact; decimals are rationalized to within `1e-12` relative with
/// denominators up to `10^9`.
pub fn parse_masses(text: &str) -> Result<Vec<BigRational>> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            if let Some((a, b)) = t.split_once('/') {
                let a: BigInt = a.trim().parse().map_err(|_| Error::Number(t.into()))?;
                let b: BigInt = b.trim().parse().map_err(|_| Error::Number(t.into()))?;
                if b.is_zero() {
                    return Err(Error::Number(t.into()));
                }
                return Ok(BigRational::new(a, b));
            }
            if let Ok(i) = t.parse::<BigInt>() {
                return Ok(BigRational::from_integer(i));
            }
            let x: f64 = t.parse().map_err(|_| Error::Number(t.into()))?;
            crate::spectrum::rationalize(C64::new(x, 0.0), 1e-12, 1_000_000_000).ok_or_else(|| Error::Number(t.into()))
        })
        .collect()
}

pub fn build(cfg: &NBodyConfig) -> Result<AlgebraicSetup> {
    let (n, d) = (cfg.n, cfg.d);
    let q_names: Vec<String> = (0..n)
        .flat_map(|i| (0..d).map(move |k| format!("q{}_{}", i + 1, k + 1)))
        .collect();
    let mut w_names = Vec::new();
    let mut generators = Vec::new();
    let mut terms = Vec::new();
    let nq = n * d;
    for i in 0..n {
        for j in i + 1..n {
            w_names.push(format!("r{}_{}", i + 1, j + 1));
            let r = RatExpr::var(nq + cfg.pair_index(i, j));
            let mut g = vec![&r * &r];
            for k in 0..d {
                let diff = RatExpr::var(cfg.q_index(i, k)) - RatExpr::var(cfg.q_index(j, k));
                g.push(-(&diff * &diff));
            }
            generators.push(RatExpr::add_all(g));
            let mm = RatExpr::num(&cfg.masses[i] * &cfg.masses[j]);
            terms.push(&mm * &r.recip()?);
        }
    }
    AlgebraicSetup::new(q_names, w_names, generators, RatExpr::add_all(terms))
}

fn centered(points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = points.len() as f64;
    let d = points[0].len();
    let mean: Vec<f64> = (0..d).map(|k| points.iter().map(|p| p[k]).sum::<f64>() / n).collect();
    points.into_iter().map(|p| p.iter().zip(&mean).map(|(a, m)| a - m).collect()).collect()
}

/// Scales a configuration so that the Darboux normalization holds
/// approximately and fills in `r_ij` on the branch it requires.
fn scaled_seed(cfg: &NBodyConfig, shape: &[Vec<f64>]) -> Vec<C64> {
    let (n, d) = (cfg.n, cfg.d);
    let dist = |i: usize, j: usize| -> f64 {
        (0..d).map(|k| (shape[i][k] - shape[j][k]).powi(2)).sum::<f64>().sqrt()
    };
    let mut potential = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            potential += rational_to_f64(&cfg.masses[i]) * rational_to_f64(&cfg.masses[j]) / dist(i, j);
        }
    }
    let norm2: f64 = shape.iter().flatten().map(|x| x * x).sum();
    let rho = (potential / norm2).cbrt();
    let mut x: Vec<C64> = shape.iter().flatten().map(|v| C64::new(rho * v, 0.0)).collect();
    for i in 0..n {
        for j in i + 1..n {
            x.push(C64::new(-rho * dist(i, j), 0.0));
        }
    }
    x
}

/// Exact-geometry starts: the opposition pair for two bodies; for three,
/// the equilateral triangle and the three collinear orderings. Other body
/// counts return no seeds and a notice.
pub fn central_config_seeds(cfg: &NBodyConfig) -> (Vec<Vec<C64>>, Option<String>) {
    let d = cfg.d;
    let embed = |pts: &[[f64; 2]]| -> Vec<Vec<f64>> {
        pts.iter()
            .map(|p| {
                let mut v = vec![0.0; d];
                v[0] = p[0];
                v[1] = p[1];
                v
            })
            .collect()
    };
    let shapes: Vec<Vec<Vec<f64>>> = match cfg.n {
        2 => vec![embed(&[[-0.5, 0.0], [0.5, 0.0]])],
        3 => {
            let h = 3f64.sqrt() / 2.0;
            let mut v = vec![embed(&[[0.0, 0.0], [1.0, 0.0], [0.5, h]])];
            for middle in 0..3 {
                let mut xs = [[0.0, 0.0]; 3];
                let others: Vec<usize> = (0..3).filter(|&i| i != middle).collect();
                xs[others[0]] = [-1.0, 0.0];
                xs[others[1]] = [1.0, 0.0];
                v.push(embed(&xs));
            }
            v
        }
        n => {
            return (
                Vec::new(),
                Some(format!("no built-in central configuration seeds for n = {n}; supply seeds")),
            )
        }
    };
    let gauge = NBodyGauge::new(cfg);
    let seeds = shapes
        .into_iter()
        .map(|s| gauge.prepare_seed(&scaled_seed(cfg, &centered(s))))
        .collect();
    (seeds, None)
}

/// Translations and rotations of the n-body problem.
///
/// Pins: the unweighted centroid vanishes, and the moment vectors
/// `u_m = sum_i (i+1)^m q_i` (`m = 1..d-1`) are put in echelon position
/// (`u_m` has zero components beyond axis `m`). The Darboux equations
/// themselves force `sum_i q_i = 0` since the kinetic term is unweighted.
#[derive(Clone, Debug)]
pub struct NBodyGauge {
    n: usize,
    d: usize,
    dim: usize,
}

impl NBodyGauge {
    pub fn new(cfg: &NBodyConfig) -> Self {
        NBodyGauge {
            n: cfg.n,
            d: cfg.d,
            dim: cfg.n * cfg.d + cfg.pairs(),
        }
    }

    fn moment_weight(i: usize, m: usize) -> f64 {
        ((i + 1) as f64).powi(m as i32)
    }
}

impl Gauge for NBodyGauge {
    fn pin_rows(&self) -> CMatrix {
        let (n, d) = (self.n, self.d);
        let rows = d + d * (d - 1) / 2;
        let mut p = CMatrix::zeros(rows, self.dim);
        for k in 0..d {
            for i in 0..n {
                p[(k, i * d + k)] = C64::new(1.0, 0.0);
            }
        }
        let mut r = d;
        for m in 1..d {
            for axis in m..d {
                for i in 0..n {
                    p[(r, i * d + axis)] = C64::new(Self::moment_weight(i, m), 0.0);
                }
                r += 1;
            }
        }
        p
    }

    fn prepare_seed(&self, x: &[C64]) -> Vec<C64> {
        let (n, d) = (self.n, self.d);
        let mut out = x.to_vec();
        for k in 0..d {
            let mean = (0..n).map(|i| x[i * d + k]).sum::<C64>() / n as f64;
            for i in 0..n {
                out[i * d + k] -= mean;
            }
        }
        // orthonormal frame from the real parts of the moment vectors
        let mut frame: Vec<Vec<f64>> = Vec::new();
        let mut candidates: Vec<Vec<f64>> = (1..d)
            .map(|m| {
                (0..d)
                    .map(|k| (0..n).map(|i| Self::moment_weight(i, m) * out[i * d + k].re).sum())
                    .collect()
            })
            .collect();
        candidates.extend((0..d).map(|k| (0..d).map(|j| if j == k { 1.0 } else { 0.0 }).collect()));
        for mut v in candidates {
            if frame.len() == d {
                break;
            }
            for e in &frame {
                let dot: f64 = v.iter().zip(e).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(e).for_each(|(a, b)| *a -= dot * b);
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 1e-8 {
                frame.push(v.into_iter().map(|a| a / norm).collect());
            }
        }
        let rot = nalgebra::DMatrix::from_fn(d, d, |a, b| frame[a][b]);
        if rot.determinant() < 0.0 {
            frame[d - 1].iter_mut().for_each(|a| *a = -*a);
        }
        for i in 0..n {
            let old: Vec<C64> = out[i * d..(i + 1) * d].to_vec();
            for a in 0..d {
                out[i * d + a] = (0..d).map(|b| old[b] * frame[a][b]).sum();
            }
        }
        out
    }

    fn gauge_vectors(&self, c: &[C64]) -> Vec<(Vec<C64>, f64)> {
        let (n, d) = (self.n, self.d);
        let nq = n * d;
        let scale = crate::linalg::inf_norm(&c[..nq]).max(1e-300);
        let mut out = Vec::new();
        for k in 0..d {
            let mut v = vec![C64::default(); nq];
            for i in 0..n {
                v[i * d + k] = C64::new(1.0, 0.0);
            }
            out.push((v, 0.0));
        }
        for a in 0..d {
            for b in a + 1..d {
                let mut v = vec![C64::default(); nq];
                for i in 0..n {
                    v[i * d + a] = -c[i * d + b];
                    v[i * d + b] = c[i * d + a];
                }
                if crate::linalg::inf_norm(&v) > 1e-8 * scale {
                    out.push((v, 1.0));
                }
            }
        }
        out
    }
}
