use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::RatExpr;

/// A potential on the variety cut out by `generators`, over position
/// variables `q_1..q_n` followed by extension variables `w_1..w_s`.
///
/// Variable `i < n` is `q_{i+1}`; variable `n + j` is `w_{j+1}`.
#[derive(Clone, Debug)]
pub struct AlgebraicSetup {
    pub q_names: Vec<String>,
    pub w_names: Vec<String>,
    /// `G_i`, one per extension variable, all polynomial.
    pub generators: Vec<RatExpr>,
    pub potential: RatExpr,
    names: Vec<String>,
}

impl AlgebraicSetup {
    pub fn new(
        q_names: Vec<String>,
        w_names: Vec<String>,
        generators: Vec<RatExpr>,
        potential: RatExpr,
    ) -> Result<Self> {
        if q_names.is_empty() {
            return Err(Error::InvalidSetup("at least one position variable is required".into()));
        }
        if generators.len() != w_names.len() {
            return Err(Error::InvalidSetup(format!(
                "{} generators for {} extension variables",
                generators.len(),
                w_names.len()
            )));
        }
        let names: Vec<String> = q_names.iter().chain(&w_names).cloned().collect();
        let mut sorted = names.clone();
        sorted.sort();
        if let Some(pair) = sorted.windows(2).find(|p| p[0] == p[1]) {
            return Err(Error::DuplicateVariable {
                name: pair[0].clone(),
                line: 0,
            });
        }
        let total = names.len();
        for (i, g) in generators.iter().enumerate() {
            if !g.is_polynomial() {
                return Err(Error::GeneratorNotPolynomial {
                    name: w_names[i].clone(),
                    line: 0,
                });
            }
        }
        for e in generators.iter().chain(std::iter::once(&potential)) {
            if e.max_var().is_some_and(|m| m >= total) {
                return Err(Error::InvalidSetup("expression references an undeclared variable".into()));
            }
        }
        Ok(AlgebraicSetup {
            q_names,
            w_names,
            generators,
            potential,
            names,
        })
    }

    pub fn n(&self) -> usize {
        self.q_names.len()
    }

    pub fn s(&self) -> usize {
        self.w_names.len()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    /// All variable names, `q`'s first.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn show(&self, e: &RatExpr) -> String {
        e.display(&self.names).to_string()
    }

    /// Renders the setup in the problem-file format accepted by
    /// [`crate::parser::parse_setup`].
    pub fn to_problem_text(&self) -> String {
        let mut out = format!("vars {}\n", self.q_names.join(" "));
        for (w, g) in self.w_names.iter().zip(&self.generators) {
            out.push_str(&format!("ext {w} : {}\n", self.show(g)));
        }
        out.push_str(&format!("potential {}\n", self.show(&self.potential)));
        out
    }

    pub fn echo(&self) -> SetupEcho {
        SetupEcho {
            q: self.q_names.clone(),
            w: self.w_names.clone(),
            generators: self.generators.iter().map(|g| self.show(g)).collect(),
            potential: self.show(&self.potential),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SetupEcho {
    pub q: Vec<String>,
    pub w: Vec<String>,
    pub generators: Vec<String>,
    pub potential: String,
}
