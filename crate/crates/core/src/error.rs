use thiserror::Error;

/// Errors produced while building or evaluating expressions.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("division by the zero expression")]
    ZeroDenominator,
    #[error("exponent overflow")]
    ExponentOverflow,
}

/// Errors from numeric evaluation of an expression.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    /// A denominator evaluated to zero. `subexpr` is the vanishing base,
    /// printed with the caller's variable names when available.
    #[error("pole at point: `{subexpr}` vanishes")]
    Pole { subexpr: String },
    #[error("non-finite value while evaluating `{subexpr}`")]
    NonFinite { subexpr: String },
    #[error("point has {got} coordinates, expected {expected}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("undeclared variable `{name}` at line {line}, column {column}")]
    UndeclaredVariable {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("duplicate variable name `{name}` at line {line}")]
    DuplicateVariable { name: String, line: usize },
    #[error("generator for `{name}` (line {line}) is not a polynomial")]
    GeneratorNotPolynomial { name: String, line: usize },
    #[error("invalid problem: {0}")]
    InvalidSetup(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("variety: detJ vanishes identically on all {samples} samples; setup rejected")]
    DetJVanishes { samples: usize },
    #[error("not homogeneous: {0}")]
    NotHomogeneous(String),
    #[error("homogeneity numeric verification failed: {0}")]
    HomogeneityVerification(String),
    #[error("homogeneity degree {0} is not a nonzero integer; the table check requires k in Z*")]
    NonIntegerDegree(String),
    #[error("degree k = 0 is not allowed")]
    ZeroDegree,
    #[error("state in critical set: |detJ| = {detj:.3e}")]
    CriticalSet { detj: f64 },
    #[error("linear algebra: {0}")]
    LinearAlgebra(String),
    #[error("eigen iteration failed to converge")]
    EigenFailed,
    #[error("integration failure: {0}")]
    Integration(String),
    #[error("n-body: {0}")]
    NBody(String),
    #[error("invalid number `{0}`")]
    Number(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
