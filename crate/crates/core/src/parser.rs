//! Problem-file and expression parsing.
//!
//! Problem files are line oriented (`;` also separates statements, `#`
//! starts a comment):
//!
//! ```text
//! vars q1 q2
//! ext  w1 : w1^2 - q1^2 - q2^2
//! potential w1^3
//! ```
//!
//! Expressions use `+ - * / ^` and parentheses over integer literals and
//! declared variables; `^` takes a possibly negative integer literal.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::expr::RatExpr;
use crate::setup::AlgebraicSetup;

const MAX_EXPONENT: i64 = 1 << 20;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// `col0` is the 1-based column of `text`'s first character within its line.
fn tokenize(text: &str, line: usize, col0: usize) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = col0 + i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let tok = match c {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            d if d.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if i < chars.len() && (is_ident_char(chars[i]) || chars[i] == '.') {
                    return Err(syntax(line, col0 + i, format!("unexpected `{}` in number", chars[i])));
                }
                let digits: String = chars[start..i].iter().collect();
                out.push(Token {
                    tok: Tok::Int(digits.parse().expect("digits")),
                    column,
                });
                continue;
            }
            a if is_ident_start(a) => {
                let start = i;
                while i < chars.len() && is_ident_char(chars[i]) {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(chars[start..i].iter().collect()),
                    column,
                });
                continue;
            }
            other => return Err(syntax(line, column, format!("unexpected character `{other}`"))),
        };
        out.push(Token { tok, column });
        i += 1;
    }
    Ok(out)
}

struct ExprParser<'a> {
    toks: Vec<Token>,
    pos: usize,
    line: usize,
    end_column: usize,
    names: &'a HashMap<String, usize>,
}

impl ExprParser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn column(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_column, |t| t.column)
    }

    fn err(&self, message: impl Into<String>) -> Error {
        syntax(self.line, self.column(), message)
    }

    fn expr(&mut self) -> Result<RatExpr> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    terms.push(self.term()?);
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    terms.push(-self.term()?);
                }
                _ => return Ok(RatExpr::add_all(terms)),
            }
        }
    }

    fn term(&mut self) -> Result<RatExpr> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    acc = &acc * &self.unary()?;
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    let column = self.column();
                    let rhs = self.unary()?;
                    acc = acc
                        .checked_div(&rhs)
                        .map_err(|_| syntax(self.line, column, "division by the zero expression"))?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<RatExpr> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            return Ok(-self.unary()?);
        }
        self.power()
    }

    fn power(&mut self) -> Result<RatExpr> {
        let base = self.atom()?;
        if self.peek() != Some(&Tok::Caret) {
            return Ok(base);
        }
        self.pos += 1;
        let negative = if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            true
        } else {
            false
        };
        let column = self.column();
        let e = match self.peek() {
            Some(Tok::Int(v)) => {
                let e = i64::try_from(v.clone()).ok().filter(|e| *e <= MAX_EXPONENT);
                self.pos += 1;
                e.ok_or_else(|| syntax(self.line, column, "exponent too large"))?
            }
            _ => return Err(self.err("`^` must be followed by an integer literal")),
        };
        let e = if negative { -e } else { e };
        base.pow(e).map_err(|err| syntax(self.line, column, err.to_string()))
    }

    fn atom(&mut self) -> Result<RatExpr> {
        let column = self.column();
        match self.peek().cloned() {
            Some(Tok::Int(v)) => {
                self.pos += 1;
                Ok(RatExpr::num(BigRational::from_integer(v)))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match self.names.get(&name) {
                    Some(&j) => Ok(RatExpr::var(j)),
                    None => Err(Error::UndeclaredVariable {
                        name,
                        line: self.line,
                        column,
                    }),
                }
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(t) => Err(self.err(format!("unexpected token {t:?}"))),
            None => Err(self.err("unexpected end of expression")),
        }
    }
}

fn parse_expr_at(text: &str, names: &HashMap<String, usize>, line: usize, col0: usize) -> Result<RatExpr> {
    let toks = tokenize(text, line, col0)?;
    let mut p = ExprParser {
        toks,
        pos: 0,
        line,
        end_column: col0 + text.chars().count(),
        names,
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.err("trailing input after expression"));
    }
    Ok(e)
}

/// Parses a single expression over the given variable names (in order).
pub fn parse_expr(text: &str, names: &[String]) -> Result<RatExpr> {
    let table: HashMap<String, usize> = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
    parse_expr_at(text, &table, 1, 1)
}

const KEYWORDS: [&str; 3] = ["vars", "ext", "potential"];

struct Statement<'a> {
    text: &'a str,
    line: usize,
    col0: usize,
}

fn statements(text: &str) -> Vec<Statement<'_>> {
    let mut out = Vec::new();
    for (li, raw) in text.lines().enumerate() {
        let line = li + 1;
        let body = raw.split('#').next().unwrap_or("");
        let mut offset = 0;
        for piece in body.split(';') {
            let lead = piece.len() - piece.trim_start().len();
            let trimmed = piece.trim();
            if !trimmed.is_empty() {
                let col0 = body[..offset + lead].chars().count() + 1;
                out.push(Statement {
                    text: trimmed,
                    line,
                    col0,
                });
            }
            offset += piece.len() + 1;
        }
    }
    out
}

fn check_ident(name: &str, line: usize, column: usize) -> Result<()> {
    let mut chars = name.chars();
    let ok = chars.next().is_some_and(is_ident_start) && chars.all(is_ident_char);
    if !ok {
        return Err(syntax(line, column, format!("invalid variable name `{name}`")));
    }
    if KEYWORDS.contains(&name) {
        return Err(syntax(line, column, format!("`{name}` is a keyword")));
    }
    Ok(())
}

/// Parses a problem description into a validated [`AlgebraicSetup`].
/// A constant rational expression such as `-25/24` or `3^-2`.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let e = parse_expr(text, &[])?;
    e.as_num().cloned().ok_or_else(|| Error::Number(text.into()))
}

pub fn parse_setup(text: &str) -> Result<AlgebraicSetup> {
    let mut q_names: Vec<String> = Vec::new();
    let mut w_names: Vec<String> = Vec::new();
    let mut declared: HashMap<String, usize> = HashMap::new();
    // (w name, body text, line, column of body)
    let mut exts: Vec<(String, &str, usize, usize)> = Vec::new();
    let mut potential: Option<(&str, usize, usize)> = None;

    let mut declare = |name: &str, line: usize| -> Result<()> {
        if declared.insert(name.to_string(), line).is_some() {
            return Err(Error::DuplicateVariable {
                name: name.to_string(),
                line,
            });
        }
        Ok(())
    };

    for st in statements(text) {
        let kw_len = st.text.find(char::is_whitespace).unwrap_or(st.text.len());
        let (kw, rest) = st.text.split_at(kw_len);
        let rest_lead = rest.len() - rest.trim_start().len();
        let rest_col = st.col0 + kw.chars().count() + rest[..rest_lead].chars().count();
        let rest = rest.trim();
        match kw {
            "vars" => {
                if rest.is_empty() {
                    return Err(syntax(st.line, st.col0, "`vars` needs at least one name"));
                }
                let mut col = rest_col;
                let mut remaining = rest;
                while !remaining.is_empty() {
                    let end = remaining.find(char::is_whitespace).unwrap_or(remaining.len());
                    let name = &remaining[..end];
                    check_ident(name, st.line, col)?;
                    declare(name, st.line)?;
                    q_names.push(name.to_string());
                    let after = &remaining[end..];
                    let skip = after.len() - after.trim_start().len();
                    col += remaining[..end + skip].chars().count();
                    remaining = after.trim_start();
                }
            }
            "ext" => {
                let Some(colon) = rest.find(':') else {
                    return Err(syntax(st.line, rest_col, "expected `ext <name> : <polynomial>`"));
                };
                let name = rest[..colon].trim();
                check_ident(name, st.line, rest_col)?;
                declare(name, st.line)?;
                w_names.push(name.to_string());
                let body = &rest[colon + 1..];
                let lead = body.len() - body.trim_start().len();
                let body_col = rest_col + rest[..colon + 1].chars().count() + body[..lead].chars().count();
                exts.push((name.to_string(), body.trim(), st.line, body_col));
            }
            "potential" => {
                if potential.is_some() {
                    return Err(syntax(st.line, st.col0, "potential declared twice"));
                }
                if rest.is_empty() {
                    return Err(syntax(st.line, rest_col, "empty potential"));
                }
                potential = Some((rest, st.line, rest_col));
            }
            other => {
                return Err(syntax(
                    st.line,
                    st.col0,
                    format!("unknown statement `{other}` (expected vars, ext or potential)"),
                ))
            }
        }
    }

    if q_names.is_empty() {
        return Err(Error::InvalidSetup("no `vars` declaration".into()));
    }
    let Some((pot_text, pot_line, pot_col)) = potential else {
        return Err(Error::InvalidSetup("no `potential` declaration".into()));
    };

    let names: Vec<String> = q_names.iter().chain(&w_names).cloned().collect();
    let table: HashMap<String, usize> = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();

    let mut generators = Vec::with_capacity(exts.len());
    for (name, body, line, col) in &exts {
        if body.is_empty() {
            return Err(syntax(*line, *col, "empty generator"));
        }
        let g = parse_expr_at(body, &table, *line, *col)?;
        if !g.is_polynomial() {
            return Err(Error::GeneratorNotPolynomial {
                name: name.clone(),
                line: *line,
            });
        }
        generators.push(g);
    }
    let potential = parse_expr_at(pot_text, &table, pot_line, pot_col)?;
    AlgebraicSetup::new(q_names, w_names, generators, potential)
}
