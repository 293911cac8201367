//! Serialization helpers shared by the JSON reports.

use num_rational::BigRational;
use serde::ser::{SerializeSeq, SerializeStruct};
use serde::{Serialize, Serializer};

use crate::linalg::{CMatrix, C64};

/// A complex number serialized as `{"re": .., "im": ..}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CNum(pub C64);

impl Serialize for CNum {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Complex", 2)?;
        st.serialize_field("re", &self.0.re)?;
        st.serialize_field("im", &self.0.im)?;
        st.end()
    }
}

pub fn ser_c64<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
    CNum(*z).serialize(s)
}

pub fn ser_cvec<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&CNum(*z))?;
    }
    seq.end()
}

pub fn ser_cmatrix<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
    let rows: Vec<Vec<CNum>> = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| CNum(m[(i, j)])).collect()).collect();
    rows.serialize(s)
}

/// Rationals serialize as `"p/q"` (or `"p"` when integral).
pub fn ser_rational<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

pub fn ser_opt_rational<S: Serializer>(r: &Option<BigRational>, s: S) -> Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_some(&r.to_string()),
        None => s.serialize_none(),
    }
}

/// Human-readable `a+bi` with 12 significant digits; parts below
/// `1e-12 max(1, |z|)` are dropped.
pub fn fmt_c64(z: C64) -> String {
    let cut = 1e-12 * z.norm().max(1.0);
    let short = |x: f64| -> String {
        let r: f64 = format!("{x:.11e}").parse().unwrap_or(x);
        format!("{r}")
    };
    let (re, im) = (if z.re.abs() < cut { 0.0 } else { z.re }, if z.im.abs() < cut { 0.0 } else { z.im });
    match (re == 0.0, im == 0.0) {
        (_, true) => short(re),
        (true, false) => format!("{}i", short(im)),
        (false, false) if im < 0.0 => format!("{}-{}i", short(re), short(-im)),
        _ => format!("{}+{}i", short(re), short(im)),
    }
}

/// Parses `a`, `bi`, `a+bi`, `a-bi`, `i`, `-i` and the `j` suffix.
pub fn parse_complex(text: &str) -> Option<C64> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return None;
    }
    let Some(body) = t.strip_suffix('i').or_else(|| t.strip_suffix('j')) else {
        return t.parse::<f64>().ok().map(|re| C64::new(re, 0.0));
    };
    // split at the last sign that is not part of an exponent
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let imag = |s: &str| -> Option<f64> {
        match s {
            "" | "+" => Some(1.0),
            "-" => Some(-1.0),
            _ => s.parse().ok(),
        }
    };
    match split {
        Some(i) => Some(C64::new(body[..i].parse().ok()?, imag(&body[i..])?)),
        None => Some(C64::new(0.0, imag(body)?)),
    }
}

/// Whitespace-separated complex components; plain fractions such as
/// `1/3` are accepted for real entries.
pub fn parse_complex_row(line: &str) -> crate::error::Result<Vec<C64>> {
    line.split_whitespace()
        .map(|tok| {
            parse_complex(tok)
                .or_else(|| {
                    crate::parser::parse_rational(tok)
                        .ok()
                        .map(|r| C64::new(crate::expr::rational_to_f64(&r), 0.0))
                })
                .ok_or_else(|| crate::error::Error::Number(tok.into()))
        })
        .collect()
}

/// One vector per non-empty line; `#` starts a comment.
pub fn parse_vector_file(text: &str) -> crate::error::Result<Vec<Vec<C64>>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(parse_complex_row)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("1.5"), Some(C64::new(1.5, 0.0)));
        assert_eq!(parse_complex("2-3i"), Some(C64::new(2.0, -3.0)));
        assert_eq!(parse_complex("-i"), Some(C64::new(0.0, -1.0)));
        assert_eq!(parse_complex("1e-3+2e+1i"), Some(C64::new(1e-3, 20.0)));
        assert_eq!(parse_complex(" 4i "), Some(C64::new(0.0, 4.0)));
        assert_eq!(parse_complex("x"), None);
    }

    #[test]
    fn short_format() {
        assert_eq!(fmt_c64(C64::new(0.9999999999999998, 2e-18)), "1");
        assert_eq!(fmt_c64(C64::new(-0.5, 0.25)), "-0.5+0.25i");
        assert_eq!(fmt_c64(C64::new(1e-30, -2.0)), "-2i");
        assert_eq!(fmt_c64(C64::new(1.0 / 3.0, 0.0)), "0.333333333333");
        assert_eq!(parse_complex(&fmt_c64(C64::new(3.0, -4.5))), Some(C64::new(3.0, -4.5)));
    }

    #[test]
    fn complex_json_shape() {
        let v = serde_json::to_string(&CNum(C64::new(1.0, -2.0))).unwrap();
        assert_eq!(v, r#"{"re":1.0,"im":-2.0}"#);
    }

    #[test]
    fn vector_files() {
        let v = parse_vector_file("# seeds\n0.3 0 1/3\n\n1+2i -i 2 # tail\n").unwrap();
        assert_eq!(v.len(), 2);
        assert!((v[0][2].re - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(v[1][0], C64::new(1.0, 2.0));
        assert!(parse_vector_file("1 two").is_err());
    }
}
