//! Plain-text problem files (`.sdl`).
//!
//! The first line is a header naming the family, the dimensions and the
//! constants; the following lines hold the matrices row by row, one matrix row
//! per line, entries separated by single spaces and printed with 17
//! significant digits.
//!
//! ```text
//! sdl quadratic n=<n> m=<m> mu_f=<..> l_f=<..> mu_g=<..> l_g=<..>
//! <n rows of R> <m rows of S> <m rows of A>
//!
//! sdl l2 n=<n> m=<m> mu=<..>
//! <m rows of K> <one line with b>
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::families::{L2RegSaddle, ProblemFamily, QuadraticMinimax};
use super::problem::Constants;
use crate::error::{Error, Result};
use crate::fmt::sig17;

pub const EXTENSION: &str = "sdl";

fn push_row<'a>(out: &mut String, row: impl Iterator<Item = &'a f64>) {
    let mut first = true;
    for v in row {
        if !first {
            out.push(' ');
        }
        first = false;
        out.push_str(&sig17(*v));
    }
    out.push('\n');
}

fn push_matrix(out: &mut String, mat: &DMatrix<f64>) {
    for row in mat.row_iter() {
        push_row(out, row.iter());
    }
}

pub fn to_sdl_string(family: &ProblemFamily) -> String {
    let (n, m) = family.dims();
    let mut out = String::new();
    match family {
        ProblemFamily::Quadratic(q) => {
            let c = q.constants();
            let _ = writeln!(
                out,
                "sdl quadratic n={n} m={m} mu_f={} l_f={} mu_g={} l_g={}",
                sig17(c.mu_f),
                sig17(c.l_f),
                sig17(c.mu_g),
                sig17(c.l_g)
            );
            push_matrix(&mut out, q.r_mat());
            push_matrix(&mut out, q.s_mat());
            push_matrix(&mut out, q.coupling());
        }
        ProblemFamily::L2(l) => {
            let _ = writeln!(out, "sdl l2 n={n} m={m} mu={}", sig17(l.mu()));
            push_matrix(&mut out, l.k_mat());
            push_row(&mut out, l.b_vec().iter());
        }
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_row(&mut self, len: usize) -> Result<Vec<f64>> {
        let (idx, line) = self.inner.next().ok_or(Error::Parse {
            line: 0,
            reason: "unexpected end of file".into(),
        })?;
        let line_no = idx + 1;
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| Error::Parse {
                    line: line_no,
                    reason: format!("not a number: {tok:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if row.len() != len {
            return Err(Error::Parse {
                line: line_no,
                reason: format!("expected {len} entries, found {}", row.len()),
            });
        }
        Ok(row)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.next_row(cols)?);
        }
        Ok(DMatrix::from_row_slice(rows, cols, &data))
    }

    fn finish(mut self) -> Result<()> {
        match self.inner.find(|(_, l)| !l.trim().is_empty()) {
            Some((idx, _)) => Err(Error::Parse {
                line: idx + 1,
                reason: "trailing data after last matrix".into(),
            }),
            None => Ok(()),
        }
    }
}

fn header_fields(line: &str) -> Result<(String, BTreeMap<String, String>)> {
    let bad = |reason: String| Error::Parse { line: 1, reason };
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some("sdl") {
        return Err(bad("header must start with 'sdl'".into()));
    }
    let kind = tokens
        .next()
        .ok_or_else(|| bad("missing family name".into()))?
        .to_string();
    let mut fields = BTreeMap::new();
    for tok in tokens {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| bad(format!("expected key=value, found {tok:?}")))?;
        fields.insert(k.to_string(), v.to_string());
    }
    Ok((kind, fields))
}

fn field<T: std::str::FromStr>(fields: &BTreeMap<String, String>, key: &str) -> Result<T> {
    let raw = fields.get(key).ok_or_else(|| Error::Parse {
        line: 1,
        reason: format!("missing header field {key}"),
    })?;
    raw.parse().map_err(|_| Error::Parse {
        line: 1,
        reason: format!("invalid value for {key}: {raw:?}"),
    })
}

pub fn parse_sdl(text: &str) -> Result<ProblemFamily> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (_, header) = lines.inner.next().ok_or(Error::Parse {
        line: 1,
        reason: "empty file".into(),
    })?;
    let (kind, fields) = header_fields(header)?;
    let n: usize = field(&fields, "n")?;
    let m: usize = field(&fields, "m")?;
    if n == 0 || m == 0 {
        return Err(Error::Parse {
            line: 1,
            reason: "dimensions must be positive".into(),
        });
    }
    let family = match kind.as_str() {
        "quadratic" => {
            let constants = Constants::new(
                field(&fields, "mu_f")?,
                field(&fields, "l_f")?,
                field(&fields, "mu_g")?,
                field(&fields, "l_g")?,
            )?;
            let r_mat = lines.matrix(n, n)?;
            let s_mat = lines.matrix(m, m)?;
            let coupling = lines.matrix(m, n)?;
            ProblemFamily::Quadratic(QuadraticMinimax::with_constants(
                r_mat, s_mat, coupling, constants,
            )?)
        }
        "l2" => {
            let mu: f64 = field(&fields, "mu")?;
            let k_mat = lines.matrix(m, n)?;
            let b_vec = DVector::from_vec(lines.next_row(m)?);
            ProblemFamily::L2(L2RegSaddle::new(k_mat, b_vec, mu)?)
        }
        other => {
            return Err(Error::Parse {
                line: 1,
                reason: format!("unknown family {other:?}"),
            })
        }
    };
    lines.finish()?;
    Ok(family)
}

pub fn save_sdl(family: &ProblemFamily, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_sdl_string(family))?;
    Ok(())
}

pub fn load_sdl(path: impl AsRef<Path>) -> Result<ProblemFamily> {
    parse_sdl(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::saddle::{generate_l2_saddle, generate_quadratic};

    #[test]
    fn quadratic_round_trip_is_exact() {
        let fam = ProblemFamily::from(generate_quadratic(5, 4, 1.0, 7.0, 0.5, 3.0, 2).unwrap());
        let text = to_sdl_string(&fam);
        assert!(text.starts_with("sdl quadratic n=5 m=4 "));
        assert_eq!(text.lines().count(), 1 + 5 + 4 + 4);
        assert_eq!(parse_sdl(&text).unwrap(), fam);
    }

    #[test]
    fn l2_round_trip_is_exact() {
        let fam = ProblemFamily::from(generate_l2_saddle(7, 3, 2.0, 2).unwrap());
        let text = to_sdl_string(&fam);
        assert_eq!(parse_sdl(&text).unwrap(), fam);
    }

    #[test]
    fn entries_carry_17_significant_digits() {
        let fam = ProblemFamily::from(generate_l2_saddle(2, 1, 2.0, 0).unwrap());
        let text = to_sdl_string(&fam);
        let entry = text.lines().nth(1).unwrap().split(' ').next().unwrap();
        let mantissa = entry.split('e').next().unwrap().replace(['-', '.'], "");
        assert_eq!(mantissa.len(), 17);
    }

    #[test]
    fn reports_malformed_input() {
        assert!(matches!(parse_sdl(""), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_sdl("sdl cubic n=1 m=1"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_sdl("sdl l2 n=1 m=1 mu=2\n1.0\n"),
            Err(Error::Parse { .. })
        ));
        let err = parse_sdl("sdl l2 n=2 m=1 mu=2\n1.0\n3.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(matches!(
            parse_sdl("sdl l2 n=1 m=1 mu=2\n1.0\n3.0\n4.0\n"),
            Err(Error::Parse { line: 4, .. })
        ));
        assert!(parse_sdl("sdl l2 n=1 m=1 mu=2\n1.0\n3.0\n\n").is_ok());
    }
}
