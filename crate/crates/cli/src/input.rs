//! Text formats read by the CLI.
//!
//! Dense vectors are CSV rows (one vector per line) or, when every line holds
//! a single value and there are exactly `d` of them, one value per line.
//! Sparse vectors and update streams are `index value` lines with 1-based
//! indices. Blank lines and lines starting with `#` are skipped everywhere.

use std::fmt;

#[derive(Debug, PartialEq)]
pub enum InputError {
    /// Malformed text, with the 1-based line number.
    Parse { line: usize, msg: String },
    /// Well-formed but the wrong size for the transform.
    Shape { line: usize, msg: String },
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputError::Parse { line, msg } => write!(f, "line {line}: {msg}"),
            InputError::Shape { line, msg } => write!(f, "line {line}: {msg}"),
        }
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_value(tok: &str, line: usize) -> Result<f64, InputError> {
    let v: f64 = tok.trim().parse().map_err(|_| InputError::Parse {
        line,
        msg: format!("'{}' is not a number", tok.trim()),
    })?;
    if !v.is_finite() {
        return Err(InputError::Parse {
            line,
            msg: format!("'{}' is not finite", tok.trim()),
        });
    }
    Ok(v)
}

fn parse_index(tok: &str, line: usize, d: usize) -> Result<usize, InputError> {
    let j: usize = tok.parse().map_err(|_| InputError::Parse {
        line,
        msg: format!("'{tok}' is not a positive integer index"),
    })?;
    if j == 0 || j > d {
        return Err(InputError::Shape {
            line,
            msg: format!("index {j} is outside 1..={d}"),
        });
    }
    Ok(j - 1)
}

pub fn parse_dense(text: &str, d: usize) -> Result<Vec<Vec<f64>>, InputError> {
    let lines: Vec<(usize, &str)> = content_lines(text).collect();
    let single = lines.iter().all(|(_, l)| !l.contains(','));
    if single && lines.len() == d && d > 1 {
        let v = lines
            .iter()
            .map(|&(n, l)| parse_value(l, n))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(vec![v]);
    }
    lines
        .iter()
        .map(|&(n, l)| {
            let row = l
                .split(',')
                .map(|tok| parse_value(tok, n))
                .collect::<Result<Vec<_>, _>>()?;
            if row.len() != d {
                return Err(InputError::Shape {
                    line: n,
                    msg: format!("row has {} values, the transform expects {d}", row.len()),
                });
            }
            Ok(row)
        })
        .collect()
}

/// Pairs of `index value` in file order, indices converted to 0-based.
pub fn parse_pairs(text: &str, d: usize) -> Result<Vec<(usize, f64)>, InputError> {
    content_lines(text)
        .map(|(n, l)| {
            let toks: Vec<&str> = l.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(InputError::Parse {
                    line: n,
                    msg: format!("expected 'index value', got '{l}'"),
                });
            }
            let j = parse_index(toks[0], n, d)?;
            Ok((j, parse_value(toks[1], n)?))
        })
        .collect()
}

/// A sparse vector file as a dense vector; repeated indices are summed.
pub fn parse_sparse(text: &str, d: usize) -> Result<Vec<f64>, InputError> {
    let mut x = vec![0.0; d];
    for (j, v) in parse_pairs(text, d)? {
        x[j] += v;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_rows_and_columns() {
        assert_eq!(parse_dense("1,2\n3,4\n", 2).unwrap(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(parse_dense("1\n# c\n\n2\n", 2).unwrap(), vec![vec![1.0, 2.0]]);
        assert_eq!(parse_dense("5\n6\n", 1).unwrap(), vec![vec![5.0], vec![6.0]]);
        assert!(matches!(parse_dense("1,2,3\n", 2), Err(InputError::Shape { line: 1, .. })));
        assert!(matches!(parse_dense("1,x\n", 2), Err(InputError::Parse { line: 1, .. })));
        assert!(matches!(parse_dense("1,inf\n", 2), Err(InputError::Parse { .. })));
    }

    #[test]
    fn pairs_are_one_based() {
        assert_eq!(parse_pairs("1 0.5\n3 -2\n", 3).unwrap(), vec![(0, 0.5), (2, -2.0)]);
        assert_eq!(parse_sparse("2 1\n2 1\n", 2).unwrap(), vec![0.0, 2.0]);
        assert!(matches!(parse_pairs("0 1\n", 3), Err(InputError::Shape { line: 1, .. })));
        assert!(matches!(parse_pairs("4 1\n", 3), Err(InputError::Shape { .. })));
        assert!(matches!(parse_pairs("1 1\n2\n", 3), Err(InputError::Parse { line: 2, .. })));
        assert!(matches!(parse_pairs("a 1\n", 3), Err(InputError::Parse { .. })));
    }
}
