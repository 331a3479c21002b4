//! Plain-text serialization of datasets and matrices.
//!
//! Dataset format: a header line `n p q`, an optional `mean` block of p rows,
//! then the n observations as p rows of q whitespace-separated numbers each.
//! `#` starts a comment, blank lines are ignored. Serialization uses the
//! shortest representation that round-trips, so parse(serialize(x)) == x
//! bit-exactly for finite doubles. Matrix files carry a `rows cols` header
//! followed by the rows.

use nalgebra::DMatrix;

use crate::dataset::MatrixDataset;
use crate::error::{Error, Result};

/// Hard caps keeping hostile headers from allocating unbounded memory.
const MAX_DIM: usize = 4096;
const MAX_TOTAL: usize = 1 << 24;

struct Tokens<'a> {
    /// (1-based line number, tokens) for every non-empty line.
    lines: Vec<(usize, Vec<&'a str>)>,
    cursor: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .filter_map(|(idx, raw)| {
                let body = raw.split('#').next().unwrap_or("");
                let tokens: Vec<&str> = body.split_whitespace().collect();
                (!tokens.is_empty()).then_some((idx + 1, tokens))
            })
            .collect();
        Self { lines, cursor: 0 }
    }

    fn peek(&self) -> Option<&(usize, Vec<&'a str>)> {
        self.lines.get(self.cursor)
    }

    fn next_line(&mut self, what: &str) -> Result<&(usize, Vec<&'a str>)> {
        let line = self.lines.get(self.cursor).ok_or_else(|| Error::Parse {
            line: self.lines.last().map_or(1, |(num, _)| *num),
            message: format!("unexpected end of input, expected {what}"),
        })?;
        self.cursor += 1;
        Ok(line)
    }

    fn finish(&self) -> Result<()> {
        match self.lines.get(self.cursor) {
            Some((num, _)) => Err(Error::Parse {
                line: *num,
                message: "trailing content after data".into(),
            }),
            None => Ok(()),
        }
    }
}

fn parse_dim(token: &str, line: usize, what: &str) -> Result<usize> {
    let value: usize = token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("{what} must be a positive integer, got '{token}'"),
    })?;
    if value == 0 || value > MAX_DIM {
        return Err(Error::Parse {
            line,
            message: format!("{what} out of range: {value}"),
        });
    }
    Ok(value)
}

fn parse_row(tokens: &mut Tokens<'_>, q: usize, what: &str) -> Result<Vec<f64>> {
    let (num, raw) = tokens.next_line(what)?;
    if raw.len() != q {
        return Err(Error::Parse {
            line: *num,
            message: format!("expected {q} values in {what}, found {}", raw.len()),
        });
    }
    raw.iter()
        .map(|t| {
            let v: f64 = t.parse().map_err(|_| Error::Parse {
                line: *num,
                message: format!("invalid number '{t}'"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: *num,
                    message: format!("non-finite value '{t}'"),
                });
            }
            Ok(v)
        })
        .collect()
}

fn parse_block(tokens: &mut Tokens<'_>, p: usize, q: usize, what: &str) -> Result<DMatrix<f64>> {
    let mut rows = Vec::with_capacity(p);
    for _ in 0..p {
        rows.push(parse_row(tokens, q, what)?);
    }
    Ok(DMatrix::from_fn(p, q, |i, j| rows[i][j]))
}

/// Parse a dataset from the text format.
pub fn parse_dataset(text: &str) -> Result<MatrixDataset> {
    let mut tokens = Tokens::new(text);
    let (line, header) = {
        let (num, raw) = tokens.next_line("header 'n p q'")?;
        (*num, raw.clone())
    };
    if header.len() != 3 {
        return Err(Error::Parse {
            line,
            message: format!("header must be 'n p q', found {} tokens", header.len()),
        });
    }
    let n = parse_dim(header[0], line, "n")?;
    let p = parse_dim(header[1], line, "p")?;
    let q = parse_dim(header[2], line, "q")?;
    if n.saturating_mul(p).saturating_mul(q) > MAX_TOTAL {
        return Err(Error::Parse {
            line,
            message: "dataset too large".into(),
        });
    }

    let mean = match tokens.peek() {
        Some((_, raw)) if raw.len() == 1 && raw[0] == "mean" => {
            tokens.next_line("mean keyword")?;
            Some(parse_block(&mut tokens, p, q, "mean row")?)
        }
        _ => None,
    };

    let mut observations = Vec::with_capacity(n);
    for _ in 0..n {
        observations.push(parse_block(&mut tokens, p, q, "observation row")?);
    }
    tokens.finish()?;

    match mean {
        Some(m) => MatrixDataset::with_known_mean(observations, m),
        None => MatrixDataset::new(observations),
    }
}

/// Serialize a dataset to the text format.
pub fn serialize_dataset(data: &MatrixDataset) -> String {
    let mut out = String::new();
    out.push_str(&format!("{} {} {}\n", data.n(), data.p(), data.q()));
    if let Some(mean) = data.known_mean() {
        out.push_str("mean\n");
        push_matrix(&mut out, mean);
    }
    for x in data.observations() {
        out.push('\n');
        push_matrix(&mut out, x);
    }
    out
}

/// Parse one matrix with a `rows cols` header.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut tokens = Tokens::new(text);
    let (line, header) = {
        let (num, raw) = tokens.next_line("header 'rows cols'")?;
        (*num, raw.clone())
    };
    if header.len() != 2 {
        return Err(Error::Parse {
            line,
            message: format!("header must be 'rows cols', found {} tokens", header.len()),
        });
    }
    let rows = parse_dim(header[0], line, "rows")?;
    let cols = parse_dim(header[1], line, "cols")?;
    if rows.saturating_mul(cols) > MAX_TOTAL {
        return Err(Error::Parse {
            line,
            message: "matrix too large".into(),
        });
    }
    let m = parse_block(&mut tokens, rows, cols, "matrix row")?;
    tokens.finish()?;
    Ok(m)
}

/// Serialize one matrix with its `rows cols` header.
pub fn serialize_matrix(m: &DMatrix<f64>) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    push_matrix(&mut out, m);
    out
}

fn push_matrix(out: &mut String, m: &DMatrix<f64>) {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
}
