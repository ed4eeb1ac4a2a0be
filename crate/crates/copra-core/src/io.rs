//! CSV ingestion for the CLI path: one row per matrix row, with complex
//! entries either as `re+imj` tokens or as paired re,im columns.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{CopraError, Result};

/// How complex values are laid out in a CSV file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComplexFormat {
    /// Plain real values.
    Real,
    /// Each entry spans two adjacent columns: re, im.
    Paired,
    /// Each entry is a single token like `1.5-2.25j`.
    Suffix,
}

impl ComplexFormat {
    pub fn parse(s: &str) -> Result<ComplexFormat> {
        match s.trim().to_ascii_lowercase().as_str() {
            "real" => Ok(ComplexFormat::Real),
            "paired" => Ok(ComplexFormat::Paired),
            "suffix" => Ok(ComplexFormat::Suffix),
            other => Err(CopraError::InvalidInput(format!(
                "unknown complex format '{other}' (expected real, paired, or suffix)"
            ))),
        }
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> CopraError {
    CopraError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Parse a `re+imj` token (also accepts pure-real and pure-imaginary forms).
fn parse_suffix_token(tok: &str) -> Option<Complex64> {
    let t = tok.trim();
    if t.is_empty() {
        return None;
    }
    if let Some(body) = t.strip_suffix(['j', 'i']) {
        // split at the sign that separates the real part from the imaginary
        // part, skipping a leading sign and exponent signs
        let bytes = body.as_bytes();
        let mut split = None;
        for k in (1..bytes.len()).rev() {
            let c = bytes[k];
            if (c == b'+' || c == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
                split = Some(k);
                break;
            }
        }
        match split {
            Some(k) => {
                let re: f64 = body[..k].parse().ok()?;
                let im_str = &body[k..];
                let im: f64 = if im_str == "+" {
                    1.0
                } else if im_str == "-" {
                    -1.0
                } else {
                    im_str.parse().ok()?
                };
                Some(Complex64::new(re, im))
            }
            None => {
                // pure imaginary
                let im: f64 = if body.is_empty() { 1.0 } else { body.parse().ok()? };
                Some(Complex64::new(0.0, im))
            }
        }
    } else {
        t.parse::<f64>().ok().map(|re| Complex64::new(re, 0.0))
    }
}

fn parse_row(
    path: &Path,
    line_no: usize,
    line: &str,
    format: ComplexFormat,
) -> Result<Vec<Complex64>> {
    let tokens: Vec<&str> = line.split(',').map(str::trim).collect();
    match format {
        ComplexFormat::Real => tokens
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .map(|v| Complex64::new(v, 0.0))
                    .map_err(|_| parse_err(path, line_no, format!("bad real value '{t}'")))
            })
            .collect(),
        ComplexFormat::Suffix => tokens
            .iter()
            .map(|t| {
                parse_suffix_token(t)
                    .ok_or_else(|| parse_err(path, line_no, format!("bad complex value '{t}'")))
            })
            .collect(),
        ComplexFormat::Paired => {
            if tokens.len() % 2 != 0 {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("paired format needs an even column count, got {}", tokens.len()),
                ));
            }
            tokens
                .chunks_exact(2)
                .map(|pair| {
                    let re = pair[0].parse::<f64>().map_err(|_| {
                        parse_err(path, line_no, format!("bad real column '{}'", pair[0]))
                    })?;
                    let im = pair[1].parse::<f64>().map_err(|_| {
                        parse_err(path, line_no, format!("bad imaginary column '{}'", pair[1]))
                    })?;
                    Ok(Complex64::new(re, im))
                })
                .collect()
        }
    }
}

/// Read a matrix from CSV, one row per line.
pub fn read_matrix_csv(path: &Path, format: ComplexFormat) -> Result<DMatrix<Complex64>> {
    let text = std::fs::read_to_string(path).map_err(|e| CopraError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_row(path, i + 1, line, format)?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(
                    path,
                    i + 1,
                    format!("ragged row: {} entries, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CopraError::InvalidInput(format!(
            "no data rows in {}",
            path.display()
        )));
    }
    let (m, n) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(m, n, |i, j| rows[i][j]))
}

/// Read a vector from CSV: either one value per line or a single line.
pub fn read_vector_csv(path: &Path, format: ComplexFormat) -> Result<DVector<Complex64>> {
    let mat = read_matrix_csv(path, format)?;
    let (m, n) = mat.shape();
    if n == 1 {
        Ok(DVector::from_iterator(m, mat.iter().copied()))
    } else if m == 1 {
        Ok(DVector::from_iterator(n, mat.iter().copied()))
    } else {
        Err(CopraError::InvalidInput(format!(
            "{} is {m}x{n}, expected a vector",
            path.display()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_real_matrix() {
        let f = write_tmp("1.0, 2.0\n3.0, 4.0\n");
        let m = read_matrix_csv(f.path(), ComplexFormat::Real).unwrap();
        assert_eq!(m.shape(), (2, 2));
        assert_eq!(m[(1, 0)].re, 3.0);
    }

    #[test]
    fn reads_paired_complex() {
        let f = write_tmp("1.0,2.0,3.0,-4.0\n");
        let m = read_matrix_csv(f.path(), ComplexFormat::Paired).unwrap();
        assert_eq!(m.shape(), (1, 2));
        assert_eq!(m[(0, 0)], Complex64::new(1.0, 2.0));
        assert_eq!(m[(0, 1)], Complex64::new(3.0, -4.0));
    }

    #[test]
    fn reads_suffix_complex() {
        let f = write_tmp("1.5+2.25j, -0.5-1e-3j\n3j, 7.0\n");
        let m = read_matrix_csv(f.path(), ComplexFormat::Suffix).unwrap();
        assert_eq!(m[(0, 0)], Complex64::new(1.5, 2.25));
        assert_relative_eq!(m[(0, 1)].im, -1e-3);
        assert_eq!(m[(1, 0)], Complex64::new(0.0, 3.0));
        assert_eq!(m[(1, 1)], Complex64::new(7.0, 0.0));
    }

    #[test]
    fn suffix_handles_exponent_signs() {
        let f = write_tmp("1.5e-2+2e+3j\n");
        let m = read_matrix_csv(f.path(), ComplexFormat::Suffix).unwrap();
        assert_eq!(m[(0, 0)], Complex64::new(0.015, 2000.0));
    }

    #[test]
    fn vector_row_or_column() {
        let f = write_tmp("1.0\n2.0\n3.0\n");
        let v = read_vector_csv(f.path(), ComplexFormat::Real).unwrap();
        assert_eq!(v.len(), 3);
        let f = write_tmp("1.0,2.0,3.0\n");
        let v = read_vector_csv(f.path(), ComplexFormat::Real).unwrap();
        assert_eq!(v.len(), 3);
        let f = write_tmp("1,2\n3,4\n");
        assert!(read_vector_csv(f.path(), ComplexFormat::Real).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        let f = write_tmp("1.0,abc\n");
        assert!(read_matrix_csv(f.path(), ComplexFormat::Real).is_err());
        let f = write_tmp("1.0,2.0\n3.0\n");
        assert!(read_matrix_csv(f.path(), ComplexFormat::Real).is_err());
        let f = write_tmp("1.0,2.0,3.0\n");
        assert!(read_matrix_csv(f.path(), ComplexFormat::Paired).is_err());
        let f = write_tmp("");
        assert!(read_matrix_csv(f.path(), ComplexFormat::Real).is_err());
    }
}
