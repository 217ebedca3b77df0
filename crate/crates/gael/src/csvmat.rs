//! Plain-text CSV serialization for real and complex matrices.
//!
//! Real matrices are written one row per line with 17 significant digits,
//! enough to round-trip an `f64` exactly. Complex matrices interleave real
//! and imaginary parts column-wise: `re00,im00,re01,im01,...`.

use std::fs;
use std::path::Path;

use crate::moments::{CMat, RMat};
use crate::{GaelError, Result};

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn real_to_string(m: &RMat) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn complex_to_string(m: &CMat) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .flat_map(|j| [fmt(m[(i, j)].re), fmt(m[(i, j)].im)])
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_real(path: &Path, m: &RMat) -> Result<()> {
    fs::write(path, real_to_string(m))?;
    Ok(())
}

pub fn write_complex(path: &Path, m: &CMat) -> Result<()> {
    fs::write(path, complex_to_string(m))?;
    Ok(())
}

fn parse_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|e| GaelError::CsvParse(format!("line {}: {e}", lineno + 1)))
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() as Option<&Vec<f64>> {
            if first.len() != row.len() {
                return Err(GaelError::CsvParse(format!(
                    "line {}: expected {} fields, got {}",
                    lineno + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(GaelError::CsvParse("empty matrix".into()));
    }
    Ok(rows)
}

pub fn real_from_string(text: &str) -> Result<RMat> {
    let rows = parse_rows(text)?;
    let (nr, nc) = (rows.len(), rows[0].len());
    Ok(RMat::from_fn(nr, nc, |i, j| rows[i][j]))
}

pub fn complex_from_string(text: &str) -> Result<CMat> {
    let rows = parse_rows(text)?;
    if rows[0].len() % 2 != 0 {
        return Err(GaelError::CsvParse(
            "complex matrix needs an even field count per row".into(),
        ));
    }
    let (nr, nc) = (rows.len(), rows[0].len() / 2);
    Ok(CMat::from_fn(nr, nc, |i, j| {
        num_complex::Complex64::new(rows[i][2 * j], rows[i][2 * j + 1])
    }))
}

pub fn read_real(path: &Path) -> Result<RMat> {
    real_from_string(&fs::read_to_string(path)?)
}

pub fn read_complex(path: &Path) -> Result<CMat> {
    complex_from_string(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn real_round_trip_is_exact() {
        let m = RMat::from_row_slice(2, 3, &[1.0 / 3.0, -2.5e-17, 0.0, 1e300, -7.125, 0.1]);
        let back = real_from_string(&real_to_string(&m)).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn complex_round_trip_is_exact() {
        let m = CMat::from_fn(3, 2, |i, j| {
            Complex64::new(i as f64 / 7.0, -(j as f64) * 1.0e-13)
        });
        let back = complex_from_string(&complex_to_string(&m)).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(real_from_string("1.0,2.0\n3.0\n").is_err());
    }

    #[test]
    fn deterministic_output() {
        let m = RMat::from_row_slice(1, 2, &[0.1, 0.2]);
        assert_eq!(real_to_string(&m), real_to_string(&m));
    }
}
