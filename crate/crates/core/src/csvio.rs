//! Plain CSV with `# key=value` metadata lines and full-precision floats.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fem::{BasisKind, SpaceKey};
use crate::field::SampleMatrix;

/// Format with 17 significant digits so values round-trip exactly.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn matrix_to_csv(m: &DMatrix<f64>, meta: Option<&[(&str, String)]>) -> String {
    let mut s = String::new();
    if let Some(meta) = meta {
        for (k, v) in meta {
            s.push_str(&format!("# {k}={v}\n"));
        }
    }
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|&x| fmt(x)).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

/// Parse a numeric CSV; returns the metadata lines and the matrix.
pub fn parse_matrix_csv(text: &str) -> Result<(BTreeMap<String, String>, DMatrix<f64>)> {
    let mut meta = BTreeMap::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: `{}`: {e}", lineno + 1, f.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse(format!(
                    "line {}: expected {} fields, found {}",
                    lineno + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok((meta, DMatrix::from_row_slice(rows.len(), ncols, &flat)))
}

pub fn sample_meta(s: &SampleMatrix) -> Vec<(&'static str, String)> {
    vec![
        ("seed", s.seed.to_string()),
        ("model", s.model_name.clone()),
        ("n", s.space.n.to_string()),
        ("d", s.space.dim.to_string()),
        ("basis", s.space.basis.as_str().to_string()),
        ("l_gen", s.l_gen.to_string()),
    ]
}

pub fn write_samples(path: &Path, s: &SampleMatrix) -> Result<()> {
    let meta = sample_meta(s);
    std::fs::write(path, matrix_to_csv(&s.data, Some(&meta)))?;
    Ok(())
}

fn meta_field<T: std::str::FromStr>(meta: &BTreeMap<String, String>, key: &str) -> Result<T> {
    meta.get(key)
        .ok_or_else(|| Error::Parse(format!("sample file lacks `# {key}=` header")))?
        .parse()
        .map_err(|_| Error::Parse(format!("bad `{key}` header value")))
}

pub fn parse_samples(text: &str) -> Result<SampleMatrix> {
    let (meta, data) = parse_matrix_csv(text)?;
    let basis: BasisKind = meta_field::<String>(&meta, "basis")?.parse()?;
    let space = SpaceKey {
        dim: meta_field(&meta, "d")?,
        n: meta_field(&meta, "n")?,
        basis,
    };
    let expected = (space.n + 1).pow(space.dim as u32);
    if data.ncols() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: data.ncols(),
        });
    }
    Ok(SampleMatrix {
        data,
        seed: meta_field(&meta, "seed")?,
        l_gen: meta_field(&meta, "l_gen")?,
        model_name: meta_field(&meta, "model")?,
        space,
    })
}

pub fn read_samples(path: &Path) -> Result<SampleMatrix> {
    parse_samples(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let m = DMatrix::from_row_slice(2, 3, &[0.1, 1.0 / 3.0, -2.5e-300, 1e300, std::f64::consts::PI, 0.0]);
        let (_, back) = parse_matrix_csv(&matrix_to_csv(&m, None)).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(parse_matrix_csv("1,2\n3\n").is_err());
        assert!(parse_matrix_csv("1,x\n").is_err());
    }
}
