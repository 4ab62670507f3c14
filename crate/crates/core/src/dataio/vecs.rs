//! `.fvecs` / `.ivecs`: each record is a little-endian `i32` dimension followed
//! by that many little-endian `f32` (or `i32`) values.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{format_err, Result};
use crate::types::FeatureMatrix;

/// Splits a vecs byte stream into `(dim, payload offset)` records of 4-byte elements.
fn scan_records(bytes: &[u8]) -> Result<(usize, Vec<usize>)> {
    let mut offsets = Vec::new();
    let mut dim: Option<usize> = None;
    let mut pos = 0usize;
    while pos < bytes.len() {
        if bytes.len() - pos < 4 {
            return Err(format_err(pos as u64, "truncated dimension header"));
        }
        let d = i32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap());
        if d < 0 {
            return Err(format_err(pos as u64, format!("negative dimension {d}")));
        }
        let d = d as usize;
        match dim {
            None => dim = Some(d),
            Some(prev) if prev != d => {
                return Err(format_err(
                    pos as u64,
                    format!("record dimension {d} differs from {prev}"),
                ))
            }
            _ => {}
        }
        let end = pos + 4 + 4 * d;
        if end > bytes.len() {
            return Err(format_err(
                pos as u64,
                format!("truncated record: needs {} bytes, {} left", 4 + 4 * d, bytes.len() - pos),
            ));
        }
        offsets.push(pos + 4);
        pos = end;
    }
    Ok((dim.unwrap_or(0), offsets))
}

pub fn parse_fvecs(bytes: &[u8]) -> Result<FeatureMatrix> {
    let (d, offsets) = scan_records(bytes)?;
    let mut data = Vec::with_capacity(offsets.len() * d);
    for off in &offsets {
        data.extend(
            bytes[*off..off + 4 * d]
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap()))),
        );
    }
    FeatureMatrix::new(offsets.len(), d, data)
}

pub fn parse_ivecs(bytes: &[u8]) -> Result<Vec<Vec<i32>>> {
    let (d, offsets) = scan_records(bytes)?;
    Ok(offsets
        .iter()
        .map(|off| {
            bytes[*off..off + 4 * d]
                .chunks_exact(4)
                .map(|c| i32::from_le_bytes(c.try_into().unwrap()))
                .collect()
        })
        .collect())
}

pub fn load_fvecs(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    parse_fvecs(&fs::read(path)?)
}

pub fn load_ivecs(path: impl AsRef<Path>) -> Result<Vec<Vec<i32>>> {
    parse_ivecs(&fs::read(path)?)
}

pub fn encode_fvecs(m: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(m.rows() * (4 + 4 * m.cols()));
    for row in m.iter_rows() {
        out.extend((m.cols() as i32).to_le_bytes());
        for &v in row {
            out.extend((v as f32).to_le_bytes());
        }
    }
    out
}

pub fn save_fvecs(path: impl AsRef<Path>, m: &FeatureMatrix) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&encode_fvecs(m))?;
    w.flush()?;
    Ok(())
}

pub fn save_ivecs(path: impl AsRef<Path>, rows: &[Vec<i32>]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for r in rows {
        w.write_all(&(r.len() as i32).to_le_bytes())?;
        for v in r {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use proptest::prelude::*;

    fn record(values: &[f32]) -> Vec<u8> {
        let mut b = (values.len() as i32).to_le_bytes().to_vec();
        for v in values {
            b.extend(v.to_le_bytes());
        }
        b
    }

    #[test]
    fn parses_two_records() {
        let mut bytes = record(&[1.0, 2.0]);
        bytes.extend(record(&[3.0, 4.0]));
        let m = parse_fvecs(&bytes).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 2));
        assert_eq!(m.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn empty_file_is_empty_matrix() {
        let m = parse_fvecs(&[]).unwrap();
        assert_eq!((m.rows(), m.cols()), (0, 0));
    }

    #[test]
    fn inconsistent_dimension_reports_offset() {
        let mut bytes = record(&[1.0, 2.0]);
        bytes.extend(record(&[3.0, 4.0, 5.0]));
        match parse_fvecs(&bytes) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn truncated_record_reports_offset() {
        let mut bytes = record(&[1.0, 2.0]);
        bytes.extend(record(&[3.0, 4.0]));
        bytes.truncate(bytes.len() - 2);
        assert!(matches!(parse_fvecs(&bytes), Err(Error::Format { offset: 12, .. })));
        assert!(matches!(parse_fvecs(&[1, 0]), Err(Error::Format { offset: 0, .. })));
    }

    proptest! {
        #[test]
        fn fvecs_round_trip_is_bitwise(rows in 0usize..20, cols in 1usize..9, vals in proptest::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), 0..200)) {
            let data: Vec<f64> = (0..rows * cols).map(|i| f64::from(*vals.get(i % vals.len().max(1)).unwrap_or(&0.5))).collect();
            let m = FeatureMatrix::new(rows, cols, data).unwrap();
            let back = parse_fvecs(&encode_fvecs(&m)).unwrap();
            if rows > 0 {
                prop_assert_eq!(back, m);
            } else {
                prop_assert_eq!(back.rows(), 0);
            }
        }
    }
}
