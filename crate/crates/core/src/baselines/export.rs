//! Sample files: CSV with one row per draw, or a raw little-endian `f64`
//! blob (row-major) with a JSON sidecar at `<blob>.json`.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSidecar {
    pub n: usize,
    pub d: usize,
    pub spec_hash: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub meta: serde_json::Value,
}

/// Writes `comment` lines (prefixed `# `), a header `x1,…,xd`, then rows.
pub fn write_sample_csv<W: Write>(w: W, sample: &Matrix, comment: &[String]) -> io::Result<()> {
    let mut w = BufWriter::new(w);
    for c in comment {
        writeln!(w, "# {c}")?;
    }
    let header: Vec<String> = (1..=sample.cols()).map(|k| format!("x{k}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for row in sample.iter_rows() {
        let mut first = true;
        for v in row {
            if !first {
                w.write_all(b",")?;
            }
            write!(w, "{v}")?;
            first = false;
        }
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Parses the output of [`write_sample_csv`].
pub fn read_sample_csv(text: &str) -> Result<Matrix> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header = lines.next().ok_or(Error::Empty("sample file"))?;
    let d = header.split(',').count();
    let mut data = Vec::new();
    let mut n = 0;
    for (i, line) in lines.enumerate() {
        let before = data.len();
        for f in line.split(',') {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParameter {
                    name: format!("row {}", i + 1),
                    reason: format!("not a number: {f:?}"),
                })?;
            data.push(v);
        }
        if data.len() - before != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: data.len() - before,
            });
        }
        n += 1;
    }
    Matrix::new(n, d, data)
}

pub fn sidecar_path(blob: &Path) -> PathBuf {
    let mut s = blob.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_sample_blob(path: &Path, sample: &Matrix, sidecar: &SampleSidecar) -> Result<()> {
    if sidecar.n != sample.rows() || sidecar.d != sample.cols() {
        return Err(Error::DimensionMismatch {
            expected: sample.rows() * sample.cols(),
            got: sidecar.n * sidecar.d,
        });
    }
    let mut bytes = Vec::with_capacity(8 * sample.data().len());
    for v in sample.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    fs::write(sidecar_path(path), serde_json::to_vec_pretty(sidecar)?)?;
    Ok(())
}

pub fn read_sample_blob(path: &Path) -> Result<(Matrix, SampleSidecar)> {
    let sidecar: SampleSidecar = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
    let bytes = fs::read(path)?;
    if bytes.len() != 8 * sidecar.n * sidecar.d {
        return Err(Error::DimensionMismatch {
            expected: 8 * sidecar.n * sidecar.d,
            got: bytes.len(),
        });
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((Matrix::new(sidecar.n, sidecar.d, data)?, sidecar))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let m = Matrix::new(2, 3, vec![0.1, -2.5e-300, 3.0, 1e300, 0.0, -7.25]).unwrap();
        let mut buf = Vec::new();
        write_sample_csv(&mut buf, &m, &["a".into()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# a\nx1,x2,x3\n"));
        assert_eq!(read_sample_csv(&text).unwrap(), m);
    }

    #[test]
    fn blob_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.bin");
        let m = Matrix::new(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.5]).unwrap();
        let side = SampleSidecar {
            n: 3,
            d: 2,
            spec_hash: "abc".into(),
            seed: 4,
            meta: serde_json::Value::Null,
        };
        write_sample_blob(&p, &m, &side).unwrap();
        let (back, s) = read_sample_blob(&p).unwrap();
        assert_eq!(back, m);
        assert_eq!(s, side);
    }
}
