//! On-disk formats: E2FM feature matrices, label CSVs, metrics CSVs.
//!
//! E2FM layout: the 4 magic bytes `E2FM`, `n_samples` and `dim` as
//! little-endian `u32`, then `n_samples × dim` little-endian `f32` values,
//! row-major. Row `i` has sample id `i`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{FeatureSet, RoundMetrics};
use crate::error::{Error, Result};
use crate::harness::{Dataset, Split};
use crate::matrix::Matrix;

pub const FEATURE_MAGIC: &[u8; 4] = b"E2FM";
pub const METRICS_HEADER: &str =
    "round,test_acc,query_precision,u_hat,pool_size,calibrated_precision";

pub fn write_features(path: &Path, features: &FeatureSet) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let n = u32::try_from(features.len())
        .map_err(|_| Error::invalid("feature set", "too many rows"))?;
    let dim = u32::try_from(features.dim())
        .map_err(|_| Error::invalid("feature set", "too many columns"))?;
    w.write_all(FEATURE_MAGIC).map_err(io)?;
    w.write_all(&n.to_le_bytes()).map_err(io)?;
    w.write_all(&dim.to_le_bytes()).map_err(io)?;
    for &v in features.matrix().as_slice() {
        w.write_all(&(v as f32).to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_features(path: &Path) -> Result<FeatureSet> {
    let io = |e| Error::io(path, e);
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(io)?)
        .read_to_end(&mut bytes)
        .map_err(io)?;
    if bytes.len() < 4 || &bytes[..4] != FEATURE_MAGIC {
        return Err(Error::BadMagic { path: path.into() });
    }
    let format = |reason: String| Error::Format {
        path: path.into(),
        reason,
    };
    if bytes.len() < 12 {
        return Err(format("truncated header".into()));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = n
        .checked_mul(dim)
        .and_then(|c| c.checked_mul(4))
        .and_then(|c| c.checked_add(12))
        .ok_or_else(|| format("header sizes overflow".into()))?;
    if bytes.len() != expected {
        return Err(format(format!(
            "expected {expected} bytes for {n} x {dim} floats, found {}",
            bytes.len()
        )));
    }
    let data = bytes[12..]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    FeatureSet::from_matrix(Matrix::from_vec(n, dim, data)).map_err(|e| format(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LabelRecord {
    sample_id: u64,
    true_class: usize,
    split: Split,
}

pub fn write_labels(path: &Path, true_class: &[usize], split: &[Split]) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.into(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for (i, (&c, &s)) in true_class.iter().zip(split).enumerate() {
        w.serialize(LabelRecord {
            sample_id: i as u64,
            true_class: c,
            split: s,
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a label CSV covering rows `0..n_rows` exactly once, in any order.
pub fn read_labels(path: &Path, n_rows: usize) -> Result<(Vec<usize>, Vec<Split>)> {
    let csv_err = |source| Error::Csv {
        path: path.into(),
        source,
    };
    let format = |reason: String| Error::Format {
        path: path.into(),
        reason,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["sample_id", "true_class", "split"] {
        return Err(format("header must be sample_id,true_class,split".into()));
    }
    let mut classes: Vec<Option<(usize, Split)>> = vec![None; n_rows];
    for rec in r.deserialize::<LabelRecord>() {
        let rec = rec.map_err(csv_err)?;
        let id = rec.sample_id as usize;
        if id >= n_rows {
            return Err(format(format!(
                "sample_id {id} has no feature row (n = {n_rows})"
            )));
        }
        if classes[id].replace((rec.true_class, rec.split)).is_some() {
            return Err(format(format!("duplicate sample_id {id}")));
        }
    }
    let mut true_class = Vec::with_capacity(n_rows);
    let mut split = Vec::with_capacity(n_rows);
    for (i, entry) in classes.into_iter().enumerate() {
        let (c, s) = entry.ok_or_else(|| format(format!("sample_id {i} missing")))?;
        true_class.push(c);
        split.push(s);
    }
    Ok((true_class, split))
}

/// Loads an E2FM feature file and its label CSV.
pub fn load_dataset(features: &Path, labels: &Path, k: usize) -> Result<Dataset> {
    let fs = read_features(features)?;
    let (true_class, split) = read_labels(labels, fs.len())?;
    Dataset::new(fs, true_class, split, k)
}

/// Metrics rows as CSV text. Floats use the shortest round-trip form, so the
/// file reproduces the in-memory values exactly.
pub fn metrics_csv(rows: &[RoundMetrics]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for m in rows {
        out.push_str(&format!(
            "{},{:?},{:?},{},{},{:?}\n",
            m.round,
            m.test_accuracy,
            m.observed_precision,
            m.u_hat,
            m.pool_size,
            m.calibrated_precision
        ));
    }
    out
}

pub fn write_metrics(path: &Path, rows: &[RoundMetrics]) -> Result<()> {
    std::fs::write(path, metrics_csv(rows)).map_err(|e| Error::io(path, e))
}

pub fn read_metrics(path: &Path) -> Result<Vec<RoundMetrics>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let format = |reason: String| Error::Format {
        path: path.into(),
        reason,
    };
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err(format(format!("header must be {METRICS_HEADER}")));
    }
    lines
        .enumerate()
        .map(|(n, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || format(format!("line {}: malformed row", n + 2));
            if f.len() != 6 {
                return Err(bad());
            }
            Ok(RoundMetrics {
                round: f[0].parse().map_err(|_| bad())?,
                test_accuracy: f[1].parse().map_err(|_| bad())?,
                observed_precision: f[2].parse().map_err(|_| bad())?,
                u_hat: f[3].parse().map_err(|_| bad())?,
                pool_size: f[4].parse().map_err(|_| bad())?,
                calibrated_precision: f[5].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn features_round_trip(n in 1usize..20, dim in 1usize..6, seed in any::<u32>()) {
            let data: Vec<f64> = (0..n * dim)
                .map(|i| f64::from(((i as u32).wrapping_mul(2654435761) ^ seed) as f32 / 1e6))
                .collect();
            let fs = FeatureSet::from_matrix(Matrix::from_vec(n, dim, data)).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("f.e2fm");
            write_features(&p, &fs).unwrap();
            let back = read_features(&p).unwrap();
            prop_assert_eq!(back.matrix(), fs.matrix());
        }

        #[test]
        fn metrics_round_trip(acc in 0.0f64..1.0, prec in 0.0f64..1.0, u in 0usize..500) {
            let rows = vec![RoundMetrics {
                round: 3,
                test_accuracy: acc,
                observed_precision: prec,
                u_hat: u,
                pool_size: 77,
                calibrated_precision: 1.0 - prec,
            }];
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("m.csv");
            write_metrics(&p, &rows).unwrap();
            prop_assert_eq!(read_metrics(&p).unwrap(), rows);
        }
    }

    #[test]
    fn bad_magic_names_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.e2fm");
        std::fs::write(&p, b"NOPE\x01\0\0\0\x01\0\0\0\0\0\0\0").unwrap();
        let err = read_features(&p).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad.e2fm") && msg.contains("E2FM"), "{msg}");
    }

    #[test]
    fn truncated_payload() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("short.e2fm");
        let mut bytes = b"E2FM".to_vec();
        bytes.extend(2u32.to_le_bytes());
        bytes.extend(2u32.to_le_bytes());
        bytes.extend([0u8; 12]);
        std::fs::write(&p, bytes).unwrap();
        assert!(matches!(read_features(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn labels_round_trip_and_validate() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.csv");
        write_labels(&p, &[0, 3, 1], &[Split::Pool, Split::Test, Split::Pool]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("sample_id,true_class,split\n0,0,pool\n1,3,test\n"));
        let (c, s) = read_labels(&p, 3).unwrap();
        assert_eq!(c, vec![0, 3, 1]);
        assert_eq!(s[1], Split::Test);
        assert!(read_labels(&p, 4).is_err());
        assert!(read_labels(&p, 2).is_err());
    }
}
