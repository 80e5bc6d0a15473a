// SPDX-License-Identifier: MIT OR Apache-2.0

//! CSV input and output for raw samples.

use std::io::Write;
use std::path::Path;

use strucbreak::design::RawSample;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("column {0:?} is not in the header")]
    ColumnMissing(String),
    /// `row` counts data rows from 1, the header excluded.
    #[error("non-numeric or missing value at row {row}, column {col:?}")]
    NonNumericCell { row: usize, col: String },
    #[error("malformed CSV: {0}")]
    Malformed(String),
}

/// Read the response and covariate columns, in the order given.
pub fn ingest_csv(
    path: &Path,
    response: &str,
    covariates: &[String],
) -> Result<RawSample, IngestError> {
    if !path.is_file() {
        return Err(IngestError::FileNotFound(path.display().to_string()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| IngestError::Malformed(e.to_string()))?;
    let header = reader
        .headers()
        .map_err(|e| IngestError::Malformed(e.to_string()))?
        .clone();
    let index = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::ColumnMissing(name.to_string()))
    };
    let cols: Vec<(String, usize)> = std::iter::once(response)
        .chain(covariates.iter().map(String::as_str))
        .map(|name| index(name).map(|i| (name.to_string(), i)))
        .collect::<Result<_, _>>()?;

    let mut values: Vec<Vec<f64>> = vec![Vec::new(); cols.len()];
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| IngestError::Malformed(e.to_string()))?;
        for (j, (name, i)) in cols.iter().enumerate() {
            let cell = record.get(*i).unwrap_or("");
            let v = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| IngestError::NonNumericCell {
                    row: r + 1,
                    col: name.clone(),
                })?;
            values[j].push(v);
        }
    }
    let y = values.remove(0);
    if y.is_empty() {
        return Err(IngestError::Malformed("no data rows".into()));
    }
    RawSample::from_columns(y, &values).map_err(|e| IngestError::Malformed(e.to_string()))
}

/// Write a sample with 17 significant digits so that re-reading it
/// reproduces every value exactly.
pub fn write_csv<W: Write>(
    out: W,
    sample: &RawSample,
    response: &str,
    covariates: &[String],
) -> std::io::Result<()> {
    assert_eq!(covariates.len(), sample.k(), "one name per covariate");
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![response.to_string()];
    header.extend(covariates.iter().cloned());
    w.write_record(&header)?;
    for t in 0..sample.n() {
        let mut row = vec![format!("{:.16e}", sample.y[t])];
        row.extend((0..sample.k()).map(|j| format!("{:.16e}", sample.z[(t, j)])));
        w.write_record(&row)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn reads_three_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "y,z1,z2\n1,2,3\n4,5,6\n7,8,9\n");
        let s = ingest_csv(&p, "y", &["z1".into(), "z2".into()]).unwrap();
        assert_eq!((s.n(), s.k()), (3, 2));
        assert_eq!(s.y, vec![1.0, 4.0, 7.0]);
        assert_eq!(s.z[(2, 1)], 9.0);
    }

    #[test]
    fn keeps_requested_column_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "z1,y,z2\n1,2,3\n");
        let s = ingest_csv(&p, "y", &["z2".into(), "z1".into()]).unwrap();
        assert_eq!(s.y, vec![2.0]);
        assert_eq!((s.z[(0, 0)], s.z[(0, 1)]), (3.0, 1.0));
    }

    #[test]
    fn reports_bad_cells_by_row() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = String::from("y,z1\n");
        for i in 1..=9 {
            if i == 7 {
                body.push_str("1.0,\n");
            } else {
                body.push_str(&format!("{i},{i}\n"));
            }
        }
        let p = write(&dir, "a.csv", &body);
        assert_eq!(
            ingest_csv(&p, "y", &["z1".into()]).unwrap_err(),
            IngestError::NonNumericCell {
                row: 7,
                col: "z1".into()
            }
        );
        let p = write(&dir, "b.csv", "y,z1\n1,abc\n");
        assert!(matches!(
            ingest_csv(&p, "y", &["z1".into()]),
            Err(IngestError::NonNumericCell { row: 1, .. })
        ));
    }

    #[test]
    fn missing_file_and_column() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            ingest_csv(&dir.path().join("nope.csv"), "y", &[]),
            Err(IngestError::FileNotFound(_))
        ));
        let p = write(&dir, "a.csv", "y,z1\n1,2\n");
        assert_eq!(
            ingest_csv(&p, "y", &["z9".into()]).unwrap_err(),
            IngestError::ColumnMissing("z9".into())
        );
    }
}
