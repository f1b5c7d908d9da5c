//! CSV input/output for covariates, responses, labels and factors.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::dc::IterateLog;
use crate::error::{Error, Result};

/// Reads a numeric table with one sample per row. A first row containing any
/// non-numeric field is treated as a header and skipped.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let rows = read_numeric_rows(path)?;
    let ncols = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Reads integer labels from the first column of a CSV file.
pub fn read_labels_csv(path: &Path) -> Result<Vec<i64>> {
    let shown = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut labels = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let field = rec.get(0).unwrap_or("");
        match field.parse::<i64>() {
            Ok(v) => labels.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(Error::Parse {
                    path: shown,
                    row: i + 1,
                    column: 1,
                    message: format!("'{field}' is not an integer label"),
                })
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::invalid(format!("{shown}: no labels found")));
    }
    Ok(labels)
}

fn read_numeric_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let shown = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, usize>> = rec
            .iter()
            .enumerate()
            .map(|(j, f)| f.parse::<f64>().map_err(|_| j))
            .collect();
        if i == 0 && parsed.iter().any(|v| v.is_err()) {
            continue;
        }
        let mut row = Vec::with_capacity(parsed.len());
        for (j, v) in parsed.into_iter().enumerate() {
            match v {
                Ok(x) if x.is_finite() => row.push(x),
                _ => {
                    return Err(Error::Parse {
                        path: shown,
                        row: i + 1,
                        column: j + 1,
                        message: format!("'{}' is not a finite number", &rec[j]),
                    })
                }
            }
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    path: shown,
                    row: i + 1,
                    column: row.len().min(first.len()) + 1,
                    message: format!("expected {} fields, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::invalid(format!("{shown}: no numeric rows found")));
    }
    Ok(rows)
}

/// Writes a matrix as headerless CSV, one row per line.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    for i in 0..m.nrows() {
        writer.write_record(m.row(i).iter().map(|v| format!("{v:e}")))?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes one JSON object per outer iteration.
pub fn write_log_jsonl(path: &Path, log: &IterateLog) -> Result<()> {
    let mut file = File::create(path)?;
    file.write_all(log.to_json_lines().as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn header_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        fs::write(&p, "a,b\n1,2\n3.5,-4e-1\n").unwrap();
        let m = read_matrix_csv(&p).unwrap();
        assert_eq!(m.shape(), (2, 2));
        assert_eq!(m[(1, 1)], -0.4);
    }

    #[test]
    fn bad_cell_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        fs::write(&p, "1,2\n3,oops\n").unwrap();
        match read_matrix_csv(&p) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (2, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        fs::write(&p, "1,2\n3\n").unwrap();
        assert!(matches!(
            read_matrix_csv(&p),
            Err(Error::Parse { row: 2, .. })
        ));
    }

    #[test]
    fn labels_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("y.csv");
        fs::write(&p, "label\n0\n1\n1\n").unwrap();
        assert_eq!(read_labels_csv(&p).unwrap(), vec![0, 1, 1]);

        let m = DMatrix::from_row_slice(2, 3, &[0.1, -2.0, 3.25, 1e-300, 7.0, 0.0]);
        let q = dir.path().join("m.csv");
        write_matrix_csv(&q, &m).unwrap();
        assert_eq!(read_matrix_csv(&q).unwrap(), m);
    }
}
