//! Comma-separated numeric tables with a header row. Quoting is not
//! supported: a `"` anywhere is reported as an error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    /// Feature column names, label column excluded.
    pub header: Vec<String>,
    pub matrix: Matrix,
    pub labels: Option<Vec<String>>,
}

pub fn default_feature_names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("f{i}")).collect()
}

/// Reads a numeric CSV. When `label_column` names a header field, that
/// column is returned verbatim as labels and excluded from the matrix.
pub fn read_csv(path: &Path, label_column: Option<&str>) -> Result<CsvTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .quoting(false)
        .flexible(false)
        .from_reader(file);

    let header_rec = reader.headers().map_err(|e| csv_error(path, &e))?.clone();
    if header_rec.iter().any(|h| h.contains('"')) {
        return Err(Error::parse(path, 1, "quoted fields are not supported"));
    }
    let label_idx = match label_column {
        Some(name) => Some(
            header_rec
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::parse(path, 1, format!("no column named {name:?}")))?,
        ),
        None => None,
    };
    let header: Vec<String> = header_rec
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != label_idx)
        .map(|(_, h)| h.trim().to_string())
        .collect();

    let mut data = Vec::new();
    let mut labels = label_idx.map(|_| Vec::new());
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, &e))?;
        let line = rec.position().map_or(0, |p| p.line());
        for (i, cell) in rec.iter().enumerate() {
            if Some(i) == label_idx {
                labels.as_mut().expect("label column").push(cell.trim().to_string());
                continue;
            }
            if cell.contains('"') {
                return Err(Error::parse(path, line, "quoted fields are not supported"));
            }
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::parse(
                    path,
                    line,
                    format!(
                        "non-numeric value {cell:?} in column {:?}",
                        header_rec.get(i).unwrap_or("?")
                    ),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::parse(path, line, format!("non-finite value {cell:?}")));
            }
            data.push(v);
        }
        rows += 1;
    }
    let matrix = Matrix::from_vec(rows, header.len(), data)?;
    Ok(CsvTable { header, matrix, labels })
}

fn csv_error(path: &Path, e: &csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            Error::parse(path, line, format!("ragged row: {len} fields, expected {expected_len}"))
        }
        csv::ErrorKind::Io(io) => Error::parse(path, line, io.to_string()),
        _ => Error::parse(path, line, e.to_string()),
    }
}

pub fn write_matrix(path: &Path, header: &[String], m: &Matrix) -> Result<()> {
    if header.len() != m.cols() {
        return Err(Error::Contract(format!(
            "{} header names for {} columns",
            header.len(),
            m.cols()
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for r in 0..m.rows() {
        let mut first = true;
        for v in m.row(r) {
            if !first {
                w.write_all(b",").map_err(io)?;
            }
            first = false;
            write!(w, "{v}").map_err(io)?;
        }
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut text = String::from("label\n");
    for l in labels {
        text.push_str(&l.to_string());
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a single-column `label` file of class indices.
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let table = read_csv_strings(path)?;
    table
        .into_iter()
        .map(|(line, cell)| {
            cell.parse::<usize>()
                .map_err(|_| Error::parse(path, line, format!("label {cell:?} is not a class index")))
        })
        .collect()
}

fn read_csv_strings(path: &Path) -> Result<Vec<(u64, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .quoting(false)
        .from_reader(file);
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, &e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 1 {
            return Err(Error::parse(path, line, "expected a single label column"));
        }
        out.push((line, rec[0].trim().to_string()));
    }
    Ok(out)
}

/// Maps arbitrary label strings to class indices. Nonnegative integer labels
/// keep their value; anything else is numbered in sorted order of the
/// distinct strings. Returns the indices and the class names.
pub fn encode_labels(raw: &[String]) -> (Vec<usize>, Vec<String>) {
    if let Some(ints) = raw.iter().map(|s| s.parse::<usize>().ok()).collect::<Option<Vec<_>>>() {
        let max = ints.iter().max().map_or(0, |m| m + 1);
        return (ints, (0..max).map(|i| i.to_string()).collect());
    }
    let mut classes: Vec<String> = raw.to_vec();
    classes.sort();
    classes.dedup();
    let idx = raw
        .iter()
        .map(|s| classes.binary_search(s).expect("class present"))
        .collect();
    (idx, classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn reads_small_table() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "a,b\n1,2\n3,4\n");
        let t = read_csv(&p, None).unwrap();
        assert_eq!(t.header, vec!["a", "b"]);
        assert_eq!(t.matrix, Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]));
    }

    #[test]
    fn label_column_is_split_off() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "x,class,y\n1,ctl,2\n3,trt,4\n");
        let t = read_csv(&p, Some("class")).unwrap();
        assert_eq!(t.header, vec!["x", "y"]);
        assert_eq!(t.labels.as_deref(), Some(&["ctl".to_string(), "trt".to_string()][..]));
        let (idx, classes) = encode_labels(t.labels.as_ref().unwrap());
        assert_eq!(idx, vec![0, 1]);
        assert_eq!(classes, vec!["ctl", "trt"]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "bad.csv", "a,b\n1,2\n3,x\n");
        match read_csv(&p, None).unwrap_err() {
            Error::Parse { line, msg, .. } => {
                assert_eq!(line, 3);
                assert!(msg.contains("non-numeric"), "{msg}");
            }
            e => panic!("unexpected {e}"),
        }
        let p = write(&dir, "ragged.csv", "a,b\n1,2\n3\n");
        match read_csv(&p, None).unwrap_err() {
            Error::Parse { line, msg, .. } => {
                assert_eq!(line, 3);
                assert!(msg.contains("ragged"), "{msg}");
            }
            e => panic!("unexpected {e}"),
        }
        let p = write(&dir, "quoted.csv", "a,b\n\"1\",2\n");
        assert!(read_csv(&p, None).is_err());
    }

    #[test]
    fn roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let m = Matrix::from_rows(&[&[0.1, -2.5e-7, 3.0], &[1.0 / 3.0, 4.0, 5.5]]);
        let p = dir.path().join("m.csv");
        write_matrix(&p, &default_feature_names(3), &m).unwrap();
        let back = read_csv(&p, None).unwrap();
        assert!(back.matrix.bit_eq(&m));
        let lp = dir.path().join("labels.csv");
        write_labels(&lp, &[3, 0, 7]).unwrap();
        assert_eq!(read_labels(&lp).unwrap(), vec![3, 0, 7]);
    }
}
