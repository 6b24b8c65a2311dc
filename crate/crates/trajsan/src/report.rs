//! CSV reports. Column layouts are listed in the README.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountRow {
    pub subset: usize,
    pub max_len: usize,
    pub queries: usize,
    pub epsilon: Option<f64>,
    pub height: u32,
    pub variant: Option<String>,
    pub sanity: f64,
    pub avg_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FspRow {
    pub k: usize,
    pub epsilon: Option<f64>,
    pub height: Option<u32>,
    pub variant: Option<String>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_drops: usize,
    /// Either side had fewer than k patterns.
    pub short: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthRow {
    pub length: usize,
    pub records: u64,
}

pub fn write_rows<S: Serialize, W: Write>(rows: &[S], out: W, header: bool) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(header).from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes to `path`, or stdout when absent. With `append` an existing
/// non-empty file keeps its header and gains rows only.
pub fn emit<S: Serialize>(rows: &[S], path: Option<&Path>, append: bool) -> Result<()> {
    let to_io = |p: &Path, e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => CliError::io(p, e),
        other => CliError::io(p, std::io::Error::other(format!("{other:?}"))),
    };
    match path {
        None => {
            let stdout = std::io::stdout();
            write_rows(rows, stdout.lock(), true).map_err(|e| to_io(Path::new("<stdout>"), e))
        }
        Some(p) => {
            let has_rows = append && std::fs::metadata(p).map(|m| m.len() > 0).unwrap_or(false);
            let file = OpenOptions::new()
                .write(true)
                .create(true)
                .append(append)
                .truncate(!append)
                .open(p)
                .map_err(|e| CliError::io(p, e))?;
            write_rows(rows, file, !has_rows).map_err(|e| to_io(p, e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optional_tags_are_blank() {
        let rows = [FspRow {
            k: 50,
            epsilon: None,
            height: Some(12),
            variant: Some("full".into()),
            true_positives: 48,
            false_positives: 2,
            false_drops: 2,
            short: false,
        }];
        let mut out = Vec::new();
        write_rows(&rows, &mut out, true).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "k,epsilon,height,variant,true_positives,false_positives,false_drops,short\n50,,12,full,48,2,2,false\n"
        );
    }

    #[test]
    fn append_keeps_one_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let row = |length| LengthRow { length, records: 1 };
        emit(&[row(1)], Some(&p), true).unwrap();
        emit(&[row(2)], Some(&p), true).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "length,records\n1,1\n2,1\n");
        emit(&[row(3)], Some(&p), false).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "length,records\n3,1\n");
    }
}
