//! Ingestion of external architecture-accuracy tables
//! (`arch_id,test_accuracy[,train_accuracy]` CSV).

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::kendall::kendall_tau;
use crate::space::{decode, ArchId, SpaceConfig};

/// Accuracy lookup keyed by architecture id. Entries are validated against a
/// space at ingestion time.
#[derive(Debug, Clone, Default)]
pub struct BenchmarkTable {
    rows: BTreeMap<ArchId, (f64, Option<f64>)>,
}

impl BenchmarkTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, arch: &ArchId) -> Option<(f64, Option<f64>)> {
        self.rows.get(arch).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ArchId, &(f64, Option<f64>))> {
        self.rows.iter()
    }
}

#[derive(Debug, Clone)]
pub struct IngestReport {
    pub table: BenchmarkTable,
    /// One entry per rejected or overwritten row, with its line number.
    pub warnings: Vec<String>,
}

pub fn ingest_benchmark(path: &Path, space: &SpaceConfig) -> Result<IngestReport> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("read {}: {e}", path.display())))?;
    ingest_benchmark_str(&text, space)
}

/// Parses the CSV, keeping valid rows and reporting the rest. Duplicate ids
/// resolve to the last occurrence, with a warning.
pub fn ingest_benchmark_str(text: &str, space: &SpaceConfig) -> Result<IngestReport> {
    space.validate()?;
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((_, l)) => break l.trim().trim_end_matches('\r'),
            None => return Err(Error::Io("benchmark file is empty".into())),
        }
    };
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let has_train = match cols.as_slice() {
        ["arch_id", "test_accuracy"] => false,
        ["arch_id", "test_accuracy", "train_accuracy"] => true,
        _ => {
            return Err(Error::Io(format!(
                "bad header `{header}`: expected arch_id,test_accuracy[,train_accuracy]"
            )))
        }
    };

    let mut table = BenchmarkTable::default();
    let mut warnings = Vec::new();
    for (i, raw) in lines {
        let line_no = i + 1;
        let line = raw.trim().trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            warnings.push(format!(
                "line {line_no}: expected {} fields, got {}; row skipped",
                cols.len(),
                fields.len()
            ));
            continue;
        }
        if decode(space, fields[0]).is_err() {
            warnings.push(format!(
                "line {line_no}: `{}` does not decode in this space; row skipped",
                fields[0]
            ));
            continue;
        }
        let test_acc = match parse_accuracy(fields[1]) {
            Ok(v) => v,
            Err(msg) => {
                warnings.push(format!("line {line_no}: {msg}; row skipped"));
                continue;
            }
        };
        let train_acc = if has_train {
            match parse_accuracy(fields[2]) {
                Ok(v) => Some(v),
                Err(msg) => {
                    warnings.push(format!("line {line_no}: {msg}; row skipped"));
                    continue;
                }
            }
        } else {
            None
        };
        let arch = ArchId::from(fields[0]);
        if table.rows.insert(arch, (test_acc, train_acc)).is_some() {
            warnings.push(format!(
                "line {line_no}: duplicate arch_id `{}`; last value wins",
                fields[0]
            ));
        }
    }
    Ok(IngestReport { table, warnings })
}

fn parse_accuracy(text: &str) -> std::result::Result<f64, String> {
    let v: f64 = text
        .parse()
        .map_err(|_| format!("`{text}` is not a number"))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(format!("accuracy {v} outside [0, 1]"));
    }
    Ok(v)
}

/// Kendall tau between train and test accuracy over rows that carry both.
pub fn train_test_tau(table: &BenchmarkTable) -> Option<f64> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (_, &(te, tr)) in table.iter() {
        if let Some(tr) = tr {
            train.push(tr);
            test.push(te);
        }
    }
    kendall_tau(&train, &test).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::preset;

    #[test]
    fn valid_rows_are_kept() {
        let space = preset("toy-mlp").unwrap();
        let csv = "arch_id,test_accuracy\n\
                   e0:skip|e1:skip|e2:skip,0.9\n\
                   e0:zero|e1:skip|e2:zero,0.4\n";
        let report = ingest_benchmark_str(csv, &space).unwrap();
        assert_eq!(report.table.len(), 2);
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn bad_rows_are_rejected_with_line_numbers() {
        let space = preset("toy-mlp").unwrap();
        let csv = "arch_id,test_accuracy\n\
                   e0:skip|e1:skip|e2:skip,1.7\n\
                   e0:bogus|e1:skip|e2:skip,0.5\n\
                   e0:relu|e1:skip|e2:skip,0.5\n";
        let report = ingest_benchmark_str(csv, &space).unwrap();
        assert_eq!(report.table.len(), 1);
        assert_eq!(report.warnings.len(), 2);
        assert!(report.warnings[0].contains("line 2"));
        assert!(report.warnings[1].contains("line 3"));
    }

    #[test]
    fn duplicates_last_wins_with_warning() {
        let space = preset("toy-mlp").unwrap();
        let csv = "arch_id,test_accuracy\n\
                   e0:skip|e1:skip|e2:skip,0.2\n\
                   e0:skip|e1:skip|e2:skip,0.8\n";
        let report = ingest_benchmark_str(csv, &space).unwrap();
        assert_eq!(report.table.len(), 1);
        assert_eq!(report.warnings.len(), 1);
        let arch = ArchId::from("e0:skip|e1:skip|e2:skip");
        assert_eq!(report.table.get(&arch).unwrap().0, 0.8);
    }

    #[test]
    fn train_column_enables_train_test_tau() {
        let space = preset("toy-mlp").unwrap();
        let csv = "arch_id,test_accuracy,train_accuracy\n\
                   e0:skip|e1:skip|e2:skip,0.9,0.95\n\
                   e0:zero|e1:skip|e2:zero,0.4,0.5\n\
                   e0:relu|e1:skip|e2:relu,0.6,0.7\n";
        let report = ingest_benchmark_str(csv, &space).unwrap();
        let tau = train_test_tau(&report.table).unwrap();
        assert_eq!(tau, 1.0);
    }

    #[test]
    fn missing_header_is_an_error() {
        let space = preset("toy-mlp").unwrap();
        assert!(ingest_benchmark_str("foo,bar\n", &space).is_err());
        assert!(ingest_benchmark_str("", &space).is_err());
    }
}
