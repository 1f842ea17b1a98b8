//! Real-dataset ingestion: CSV parsing, deterministic train/test splits,
//! mean binarization of continuous columns (thresholds from the training
//! split only), and categorical code books.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::empirical::SampleMatrix;
use crate::error::{Error, Result};
use crate::synth::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Categorical,
    Continuous,
}

/// How rows are partitioned into train and test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SplitRule {
    /// A seeded shuffle with the leading fraction used for training.
    Ratio { train_fraction: f64, seed: u64 },
    /// A seeded shuffle with fixed train and test row counts (rows beyond
    /// `train + test` are left unused).
    Counts {
        train: usize,
        test: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub has_header: bool,
    pub columns: Vec<ColumnKind>,
    pub split: SplitRule,
}

/// How one column was turned into symbols.
#[derive(Debug, Clone, Serialize)]
pub struct ColumnEncoding {
    pub kind: ColumnKind,
    /// Mean of the training values, for continuous columns: values above
    /// it encode as 1, the rest as 0.
    pub threshold: Option<f64>,
    /// Token-to-code order for categorical columns.
    pub categories: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EncodingReport {
    pub columns: Vec<ColumnEncoding>,
    /// Global alphabet size: the maximum category count across columns.
    pub r: usize,
    pub train_rows: usize,
    pub test_rows: usize,
}

/// Loads, splits, and encodes a dataset.
///
/// The split happens first on raw rows; binarization thresholds are then
/// computed from the training rows only and applied to both splits.
/// Categorical code books are collected over the whole file (numerically
/// sorted when every token parses as an integer, lexicographically
/// otherwise) so both splits share one alphabet. Deterministic given the
/// spec.
pub fn load_dataset(spec: &DatasetSpec) -> Result<(SampleMatrix, SampleMatrix, EncodingReport)> {
    let (rows, first_line) = read_raw(spec)?;
    let d = spec.columns.len();
    if d < 2 {
        return Err(Error::InvalidParameter(
            "need at least two columns to learn a structure".into(),
        ));
    }
    let n = rows.len();
    let (train_idx, test_idx) = split_rows(n, &spec.split)?;

    // Continuous thresholds from the training rows only.
    let mut encodings = Vec::with_capacity(d);
    for (c, kind) in spec.columns.iter().enumerate() {
        match kind {
            ColumnKind::Continuous => {
                let mut sum = 0.0;
                for &ri in &train_idx {
                    sum += parse_float(&rows[ri][c], first_line + ri, c)?;
                }
                if train_idx.is_empty() {
                    return Err(Error::Degenerate("empty training split".into()));
                }
                encodings.push(ColumnEncoding {
                    kind: *kind,
                    threshold: Some(sum / train_idx.len() as f64),
                    categories: vec!["0".into(), "1".into()],
                });
            }
            ColumnKind::Categorical => {
                let mut tokens: Vec<String> = rows.iter().map(|row| row[c].clone()).collect();
                tokens.sort();
                tokens.dedup();
                if tokens.is_empty() || (tokens.len() == 1 && tokens[0].is_empty()) {
                    return Err(Error::Degenerate(format!("column {c} is empty")));
                }
                if tokens.iter().all(|t| t.parse::<i64>().is_ok()) {
                    tokens.sort_by_key(|t| t.parse::<i64>().expect("checked"));
                }
                if tokens.len() > 256 {
                    return Err(Error::InvalidParameter(format!(
                        "column {c} has {} categories; at most 256 are supported",
                        tokens.len()
                    )));
                }
                encodings.push(ColumnEncoding {
                    kind: *kind,
                    threshold: None,
                    categories: tokens,
                });
            }
        }
    }
    let r = encodings
        .iter()
        .map(|e| e.categories.len().max(2))
        .max()
        .expect("at least one column")
        .max(2);

    let encode_rows = |idx: &[usize]| -> Result<SampleMatrix> {
        let mut data = Vec::with_capacity(idx.len() * d);
        for &ri in idx {
            for (c, enc) in encodings.iter().enumerate() {
                let token = &rows[ri][c];
                let sym: u8 = match enc.kind {
                    ColumnKind::Continuous => {
                        let v = parse_float(token, first_line + ri, c)?;
                        u8::from(v > enc.threshold.expect("continuous columns have thresholds"))
                    }
                    ColumnKind::Categorical => enc
                        .categories
                        .iter()
                        .position(|t| t == token)
                        .ok_or_else(|| Error::Parse {
                            line: first_line + ri,
                            column: Some(c + 1),
                            msg: format!("unknown category {token:?}"),
                        })? as u8,
                };
                data.push(sym);
            }
        }
        SampleMatrix::new(idx.len(), d, r, data)
    };
    let train = encode_rows(&train_idx)?;
    let test = encode_rows(&test_idx)?;
    let report = EncodingReport {
        columns: encodings,
        r,
        train_rows: train.n(),
        test_rows: test.n(),
    };
    Ok((train, test, report))
}

fn read_raw(spec: &DatasetSpec) -> Result<(Vec<Vec<String>>, usize)> {
    let file = std::fs::File::open(&spec.path)
        .map_err(|e| Error::io(format!("opening {}", spec.path.display()), e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(spec.has_header)
        .flexible(true)
        .from_reader(file);
    let first_line = if spec.has_header { 2 } else { 1 };
    let d = spec.columns.len();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = first_line + i;
        let record = record.map_err(|e| Error::csv(format!("line {line}"), e))?;
        if record.len() != d {
            return Err(Error::Parse {
                line,
                column: None,
                msg: format!("expected {d} columns, found {}", record.len()),
            });
        }
        rows.push(record.iter().map(|f| f.trim().to_string()).collect());
    }
    if rows.is_empty() {
        return Err(Error::Degenerate("dataset has no rows".into()));
    }
    Ok((rows, first_line))
}

fn parse_float(token: &str, line: usize, col: usize) -> Result<f64> {
    token.parse::<f64>().map_err(|_| Error::Parse {
        line,
        column: Some(col + 1),
        msg: format!("expected a number, found {token:?}"),
    })
}

fn split_rows(n: usize, rule: &SplitRule) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut order: Vec<usize> = (0..n).collect();
    match rule {
        SplitRule::Ratio {
            train_fraction,
            seed,
        } => {
            if !(*train_fraction > 0.0 && *train_fraction < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "train fraction must lie in (0, 1), got {train_fraction}"
                )));
            }
            super::shuffle(&mut order, SeededRng::new(*seed, u64::MAX - 1));
            let train_n = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
            let (tr, te) = order.split_at(train_n);
            Ok((tr.to_vec(), te.to_vec()))
        }
        SplitRule::Counts { train, test, seed } => {
            if *train == 0 || *test == 0 || train + test > n {
                return Err(Error::InvalidParameter(format!(
                    "split needs train >= 1, test >= 1, train + test <= {n}; got {train} + {test}"
                )));
            }
            super::shuffle(&mut order, SeededRng::new(*seed, u64::MAX - 1));
            Ok((
                order[..*train].to_vec(),
                order[*train..train + test].to_vec(),
            ))
        }
    }
}
