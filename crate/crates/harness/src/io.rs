//! Dataset ingestion (LIBSVM and CSV) and deterministic row splitting.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use psgld_core::{seeded_rng, Dataset, Matrix};
use rand::seq::SliceRandom;

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataFormat {
    Libsvm,
    Csv,
}

impl FromStr for DataFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "libsvm" => Ok(DataFormat::Libsvm),
            "csv" => Ok(DataFormat::Csv),
            other => Err(HarnessError::config(format!("unknown data format `{other}` (libsvm, csv)"))),
        }
    }
}

/// How the response column is interpreted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Labels {
    /// Two classes mapped onto {0, 1}.
    Binary,
    /// Real-valued targets kept as they are.
    Real,
    /// No response column (observations only).
    Absent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadOptions {
    pub format: DataFormat,
    /// LIBSVM feature count; inferred from the largest index when `None`.
    pub dim: Option<usize>,
    /// CSV response column name.
    pub response_column: Option<String>,
    /// Prepend a column of ones.
    pub intercept: bool,
    pub labels: Labels,
}

impl LoadOptions {
    pub fn libsvm(dim: Option<usize>) -> Self {
        LoadOptions { format: DataFormat::Libsvm, dim, response_column: None, intercept: true, labels: Labels::Binary }
    }

    pub fn csv(response_column: &str, labels: Labels) -> Self {
        LoadOptions {
            format: DataFormat::Csv,
            dim: None,
            response_column: Some(response_column.to_string()),
            intercept: true,
            labels,
        }
    }
}

pub fn load_dataset(path: &Path, opts: &LoadOptions) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let name = path.display().to_string();
    match opts.format {
        DataFormat::Libsvm => parse_libsvm(BufReader::new(file), &name, opts),
        DataFormat::Csv => parse_csv(file, &name, opts),
    }
}

fn parse_err(source_name: &str, line: usize, message: impl Into<String>) -> HarnessError {
    HarnessError::Parse { source_name: source_name.to_string(), line, message: message.into() }
}

/// Parses `label idx:val idx:val …` lines with 1-based sparse indices.
pub fn parse_libsvm<R: BufRead>(reader: R, source_name: &str, opts: &LoadOptions) -> Result<Dataset> {
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0;
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line.map_err(|e| HarnessError::io(source_name, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a token");
        let label: f64 =
            label_tok.parse().map_err(|_| parse_err(source_name, line_no, format!("bad label `{label_tok}`")))?;
        let mut entries = Vec::new();
        let mut last = 0;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(source_name, line_no, format!("expected index:value, found `{tok}`")))?;
            let idx: usize =
                idx.parse().map_err(|_| parse_err(source_name, line_no, format!("bad feature index `{idx}`")))?;
            let val: f64 = val.parse().map_err(|_| parse_err(source_name, line_no, format!("bad value `{val}`")))?;
            if idx == 0 {
                return Err(parse_err(source_name, line_no, "feature indices are 1-based"));
            }
            if idx <= last {
                return Err(parse_err(source_name, line_no, "feature indices must increase"));
            }
            if let Some(d) = opts.dim {
                if idx > d {
                    return Err(HarnessError::Schema(format!(
                        "{source_name}:{line_no}: feature index {idx} exceeds declared dimension {d}"
                    )));
                }
            }
            last = idx;
            entries.push((idx, val));
        }
        max_index = max_index.max(last);
        labels.push(label);
        rows.push(entries);
    }
    let d = opts.dim.unwrap_or(max_index);
    let width = d + usize::from(opts.intercept);
    let mut data = Vec::with_capacity(rows.len() * width);
    for entries in &rows {
        let start = data.len();
        data.resize(start + width, 0.0);
        if opts.intercept {
            data[start] = 1.0;
        }
        for &(idx, val) in entries {
            data[start + usize::from(opts.intercept) + idx - 1] = val;
        }
    }
    finish(rows.len(), width, data, Some(labels), opts)
}

/// Parses a headed CSV; the response column is removed and the remaining
/// columns become features in file order.
pub fn parse_csv<R: Read>(reader: R, source_name: &str, opts: &LoadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_err(source_name, e))?.clone();
    let response_idx = match (&opts.response_column, opts.labels) {
        (_, Labels::Absent) => None,
        (Some(name), _) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| HarnessError::Schema(format!("{source_name}: no response column `{name}`")))?,
        ),
        (None, _) => return Err(HarnessError::config("CSV input needs a response column name")),
    };
    let n_features = headers.len() - usize::from(response_idx.is_some());
    let width = n_features + usize::from(opts.intercept);
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(source_name, e))?;
        let line_no = record.position().map_or(0, |p| p.line() as usize);
        if opts.intercept {
            data.push(1.0);
        }
        for (c, field) in record.iter().enumerate() {
            let v: f64 =
                field.parse().map_err(|_| parse_err(source_name, line_no, format!("bad number `{field}`")))?;
            if Some(c) == response_idx {
                labels.push(v);
            } else {
                data.push(v);
            }
        }
        rows += 1;
    }
    let labels = response_idx.map(|_| labels);
    finish(rows, width, data, labels, opts)
}

fn csv_err(source_name: &str, e: csv::Error) -> HarnessError {
    match e.kind() {
        csv::ErrorKind::UnequalLengths { pos, expected_len, len } => HarnessError::Schema(format!(
            "{source_name}:{}: expected {expected_len} fields, found {len}",
            pos.as_ref().map_or(0, |p| p.line())
        )),
        _ => {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(source_name, line, e.to_string())
        }
    }
}

fn finish(rows: usize, width: usize, data: Vec<f64>, labels: Option<Vec<f64>>, opts: &LoadOptions) -> Result<Dataset> {
    if rows == 0 {
        return Err(HarnessError::Schema("dataset has no rows".into()));
    }
    let labels = match (labels, opts.labels) {
        (Some(mut y), Labels::Binary) => {
            map_binary_labels(&mut y)?;
            Some(y)
        }
        (y, Labels::Real) => y,
        (_, Labels::Absent) => None,
        (None, Labels::Binary) => return Err(HarnessError::Schema("binary labels requested but none present".into())),
    };
    Ok(Dataset::new(Matrix::from_vec(rows, width, data)?, labels)?)
}

/// Maps a two-class label vector onto {0, 1}: labels already in {0, 1}
/// are kept, otherwise the smaller label becomes 0 and the larger 1.
pub fn map_binary_labels(y: &mut [f64]) -> Result<()> {
    let mut distinct: Vec<f64> = Vec::new();
    for &v in y.iter() {
        if !distinct.contains(&v) {
            distinct.push(v);
            if distinct.len() > 2 {
                return Err(HarnessError::Schema(format!("more than two class labels: {distinct:?}")));
            }
        }
    }
    if distinct.iter().all(|&v| v == 0.0 || v == 1.0) {
        return Ok(());
    }
    let hi = distinct.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for v in y.iter_mut() {
        *v = f64::from(u8::from(*v == hi));
    }
    Ok(())
}

/// Shuffled split with `round(fraction · N)` training rows; each part keeps
/// the original row order.
pub fn split_train_test(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(HarnessError::config("train fraction must lie in (0, 1)"));
    }
    let n = data.n_data();
    let n_train = (fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(HarnessError::config(format!("train fraction {fraction} leaves an empty partition of {n} rows")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded_rng(seed));
    let (train, test) = idx.split_at_mut(n_train);
    train.sort_unstable();
    test.sort_unstable();
    Ok((data.select(train)?, data.select(test)?))
}

/// `n` distinct rows chosen uniformly, in original order.
pub fn subsample_rows(data: &Dataset, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || n > data.n_data() {
        return Err(HarnessError::config(format!("cannot keep {n} of {} rows", data.n_data())));
    }
    let mut idx: Vec<usize> = rand::seq::index::sample(&mut seeded_rng(seed), data.n_data(), n).into_vec();
    idx.sort_unstable();
    Ok(data.select(&idx)?)
}

/// Writes a dataset as headed CSV (`y` first when present). A leading
/// intercept column is dropped when `drop_intercept` is set.
pub fn write_dataset_csv(path: &Path, data: &Dataset, drop_intercept: bool) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let skip = usize::from(drop_intercept);
    let mut header = Vec::new();
    if data.responses().is_some() {
        header.push("y".to_string());
    }
    header.extend((skip..data.dim()).map(|j| format!("x{}", j - skip)));
    w.write_record(&header)?;
    for i in 0..data.n_data() {
        let mut rec = Vec::with_capacity(header.len());
        if let Some(y) = data.responses() {
            rec.push(crate::output::fmt_f64(y[i]));
        }
        rec.extend(data.row(i)[skip..].iter().map(|&v| crate::output::fmt_f64(v)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

/// Reads the `theta_*` columns of a trace file into a sample matrix.
pub fn read_trace_samples(path: &Path) -> Result<Matrix> {
    let name = path.display().to_string();
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let headers = rdr.headers().map_err(|e| csv_err(&name, e))?.clone();
    let cols: Vec<usize> = headers.iter().enumerate().filter(|(_, h)| h.starts_with("theta_")).map(|(i, _)| i).collect();
    if cols.is_empty() {
        return Err(HarnessError::Schema(format!("{name}: no theta_* columns")));
    }
    let mut data = Vec::new();
    let mut rows = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(&name, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        for &c in &cols {
            let field = &record[c];
            data.push(field.parse().map_err(|_| parse_err(&name, line, format!("bad number `{field}`")))?);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(HarnessError::Schema(format!("{name}: trace has no rows")));
    }
    Ok(Matrix::from_vec(rows, cols.len(), data)?)
}
