//! Tabular input and its binarization into feature bit columns.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bitvec::BitVector;
use crate::error::{Error, Result};

/// Cell texts treated as missing values.
const MISSING_MARKERS: [&str; 2] = ["", "?"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Categorical,
    Numeric,
}

#[derive(Debug, Clone)]
pub struct RawColumn {
    pub name: String,
    pub kind: ColumnKind,
    pub values: Vec<Option<String>>,
}

impl RawColumn {
    /// Infers the kind: numeric when every present value parses as a float.
    pub fn new(name: impl Into<String>, values: Vec<Option<String>>) -> Self {
        let present: Vec<&String> = values.iter().flatten().collect();
        let numeric = !present.is_empty() && present.iter().all(|v| v.parse::<f64>().is_ok());
        RawColumn {
            name: name.into(),
            kind: if numeric {
                ColumnKind::Numeric
            } else {
                ColumnKind::Categorical
            },
            values,
        }
    }

    fn numeric_at(&self, row: usize) -> Result<Option<f64>> {
        match &self.values[row] {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| Error::BadNumericValue {
                    row: row + 1,
                    column: self.name.clone(),
                    value: v.clone(),
                }),
        }
    }
}

/// Rows of mixed categorical/numeric columns with an optional binary label.
#[derive(Debug, Clone)]
pub struct RawTable {
    columns: Vec<RawColumn>,
    label_name: Option<String>,
    labels: Vec<bool>,
    n_rows: usize,
}

impl RawTable {
    pub fn new(columns: Vec<RawColumn>, label: Option<(String, Vec<bool>)>) -> Result<Self> {
        let n_rows = match (&label, columns.first()) {
            (Some((_, l)), _) => l.len(),
            (None, Some(c)) => c.values.len(),
            (None, None) => 0,
        };
        let mut seen = HashSet::new();
        for c in &columns {
            if c.values.len() != n_rows {
                return Err(Error::InvalidParameter(format!(
                    "column `{}` has {} values, expected {n_rows}",
                    c.name,
                    c.values.len()
                )));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(Error::DuplicateColumn(c.name.clone()));
            }
        }
        let (label_name, labels) = match label {
            Some((name, labels)) => {
                if seen.contains(name.as_str()) {
                    return Err(Error::DuplicateColumn(name));
                }
                (Some(name), labels)
            }
            None => (None, Vec::new()),
        };
        Ok(RawTable {
            columns,
            label_name,
            labels,
            n_rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[RawColumn] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&RawColumn> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn label_name(&self) -> Option<&str> {
        self.label_name.as_deref()
    }

    pub fn has_labels(&self) -> bool {
        self.label_name.is_some()
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    /// Sub-table of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> RawTable {
        RawTable {
            columns: self
                .columns
                .iter()
                .map(|c| RawColumn {
                    name: c.name.clone(),
                    kind: c.kind,
                    values: rows.iter().map(|&r| c.values[r].clone()).collect(),
                })
                .collect(),
            label_name: self.label_name.clone(),
            labels: if self.has_labels() {
                rows.iter().map(|&r| self.labels[r]).collect()
            } else {
                Vec::new()
            },
            n_rows: rows.len(),
        }
    }
}

fn read_records(path: &Path) -> Result<(Vec<String>, Vec<csv::StringRecord>)> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let records = reader
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| csv_error(path, e))?;
    Ok((headers, records))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: path.to_path_buf(),
                source,
            },
            _ => unreachable!(),
        },
        _ => Error::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        },
    }
}

fn cell(value: &str) -> Option<String> {
    if MISSING_MARKERS.contains(&value) {
        None
    } else {
        Some(value.to_string())
    }
}

/// Reads a headered CSV whose `label` column holds a binary outcome.
///
/// With `positive_label` set, that text marks class 1 and exactly one other
/// text is allowed for class 0. Without it, labels must be `0`/`1`.
pub fn load_csv(
    path: impl AsRef<Path>,
    label: &str,
    positive_label: Option<&str>,
) -> Result<RawTable> {
    let path = path.as_ref();
    let (headers, records) = read_records(path)?;
    let label_idx = headers
        .iter()
        .position(|h| h == label)
        .ok_or_else(|| Error::MissingLabelColumn {
            label: label.to_string(),
            path: path.to_path_buf(),
            available: headers.join(", "),
        })?;

    let mut negative_text: Option<String> = None;
    let mut labels = Vec::with_capacity(records.len());
    for (row, rec) in records.iter().enumerate() {
        let value = rec.get(label_idx).unwrap_or("");
        let bad = || Error::BadLabelValue {
            row: row + 1,
            column: label.to_string(),
            value: value.to_string(),
        };
        let y = match positive_label {
            None => match value {
                "1" => true,
                "0" => false,
                _ => return Err(bad()),
            },
            Some(_) if value.is_empty() => return Err(bad()),
            Some(p) if value == p => true,
            Some(_) => match &negative_text {
                None => {
                    negative_text = Some(value.to_string());
                    false
                }
                Some(neg) if neg == value => false,
                Some(_) => return Err(bad()),
            },
        };
        labels.push(y);
    }

    let columns = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(i, name)| {
            let values = records.iter().map(|r| cell(r.get(i).unwrap_or(""))).collect();
            RawColumn::new(name.clone(), values)
        })
        .collect();
    RawTable::new(columns, Some((label.to_string(), labels)))
}

/// Reads a headered CSV without interpreting any column as a label.
/// A column named `drop` (typically the training label) is skipped when present.
pub fn load_csv_unlabeled(path: impl AsRef<Path>, drop: Option<&str>) -> Result<RawTable> {
    let path = path.as_ref();
    let (headers, records) = read_records(path)?;
    let columns = headers
        .iter()
        .enumerate()
        .filter(|(_, name)| Some(name.as_str()) != drop)
        .map(|(i, name)| {
            let values = records.iter().map(|r| cell(r.get(i).unwrap_or(""))).collect();
            RawColumn::new(name.clone(), values)
        })
        .collect();
    RawTable::new(columns, None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinarizeOptions {
    pub numeric_bins: usize,
    /// Levels rarer than this fraction of rows are pooled into `col=OTHER`.
    pub rare_level_threshold: f64,
}

impl Default for BinarizeOptions {
    fn default() -> Self {
        BinarizeOptions {
            numeric_bins: 4,
            rare_level_threshold: 0.01,
        }
    }
}

/// The test a binary feature applies to one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Literal {
    Equals { value: String },
    /// Present and not one of the listed (frequent) levels.
    OtherThan { kept: Vec<String> },
    /// `lo <= v < hi`; a missing bound is unbounded.
    Interval { lo: Option<f64>, hi: Option<f64> },
}

impl Literal {
    fn matches_text(&self, value: &str) -> bool {
        match self {
            Literal::Equals { value: v } => v == value,
            Literal::OtherThan { kept } => !kept.iter().any(|k| k == value),
            Literal::Interval { .. } => false,
        }
    }

    fn matches_number(&self, x: f64) -> bool {
        match self {
            Literal::Interval { lo, hi } => {
                lo.is_none_or(|lo| x >= lo) && hi.is_none_or(|hi| x < hi)
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub name: String,
    pub column: String,
    pub literal: Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnEncoding {
    pub name: String,
    pub kind: ColumnKind,
    pub features: Vec<FeatureDef>,
}

struct Num(f64);

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.fract() == 0.0 && self.0.abs() < 1e15 {
            write!(f, "{}", self.0 as i64)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

fn interval_name(column: &str, lo: Option<f64>, hi: Option<f64>) -> String {
    match (lo, hi) {
        (None, Some(h)) => format!("{column}∈(-inf,{})", Num(h)),
        (Some(l), None) => format!("{column}∈[{},inf)", Num(l)),
        (Some(l), Some(h)) => format!("{column}∈[{},{})", Num(l), Num(h)),
        (None, None) => format!("{column}∈(-inf,inf)"),
    }
}

/// Linear-interpolation empirical quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// A fitted mapping from raw columns to binary features. Fitting on a
/// training split and transforming a test split reuses the same edges and
/// level maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binarizer {
    pub columns: Vec<ColumnEncoding>,
}

impl Binarizer {
    pub fn fit(table: &RawTable, opts: &BinarizeOptions) -> Result<Self> {
        if opts.numeric_bins < 2 {
            return Err(Error::InvalidParameter(format!(
                "numeric_bins must be at least 2, got {}",
                opts.numeric_bins
            )));
        }
        if !(0.0..1.0).contains(&opts.rare_level_threshold) {
            return Err(Error::InvalidParameter(format!(
                "rare level threshold must lie in [0, 1), got {}",
                opts.rare_level_threshold
            )));
        }
        let n = table.n_rows();
        if n == 0 {
            return Err(Error::EmptyTable);
        }

        let mut columns = Vec::new();
        for col in table.columns() {
            let candidates = match col.kind {
                ColumnKind::Categorical => categorical_features(col, n, opts.rare_level_threshold),
                ColumnKind::Numeric => numeric_features(col, opts.numeric_bins)?,
            };
            // A feature true on every row (or on none) cannot separate anything.
            let mut features = Vec::new();
            for f in candidates {
                let support = feature_bits(col, &f.literal)?.count_ones();
                if support > 0 && support < n {
                    features.push(f);
                }
            }
            if features.is_empty() {
                log::warn!("column `{}` yields no feature that varies over the training rows; dropped", col.name);
                continue;
            }
            columns.push(ColumnEncoding {
                name: col.name.clone(),
                kind: col.kind,
                features,
            });
        }
        Ok(Binarizer { columns })
    }

    pub fn n_features(&self) -> usize {
        self.columns.iter().map(|c| c.features.len()).sum()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.columns
            .iter()
            .flat_map(|c| c.features.iter().map(|f| f.name.clone()))
            .collect()
    }

    /// Only the columns that produce at least one of `features`.
    pub fn restricted_to(&self, features: &[&str]) -> Binarizer {
        Binarizer {
            columns: self
                .columns
                .iter()
                .filter(|c| c.features.iter().any(|f| features.contains(&f.name.as_str())))
                .cloned()
                .collect(),
        }
    }

    /// Applies the encoding. The table must carry every encoded column;
    /// labels are taken from the table when it has them.
    pub fn transform(&self, table: &RawTable) -> Result<BinaryDataset> {
        let mut names = Vec::new();
        let mut sources = Vec::new();
        let mut bits = Vec::new();
        for (ci, enc) in self.columns.iter().enumerate() {
            let col = table
                .column(&enc.name)
                .ok_or_else(|| Error::FeatureMismatch(enc.name.clone()))?;
            for f in &enc.features {
                names.push(f.name.clone());
                sources.push(ci);
                bits.push(feature_bits(col, &f.literal)?);
            }
        }
        let labels = if table.has_labels() {
            BitVector::from_bools(table.labels().iter().copied())
        } else {
            BitVector::zeros(table.n_rows())
        };
        BinaryDataset::new(names, sources, bits, labels)
    }
}

fn categorical_features(col: &RawColumn, n: usize, rare: f64) -> Vec<FeatureDef> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in col.values.iter().flatten() {
        *counts.entry(v.as_str()).or_default() += 1;
    }
    let min_count = rare * n as f64;
    let (kept, merged): (Vec<_>, Vec<_>) =
        counts.iter().partition(|&(_, &c)| c as f64 >= min_count);
    let mut out: Vec<FeatureDef> = kept
        .iter()
        .map(|(level, _)| FeatureDef {
            name: format!("{}={}", col.name, level),
            column: col.name.clone(),
            literal: Literal::Equals {
                value: level.to_string(),
            },
        })
        .collect();
    if !merged.is_empty() {
        out.push(FeatureDef {
            name: format!("{}=OTHER", col.name),
            column: col.name.clone(),
            literal: Literal::OtherThan {
                kept: kept.iter().map(|(l, _)| l.to_string()).collect(),
            },
        });
    }
    out
}

/// Interior bin edges at the `i/bins` quantiles of sorted data, duplicates
/// merged. An edge at the minimum would separate nothing from a left-closed
/// bin, so when the minimum fills a whole quantile slot it becomes its own
/// bin and the values above it are binned afresh. Zero-inflated columns
/// thereby keep splits among their nonzero values.
fn quantile_edges(sorted: &[f64], bins: usize) -> Vec<f64> {
    let mut edges: Vec<f64> = (1..bins)
        .map(|i| quantile(sorted, i as f64 / bins as f64))
        .collect();
    edges.dedup();
    let min = sorted[0];
    if edges.first() != Some(&min) {
        return edges;
    }
    let rest = &sorted[sorted.partition_point(|&x| x <= min)..];
    let Some(&next) = rest.first() else {
        return Vec::new();
    };
    let mut out = vec![next];
    out.extend(quantile_edges(rest, bins).into_iter().filter(|&e| e > next));
    out
}

fn numeric_features(col: &RawColumn, bins: usize) -> Result<Vec<FeatureDef>> {
    let mut values = Vec::new();
    for row in 0..col.values.len() {
        if let Some(x) = col.numeric_at(row)? {
            values.push(x);
        }
    }
    if values.is_empty() {
        return Ok(Vec::new());
    }
    values.sort_by(f64::total_cmp);
    let edges = quantile_edges(&values, bins);

    let mut bounds: Vec<Option<f64>> = vec![None];
    bounds.extend(edges.iter().copied().map(Some));
    bounds.push(None);
    Ok(bounds
        .windows(2)
        .map(|w| FeatureDef {
            name: interval_name(&col.name, w[0], w[1]),
            column: col.name.clone(),
            literal: Literal::Interval { lo: w[0], hi: w[1] },
        })
        .collect())
}

fn feature_bits(col: &RawColumn, literal: &Literal) -> Result<BitVector> {
    let mut bits = BitVector::zeros(col.values.len());
    match literal {
        Literal::Interval { .. } => {
            for row in 0..col.values.len() {
                if let Some(x) = col.numeric_at(row)? {
                    if literal.matches_number(x) {
                        bits.set(row, true);
                    }
                }
            }
        }
        _ => {
            for (row, v) in col.values.iter().enumerate() {
                if let Some(v) = v {
                    if literal.matches_text(v) {
                        bits.set(row, true);
                    }
                }
            }
        }
    }
    Ok(bits)
}

/// Observations as binary feature columns plus the positive-label bits.
#[derive(Debug, Clone)]
pub struct BinaryDataset {
    n: usize,
    feature_names: Vec<String>,
    feature_sources: Vec<usize>,
    feature_bits: Vec<BitVector>,
    labels: BitVector,
    n_pos: usize,
}

impl BinaryDataset {
    /// `sources[f]` identifies the raw column feature `f` came from; the
    /// miner never conjoins two features with the same source.
    pub fn new(
        feature_names: Vec<String>,
        sources: Vec<usize>,
        feature_bits: Vec<BitVector>,
        labels: BitVector,
    ) -> Result<Self> {
        let n = labels.len();
        if feature_names.len() != feature_bits.len() || sources.len() != feature_bits.len() {
            return Err(Error::InvalidParameter(
                "feature names, sources and bit columns must have equal counts".into(),
            ));
        }
        if let Some(bad) = feature_bits.iter().position(|b| b.len() != n) {
            return Err(Error::InvalidParameter(format!(
                "feature `{}` has {} bits, expected {n}",
                feature_names[bad],
                feature_bits[bad].len()
            )));
        }
        let n_pos = labels.count_ones();
        Ok(BinaryDataset {
            n,
            feature_names,
            feature_sources: sources,
            feature_bits,
            labels,
            n_pos,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_features(&self) -> usize {
        self.feature_bits.len()
    }

    pub fn n_pos(&self) -> usize {
        self.n_pos
    }

    pub fn n_neg(&self) -> usize {
        self.n - self.n_pos
    }

    pub fn labels(&self) -> &BitVector {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_name(&self, f: usize) -> &str {
        &self.feature_names[f]
    }

    pub fn feature_source(&self, f: usize) -> usize {
        self.feature_sources[f]
    }

    pub fn feature_bits(&self, f: usize) -> &BitVector {
        &self.feature_bits[f]
    }

    pub fn feature_index(&self) -> HashMap<&str, usize> {
        self.feature_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect()
    }

    /// Row `i` as a feature-name → value map.
    pub fn observation(&self, row: usize) -> HashMap<&str, bool> {
        self.feature_names
            .iter()
            .zip(&self.feature_bits)
            .map(|(name, bits)| (name.as_str(), bits.get(row)))
            .collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> BinaryDataset {
        let labels = self.labels.select(rows);
        BinaryDataset {
            n: rows.len(),
            feature_names: self.feature_names.clone(),
            feature_sources: self.feature_sources.clone(),
            feature_bits: self.feature_bits.iter().map(|b| b.select(rows)).collect(),
            n_pos: labels.count_ones(),
            labels,
        }
    }
}

/// Fits a [`Binarizer`] on `table` and applies it.
pub fn binarize(table: &RawTable, opts: &BinarizeOptions) -> Result<BinaryDataset> {
    Binarizer::fit(table, opts)?.transform(table)
}
