//! Dense sample matrices and the per-estuary dataset container.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Data(format!(
                "matrix buffer has {} values, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::Data(format!(
                    "row {i} has {} values, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }
}

/// Identifies one (production area, ISO week) sample.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SampleKey {
    pub zone_id: String,
    pub iso_year: i32,
    pub iso_week: u32,
}

/// Complete (null-free) sample matrix for one estuary. Label 1 means the
/// production area is closed on the following Monday.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstuaryDataset {
    pub name: String,
    pub feature_names: Vec<String>,
    pub features: Matrix,
    pub labels: Vec<u8>,
    pub keys: Vec<SampleKey>,
}

const KEY_COLUMNS: [&str; 3] = ["zone_id", "iso_year", "iso_week"];

impl EstuaryDataset {
    pub fn new(
        name: impl Into<String>,
        feature_names: Vec<String>,
        features: Matrix,
        labels: Vec<u8>,
        keys: Vec<SampleKey>,
    ) -> Result<Self> {
        let ds = Self {
            name: name.into(),
            feature_names,
            features,
            labels,
            keys,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Dataset without meaningful keys (tests, toy problems).
    pub fn unkeyed(name: impl Into<String>, features: Matrix, labels: Vec<u8>) -> Result<Self> {
        let feature_names = (0..features.cols()).map(|j| format!("x{j}")).collect();
        let keys = (0..features.rows())
            .map(|i| SampleKey {
                zone_id: String::new(),
                iso_year: 0,
                iso_week: i as u32,
            })
            .collect();
        Self::new(name, feature_names, features, labels, keys)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.features.rows();
        if self.labels.len() != n || self.keys.len() != n {
            return Err(Error::Data(format!(
                "dataset '{}': {} rows but {} labels and {} keys",
                self.name,
                n,
                self.labels.len(),
                self.keys.len()
            )));
        }
        if self.feature_names.len() != self.features.cols() {
            return Err(Error::Data(format!(
                "dataset '{}': {} feature names for {} columns",
                self.name,
                self.feature_names.len(),
                self.features.cols()
            )));
        }
        if let Some(i) = self.labels.iter().position(|&y| y > 1) {
            return Err(Error::Data(format!("row {i}: label must be 0 or 1")));
        }
        if let Some(p) = self.features.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "row {} column '{}': non-finite feature value",
                p / self.features.cols().max(1),
                self.feature_names[p % self.features.cols().max(1)]
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    pub fn has_both_classes(&self) -> bool {
        let p = self.positives();
        p > 0 && p < self.len()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            feature_names: self.feature_names.clone(),
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            keys: idx.iter().map(|&i| self.keys[i].clone()).collect(),
        }
    }

    /// Write as CSV: key columns, canonical feature columns, then `label`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_csv_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let header: Vec<&str> = KEY_COLUMNS
            .iter()
            .copied()
            .chain(self.feature_names.iter().map(String::as_str))
            .chain(std::iter::once("label"))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.len() {
            let k = &self.keys[i];
            write!(w, "{},{},{}", k.zone_id, k.iso_year, k.iso_week)?;
            for v in self.features.row(i) {
                write!(w, ",{v}")?;
            }
            writeln!(w, ",{}", self.labels[i])?;
        }
        Ok(())
    }

    /// Read a dataset CSV. Key columns are optional; `label` is required.
    /// The dataset name is taken from the file stem.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into());
        let table = read_numeric_table(path)?;
        let label_col = table
            .headers
            .iter()
            .position(|h| h == "label")
            .ok_or_else(|| Error::Parse {
                file: path.into(),
                line: 1,
                msg: "missing 'label' column".into(),
            })?;
        let feature_cols = table.feature_columns(Some(label_col));
        let mut rows = Vec::with_capacity(table.records.len());
        let mut labels = Vec::with_capacity(table.records.len());
        let mut keys = Vec::with_capacity(table.records.len());
        for (r, rec) in table.records.iter().enumerate() {
            let line = r as u64 + 2;
            let mut row = Vec::with_capacity(feature_cols.len());
            for &c in &feature_cols {
                row.push(parse_cell(path, line, &table.headers[c], &rec[c])?);
            }
            let y = match rec[label_col].trim() {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::Parse {
                        file: path.into(),
                        line,
                        msg: format!("label must be 0 or 1, got '{other}'"),
                    })
                }
            };
            rows.push(row);
            labels.push(y);
            keys.push(table.key(r, path, line)?);
        }
        let names = feature_cols
            .iter()
            .map(|&c| table.headers[c].clone())
            .collect();
        let features = if rows.is_empty() {
            Matrix::zeros(0, feature_cols.len())
        } else {
            Matrix::from_rows(&rows)?
        };
        Self::new(name, names, features, labels, keys)
    }
}

/// Read a feature table for prediction: key columns and an optional
/// `label` column are ignored, every other column is a feature.
pub fn read_features(path: &Path) -> Result<(Vec<String>, Matrix)> {
    let table = read_numeric_table(path)?;
    let label_col = table.headers.iter().position(|h| h == "label");
    let cols = table.feature_columns(label_col);
    let mut data = Vec::with_capacity(table.records.len() * cols.len());
    for (r, rec) in table.records.iter().enumerate() {
        for &c in &cols {
            data.push(parse_cell(path, r as u64 + 2, &table.headers[c], &rec[c])?);
        }
    }
    let names = cols.iter().map(|&c| table.headers[c].clone()).collect();
    Ok((names, Matrix::new(table.records.len(), cols.len(), data)?))
}

/// Header + raw string records of a CSV file.
pub(crate) struct RawTable {
    pub headers: Vec<String>,
    pub records: Vec<csv::StringRecord>,
}

impl RawTable {
    /// Columns that are neither key columns nor the excluded column.
    pub fn feature_columns(&self, exclude: Option<usize>) -> Vec<usize> {
        (0..self.headers.len())
            .filter(|&c| Some(c) != exclude && !KEY_COLUMNS.contains(&self.headers[c].as_str()))
            .collect()
    }

    fn key(&self, r: usize, path: &Path, line: u64) -> Result<SampleKey> {
        let col = |name: &str| self.headers.iter().position(|h| h == name);
        let rec = &self.records[r];
        let zone_id = col("zone_id").map(|c| rec[c].to_string()).unwrap_or_default();
        let iso_year = match col("iso_year") {
            Some(c) => rec[c].trim().parse().map_err(|_| Error::Parse {
                file: path.into(),
                line,
                msg: format!("bad iso_year '{}'", &rec[c]),
            })?,
            None => 0,
        };
        let iso_week = match col("iso_week") {
            Some(c) => rec[c].trim().parse().map_err(|_| Error::Parse {
                file: path.into(),
                line,
                msg: format!("bad iso_week '{}'", &rec[c]),
            })?,
            None => r as u32,
        };
        Ok(SampleKey {
            zone_id,
            iso_year,
            iso_week,
        })
    }
}

pub(crate) fn read_numeric_table(path: &Path) -> Result<RawTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            file: path.into(),
            line: i as u64 + 2,
            msg: e.to_string(),
        })?;
        records.push(rec);
    }
    Ok(RawTable { headers, records })
}

pub(crate) fn parse_cell(path: &Path, line: u64, column: &str, cell: &str) -> Result<f64> {
    let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
        file: path.into(),
        line,
        msg: format!("column '{column}': '{cell}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            file: path.into(),
            line,
            msg: format!("column '{column}': non-finite value"),
        });
    }
    Ok(v)
}
