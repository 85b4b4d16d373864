//! Keyed row collections with conforming-union semantics.
//!
//! A dataset maps opaque string keys to d-dimensional rows. Two datasets
//! conform when every shared key carries bit-identical rows, and unions
//! deduplicate by key; this is what makes sketch merging insensitive to the
//! same record arriving along multiple paths.

use nalgebra::DMatrix;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("row for key '{key}' has {got} columns, dataset has {expect}")]
    DimensionMismatch {
        key: String,
        expect: usize,
        got: usize,
    },
    #[error("conforming violation: key '{0}' maps to different rows")]
    ConformingViolation(String),
    #[error("malformed dataset csv at line {line}: {reason}")]
    BadCsv { line: usize, reason: String },
}

/// Keyed rows; iteration order is the key order, which keeps every
/// downstream computation deterministic.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    rows: BTreeMap<String, Vec<f64>>,
    d: usize,
}

fn rows_identical(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| x.to_bits() == y.to_bits())
}

impl Dataset {
    pub fn new(d: usize) -> Self {
        Self {
            rows: BTreeMap::new(),
            d,
        }
    }

    pub fn from_rows<I, K>(d: usize, rows: I) -> Result<Self, DatasetError>
    where
        I: IntoIterator<Item = (K, Vec<f64>)>,
        K: Into<String>,
    {
        let mut ds = Self::new(d);
        for (k, v) in rows {
            ds.insert(k.into(), v)?;
        }
        Ok(ds)
    }

    pub fn insert(&mut self, key: String, val: Vec<f64>) -> Result<(), DatasetError> {
        if val.len() != self.d {
            return Err(DatasetError::DimensionMismatch {
                key,
                expect: self.d,
                got: val.len(),
            });
        }
        if let Some(existing) = self.rows.get(&key) {
            if !rows_identical(existing, &val) {
                return Err(DatasetError::ConformingViolation(key));
            }
            return Ok(());
        }
        self.rows.insert(key, val);
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.rows.get(key).map(|v| v.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.rows.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.rows.keys().map(|k| k.as_str())
    }

    /// Deduplicated union; errors if any shared key disagrees.
    pub fn union(&self, other: &Dataset) -> Result<Dataset, DatasetError> {
        let mut out = self.clone();
        for (k, v) in other.iter() {
            out.insert(k.to_string(), v.to_vec())?;
        }
        Ok(out)
    }

    pub fn union_all<'a, I: IntoIterator<Item = &'a Dataset>>(
        parts: I,
    ) -> Result<Dataset, DatasetError> {
        let mut iter = parts.into_iter();
        let mut out = match iter.next() {
            Some(first) => first.clone(),
            None => return Ok(Dataset::new(0)),
        };
        for part in iter {
            for (k, v) in part.iter() {
                out.insert(k.to_string(), v.to_vec())?;
            }
        }
        Ok(out)
    }

    /// Dense matrix of the values in key order.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.rows.len();
        let mut m = DMatrix::zeros(n, self.d);
        for (i, (_, v)) in self.rows.iter().enumerate() {
            for (j, x) in v.iter().enumerate() {
                m[(i, j)] = *x;
            }
        }
        m
    }

    /// Parse the `key,v1,...,vd` CSV format.
    pub fn from_csv(text: &str) -> Result<Self, DatasetError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(DatasetError::BadCsv {
            line: 1,
            reason: "empty file".into(),
        })?;
        let cols = header.split(',').count();
        if cols < 2 || !header.starts_with("key") {
            return Err(DatasetError::BadCsv {
                line: 1,
                reason: "expected header key,v1,...,vd".into(),
            });
        }
        let d = cols - 1;
        let mut ds = Dataset::new(d);
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let key = parts.next().unwrap_or("").to_string();
            let vals: Result<Vec<f64>, _> = parts.map(|p| p.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| DatasetError::BadCsv {
                line: idx + 1,
                reason: e.to_string(),
            })?;
            ds.insert(key, vals)?;
        }
        Ok(ds)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("key");
        for j in 1..=self.d {
            out.push_str(&format!(",v{j}"));
        }
        out.push('\n');
        for (k, v) in self.iter() {
            out.push_str(k);
            for x in v {
                out.push_str(&format!(",{x}"));
            }
            out.push('\n');
        }
        out
    }
}
