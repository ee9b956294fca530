//! Line-oriented vector file format shared by the embedding and reduction
//! stages.
//!
//! The first line is `#dim=<D>`; every following line is
//! `<snapshot_id>\t<v0> <v1> … <v_{D-1}>` with decimal floats. Floats are
//! written in Rust's shortest round-trip form, so a save/load cycle
//! reproduces every vector bit for bit.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VectorFileError {
    #[error("i/o error reading vectors: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: missing or malformed #dim header")]
    MissingHeader { line: usize },
    #[error("line {line}: expected {expected} values, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: duplicate snapshot id {id}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: non-finite value")]
    NonFiniteValue { line: usize },
    #[error("line {line}: malformed record")]
    Malformed { line: usize },
}

/// Vectors keyed by snapshot id, preserving the file's row order.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSet {
    pub dim: usize,
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl VectorSet {
    pub fn new(dim: usize) -> Self {
        VectorSet {
            dim,
            ids: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, id: impl Into<String>, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.dim);
        self.ids.push(id.into());
        self.rows.push(row);
    }

    /// Id → row-index lookup table.
    pub fn index(&self) -> HashMap<&str, usize> {
        self.ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect()
    }

    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "#dim={}", self.dim);
        for (id, row) in self.ids.iter().zip(&self.rows) {
            out.push_str(id);
            out.push('\t');
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), VectorFileError> {
        fs::write(path, self.to_file_string())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, VectorFileError> {
        let reader = BufReader::new(fs::File::open(path)?);
        Self::parse(reader)
    }

    pub fn parse<R: BufRead>(reader: R) -> Result<Self, VectorFileError> {
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or(VectorFileError::MissingHeader { line: 1 })?;
        let header = header?;
        let dim: usize = header
            .strip_prefix("#dim=")
            .and_then(|d| d.trim().parse().ok())
            .ok_or(VectorFileError::MissingHeader { line: 1 })?;

        let mut set = VectorSet::new(dim);
        let mut seen: HashMap<String, ()> = HashMap::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (id, values) = line
                .split_once('\t')
                .ok_or(VectorFileError::Malformed { line: line_no })?;
            let row: Vec<f64> = values
                .split(' ')
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| VectorFileError::Malformed { line: line_no })
                })
                .collect::<Result<_, _>>()?;
            if row.len() != dim {
                return Err(VectorFileError::DimensionMismatch {
                    line: line_no,
                    expected: dim,
                    found: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(VectorFileError::NonFiniteValue { line: line_no });
            }
            if seen.insert(id.to_string(), ()).is_some() {
                return Err(VectorFileError::DuplicateId {
                    line: line_no,
                    id: id.to_string(),
                });
            }
            set.push(id, row);
        }
        Ok(set)
    }
}
