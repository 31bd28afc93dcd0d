//! Embedding sets, label vectors, labeling output, and their on-disk formats.
//!
//! # Binary embedding format
//!
//! An embedding file is a flat little-endian dump with a 16-byte header:
//!
//! | bytes  | content                                |
//! |--------|----------------------------------------|
//! | 0..4   | ASCII magic `EMB1`                     |
//! | 4..8   | `u32` dimension (strictly positive)    |
//! | 8..16  | `u64` row count (may be zero)          |
//! | 16..   | `count * dim` IEEE-754 `f32`, row-major |
//!
//! No padding, no footer. Values must be finite and no row may be the zero
//! vector; both are hard load errors. Write-then-load round-trips every
//! value bit-exactly.
//!
//! # Label CSV
//!
//! Header exactly `index,label`, then one row per embedding row in file
//! order. `index` is the 0-based row id and must match the row's position;
//! `label` is a 0-based non-negative integer class id.
//!
//! # Output CSV
//!
//! Header exactly `index,label,level,rank,margin`, one row per input point,
//! sorted by `(level, rank)`, `margin` printed with six decimal places and
//! LF line endings. `index` refers to the row in the unlabeled input set.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Magic bytes identifying the binary embedding format.
const MAGIC: &[u8; 4] = b"EMB1";

/// Header of the label CSV format.
const LABELS_HEADER: &str = "index,label";

/// Header of the output CSV format.
const OUTPUT_HEADER: &str = "index,label,level,rank,margin";

/// An immutable, dense, row-major matrix of `f32` embeddings with cached
/// per-row Euclidean norms.
///
/// Values are stored as `f32` (matching the file format); all arithmetic
/// downstream accumulates in `f64`. Construction validates that every value
/// is finite and every row has a strictly positive norm, so the cached norms
/// are always safe to divide by.
#[derive(Debug, Clone)]
pub struct EmbeddingSet {
    dim: usize,
    data: Vec<f32>,
    norms: Vec<f64>,
}

impl EmbeddingSet {
    /// Builds a set from row-major values. `data.len()` must be a multiple
    /// of `dim`; a zero-row set is valid (its dimension is still `dim`).
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DomainError {
                what: "embedding dimension must be positive".into(),
            });
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DomainError {
                what: format!(
                    "data length {} is not a multiple of dimension {dim}",
                    data.len()
                ),
            });
        }
        let count = data.len() / dim;
        let mut norms = Vec::with_capacity(count);
        for row in 0..count {
            let slice = &data[row * dim..(row + 1) * dim];
            let mut acc = 0.0f64;
            for (col, &v) in slice.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFiniteValue { row, col });
                }
                acc += v as f64 * v as f64;
            }
            let norm = acc.sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroNormRow { row });
            }
            norms.push(norm);
        }
        Ok(EmbeddingSet { dim, data, norms })
    }

    /// Number of rows.
    pub fn count(&self) -> usize {
        self.norms.len()
    }

    /// Dimension of every row.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `true` when the set has no rows.
    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    /// Row `i` as a slice of length [`dim`](Self::dim).
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Cached Euclidean norm of row `i` (strictly positive).
    pub fn norm(&self, i: usize) -> f64 {
        self.norms[i]
    }

    /// All values, row-major.
    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// Loads an embedding file, validating magic, header arithmetic, finiteness,
/// and the no-zero-rows rule.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 {
        return Err(Error::malformed(
            path,
            format!("file is {} bytes long; the header alone is 16", bytes.len()),
        ));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::malformed(
            path,
            format!("bad magic {:?}, expected \"EMB1\"", &bytes[0..4]),
        ));
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    if dim == 0 {
        return Err(Error::malformed(path, "dimension field is zero"));
    }
    let count = usize::try_from(count)
        .map_err(|_| Error::malformed(path, format!("row count {count} does not fit in memory")))?;
    let expected = (count as u128) * (dim as u128) * 4;
    let actual = (bytes.len() - 16) as u128;
    if expected != actual {
        return Err(Error::malformed(
            path,
            format!("expected {expected} payload bytes for {count} x {dim} values, found {actual}"),
        ));
    }
    let mut data = Vec::with_capacity(count * dim);
    for chunk in bytes[16..].chunks_exact(4) {
        data.push(f32::from_le_bytes(chunk.try_into().unwrap()));
    }
    EmbeddingSet::new(dim, data)
}

/// Writes an embedding set in the binary format described in the module
/// docs. Loading the result reproduces every value bit-exactly.
pub fn write_embeddings(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(16 + set.data().len() * 4);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(set.dim() as u32).to_le_bytes());
    bytes.extend_from_slice(&(set.count() as u64).to_le_bytes());
    for v in set.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Class assignments for an embedding set, together with the size of the
/// closed label space.
///
/// Labels are 0-based everywhere; `num_classes` is at least 2 and every
/// label lies in `[0, num_classes)`.
#[derive(Debug, Clone)]
pub struct LabelVector {
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabelVector {
    /// Builds a label vector over an explicit class count.
    pub fn new(labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::TooFewClasses { found: num_classes });
        }
        for (row, &label) in labels.iter().enumerate() {
            if label >= num_classes {
                return Err(Error::LabelOutOfRange {
                    row,
                    label,
                    num_classes,
                });
            }
        }
        Ok(LabelVector {
            labels,
            num_classes,
        })
    }

    /// Builds a label vector inferring `num_classes = 1 + max(labels)`.
    pub fn infer(labels: Vec<usize>) -> Result<Self> {
        let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
        if num_classes < 2 {
            return Err(Error::TooFewClasses { found: num_classes });
        }
        Ok(LabelVector {
            labels,
            num_classes,
        })
    }

    /// Number of labeled rows.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    /// `true` when no rows are labeled.
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Label of row `i`.
    pub fn get(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// All labels in row order.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Size of the closed label space.
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }
}

/// Loads a label CSV.
///
/// The row count must equal `expected_count` (the count of the embedding
/// set the labels belong to). When `num_classes` is `None` the class count
/// is inferred as `1 + max(label)`.
pub fn load_labels(
    path: impl AsRef<Path>,
    expected_count: usize,
    num_classes: Option<usize>,
) -> Result<LabelVector> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l));
    match lines.next() {
        Some(h) if h == LABELS_HEADER => {}
        Some(h) => {
            return Err(Error::malformed(
                path,
                format!("expected header {LABELS_HEADER:?}, found {h:?}"),
            ))
        }
        None => return Err(Error::malformed(path, "file is empty")),
    }
    let mut labels = Vec::new();
    for (row, line) in lines.enumerate() {
        if line.is_empty() {
            continue; // tolerate a trailing newline
        }
        let mut fields = line.split(',');
        let (index_text, label_text) = match (fields.next(), fields.next(), fields.next()) {
            (Some(i), Some(l), None) => (i, l),
            _ => {
                return Err(Error::malformed(
                    path,
                    format!("row {row} does not have exactly two fields: {line:?}"),
                ))
            }
        };
        let index: usize = index_text.parse().map_err(|_| {
            Error::malformed(
                path,
                format!("row {row} has non-integer index {index_text:?}"),
            )
        })?;
        if index != row {
            return Err(Error::malformed(
                path,
                format!("row {row} has index {index}; the index column must be 0-based file order"),
            ));
        }
        labels.push(parse_label(label_text, row)?);
    }
    if labels.len() != expected_count {
        return Err(Error::CountMismatch {
            expected: expected_count,
            found: labels.len(),
        });
    }
    match num_classes {
        Some(c) => LabelVector::new(labels, c),
        None => LabelVector::infer(labels),
    }
}

/// Parses one label field, distinguishing negative from non-integer input.
fn parse_label(text: &str, row: usize) -> Result<usize> {
    match text.parse::<usize>() {
        Ok(v) => Ok(v),
        Err(_) => {
            if text.parse::<i64>().is_ok_and(|v| v < 0) {
                Err(Error::NegativeLabel { row })
            } else {
                Err(Error::NonIntegerLabel {
                    row,
                    text: text.to_string(),
                })
            }
        }
    }
}

/// Writes a label vector in the label CSV format.
pub fn write_labels(labels: &LabelVector, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str(LABELS_HEADER);
    out.push('\n');
    for (i, &label) in labels.labels().iter().enumerate() {
        out.push_str(&format!("{i},{label}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// One labeled point in a labeling run's output.
///
/// `index` is the row in the unlabeled input set; `level` is the pass in
/// which the point was labeled (0-based; direct voting labels everything in
/// level 0); `rank` is the position within its level; `margin` is the
/// winning vote fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputRecord {
    pub index: usize,
    pub label: usize,
    pub level: usize,
    pub rank: usize,
    pub margin: f64,
}

/// The complete result of a labeling run: one record per unlabeled input
/// point.
#[derive(Debug, Clone, Default)]
pub struct LabeledOutput {
    pub records: Vec<OutputRecord>,
}

impl LabeledOutput {
    /// Number of levels used (0 for an empty output).
    pub fn num_levels(&self) -> usize {
        self.records.iter().map(|r| r.level + 1).max().unwrap_or(0)
    }

    /// Checks the structural invariants: indices are a permutation of
    /// `0..len`, levels are contiguous from 0, ranks within each level are
    /// a permutation of `0..level_size`, and margins lie in `(0, 1]`.
    pub fn validate(&self) -> Result<()> {
        let n = self.records.len();
        let mut seen_index = vec![false; n];
        for r in &self.records {
            if r.index >= n || seen_index[r.index] {
                return Err(Error::DomainError {
                    what: format!("output indices are not a permutation of 0..{n}"),
                });
            }
            seen_index[r.index] = true;
            if !(r.margin > 0.0 && r.margin <= 1.0) {
                return Err(Error::DomainError {
                    what: format!("margin {} at index {} is outside (0, 1]", r.margin, r.index),
                });
            }
        }
        let levels = self.num_levels();
        let mut per_level: Vec<Vec<usize>> = vec![Vec::new(); levels];
        for r in &self.records {
            per_level[r.level].push(r.rank);
        }
        for (level, mut ranks) in per_level.into_iter().enumerate() {
            let size = ranks.len();
            if size == 0 {
                return Err(Error::DomainError {
                    what: format!("level {level} is empty; levels must be contiguous"),
                });
            }
            ranks.sort_unstable();
            if ranks.iter().enumerate().any(|(i, &r)| i != r) {
                return Err(Error::DomainError {
                    what: format!("ranks within level {level} are not a permutation of 0..{size}"),
                });
            }
        }
        Ok(())
    }
}

/// Writes a labeling output in the output CSV format (sorted by
/// `(level, rank)`, margin with six decimals, LF endings).
pub fn write_output(output: &LabeledOutput, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut rows: Vec<&OutputRecord> = output.records.iter().collect();
    rows.sort_by_key(|r| (r.level, r.rank));
    let mut text = String::new();
    text.push_str(OUTPUT_HEADER);
    text.push('\n');
    for r in rows {
        let mut line = String::new();
        // write! to a String cannot fail
        write!(
            line,
            "{},{},{},{},{:.6}",
            r.index, r.label, r.level, r.rank, r.margin
        )
        .unwrap();
        text.push_str(&line);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads an output CSV previously produced by [`write_output`].
pub fn load_output(path: impl AsRef<Path>) -> Result<LabeledOutput> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l));
    match lines.next() {
        Some(h) if h == OUTPUT_HEADER => {}
        Some(h) => {
            return Err(Error::malformed(
                path,
                format!("expected header {OUTPUT_HEADER:?}, found {h:?}"),
            ))
        }
        None => return Err(Error::malformed(path, "file is empty")),
    }
    let mut records = Vec::new();
    for (row, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::malformed(
                path,
                format!("row {row} does not have exactly five fields: {line:?}"),
            ));
        }
        let parse_usize = |text: &str, what: &str| -> Result<usize> {
            text.parse().map_err(|_| {
                Error::malformed(path, format!("row {row} has non-integer {what} {text:?}"))
            })
        };
        let margin: f64 = fields[4].parse().map_err(|_| {
            Error::malformed(
                path,
                format!("row {row} has non-numeric margin {:?}", fields[4]),
            )
        })?;
        records.push(OutputRecord {
            index: parse_usize(fields[0], "index")?,
            label: parse_usize(fields[1], "label")?,
            level: parse_usize(fields[2], "level")?,
            rank: parse_usize(fields[3], "rank")?,
            margin,
        });
    }
    Ok(LabeledOutput { records })
}
