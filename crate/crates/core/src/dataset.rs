//! LIBSVM-format parsing and sample partitioning across simulated nodes.
//!
//! Accepted line grammar: `<label> <index>:<value> ...` with 1-based,
//! strictly increasing indices. Labels `{+1, 1}` map to `+1`; `{0, -1, 2}`
//! map to `-1` (the `2 -> -1` convention covers some binary LIBSVM files).
//! Blank lines are skipped and `#` starts a comment.

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::rng::{RngStream, StreamKey, CHANNEL_PARTITION};
use crate::scalar::Scalar;
use crate::vector::DenseVector;

/// One sparse sample: sorted feature indices with their values.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseRow<T> {
    pub indices: Vec<u32>,
    pub values: Vec<T>,
}

impl<T: Scalar> SparseRow<T> {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn dot(&self, x: &DenseVector<T>) -> T {
        let mut acc = T::zero();
        for (i, v) in self.indices.iter().zip(self.values.iter()) {
            acc += *v * x[*i as usize];
        }
        acc
    }

    /// `out[i] += coeff * row[i]` over the stored support.
    pub fn scatter_add(&self, coeff: T, out: &mut [T]) {
        for (i, v) in self.indices.iter().zip(self.values.iter()) {
            out[*i as usize] += coeff * *v;
        }
    }

    pub fn norm_sq(&self) -> T {
        let mut acc = T::zero();
        for v in &self.values {
            acc += *v * *v;
        }
        acc
    }
}

/// Parsed dataset: sparse rows, normalized labels in `{-1, +1}`, dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseDataset<T> {
    rows: Vec<SparseRow<T>>,
    labels: Vec<T>,
    dim: usize,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: missing label")]
    MissingLabel { line: usize },
    #[error("line {line}: label `{label}` not in {{0, 1, -1, +1, 2}}")]
    InvalidLabel { line: usize, label: String },
    #[error("line {line}: malformed feature token `{token}` (expected index:value)")]
    MalformedToken { line: usize, token: String },
    #[error("line {line}: invalid feature index `{token}` (1-based positive integer)")]
    InvalidIndex { line: usize, token: String },
    #[error("line {line}: invalid feature value `{token}`")]
    InvalidValue { line: usize, token: String },
    #[error("line {line}: feature indices must be strictly increasing (index {index} repeats or decreases)")]
    NonIncreasingIndex { line: usize, index: u32 },
    #[error("dataset has no samples")]
    Empty,
    #[error("dimension override {given} is below the inferred dimension {required}")]
    DimOverrideTooSmall { required: usize, given: usize },
    #[error("cannot split {m} samples across {n} nodes")]
    TooManyNodes { m: usize, n: usize },
}

impl<T: Scalar> SparseDataset<T> {
    pub fn new(rows: Vec<SparseRow<T>>, labels: Vec<T>, dim: usize) -> Self {
        assert_eq!(rows.len(), labels.len());
        Self { rows, labels, dim }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[SparseRow<T>] {
        &self.rows
    }

    pub fn labels(&self) -> &[T] {
        &self.labels
    }

    pub fn partition(&self, n: usize, scheme: PartitionScheme) -> Result<Partition, DatasetError> {
        Partition::split(self.len(), n, scheme)
    }
}

fn normalize_label<T: Scalar>(raw: &str, line: usize) -> Result<T, DatasetError> {
    let err = || DatasetError::InvalidLabel {
        line,
        label: raw.to_string(),
    };
    let value: f64 = raw.parse().map_err(|_| err())?;
    if value == 1.0 {
        Ok(T::one())
    } else if value == -1.0 || value == 0.0 || value == 2.0 {
        Ok(-T::one())
    } else {
        Err(err())
    }
}

/// Parses LIBSVM text into a dataset; `dim_override` forces a dimension at
/// least as large as the inferred one.
pub fn parse_libsvm<T: Scalar, R: BufRead>(
    reader: R,
    dim_override: Option<usize>,
) -> Result<SparseDataset<T>, DatasetError> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut max_dim = 0usize;

    for (line_idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = line_idx + 1;
        let content = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line[..],
        };
        let mut tokens = content.split_whitespace();
        let label_tok = match tokens.next() {
            Some(t) => t,
            None => continue, // blank or comment-only line
        };
        if label_tok.contains(':') {
            return Err(DatasetError::MissingLabel { line: line_no });
        }
        let label = normalize_label::<T>(label_tok, line_no)?;

        let mut indices: Vec<u32> = Vec::new();
        let mut values: Vec<T> = Vec::new();
        for tok in tokens {
            let (idx_str, val_str) = tok.split_once(':').ok_or(DatasetError::MalformedToken {
                line: line_no,
                token: tok.to_string(),
            })?;
            let idx: u32 = idx_str.parse().map_err(|_| DatasetError::InvalidIndex {
                line: line_no,
                token: idx_str.to_string(),
            })?;
            if idx == 0 {
                return Err(DatasetError::InvalidIndex {
                    line: line_no,
                    token: idx_str.to_string(),
                });
            }
            let value: f64 = val_str.parse().map_err(|_| DatasetError::InvalidValue {
                line: line_no,
                token: val_str.to_string(),
            })?;
            if !value.is_finite() {
                return Err(DatasetError::InvalidValue {
                    line: line_no,
                    token: val_str.to_string(),
                });
            }
            let zero_based = idx - 1;
            if let Some(&last) = indices.last() {
                if zero_based <= last {
                    return Err(DatasetError::NonIncreasingIndex {
                        line: line_no,
                        index: idx,
                    });
                }
            }
            indices.push(zero_based);
            values.push(T::from_config(value));
            max_dim = max_dim.max(zero_based as usize + 1);
        }

        rows.push(SparseRow { indices, values });
        labels.push(label);
    }

    if rows.is_empty() {
        return Err(DatasetError::Empty);
    }
    let dim = match dim_override {
        Some(given) if given < max_dim => {
            return Err(DatasetError::DimOverrideTooSmall {
                required: max_dim,
                given,
            })
        }
        Some(given) => given,
        None => max_dim,
    };
    Ok(SparseDataset::new(rows, labels, dim))
}

/// Writes a dataset back out in LIBSVM format (1-based indices).
pub fn write_libsvm<T: Scalar, W: Write>(ds: &SparseDataset<T>, mut out: W) -> std::io::Result<()> {
    for (row, label) in ds.rows().iter().zip(ds.labels()) {
        let l = if *label > T::zero() { "+1" } else { "-1" };
        write!(out, "{l}")?;
        for (i, v) in row.indices.iter().zip(row.values.iter()) {
            write!(out, " {}:{}", i + 1, v.to_f64_lossy())?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// How samples are assigned to nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartitionScheme {
    /// Node `i` gets samples `[floor(i m / n), floor((i+1) m / n))`.
    Contiguous,
    /// Same split after a seeded permutation of `[0, m)`.
    Shuffled { seed: u64 },
}

/// Disjoint cover of sample indices, one list per node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    nodes: Vec<Vec<usize>>,
}

impl Partition {
    pub fn split(m: usize, n: usize, scheme: PartitionScheme) -> Result<Self, DatasetError> {
        if n == 0 || n > m {
            return Err(DatasetError::TooManyNodes { m, n });
        }
        let order: Vec<usize> = match scheme {
            PartitionScheme::Contiguous => (0..m).collect(),
            PartitionScheme::Shuffled { seed } => {
                let mut order: Vec<usize> = (0..m).collect();
                let mut stream = RngStream::new(
                    seed,
                    StreamKey {
                        node: 0,
                        iteration: 0,
                        channel: CHANNEL_PARTITION,
                    },
                );
                // Fisher-Yates
                for i in (1..m).rev() {
                    let j = stream.draw_index(i + 1);
                    order.swap(i, j);
                }
                order
            }
        };
        let nodes = (0..n)
            .map(|i| order[i * m / n..(i + 1) * m / n].to_vec())
            .collect();
        Ok(Self { nodes })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, i: usize) -> &[usize] {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> &[Vec<usize>] {
        &self.nodes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn parse(text: &str) -> Result<SparseDataset<f64>, DatasetError> {
        parse_libsvm(Cursor::new(text), None)
    }

    #[test]
    fn parses_constructed_line() {
        let ds = parse("+1 1:0.5 3:2\n").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.labels()[0], 1.0);
        assert_eq!(ds.rows()[0].indices, vec![0, 2]);
        assert_eq!(ds.rows()[0].values, vec![0.5, 2.0]);
        assert!(ds.dim() >= 3);
    }

    #[test]
    fn zero_label_maps_to_minus_one() {
        let ds = parse("0 2:1\n").unwrap();
        assert_eq!(ds.labels()[0], -1.0);
        let ds = parse("2 1:1\n").unwrap();
        assert_eq!(ds.labels()[0], -1.0);
    }

    #[test]
    fn skips_blanks_and_comments() {
        let ds = parse("# header comment\n\n+1 1:1 # trailing\n\n-1 2:3\n").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dim(), 2);
    }

    #[test]
    fn located_errors() {
        let err = parse("+1 1:1\n+3 1:1\n").unwrap_err();
        assert!(
            matches!(err, DatasetError::InvalidLabel { line: 2, .. }),
            "{err}"
        );
        let err = parse("+1 5:1 3:2\n").unwrap_err();
        assert!(
            matches!(err, DatasetError::NonIncreasingIndex { line: 1, index: 3 }),
            "{err}"
        );
        let err = parse("+1 3:1 3:2\n").unwrap_err();
        assert!(matches!(
            err,
            DatasetError::NonIncreasingIndex { line: 1, .. }
        ));
        let err = parse("+1 0:1\n").unwrap_err();
        assert!(matches!(err, DatasetError::InvalidIndex { line: 1, .. }));
        let err = parse("+1 2:abc\n").unwrap_err();
        assert!(matches!(err, DatasetError::InvalidValue { line: 1, .. }));
        let err = parse("+1 nocolon\n").unwrap_err();
        assert!(matches!(err, DatasetError::MalformedToken { line: 1, .. }));
    }

    #[test]
    fn dim_override_rules() {
        let ds = parse_libsvm::<f64, _>(Cursor::new("+1 3:1\n"), Some(10)).unwrap();
        assert_eq!(ds.dim(), 10);
        let err = parse_libsvm::<f64, _>(Cursor::new("+1 3:1\n"), Some(2)).unwrap_err();
        assert!(matches!(
            err,
            DatasetError::DimOverrideTooSmall {
                required: 3,
                given: 2
            }
        ));
    }

    #[test]
    fn round_trip_reparses_identically() {
        let text = "+1 1:0.5 3:2\n-1 2:1.25 4:-3\n+1 1:1\n";
        let ds = parse(text).unwrap();
        let mut buf = Vec::new();
        write_libsvm(&ds, &mut buf).unwrap();
        let ds2 = parse_libsvm::<f64, _>(Cursor::new(buf), Some(ds.dim())).unwrap();
        assert_eq!(ds, ds2);
    }

    #[test]
    fn contiguous_partition_formula() {
        let p = Partition::split(10, 1, PartitionScheme::Contiguous).unwrap();
        assert_eq!(p.node(0), (0..10).collect::<Vec<_>>());
        let p = Partition::split(10, 2, PartitionScheme::Contiguous).unwrap();
        assert_eq!(p.node(0), &[0, 1, 2, 3, 4]);
        assert_eq!(p.node(1), &[5, 6, 7, 8, 9]);
        // uneven split stays a disjoint cover with every node nonempty
        let p = Partition::split(10, 3, PartitionScheme::Contiguous).unwrap();
        assert_eq!(p.nodes().iter().map(|n| n.len()).sum::<usize>(), 10);
        assert!(p.nodes().iter().all(|n| !n.is_empty()));
    }

    #[test]
    fn shuffled_partition_is_a_permutation_and_deterministic() {
        let a = Partition::split(37, 5, PartitionScheme::Shuffled { seed: 3 }).unwrap();
        let b = Partition::split(37, 5, PartitionScheme::Shuffled { seed: 3 }).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<usize> = a.nodes().iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..37).collect::<Vec<_>>());
        let c = Partition::split(37, 5, PartitionScheme::Shuffled { seed: 4 }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_more_nodes_than_samples() {
        assert!(matches!(
            Partition::split(3, 4, PartitionScheme::Contiguous),
            Err(DatasetError::TooManyNodes { m: 3, n: 4 })
        ));
    }
}
