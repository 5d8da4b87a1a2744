//! Dataset representation: block structure over coordinates and CSV ingestion.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Partition of the `d` flat coordinates into `p` contiguous blocks, block
/// `l` holding the coordinates of the `l`-th component vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSpec {
    dims: Vec<usize>,
    offsets: Vec<usize>,
    total: usize,
}

impl BlockSpec {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidSpec(format!(
                "need at least 2 blocks, got {}",
                dims.len()
            )));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidSpec("every block dimension must be >= 1".into()));
        }
        let mut offsets = Vec::with_capacity(dims.len());
        let mut total = 0usize;
        for &dl in &dims {
            offsets.push(total);
            total += dl;
        }
        Ok(Self { dims, offsets, total })
    }

    /// Number of blocks `p`.
    pub fn p(&self) -> usize {
        self.dims.len()
    }

    /// Total dimension `d`.
    pub fn d(&self) -> usize {
        self.total
    }

    /// Dimension of block `l` (0-based).
    pub fn dim(&self, l: usize) -> usize {
        self.dims[l]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Half-open flat coordinate range of block `l`.
    pub fn range(&self, l: usize) -> std::ops::Range<usize> {
        let start = self.offsets[l];
        start..start + self.dims[l]
    }
}

/// `n` observations of the concatenated `d`-dimensional vector, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
    n: usize,
    spec: BlockSpec,
}

impl Sample {
    /// Builds a sample from a row-major matrix. Rejects non-finite values.
    pub fn from_rows(values: Vec<f64>, n: usize, spec: BlockSpec) -> Result<Self> {
        let d = spec.d();
        if values.len() != n * d {
            return Err(Error::InvalidSpec(format!(
                "matrix has {} entries, expected {}x{}",
                values.len(),
                n,
                d
            )));
        }
        for (idx, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::BadField {
                    row: idx / d + 1,
                    col: idx % d + 1,
                    reason: format!("non-finite value {v}"),
                });
            }
        }
        Ok(Self { values, n, spec })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.spec.d()
    }

    pub fn spec(&self) -> &BlockSpec {
        &self.spec
    }

    /// Row `i` as a flat `d`-slice.
    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.spec.d();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Columns of block `l` for row `i`.
    pub fn block_row(&self, i: usize, l: usize) -> &[f64] {
        let r = self.spec.range(l);
        &self.row(i)[r]
    }

    /// The `n x d_l` sub-matrix of block `l`, copied row-major.
    pub fn block_view(&self, l: usize) -> Result<Vec<f64>> {
        if l >= self.spec.p() {
            return Err(Error::BlockOutOfRange { index: l, p: self.spec.p() });
        }
        let mut out = Vec::with_capacity(self.n * self.spec.dim(l));
        for i in 0..self.n {
            out.extend_from_slice(self.block_row(i, l));
        }
        Ok(out)
    }

    /// Single flat coordinate as a column vector.
    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i)[k]).collect()
    }

    /// New sample with row `j` removed.
    pub fn without_row(&self, j: usize) -> Result<Sample> {
        if j >= self.n {
            return Err(Error::RowOutOfRange { index: j, n: self.n });
        }
        let d = self.spec.d();
        let mut values = Vec::with_capacity((self.n - 1) * d);
        for i in 0..self.n {
            if i != j {
                values.extend_from_slice(self.row(i));
            }
        }
        Ok(Sample { values, n: self.n - 1, spec: self.spec.clone() })
    }

    /// New sample where, for each block `l >= 1`, the rows of that block are
    /// rearranged by `perms[l-1]`. Block 0 stays fixed.
    pub fn permute_blocks(&self, perms: &[Vec<usize>]) -> Result<Sample> {
        let p = self.spec.p();
        if perms.len() != p - 1 {
            return Err(Error::InvalidSpec(format!(
                "expected {} permutations, got {}",
                p - 1,
                perms.len()
            )));
        }
        let d = self.spec.d();
        let mut values = self.values.clone();
        for (l, perm) in (1..p).zip(perms) {
            let r = self.spec.range(l);
            for i in 0..self.n {
                let src = perm[i];
                for (off, k) in r.clone().enumerate() {
                    values[i * d + k] = self.values[src * d + r.start + off];
                }
            }
        }
        Sample::from_rows(values, self.n, self.spec.clone())
    }
}

/// Reads a comma-separated file with `d` numeric fields per row.
///
/// Non-numeric or non-finite fields are hard errors reported with their
/// 1-based row and column.
pub fn load_csv<P: AsRef<Path>>(path: P, spec: BlockSpec, header: bool) -> Result<Sample> {
    let file = File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let d = spec.d();
    let mut values = Vec::new();
    let mut n = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if lineno == 0 && header {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let row = n + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d {
            return Err(Error::BadArity { row, expected: d, found: fields.len() });
        }
        for (c, field) in fields.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::BadField {
                row,
                col: c + 1,
                reason: format!("cannot parse {:?} as a number", field.trim()),
            })?;
            if !v.is_finite() {
                return Err(Error::BadField {
                    row,
                    col: c + 1,
                    reason: format!("non-finite value {v}"),
                });
            }
            values.push(v);
        }
        n += 1;
    }
    Sample::from_rows(values, n, spec)
}

/// Writes a sample in the same format `load_csv` reads (no header).
pub fn write_csv<P: AsRef<Path>>(path: P, sample: &Sample) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    for i in 0..sample.n() {
        let row: Vec<String> = sample.row(i).iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}
