//! Dense and sparse (CSR) numeric kernels shared by every other module.
//!
//! All values are 64-bit floats. Accumulations run in plain left-to-right
//! order per output entry, so results are bitwise reproducible run to run.
//! Row-parallel execution (see [`kernel_threads`]) computes each output row
//! with the same per-row order and is therefore bitwise identical to the
//! sequential path.

use crate::error::{Error, Result};
use rayon::prelude::*;
use std::sync::OnceLock;

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidConfig(format!(
                "dense matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        let m = DenseMatrix { rows, cols, data };
        m.check_finite("DenseMatrix::new")?;
        Ok(m)
    }

    /// Build from nested rows; handy in tests and small fixtures.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::InvalidConfig(
                    "ragged rows in dense matrix literal".to_string(),
                ));
            }
            data.extend_from_slice(row);
        }
        DenseMatrix::new(r, c, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn check_finite(&self, context: &str) -> Result<()> {
        for &v in &self.data {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: context.to_string(),
                });
            }
        }
        Ok(())
    }

    /// `self * other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(shape_err("matmul", self, other));
        }
        let (n, p, q) = (self.rows, self.cols, other.cols);
        let mut out = DenseMatrix::zeros(n, q);
        let a = &self.data;
        let b = &other.data;
        for_each_row(&mut out.data, q, |i, row| {
            for k in 0..p {
                let aik = a[i * p + k];
                if aik == 0.0 {
                    continue;
                }
                let brow = &b[k * q..(k + 1) * q];
                for (o, &bv) in row.iter_mut().zip(brow) {
                    *o += aik * bv;
                }
            }
        });
        out.check_finite("matmul")?;
        Ok(out)
    }

    /// `selfᵀ * other`; both operands share their row count.
    pub fn t_matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows {
            return Err(shape_err("t_matmul", self, other));
        }
        let (n, p, q) = (self.rows, self.cols, other.cols);
        let mut out = DenseMatrix::zeros(p, q);
        for i in 0..n {
            let arow = &self.data[i * p..(i + 1) * p];
            let brow = &other.data[i * q..(i + 1) * q];
            for (k, &av) in arow.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                let orow = &mut out.data[k * q..(k + 1) * q];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
        out.check_finite("t_matmul")?;
        Ok(out)
    }

    /// `self * otherᵀ`; operands share their column count.
    pub fn matmul_t(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.cols {
            return Err(shape_err("matmul_t", self, other));
        }
        let (n, p, q) = (self.rows, self.cols, other.rows);
        let mut out = DenseMatrix::zeros(n, q);
        let a = &self.data;
        let b = &other.data;
        for_each_row(&mut out.data, q, |i, row| {
            let arow = &a[i * p..(i + 1) * p];
            for (j, o) in row.iter_mut().enumerate() {
                let brow = &b[j * p..(j + 1) * p];
                let mut acc = 0.0;
                for (&av, &bv) in arow.iter().zip(brow) {
                    acc += av * bv;
                }
                *o = acc;
            }
        });
        out.check_finite("matmul_t")?;
        Ok(out)
    }

    /// Entrywise `self - other`.
    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(shape_err("sub", self, other));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        DenseMatrix::new(self.rows, self.cols, data)
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(shape_err("add", self, other));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        DenseMatrix::new(self.rows, self.cols, data)
    }

    pub fn scale(&self, s: f64) -> Result<DenseMatrix> {
        let data = self.data.iter().map(|a| a * s).collect();
        DenseMatrix::new(self.rows, self.cols, data)
    }

    /// Sum of squared entries (squared Frobenius norm).
    pub fn frobenius_sq(&self) -> f64 {
        let mut acc = 0.0;
        for &v in &self.data {
            acc += v * v;
        }
        acc
    }

    /// Entrywise inner product `Σ self_ij * other_ij`.
    pub fn dot(&self, other: &DenseMatrix) -> Result<f64> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(shape_err("dot", self, other));
        }
        let mut acc = 0.0;
        for (a, b) in self.data.iter().zip(&other.data) {
            acc += a * b;
        }
        Ok(acc)
    }
}

fn shape_err(op: &'static str, a: &DenseMatrix, b: &DenseMatrix) -> Error {
    Error::ShapeMismatch {
        op,
        left_rows: a.rows,
        left_cols: a.cols,
        right_rows: b.rows,
        right_cols: b.cols,
    }
}

/// Compressed sparse row matrix; the single sparse format in this crate.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != rows + 1 {
            return Err(Error::InvalidSparse(format!(
                "row_ptr length {} != rows+1 ({})",
                row_ptr.len(),
                rows + 1
            )));
        }
        if row_ptr[0] != 0 || row_ptr[rows] != col_idx.len() || col_idx.len() != values.len() {
            return Err(Error::InvalidSparse(
                "row_ptr endpoints do not match nnz".to_string(),
            ));
        }
        for i in 0..rows {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(Error::InvalidSparse(format!(
                    "row_ptr decreases at row {i}"
                )));
            }
            let cols_slice = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            for w in cols_slice.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::InvalidSparse(format!(
                        "column indices not strictly increasing in row {i}"
                    )));
                }
            }
            if let Some(&last) = cols_slice.last() {
                if last >= cols {
                    return Err(Error::InvalidSparse(format!(
                        "column index {last} out of range in row {i}"
                    )));
                }
            }
        }
        for &v in &values {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: "SparseMatrix::new".to_string(),
                });
            }
        }
        Ok(SparseMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        for &(r, c, _) in triplets {
            if r >= rows {
                return Err(Error::IndexOutOfRange { index: r, n: rows });
            }
            if c >= cols {
                return Err(Error::IndexOutOfRange { index: c, n: cols });
            }
        }
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        row_ptr.push(0);
        let mut iter = sorted.iter().peekable();
        for r in 0..rows {
            while let Some(&&(tr, tc, tv)) = iter.peek() {
                if tr != r {
                    break;
                }
                iter.next();
                if col_idx.len() > row_ptr[r] && *col_idx.last().unwrap() == tc {
                    *values.last_mut().unwrap() += tv;
                } else {
                    col_idx.push(tc);
                    values.push(tv);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix::new(rows, cols, row_ptr, col_idx, values)
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row_entries(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        let (_, vals) = self.row_entries(i);
        let mut acc = 0.0;
        for &v in vals {
            acc += v;
        }
        acc
    }

    /// CSR transpose via counting sort; deterministic.
    pub fn transpose(&self) -> SparseMatrix {
        let nnz = self.nnz();
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for i in 0..self.cols {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut col_idx = vec![0usize; nnz];
        let mut values = vec![0.0f64; nnz];
        let mut next = counts;
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                let pos = next[c];
                next[c] += 1;
                col_idx[pos] = r;
                values[pos] = self.values[k];
            }
        }
        SparseMatrix {
            rows: self.cols,
            cols: self.rows,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let (cols, vals) = self.row_entries(i);
            for (&c, &v) in cols.iter().zip(vals) {
                m.set(i, c, v);
            }
        }
        m
    }
}

/// CSR × dense product.
pub fn spmm(a: &SparseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.rows() {
        return Err(Error::ShapeMismatch {
            op: "spmm",
            left_rows: a.rows,
            left_cols: a.cols,
            right_rows: b.rows(),
            right_cols: b.cols(),
        });
    }
    let q = b.cols();
    let mut out = DenseMatrix::zeros(a.rows, q);
    let bd = b.data();
    for_each_row(&mut out.data, q, |i, row| {
        for k in a.row_ptr[i]..a.row_ptr[i + 1] {
            let c = a.col_idx[k];
            let v = a.values[k];
            let brow = &bd[c * q..(c + 1) * q];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += v * bv;
            }
        }
    });
    out.check_finite("spmm")?;
    Ok(out)
}

/// Ã = A + I; existing diagonal entries are incremented by 1.
pub fn add_self_loops(a: &SparseMatrix) -> Result<SparseMatrix> {
    if a.rows != a.cols {
        return Err(Error::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(a.nnz() + n);
    let mut values = Vec::with_capacity(a.nnz() + n);
    row_ptr.push(0);
    for i in 0..n {
        let (cols, vals) = a.row_entries(i);
        let mut placed = false;
        for (&c, &v) in cols.iter().zip(vals) {
            if c == i {
                col_idx.push(c);
                values.push(v + 1.0);
                placed = true;
            } else {
                if !placed && c > i {
                    col_idx.push(i);
                    values.push(1.0);
                    placed = true;
                }
                col_idx.push(c);
                values.push(v);
            }
        }
        if !placed {
            col_idx.push(i);
            values.push(1.0);
        }
        row_ptr.push(col_idx.len());
    }
    SparseMatrix::new(n, n, row_ptr, col_idx, values)
}

/// D̃⁻¹Ã: divide every row by its sum. Errors if a row sum is not positive.
pub fn row_normalize(a: &SparseMatrix) -> Result<SparseMatrix> {
    if a.rows != a.cols {
        return Err(Error::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let mut out = a.clone();
    for i in 0..a.rows {
        let sum = a.row_sum(i);
        if sum <= 0.0 {
            return Err(Error::ZeroRowSum { row: i, sum });
        }
        for k in out.row_ptr[i]..out.row_ptr[i + 1] {
            out.values[k] /= sum;
        }
    }
    Ok(out)
}

/// D̃^{-1/2} Ã D̃^{-1/2}; input must be symmetric with positive row sums.
pub fn sym_normalize(a: &SparseMatrix) -> Result<SparseMatrix> {
    if a.rows != a.cols {
        return Err(Error::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let t = a.transpose();
    if t.row_ptr != a.row_ptr || t.col_idx != a.col_idx || t.values != a.values {
        // locate first mismatching entry for the error message
        for i in 0..a.rows {
            let (ac, av) = a.row_entries(i);
            let (tc, tv) = t.row_entries(i);
            if ac != tc || av != tv {
                let col = ac
                    .iter()
                    .zip(av)
                    .zip(tc.iter().zip(tv))
                    .find(|((c1, v1), (c2, v2))| c1 != c2 || v1 != v2)
                    .map(|((c, _), _)| *c)
                    .unwrap_or_else(|| ac.first().or(tc.first()).copied().unwrap_or(0));
                return Err(Error::NotSymmetric { row: i, col });
            }
        }
    }
    let mut inv_sqrt = Vec::with_capacity(a.rows);
    for i in 0..a.rows {
        let sum = a.row_sum(i);
        if sum <= 0.0 {
            return Err(Error::ZeroRowSum { row: i, sum });
        }
        inv_sqrt.push(1.0 / sum.sqrt());
    }
    let mut out = a.clone();
    for i in 0..a.rows {
        for k in out.row_ptr[i]..out.row_ptr[i + 1] {
            let j = out.col_idx[k];
            out.values[k] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    Ok(out)
}

/// Graph Laplacian L = D − W from weighted pairs. Weights must be strictly
/// positive (callers flip the sign of negative-pair weights first); duplicate
/// pairs are summed.
pub fn laplacian_from_pairs(pairs: &[(usize, usize, f64)], n: usize) -> Result<SparseMatrix> {
    use std::collections::BTreeMap;
    let mut weight: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for &(i, j, w) in pairs {
        if i == j {
            return Err(Error::SelfPair { i });
        }
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
        if j >= n {
            return Err(Error::IndexOutOfRange { index: j, n });
        }
        if w.is_nan() || w <= 0.0 {
            return Err(Error::NonPositiveWeight { i, j, w });
        }
        let key = (i.min(j), i.max(j));
        *weight.entry(key).or_insert(0.0) += w;
    }
    let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    let mut degree = vec![0.0f64; n];
    for (&(i, j), &w) in &weight {
        rows[i].insert(j, -w);
        rows[j].insert(i, -w);
        degree[i] += w;
        degree[j] += w;
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    for i in 0..n {
        if degree[i] > 0.0 {
            rows[i].insert(i, degree[i]);
        }
        for (&c, &v) in &rows[i] {
            col_idx.push(c);
            values.push(v);
        }
        row_ptr.push(col_idx.len());
    }
    SparseMatrix::new(n, n, row_ptr, col_idx, values)
}

/// Central-difference gradient of a scalar function, entry by entry.
pub fn finite_diff_gradient<F>(mut f: F, at: &DenseMatrix, eps: f64) -> Result<DenseMatrix>
where
    F: FnMut(&DenseMatrix) -> Result<f64>,
{
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "finite difference step must be positive, got {eps}"
        )));
    }
    let mut grad = DenseMatrix::zeros(at.rows(), at.cols());
    let mut probe = at.clone();
    for idx in 0..at.data().len() {
        let orig = probe.data[idx];
        probe.data[idx] = orig + eps;
        let plus = f(&probe)?;
        probe.data[idx] = orig - eps;
        let minus = f(&probe)?;
        probe.data[idx] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite {
                context: "finite_diff_gradient probe".to_string(),
            });
        }
        grad.data[idx] = (plus - minus) / (2.0 * eps);
    }
    Ok(grad)
}

static KERNEL_THREADS: OnceLock<usize> = OnceLock::new();
static KERNEL_POOL: OnceLock<Option<rayon::ThreadPool>> = OnceLock::new();

/// Effective kernel thread count: `JPEC_THREADS` when set (0 and 1 both mean
/// sequential), otherwise the number of available CPUs.
pub fn kernel_threads() -> usize {
    *KERNEL_THREADS.get_or_init(|| match std::env::var("JPEC_THREADS") {
        Ok(v) => v.trim().parse::<usize>().unwrap_or(0),
        Err(_) => std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1),
    })
}

fn kernel_pool() -> Option<&'static rayon::ThreadPool> {
    KERNEL_POOL
        .get_or_init(|| {
            let n = kernel_threads();
            if n <= 1 {
                None
            } else {
                rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()
            }
        })
        .as_ref()
}

/// Run `f` over every output row. Each row is computed independently with a
/// fixed accumulation order, so the parallel path is bitwise identical to the
/// sequential one.
fn for_each_row<F>(data: &mut [f64], cols: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if cols == 0 || data.is_empty() {
        return;
    }
    match kernel_pool() {
        Some(pool) => pool.install(|| {
            data.par_chunks_mut(cols)
                .enumerate()
                .for_each(|(i, row)| f(i, row));
        }),
        None => {
            for (i, row) in data.chunks_mut(cols).enumerate() {
                f(i, row);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn sparse_from_dense(rows: &[Vec<f64>]) -> SparseMatrix {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut trip = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        SparseMatrix::from_triplets(r, c, &trip).unwrap()
    }

    /// Independent oracle: naive triple-loop dense multiplication.
    fn naive_matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = 0.0;
                for k in 0..a.cols() {
                    acc += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    #[test]
    fn spmm_identity() {
        let a = SparseMatrix::identity(2);
        let b = DenseMatrix::from_rows(&[vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let c = spmm(&a, &b).unwrap();
        assert_eq!(c, b);
    }

    #[test]
    fn spmm_zero_sparse() {
        let a = SparseMatrix::from_triplets(2, 2, &[]).unwrap();
        let b = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let c = spmm(&a, &b).unwrap();
        assert!(c.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn spmm_permutation() {
        let a = sparse_from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let b = DenseMatrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        let c = spmm(&a, &b).unwrap();
        assert_eq!(c.data(), &[2.0, 1.0]);
    }

    #[test]
    fn spmm_shape_error_names_both_shapes() {
        let a = SparseMatrix::identity(2);
        let b = DenseMatrix::zeros(3, 1);
        let err = spmm(&a, &b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x2") && msg.contains("3x1"), "{msg}");
    }

    #[test]
    fn spmm_matches_naive_on_random_instances() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..10 {
            let n = 20;
            let mut trip = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if rng.gen::<f64>() < 0.2 {
                        trip.push((i, j, rng.gen::<f64>() * 2.0 - 1.0));
                    }
                }
            }
            let a = SparseMatrix::from_triplets(n, n, &trip).unwrap();
            let mut b = DenseMatrix::zeros(n, n);
            for v in b.data_mut() {
                *v = rng.gen::<f64>() * 2.0 - 1.0;
            }
            let fast = spmm(&a, &b).unwrap();
            let slow = naive_matmul(&a.to_dense(), &b);
            for (x, y) in fast.data().iter().zip(slow.data()) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn dense_matmul_matches_naive() {
        let mut rng = StdRng::seed_from_u64(3);
        let mut a = DenseMatrix::zeros(7, 5);
        let mut b = DenseMatrix::zeros(5, 9);
        for v in a.data_mut() {
            *v = rng.gen::<f64>() - 0.5;
        }
        for v in b.data_mut() {
            *v = rng.gen::<f64>() - 0.5;
        }
        let fast = a.matmul(&b).unwrap();
        let slow = naive_matmul(&a, &b);
        for (x, y) in fast.data().iter().zip(slow.data()) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn t_matmul_and_matmul_t_match_explicit_transpose() {
        let mut rng = StdRng::seed_from_u64(5);
        let mut a = DenseMatrix::zeros(6, 4);
        let mut b = DenseMatrix::zeros(6, 3);
        for v in a.data_mut() {
            *v = rng.gen::<f64>() - 0.5;
        }
        for v in b.data_mut() {
            *v = rng.gen::<f64>() - 0.5;
        }
        let mut at = DenseMatrix::zeros(4, 6);
        for i in 0..6 {
            for j in 0..4 {
                at.set(j, i, a.get(i, j));
            }
        }
        let expect = naive_matmul(&at, &b);
        let got = a.t_matmul(&b).unwrap();
        for (x, y) in got.data().iter().zip(expect.data()) {
            assert!((x - y).abs() <= 1e-12);
        }

        let mut c = DenseMatrix::zeros(5, 4);
        for v in c.data_mut() {
            *v = rng.gen::<f64>() - 0.5;
        }
        let mut ct = DenseMatrix::zeros(4, 5);
        for i in 0..5 {
            for j in 0..4 {
                ct.set(j, i, c.get(i, j));
            }
        }
        let expect = naive_matmul(&a, &ct);
        let got = a.matmul_t(&c).unwrap();
        for (x, y) in got.data().iter().zip(expect.data()) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn add_self_loops_basic() {
        let a = sparse_from_dense(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        let t = add_self_loops(&a).unwrap().to_dense();
        assert_eq!(t.data(), &[1.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn add_self_loops_zero_matrix_gives_identity() {
        let a = SparseMatrix::from_triplets(3, 3, &[]).unwrap();
        let t = add_self_loops(&a).unwrap();
        assert_eq!(t.to_dense(), DenseMatrix::identity(3));
    }

    #[test]
    fn add_self_loops_increments_existing_diagonal() {
        let a = sparse_from_dense(&[vec![2.0, 0.0], vec![0.0, 0.0]]);
        let t = add_self_loops(&a).unwrap().to_dense();
        assert_eq!(t.data(), &[3.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn add_self_loops_rejects_non_square() {
        let a = SparseMatrix::from_triplets(2, 3, &[]).unwrap();
        assert!(matches!(
            add_self_loops(&a),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn row_normalize_uniform_row() {
        let a = sparse_from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let p = row_normalize(&a).unwrap().to_dense();
        assert_eq!(p.data(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn row_normalize_identity_fixed_point() {
        let a = SparseMatrix::identity(3);
        assert_eq!(row_normalize(&a).unwrap(), a);
    }

    #[test]
    fn row_normalize_divides_by_row_sums() {
        let a = sparse_from_dense(&[
            vec![1.0, 1.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![1.0, 1.0, 1.0],
        ]);
        let p = row_normalize(&a).unwrap().to_dense();
        let third = 1.0 / 3.0;
        assert_eq!(
            p.data(),
            &[0.5, 0.5, 0.0, 0.0, 1.0, 0.0, third, third, third]
        );
    }

    #[test]
    fn row_normalize_names_zero_row() {
        let a = sparse_from_dense(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        match row_normalize(&a) {
            Err(Error::ZeroRowSum { row, .. }) => assert_eq!(row, 1),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn sym_normalize_identity() {
        let a = SparseMatrix::identity(2);
        assert_eq!(sym_normalize(&a).unwrap(), a);
    }

    #[test]
    fn sym_normalize_uniform() {
        let a = sparse_from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let p = sym_normalize(&a).unwrap().to_dense();
        for (got, want) in p.data().iter().zip(&[0.5, 0.5, 0.5, 0.5]) {
            assert!((got - want).abs() <= 1e-15);
        }
    }

    #[test]
    fn sym_normalize_rejects_asymmetric() {
        let a = sparse_from_dense(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert!(matches!(sym_normalize(&a), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn regular_graph_row_equals_sym() {
        // ring of 6 nodes plus self-loops: 3-regular
        let mut trip = Vec::new();
        for i in 0..6usize {
            trip.push((i, (i + 1) % 6, 1.0));
            trip.push(((i + 1) % 6, i, 1.0));
        }
        let a = SparseMatrix::from_triplets(6, 6, &trip).unwrap();
        let tilde = add_self_loops(&a).unwrap();
        let r = row_normalize(&tilde).unwrap().to_dense();
        let s = sym_normalize(&tilde).unwrap().to_dense();
        for (x, y) in r.data().iter().zip(s.data()) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn laplacian_single_pair() {
        let l = laplacian_from_pairs(&[(0, 1, 1.0)], 2).unwrap().to_dense();
        assert_eq!(l.data(), &[1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn laplacian_empty_is_zero() {
        let l = laplacian_from_pairs(&[], 3).unwrap();
        assert_eq!(l.nnz(), 0);
    }

    #[test]
    fn laplacian_path_graph() {
        let l = laplacian_from_pairs(&[(0, 1, 1.0), (1, 2, 1.0)], 3)
            .unwrap()
            .to_dense();
        assert_eq!(l.data(), &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]);
    }

    #[test]
    fn laplacian_sums_duplicates() {
        let l = laplacian_from_pairs(&[(0, 1, 1.0), (1, 0, 2.0)], 2)
            .unwrap()
            .to_dense();
        assert_eq!(l.data(), &[3.0, -3.0, -3.0, 3.0]);
    }

    #[test]
    fn laplacian_rejects_bad_pairs() {
        assert!(matches!(
            laplacian_from_pairs(&[(1, 1, 1.0)], 3),
            Err(Error::SelfPair { i: 1 })
        ));
        assert!(matches!(
            laplacian_from_pairs(&[(0, 5, 1.0)], 3),
            Err(Error::IndexOutOfRange { index: 5, n: 3 })
        ));
        assert!(matches!(
            laplacian_from_pairs(&[(0, 1, 0.0)], 3),
            Err(Error::NonPositiveWeight { .. })
        ));
    }

    #[test]
    fn laplacian_psd_spot_check() {
        let mut rng = StdRng::seed_from_u64(17);
        let pairs: Vec<(usize, usize, f64)> = (0..30)
            .map(|_| {
                let i = rng.gen_range(0..10usize);
                let mut j = rng.gen_range(0..10usize);
                while j == i {
                    j = rng.gen_range(0..10usize);
                }
                (i, j, rng.gen::<f64>() + 0.1)
            })
            .collect();
        let l = laplacian_from_pairs(&pairs, 10).unwrap();
        // symmetric
        let t = l.transpose();
        assert_eq!(l, t);
        // L·1 = 0
        let ones = DenseMatrix::new(10, 1, vec![1.0; 10]).unwrap();
        let l1 = spmm(&l, &ones).unwrap();
        for &v in l1.data() {
            assert!(v.abs() <= 1e-12);
        }
        // yᵀLy ≥ 0 for random y
        for _ in 0..100 {
            let y =
                DenseMatrix::new(10, 1, (0..10).map(|_| rng.gen::<f64>() - 0.5).collect()).unwrap();
            let ly = spmm(&l, &y).unwrap();
            let quad = y.dot(&ly).unwrap();
            assert!(quad >= -1e-12, "quadratic form negative: {quad}");
        }
    }

    #[test]
    fn finite_diff_on_sum_is_all_ones() {
        let at = DenseMatrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]).unwrap();
        let g = finite_diff_gradient(|m| Ok(m.data().iter().sum()), &at, 1e-5).unwrap();
        for &v in g.data() {
            assert!((v - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn finite_diff_on_half_norm_sq_is_x() {
        let at = DenseMatrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]).unwrap();
        let g = finite_diff_gradient(|m| Ok(0.5 * m.frobenius_sq()), &at, 1e-5).unwrap();
        for (gv, xv) in g.data().iter().zip(at.data()) {
            assert!((gv - xv).abs() <= 1e-6);
        }
    }

    #[test]
    fn finite_diff_on_quadratic_form_matches_matrix_calculus() {
        // f = tr(xᵀLx) has gradient (L + Lᵀ)x
        let l = sparse_from_dense(&[
            vec![2.0, -1.0, 0.0],
            vec![0.0, 1.5, -0.5],
            vec![1.0, 0.0, 3.0],
        ]);
        let x =
            DenseMatrix::from_rows(&[vec![1.0, 0.2], vec![-1.0, 0.7], vec![0.3, -0.4]]).unwrap();
        let lf = l.clone();
        let g = finite_diff_gradient(
            move |m| {
                let lm = spmm(&lf, m)?;
                m.dot(&lm)
            },
            &x,
            1e-5,
        )
        .unwrap();
        let lx = spmm(&l, &x).unwrap();
        let ltx = spmm(&l.transpose(), &x).unwrap();
        let expect = lx.add(&ltx).unwrap();
        for (gv, ev) in g.data().iter().zip(expect.data()) {
            assert!((gv - ev).abs() <= 1e-5, "{gv} vs {ev}");
        }
    }

    #[test]
    fn finite_diff_rejects_bad_eps() {
        let at = DenseMatrix::zeros(1, 1);
        assert!(finite_diff_gradient(|_| Ok(0.0), &at, 0.0).is_err());
    }

    #[test]
    fn transpose_round_trip() {
        let a = sparse_from_dense(&[vec![0.0, 1.0, 2.0], vec![3.0, 0.0, 0.0]]);
        let tt = a.transpose().transpose();
        assert_eq!(a, tt);
    }

    proptest! {
        #[test]
        fn prop_row_normalize_rows_sum_to_one(
            n in 1usize..12,
            seed in 0u64..1000,
        ) {
            let mut rng = StdRng::seed_from_u64(seed);
            let mut trip = Vec::new();
            for i in 0..n {
                // guarantee a positive row sum
                trip.push((i, rng.gen_range(0..n), rng.gen::<f64>() + 0.01));
                for j in 0..n {
                    if rng.gen::<f64>() < 0.3 {
                        trip.push((i, j, rng.gen::<f64>()));
                    }
                }
            }
            let a = SparseMatrix::from_triplets(n, n, &trip).unwrap();
            let p = row_normalize(&a).unwrap();
            for i in 0..n {
                let s = p.row_sum(i);
                prop_assert!((s - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn prop_laplacian_row_sums_zero_and_symmetric(
            n in 2usize..15,
            seed in 0u64..1000,
        ) {
            let mut rng = StdRng::seed_from_u64(seed);
            let mut pairs = Vec::new();
            for _ in 0..(2 * n) {
                let i = rng.gen_range(0..n);
                let j = rng.gen_range(0..n);
                if i != j {
                    pairs.push((i, j, rng.gen::<f64>() + 0.01));
                }
            }
            let l = laplacian_from_pairs(&pairs, n).unwrap();
            prop_assert_eq!(l.transpose(), l.clone());
            for i in 0..n {
                prop_assert!(l.row_sum(i).abs() <= 1e-12);
            }
        }
    }
}
