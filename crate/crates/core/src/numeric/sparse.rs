use super::{NumericError, Tensor};

/// Compressed sparse row matrix, used for normalized adjacency operators.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets. Duplicate coordinates are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self, NumericError> {
        if let Some(&(r, c, _)) = triplets.iter().find(|(r, c, _)| *r >= rows || *c >= cols) {
            return Err(NumericError::Index {
                op: "sparse_from_triplets",
                index: r.max(c),
                bound: rows.max(cols),
            });
        }
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            last = Some((r, c));
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates the stored `(col, value)` entries of row `r`.
    pub fn row_entries(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn to_dense(&self) -> Tensor {
        let mut out = Tensor::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row_entries(r) {
                out.set(r, c, out.get(r, c) + v);
            }
        }
        out
    }

    /// `self · x`.
    pub fn mul_dense(&self, x: &Tensor) -> Result<Tensor, NumericError> {
        if self.cols != x.rows() {
            return Err(NumericError::Shape {
                op: "sparse_matmul",
                lhs: self.shape(),
                rhs: x.shape(),
            });
        }
        let k = x.cols();
        let mut out = Tensor::zeros(self.rows, k);
        for r in 0..self.rows {
            let dst = out.row_mut(r);
            let span = self.row_ptr[r]..self.row_ptr[r + 1];
            for (&c, &v) in self.col_idx[span.clone()].iter().zip(&self.values[span]) {
                for (d, &s) in dst.iter_mut().zip(x.row(c)) {
                    *d += v * s;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · x`.
    pub fn t_mul_dense(&self, x: &Tensor) -> Result<Tensor, NumericError> {
        if self.rows != x.rows() {
            return Err(NumericError::Shape {
                op: "sparse_t_matmul",
                lhs: self.shape(),
                rhs: x.shape(),
            });
        }
        let k = x.cols();
        let mut out = Tensor::zeros(self.cols, k);
        for r in 0..self.rows {
            let src = x.row(r);
            for (c, v) in self.row_entries(r) {
                for (d, &s) in out.row_mut(c).iter_mut().zip(src) {
                    *d += v * s;
                }
            }
        }
        Ok(out)
    }
}
