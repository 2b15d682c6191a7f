//! Sparse storage and the iterative solver shared by the capacity and
//! variational paths.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// in insertion order, so the result is reproducible bit for bit.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        // stable sort keeps duplicate contributions in insertion order
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            assert!(i < n_rows && j < n_cols, "triplet ({i}, {j}) out of bounds");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { n_rows, n_cols, row_ptr, col_idx, values }
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self::from_triplets(n_rows, n_cols, Vec::new())
    }

    pub fn nrows(&self) -> usize {
        self.n_rows
    }

    pub fn ncols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.n_rows);
        self.mul_vec_into(x, &mut y);
        y
    }

    fn mul_vec_into(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        assert_eq!(x.len(), self.n_cols);
        for i in 0..self.n_rows {
            y[i] = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn diagonal(&self) -> DVector<f64> {
        DVector::from_iterator(self.n_rows.min(self.n_cols), (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] += v;
        }
        d
    }

    /// Adds a diagonal, returning a new matrix.
    pub fn add_diagonal(&self, diag: &DVector<f64>) -> CsrMatrix {
        assert_eq!(diag.len(), self.n_rows);
        let mut t: Vec<_> = self.triplets().collect();
        t.extend((0..self.n_rows).map(|i| (i, i, diag[i])));
        CsrMatrix::from_triplets(self.n_rows, self.n_cols, t)
    }

    /// The block `rows × cols` of this matrix, re-indexed from zero in the
    /// order given.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.n_cols];
        for (k, &j) in cols.iter().enumerate() {
            col_map[j] = k;
        }
        let mut t = Vec::new();
        for (r, &i) in rows.iter().enumerate() {
            for (j, v) in self.row(i) {
                if col_map[j] != usize::MAX {
                    t.push((r, col_map[j], v));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), cols.len(), t)
    }

    /// Largest absolute row sum (the induced ∞-norm).
    pub fn norm_inf(&self) -> f64 {
        (0..self.n_rows).map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }
}

/// A symmetric operator that can be applied to a vector.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &DVector<f64>, y: &mut DVector<f64>);
    fn diagonal(&self) -> DVector<f64>;
}

impl SymmetricOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        self.mul_to(x, y);
    }

    fn diagonal(&self) -> DVector<f64> {
        DMatrix::diagonal(self)
    }
}

impl SymmetricOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n_rows
    }

    fn apply(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        self.mul_vec_into(x, y);
    }

    fn diagonal(&self) -> DVector<f64> {
        CsrMatrix::diagonal(self)
    }
}

/// `A + shift·diag(d)` without materializing it.
pub struct ShiftedOperator<'a, A: SymmetricOperator> {
    pub base: &'a A,
    pub shift: f64,
    pub diag: &'a DVector<f64>,
}

impl<A: SymmetricOperator> SymmetricOperator for ShiftedOperator<'_, A> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn apply(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        self.base.apply(x, y);
        for i in 0..y.len() {
            y[i] += self.shift * self.diag[i] * x[i];
        }
    }

    fn diagonal(&self) -> DVector<f64> {
        self.base.diagonal() + self.diag * self.shift
    }
}

#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: DVector<f64>,
    pub iterations: usize,
    /// Final relative residual `‖b − Ax‖ / ‖b‖` (recomputed, not the recursive one).
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// definite operator. Stops once the recursive residual drops below
/// `tol·‖b‖`.
pub fn conjugate_gradient<A: SymmetricOperator>(
    op: &A,
    b: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<CgSolution> {
    let n = op.dim();
    assert_eq!(b.len(), n);
    let b_norm = b.norm();
    if b_norm == 0.0 {
        return Ok(CgSolution { x: DVector::zeros(n), iterations: 0, residual: 0.0 });
    }
    let inv_diag = op.diagonal().map(|d| if d > 0.0 { 1.0 / d } else { 1.0 });

    let mut x = DVector::zeros(n);
    let mut r = b.clone();
    let mut z = r.component_mul(&inv_diag);
    let mut p = z.clone();
    let mut ap = DVector::zeros(n);
    let mut rz = r.dot(&z);
    let mut iterations = 0;

    while r.norm() > tol * b_norm {
        if iterations >= max_iter {
            return Err(Error::ConvergenceFailure { iterations, residual: r.norm() / b_norm });
        }
        op.apply(&p, &mut ap);
        let pap = p.dot(&ap);
        if !(pap > 0.0) {
            return Err(Error::Numerical(format!("operator not positive definite (pᵀAp = {pap:e})")));
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        z = r.component_mul(&inv_diag);
        let rz_next = r.dot(&z);
        p = &z + &p * (rz_next / rz);
        rz = rz_next;
        iterations += 1;
    }

    let mut ax = DVector::zeros(n);
    op.apply(&x, &mut ax);
    let residual = (b - ax).norm() / b_norm;
    Ok(CgSolution { x, iterations, residual })
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Weighted norm `sqrt(Σ w_i x_i²)`.
pub fn weighted_norm(x: &DVector<f64>, weights: &DVector<f64>) -> f64 {
    x.iter().zip(weights.iter()).map(|(xi, wi)| wi * xi * xi).sum::<f64>().sqrt()
}
