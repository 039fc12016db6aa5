//! Symmetric sparse operators and a skyline (envelope) Cholesky factorization.

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};

/// Symmetric sparse matrix.
///
/// Stored internally as full CSR (both triangles) so that products are a
/// single pass; the canonical external form is the upper triangle only.
#[derive(Debug, Clone, PartialEq)]
pub struct SymSparse {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SymSparse {
    /// Builds the operator from upper-triangle triplets `(i, j, v)` with `i <= j`.
    pub fn from_upper_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::Consistency(format!(
                    "operator entry ({i}, {j}) out of range for dimension {n}"
                )));
            }
            if i > j {
                return Err(Error::Consistency(format!(
                    "operator entry ({i}, {j}) below the diagonal; only i <= j is stored"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Validation(format!(
                    "operator entry ({i}, {j}) is not finite"
                )));
            }
            if !seen.insert((i, j)) {
                return Err(Error::Consistency(format!(
                    "duplicate operator entry ({i}, {j})"
                )));
            }
        }

        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            rows[i].push((j, v));
            if i != j {
                rows[j].push((i, v));
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in &mut rows {
            row.sort_by_key(|&(c, _)| c);
            for &(c, v) in row.iter() {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Ok(SymSparse {
            n,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn identity(n: usize) -> Self {
        let trip: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_upper_triplets(n, &trip).expect("identity is well formed")
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_upper_triplets(n, &[]).expect("zero operator is well formed")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Upper-triangle triplets in row-major order.
    pub fn upper_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[p];
                if j >= i {
                    out.push((i, j, self.vals[p]));
                }
            }
        }
        out
    }

    /// `y = A x`.
    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[p] * x[self.cols[p]];
            }
            *yi = acc;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_into(x, &mut y);
        y
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_len(self.n, x.len())?;
        check_len(self.n, y.len())?;
        let mut acc = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            let mut row = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                row += self.vals[p] * y[self.cols[p]];
            }
            acc += xi * row;
        }
        Ok(acc)
    }

    /// `self + alpha * other`, on the union of both sparsity patterns.
    pub fn add_scaled(&self, other: &SymSparse, alpha: f64) -> Result<SymSparse> {
        check_len(self.n, other.n)?;
        let mut merged = std::collections::BTreeMap::new();
        for (i, j, v) in self.upper_triplets() {
            *merged.entry((i, j)).or_insert(0.0) += v;
        }
        for (i, j, v) in other.upper_triplets() {
            *merged.entry((i, j)).or_insert(0.0) += alpha * v;
        }
        let trip: Vec<_> = merged.into_iter().map(|((i, j), v)| (i, j, v)).collect();
        SymSparse::from_upper_triplets(self.n, &trip)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                d[(i, self.cols[p])] = self.vals[p];
            }
        }
        d
    }

    /// Smallest column index with a nonzero in each row (lower envelope).
    fn envelope_start(&self) -> Vec<usize> {
        (0..self.n)
            .map(|i| {
                let start = self.row_ptr[i];
                let end = self.row_ptr[i + 1];
                if start < end {
                    self.cols[start].min(i)
                } else {
                    i
                }
            })
            .collect()
    }
}

/// Cholesky factor `A = L Lᵀ` in skyline (variable-band) storage.
///
/// Fill-in is confined to the envelope of the input ordering, which for the
/// periodic tridiagonal FE operators is `O(n)`.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    n: usize,
    first: Vec<usize>,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineCholesky {
    pub fn factor(a: &SymSparse) -> Result<Self> {
        let n = a.n;
        let first = a.envelope_start();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for i in 0..n {
            offsets.push(offsets[i] + (i - first[i] + 1));
        }
        let mut data = vec![0.0; offsets[n]];
        for i in 0..n {
            for p in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.cols[p];
                if j <= i {
                    data[offsets[i] + (j - first[i])] = a.vals[p];
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let row_i = offsets[i];
            for j in fi..i {
                let fj = first[j];
                let row_j = offsets[j];
                let k0 = fi.max(fj);
                let mut s = data[row_i + (j - fi)];
                for k in k0..j {
                    s -= data[row_i + (k - fi)] * data[row_j + (k - fj)];
                }
                let djj = data[row_j + (j - fj)];
                data[row_i + (j - fi)] = s / djj;
            }
            let mut d = data[row_i + (i - fi)];
            for k in fi..i {
                let l = data[row_i + (k - fi)];
                d -= l * l;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Factorization(format!(
                    "matrix not positive definite (pivot {d:e} at row {i})"
                )));
            }
            data[row_i + (i - fi)] = d.sqrt();
        }
        Ok(SkylineCholesky {
            n,
            first,
            offsets,
            data,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Solves `A x = b`, overwriting `b` with `x`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        for i in 0..self.n {
            let fi = self.first[i];
            let row = &self.data[self.offsets[i]..self.offsets[i + 1]];
            let mut s = b[i];
            for k in fi..i {
                s -= row[k - fi] * b[k];
            }
            b[i] = s / row[i - fi];
        }
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.offsets[i]..self.offsets[i + 1]];
            let xi = b[i] / row[i - fi];
            b[i] = xi;
            for k in fi..i {
                b[k] -= row[k - fi] * xi;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
