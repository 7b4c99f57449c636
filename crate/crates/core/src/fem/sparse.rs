//! Compressed-row symmetric matrices and constrained linear systems.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Empty matrix with the given sorted per-row column pattern.
    pub fn from_pattern(pattern: Vec<Vec<usize>>) -> Self {
        let n = pattern.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        for row in &pattern {
            debug_assert!(row.windows(2).all(|w| w[0] < w[1]));
            cols.extend(row.iter().map(|&c| c as u32));
            row_ptr.push(cols.len());
        }
        let vals = vec![0.0; cols.len()];
        Self { n, row_ptr, cols, vals }
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let pattern = (0..a.nrows())
            .map(|i| (0..a.ncols()).filter(|&j| a[(i, j)] != 0.0 || i == j).collect())
            .collect();
        let mut m = Self::from_pattern(pattern);
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if a[(i, j)] != 0.0 {
                    m.add(i, j, a[(i, j)]);
                }
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (c, _) = self.row(i);
        c.binary_search(&(j as u32)).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.vals[k])
    }

    /// Adds `v` at `(i, j)`; panics if the entry is outside the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.position(i, j).unwrap_or_else(|| panic!("entry ({i},{j}) outside pattern"));
        self.vals[k] += v;
    }

    pub(crate) fn row_offset(&self, i: usize) -> usize {
        self.row_ptr[i]
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.vals
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`; rows are independent so the result does not depend on threading.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        let row = |i: usize| -> f64 {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(|(&j, a)| a * x[j as usize]).sum()
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            y.par_chunks_mut(1024).enumerate().for_each(|(b, chunk)| {
                for (k, yi) in chunk.iter_mut().enumerate() {
                    *yi = row(b * 1024 + k);
                }
            });
        }
        #[cfg(not(feature = "parallel"))]
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = row(i);
        }
    }

    /// Largest absolute entry of `A - A^T`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (&j, a) in c.iter().zip(v) {
                worst = worst.max((a - self.get(j as usize, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (&j, a) in c.iter().zip(v) {
                d[(i, j as usize)] = *a;
            }
        }
        d
    }
}

/// Symmetric matrix, right-hand side and Dirichlet constraints on a vector-valued mesh field.
///
/// Degree of freedom `3 * node + component`.
#[derive(Clone, Debug)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub(crate) constraints: BTreeMap<usize, f64>,
    pub(crate) eliminated: bool,
}

impl SparseSystem {
    pub fn new(matrix: CsrMatrix, rhs: Vec<f64>) -> Self {
        assert_eq!(matrix.dim(), rhs.len());
        Self { matrix, rhs, constraints: BTreeMap::new(), eliminated: false }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn constraints(&self) -> &BTreeMap<usize, f64> {
        &self.constraints
    }

    pub fn is_eliminated(&self) -> bool {
        self.eliminated
    }

    /// Records scalar constraints `x[dof] = value` (later entries override earlier ones).
    pub fn constrain_dofs(&mut self, dofs: impl IntoIterator<Item = (usize, f64)>) -> Result<()> {
        if self.eliminated {
            return Err(Error::Singular("constraints added after elimination".into()));
        }
        for (d, v) in dofs {
            if d >= self.dim() {
                return Err(Error::Singular(format!("constrained dof {d} out of range")));
            }
            self.constraints.insert(d, v);
        }
        Ok(())
    }

    /// Symmetric elimination in place: constrained rows and columns are zeroed, the
    /// diagonal is kept and the right-hand side carries `K_ii * value`, so the
    /// constrained system stays SPD and its solution matches the data exactly.
    pub fn eliminate(&mut self) {
        if self.eliminated {
            return;
        }
        let n = self.dim();
        let mut fixed = vec![None; n];
        for (&d, &v) in &self.constraints {
            fixed[d] = Some(v);
        }
        for i in 0..n {
            let off = self.matrix.row_offset(i);
            let (cols, vals) = self.matrix.row(i);
            let cols: Vec<u32> = cols.to_vec();
            let vals: Vec<f64> = vals.to_vec();
            let vm = self.matrix.values_mut();
            match fixed[i] {
                Some(_) => {
                    for (k, &j) in cols.iter().enumerate() {
                        if j as usize != i {
                            vm[off + k] = 0.0;
                        }
                    }
                }
                None => {
                    let mut corr = 0.0;
                    for (k, &j) in cols.iter().enumerate() {
                        if let Some(v) = fixed[j as usize] {
                            corr += vals[k] * v;
                            vm[off + k] = 0.0;
                        }
                    }
                    self.rhs[i] -= corr;
                }
            }
        }
        for (&d, &v) in &self.constraints {
            let kii = self.matrix.get(d, d);
            let kii = if kii > 0.0 { kii } else { 1.0 };
            if self.matrix.get(d, d) <= 0.0 {
                self.matrix.add(d, d, kii - self.matrix.get(d, d));
            }
            self.rhs[d] = kii * v;
        }
        self.eliminated = true;
    }

    /// Free degrees of freedom in ascending order.
    pub fn free_dofs(&self) -> Vec<usize> {
        (0..self.dim()).filter(|d| !self.constraints.contains_key(d)).collect()
    }

    /// Dense free-free block; intended for small test systems.
    pub fn reduced_dense(&self) -> DMatrix<f64> {
        let free = self.free_dofs();
        DMatrix::from_fn(free.len(), free.len(), |a, b| self.matrix.get(free[a], free[b]))
    }
}
