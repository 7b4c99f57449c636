//! Jacobi-preconditioned conjugate gradients.

use crate::error::{Error, Result};
use crate::fem::sparse::SparseSystem;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final relative residual `|b - K x| / |b|`.
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    /// `None` selects `50 * sqrt(dof)`.
    pub maxit: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, maxit: None }
    }
}

const CHUNK: usize = 4096;

/// Dot product summed over fixed-size chunks in a fixed order, so the value does not
/// depend on the thread count.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let parts: Vec<f64> = a
            .par_chunks(CHUNK)
            .zip(b.par_chunks(CHUNK))
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
            .collect();
        parts.iter().sum()
    }
    #[cfg(not(feature = "parallel"))]
    {
        a.chunks(CHUNK)
            .zip(b.chunks(CHUNK))
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
            .sum()
    }
}

/// Homogeneous linear constraints `C x = 0` on free degrees of freedom, enforced by
/// projecting the Jacobi-preconditioned residual onto `ker C`.
pub struct Projector {
    rows: Vec<Vec<(usize, f64)>>,
    gram: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
}

impl Projector {
    pub fn new(rows: Vec<Vec<(usize, f64)>>) -> Self {
        Self { rows, gram: None }
    }

    fn prepare(&mut self, inv_diag: &[f64]) -> Result<()> {
        let m = self.rows.len();
        let n = inv_diag.len();
        let mut g = nalgebra::DMatrix::zeros(m, m);
        let mut dense = vec![0.0; n];
        for j in 0..m {
            for &(k, b) in &self.rows[j] {
                dense[k] += b * inv_diag[k];
            }
            for i in 0..m {
                g[(i, j)] = self.rows[i].iter().map(|&(k, a)| a * dense[k]).sum::<f64>();
            }
            for &(k, _) in &self.rows[j] {
                dense[k] = 0.0;
            }
        }
        self.gram = Some(g.cholesky().ok_or_else(|| Error::Singular("dependent linear constraints".into()))?);
        Ok(())
    }

    /// `z <- z - D^-1 C^T (C D^-1 C^T)^-1 C z`.
    fn apply(&self, z: &mut [f64], inv_diag: &[f64]) {
        // a second pass removes what rounding leaves in the constraint directions
        self.apply_once(z, inv_diag);
        self.apply_once(z, inv_diag);
    }

    fn apply_once(&self, z: &mut [f64], inv_diag: &[f64]) {
        let Some(g) = &self.gram else { return };
        let cz = nalgebra::DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|row| row.iter().map(|&(k, a)| a * z[k]).sum::<f64>()),
        );
        let l = g.solve(&cz);
        for (row, li) in self.rows.iter().zip(l.iter()) {
            for &(k, a) in row {
                z[k] -= inv_diag[k] * a * li;
            }
        }
    }

    pub fn residuals(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|row| row.iter().map(|&(k, a)| a * x[k]).sum()).collect()
    }
}

/// `solve_spd`: solves the constrained system. Constraints are eliminated first if the
/// caller has not done so; the initial guess carries the constraint values.
pub fn solve_spd(sys: &mut SparseSystem, opts: &SolverOptions) -> Result<(Vec<f64>, SolveStats)> {
    solve_spd_projected(sys, None, opts)
}

/// Same as [`solve_spd`] with additional constraints `C x = 0`. The reported residual is
/// the Jacobi-weighted projection of `b - K x` that discounts the constraint forces.
pub fn solve_spd_projected(
    sys: &mut SparseSystem,
    mut proj: Option<&mut Projector>,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveStats)> {
    sys.eliminate();
    let n = sys.dim();
    let maxit = opts.maxit.unwrap_or_else(|| (50.0 * (n as f64).sqrt()).ceil() as usize);
    let b = &sys.rhs;
    let mut x = vec![0.0; n];
    if b.iter().all(|&v| v == 0.0) {
        return Ok((x, SolveStats { iterations: 0, residual: 0.0 }));
    }
    for (&d, &v) in &sys.constraints {
        x[d] = v;
    }
    let k = &sys.matrix;
    let inv_diag: Vec<f64> = k
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    if k.diagonal().iter().any(|&d| !(d > 0.0)) {
        return Err(Error::Singular("non-positive diagonal entry".into()));
    }
    if let Some(p) = proj.as_deref_mut() {
        p.prepare(&inv_diag)?;
    }
    let proj = proj.as_deref();
    let diag: Vec<f64> = inv_diag.iter().map(|d| 1.0 / d).collect();
    // norm of the constraint-free part of a residual, measured through its preconditioned image
    let pnorm = |r: &[f64], z: &mut [f64]| -> f64 {
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        match proj {
            None => dot(r, r).sqrt(),
            Some(p) => {
                p.apply(z, &inv_diag);
                z.iter().zip(&diag).map(|(a, d)| (a * d).powi(2)).sum::<f64>().sqrt()
            }
        }
    };
    let mut scratch = vec![0.0; n];
    let bnorm = pnorm(b, &mut scratch);
    if bnorm == 0.0 {
        return Ok((x, SolveStats { iterations: 0, residual: 0.0 }));
    }
    let mut r = vec![0.0; n];
    k.mul_vec(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z = vec![0.0; n];
    let mut res = pnorm(&r, &mut z) / bnorm;
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut it = 0;
    while res > opts.tol {
        if it >= maxit {
            return Err(Error::NonConvergence { iterations: it, residual: res });
        }
        k.mul_vec(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::Singular(format!("matrix not positive definite (p.Kp = {pq:.3e})")));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        res = pnorm(&r, &mut z) / bnorm;
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
        if res <= opts.tol {
            // confirm with the true residual; restart from it if recursion drifted
            k.mul_vec(&x, &mut q);
            for i in 0..n {
                r[i] = b[i] - q[i];
            }
            res = pnorm(&r, &mut z) / bnorm;
            if res > opts.tol {
                p.copy_from_slice(&z);
                rz = dot(&r, &z);
            }
        }
    }
    log::debug!("pcg: {it} iterations, residual {res:.3e}, {n} dof");
    Ok((x, SolveStats { iterations: it, residual: res }))
}

/// Jacobi PCG for an SPD operator given as a closure, starting from zero.
pub fn pcg_operator(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    tol: f64,
    maxit: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok((x, SolveStats { iterations: 0, residual: 0.0 }));
    }
    let inv: Vec<f64> = diag.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = 1.0;
    let mut it = 0;
    while res > tol {
        if it >= maxit {
            return Err(Error::NonConvergence { iterations: it, residual: res });
        }
        apply(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::Singular(format!("operator not positive definite (p.Ap = {pq:.3e})")));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
            z[i] = r[i] * inv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
        res = dot(&r, &r).sqrt() / bnorm;
        if res <= tol {
            apply(&x, &mut q);
            for i in 0..n {
                r[i] = b[i] - q[i];
                z[i] = r[i] * inv[i];
            }
            res = dot(&r, &r).sqrt() / bnorm;
            if res > tol {
                p.copy_from_slice(&z);
                rz = dot(&r, &z);
            }
        }
    }
    Ok((x, SolveStats { iterations: it, residual: res }))
}
