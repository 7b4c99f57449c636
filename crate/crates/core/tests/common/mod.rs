#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix6};
use patchbeam::beam::{macro_modes, CellSolver, LimitModel, LimitOptions};
use patchbeam::capacity::PenaltyForm;
use patchbeam::fem::{TensorFn, VectorFn};
use patchbeam::geometry::{build_section_mesh, Shape2};
use patchbeam::material::{stress_to_voigt, MaterialField};
use patchbeam::regimes::{constraint_set_for, RegimeTag};

/// Symmetric positive definite 6x6 with a few couplings, standing in for a generator Gram.
pub fn sample_gram() -> Matrix6<f64> {
    let a = Matrix6::from_fn(|i, j| ((i * 7 + j * 3) % 5) as f64 * 0.1 + if i == j { 1.0 } else { 0.0 });
    a * a.transpose()
}

pub struct Monolithic {
    /// Beam coefficients.
    pub beam: Vec<f64>,
    /// Micro unknowns per axial quadrature point.
    pub micro: Vec<Vec<f64>>,
}

/// Beam coefficients and all micro unknowns as one dense SPD system. The micro gauge
/// is fixed by `gamma C^T C` instead of multipliers; both select the same minimizer
/// because the cell right-hand sides annihilate the kernel.
pub fn monolithic_solve(
    material: &MaterialField,
    f: Option<&VectorFn>,
    h: Option<&TensorFn>,
    opts: &LimitOptions,
    penalty: &PenaltyForm,
) -> Monolithic {
    let section = Arc::new(build_section_mesh(material.section(), opts.section_h).unwrap());
    let shell = LimitModel::with_section(material, section.clone(), f, None, opts).unwrap();
    let l = shell.layout;
    let nb = l.dim();
    let quad = shell.quadrature.clone();
    let solvers: Vec<CellSolver> = quad
        .iter()
        .map(|q| CellSolver::new(section.clone(), material, q.2, opts.cell_tol).unwrap())
        .collect();
    let m = solvers[0].dim();
    let n = nb + m * quad.len();
    let mut k = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    let fl = shell.load_vector();
    for i in 0..nb {
        rhs[i] = fl[i];
    }
    for (kq, (&(e, xi, y1, w), s)) in quad.iter().zip(&solvers).enumerate() {
        let rows = shell.theta_rows(e, xi);
        let mut t = DMatrix::<f64>::zeros(4, nb);
        for (r, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                t[(r, j)] += v;
            }
        }
        let (ee, ex) = s.macro_blocks();
        let kk = s.stiffness().to_dense();
        let c = s.constraint_rows();
        let cn: f64 = c.iter().flat_map(|r| r.iter()).map(|v| v * v).sum();
        let gamma = kk.trace() / cn;
        let off = nb + kq * m;
        let kqq = t.transpose() * ee * &t * w;
        let kqc = t.transpose() * ex.transpose() * w;
        for i in 0..nb {
            for j in 0..nb {
                k[(i, j)] += kqq[(i, j)];
            }
            for j in 0..m {
                k[(i, off + j)] += kqc[(i, j)];
                k[(off + j, i)] += kqc[(i, j)];
            }
        }
        for i in 0..m {
            for j in 0..m {
                let mut v = kk[(i, j)];
                for r in c {
                    v += gamma * r[i] * r[j];
                }
                k[(off + i, off + j)] += w * v;
            }
        }
        if let Some(h) = h {
            let mut lraw = [0.0; 4];
            for p in section.quadrature() {
                let hv = stress_to_voigt(&h(&[y1, p.x[0], p.x[1]]));
                let em = macro_modes(p.x[0], p.x[1]);
                for mm in 0..4 {
                    lraw[mm] += p.weight * hv.dot(&em[mm]);
                }
            }
            for i in 0..nb {
                rhs[i] += w * (0..4).map(|mm| t[(mm, i)] * lraw[mm]).sum::<f64>();
            }
            let r = s.prestrain_rhs(h, y1).unwrap();
            for j in 0..m {
                rhs[off + j] += w * r[j];
            }
        }
    }
    let trace = l.trace_dofs();
    for i in 0..6 {
        for j in 0..6 {
            k[(trace[i], trace[j])] += penalty.matrix[(i, j)];
        }
    }
    let mut fixed = vec![false; n];
    for d in l.clamped_end_dofs() {
        fixed[d] = true;
    }
    for slot in constraint_set_for(penalty.tag).slots() {
        fixed[trace[slot.index()]] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
    let kr = DMatrix::from_fn(free.len(), free.len(), |a, b| k[(free[a], free[b])]);
    let br = DVector::from_fn(free.len(), |a, _| rhs[free[a]]);
    let xr = kr.cholesky().expect("monolithic system is SPD").solve(&br);
    let mut x = vec![0.0; n];
    for (a, &i) in free.iter().enumerate() {
        x[i] = xr[a];
    }
    Monolithic {
        beam: x[..nb].to_vec(),
        micro: (0..quad.len()).map(|kq| x[nb + kq * m..nb + (kq + 1) * m].to_vec()).collect(),
    }
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

pub fn unit_disc() -> Shape2 {
    Shape2::Disc { radius: 1.0 }
}

pub fn regime_tag_all() -> [RegimeTag; 7] {
    [
        RegimeTag::SubCubic,
        RegimeTag::Critical3,
        RegimeTag::CubicToLinear,
        RegimeTag::Critical1,
        RegimeTag::LinearToCubeRoot,
        RegimeTag::CriticalThird,
        RegimeTag::SuperCubeRoot,
    ]
}
