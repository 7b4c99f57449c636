//! Section cell problems: the warping `v1` and in-plane fields `(w2, w3)` that relax a
//! prescribed macroscopic strain on one cross-section.
//!
//! For a macro strain `theta = (zeta1', zeta2'', zeta3'', c')` the admissible strain is
//!
//! ```text
//! E11 = theta1 - theta2 y2 - theta3 y3,
//! 2 E12 = theta4 y3 + d2 v1,   2 E13 = -theta4 y2 + d3 v1,
//! E22 = d2 w2,  E33 = d3 w3,   2 E23 = d3 w2 + d2 w3,
//! ```
//!
//! and the micro fields minimise the section energy subject to
//! `int v1 = int w2 = int w3 = int (y3 w2 - y2 w3) = 0`.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, Matrix4, Matrix6, Vector4, Vector6};

use crate::error::{Error, Result};
use crate::fem::{pcg_operator, CsrMatrix, TensorFn};
use crate::geometry::element::{quad_eval, quad_gauss, quad_shape};
use crate::geometry::SectionMesh;
use crate::material::{stress_to_voigt, MaterialField};

/// Macro strain modes in engineering Voigt form at a section point.
pub fn macro_modes(y2: f64, y3: f64) -> [Vector6<f64>; 4] {
    [
        Vector6::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        Vector6::new(-y2, 0.0, 0.0, 0.0, 0.0, 0.0),
        Vector6::new(-y3, 0.0, 0.0, 0.0, 0.0, 0.0),
        Vector6::new(0.0, 0.0, 0.0, 0.0, -y2, y3),
    ]
}

/// Engineering Voigt micro strain of nodal data `(v1, w2, w3)` given physical gradients.
fn micro_b(dn: &[[f64; 2]; 4], nodes: &[usize; 4], chi: &[f64]) -> Vector6<f64> {
    let mut e = Vector6::zeros();
    for a in 0..4 {
        let (g2, g3) = (dn[a][0], dn[a][1]);
        let (v1, w2, w3) = (chi[3 * nodes[a]], chi[3 * nodes[a] + 1], chi[3 * nodes[a] + 2]);
        e[1] += g2 * w2;
        e[2] += g3 * w3;
        e[3] += g3 * w2 + g2 * w3;
        e[4] += g3 * v1;
        e[5] += g2 * v1;
    }
    e
}

/// `B^T s` for one node: forces on `(v1, w2, w3)`.
fn micro_bt(g: [f64; 2], s: &Vector6<f64>) -> [f64; 3] {
    let (g2, g3) = (g[0], g[1]);
    [g3 * s[4] + g2 * s[5], g2 * s[1] + g3 * s[3], g3 * s[2] + g2 * s[3]]
}

struct SectionPoint {
    elem: usize,
    weight: f64,
    x: [f64; 2],
    n: [f64; 4],
    dn: [[f64; 2]; 4],
}

/// Cell operator of one material slice `A(y1, .)`, with the constraint responses
/// precomputed so that each further right-hand side costs one CG solve.
pub struct CellSolver {
    section: Arc<SectionMesh>,
    y1: f64,
    points: Vec<SectionPoint>,
    tensors: Vec<Matrix6<f64>>,
    stiffness: CsrMatrix,
    cons: [Vec<f64>; 4],
    gamma: f64,
    diag: Vec<f64>,
    responses: [Vec<f64>; 4],
    schur: Cholesky<f64, nalgebra::U4>,
    tol: f64,
    worst_residual: f64,
}

/// Outcome of one constrained cell solve.
pub struct CellSolve {
    pub field: Vec<f64>,
    pub multipliers: Vector4<f64>,
    pub residual: f64,
}

impl CellSolver {
    pub fn new(section: Arc<SectionMesh>, material: &MaterialField, y1: f64, tol: f64) -> Result<Self> {
        let mut points = Vec::new();
        for e in 0..section.elements().len() {
            let c = section.element_coords(e);
            for xi in quad_gauss() {
                let ev = quad_eval(&c, xi);
                points.push(SectionPoint { elem: e, weight: ev.det, x: ev.x, n: ev.n, dn: ev.dn });
            }
        }
        let tensors: Vec<Matrix6<f64>> = points
            .iter()
            .map(|p| *material.eval_unchecked(&[y1, p.x[0], p.x[1]]).matrix())
            .collect();
        let nn = section.nodes().len();
        let mut adj = vec![Vec::new(); nn];
        for el in section.elements() {
            for &a in el {
                adj[a].extend_from_slice(el);
            }
        }
        let pattern: Vec<Vec<usize>> = (0..3 * nn)
            .map(|d| {
                let mut nb = adj[d / 3].clone();
                nb.sort_unstable();
                nb.dedup();
                nb.iter().flat_map(|&b| [3 * b, 3 * b + 1, 3 * b + 2]).collect()
            })
            .collect();
        let mut k = CsrMatrix::from_pattern(pattern);
        let mut cons: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; 3 * nn]);
        for (p, c) in points.iter().zip(&tensors) {
            let el = section.elements()[p.elem];
            // B columns of this point, 12 x 6
            let mut b = [[0.0; 6]; 12];
            for a in 0..4 {
                let (g2, g3) = (p.dn[a][0], p.dn[a][1]);
                b[3 * a][4] = g3;
                b[3 * a][5] = g2;
                b[3 * a + 1][1] = g2;
                b[3 * a + 1][3] = g3;
                b[3 * a + 2][2] = g3;
                b[3 * a + 2][3] = g2;
            }
            let cb: Vec<Vector6<f64>> = b.iter().map(|col| c * Vector6::from_row_slice(col)).collect();
            for i in 0..12 {
                for j in 0..12 {
                    let v: f64 = (0..6).map(|r| b[i][r] * cb[j][r]).sum();
                    if v != 0.0 {
                        k.add(3 * el[i / 3] + i % 3, 3 * el[j / 3] + j % 3, p.weight * v);
                    }
                }
            }
            for a in 0..4 {
                let w = p.weight * p.n[a];
                let d = 3 * el[a];
                cons[0][d] += w;
                cons[1][d + 1] += w;
                cons[2][d + 2] += w;
                cons[3][d + 1] += w * p.x[1];
                cons[3][d + 2] -= w * p.x[0];
            }
        }
        let kdiag = k.diagonal();
        let cnorm: f64 = cons.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>()).sum();
        let gamma = kdiag.iter().sum::<f64>() / cnorm.max(1e-300);
        let diag: Vec<f64> = (0..3 * nn)
            .map(|i| kdiag[i] + gamma * cons.iter().map(|c| c[i] * c[i]).sum::<f64>())
            .collect();
        let mut solver = Self {
            section,
            y1,
            points,
            tensors,
            stiffness: k,
            cons,
            gamma,
            diag,
            responses: std::array::from_fn(|_| Vec::new()),
            schur: Cholesky::new(Matrix4::identity()).expect("identity"),
            tol,
            worst_residual: 0.0,
        };
        let mut responses: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::new());
        for j in 0..4 {
            responses[j] = solver.solve_regularized(&solver.cons[j].clone())?;
        }
        let s = Matrix4::from_fn(|i, j| crate::fem::dot(&solver.cons[i], &responses[j]));
        let s = 0.5 * (s + s.transpose());
        solver.schur = Cholesky::new(s).ok_or_else(|| Error::Singular("cell constraint Schur complement".into()))?;
        solver.responses = responses;
        Ok(solver)
    }

    pub fn section(&self) -> &Arc<SectionMesh> {
        &self.section
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn dim(&self) -> usize {
        self.stiffness.dim()
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    /// Rows of the four constraint functionals.
    pub fn constraint_rows(&self) -> &[Vec<f64>; 4] {
        &self.cons
    }

    pub fn worst_residual(&self) -> f64 {
        self.worst_residual
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.stiffness.mul_vec(x, y);
        for c in &self.cons {
            let s = self.gamma * crate::fem::dot(c, x);
            for (yi, ci) in y.iter_mut().zip(c) {
                *yi += s * ci;
            }
        }
    }

    /// `(K + gamma C^T C)^{-1} r`.
    fn solve_regularized(&mut self, r: &[f64]) -> Result<Vec<f64>> {
        let maxit = 20 * self.dim().max(100);
        let (x, stats) = pcg_operator(|x, y| self.apply(x, y), &self.diag, r, self.tol, maxit)?;
        self.worst_residual = self.worst_residual.max(stats.residual);
        Ok(x)
    }

    /// Saddle-point solve `K chi + C^T lambda = r`, `C chi = 0`, through the Schur
    /// complement of the regularised operator.
    pub fn solve(&mut self, r: &[f64]) -> Result<CellSolve> {
        let x0 = self.solve_regularized(r)?;
        let cx = Vector4::from_fn(|i, _| crate::fem::dot(&self.cons[i], &x0));
        let lambda = self.schur.solve(&cx);
        let mut field = x0;
        for j in 0..4 {
            for (f, y) in field.iter_mut().zip(&self.responses[j]) {
                *f -= lambda[j] * y;
            }
        }
        let mut q = vec![0.0; field.len()];
        self.stiffness.mul_vec(&field, &mut q);
        for j in 0..4 {
            for (qi, ci) in q.iter_mut().zip(&self.cons[j]) {
                *qi += lambda[j] * ci;
            }
        }
        let rn = crate::fem::dot(r, r).sqrt().max(1e-300);
        let res = q.iter().zip(r).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / rn;
        Ok(CellSolve { field, multipliers: lambda, residual: res })
    }

    /// Right-hand side `-int B^T A E_m` of macro mode `m`.
    pub fn mode_rhs(&self, m: usize) -> Vec<f64> {
        let mut r = vec![0.0; self.dim()];
        for (p, c) in self.points.iter().zip(&self.tensors) {
            let s = c * macro_modes(p.x[0], p.x[1])[m];
            self.scatter_bt(p, &s, -p.weight, &mut r);
        }
        r
    }

    /// Right-hand side `int B^T h` of a prestrain slice.
    pub fn prestrain_rhs(&self, h: &TensorFn, y1: f64) -> Result<Vec<f64>> {
        let mut r = vec![0.0; self.dim()];
        for p in &self.points {
            let hv = prestrain_voigt(h, [y1, p.x[0], p.x[1]])?;
            self.scatter_bt(p, &hv, p.weight, &mut r);
        }
        Ok(r)
    }

    fn scatter_bt(&self, p: &SectionPoint, s: &Vector6<f64>, w: f64, r: &mut [f64]) {
        let el = self.section.elements()[p.elem];
        for a in 0..4 {
            let f = micro_bt(p.dn[a], s);
            for k in 0..3 {
                r[3 * el[a] + k] += w * f[k];
            }
        }
    }

    /// The four relaxed modes and the effective stiffness `D`.
    pub fn solve_modes(&mut self) -> Result<(Arc<[Vec<f64>; 4]>, Matrix4<f64>, f64)> {
        let mut modes: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::new());
        let mut lmax = 0.0f64;
        for m in 0..4 {
            let s = self.solve(&self.mode_rhs(m))?;
            lmax = lmax.max(s.multipliers.amax());
            modes[m] = s.field;
        }
        let mut d = Matrix4::zeros();
        for (p, c) in self.points.iter().zip(&self.tensors) {
            let el = self.section.elements()[p.elem];
            let em = macro_modes(p.x[0], p.x[1]);
            let full: [Vector6<f64>; 4] = std::array::from_fn(|m| em[m] + micro_b(&p.dn, &el, &modes[m]));
            for m in 0..4 {
                let cm = c * full[m];
                for n in 0..4 {
                    d[(m, n)] += p.weight * full[n].dot(&cm);
                }
            }
        }
        let d = 0.5 * (d + d.transpose());
        Ok((Arc::new(modes), d, lmax))
    }

    /// Prestrain response at `y1` and its load on the macro strains,
    /// `l_m = int h : (E_m + B chi_m)`. The material slice stays the solver's own.
    pub fn solve_prestrain(&mut self, h: &TensorFn, y1: f64, modes: &[Vec<f64>; 4]) -> Result<(Vec<f64>, Vector4<f64>)> {
        let s = self.solve(&self.prestrain_rhs(h, y1)?)?;
        let mut l = Vector4::zeros();
        for p in &self.points {
            let hv = prestrain_voigt(h, [y1, p.x[0], p.x[1]])?;
            let el = self.section.elements()[p.elem];
            let em = macro_modes(p.x[0], p.x[1]);
            for m in 0..4 {
                l[m] += p.weight * hv.dot(&(em[m] + micro_b(&p.dn, &el, &modes[m])));
            }
        }
        Ok((s.field, l))
    }

    /// Unrelaxed macro Gram `int E_m . A E_n` and coupling `int B^T A E_m`; used by
    /// the monolithic cross-check.
    pub fn macro_blocks(&self) -> (Matrix4<f64>, DMatrix<f64>) {
        let mut ee = Matrix4::zeros();
        let mut ex = DMatrix::zeros(self.dim(), 4);
        for (p, c) in self.points.iter().zip(&self.tensors) {
            let em = macro_modes(p.x[0], p.x[1]);
            for m in 0..4 {
                let cm = c * em[m];
                for n in 0..4 {
                    ee[(m, n)] += p.weight * em[n].dot(&cm);
                }
                let mut col = vec![0.0; self.dim()];
                self.scatter_bt(p, &cm, p.weight, &mut col);
                for (i, v) in col.iter().enumerate() {
                    ex[(i, m)] += v;
                }
            }
        }
        (ee, ex)
    }
}

fn prestrain_voigt(h: &TensorFn, y: [f64; 3]) -> Result<Vector6<f64>> {
    let m = h(&y);
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::NonSymmetric(format!("prestrain at {y:?}")));
    }
    Ok(stress_to_voigt(&m))
}

/// Relaxed section data at one axial position.
#[derive(Clone, Debug)]
pub struct CellData {
    pub y1: f64,
    /// Effective stiffness on `(zeta1', zeta2'', zeta3'', c')`.
    pub d: Matrix4<f64>,
    /// Prestrain load on the same macro strains.
    pub load: Vector4<f64>,
    /// Nodal `(v1, w2, w3)` of the four relaxed modes.
    pub modes: Arc<[Vec<f64>; 4]>,
    pub prestrain_mode: Option<Vec<f64>>,
    pub max_multiplier: f64,
}

/// `micro_cell_solve`: cell problem for the slice `A(y1, .)`.
pub fn micro_cell_solve(
    section: Arc<SectionMesh>,
    material: &MaterialField,
    h: Option<&TensorFn>,
    y1: f64,
    tol: f64,
) -> Result<CellData> {
    let mut solver = CellSolver::new(section, material, y1, tol)?;
    let (modes, d, lmax) = solver.solve_modes()?;
    let (prestrain_mode, load) = match h {
        Some(h) => {
            let (f, l) = solver.solve_prestrain(h, y1, &modes)?;
            (Some(f), l)
        }
        None => (None, Vector4::zeros()),
    };
    Ok(CellData { y1, d, load, modes, prestrain_mode, max_multiplier: lmax })
}

impl CellData {
    /// Engineering Voigt micro strain `B chi` at a located section point, for macro
    /// strain `theta`.
    pub fn micro_strain(&self, section: &SectionMesh, e: usize, xi: [f64; 2], theta: &[f64; 4]) -> Vector6<f64> {
        let c = section.element_coords(e);
        let dn = quad_eval(&c, xi).dn;
        let el = section.elements()[e];
        let mut s = Vector6::zeros();
        for m in 0..4 {
            if theta[m] != 0.0 {
                s += theta[m] * micro_b(&dn, &el, &self.modes[m]);
            }
        }
        if let Some(hm) = &self.prestrain_mode {
            s += micro_b(&dn, &el, hm);
        }
        s
    }

    /// Nodal micro field `sum theta_m chi_m (+ chi_h)` interpolated at a located point.
    pub fn micro_value(&self, section: &SectionMesh, e: usize, xi: [f64; 2], theta: &[f64; 4]) -> [f64; 3] {
        let el = section.elements()[e];
        let n = quad_shape(xi);
        let mut out = [0.0; 3];
        for a in 0..4 {
            for k in 0..3 {
                let mut v: f64 = (0..4).map(|m| theta[m] * self.modes[m][3 * el[a] + k]).sum();
                if let Some(hm) = &self.prestrain_mode {
                    v += hm[3 * el[a] + k];
                }
                out[k] += n[a] * v;
            }
        }
        out
    }
}
