//! The one-dimensional limit beam: assembly, solve and field evaluation.
//!
//! Unknowns are `zeta1` (axial), `c` (twist) and `zeta2`, `zeta3` (bending) on `(0,1)`,
//! clamped at `y1 = 1`. At `y1 = 0` the regime prescribes which traces vanish and adds
//! the boundary form `<B t, t>` on the trace vector `t`.

use std::sync::Arc;

use nalgebra::{DMatrix, Matrix3, Vector6};

use crate::beam::basis::{Layout, GAUSS3};
use crate::beam::cell::{macro_modes, CellData, CellSolver};
use crate::capacity::PenaltyForm;
use crate::error::{Error, Result};
use crate::fem::{CsrMatrix, SparseSystem, TensorFn, VectorFn};
use crate::geometry::{build_section_mesh, SectionMesh, Shape2};
use crate::material::{voigt_to_strain, MaterialField, Point3};
use crate::regimes::{constraint_set_for, ConstraintSet, RegimeSpec};

/// Section resultants of the body force at the axial quadrature points:
/// `N = int f1`, `M_alpha = int f1 y_alpha`, `Q_alpha = int f_alpha`.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamLoads {
    pub y1: Vec<f64>,
    /// `(N, M2, M3, Q2, Q3)` per point.
    pub values: Vec<[f64; 5]>,
}

/// `beam_loads`.
pub fn beam_loads(f: Option<&VectorFn>, section: &SectionMesh, y1: &[f64]) -> BeamLoads {
    let values = y1
        .iter()
        .map(|&t| {
            let mut v = [0.0; 5];
            if let Some(f) = f {
                for q in section.quadrature() {
                    let y = [t, q.x[0], q.x[1]];
                    let fy = f(&y);
                    v[0] += q.weight * fy[0];
                    v[1] += q.weight * fy[0] * y[1];
                    v[2] += q.weight * fy[0] * y[2];
                    v[3] += q.weight * fy[1];
                    v[4] += q.weight * fy[2];
                }
            }
            v
        })
        .collect();
    BeamLoads { y1: y1.to_vec(), values }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitOptions {
    /// Number of axial elements.
    pub elements: usize,
    /// Target element size of the section mesh.
    pub section_h: f64,
    /// Relative residual of the cell solves.
    pub cell_tol: f64,
}

impl Default for LimitOptions {
    fn default() -> Self {
        Self { elements: 32, section_h: 0.05, cell_tol: 1e-11 }
    }
}

/// Everything the beam problem needs that does not depend on the regime.
#[derive(Clone, Debug)]
pub struct LimitModel {
    pub layout: Layout,
    pub shape: Shape2,
    pub section: Arc<SectionMesh>,
    /// Axial quadrature `(element, xi, y1, weight)`.
    pub quadrature: Vec<(usize, f64, f64, f64)>,
    pub cells: Vec<CellData>,
    pub loads: BeamLoads,
}

impl LimitModel {
    pub fn build(
        material: &MaterialField,
        f: Option<&VectorFn>,
        h: Option<&TensorFn>,
        opts: &LimitOptions,
    ) -> Result<Self> {
        let section = Arc::new(build_section_mesh(material.section(), opts.section_h)?);
        Self::with_section(material, section, f, h, opts)
    }

    pub fn with_section(
        material: &MaterialField,
        section: Arc<SectionMesh>,
        f: Option<&VectorFn>,
        h: Option<&TensorFn>,
        opts: &LimitOptions,
    ) -> Result<Self> {
        if opts.elements == 0 {
            return Err(Error::Config("the limit beam needs at least one element".into()));
        }
        let layout = Layout::new(opts.elements);
        let quadrature = layout.quadrature();
        let y1: Vec<f64> = quadrature.iter().map(|q| q.2).collect();
        let mut cells = Vec::with_capacity(y1.len());
        if material.is_homogeneous() {
            let mut solver = CellSolver::new(section.clone(), material, 0.5, opts.cell_tol)?;
            let (modes, d, lmax) = solver.solve_modes()?;
            for &t in &y1 {
                let (prestrain_mode, load) = match h {
                    Some(h) => {
                        let (m, l) = solver.solve_prestrain(h, t, &modes)?;
                        (Some(m), l)
                    }
                    None => (None, Default::default()),
                };
                cells.push(CellData { y1: t, d, load, modes: modes.clone(), prestrain_mode, max_multiplier: lmax });
            }
        } else {
            for &t in &y1 {
                cells.push(crate::beam::cell::micro_cell_solve(section.clone(), material, h, t, opts.cell_tol)?);
            }
        }
        let loads = beam_loads(f, &section, &y1);
        Ok(Self { layout, shape: *material.section(), section, quadrature, cells, loads })
    }

    /// Sparse rows of `theta = (zeta1', zeta2'', zeta3'', c')` in terms of the
    /// coefficients, at local point `xi` of element `e`.
    pub fn theta_rows(&self, e: usize, xi: f64) -> [Vec<(usize, f64)>; 4] {
        let l = &self.layout;
        let (qi, _, qd) = l.quadratic(e, xi);
        let (hi, _, _, hdd) = l.hermite(e, xi);
        [
            (0..3).map(|a| (l.zeta1(qi[a]), qd[a])).collect(),
            (0..4).map(|a| (l.zeta(2, hi[a]), hdd[a])).collect(),
            (0..4).map(|a| (l.zeta(3, hi[a]), hdd[a])).collect(),
            (0..3).map(|a| (l.twist(qi[a]), qd[a])).collect(),
        ]
    }

    /// Load vector of the beam variables: `int N zeta1 - M_a zeta_a' + Q_a zeta_a + l . theta`.
    pub fn load_vector(&self) -> Vec<f64> {
        let l = &self.layout;
        let mut rhs = vec![0.0; l.dim()];
        for (k, &(e, xi, _, w)) in self.quadrature.iter().enumerate() {
            let [n, m2, m3, q2, q3] = self.loads.values[k];
            let (qi, qn, _) = l.quadratic(e, xi);
            let (hi, hn, hd, _) = l.hermite(e, xi);
            for a in 0..3 {
                rhs[l.zeta1(qi[a])] += w * n * qn[a];
            }
            for a in 0..4 {
                rhs[l.zeta(2, hi[a])] += w * (q2 * hn[a] - m2 * hd[a]);
                rhs[l.zeta(3, hi[a])] += w * (q3 * hn[a] - m3 * hd[a]);
            }
            let load = &self.cells[k].load;
            for (m, row) in self.theta_rows(e, xi).iter().enumerate() {
                for &(i, v) in row {
                    rhs[i] += w * load[m] * v;
                }
            }
        }
        rhs
    }

    /// Stiffness `int theta^T D theta` without boundary terms.
    pub fn bulk_matrix(&self) -> DMatrix<f64> {
        let n = self.layout.dim();
        let mut k = DMatrix::zeros(n, n);
        for (c, &(e, xi, _, w)) in self.cells.iter().zip(&self.quadrature) {
            let rows = self.theta_rows(e, xi);
            for m in 0..4 {
                for nn in 0..4 {
                    let d = w * c.d[(m, nn)];
                    if d == 0.0 {
                        continue;
                    }
                    for &(i, a) in &rows[m] {
                        for &(j, b) in &rows[nn] {
                            k[(i, j)] += d * a * b;
                        }
                    }
                }
            }
        }
        k
    }

    /// Cell data at the axial quadrature point nearest to `y1`.
    pub fn nearest_cell(&self, y1: f64) -> &CellData {
        let (e, xi) = self.layout.locate(y1.clamp(0.0, 1.0));
        let k = (0..3)
            .min_by(|&a, &b| (GAUSS3[a].0 - xi).abs().total_cmp(&(GAUSS3[b].0 - xi).abs()))
            .unwrap_or(1);
        &self.cells[3 * e + k]
    }
}

/// `assemble_limit_system`: the clamped end and the constrained traces are recorded as
/// Dirichlet data; the penalty acts on the remaining traces.
pub fn assemble_limit_system(model: &LimitModel, constraints: &ConstraintSet, penalty: &PenaltyForm) -> Result<SparseSystem> {
    let expected = constraint_set_for(penalty.tag);
    if expected != *constraints {
        return Err(Error::Regime(format!(
            "constraint set {:?} does not belong to {}",
            constraints.slots(),
            penalty.tag
        )));
    }
    let l = &model.layout;
    let trace = l.trace_dofs();
    for &s in &penalty.active {
        if constraints.slots().iter().any(|c| c.index() == s) {
            return Err(Error::Regime(format!("penalty acts on constrained trace slot {s}")));
        }
    }
    let mut k = model.bulk_matrix();
    for i in 0..6 {
        for j in 0..6 {
            k[(trace[i], trace[j])] += penalty.matrix[(i, j)];
        }
    }
    let k = 0.5 * (&k + k.transpose());
    let mut sys = SparseSystem::new(CsrMatrix::from_dense(&k), model.load_vector());
    sys.constrain_dofs(l.clamped_end_dofs().into_iter().map(|d| (d, 0.0)))?;
    sys.constrain_dofs(constraints.slots().into_iter().map(|s| (trace[s.index()], 0.0)))?;
    Ok(sys)
}

/// Dense direct solve of a small constrained system.
pub fn solve_dense(sys: &mut SparseSystem) -> Result<Vec<f64>> {
    sys.eliminate();
    let free = sys.free_dofs();
    let kr = sys.reduced_dense();
    let br = nalgebra::DVector::from_iterator(free.len(), free.iter().map(|&i| sys.rhs[i]));
    let chol = kr
        .cholesky()
        .ok_or_else(|| Error::Singular("limit beam system is not positive definite".into()))?;
    let xr = chol.solve(&br);
    let mut x = vec![0.0; sys.dim()];
    for (&d, &v) in sys.constraints() {
        x[d] = v;
    }
    for (k, &i) in free.iter().enumerate() {
        x[i] = xr[k];
    }
    Ok(x)
}

/// `solve_limit`.
pub fn solve_limit(model: Arc<LimitModel>, regime: &RegimeSpec, penalty: PenaltyForm) -> Result<BeamSolution> {
    if penalty.tag != regime.tag {
        return Err(Error::Regime(format!("penalty for {} used with {}", penalty.tag, regime.tag)));
    }
    let constraints = constraint_set_for(regime.tag);
    let mut sys = assemble_limit_system(&model, &constraints, &penalty)?;
    let coef = solve_dense(&mut sys)?;
    Ok(BeamSolution { model, regime: *regime, penalty, coef })
}

/// Solved beam variables with the micro fields of the section cells.
#[derive(Clone, Debug)]
pub struct BeamSolution {
    pub model: Arc<LimitModel>,
    pub regime: RegimeSpec,
    pub penalty: PenaltyForm,
    pub coef: Vec<f64>,
}

impl BeamSolution {
    fn clamp_y1(y1: f64) -> f64 {
        y1.clamp(0.0, 1.0)
    }

    /// `(zeta1, zeta1')`.
    pub fn zeta1(&self, y1: f64) -> (f64, f64) {
        self.quadratic_field(y1, |l, k| l.zeta1(k))
    }

    /// `(c, c')`.
    pub fn twist(&self, y1: f64) -> (f64, f64) {
        self.quadratic_field(y1, |l, k| l.twist(k))
    }

    fn quadratic_field(&self, y1: f64, idx: impl Fn(&Layout, usize) -> usize) -> (f64, f64) {
        let l = &self.model.layout;
        let (e, xi) = l.locate(Self::clamp_y1(y1));
        let (qi, n, d) = l.quadratic(e, xi);
        let mut out = (0.0, 0.0);
        for a in 0..3 {
            let c = self.coef[idx(l, qi[a])];
            out.0 += n[a] * c;
            out.1 += d[a] * c;
        }
        out
    }

    /// `(zeta_alpha, zeta_alpha', zeta_alpha'')` for `alpha` in {2, 3}.
    pub fn zeta(&self, alpha: usize, y1: f64) -> (f64, f64, f64) {
        let l = &self.model.layout;
        let (e, xi) = l.locate(Self::clamp_y1(y1));
        let (hi, n, d, dd) = l.hermite(e, xi);
        let mut out = (0.0, 0.0, 0.0);
        for a in 0..4 {
            let c = self.coef[l.zeta(alpha, hi[a])];
            out.0 += n[a] * c;
            out.1 += d[a] * c;
            out.2 += dd[a] * c;
        }
        out
    }

    /// `theta = (zeta1', zeta2'', zeta3'', c')`.
    pub fn theta(&self, y1: f64) -> [f64; 4] {
        [self.zeta1(y1).1, self.zeta(2, y1).2, self.zeta(3, y1).2, self.twist(y1).1]
    }

    /// `(zeta2(0), zeta3(0), zeta1(0), c(0), zeta2'(0), zeta3'(0))`.
    pub fn trace_vector(&self) -> [f64; 6] {
        self.model.layout.trace_dofs().map(|d| self.coef[d])
    }

    fn check_domain(&self, y: &Point3) -> Result<()> {
        let tol = 1e-9;
        if y[0] < -tol || y[0] > 1.0 + tol || !self.model.shape.contains([y[1], y[2]], 1e-6) {
            return Err(Error::Domain(*y));
        }
        Ok(())
    }

    /// `eval_limit_displacement`: `(zeta1 - zeta_a' y_a, zeta2, zeta3)`.
    pub fn eval_limit_displacement(&self, y: &Point3) -> Result<[f64; 3]> {
        self.check_domain(y)?;
        Ok(self.displacement_unchecked(y))
    }

    pub(crate) fn displacement_unchecked(&self, y: &Point3) -> [f64; 3] {
        let z1 = self.zeta1(y[0]).0;
        let z2 = self.zeta(2, y[0]);
        let z3 = self.zeta(3, y[0]);
        [z1 - z2.1 * y[1] - z3.1 * y[2], z2.0, z3.0]
    }

    /// Micro fields `(v1, w2, w3)` at a point, from the nearest axial cell.
    pub fn micro_fields(&self, y: &Point3) -> Result<[f64; 3]> {
        self.check_domain(y)?;
        let (e, xi) = self.model.section.locate_clamped([y[1], y[2]]);
        Ok(self.model.nearest_cell(y[0]).micro_value(&self.model.section, e, xi, &self.theta(y[0])))
    }

    /// `eval_E`: the limit strain `E(u, v, w)` at `y`.
    pub fn eval_e(&self, y: &Point3) -> Result<Matrix3<f64>> {
        self.check_domain(y)?;
        Ok(voigt_to_strain(&self.strain_voigt_unchecked(y)))
    }

    pub(crate) fn strain_voigt_unchecked(&self, y: &Point3) -> Vector6<f64> {
        let theta = self.theta(y[0]);
        let em = macro_modes(y[1], y[2]);
        let mut v: Vector6<f64> = (0..4).map(|m| theta[m] * em[m]).sum();
        let (e, xi) = self.model.section.locate_clamped([y[1], y[2]]);
        v += self.model.nearest_cell(y[0]).micro_strain(&self.model.section, e, xi, &theta);
        v
    }

    /// `int theta . D theta + <B t, t>`.
    pub fn energy(&self) -> f64 {
        let k = self.model.bulk_matrix();
        let q = nalgebra::DVector::from_column_slice(&self.coef);
        q.dot(&(&k * &q)) + self.penalty.value(&self.trace_vector())
    }

    /// Work of the loads on the solution.
    pub fn work(&self) -> f64 {
        self.model.load_vector().iter().zip(&self.coef).map(|(a, b)| a * b).sum()
    }
}
