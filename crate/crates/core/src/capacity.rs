//! Half-space potentials with frozen coefficients `A(0)`, their energy Gram matrices,
//! orthogonalized generators and the boundary penalty at critical patch sizes.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fem::{
    assemble_stiffness, impose_dirichlet, solve_spd, solve_spd_projected, strain_at_quadrature,
    DisplacementField, Frame, Projector, SolveStats, SolverOptions, SparseSystem, StrainSamples,
};
use crate::geometry::{build_halfbox_mesh, Grading, NodeSet, Shape2, VolumeMesh};
use crate::material::{strain_to_voigt, MaterialField, Point3, VoigtMatrix};
use crate::regimes::{RegimeSpec, RegimeTag};

/// Patch data of the six potentials, in storage order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PatchProfileKind {
    /// `e1`
    Axial,
    /// `e2`
    Trans2,
    /// `e3`
    Trans3,
    /// `z3 e2 - z2 e3`
    Torsion,
    /// `z1 e2 - z2 e1`
    Rot2,
    /// `z1 e3 - z3 e1`
    Rot3,
}

impl PatchProfileKind {
    pub const ALL: [PatchProfileKind; 6] = [
        PatchProfileKind::Axial,
        PatchProfileKind::Trans2,
        PatchProfileKind::Trans3,
        PatchProfileKind::Torsion,
        PatchProfileKind::Rot2,
        PatchProfileKind::Rot3,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            PatchProfileKind::Axial => "phi1",
            PatchProfileKind::Trans2 => "phi2",
            PatchProfileKind::Trans3 => "phi3",
            PatchProfileKind::Torsion => "psi1",
            PatchProfileKind::Rot2 => "psi2",
            PatchProfileKind::Rot3 => "psi3",
        }
    }

    fn value(self, z: &Point3) -> [f64; 3] {
        match self {
            PatchProfileKind::Axial => [1.0, 0.0, 0.0],
            PatchProfileKind::Trans2 => [0.0, 1.0, 0.0],
            PatchProfileKind::Trans3 => [0.0, 0.0, 1.0],
            PatchProfileKind::Torsion => [0.0, z[2], -z[1]],
            PatchProfileKind::Rot2 => [-z[1], z[0], 0.0],
            PatchProfileKind::Rot3 => [-z[2], 0.0, z[0]],
        }
    }
}

/// `patch_profile`: the Dirichlet datum on `{0} x S0`.
pub fn patch_profile(kind: PatchProfileKind, z: &Point3, patch: &Shape2) -> Result<[f64; 3]> {
    let scale = patch.diameter();
    if z[0].abs() > 1e-12 * scale || !patch.contains([z[1], z[2]], 1e-12) {
        return Err(Error::Domain(*z));
    }
    Ok(kind.value(z))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Farfield {
    /// Traction-free truncation faces; energies approach the half-space value from below.
    Natural,
    /// Clamped truncation faces; energies approach it from above.
    Clamped,
}

impl Farfield {
    pub fn name(self) -> &'static str {
        match self {
            Farfield::Natural => "natural",
            Farfield::Clamped => "clamped",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CapacityParams {
    pub length: f64,
    pub farfield: Farfield,
    pub grading: Grading,
    pub solver: SolverOptions,
}

impl CapacityParams {
    pub fn new(length: f64, farfield: Farfield) -> Self {
        Self { length, farfield, grading: Grading::default(), solver: SolverOptions::default() }
    }
}

/// Truncated half-space with its assembled frozen-coefficient stiffness.
///
/// With traction-free truncation faces the rigid extension of any patch datum has zero
/// energy, so the natural variant also pins the far field's mean translation and mean
/// rotation (area-weighted over the truncation faces). Those six averaged constraints are
/// satisfied by every clamped field, so on a fixed mesh the natural energy never exceeds
/// the clamped one.
pub struct HalfSpaceProblem {
    mesh: Arc<VolumeMesh>,
    stiffness: SparseSystem,
    patch: Shape2,
    params: CapacityParams,
}

impl HalfSpaceProblem {
    pub fn new(a0: &VoigtMatrix, patch: &Shape2, params: CapacityParams) -> Result<Self> {
        let mesh = Arc::new(build_halfbox_mesh(patch, params.length, &params.grading)?);
        let material = MaterialField::voigt(*a0, *patch);
        let stiffness = assemble_stiffness(&mesh, &material, Frame::Frozen)?;
        Ok(Self { mesh, stiffness, patch: *patch, params })
    }

    pub fn mesh(&self) -> &Arc<VolumeMesh> {
        &self.mesh
    }

    /// Potential with patch datum `scale * profile(kind)`.
    pub fn solve(&self, kind: PatchProfileKind, scale: f64) -> Result<(DisplacementField, SolveStats)> {
        let nodes = self.mesh.nodes();
        let patch = self.mesh.node_set(NodeSet::Patch);
        for &k in patch {
            patch_profile(kind, &nodes[k], &self.patch)?;
        }
        let mut sys = self.stiffness.clone();
        impose_dirichlet(&mut sys, patch, |k| kind.value(&nodes[k]).map(|v| scale * v))?;
        let (x, stats) = match self.params.farfield {
            Farfield::Clamped => {
                impose_dirichlet(&mut sys, self.mesh.node_set(NodeSet::Farfield), |_| [0.0; 3])?;
                solve_spd(&mut sys, &self.params.solver)?
            }
            Farfield::Natural => {
                let mut proj = Projector::new(far_rigid_rows(&self.mesh));
                solve_spd_projected(&mut sys, Some(&mut proj), &self.params.solver)?
            }
        };
        Ok((DisplacementField::from_dofs(&x), stats))
    }
}

/// Area-weighted mean translation (3 rows) and mean rotation (3 rows) over the
/// truncation faces.
fn far_rigid_rows(mesh: &VolumeMesh) -> Vec<Vec<(usize, f64)>> {
    const FACES: [[usize; 4]; 6] =
        [[0, 3, 2, 1], [4, 5, 6, 7], [0, 1, 5, 4], [1, 2, 6, 5], [2, 3, 7, 6], [3, 0, 4, 7]];
    let nn = mesh.nodes().len();
    let mut far = vec![false; nn];
    for &k in mesh.node_set(NodeSet::Farfield) {
        far[k] = true;
    }
    let mut weight = vec![0.0; nn];
    for el in mesh.elements() {
        for f in FACES {
            let q = f.map(|a| el[a]);
            if q.iter().all(|&k| far[k]) {
                let p = q.map(|k| mesh.nodes()[k]);
                let d1 = [p[2][0] - p[0][0], p[2][1] - p[0][1], p[2][2] - p[0][2]];
                let d2 = [p[3][0] - p[1][0], p[3][1] - p[1][1], p[3][2] - p[1][2]];
                let c = [
                    d1[1] * d2[2] - d1[2] * d2[1],
                    d1[2] * d2[0] - d1[0] * d2[2],
                    d1[0] * d2[1] - d1[1] * d2[0],
                ];
                let area = 0.5 * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
                for k in q {
                    weight[k] += 0.25 * area;
                }
            }
        }
    }
    let total: f64 = weight.iter().sum();
    let mut centre = [0.0; 3];
    for (k, w) in weight.iter().enumerate() {
        for c in 0..3 {
            centre[c] += w * mesh.nodes()[k][c] / total;
        }
    }
    let mut rows = vec![vec![0.0; 3 * nn]; 6];
    let sparse = |r: Vec<f64>| r.into_iter().enumerate().filter(|(_, v)| *v != 0.0).collect::<Vec<_>>();
    for (k, &w) in weight.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let w = w / total;
        let d: [f64; 3] = std::array::from_fn(|c| mesh.nodes()[k][c] - centre[c]);
        for c in 0..3 {
            rows[c][3 * k + c] = w;
        }
        // (d x u)_c
        rows[3][3 * k + 2] = w * d[1];
        rows[3][3 * k + 1] = -w * d[2];
        rows[4][3 * k] = w * d[2];
        rows[4][3 * k + 2] = -w * d[0];
        rows[5][3 * k + 1] = w * d[0];
        rows[5][3 * k] = -w * d[1];
    }
    rows.into_iter().map(sparse).collect()
}

/// `solve_potential`.
pub fn solve_potential(
    kind: PatchProfileKind,
    scale: f64,
    a0: &VoigtMatrix,
    patch: &Shape2,
    params: CapacityParams,
) -> Result<(Arc<VolumeMesh>, DisplacementField, SolveStats)> {
    let problem = HalfSpaceProblem::new(a0, patch, params)?;
    let (u, s) = problem.solve(kind, scale)?;
    Ok((problem.mesh.clone(), u, s))
}

/// `energy_gram`: `G_ij = sum_q w A0 e_i : e_j`.
pub fn energy_gram(samples: &[&StrainSamples], a0: &VoigtMatrix) -> Result<DMatrix<f64>> {
    let n = samples.len();
    if let Some(first) = samples.first() {
        if samples.iter().any(|s| s.len() != first.len() || s.weights != first.weights) {
            return Err(Error::Geometry("strain samples live on different meshes".into()));
        }
    }
    let mut g = DMatrix::zeros(n, n);
    let Some(first) = samples.first() else { return Ok(g) };
    let c = a0.matrix();
    for q in 0..first.len() {
        let w = first.weights[q];
        let v: Vec<_> = samples.iter().map(|s| strain_to_voigt(&s.strains[q])).collect();
        let cv: Vec<_> = v.iter().map(|x| c * x).collect();
        for i in 0..n {
            for j in i..n {
                g[(i, j)] += w * v[i].dot(&cv[j]);
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            g[(i, j)] = g[(j, i)];
        }
    }
    Ok(g)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Orthogonalization {
    pub coef: Vec<f64>,
    /// Spectral condition number of the basis block.
    pub condition: f64,
}

/// `orthogonalize`: solves `G_BB c = -G_B,target`.
pub fn orthogonalize(target: usize, basis: &[usize], g: &DMatrix<f64>) -> Result<Orthogonalization> {
    let m = basis.len();
    let gbb = DMatrix::from_fn(m, m, |a, b| g[(basis[a], basis[b])]);
    let rhs = DVector::from_fn(m, |a, _| -g[(basis[a], target)]);
    if m == 0 {
        return Ok(Orthogonalization { coef: Vec::new(), condition: 1.0 });
    }
    let eig = SymmetricEigen::new(gbb.clone());
    let lmin = eig.eigenvalues.min();
    let lmax = eig.eigenvalues.max();
    if !(lmin > 0.0) {
        return Err(Error::Singular(format!("basis Gram block not positive definite (min eigenvalue {lmin:.3e})")));
    }
    let condition = lmax / lmin;
    if condition > 1e14 {
        return Err(Error::Singular(format!("basis Gram block ill-conditioned ({condition:.3e})")));
    }
    let chol = gbb.cholesky().ok_or_else(|| Error::Singular("Cholesky failed".into()))?;
    let coef = chol.solve(&rhs);
    Ok(Orthogonalization { coef: coef.iter().copied().collect(), condition })
}

/// The six potentials on one truncated half-space with their derived quantities.
pub struct CapacitarySet {
    pub length: f64,
    pub farfield: Farfield,
    pub patch: Shape2,
    pub a0: VoigtMatrix,
    pub mesh: Arc<VolumeMesh>,
    pub fields: Vec<DisplacementField>,
    pub strains: Vec<StrainSamples>,
    pub stats: Vec<SolveStats>,
    /// Raw Gram over (phi1, phi2, phi3, psi1, psi2, psi3).
    pub gram: Matrix6<f64>,
    /// `phi^1_hat = phi1 + a2 phi2 + a3 phi3`.
    pub a: [f64; 2],
    /// `psi^i_hat = psi_i + b[i][k] phi_k`.
    pub b: [[f64; 3]; 3],
    pub condition_a: f64,
    pub condition_b: f64,
    /// Fraction of each potential's energy carried by the outermost element shell.
    pub tail: [f64; 6],
}

impl CapacitarySet {
    pub fn build(a0: &VoigtMatrix, patch: &Shape2, params: CapacityParams) -> Result<Self> {
        let problem = HalfSpaceProblem::new(a0, patch, params)?;
        let mut fields = Vec::with_capacity(6);
        let mut stats = Vec::with_capacity(6);
        for kind in PatchProfileKind::ALL {
            let (u, s) = problem.solve(kind, 1.0)?;
            fields.push(u);
            stats.push(s);
        }
        Self::from_fields(a0, patch, &params, problem.mesh.clone(), fields, stats)
    }

    fn from_fields(
        a0: &VoigtMatrix,
        patch: &Shape2,
        params: &CapacityParams,
        mesh: Arc<VolumeMesh>,
        fields: Vec<DisplacementField>,
        stats: Vec<SolveStats>,
    ) -> Result<Self> {
        let strains: Vec<StrainSamples> = fields.iter().map(|u| strain_at_quadrature(&mesh, u)).collect();
        let refs: Vec<&StrainSamples> = strains.iter().collect();
        let g = energy_gram(&refs, a0)?;
        let gram = Matrix6::from_fn(|i, j| g[(i, j)]);
        let oa = orthogonalize(0, &[1, 2], &g)?;
        let mut b = [[0.0; 3]; 3];
        let mut condition_b: f64 = 1.0;
        for i in 0..3 {
            let o = orthogonalize(3 + i, &[0, 1, 2], &g)?;
            b[i] = [o.coef[0], o.coef[1], o.coef[2]];
            condition_b = condition_b.max(o.condition);
        }
        let tail = shell_fraction(&mesh, &strains, a0);
        Ok(Self {
            length: params.length,
            farfield: params.farfield,
            patch: *patch,
            a0: *a0,
            mesh,
            fields,
            strains,
            stats,
            gram,
            a: [oa.coef[0], oa.coef[1]],
            b,
            condition_a: oa.condition,
            condition_b,
            tail,
        })
    }

    /// Columns: raw coefficients of the generators (phi1_hat, phi2, phi3, psi1_hat, psi2_hat, psi3_hat).
    pub fn generator_matrix(&self) -> Matrix6<f64> {
        let mut c = Matrix6::identity();
        c[(1, 0)] = self.a[0];
        c[(2, 0)] = self.a[1];
        for i in 0..3 {
            for k in 0..3 {
                c[(k, 3 + i)] = self.b[i][k];
            }
        }
        c
    }

    /// Gram of the orthogonalized generators.
    pub fn generator_gram(&self) -> Matrix6<f64> {
        let c = self.generator_matrix();
        let g = c.transpose() * self.gram * c;
        0.5 * (g + g.transpose())
    }

    /// Energy of `phi^1_hat`.
    pub fn k_hat(&self) -> f64 {
        self.generator_gram()[(0, 0)]
    }

    fn raw_coefficients(&self, w: &[f64; 6]) -> [f64; 6] {
        let c = self.generator_matrix();
        let v = c * nalgebra::Vector6::from_column_slice(w);
        std::array::from_fn(|k| v[k])
    }

    /// `sum_k w_k e(g_k)(z)` over the generators; zero outside the truncated box.
    pub fn orthogonal_strain_combination(&self, w: &[f64; 6], z: &Point3) -> Matrix3<f64> {
        let l = self.length;
        if z[0] < 0.0 || z[0] > l || z[1].abs() > l || z[2].abs() > l {
            return Matrix3::zeros();
        }
        let Ok((e, xi)) = self.mesh.locate(*z) else { return Matrix3::zeros() };
        let c = self.raw_coefficients(w);
        let mut out = Matrix3::zeros();
        for k in 0..6 {
            if c[k] != 0.0 {
                out += c[k] * self.fields[k].strain_at(&self.mesh, e, xi);
            }
        }
        out
    }

    /// `sum_q w |sum_k w_k e(g_k)|^2` over quadrature points `z` accepted by `keep`.
    pub fn strain_mass(&self, w: &[f64; 6], keep: impl Fn(&Point3) -> bool) -> f64 {
        let c = self.raw_coefficients(w);
        let s0 = &self.strains[0];
        let mut total = 0.0;
        for q in 0..s0.len() {
            if !keep(&s0.points[q]) {
                continue;
            }
            let mut e = Matrix3::zeros();
            for k in 0..6 {
                if c[k] != 0.0 {
                    e += c[k] * self.strains[k].strains[q];
                }
            }
            total += s0.weights[q] * e.norm_squared();
        }
        total
    }

    /// `|int A0 e(g):e(phi_k)| / sqrt(G(g,g) G_kk)` for `g` in (phi1_hat, psi1_hat, psi2_hat,
    /// psi3_hat) against their bases, integrated directly from the stored strains.
    pub fn orthogonality_residuals(&self) -> Vec<(usize, usize, f64)> {
        let c = self.a0.matrix();
        let gen = self.generator_matrix();
        let gg = self.generator_gram();
        let pairs: Vec<(usize, usize)> =
            [(0, 1), (0, 2)].into_iter().chain((3..6).flat_map(|g| (0..3).map(move |k| (g, k)))).collect();
        let s0 = &self.strains[0];
        let mut out = Vec::new();
        for (g, k) in pairs {
            let mut acc = 0.0;
            for q in 0..s0.len() {
                let mut e = Matrix3::zeros();
                for j in 0..6 {
                    if gen[(j, g)] != 0.0 {
                        e += gen[(j, g)] * self.strains[j].strains[q];
                    }
                }
                let vg = strain_to_voigt(&e);
                let vk = strain_to_voigt(&self.strains[k].strains[q]);
                acc += s0.weights[q] * vg.dot(&(c * vk));
            }
            let scale = (gg[(g, g)] * self.gram[(k, k)]).sqrt();
            out.push((g, k, acc.abs() / scale));
        }
        out
    }
}

fn shell_fraction(mesh: &VolumeMesh, strains: &[StrainSamples], a0: &VoigtMatrix) -> [f64; 6] {
    let mut far = vec![false; mesh.nodes().len()];
    for &k in mesh.node_set(NodeSet::Farfield) {
        far[k] = true;
    }
    let c = a0.matrix();
    let mut out = [0.0; 6];
    for (k, s) in strains.iter().enumerate() {
        let (mut shell, mut total) = (0.0, 0.0);
        for (e, el) in mesh.elements().iter().enumerate() {
            let en: f64 = (0..8)
                .map(|q| {
                    let v = strain_to_voigt(&s.strains[8 * e + q]);
                    s.weights[8 * e + q] * v.dot(&(c * v))
                })
                .sum();
            total += en;
            if el.iter().any(|&n| far[n]) {
                shell += en;
            }
        }
        out[k] = if total > 0.0 { shell / total } else { 0.0 };
    }
    out
}

/// `B` on the trace vector `t = (z2(0), z3(0), z1(0), c(0), z2'(0), z3'(0))`.
#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyForm {
    pub tag: RegimeTag,
    pub rho: f64,
    pub matrix: Matrix6<f64>,
    pub active: Vec<usize>,
}

impl PenaltyForm {
    pub fn zero(tag: RegimeTag) -> Self {
        Self { tag, rho: 0.0, matrix: Matrix6::zeros(), active: Vec::new() }
    }

    /// Places `rho` times the relevant block of the generator Gram on the active slots.
    pub fn from_generator_gram(regime: &RegimeSpec, gg: &Matrix6<f64>) -> Self {
        let (active, gens): (Vec<usize>, Vec<usize>) = match regime.tag {
            RegimeTag::Critical3 => (vec![0, 1], vec![1, 2]),
            RegimeTag::Critical1 => (vec![2], vec![0]),
            RegimeTag::CriticalThird => (vec![3, 4, 5], vec![3, 4, 5]),
            _ => return Self::zero(regime.tag),
        };
        let rho = regime.rho_or_zero();
        let mut m = Matrix6::zeros();
        for (a, &sa) in active.iter().enumerate() {
            for (b, &sb) in active.iter().enumerate() {
                m[(sa, sb)] = rho * gg[(gens[a], gens[b])];
            }
        }
        Self { tag: regime.tag, rho, matrix: m, active }
    }

    pub fn is_zero(&self) -> bool {
        self.active.is_empty()
    }

    pub fn active_block(&self) -> DMatrix<f64> {
        let n = self.active.len();
        DMatrix::from_fn(n, n, |a, b| self.matrix[(self.active[a], self.active[b])])
    }

    /// `<B t, t>`.
    pub fn value(&self, t: &[f64; 6]) -> f64 {
        let v = nalgebra::Vector6::from_column_slice(t);
        v.dot(&(self.matrix * v))
    }
}

/// `penalty_form`: zero in non-critical regimes; otherwise built from `set`.
pub fn penalty_form(regime: &RegimeSpec, set: Option<&CapacitarySet>) -> Result<PenaltyForm> {
    if !regime.is_critical() {
        return Ok(PenaltyForm::zero(regime.tag));
    }
    let set = set.ok_or_else(|| Error::Regime(format!("{} needs capacitary potentials", regime.tag)))?;
    Ok(PenaltyForm::from_generator_gram(regime, &set.generator_gram()))
}

/// `coercivity_eigen`: smallest eigenvalue of the active block.
pub fn coercivity_eigen(p: &PenaltyForm) -> Result<f64> {
    if p.is_zero() {
        return Err(Error::Regime(format!("{} carries no penalty", p.tag)));
    }
    let lmin = SymmetricEigen::new(p.active_block()).eigenvalues.min();
    if lmin > 0.0 {
        Ok(lmin)
    } else {
        Err(Error::Coercivity(lmin))
    }
}

/// Diagonal Gram entries under both truncations at one length.
#[derive(Clone, Debug, PartialEq)]
pub struct Bracket {
    pub length: f64,
    pub natural: [f64; 6],
    pub clamped: [f64; 6],
}

impl Bracket {
    pub fn new(natural: &CapacitarySet, clamped: &CapacitarySet) -> Self {
        Self {
            length: natural.length,
            natural: std::array::from_fn(|k| natural.gram[(k, k)]),
            clamped: std::array::from_fn(|k| clamped.gram[(k, k)]),
        }
    }

    /// `(clamped - natural) / clamped` per entry.
    pub fn relative_gap(&self) -> [f64; 6] {
        std::array::from_fn(|k| (self.clamped[k] - self.natural[k]) / self.clamped[k])
    }

    pub fn ordered(&self, tol: f64) -> bool {
        (0..6).all(|k| self.natural[k] <= self.clamped[k] + tol * self.clamped[k].abs())
    }
}
