//! Trilinear-hexahedron elasticity: stiffness, loads, strains and energies.

use std::sync::Arc;

use nalgebra::{Matrix3, Matrix6, Vector6};

use crate::error::{Error, Result};
use crate::fem::sparse::{CsrMatrix, SparseSystem};
use crate::geometry::element::{hex_eval, hex_gauss, HexEval};
use crate::geometry::VolumeMesh;
use crate::material::{strain_to_voigt, MaterialField, Point3};

pub type VectorFn = Arc<dyn Fn(&Point3) -> [f64; 3] + Send + Sync>;
pub type TensorFn = Arc<dyn Fn(&Point3) -> Matrix3<f64> + Send + Sync>;

/// How material coordinates `y` are obtained from mesh coordinates `x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Frame {
    /// `y = (x1, x'/eps)` on the thin cylinder.
    Cylinder { eps: f64 },
    /// Frozen tensor `A(0)` regardless of position.
    Frozen,
    /// `y = x`.
    Direct,
}

impl Frame {
    pub fn to_reference(&self, x: &Point3) -> Point3 {
        match *self {
            Frame::Cylinder { eps } => [x[0], x[1] / eps, x[2] / eps],
            Frame::Frozen => [0.0; 3],
            Frame::Direct => *x,
        }
    }
}

/// Nodal displacement vectors with trilinear interpolation.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementField {
    pub values: Vec<[f64; 3]>,
}

impl DisplacementField {
    pub fn zeros(n: usize) -> Self {
        Self { values: vec![[0.0; 3]; n] }
    }

    pub fn from_dofs(x: &[f64]) -> Self {
        Self { values: x.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect() }
    }

    pub fn from_fn(mesh: &VolumeMesh, f: impl Fn(&Point3) -> [f64; 3]) -> Self {
        Self { values: mesh.nodes().iter().map(f).collect() }
    }

    pub fn dofs(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { values: self.values.iter().map(|v| v.map(|c| s * c)).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn element_values(&self, mesh: &VolumeMesh, e: usize) -> [[f64; 3]; 8] {
        let el = &mesh.elements()[e];
        std::array::from_fn(|a| self.values[el[a]])
    }

    pub fn value_at(&self, mesh: &VolumeMesh, e: usize, xi: [f64; 3]) -> [f64; 3] {
        let g = hex_eval(&mesh.element_coords(e), xi);
        let u = self.element_values(mesh, e);
        let mut out = [0.0; 3];
        for a in 0..8 {
            for c in 0..3 {
                out[c] += g.n[a] * u[a][c];
            }
        }
        out
    }

    pub fn strain_at(&self, mesh: &VolumeMesh, e: usize, xi: [f64; 3]) -> Matrix3<f64> {
        let g = hex_eval(&mesh.element_coords(e), xi);
        element_strain(&g, &self.element_values(mesh, e))
    }
}

fn element_strain(g: &HexEval, u: &[[f64; 3]; 8]) -> Matrix3<f64> {
    let mut grad = Matrix3::zeros();
    for a in 0..8 {
        for i in 0..3 {
            for j in 0..3 {
                grad[(i, j)] += u[a][i] * g.dn[a][j];
            }
        }
    }
    0.5 * (grad + grad.transpose())
}

/// Strain tensors at every quadrature point, element-major (`8 e + q`).
#[derive(Clone, Debug, PartialEq)]
pub struct StrainSamples {
    pub strains: Vec<Matrix3<f64>>,
    pub weights: Vec<f64>,
    pub points: Vec<Point3>,
}

impl StrainSamples {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `sum w |e|^2`.
    pub fn norm_sq(&self) -> f64 {
        self.strains.iter().zip(&self.weights).map(|(e, w)| w * e.norm_squared()).sum()
    }
}

/// Engineering-strain rows of the hexahedron: `B[k][3a + c]`.
fn b_matrix(dn: &[[f64; 3]; 8]) -> [[f64; 24]; 6] {
    let mut b = [[0.0; 24]; 6];
    for a in 0..8 {
        let [gx, gy, gz] = dn[a];
        let c = 3 * a;
        b[0][c] = gx;
        b[1][c + 1] = gy;
        b[2][c + 2] = gz;
        b[3][c + 1] = gz;
        b[3][c + 2] = gy;
        b[4][c] = gz;
        b[4][c + 2] = gx;
        b[5][c] = gy;
        b[5][c + 1] = gx;
    }
    b
}

fn element_stiffness(
    coords: &[[f64; 3]; 8],
    material: &MaterialField,
    frame: Frame,
) -> Result<[f64; 576]> {
    let mut ke = [0.0; 576];
    for xi in hex_gauss() {
        let g = hex_eval(coords, xi);
        let c = material_matrix(material, frame, &g.x)?;
        let b = b_matrix(&g.dn);
        let mut cb = [[0.0; 24]; 6];
        for r in 0..6 {
            for k in 0..6 {
                let ck = c[(r, k)] * g.det;
                if ck != 0.0 {
                    for j in 0..24 {
                        cb[r][j] += ck * b[k][j];
                    }
                }
            }
        }
        for i in 0..24 {
            for r in 0..6 {
                let bri = b[r][i];
                if bri != 0.0 {
                    for j in 0..24 {
                        ke[24 * i + j] += bri * cb[r][j];
                    }
                }
            }
        }
    }
    // exact symmetry regardless of rounding order
    for i in 0..24 {
        for j in 0..i {
            let v = 0.5 * (ke[24 * i + j] + ke[24 * j + i]);
            ke[24 * i + j] = v;
            ke[24 * j + i] = v;
        }
    }
    Ok(ke)
}

fn material_matrix(material: &MaterialField, frame: Frame, x: &Point3) -> Result<Matrix6<f64>> {
    Ok(match frame {
        Frame::Frozen => *material.at_origin().matrix(),
        _ => *material.eval(&frame.to_reference(x))?.matrix(),
    })
}

fn check_coercive(material: &MaterialField, mesh: &VolumeMesh, frame: Frame) -> Result<()> {
    let check = |c: &crate::material::VoigtMatrix| {
        let m = c.min_eigenvalue();
        if m > 0.0 {
            Ok(())
        } else {
            Err(Error::InadmissibleMaterial(m))
        }
    };
    if material.is_homogeneous() || frame == Frame::Frozen {
        return check(&material.at_origin());
    }
    for e in 0..mesh.elements().len() {
        let x = hex_eval(&mesh.element_coords(e), [0.0; 3]).x;
        check(&material.eval(&frame.to_reference(&x))?)?;
    }
    Ok(())
}

/// Node-adjacency pattern expanded to 3x3 blocks.
fn stiffness_pattern(mesh: &VolumeMesh) -> CsrMatrix {
    let nn = mesh.nodes().len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nn];
    for el in mesh.elements() {
        for &a in el {
            adj[a].extend_from_slice(el);
        }
    }
    let mut pattern = Vec::with_capacity(3 * nn);
    for mut nb in adj {
        nb.sort_unstable();
        nb.dedup();
        let row: Vec<usize> = nb.iter().flat_map(|&j| [3 * j, 3 * j + 1, 3 * j + 2]).collect();
        for _ in 0..3 {
            pattern.push(row.clone());
        }
    }
    CsrMatrix::from_pattern(pattern)
}

fn map_elements<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// `assemble_stiffness`: `K_ij = int A e(N_i) : e(N_j)` with zero right-hand side.
///
/// Element matrices may be computed concurrently; they are scattered in element order,
/// so the result is bitwise reproducible.
pub fn assemble_stiffness(mesh: &VolumeMesh, material: &MaterialField, frame: Frame) -> Result<SparseSystem> {
    check_coercive(material, mesh, frame)?;
    let mut k = stiffness_pattern(mesh);
    const BATCH: usize = 4096;
    let ne = mesh.elements().len();
    let mut start = 0;
    while start < ne {
        let end = (start + BATCH).min(ne);
        let kes = map_elements(end - start, |i| element_stiffness(&mesh.element_coords(start + i), material, frame));
        for (i, ke) in kes.into_iter().enumerate() {
            let ke = ke?;
            let el = &mesh.elements()[start + i];
            for a in 0..8 {
                for r in 0..3 {
                    let row = 3 * el[a] + r;
                    for b in 0..8 {
                        for c in 0..3 {
                            k.add(row, 3 * el[b] + c, ke[24 * (3 * a + r) + 3 * b + c]);
                        }
                    }
                }
            }
        }
        start = end;
    }
    let n = k.dim();
    Ok(SparseSystem::new(k, vec![0.0; n]))
}

/// `assemble_body_load`: `int F . v` with `F = (f1, eps f2, eps f3)` evaluated at the
/// reference point of each quadrature point.
pub fn assemble_body_load(mesh: &VolumeMesh, f: &VectorFn, eps: f64, frame: Frame) -> Vec<f64> {
    let mut out = vec![0.0; 3 * mesh.nodes().len()];
    for (e, el) in mesh.elements().iter().enumerate() {
        let coords = mesh.element_coords(e);
        for xi in hex_gauss() {
            let g = hex_eval(&coords, xi);
            let v = f(&frame.to_reference(&g.x));
            let load = [v[0], eps * v[1], eps * v[2]];
            for a in 0..8 {
                for c in 0..3 {
                    out[3 * el[a] + c] += g.n[a] * load[c] * g.det;
                }
            }
        }
    }
    out
}

/// `assemble_prestrain_load`: `int H : e(v)`.
pub fn assemble_prestrain_load(mesh: &VolumeMesh, h: &TensorFn, frame: Frame) -> Result<Vec<f64>> {
    let mut out = vec![0.0; 3 * mesh.nodes().len()];
    for (e, el) in mesh.elements().iter().enumerate() {
        let coords = mesh.element_coords(e);
        for xi in hex_gauss() {
            let g = hex_eval(&coords, xi);
            let hv = h(&frame.to_reference(&g.x));
            let asym = (hv - hv.transpose()).amax();
            if asym > 1e-12 * hv.amax().max(1.0) {
                return Err(Error::NonSymmetric(format!("prestrain asymmetry {asym:.3e}")));
            }
            let s = Vector6::new(hv[(0, 0)], hv[(1, 1)], hv[(2, 2)], hv[(1, 2)], hv[(0, 2)], hv[(0, 1)]);
            let b = b_matrix(&g.dn);
            for a in 0..8 {
                for c in 0..3 {
                    let j = 3 * a + c;
                    let v: f64 = (0..6).map(|r| b[r][j] * s[r]).sum();
                    out[3 * el[a] + c] += v * g.det;
                }
            }
        }
    }
    Ok(out)
}

/// `impose_dirichlet`: all three components of each node in `set` take `values(node)`.
pub fn impose_dirichlet(
    sys: &mut SparseSystem,
    set: &[usize],
    values: impl Fn(usize) -> [f64; 3],
) -> Result<()> {
    if set.is_empty() {
        return Err(Error::Singular("empty Dirichlet set".into()));
    }
    let dofs = set.iter().flat_map(|&n| {
        let v = values(n);
        (0..3).map(move |c| (3 * n + c, v[c]))
    });
    sys.constrain_dofs(dofs)
}

/// `strain_at_quadrature`.
pub fn strain_at_quadrature(mesh: &VolumeMesh, u: &DisplacementField) -> StrainSamples {
    let ne = mesh.elements().len();
    let mut s = StrainSamples {
        strains: Vec::with_capacity(8 * ne),
        weights: Vec::with_capacity(8 * ne),
        points: Vec::with_capacity(8 * ne),
    };
    for e in 0..ne {
        let coords = mesh.element_coords(e);
        let ue = u.element_values(mesh, e);
        for xi in hex_gauss() {
            let g = hex_eval(&coords, xi);
            s.strains.push(element_strain(&g, &ue));
            s.weights.push(g.det);
            s.points.push(g.x);
        }
    }
    s
}

/// `quadratic_energy`: `sum w A e : e`.
pub fn quadratic_energy(samples: &StrainSamples, material: &MaterialField, frame: Frame) -> Result<f64> {
    let mut total = 0.0;
    for ((e, w), x) in samples.strains.iter().zip(&samples.weights).zip(&samples.points) {
        let c = material_matrix(material, frame, x)?;
        let v = strain_to_voigt(e);
        total += w * v.dot(&(c * v));
    }
    Ok(total)
}

/// Discrete work `b . x`.
pub fn work(load: &[f64], x: &[f64]) -> f64 {
    crate::fem::solve::dot(load, x)
}
