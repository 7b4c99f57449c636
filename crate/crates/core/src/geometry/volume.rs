//! Hexahedral meshes of the thin cylinder and of the truncated half-space.
//!
//! Both are extrusions of a graded section O-grid along the first axis; extrusion
//! layers are graded geometrically away from the clamped patch.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::geometry::element::{hex_eval, hex_gauss, hex_invert};
use crate::geometry::locate::Bvh;
use crate::geometry::section::{graded_section_mesh, SectionMesh};
use crate::geometry::{SectionSpec, Shape2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeSet {
    /// Clamped patch `{0} x eps r S0` of the cylinder.
    Gamma0,
    /// Clamped end `{1} x eps S` of the cylinder.
    Gamma1,
    /// Dirichlet patch `{0} x S0` of the half-space box.
    Patch,
    /// Truncation boundary of the half-space box.
    Farfield,
}

impl NodeSet {
    pub fn name(&self) -> &'static str {
        match self {
            NodeSet::Gamma0 => "gamma0",
            NodeSet::Gamma1 => "gamma1",
            NodeSet::Patch => "patch",
            NodeSet::Farfield => "farfield",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MeshKind {
    Cylinder { eps: f64, r_eps: f64 },
    HalfBox { length: f64 },
    Box,
}

/// Grading controls shared by the cylinder and half-box generators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grading {
    /// Geometric growth ratio between neighbouring layers/rings.
    pub ratio: f64,
    /// Elements per side of the patch block; the patch boundary carries `4n` edges.
    pub patch_divisions: usize,
}

impl Default for Grading {
    fn default() -> Self {
        Self { ratio: 1.3, patch_divisions: 8 }
    }
}

impl Grading {
    fn validate(&self) -> Result<()> {
        if !(self.ratio > 1.0 && self.ratio.is_finite()) || self.patch_divisions < 2 {
            return Err(Error::Geometry(format!("degenerate grading {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct VolumeMesh {
    nodes: Vec<[f64; 3]>,
    elems: Vec<[usize; 8]>,
    sets: BTreeMap<NodeSet, Vec<usize>>,
    kind: MeshKind,
    layers: Vec<f64>,
    volume: f64,
    bvh: OnceLock<Bvh<3>>,
}

impl VolumeMesh {
    fn from_parts(
        nodes: Vec<[f64; 3]>,
        elems: Vec<[usize; 8]>,
        sets: BTreeMap<NodeSet, Vec<usize>>,
        kind: MeshKind,
        layers: Vec<f64>,
    ) -> Result<Self> {
        let mut mesh = Self { nodes, elems, sets, kind, layers, volume: 0.0, bvh: OnceLock::new() };
        let mut vol = 0.0;
        for e in 0..mesh.elems.len() {
            let c = mesh.element_coords(e);
            for xi in hex_gauss() {
                let det = hex_eval(&c, xi).det;
                if !(det > 0.0) {
                    return Err(Error::Geometry(format!(
                        "non-positive Jacobian {det:.3e} in element {e}"
                    )));
                }
                vol += det;
            }
        }
        mesh.volume = vol;
        Ok(mesh)
    }

    /// Structured box `[lo, hi]` with `n` elements per direction. No node sets.
    pub fn box_mesh(lo: [f64; 3], hi: [f64; 3], n: [usize; 3]) -> Result<Self> {
        if n.iter().any(|&k| k == 0) || (0..3).any(|k| !(hi[k] > lo[k])) {
            return Err(Error::Geometry("degenerate box".into()));
        }
        let mut nodes = Vec::new();
        for k in 0..=n[2] {
            for j in 0..=n[1] {
                for i in 0..=n[0] {
                    let t = [i as f64 / n[0] as f64, j as f64 / n[1] as f64, k as f64 / n[2] as f64];
                    nodes.push([
                        lo[0] + t[0] * (hi[0] - lo[0]),
                        lo[1] + t[1] * (hi[1] - lo[1]),
                        lo[2] + t[2] * (hi[2] - lo[2]),
                    ]);
                }
            }
        }
        let id = |i: usize, j: usize, k: usize| (k * (n[1] + 1) + j) * (n[0] + 1) + i;
        let mut elems = Vec::new();
        for k in 0..n[2] {
            for j in 0..n[1] {
                for i in 0..n[0] {
                    elems.push([
                        id(i, j, k),
                        id(i + 1, j, k),
                        id(i + 1, j + 1, k),
                        id(i, j + 1, k),
                        id(i, j, k + 1),
                        id(i + 1, j, k + 1),
                        id(i + 1, j + 1, k + 1),
                        id(i, j + 1, k + 1),
                    ]);
                }
            }
        }
        Self::from_parts(nodes, elems, BTreeMap::new(), MeshKind::Box, Vec::new())
    }

    /// Extrudes `section` (coordinates become x2, x3) through the axial `layers`.
    fn extrude(section: &SectionMesh, layers: &[f64], kind: MeshKind) -> (Vec<[f64; 3]>, Vec<[usize; 8]>) {
        let ns = section.nodes().len();
        let mut nodes = Vec::with_capacity(ns * layers.len());
        for &x1 in layers {
            for p in section.nodes() {
                nodes.push([x1, p[0], p[1]]);
            }
        }
        let _ = kind;
        let mut elems = Vec::with_capacity(section.elements().len() * (layers.len() - 1));
        for k in 0..layers.len() - 1 {
            let (b, t) = (k * ns, (k + 1) * ns);
            for q in section.elements() {
                elems.push([
                    b + q[0],
                    b + q[1],
                    b + q[2],
                    b + q[3],
                    t + q[0],
                    t + q[1],
                    t + q[2],
                    t + q[3],
                ]);
            }
        }
        (nodes, elems)
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 8]] {
        &self.elems
    }

    pub fn kind(&self) -> MeshKind {
        self.kind
    }

    /// Axial node coordinates of extruded meshes.
    pub fn layers(&self) -> &[f64] {
        &self.layers
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn node_set(&self, set: NodeSet) -> &[usize] {
        self.sets.get(&set).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn element_coords(&self, e: usize) -> [[f64; 3]; 8] {
        let el = &self.elems[e];
        std::array::from_fn(|a| self.nodes[el[a]])
    }

    pub fn min_jacobian(&self) -> f64 {
        (0..self.elems.len())
            .flat_map(|e| {
                let c = self.element_coords(e);
                hex_gauss().into_iter().map(move |xi| hex_eval(&c, xi).det)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Nodes lying on the outer boundary (faces used by exactly one element).
    pub fn boundary_nodes(&self) -> Vec<usize> {
        const FACES: [[usize; 4]; 6] =
            [[0, 3, 2, 1], [4, 5, 6, 7], [0, 1, 5, 4], [1, 2, 6, 5], [2, 3, 7, 6], [3, 0, 4, 7]];
        let mut count: std::collections::HashMap<[usize; 4], usize> = Default::default();
        for el in &self.elems {
            for f in FACES {
                let mut key = [el[f[0]], el[f[1]], el[f[2]], el[f[3]]];
                key.sort_unstable();
                *count.entry(key).or_default() += 1;
            }
        }
        let mut out: Vec<usize> =
            count.into_iter().filter(|(_, c)| *c == 1).flat_map(|(k, _)| k).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn bvh(&self) -> &Bvh<3> {
        self.bvh.get_or_init(|| {
            Bvh::build((0..self.elems.len()).map(|e| self.element_coords(e).to_vec()))
        })
    }

    /// `point_locate`: element and local coordinates in `[-1,1]^3`.
    pub fn locate(&self, p: [f64; 3]) -> Result<(usize, [f64; 3])> {
        for e in self.bvh().candidates(&p) {
            let c = self.element_coords(e);
            let (xi, res) = hex_invert(&c, p);
            let d = (0..3)
                .map(|k| (c[0][k] - c[6][k]).powi(2))
                .sum::<f64>()
                .sqrt();
            if res <= 1e-10 * d.max(1e-300) && xi.iter().all(|v| v.abs() <= 1.0 + 1e-9) {
                return Ok((e, xi.map(|v| v.clamp(-1.0, 1.0))));
            }
        }
        Err(Error::Locate(p.to_vec()))
    }

    /// Plain-text listing: a header line, then one line per node and per element.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "patchbeam-mesh 1 {} {}", self.nodes.len(), self.elems.len())?;
        for p in &self.nodes {
            writeln!(w, "{:.17e} {:.17e} {:.17e}", p[0], p[1], p[2])?;
        }
        for el in &self.elems {
            let s: Vec<String> = el.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", s.join(" "))?;
        }
        Ok(())
    }
}

/// Patch element size for a shape meshed with `n` divisions per block side.
fn patch_step(patch: &Shape2, n: usize) -> f64 {
    let (a, b) = patch.half_extents();
    2.0 * a.min(b) / n as f64
}

/// `build_cylinder_mesh`: hex mesh of `(0,1) x eps S` clamped on `{0} x eps r S0` and `{1} x eps S`.
///
/// `axial_n` sets the uniform axial spacing `1/axial_n`; layers near `x1 = 0` start at
/// the patch element size and grow geometrically up to it.
pub fn build_cylinder_mesh(
    spec: &SectionSpec,
    eps: f64,
    r_eps: f64,
    axial_n: usize,
    grading: &Grading,
) -> Result<VolumeMesh> {
    spec.validate()?;
    grading.validate()?;
    if !(eps > 0.0) || !(r_eps > 0.0) {
        return Err(Error::Geometry(format!("eps and r_eps must be positive ({eps}, {r_eps})")));
    }
    if axial_n < 4 {
        return Err(Error::Geometry(format!("axial_n must be at least 4, got {axial_n}")));
    }
    if !spec.section.contains_scaled(&spec.patch, r_eps) {
        return Err(Error::Geometry(format!(
            "patch scaled by r_eps = {r_eps} does not fit inside the section"
        )));
    }
    let n = grading.patch_divisions;
    let section = graded_section_mesh(&spec.patch, r_eps, &spec.section, 1.0, n, grading.ratio)?
        .scaled(eps)?;
    let first = eps * r_eps * patch_step(&spec.patch, n);
    let layers = graded_layers(first, grading.ratio, 1.0 / axial_n as f64, 1.0);
    let (nodes, elems) = VolumeMesh::extrude(&section, &layers, MeshKind::Cylinder { eps, r_eps });
    let ns = section.nodes().len();
    let last = (layers.len() - 1) * ns;
    let mut sets = BTreeMap::new();
    sets.insert(NodeSet::Gamma0, section.inner_nodes().to_vec());
    sets.insert(NodeSet::Gamma1, (last..last + ns).collect());
    let mesh = VolumeMesh::from_parts(nodes, elems, sets, MeshKind::Cylinder { eps, r_eps }, layers)?;
    let scale = eps * r_eps;
    for &k in mesh.node_set(NodeSet::Gamma0) {
        let p = mesh.nodes[k];
        debug_assert!(p[0] == 0.0 && spec.patch.contains([p[1] / scale, p[2] / scale], 1e-12));
    }
    Ok(mesh)
}

/// `build_halfbox_mesh`: hex mesh of `(0,L) x (-L,L)^2` graded away from the patch `{0} x S0`.
pub fn build_halfbox_mesh(patch: &Shape2, length: f64, grading: &Grading) -> Result<VolumeMesh> {
    patch.validate()?;
    grading.validate()?;
    if !(length >= 4.0 * patch.diameter()) {
        return Err(Error::Geometry(format!(
            "truncation length {length} is below 4 diam(S0) = {}",
            4.0 * patch.diameter()
        )));
    }
    let n = grading.patch_divisions;
    let square = Shape2::Rect { width: 2.0, height: 2.0 };
    let section = graded_section_mesh(patch, 1.0, &square, length, n, grading.ratio)?;
    let first = patch_step(patch, n);
    let layers = graded_layers(first, grading.ratio, f64::INFINITY, length);
    let (nodes, elems) = VolumeMesh::extrude(&section, &layers, MeshKind::HalfBox { length });
    let ns = section.nodes().len();
    let nl = layers.len();
    let mut sets = BTreeMap::new();
    sets.insert(NodeSet::Patch, section.inner_nodes().to_vec());
    let mut far: Vec<usize> = ((nl - 1) * ns..nl * ns).collect();
    for k in 0..nl - 1 {
        far.extend(section.outer_nodes().iter().map(|&i| k * ns + i));
    }
    far.sort_unstable();
    far.dedup();
    sets.insert(NodeSet::Farfield, far);
    VolumeMesh::from_parts(nodes, elems, sets, MeshKind::HalfBox { length }, layers)
}

/// Node positions on `[0, total]`: sizes start at `first`, grow by `ratio` until they reach
/// `cap`, then stay uniform. The sequence is rescaled to end exactly at `total`.
fn graded_layers(first: f64, ratio: f64, cap: f64, total: f64) -> Vec<f64> {
    let mut sizes = Vec::new();
    let mut x = 0.0;
    let mut h = first.min(total);
    while x + h < total && h < cap {
        sizes.push(h);
        x += h;
        h *= ratio;
    }
    if cap.is_finite() && x < total {
        let rest = total - x;
        let k = (rest / cap - 1e-9).ceil().max(1.0) as usize;
        sizes.extend(std::iter::repeat(rest / k as f64).take(k));
    } else if x < total {
        // close the geometric sequence with one last layer, merging a sliver into its neighbour
        let rest = total - x;
        if rest < 0.5 * sizes.last().copied().unwrap_or(rest) {
            if let Some(l) = sizes.last_mut() {
                *l += rest;
            }
        } else {
            sizes.push(rest);
        }
    }
    let mut out = Vec::with_capacity(sizes.len() + 1);
    let mut x = 0.0;
    out.push(0.0);
    for s in &sizes {
        x += s;
        out.push(x);
    }
    *out.last_mut().unwrap() = total;
    out
}
