//! Quadrilateral meshes of planar cross-sections.
//!
//! Discs and graded patch neighbourhoods use an O-grid: a mapped square block in the
//! middle surrounded by rings of quadrilaterals, `4n` per ring.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::geometry::element::{quad_eval, quad_gauss, quad_invert};
use crate::geometry::locate::Bvh;
use crate::geometry::Shape2;

#[derive(Debug)]
pub struct SectionMesh {
    nodes: Vec<[f64; 2]>,
    elems: Vec<[usize; 4]>,
    area: f64,
    inner_nodes: Vec<usize>,
    outer_nodes: Vec<usize>,
    bvh: OnceLock<Bvh<2>>,
}

/// Local quadrature point of a planar mesh: element, local coordinates, weight
/// (Jacobian times Gauss weight) and physical position.
#[derive(Clone, Copy, Debug)]
pub struct QuadPoint2 {
    pub elem: usize,
    pub xi: [f64; 2],
    pub weight: f64,
    pub x: [f64; 2],
}

impl SectionMesh {
    fn from_parts(
        nodes: Vec<[f64; 2]>,
        elems: Vec<[usize; 4]>,
        inner_nodes: Vec<usize>,
        outer_nodes: Vec<usize>,
    ) -> Result<Self> {
        let mut mesh = Self { nodes, elems, area: 0.0, inner_nodes, outer_nodes, bvh: OnceLock::new() };
        let mut area = 0.0;
        for e in 0..mesh.elems.len() {
            let c = mesh.element_coords(e);
            for xi in quad_gauss() {
                let det = quad_eval(&c, xi).det;
                if !(det > 0.0) {
                    return Err(Error::Geometry(format!(
                        "non-positive Jacobian {det:.3e} in section element {e}"
                    )));
                }
                area += det;
            }
        }
        mesh.area = area;
        Ok(mesh)
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 4]] {
        &self.elems
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    /// Nodes of the central block (the patch, for graded meshes).
    pub fn inner_nodes(&self) -> &[usize] {
        &self.inner_nodes
    }

    /// Nodes on the outer boundary.
    pub fn outer_nodes(&self) -> &[usize] {
        &self.outer_nodes
    }

    pub fn element_coords(&self, e: usize) -> [[f64; 2]; 4] {
        let el = &self.elems[e];
        [self.nodes[el[0]], self.nodes[el[1]], self.nodes[el[2]], self.nodes[el[3]]]
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        let nodes = self.nodes.iter().map(|p| [s * p[0], s * p[1]]).collect();
        Self::from_parts(nodes, self.elems.clone(), self.inner_nodes.clone(), self.outer_nodes.clone())
    }

    pub fn quadrature(&self) -> impl Iterator<Item = QuadPoint2> + '_ {
        (0..self.elems.len()).flat_map(move |e| {
            let c = self.element_coords(e);
            quad_gauss().into_iter().map(move |xi| {
                let ev = quad_eval(&c, xi);
                QuadPoint2 { elem: e, xi, weight: ev.det, x: ev.x }
            })
        })
    }

    pub fn min_jacobian(&self) -> f64 {
        self.quadrature().map(|q| q.weight).fold(f64::INFINITY, f64::min)
    }

    fn bvh(&self) -> &Bvh<2> {
        self.bvh.get_or_init(|| {
            Bvh::build((0..self.elems.len()).map(|e| self.element_coords(e).to_vec()))
        })
    }

    /// `point_locate`: element and local coordinates in `[-1,1]^2`.
    pub fn locate(&self, p: [f64; 2]) -> Result<(usize, [f64; 2])> {
        for e in self.bvh().candidates(&p) {
            let c = self.element_coords(e);
            let (xi, res) = quad_invert(&c, p);
            let scale = element_size2(&c);
            if res <= 1e-10 * scale.max(1e-300) && xi.iter().all(|v| v.abs() <= 1.0 + 1e-9) {
                return Ok((e, [xi[0].clamp(-1.0, 1.0), xi[1].clamp(-1.0, 1.0)]));
            }
        }
        Err(Error::Locate(p.to_vec()))
    }

    /// Like [`locate`](Self::locate) but falls back to the nearest element with local
    /// coordinates clamped to the reference square. Used for points of a curved domain
    /// that fall just outside the polygonal mesh boundary.
    pub fn locate_clamped(&self, p: [f64; 2]) -> (usize, [f64; 2]) {
        if let Ok(hit) = self.locate(p) {
            return hit;
        }
        let e = self.bvh().nearest(&p).unwrap_or(0);
        let (xi, _) = quad_invert(&self.element_coords(e), p);
        (e, [xi[0].clamp(-1.0, 1.0), xi[1].clamp(-1.0, 1.0)])
    }
}

fn element_size2(c: &[[f64; 2]; 4]) -> f64 {
    (c[0][0] - c[2][0]).hypot(c[0][1] - c[2][1]).max((c[1][0] - c[3][0]).hypot(c[1][1] - c[3][1]))
}

/// Unit-square boundary point for perimeter index `k` of a `n x n` block, counter-clockwise
/// starting at the corner (1, -1).
fn perimeter(n: usize, k: usize) -> (usize, usize) {
    let k = k % (4 * n);
    match k / n {
        0 => (n, k),
        1 => (n - (k - n), n),
        2 => (0, n - (k - 2 * n)),
        _ => (k - 3 * n, 0),
    }
}

fn block_point(n: usize, i: usize, j: usize) -> [f64; 2] {
    [-1.0 + 2.0 * i as f64 / n as f64, -1.0 + 2.0 * j as f64 / n as f64]
}

/// O-grid assembly: `inner` maps the reference block `[-1,1]^2` and `ring(tau, u)` maps a
/// ring level `tau in (0,1]` and a unit-square boundary direction `u`. `ring(0, u)` must
/// agree with `inner(u)`.
fn ogrid(
    n: usize,
    levels: &[f64],
    inner: impl Fn([f64; 2]) -> [f64; 2],
    ring: impl Fn(f64, [f64; 2]) -> [f64; 2],
) -> Result<SectionMesh> {
    let side = n + 1;
    let mut nodes = Vec::with_capacity(side * side + 4 * n * levels.len());
    for j in 0..side {
        for i in 0..side {
            nodes.push(inner(block_point(n, i, j)));
        }
    }
    let mut elems = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let id = |i: usize, j: usize| j * side + i;
            elems.push([id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let inner_nodes: Vec<usize> = (0..side * side).collect();
    let m = 4 * n;
    let mut prev: Vec<usize> = (0..m)
        .map(|k| {
            let (i, j) = perimeter(n, k);
            j * side + i
        })
        .collect();
    for &tau in levels {
        let base = nodes.len();
        for k in 0..m {
            let (i, j) = perimeter(n, k);
            nodes.push(ring(tau, block_point(n, i, j)));
        }
        let cur: Vec<usize> = (0..m).map(|k| base + k).collect();
        for k in 0..m {
            let k1 = (k + 1) % m;
            elems.push([prev[k], cur[k], cur[k1], prev[k1]]);
        }
        prev = cur;
    }
    SectionMesh::from_parts(nodes, elems, inner_nodes, prev)
}

/// `build_section_mesh`: conforming quadrilateral mesh of `S` with target size `h`.
pub fn build_section_mesh(shape: &Shape2, h: f64) -> Result<SectionMesh> {
    shape.validate()?;
    if !(h > 0.0) {
        return Err(Error::Geometry(format!("element size must be positive, got {h}")));
    }
    match *shape {
        Shape2::Rect { width, height } => {
            let nx = (width / h - 1e-9).ceil().max(1.0) as usize;
            let ny = (height / h - 1e-9).ceil().max(1.0) as usize;
            let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
            for j in 0..=ny {
                for i in 0..=nx {
                    nodes.push([
                        -0.5 * width + width * i as f64 / nx as f64,
                        -0.5 * height + height * j as f64 / ny as f64,
                    ]);
                }
            }
            let id = |i: usize, j: usize| j * (nx + 1) + i;
            let mut elems = Vec::with_capacity(nx * ny);
            for j in 0..ny {
                for i in 0..nx {
                    elems.push([id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
                }
            }
            let outer = (0..nodes.len())
                .filter(|&k| {
                    let (i, j) = (k % (nx + 1), k / (nx + 1));
                    i == 0 || j == 0 || i == nx || j == ny
                })
                .collect();
            SectionMesh::from_parts(nodes, elems, Vec::new(), outer)
        }
        Shape2::Disc { radius } => {
            let n = ((std::f64::consts::FRAC_PI_2 * radius / h).ceil() as usize).max(2);
            let c = 0.5 * radius;
            let m = ((0.5 * radius / h).ceil() as usize).max(1);
            let levels: Vec<f64> = (1..=m).map(|l| l as f64 / m as f64).collect();
            let mut mesh = ogrid(
                n,
                &levels,
                |q| [c * q[0], c * q[1]],
                |tau, u| {
                    let b = shape.boundary_point(u);
                    [(1.0 - tau) * c * u[0] + tau * b[0], (1.0 - tau) * c * u[1] + tau * b[1]]
                },
            )?;
            mesh.inner_nodes.clear();
            Ok(mesh)
        }
    }
}

/// Mesh of `s1 * outer` refined geometrically towards the central patch `s0 * patch`.
///
/// The patch is an `n x n` block, so its boundary carries `4n` element edges; ring sizes
/// grow by at most `ratio` from one ring to the next.
pub fn graded_section_mesh(
    patch: &Shape2,
    s0: f64,
    outer: &Shape2,
    s1: f64,
    n: usize,
    ratio: f64,
) -> Result<SectionMesh> {
    patch.validate()?;
    outer.validate()?;
    if n < 2 || !(ratio > 1.0) || !(s0 > 0.0) || !(s1 > 0.0) {
        return Err(Error::Geometry(format!(
            "degenerate grading: n={n}, ratio={ratio}, scales {s0}, {s1}"
        )));
    }
    if !outer.contains_scaled(patch, s0 / s1) {
        return Err(Error::Geometry("patch does not fit inside the section".into()));
    }
    let size = |s: &Shape2| {
        let (a, b) = s.half_extents();
        a.max(b)
    };
    let (p0, p1) = (size(patch), size(outer));
    let (t0, t1) = (s0 * p0, s1 * p1);
    let span = t1 / t0;
    let m = if span <= 1.0 + 1e-12 { 0 } else { ((span.ln() / ratio.ln()).ceil() as usize).max(1) };
    let levels: Vec<f64> = (1..=m).map(|l| l as f64 / m as f64).collect();
    let c = match *patch {
        Shape2::Disc { radius } => [radius * std::f64::consts::FRAC_1_SQRT_2; 2],
        Shape2::Rect { width, height } => [0.5 * width, 0.5 * height],
    };
    ogrid(
        n,
        &levels,
        |q| {
            let s = q[0].abs().max(q[1].abs());
            if s == 0.0 {
                return [0.0, 0.0];
            }
            let u = [q[0] / s, q[1] / s];
            let b = patch.boundary_point(u);
            [
                s0 * ((1.0 - s) * c[0] * q[0] + s * s * b[0]),
                s0 * ((1.0 - s) * c[1] * q[1] + s * s * b[1]),
            ]
        },
        |tau, u| {
            let b0 = patch.boundary_point(u);
            let b1 = outer.boundary_point(u);
            let scale = t0.powf(1.0 - tau) * t1.powf(tau);
            [
                scale * ((1.0 - tau) * b0[0] / p0 + tau * b1[0] / p1),
                scale * ((1.0 - tau) * b0[1] / p0 + tau * b1[1] / p1),
            ]
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn unit_square_h_quarter() {
        let m = build_section_mesh(&Shape2::Rect { width: 1.0, height: 1.0 }, 0.25).unwrap();
        assert_eq!(m.elements().len(), 16);
        assert_relative_eq!(m.area(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn rectangle_two_by_one() {
        let m = build_section_mesh(&Shape2::Rect { width: 2.0, height: 1.0 }, 0.5).unwrap();
        assert_eq!(m.elements().len(), 8);
        assert_relative_eq!(m.area(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn disc_area_within_one_percent() {
        let m = build_section_mesh(&Shape2::Disc { radius: 1.0 }, 0.05).unwrap();
        assert!((m.area() - PI).abs() < 0.01 * PI, "area {}", m.area());
        for &k in m.outer_nodes() {
            let p = m.nodes()[k];
            assert!((p[0].hypot(p[1]) - 1.0).abs() < 0.05 * 0.05);
        }
        let coarse = build_section_mesh(&Shape2::Disc { radius: 1.0 }, 0.2).unwrap();
        assert!((coarse.area() - PI).abs() > (m.area() - PI).abs());
    }

    #[test]
    fn degenerate_specs() {
        assert!(build_section_mesh(&Shape2::Disc { radius: -1.0 }, 0.1).is_err());
        assert!(build_section_mesh(&Shape2::Rect { width: 1.0, height: 0.0 }, 0.1).is_err());
        assert!(build_section_mesh(&Shape2::Disc { radius: 1.0 }, 0.0).is_err());
    }

    #[test]
    fn graded_patch_resolution() {
        let disc = Shape2::Disc { radius: 1.0 };
        let m = graded_section_mesh(&disc, 1e-3, &disc, 1.0, 8, 1.3).unwrap();
        // patch boundary carries 32 edges
        let inner_boundary = m
            .inner_nodes()
            .iter()
            .filter(|&&k| (m.nodes()[k][0].hypot(m.nodes()[k][1]) - 1e-3).abs() < 1e-15)
            .count();
        assert_eq!(inner_boundary, 32);
        for &k in m.inner_nodes() {
            assert!(disc.contains([m.nodes()[k][0] * 1e3, m.nodes()[k][1] * 1e3], 1e-12));
        }
        assert!(m.min_jacobian() > 0.0);
        assert!((m.area() - PI).abs() < 0.01 * PI);
    }

    #[test]
    fn graded_mixed_shapes() {
        let sq = Shape2::Rect { width: 2.0, height: 2.0 };
        let disc = Shape2::Disc { radius: 1.0 };
        let m = graded_section_mesh(&disc, 1.0, &sq, 8.0, 8, 1.3).unwrap();
        assert_relative_eq!(m.area(), 256.0, epsilon = 1e-9);
        let m = graded_section_mesh(&sq, 0.01, &disc, 1.0, 4, 1.3).unwrap();
        assert!(m.min_jacobian() > 0.0);
    }

    #[test]
    fn locate_points() {
        let m = build_section_mesh(&Shape2::Disc { radius: 1.0 }, 0.1).unwrap();
        for p in [[0.0, 0.0], [0.3, -0.4], [0.69, 0.69], [-0.99, 0.0]] {
            let (e, xi) = m.locate(p).unwrap();
            let x = quad_eval(&m.element_coords(e), xi).x;
            assert!((x[0] - p[0]).abs() < 1e-12 && (x[1] - p[1]).abs() < 1e-12);
        }
        assert!(m.locate([1.2, 0.0]).is_err());
        let (_, xi) = m.locate_clamped([1.0000001, 0.0]);
        assert!(xi.iter().all(|v| v.abs() <= 1.0));
    }
}
