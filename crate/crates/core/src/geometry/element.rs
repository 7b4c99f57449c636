//! Bilinear quadrilateral and trilinear hexahedron reference elements.

use nalgebra::{Matrix2, Matrix3};

pub const GAUSS2: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];

/// Local corner signs of the quadrilateral, counter-clockwise.
pub const QUAD_CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// Local corner signs of the hexahedron: bottom face counter-clockwise, then top face.
pub const HEX_CORNERS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

pub fn quad_shape(xi: [f64; 2]) -> [f64; 4] {
    let mut n = [0.0; 4];
    for (a, c) in QUAD_CORNERS.iter().enumerate() {
        n[a] = 0.25 * (1.0 + c[0] * xi[0]) * (1.0 + c[1] * xi[1]);
    }
    n
}

pub fn quad_grad(xi: [f64; 2]) -> [[f64; 2]; 4] {
    let mut g = [[0.0; 2]; 4];
    for (a, c) in QUAD_CORNERS.iter().enumerate() {
        g[a][0] = 0.25 * c[0] * (1.0 + c[1] * xi[1]);
        g[a][1] = 0.25 * c[1] * (1.0 + c[0] * xi[0]);
    }
    g
}

pub fn hex_shape(xi: [f64; 3]) -> [f64; 8] {
    let mut n = [0.0; 8];
    for (a, c) in HEX_CORNERS.iter().enumerate() {
        n[a] = 0.125 * (1.0 + c[0] * xi[0]) * (1.0 + c[1] * xi[1]) * (1.0 + c[2] * xi[2]);
    }
    n
}

pub fn hex_grad(xi: [f64; 3]) -> [[f64; 3]; 8] {
    let mut g = [[0.0; 3]; 8];
    for (a, c) in HEX_CORNERS.iter().enumerate() {
        let (fx, fy, fz) = (1.0 + c[0] * xi[0], 1.0 + c[1] * xi[1], 1.0 + c[2] * xi[2]);
        g[a][0] = 0.125 * c[0] * fy * fz;
        g[a][1] = 0.125 * c[1] * fx * fz;
        g[a][2] = 0.125 * c[2] * fx * fy;
    }
    g
}

/// 2x2 Gauss points with unit weights.
pub fn quad_gauss() -> [[f64; 2]; 4] {
    let g = GAUSS2;
    [[g[0], g[0]], [g[1], g[0]], [g[1], g[1]], [g[0], g[1]]]
}

/// 2x2x2 Gauss points with unit weights.
pub fn hex_gauss() -> [[f64; 3]; 8] {
    let mut out = [[0.0; 3]; 8];
    let mut k = 0;
    for &z in &GAUSS2 {
        for &y in &GAUSS2 {
            for &x in &GAUSS2 {
                out[k] = [x, y, z];
                k += 1;
            }
        }
    }
    out
}

/// Geometry of a quadrilateral at a local point: physical point, Jacobian determinant
/// and physical shape-function gradients.
pub struct QuadEval {
    pub x: [f64; 2],
    pub det: f64,
    pub n: [f64; 4],
    pub dn: [[f64; 2]; 4],
}

pub fn quad_eval(coords: &[[f64; 2]; 4], xi: [f64; 2]) -> QuadEval {
    let n = quad_shape(xi);
    let g = quad_grad(xi);
    let mut j = Matrix2::<f64>::zeros();
    let mut x = [0.0; 2];
    for a in 0..4 {
        for r in 0..2 {
            x[r] += n[a] * coords[a][r];
            for c in 0..2 {
                j[(r, c)] += coords[a][r] * g[a][c];
            }
        }
    }
    let det = j.determinant();
    let inv = j.try_inverse().unwrap_or_else(Matrix2::zeros);
    let mut dn = [[0.0; 2]; 4];
    for a in 0..4 {
        for c in 0..2 {
            dn[a][c] = g[a][0] * inv[(0, c)] + g[a][1] * inv[(1, c)];
        }
    }
    QuadEval { x, det, n, dn }
}

pub struct HexEval {
    pub x: [f64; 3],
    pub det: f64,
    pub n: [f64; 8],
    pub dn: [[f64; 3]; 8],
}

pub fn hex_eval(coords: &[[f64; 3]; 8], xi: [f64; 3]) -> HexEval {
    let n = hex_shape(xi);
    let g = hex_grad(xi);
    let mut j = Matrix3::<f64>::zeros();
    let mut x = [0.0; 3];
    for a in 0..8 {
        for r in 0..3 {
            x[r] += n[a] * coords[a][r];
            for c in 0..3 {
                j[(r, c)] += coords[a][r] * g[a][c];
            }
        }
    }
    let det = j.determinant();
    let inv = j.try_inverse().unwrap_or_else(Matrix3::zeros);
    let mut dn = [[0.0; 3]; 8];
    for a in 0..8 {
        for c in 0..3 {
            dn[a][c] = g[a][0] * inv[(0, c)] + g[a][1] * inv[(1, c)] + g[a][2] * inv[(2, c)];
        }
    }
    HexEval { x, det, n, dn }
}

/// Newton inversion of the bilinear map. Returns local coordinates and the final
/// forward-map residual.
pub fn quad_invert(coords: &[[f64; 2]; 4], p: [f64; 2]) -> ([f64; 2], f64) {
    let mut xi = [0.0; 2];
    for _ in 0..50 {
        let n = quad_shape(xi);
        let g = quad_grad(xi);
        let mut j = Matrix2::<f64>::zeros();
        let mut r = nalgebra::Vector2::zeros();
        for a in 0..4 {
            for rr in 0..2 {
                r[rr] += n[a] * coords[a][rr];
                for c in 0..2 {
                    j[(rr, c)] += coords[a][rr] * g[a][c];
                }
            }
        }
        r[0] -= p[0];
        r[1] -= p[1];
        let Some(inv) = j.try_inverse() else { break };
        let d = inv * r;
        xi[0] -= d[0];
        xi[1] -= d[1];
        if d.amax() < 1e-15 {
            break;
        }
    }
    let e = quad_eval(coords, xi);
    (xi, (e.x[0] - p[0]).hypot(e.x[1] - p[1]))
}

pub fn hex_invert(coords: &[[f64; 3]; 8], p: [f64; 3]) -> ([f64; 3], f64) {
    let mut xi = [0.0; 3];
    for _ in 0..50 {
        let n = hex_shape(xi);
        let g = hex_grad(xi);
        let mut j = Matrix3::<f64>::zeros();
        let mut r = nalgebra::Vector3::zeros();
        for a in 0..8 {
            for rr in 0..3 {
                r[rr] += n[a] * coords[a][rr];
                for c in 0..3 {
                    j[(rr, c)] += coords[a][rr] * g[a][c];
                }
            }
        }
        for rr in 0..3 {
            r[rr] -= p[rr];
        }
        let Some(inv) = j.try_inverse() else { break };
        let d = inv * r;
        for c in 0..3 {
            xi[c] -= d[c];
        }
        if d.amax() < 1e-15 {
            break;
        }
    }
    let e = hex_eval(coords, xi);
    let res = ((e.x[0] - p[0]).powi(2) + (e.x[1] - p[1]).powi(2) + (e.x[2] - p[2]).powi(2)).sqrt();
    (xi, res)
}
