//! One-dimensional finite elements on a uniform mesh of `(0,1)`.
//!
//! Axial displacement `zeta1` and twist `c` use continuous quadratics; the transverse
//! displacements `zeta2`, `zeta3` use Hermite cubics (value and slope per node), which
//! is the lowest order with square-integrable second derivatives.

/// Three-point Gauss rule on `[-1, 1]`.
pub const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

/// Degree-of-freedom layout `[zeta1 | c | zeta2 | zeta3]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub elements: usize,
}

impl Layout {
    pub fn new(elements: usize) -> Self {
        assert!(elements > 0);
        Self { elements }
    }

    pub fn h(&self) -> f64 {
        1.0 / self.elements as f64
    }

    fn nq(&self) -> usize {
        2 * self.elements + 1
    }

    fn nh(&self) -> usize {
        2 * (self.elements + 1)
    }

    pub fn dim(&self) -> usize {
        2 * self.nq() + 2 * self.nh()
    }

    pub fn zeta1(&self, k: usize) -> usize {
        k
    }

    pub fn twist(&self, k: usize) -> usize {
        self.nq() + k
    }

    /// Hermite dof `2 * node + (0 value | 1 slope)` of `zeta_alpha`, `alpha` in {2, 3}.
    pub fn zeta(&self, alpha: usize, k: usize) -> usize {
        debug_assert!(alpha == 2 || alpha == 3);
        2 * self.nq() + (alpha - 2) * self.nh() + k
    }

    /// Degrees of freedom of the traces `(zeta2, zeta3, zeta1, c, zeta2', zeta3')` at `y1 = 0`.
    pub fn trace_dofs(&self) -> [usize; 6] {
        [self.zeta(2, 0), self.zeta(3, 0), self.zeta1(0), self.twist(0), self.zeta(2, 1), self.zeta(3, 1)]
    }

    /// Degrees of freedom clamped at `y1 = 1`.
    pub fn clamped_end_dofs(&self) -> [usize; 6] {
        let n = self.elements;
        [
            self.zeta1(2 * n),
            self.twist(2 * n),
            self.zeta(2, 2 * n),
            self.zeta(2, 2 * n + 1),
            self.zeta(3, 2 * n),
            self.zeta(3, 2 * n + 1),
        ]
    }

    /// Element containing `y1` and the local coordinate in `[-1, 1]`.
    pub fn locate(&self, y1: f64) -> (usize, f64) {
        let n = self.elements;
        let e = ((y1 * n as f64).floor().max(0.0) as usize).min(n - 1);
        let a = e as f64 * self.h();
        (e, 2.0 * (y1 - a) / self.h() - 1.0)
    }

    /// Quadratic basis of element `e` at `xi`: global indices (within the field), values
    /// and first derivatives in `y1`.
    pub fn quadratic(&self, e: usize, xi: f64) -> ([usize; 3], [f64; 3], [f64; 3]) {
        let j = 2.0 / self.h();
        let n = [0.5 * xi * (xi - 1.0), 1.0 - xi * xi, 0.5 * xi * (xi + 1.0)];
        let d = [(xi - 0.5) * j, -2.0 * xi * j, (xi + 0.5) * j];
        ([2 * e, 2 * e + 1, 2 * e + 2], n, d)
    }

    /// Hermite basis of element `e` at `xi`: field-local indices, values, first and
    /// second derivatives in `y1`.
    pub fn hermite(&self, e: usize, xi: f64) -> ([usize; 4], [f64; 4], [f64; 4], [f64; 4]) {
        let h = self.h();
        let s = 0.5 * (xi + 1.0);
        let (s2, s3) = (s * s, s * s * s);
        let n = [1.0 - 3.0 * s2 + 2.0 * s3, h * (s - 2.0 * s2 + s3), 3.0 * s2 - 2.0 * s3, h * (s3 - s2)];
        let d = [
            (-6.0 * s + 6.0 * s2) / h,
            1.0 - 4.0 * s + 3.0 * s2,
            (6.0 * s - 6.0 * s2) / h,
            3.0 * s2 - 2.0 * s,
        ];
        let dd = [
            (-6.0 + 12.0 * s) / (h * h),
            (-4.0 + 6.0 * s) / h,
            (6.0 - 12.0 * s) / (h * h),
            (6.0 * s - 2.0) / h,
        ];
        ([2 * e, 2 * e + 1, 2 * e + 2, 2 * e + 3], n, d, dd)
    }

    /// Axial quadrature points `(element, xi, y1, weight)`.
    pub fn quadrature(&self) -> Vec<(usize, f64, f64, f64)> {
        let h = self.h();
        let mut out = Vec::with_capacity(3 * self.elements);
        for e in 0..self.elements {
            for &(xi, w) in &GAUSS3 {
                out.push((e, xi, (e as f64 + 0.5 * (xi + 1.0)) * h, 0.5 * h * w));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_reproduces_cubics() {
        let l = Layout::new(3);
        let f = |y: f64| 2.0 - y + 3.0 * y * y - y * y * y;
        let df = |y: f64| -1.0 + 6.0 * y - 3.0 * y * y;
        let ddf = |y: f64| 6.0 - 6.0 * y;
        for e in 0..3 {
            for xi in [-1.0, -0.3, 0.4, 1.0] {
                let (idx, n, d, dd) = l.hermite(e, xi);
                let y = (e as f64 + 0.5 * (xi + 1.0)) / 3.0;
                let nodal = |k: usize| {
                    let node = k / 2;
                    let yn = node as f64 / 3.0;
                    if k % 2 == 0 { f(yn) } else { df(yn) }
                };
                let v: f64 = (0..4).map(|a| n[a] * nodal(idx[a])).sum();
                let dv: f64 = (0..4).map(|a| d[a] * nodal(idx[a])).sum();
                let ddv: f64 = (0..4).map(|a| dd[a] * nodal(idx[a])).sum();
                assert!((v - f(y)).abs() < 1e-12);
                assert!((dv - df(y)).abs() < 1e-11);
                assert!((ddv - ddf(y)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn quadratic_reproduces_quadratics() {
        let l = Layout::new(4);
        let f = |y: f64| 1.0 + 2.0 * y - 5.0 * y * y;
        for e in 0..4 {
            for xi in [-1.0, 0.2, 1.0] {
                let (idx, n, d) = l.quadratic(e, xi);
                let y = (e as f64 + 0.5 * (xi + 1.0)) / 4.0;
                let v: f64 = (0..3).map(|a| n[a] * f(idx[a] as f64 / 8.0)).sum();
                let dv: f64 = (0..3).map(|a| d[a] * f(idx[a] as f64 / 8.0)).sum();
                assert!((v - f(y)).abs() < 1e-12);
                assert!((dv - (2.0 - 10.0 * y)).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn quadrature_integrates_quintics() {
        let l = Layout::new(5);
        let s: f64 = l.quadrature().iter().map(|&(_, _, y, w)| w * y.powi(5)).sum();
        assert!((s - 1.0 / 6.0).abs() < 1e-13);
    }
}
