//! Anisotropic, heterogeneous elasticity tensors in Voigt form.
//!
//! Symmetric tensors are stored as 6-vectors in the order (11, 22, 33, 23, 13, 12).
//! Strain-like vectors carry engineering shears (2e23, 2e13, 2e12), stress-like
//! vectors carry the plain components, so that `A e : e = eps_v . (V eps_v)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Matrix6, SymmetricEigen, Vector6};

use crate::error::{Error, Result};
use crate::geometry::Shape2;

pub type Point3 = [f64; 3];

/// Closed-form scalar function of the reference coordinates y = (y1, y2, y3).
pub type ScalarFn = Arc<dyn Fn(&Point3) -> f64 + Send + Sync>;

/// Index pairs of the Voigt ordering.
pub const VOIGT_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Engineering-shear strain vector of a symmetric tensor.
pub fn strain_to_voigt(e: &Matrix3<f64>) -> Vector6<f64> {
    Vector6::new(
        e[(0, 0)],
        e[(1, 1)],
        e[(2, 2)],
        2.0 * e[(1, 2)],
        2.0 * e[(0, 2)],
        2.0 * e[(0, 1)],
    )
}

pub fn voigt_to_strain(v: &Vector6<f64>) -> Matrix3<f64> {
    Matrix3::new(
        v[0],
        0.5 * v[5],
        0.5 * v[4],
        0.5 * v[5],
        v[1],
        0.5 * v[3],
        0.5 * v[4],
        0.5 * v[3],
        v[2],
    )
}

pub fn stress_to_voigt(s: &Matrix3<f64>) -> Vector6<f64> {
    Vector6::new(s[(0, 0)], s[(1, 1)], s[(2, 2)], s[(1, 2)], s[(0, 2)], s[(0, 1)])
}

pub fn voigt_to_stress(v: &Vector6<f64>) -> Matrix3<f64> {
    Matrix3::new(v[0], v[5], v[4], v[5], v[1], v[3], v[4], v[3], v[2])
}

/// Symmetric 6x6 representation of a fourth-order tensor with minor and major symmetries.
#[derive(Clone, Copy, PartialEq)]
pub struct VoigtMatrix(Matrix6<f64>);

impl fmt::Debug for VoigtMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VoigtMatrix{:?}", self.0.as_slice())
    }
}

impl VoigtMatrix {
    pub fn new(m: Matrix6<f64>) -> Result<Self> {
        let scale = m.amax().max(f64::MIN_POSITIVE);
        for i in 0..6 {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::Voigt(format!("entry ({i},{j}) differs from ({j},{i})")));
                }
            }
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Voigt("non-finite entry".into()));
        }
        Ok(Self(m))
    }

    /// Builds from the 21 upper-triangular coefficients, row by row.
    pub fn from_upper(c: &[f64]) -> Result<Self> {
        if c.len() != 21 {
            return Err(Error::Voigt(format!("expected 21 coefficients, got {}", c.len())));
        }
        let mut m = Matrix6::zeros();
        let mut k = 0;
        for i in 0..6 {
            for j in i..6 {
                m[(i, j)] = c[k];
                m[(j, i)] = c[k];
                k += 1;
            }
        }
        Self::new(m)
    }

    pub fn from_lame(lambda: f64, mu: f64) -> Self {
        let mut m = Matrix6::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = lambda;
            }
            m[(i, i)] += 2.0 * mu;
            m[(i + 3, i + 3)] = mu;
        }
        Self(m)
    }

    pub fn isotropic(young: f64, poisson: f64) -> Result<Self> {
        if !(young > 0.0) || !(poisson > -1.0 && poisson < 0.5) {
            return Err(Error::Voigt(format!(
                "isotropic parameters out of range: young {young}, poisson {poisson}"
            )));
        }
        let (lambda, mu) = lame(young, poisson);
        Ok(Self::from_lame(lambda, mu))
    }

    /// The tensor with `A xi : xi = |xi|^2`.
    pub fn identity_form() -> Self {
        Self(Matrix6::from_diagonal(&Vector6::new(1.0, 1.0, 1.0, 0.5, 0.5, 0.5)))
    }

    pub fn matrix(&self) -> &Matrix6<f64> {
        &self.0
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0 * s)
    }

    /// Matrix of the quadratic form in Mandel coordinates, where the norm is Euclidean.
    pub fn mandel(&self) -> Matrix6<f64> {
        let t = Vector6::new(1.0, 1.0, 1.0, SQRT2, SQRT2, SQRT2);
        let mut m = self.0;
        for i in 0..6 {
            for j in 0..6 {
                m[(i, j)] *= t[i] * t[j];
            }
        }
        m
    }

    /// Smallest value of `A xi : xi / |xi|^2` over symmetric `xi`.
    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.mandel()).eigenvalues.min()
    }

    /// Stress of a strain tensor.
    pub fn apply(&self, e: &Matrix3<f64>) -> Matrix3<f64> {
        voigt_to_stress(&(self.0 * strain_to_voigt(e)))
    }

    /// `A e : f`.
    pub fn energy(&self, e: &Matrix3<f64>, f: &Matrix3<f64>) -> f64 {
        strain_to_voigt(f).dot(&(self.0 * strain_to_voigt(e)))
    }
}

/// Lamé parameters (lambda, mu) from Young's modulus and Poisson's ratio.
pub fn lame(young: f64, poisson: f64) -> (f64, f64) {
    let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
    let mu = young / (2.0 * (1.0 + poisson));
    (lambda, mu)
}

/// `tensor_apply`: stress `A e` of a symmetric strain.
pub fn tensor_apply(v: &VoigtMatrix, e: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let scale = e.amax().max(f64::MIN_POSITIVE);
    if (e - e.transpose()).amax() > 1e-12 * scale {
        return Err(Error::NonSymmetric("strain passed to tensor_apply".into()));
    }
    Ok(v.apply(e))
}

#[derive(Clone, Debug, PartialEq)]
pub enum MaterialKind {
    Isotropic { young: f64, poisson: f64 },
    Voigt,
}

/// The elasticity tensor `A(y)` on the reference cylinder `(0,1) x S`.
///
/// Heterogeneity is a positive scalar modulation of a constant base tensor.
#[derive(Clone)]
pub struct MaterialField {
    kind: MaterialKind,
    base: VoigtMatrix,
    modulation: Option<ScalarFn>,
    section: Shape2,
}

impl fmt::Debug for MaterialField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MaterialField")
            .field("kind", &self.kind)
            .field("base", &self.base)
            .field("modulated", &self.modulation.is_some())
            .field("section", &self.section)
            .finish()
    }
}

impl MaterialField {
    pub fn isotropic(young: f64, poisson: f64, section: Shape2) -> Result<Self> {
        Ok(Self {
            kind: MaterialKind::Isotropic { young, poisson },
            base: VoigtMatrix::isotropic(young, poisson)?,
            modulation: None,
            section,
        })
    }

    pub fn voigt(base: VoigtMatrix, section: Shape2) -> Self {
        Self { kind: MaterialKind::Voigt, base, modulation: None, section }
    }

    pub fn with_modulation(mut self, m: ScalarFn) -> Self {
        self.modulation = Some(m);
        self
    }

    pub fn kind(&self) -> &MaterialKind {
        &self.kind
    }

    pub fn section(&self) -> &Shape2 {
        &self.section
    }

    pub fn is_homogeneous(&self) -> bool {
        self.modulation.is_none()
    }

    pub fn contains(&self, y: &Point3) -> bool {
        let tol = 1e-9;
        y[0] >= -tol && y[0] <= 1.0 + tol && self.section.contains([y[1], y[2]], tol)
    }

    /// `eval_tensor`: the Voigt matrix of `A(y)`.
    pub fn eval(&self, y: &Point3) -> Result<VoigtMatrix> {
        if !self.contains(y) {
            return Err(Error::Domain(*y));
        }
        Ok(self.eval_unchecked(y))
    }

    pub(crate) fn eval_unchecked(&self, y: &Point3) -> VoigtMatrix {
        match &self.modulation {
            None => self.base,
            Some(m) => self.base.scaled(m(y)),
        }
    }

    /// `A(0)`, the frozen tensor used by the half-space problems.
    pub fn at_origin(&self) -> VoigtMatrix {
        self.eval_unchecked(&[0.0; 3])
    }

    /// `coercivity_estimate`: minimum of the smallest quadratic-form eigenvalue over a
    /// sample grid of `(0,1) x S` with `resolution` intervals per direction.
    pub fn coercivity_estimate(&self, resolution: usize) -> Result<f64> {
        if resolution == 0 {
            return Err(Error::Config("coercivity sample grid must be nonempty".into()));
        }
        let (hw, hh) = self.section.half_extents();
        let n = resolution;
        let mut m_hat = f64::INFINITY;
        let base_min = self.base.min_eigenvalue();
        for i in 0..=n {
            let y1 = i as f64 / n as f64;
            for j in 0..=n {
                for k in 0..=n {
                    let y2 = -hw + 2.0 * hw * j as f64 / n as f64;
                    let y3 = -hh + 2.0 * hh * k as f64 / n as f64;
                    if !self.section.contains([y2, y3], 1e-12) {
                        continue;
                    }
                    let y = [y1, y2, y3];
                    let m = match &self.modulation {
                        None => base_min,
                        Some(s) => {
                            let s = s(&y);
                            if s >= 0.0 {
                                s * base_min
                            } else {
                                self.base.scaled(s).min_eigenvalue()
                            }
                        }
                    };
                    m_hat = m_hat.min(m);
                }
            }
        }
        if !(m_hat > 0.0) {
            return Err(Error::InadmissibleMaterial(m_hat));
        }
        Ok(m_hat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn disc() -> Shape2 {
        Shape2::Disc { radius: 1.0 }
    }

    #[test]
    fn isotropic_lame_entries() {
        let m = MaterialField::isotropic(1.0, 0.3, disc()).unwrap();
        let v = m.eval(&[0.3, 0.1, -0.2]).unwrap();
        assert_relative_eq!(v.matrix()[(0, 0)], 1.346154, epsilon = 1e-6);
        assert_relative_eq!(v.matrix()[(0, 1)], 0.576923, epsilon = 1e-6);
        assert_relative_eq!(v.matrix()[(3, 3)], 0.384615, epsilon = 1e-6);
    }

    #[test]
    fn poisson_zero_is_diagonal() {
        let v = VoigtMatrix::isotropic(1.0, 0.0).unwrap();
        let expect = Matrix6::from_diagonal(&Vector6::new(1.0, 1.0, 1.0, 0.5, 0.5, 0.5));
        assert_eq!(*v.matrix(), expect);
    }

    #[test]
    fn full_voigt_identity_form() {
        let c = [
            1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.5, 0.0,
            0.0, 0.5, 0.0, 0.5,
        ];
        let v = VoigtMatrix::from_upper(&c).unwrap();
        assert_eq!(v, VoigtMatrix::identity_form());
        let m = MaterialField::voigt(v, disc());
        assert_eq!(m.eval(&[0.0, 0.0, 0.0]).unwrap(), v);
        assert_relative_eq!(m.coercivity_estimate(4).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn outside_domain_is_rejected() {
        let m = MaterialField::isotropic(1.0, 0.3, disc()).unwrap();
        assert!(matches!(m.eval(&[0.5, 0.9, 0.9]), Err(Error::Domain(_))));
        assert!(matches!(m.eval(&[1.5, 0.0, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn coercivity_isotropic_is_two_mu() {
        let m = MaterialField::isotropic(1.0, 0.3, disc()).unwrap();
        assert_relative_eq!(m.coercivity_estimate(3).unwrap(), 0.769231, epsilon = 1e-6);
        // near-incompressible: 2 mu stays, bulk mode blows up
        let v = VoigtMatrix::isotropic(1.0, 0.4999).unwrap();
        let eig = SymmetricEigen::new(v.mandel()).eigenvalues;
        let (lambda, mu) = lame(1.0, 0.4999);
        assert_relative_eq!(eig.min(), 2.0 * mu, epsilon = 1e-8);
        assert_relative_eq!(eig.max(), 3.0 * lambda + 2.0 * mu, max_relative = 1e-8);
    }

    #[test]
    fn negative_modulation_is_inadmissible() {
        let m = MaterialField::isotropic(1.0, 0.3, disc())
            .unwrap()
            .with_modulation(Arc::new(|y: &Point3| 1.0 - 2.0 * y[0]));
        assert!(matches!(m.coercivity_estimate(4), Err(Error::InadmissibleMaterial(_))));
    }

    #[test]
    fn apply_identity_and_isotropic() {
        let id = VoigtMatrix::identity_form();
        let e = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(tensor_apply(&id, &e).unwrap(), e);
        let mut s = Matrix3::zeros();
        s[(0, 1)] = 1.0;
        s[(1, 0)] = 1.0;
        let out = tensor_apply(&id, &s).unwrap();
        assert_relative_eq!(out, s, epsilon = 1e-15);
        assert_relative_eq!(id.energy(&s, &s), 2.0, epsilon = 1e-15);

        let (lambda, mu) = lame(1.0, 0.3);
        let iso = VoigtMatrix::from_lame(lambda, mu);
        let out = tensor_apply(&iso, &Matrix3::identity()).unwrap();
        assert_relative_eq!(out, Matrix3::identity() * (3.0 * lambda + 2.0 * mu), epsilon = 1e-14);
    }

    #[test]
    fn non_symmetric_rejected() {
        let mut e = Matrix3::zeros();
        e[(0, 1)] = 1.0;
        assert!(tensor_apply(&VoigtMatrix::identity_form(), &e).is_err());
        let mut m = Matrix6::identity();
        m[(0, 4)] = 0.2;
        assert!(VoigtMatrix::new(m).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn sym() -> impl Strategy<Value = Matrix3<f64>> {
            proptest::array::uniform6(-1.0..1.0f64).prop_map(|v| {
                voigt_to_stress(&Vector6::from_column_slice(&v))
            })
        }

        fn anisotropic() -> impl Strategy<Value = VoigtMatrix> {
            proptest::collection::vec(-0.3..0.3f64, 36).prop_map(|v| {
                let b = Matrix6::from_column_slice(&v);
                let m = b * b.transpose() + Matrix6::identity() * 0.5;
                VoigtMatrix::new(m).unwrap()
            })
        }

        proptest! {
            #[test]
            fn voigt_round_trip(e in sym()) {
                let back = voigt_to_strain(&strain_to_voigt(&e));
                prop_assert!((back - e).amax() <= 1e-15);
                let back = voigt_to_stress(&stress_to_voigt(&e));
                prop_assert!((back - e).amax() == 0.0);
            }

            #[test]
            fn major_symmetry(v in anisotropic(), e in sym(), f in sym()) {
                let a = v.apply(&e).component_mul(&f).sum();
                let b = v.apply(&f).component_mul(&e).sum();
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }

            #[test]
            fn energy_bounded_below(v in anisotropic(), e in sym()) {
                let m = v.min_eigenvalue();
                let ae = v.apply(&e).component_mul(&e).sum();
                prop_assert!(ae >= m * e.norm_squared() - 1e-12);
            }
        }
    }
}
