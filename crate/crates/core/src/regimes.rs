//! Classification of the patch size `r = kappa * eps^p` and the regime-dependent
//! boundary structure at `y1 = 0`.

use std::fmt;

use nalgebra::Matrix3;
use num_rational::Rational64;

use crate::capacity::CapacitarySet;
use crate::error::{Error, Result};
use crate::material::Point3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RegimeTag {
    SubCubic,
    Critical3,
    CubicToLinear,
    Critical1,
    LinearToCubeRoot,
    CriticalThird,
    SuperCubeRoot,
}

impl RegimeTag {
    pub const ALL: [RegimeTag; 7] = [
        RegimeTag::SubCubic,
        RegimeTag::Critical3,
        RegimeTag::CubicToLinear,
        RegimeTag::Critical1,
        RegimeTag::LinearToCubeRoot,
        RegimeTag::CriticalThird,
        RegimeTag::SuperCubeRoot,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RegimeTag::SubCubic => "sub-cubic",
            RegimeTag::Critical3 => "critical-cubic",
            RegimeTag::CubicToLinear => "cubic-to-linear",
            RegimeTag::Critical1 => "critical-linear",
            RegimeTag::LinearToCubeRoot => "linear-to-cube-root",
            RegimeTag::CriticalThird => "critical-cube-root",
            RegimeTag::SuperCubeRoot => "super-cube-root",
        }
    }

    pub fn is_critical(&self) -> bool {
        matches!(self, RegimeTag::Critical3 | RegimeTag::Critical1 | RegimeTag::CriticalThird)
    }
}

impl fmt::Display for RegimeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Slots of the trace vector `t = (z2(0), z3(0), z1(0), c(0), z2'(0), z3'(0))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TraceSlot {
    Zeta2,
    Zeta3,
    Zeta1,
    Twist,
    Slope2,
    Slope3,
}

impl TraceSlot {
    pub const ALL: [TraceSlot; 6] = [
        TraceSlot::Zeta2,
        TraceSlot::Zeta3,
        TraceSlot::Zeta1,
        TraceSlot::Twist,
        TraceSlot::Slope2,
        TraceSlot::Slope3,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        ["zeta2(0)", "zeta3(0)", "zeta1(0)", "c(0)", "zeta2'(0)", "zeta3'(0)"][self.index()]
    }
}

/// Trace slots forced to zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConstraintSet([bool; 6]);

impl ConstraintSet {
    pub fn from_slots(slots: &[TraceSlot]) -> Self {
        let mut s = [false; 6];
        for t in slots {
            s[t.index()] = true;
        }
        Self(s)
    }

    pub fn contains(&self, t: TraceSlot) -> bool {
        self.0[t.index()]
    }

    pub fn slots(&self) -> Vec<TraceSlot> {
        TraceSlot::ALL.into_iter().filter(|t| self.contains(*t)).collect()
    }

    pub fn is_subset(&self, other: &ConstraintSet) -> bool {
        (0..6).all(|k| !self.0[k] || other.0[k])
    }

    pub fn is_empty(&self) -> bool {
        !self.0.iter().any(|&b| b)
    }

    pub fn len(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegimeSpec {
    pub tag: RegimeTag,
    /// Only set for the critical tags.
    pub rho: Option<f64>,
    pub kappa: f64,
    pub p: Rational64,
}

impl RegimeSpec {
    /// `r^eps = kappa * eps^p`.
    pub fn r_eps(&self, eps: f64) -> f64 {
        self.kappa * eps.powf(p_f64(self.p))
    }

    pub fn rho_or_zero(&self) -> f64 {
        self.rho.unwrap_or(0.0)
    }

    pub fn is_critical(&self) -> bool {
        self.tag.is_critical()
    }
}

pub fn p_f64(p: Rational64) -> f64 {
    *p.numer() as f64 / *p.denom() as f64
}

/// `classify`: exact rational comparison of `p` with 3, 1 and 1/3.
pub fn classify(kappa: f64, p: Rational64) -> Result<RegimeSpec> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::Regime(format!("kappa must be positive, got {kappa}")));
    }
    if p < Rational64::from_integer(0) {
        return Err(Error::Regime(format!("exponent must be nonnegative, got {p}")));
    }
    let three = Rational64::from_integer(3);
    let one = Rational64::from_integer(1);
    let third = Rational64::new(1, 3);
    let (tag, rho) = if p > three {
        (RegimeTag::SubCubic, None)
    } else if p == three {
        (RegimeTag::Critical3, Some(kappa))
    } else if p > one {
        (RegimeTag::CubicToLinear, None)
    } else if p == one {
        (RegimeTag::Critical1, Some(kappa))
    } else if p > third {
        (RegimeTag::LinearToCubeRoot, None)
    } else if p == third {
        (RegimeTag::CriticalThird, Some(kappa.powi(3)))
    } else {
        (RegimeTag::SuperCubeRoot, None)
    };
    Ok(RegimeSpec { tag, rho, kappa, p })
}

/// `constraint_set`.
pub fn constraint_set(r: &RegimeSpec) -> ConstraintSet {
    constraint_set_for(r.tag)
}

pub fn constraint_set_for(tag: RegimeTag) -> ConstraintSet {
    use TraceSlot::*;
    match tag {
        RegimeTag::SubCubic | RegimeTag::Critical3 => ConstraintSet::default(),
        RegimeTag::CubicToLinear | RegimeTag::Critical1 => ConstraintSet::from_slots(&[Zeta2, Zeta3]),
        RegimeTag::LinearToCubeRoot | RegimeTag::CriticalThird => {
            ConstraintSet::from_slots(&[Zeta2, Zeta3, Zeta1])
        }
        RegimeTag::SuperCubeRoot => ConstraintSet::from_slots(&TraceSlot::ALL),
    }
}

/// Prefactor and generator weights of the corrector: `P = pre * sum_k w_k e(g_k)`, with
/// generators indexed in the capacitary ordering (phi1, phi2, phi3, psi1, psi2, psi3)
/// after orthogonalization.
fn corrector_recipe(r: &RegimeSpec, t: &[f64; 6], eps: f64, r_eps: f64) -> Option<(f64, [f64; 6])> {
    let mut w = [0.0; 6];
    let pre = match r.tag {
        RegimeTag::Critical3 => {
            w[1] = t[0];
            w[2] = t[1];
            -1.0 / (eps * eps * r_eps)
        }
        RegimeTag::Critical1 => {
            w[0] = t[2];
            -1.0 / (eps * r_eps)
        }
        RegimeTag::CriticalThird => {
            w[3] = t[3];
            w[4] = t[4];
            w[5] = t[5];
            -1.0 / eps
        }
        _ => return None,
    };
    Some((pre, w))
}

/// `corrector_eval`: `P^eps(z)`; zero outside the truncated box and in non-critical regimes.
pub fn corrector_eval(
    r: &RegimeSpec,
    set: Option<&CapacitarySet>,
    t: &[f64; 6],
    eps: f64,
    r_eps: f64,
    z: &Point3,
) -> Result<Matrix3<f64>> {
    let Some((pre, w)) = corrector_recipe(r, t, eps, r_eps) else {
        return Ok(Matrix3::zeros());
    };
    if w.iter().all(|&v| v == 0.0) {
        return Ok(Matrix3::zeros());
    }
    let set = set.ok_or_else(|| Error::Regime(format!("{} needs capacitary potentials", r.tag)))?;
    Ok(pre * set.orthogonal_strain_combination(&w, z))
}

/// `(1/|Omega^eps|) int |P^eps(x/(eps r))|^2 dx` over the part of the truncated box that
/// maps inside the cylinder `(0,1) x eps S`.
pub fn corrector_mass(
    r: &RegimeSpec,
    set: &CapacitarySet,
    t: &[f64; 6],
    eps: f64,
    r_eps: f64,
    section: &crate::geometry::Shape2,
) -> f64 {
    let Some((pre, w)) = corrector_recipe(r, t, eps, r_eps) else {
        return 0.0;
    };
    let s = eps * r_eps;
    let total = set.strain_mass(&w, |z| {
        let x1 = s * z[0];
        x1 <= 1.0 && section.contains([r_eps * z[1], r_eps * z[2]], 1e-12)
    });
    pre * pre * s.powi(3) * total / (eps * eps * section.area())
}
